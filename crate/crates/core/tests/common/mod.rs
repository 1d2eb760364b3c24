//! Reference computations used by the integration tests. None of these call into the
//! library's numerical kernels; they only read geometry and field values from it.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use gaugelab::fields::MatrixPotential;
use gaugelab::geometry::Domain;
use gaugelab::transport::Path;
use gaugelab::{CMat, Vec2, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn fro(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dist(a: &CMat, b: &CMat) -> f64 {
    fro(&(a - b))
}

// ------------------------------------------------------------------ quadrature

/// Composite 7-point Gauss–Legendre on `[a, b]`.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 4] = [0.0, 0.405_845_151_377_397_2, 0.741_531_185_599_394_4, 0.949_107_912_342_758_5];
    const W: [f64; 4] = [0.417_959_183_673_469_4, 0.381_830_050_505_118_9, 0.279_705_391_489_276_7, 0.129_484_966_168_869_7];
    let half = 0.5 * (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let mid = a + (2 * p + 1) as f64 * half;
        s += W[0] * f(mid);
        for k in 1..4 {
            s += W[k] * (f(mid - half * X[k]) + f(mid + half * X[k]));
        }
    }
    s * half
}

/// `∫_γ A·dx` for a scalar (m = 1) potential.
pub fn line_integral(pot: &MatrixPotential, path: &Path) -> C64 {
    let mut total = c(0.0, 0.0);
    for piece in path.pieces() {
        let len = piece.length();
        let panels = ((len / 0.02).ceil() as usize).max(4);
        let f = |t: f64| {
            let (x, v) = piece.eval(t);
            let p = pot.eval(x).expect("potential");
            p.a[0][(0, 0)] * v.x + p.a[1][(0, 0)] * v.y
        };
        total += c(quad(|t| f(t).re, 0.0, len, panels), quad(|t| f(t).im, 0.0, len, panels));
    }
    total
}

/// Exact `exp(−i∫A)` for a scalar potential.
pub fn scalar_transport(pot: &MatrixPotential, path: &Path) -> C64 {
    (c(0.0, -1.0) * line_integral(pot, path)).exp()
}

// ------------------------------------------------------------------ Bessel

/// `J_n(x)` by its power series, adequate for `|x| ≲ 10`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let na = n.unsigned_abs();
    let mut term = 1.0;
    for k in 1..=na {
        term *= 0.5 * x / k as f64;
    }
    let mut s = 0.0;
    for k in 0..100u64 {
        s += term;
        term *= -0.25 * x * x / ((k + 1) as f64 * (k + 1 + na) as f64);
        if term.abs() < 1e-300 {
            break;
        }
    }
    if n < 0 && na % 2 == 1 {
        -s
    } else {
        s
    }
}

/// Free DtN eigenvalue on the disk of radius `r`: `k J_n'(kr) / J_n(kr)`.
pub fn disk_eigenvalue(n: i64, k: f64, r: f64) -> f64 {
    let x = k * r;
    k * 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x)) / bessel_j(n, x)
}

// ------------------------------------------------------------------ expm

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn expm_taylor(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = fro(a);
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let b = a * c(0.5f64.powi(s), 0.0);
    let mut sum = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..30 {
        term = &term * &b * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

// ------------------------------------------------------------------ grid Dijkstra

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Distance to the outer boundary on an `n × n` grid graph over the bounding box,
/// restricted to nodes inside the domain. Edges join nodes up to `reach` cells apart
/// whose connecting segment stays inside. Nodes within two cells of the outer curve
/// are seeded with their exact distance to it.
pub struct GridDistance {
    pub n: usize,
    pub lo: Vec2,
    pub step: f64,
    pub dist: Vec<f64>,
    inside: Vec<bool>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl GridDistance {
    pub fn new(domain: &Domain, n: usize, reach: i64) -> Self {
        let bb = domain.bbox();
        let lo = Vec2::new(bb.min.x, bb.min.y);
        let step = (bb.max.x - bb.min.x).max(bb.max.y - bb.min.y) / (n - 1) as f64;
        let pos = |i: usize| lo + Vec2::new((i % n) as f64, (i / n) as f64) * step;
        let inside: Vec<bool> = (0..n * n).map(|i| domain.contains(pos(i))).collect();
        let mut dirs = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if (dx, dy) != (0, 0) && gcd(dx, dy) == 1 {
                    dirs.push((dx, dy));
                }
            }
        }
        let mut dist = vec![f64::INFINITY; n * n];
        let mut heap = BinaryHeap::new();
        for i in 0..n * n {
            if !inside[i] {
                continue;
            }
            let (curve, d) = domain.boundary_distance(pos(i));
            if curve == 0 && d < 2.0 * step {
                dist[i] = d;
                heap.push(Item(d, i));
            }
        }
        let seg_inside = |p: Vec2, q: Vec2| {
            let k = ((q - p).norm() / (0.25 * step)).ceil() as usize;
            (1..k).all(|j| domain.contains(p + (q - p) * (j as f64 / k as f64)))
        };
        while let Some(Item(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            let (ix, iy) = ((i % n) as i64, (i / n) as i64);
            for &(dx, dy) in &dirs {
                let (jx, jy) = (ix + dx, iy + dy);
                if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                    continue;
                }
                let j = jy as usize * n + jx as usize;
                if !inside[j] {
                    continue;
                }
                let nd = d + step * ((dx * dx + dy * dy) as f64).sqrt();
                if nd < dist[j] && seg_inside(pos(i), pos(j)) {
                    dist[j] = nd;
                    heap.push(Item(nd, j));
                }
            }
        }
        GridDistance { n, lo, step, dist, inside }
    }

    pub fn position(&self, i: usize) -> Vec2 {
        self.lo + Vec2::new((i % self.n) as f64, (i / self.n) as f64) * self.step
    }

    /// Distance at an arbitrary point: best node within a few cells plus the straight hop.
    pub fn at(&self, domain: &Domain, x: Vec2) -> f64 {
        let r = 3i64;
        let fx = ((x.x - self.lo.x) / self.step).round() as i64;
        let fy = ((x.y - self.lo.y) / self.step).round() as i64;
        let mut best = f64::INFINITY;
        for ix in fx - r..=fx + r {
            for iy in fy - r..=fy + r {
                if ix < 0 || iy < 0 || ix >= self.n as i64 || iy >= self.n as i64 {
                    continue;
                }
                let i = iy as usize * self.n + ix as usize;
                if !self.inside[i] || !self.dist[i].is_finite() {
                    continue;
                }
                let p = self.position(i);
                let k = 16;
                if (1..k).all(|j| domain.contains(x + (p - x) * (j as f64 / k as f64))) {
                    best = best.min(self.dist[i] + (p - x).norm());
                }
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

// ------------------------------------------------------------------ sampling

pub fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if p.norm() < r {
            return p;
        }
    }
}

pub fn random_polylines(seed: u64, n: usize, r: f64) -> Vec<Path> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(2..6);
            let pts: Vec<Vec2> = (0..k).map(|_| random_point(&mut rng, r)).collect();
            Path::polyline(&pts).expect("polyline")
        })
        .collect()
}

/// Least-squares slope of `ln e` against `ln h`.
pub fn slope(hs: &[f64], es: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

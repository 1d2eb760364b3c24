//! Invariant battery behind the `verify-suite` task, with its own closed-form oracles.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::billiards::{generator_loops, trace, trace_reversed, RayFan, TraceOptions};
use crate::dtn::{boundary_trace, compare_dtn, conjugate_dtn, dtn_matrix, modes, DtnMatrix, DtnOptions};
use crate::fields::{gauge_transform, GaugeElement, MatrixPotential};
use crate::geometry::{Domain, DomainSpec};
use crate::linalg::{self, c, from_real, identity, CMat, Vec2, C64};
use crate::reconstruct::{broken_ray_endpoint_check, gauge_residual, homotopy_residual, reconstruct_gauge, segment_unobstructed, stencil_samples};
use crate::transport::{adjoint_transport, holonomy, transport, Path, PathPiece, TransportOptions};

/// Battery sizes and tolerances; defaults are the acceptance values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSpec {
    /// Run only these checks (by id); empty runs all.
    pub checks: Vec<String>,
    pub pairs: usize,
    pub paths_per_pair: usize,
    pub h: f64,
    pub equivariance_tol: f64,
    pub order_h0: f64,
    pub order_halvings: usize,
    pub order_slope: f64,
    pub order_slope_tol: f64,
    pub unitarity_tol: f64,
    pub adjoint_tol: f64,
    pub holonomy_tol: f64,
    pub homotopy_tol: f64,
    pub vortex_tol: f64,
    pub fan: RayFan,
    pub endpoint_tol: f64,
    pub max_tangential_fraction: f64,
    /// Inverse grid spacings for the DtN checks.
    pub dtn_grids: Vec<f64>,
    pub dtn_max_mode: i64,
    pub bessel_tol: f64,
    pub leakage_tol: f64,
    pub dtn_slope: f64,
    pub dtn_slope_tol: f64,
    pub gauge_dtn_tol: f64,
    /// Modes kept when checking the conjugation identity.
    pub conjugation_modes: i64,
    pub reconstruct_tol: f64,
    pub fd_spacing: f64,
    pub residual_a_tol: f64,
    pub residual_v_tol: f64,
    pub billiard_tol: f64,
    pub reversal_tol: f64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            checks: vec![],
            pairs: 20,
            paths_per_pair: 10,
            h: 1e-3,
            equivariance_tol: 1e-7,
            order_h0: 1e-2,
            order_halvings: 4,
            order_slope: 4.0,
            order_slope_tol: 0.2,
            unitarity_tol: 1e-9,
            adjoint_tol: 1e-9,
            holonomy_tol: 1e-8,
            homotopy_tol: 1e-7,
            vortex_tol: 1e-6,
            fan: RayFan::default(),
            endpoint_tol: 1e-7,
            max_tangential_fraction: 0.05,
            dtn_grids: vec![64.0, 128.0, 256.0],
            dtn_max_mode: 8,
            bessel_tol: 0.02,
            leakage_tol: 1e-3,
            dtn_slope: 2.0,
            dtn_slope_tol: 0.3,
            gauge_dtn_tol: 1e-2,
            conjugation_modes: 4,
            reconstruct_tol: 1e-7,
            fd_spacing: 1e-3,
            residual_a_tol: 1e-4,
            residual_v_tol: 1e-6,
            billiard_tol: 1e-10,
            reversal_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub id: String,
    pub pass: bool,
    /// Measured values with their limits, e.g. `max error 3.1e-11 <= 1e-7`.
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<SuiteCheck>,
}

impl SuiteReport {
    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.id.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{:<w$}  {}  {}\n", c.id, if c.pass { "PASS" } else { "FAIL" }, c.detail));
        }
        s.push_str(&format!("{} of {} checks passed\n", self.checks.len() - self.failed(), self.checks.len()));
        s
    }
}

pub const CHECK_IDS: [&str; 11] = [
    "equivariance",
    "transport-order",
    "unitarity-determinant",
    "adjoint",
    "aharonov-bohm",
    "homotopy",
    "broken-ray-endpoints",
    "disk-dtn-bessel",
    "dtn-gauge-invariance",
    "reconstruction",
    "billiard-oracle",
];

type CheckResult = Result<(bool, String), String>;

/// Runs the selected checks in order.
pub fn run_suite(spec: &SuiteSpec, seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    for id in CHECK_IDS {
        if !spec.checks.is_empty() && !spec.checks.iter().any(|c| c == id) {
            continue;
        }
        let t = Instant::now();
        let r = match id {
            "equivariance" => check_equivariance(spec, seed),
            "transport-order" => check_order(spec, seed),
            "unitarity-determinant" => check_unitarity(spec, seed),
            "adjoint" => check_adjoint(spec, seed),
            "aharonov-bohm" => check_ab(spec),
            "homotopy" => check_homotopy(spec, seed),
            "broken-ray-endpoints" => check_endpoints(spec, seed),
            "disk-dtn-bessel" => check_bessel(spec),
            "dtn-gauge-invariance" => check_gauge_dtn(spec, seed),
            "reconstruction" => check_reconstruction(spec, seed),
            _ => check_billiards(spec),
        };
        let (pass, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
        checks.push(SuiteCheck { id: id.into(), pass, detail, seconds: t.elapsed().as_secs_f64() });
    }
    SuiteReport { checks }
}

// ---------------------------------------------------------------- oracles

const GL_NODES: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 3] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];

/// Composite 5-point Gauss–Legendre rule on `[a, b]` with `panels` panels.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let half = 0.5 * (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (2 * p + 1) as f64 * half;
        sum += GL_WEIGHTS[0] * f(mid);
        for k in 1..3 {
            sum += GL_WEIGHTS[k] * (f(mid - half * GL_NODES[k]) + f(mid + half * GL_NODES[k]));
        }
    }
    sum * half
}

/// `∫_γ A·dx` for a scalar potential, by Gauss–Legendre on every piece.
pub fn line_integral(pot: &MatrixPotential, path: &Path) -> Result<C64, String> {
    let mut total = c(0.0, 0.0);
    for piece in path.pieces() {
        let len = piece.length();
        let panels = ((len / 0.01).ceil() as usize).max(8);
        let integrand = |t: f64| -> C64 {
            let (x, v) = piece.eval(t);
            match pot.eval(x) {
                Ok(p) => p.a[0][(0, 0)] * v.x + p.a[1][(0, 0)] * v.y,
                Err(_) => c(f64::NAN, f64::NAN),
            }
        };
        let re = gauss_legendre(|t| integrand(t).re, 0.0, len, panels);
        let im = gauss_legendre(|t| integrand(t).im, 0.0, len, panels);
        if !re.is_finite() || !im.is_finite() {
            return Err("potential evaluation failed along the path".into());
        }
        total += c(re, im);
    }
    Ok(total)
}

/// Bessel function of the first kind by its power series (small arguments).
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let na = n.unsigned_abs() as i64;
    let mut term = (0.5 * x).powi(na as i32) / (1..=na).map(|k| k as f64).product::<f64>();
    let mut sum = 0.0;
    for k in 0..80 {
        sum += term;
        term *= -0.25 * x * x / ((k + 1) as f64 * (k + 1 + na) as f64);
    }
    if n < 0 && na % 2 == 1 {
        -sum
    } else {
        sum
    }
}

/// DtN eigenvalue `k J_n'(kR)/J_n(kR)` of the free scalar problem on a disk of radius `R`.
pub fn disk_dtn_eigenvalue(n: i64, k: f64, radius: f64) -> f64 {
    let x = k * radius;
    k * 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x)) / bessel_j(n, x)
}

/// Largest relative diagonal error against the Bessel eigenvalues and the off-diagonal
/// leakage `max|L_ln| / max|L_nn|`, over modes `|n| ≤ max_mode` (all modes if `None`).
pub fn bessel_disk_errors_upto(l: &DtnMatrix, radius: f64, max_mode: Option<i64>) -> (f64, f64) {
    let ms = modes(l.n_b);
    let keep: Vec<usize> = (0..ms.len()).filter(|&i| max_mode.map_or(true, |mm| ms[i].abs() <= mm)).collect();
    let (mut rel, mut diag, mut off) = (0.0f64, 0.0f64, 0.0f64);
    for &i in &keep {
        let lam = disk_dtn_eigenvalue(ms[i], l.k.re, radius);
        let z = l.entries[(i, i)];
        rel = rel.max((z - c(lam, 0.0)).norm() / lam.abs());
        diag = diag.max(z.norm());
        for &j in &keep {
            if i != j {
                off = off.max(l.entries[(i, j)].norm());
            }
        }
    }
    (rel, off / diag)
}

pub fn bessel_disk_errors(l: &DtnMatrix, radius: f64) -> (f64, f64) {
    bessel_disk_errors_upto(l, radius, None)
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_slope(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// First intersection `τ > τ_min` of the ray `x + τd` with a circle, by the quadratic formula.
fn circle_hit(x: Vec2, d: Vec2, center: Vec2, r: f64, inside: bool) -> Option<f64> {
    let f = x - center;
    let b = f.dot(&d);
    let cc = f.norm_squared() - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // stable roots
    let q = if b > 0.0 { -b - sq } else { -b + sq };
    let (t1, t2) = if q != 0.0 { (q, cc / q) } else { (0.0, 0.0) };
    let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
    let tmin = 1e-9;
    if inside {
        (hi > tmin).then_some(hi)
    } else if lo > tmin {
        Some(lo)
    } else {
        None
    }
}

// ---------------------------------------------------------------- batteries

fn unit_disk() -> Domain {
    Domain::new(DomainSpec::unit_disk()).expect("unit disk")
}

fn disk_with_obstacle() -> Domain {
    Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.3, 0.1], 0.25)).expect("domain")
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if p.norm() < r {
            return p;
        }
    }
}

fn random_polylines(seed: u64, n: usize) -> Vec<Path> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(2..6);
            let pts: Vec<Vec2> = (0..k).map(|_| random_point(&mut rng, 0.9)).collect();
            Path::polyline(&pts).expect("polyline")
        })
        .collect()
}

fn battery(spec: &SuiteSpec, seed: u64) -> Vec<(MatrixPotential, GaugeElement, Vec<Path>)> {
    (0..spec.pairs)
        .map(|i| {
            let s = seed.wrapping_mul(1000).wrapping_add(i as u64);
            let pot = MatrixPotential::random_smooth(2, s, 2, 1.0, false, false);
            let g = GaugeElement::random_smooth(2, s ^ 0x5a5a, 2, 0.5, i % 2 == 0, None);
            (pot, g, random_polylines(s ^ 0xa5a5, spec.paths_per_pair))
        })
        .collect()
}

fn check_equivariance(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let opts = TransportOptions::fast(spec.h);
    let errs: Vec<f64> = battery(spec, seed)
        .par_iter()
        .map(|(pot, g, paths)| -> Result<f64, String> {
            let pg = gauge_transform(pot, g).map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for p in paths {
                let c0 = transport(pot, p, &opts).map_err(|e| e.to_string())?.c;
                let c1 = transport(&pg, p, &opts).map_err(|e| e.to_string())?.c;
                let gs = g.eval(p.start()).map_err(|e| e.to_string())?;
                let ge = g.eval(p.end()).map_err(|e| e.to_string())?;
                let want = linalg::inverse(&ge).ok_or("singular gauge")? * c0 * gs;
                worst = worst.max(linalg::dist(&c1, &want));
            }
            Ok(worst)
        })
        .collect::<Result<_, _>>()?;
    let worst = errs.into_iter().fold(0.0, f64::max);
    Ok((worst <= spec.equivariance_tol, format!("max |c' - g(end)^-1 c g(start)| = {worst:.3e} <= {:.0e}", spec.equivariance_tol)))
}

fn check_order(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let pot = MatrixPotential::random_smooth(1, seed ^ 0x0dd, 2, 4.0, false, false);
    let path = Path::new(vec![
        PathPiece::Segment { a: Vec2::new(-0.7, -0.2), b: Vec2::new(0.5, 0.4) },
        PathPiece::Arc { center: Vec2::new(0.0, 0.0), radius: 0.5f64.hypot(0.4), theta0: 0.4f64.atan2(0.5), sweep: 2.0 },
    ])
    .map_err(|e| e.to_string())?;
    let exact = (c(0.0, -1.0) * line_integral(&pot, &path)?).exp();
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for k in 0..=spec.order_halvings {
        let h = spec.order_h0 / 2f64.powi(k as i32);
        let r = transport(&pot, &path, &TransportOptions::fast(h)).map_err(|e| e.to_string())?;
        hs.push(r.h);
        errs.push((r.c[(0, 0)] - exact).norm());
    }
    let slope = fitted_slope(&hs, &errs);
    let ok = (slope - spec.order_slope).abs() <= spec.order_slope_tol;
    Ok((ok, format!("slope {slope:.3} (target {} +- {}), errors {:.2e} .. {:.2e}", spec.order_slope, spec.order_slope_tol, errs[0], errs[errs.len() - 1])))
}

fn check_unitarity(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let opts = TransportOptions::fast(spec.h);
    let (mut unit, mut det) = (0.0f64, 0.0f64);
    for i in 0..spec.pairs.min(10) {
        let s = seed.wrapping_add(77 + i as u64);
        let herm = MatrixPotential::random_smooth(2 + i % 2, s, 2, 1.0, true, false);
        let tl = MatrixPotential::random_smooth(2 + i % 2, s ^ 1, 2, 1.0, false, true);
        for p in random_polylines(s ^ 2, 3) {
            let cu = transport(&herm, &p, &opts).map_err(|e| e.to_string())?.c;
            unit = unit.max(linalg::unitarity_defect(&cu));
            let ct = transport(&tl, &p, &opts).map_err(|e| e.to_string())?.c;
            det = det.max((linalg::det(&ct) - c(1.0, 0.0)).norm());
        }
    }
    let ok = unit <= spec.unitarity_tol && det <= spec.unitarity_tol;
    Ok((ok, format!("|c*c - I| = {unit:.3e}, |det c - 1| = {det:.3e} <= {:.0e}", spec.unitarity_tol)))
}

fn check_adjoint(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let opts = TransportOptions::fast(spec.h);
    let errs: Vec<f64> = battery(spec, seed)
        .par_iter()
        .map(|(pot, _, paths)| -> Result<f64, String> {
            let mut worst = 0.0f64;
            for p in paths {
                let c0 = transport(pot, p, &opts).map_err(|e| e.to_string())?.c;
                let cs = adjoint_transport(pot, p, &opts).map_err(|e| e.to_string())?.c;
                let back = linalg::inverse(&cs.adjoint()).ok_or("singular adjoint transport")?;
                worst = worst.max(linalg::dist(&back, &c0));
            }
            Ok(worst)
        })
        .collect::<Result<_, _>>()?;
    let worst = errs.into_iter().fold(0.0, f64::max);
    Ok((worst <= spec.adjoint_tol, format!("max |(c_*^*)^-1 - c| = {worst:.3e} <= {:.0e}", spec.adjoint_tol)))
}

fn check_ab(spec: &SuiteSpec) -> CheckResult {
    let d = disk_with_obstacle();
    let alpha = 0.5;
    let pot = MatrixPotential::ab_vortex(alpha, Vec2::new(0.3, 0.1), &d).map_err(|e| e.to_string())?;
    let base = d.boundary_point(0, 0.0);
    let lp = generator_loops(&d, &base).map_err(|e| e.to_string())?.remove(0);
    let oracle = (c(0.0, -1.0) * line_integral(&pot, &lp)?).exp();
    let hol = holonomy(&pot, &lp, &TransportOptions::with_step(spec.h)).map_err(|e| e.to_string())?;
    let e_oracle = (hol[(0, 0)] - oracle).norm();
    let e_exact = (hol[(0, 0)] - c(-1.0, 0.0)).norm();
    let ok = e_oracle <= spec.holonomy_tol && e_exact <= spec.holonomy_tol;
    Ok((ok, format!("|hol - quadrature| = {e_oracle:.3e}, |hol + 1| = {e_exact:.3e} <= {:.0e}", spec.holonomy_tol)))
}

fn g0_bump(m: usize) -> GaugeElement {
    let gen = if m == 1 { from_real(1, &[1.0]) } else { from_real(2, &[0.4, 1.0, -0.6, -0.3]) };
    GaugeElement::exp_bump(Vec2::new(-0.1, -0.15), 0.8, 1.0, gen).expect("bump gauge")
}

fn check_homotopy(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let d = disk_with_obstacle();
    let base = d.boundary_point(0, PI);
    let pot = MatrixPotential::random_smooth(2, seed ^ 0x401, 2, 0.8, false, false);
    let pb = gauge_transform(&pot, &g0_bump(2)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x402);
    let mut worst = 0.0f64;
    let mut tried = 0;
    while tried < 10 {
        let x = random_point(&mut rng, 0.9);
        let via = random_point(&mut rng, 0.9);
        if !d.contains(x) || !segment_unobstructed(&d, base.position, via) || !segment_unobstructed(&d, via, x) || !segment_unobstructed(&d, base.position, x) {
            continue;
        }
        let p1 = Path::segment(base.position, x).map_err(|e| e.to_string())?;
        let p2 = Path::polyline(&[base.position, via, x]).map_err(|e| e.to_string())?;
        let r = homotopy_residual(&pot, &pb, &d, x, &p1, &p2, spec.h).map_err(|e| e.to_string())?;
        if r.winding_match {
            worst = worst.max(r.residual);
            tried += 1;
        }
    }
    // zero vs vortex along paths passing on either side of the obstacle
    let zero = MatrixPotential::zero(1);
    let vortex = MatrixPotential::ab_vortex(0.5, Vec2::new(0.3, 0.1), &d).map_err(|e| e.to_string())?;
    let b = d.boundary_point(0, 0.0).position;
    let x = Vec2::new(-0.3, 0.1);
    let above = Path::polyline(&[b, Vec2::new(0.3, 0.55), x]).map_err(|e| e.to_string())?;
    let below = Path::polyline(&[b, Vec2::new(0.3, -0.35), x]).map_err(|e| e.to_string())?;
    let r = homotopy_residual(&zero, &vortex, &d, x, &above, &below, spec.h).map_err(|e| e.to_string())?;
    let i1 = line_integral(&vortex, &above)?;
    let i2 = line_integral(&vortex, &below)?;
    let want = ((c(0.0, -1.0) * i1).exp() - (c(0.0, -1.0) * i2).exp()).norm();
    let dev = (r.residual - want).abs();
    let ok = worst <= spec.homotopy_tol && dev <= spec.vortex_tol && !r.winding_match;
    Ok((ok, format!("homotopic max {worst:.3e} <= {:.0e}; vortex residual {:.9} vs quadrature {want:.9} (|diff| {dev:.2e})", spec.homotopy_tol, r.residual)))
}

fn check_endpoints(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let d = disk_with_obstacle();
    let pot = MatrixPotential::random_smooth(2, seed ^ 0x701, 2, 0.8, false, false);
    let pb = gauge_transform(&pot, &g0_bump(2)).map_err(|e| e.to_string())?;
    let r = broken_ray_endpoint_check(&pot, &pb, &d, &spec.fan, spec.h).map_err(|e| e.to_string())?;
    let tf = r.tangential_fraction();
    let ok = r.max_mismatch <= spec.endpoint_tol && tf < spec.max_tangential_fraction;
    Ok((ok, format!("max mismatch {:.3e} <= {:.0e} over {} rays; tangential rejections {:.1}%", r.max_mismatch, spec.endpoint_tol, r.accepted.len(), 100.0 * tf)))
}

fn check_bessel(spec: &SuiteSpec) -> CheckResult {
    let d = unit_disk();
    let n_b = (2 * spec.dtn_max_mode + 1) as usize;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    let mut leak = 0.0;
    for &inv in &spec.dtn_grids {
        let l = dtn_matrix(&d, &MatrixPotential::zero(1), c(2.0, 0.0), n_b, &DtnOptions::new(1.0 / inv)).map_err(|e| e.to_string())?;
        let (e, lk) = bessel_disk_errors(&l, 1.0);
        hs.push(1.0 / inv);
        errs.push(e);
        leak = lk;
    }
    let slope = if hs.len() > 1 { fitted_slope(&hs, &errs) } else { f64::NAN };
    let fine = errs[errs.len() - 1];
    let ok = fine <= spec.bessel_tol && leak <= spec.leakage_tol && (slope - spec.dtn_slope).abs() <= spec.dtn_slope_tol;
    Ok((ok, format!("diagonal error {fine:.3e} <= {}, leakage {leak:.2e} <= {:.0e}, slope {slope:.3}", spec.bessel_tol, spec.leakage_tol)))
}

fn bump_potential() -> MatrixPotential {
    let m = |v: [f64; 8]| CMat::from_row_slice(2, 2, &[c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])]);
    MatrixPotential::bump(
        Vec2::new(-0.3, -0.2),
        0.6,
        m([0.8, 0.0, 0.3, -0.4, 0.3, 0.4, -0.5, 0.0]),
        m([-0.2, 0.1, 0.6, 0.0, 0.1, 0.2, 0.4, -0.3]),
        m([1.0, 0.2, 0.5, 0.0, -0.3, 0.1, -0.7, 0.0]),
    )
    .expect("bump potential")
}

fn check_gauge_dtn(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let d = disk_with_obstacle();
    let pot = bump_potential();
    let g0 = g0_bump(2);
    let pg0 = gauge_transform(&pot, &g0).map_err(|e| e.to_string())?;
    let g = GaugeElement::random_smooth(2, seed ^ 0x901, 2, 0.4, true, None);
    let pg = gauge_transform(&pot, &g).map_err(|e| e.to_string())?;
    let k = c(2.0, 0.0);
    let n_b = (2 * spec.dtn_max_mode + 1) as usize;
    let mut hs = Vec::new();
    let mut rels = Vec::new();
    let mut conj_rel = 0.0;
    for (i, &inv) in spec.dtn_grids.iter().enumerate() {
        let o = DtnOptions::new(1.0 / inv);
        let l = dtn_matrix(&d, &pot, k, n_b, &o).map_err(|e| e.to_string())?;
        let l0 = dtn_matrix(&d, &pg0, k, n_b, &o).map_err(|e| e.to_string())?;
        rels.push(compare_dtn(&l, &l0).map_err(|e| e.to_string())?.fro_rel);
        hs.push(1.0 / inv);
        if i + 1 == spec.dtn_grids.len() {
            let lg = dtn_matrix(&d, &pg, k, n_b, &o).map_err(|e| e.to_string())?;
            let tr = boundary_trace(&g.inverse(), &d, n_b).map_err(|e| e.to_string())?;
            let conj = conjugate_dtn(&l, &tr).map_err(|e| e.to_string())?;
            let cm = spec.conjugation_modes;
            conj_rel = compare_dtn(&conj.central(cm), &lg.central(cm)).map_err(|e| e.to_string())?.fro_rel;
        }
    }
    let slope = if hs.len() > 1 { fitted_slope(&hs, &rels) } else { f64::NAN };
    let fine = rels[rels.len() - 1];
    let ok = fine <= spec.gauge_dtn_tol && (slope - spec.dtn_slope).abs() <= spec.dtn_slope_tol && conj_rel <= spec.gauge_dtn_tol;
    Ok((ok, format!("G0 relative difference {fine:.3e} (slope {slope:.3}); conjugation identity {conj_rel:.3e} <= {:.0e}", spec.gauge_dtn_tol)))
}

fn check_reconstruction(spec: &SuiteSpec, seed: u64) -> CheckResult {
    let d = disk_with_obstacle();
    let base = d.boundary_point(0, PI);
    let pot = MatrixPotential::random_smooth(2, seed ^ 0xa01, 2, 0.8, false, false);
    let g0 = g0_bump(2);
    let pb = gauge_transform(&pot, &g0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa02);
    let mut pts = Vec::new();
    while pts.len() < 12 {
        let x = random_point(&mut rng, 0.95);
        if d.contains(x) && segment_unobstructed(&d, base.position, x) {
            pts.push(x);
        }
    }
    let centres: Vec<Vec2> = pts[..4].to_vec();
    let n_pts = pts.len();
    let boundary: Vec<Vec2> = (0..8).map(|i| d.boundary_point(0, 0.4 + i as f64 * 0.7).position).collect();
    let mut samples = pts.clone();
    samples.extend(&boundary);
    samples.extend(stencil_samples(&centres, spec.fd_spacing));
    let gf = reconstruct_gauge(&pot, &pb, &d, &base, &samples, spec.h).map_err(|e| e.to_string())?;
    let mut pointwise = 0.0f64;
    for k in 0..n_pts {
        let want = linalg::inverse(&g0.eval(samples[k]).map_err(|e| e.to_string())?).ok_or("singular")?;
        pointwise = pointwise.max(linalg::dist(&gf.matrices[k], &want));
    }
    let bdev = (n_pts..n_pts + boundary.len()).map(|k| linalg::dist(&gf.matrices[k], &identity(2))).fold(0.0, f64::max);
    let r = gauge_residual(&pot, &pb, &gf, spec.fd_spacing).map_err(|e| e.to_string())?;
    let ok = pointwise <= spec.reconstruct_tol && bdev <= spec.reconstruct_tol && r.a_residual <= spec.residual_a_tol && r.v_residual <= spec.residual_v_tol;
    Ok((ok, format!("|g - g0^-1| = {pointwise:.2e}, boundary |g - I| = {bdev:.2e}, residual A {:.2e} V {:.2e}", r.a_residual, r.v_residual)))
}

fn check_billiards(spec: &SuiteSpec) -> CheckResult {
    let (oc, orad) = (Vec2::new(0.3, 0.1), 0.25);
    let d = disk_with_obstacle();
    let opts = TraceOptions::default();
    let (mut worst, mut rev) = (0.0f64, 0.0f64);
    let mut traced = 0;
    for (bp, dir) in spec.fan.launches(&d) {
        let Ok(ray) = trace(&d, &bp, dir, &opts) else { continue };
        traced += 1;
        // closed-form replay
        let mut x = bp.position;
        let mut dd = dir.normalize();
        let mut pts = Vec::new();
        for _ in 0..ray.legs.len() {
            let t_ob = circle_hit(x, dd, oc, orad, false);
            let t_out = circle_hit(x, dd, Vec2::zeros(), 1.0, true).ok_or("oracle lost the ray")?;
            match t_ob {
                Some(t) if t < t_out => {
                    let p = x + dd * t;
                    let nu = (oc - p) / orad;
                    dd = dd - nu * (2.0 * dd.dot(&nu));
                    pts.push(p);
                    x = p;
                }
                _ => {
                    pts.push(x + dd * t_out);
                    break;
                }
            }
        }
        let got: Vec<Vec2> = ray.vertices()[1..].to_vec();
        if got.len() != pts.len() {
            return Ok((false, format!("oracle leg count mismatch for a ray from s = {:.4}", bp.s)));
        }
        for (a, b) in got.iter().zip(&pts) {
            worst = worst.max((a - b).norm());
        }
        let back = trace_reversed(&d, &ray, &opts).map_err(|e| e.to_string())?;
        rev = rev.max(super::tasks::reversal_deviation(&ray, &back));
    }
    let ok = worst <= spec.billiard_tol && rev <= spec.reversal_tol && traced > 0;
    Ok((ok, format!("{traced} rays: oracle deviation {worst:.2e} <= {:.0e}, reversal {rev:.2e} <= {:.0e}", spec.billiard_tol, spec.reversal_tol)))
}

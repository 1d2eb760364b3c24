//! Finite-difference assembly and sparse direct solution of
//! `−Δu − 2iA·∇u + (−i div A + A₁² + A₂² + V − k²)u = 0` with Dirichlet data.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::{ArmEnd, BoundaryTreatment, SolverGrid};
use crate::error::DtnError;
use crate::fields::MatrixPotential;
use crate::geometry::Domain;
use crate::linalg::{c, identity, CMat, Vec2, C64, I};

pub const DEFAULT_COND_LIMIT: f64 = 1e10;
pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub h_grid: f64,
    pub treatment: BoundaryTreatment,
    /// Estimated condition numbers above this raise `NearSingularSystem`.
    pub cond_limit: f64,
}

impl SolverOptions {
    pub fn new(h_grid: f64) -> Self {
        SolverOptions { h_grid, treatment: BoundaryTreatment::ShortleyWeller, cond_limit: DEFAULT_COND_LIMIT }
    }
}

/// Contribution of a boundary value to the right-hand side of one interior row.
struct BoundaryLink {
    row: usize,
    curve: usize,
    s: f64,
    /// Row-scaled `m×m` stencil block multiplying the boundary value.
    coef: CMat,
}

/// Factorized system for one `(domain, potential, k, grid)`.
pub struct System {
    pub grid: SolverGrid,
    pub m: usize,
    pub k: C64,
    lu: Lu<usize, C64>,
    links: Vec<BoundaryLink>,
    pub condition_estimate: f64,
}

fn check_wavelength(k: C64, h: f64) -> Result<(), DtnError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(DtnError::InvalidParameters(format!("grid spacing {h}")));
    }
    if k.norm() > 0.0 {
        let ppw = 2.0 * std::f64::consts::PI / k.norm() / h;
        if ppw < MIN_POINTS_PER_WAVELENGTH {
            return Err(DtnError::GridTooCoarse(ppw));
        }
    }
    Ok(())
}

/// First-derivative weights `(d_plus, d_minus, d_center)` on arms `hp`, `hm`.
fn first_weights(hp: f64, hm: f64) -> (f64, f64, f64) {
    (hm / (hp * (hp + hm)), -hp / (hm * (hp + hm)), (hp - hm) / (hp * hm))
}

/// Second-derivative weights `(c_plus, c_minus)`; the center weight is `−(c_plus + c_minus)`.
fn second_weights(hp: f64, hm: f64) -> (f64, f64) {
    (2.0 / (hp * (hp + hm)), 2.0 / (hm * (hp + hm)))
}

impl System {
    pub fn assemble(domain: &Domain, pot: &MatrixPotential, k: C64, opts: &SolverOptions) -> Result<System, DtnError> {
        check_wavelength(k, opts.h_grid)?;
        let grid = SolverGrid::new(domain, opts.h_grid, opts.treatment);
        let m = pot.m();
        let n = grid.n_interior();
        if n == 0 {
            return Err(DtnError::InvalidParameters("grid has no interior nodes".into()));
        }
        let k2 = k * k;
        // per-node blocks, computed in parallel
        let rows: Vec<Result<(Vec<(usize, CMat)>, Vec<BoundaryLink>), DtnError>> = grid
            .interior
            .par_iter()
            .enumerate()
            .map(|(row, node)| {
                let p = pot.eval(node.position)?;
                let div = pot.div_a(node.position)?;
                let mut q = &p.a[0] * &p.a[0] + &p.a[1] * &p.a[1] + &p.v - div * I - identity(m) * k2;
                let [e, w, nn, s] = node.arms;
                let mut diag_scalar = 0.0;
                let mut entries: Vec<(ArmEnd, CMat)> = Vec::with_capacity(4);
                for (plus, minus, a) in [(e, w, &p.a[0]), (nn, s, &p.a[1])] {
                    let (cp, cm) = second_weights(plus.length, minus.length);
                    let (dp, dm, dc) = first_weights(plus.length, minus.length);
                    diag_scalar += cp + cm;
                    q += a * (-2.0 * I * dc);
                    entries.push((plus.end, identity(m) * c(-cp, 0.0) + a * (-2.0 * I * dp)));
                    entries.push((minus.end, identity(m) * c(-cm, 0.0) + a * (-2.0 * I * dm)));
                }
                let scale = 1.0 / diag_scalar;
                let diag = (q + identity(m) * c(diag_scalar, 0.0)) * c(scale, 0.0);
                let mut blocks = vec![(row, diag)];
                let mut links = Vec::new();
                for (end, blk) in entries {
                    let blk = blk * c(scale, 0.0);
                    match end {
                        ArmEnd::Node(col) => blocks.push((col, blk)),
                        ArmEnd::Boundary { curve, s } => links.push(BoundaryLink { row, curve, s, coef: blk }),
                    }
                }
                Ok((blocks, links))
            })
            .collect();
        let mut triplets = Vec::with_capacity(n * 5 * m * m);
        let mut links = Vec::new();
        let mut col_sums = vec![0.0; n * m];
        for (row, r) in rows.into_iter().enumerate() {
            let (blocks, l) = r?;
            for (col, blk) in blocks {
                for i in 0..m {
                    for j in 0..m {
                        let v = blk[(i, j)];
                        if v != c(0.0, 0.0) {
                            triplets.push(Triplet::new(row * m + i, col * m + j, v));
                            col_sums[col * m + j] += v.norm();
                        }
                    }
                }
            }
            links.extend(l);
        }
        let a = SparseColMat::<usize, C64>::try_new_from_triplets(n * m, n * m, &triplets)
            .map_err(|e| DtnError::Factorization(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| DtnError::Factorization(format!("{e:?}")))?;
        let norm1 = col_sums.iter().cloned().fold(0.0, f64::max);
        let mut sys = System { grid, m, k, lu, links, condition_estimate: 0.0 };
        sys.condition_estimate = norm1 * sys.inverse_norm_estimate(n * m);
        if !(sys.condition_estimate <= opts.cond_limit) {
            return Err(DtnError::NearSingularSystem(sys.condition_estimate));
        }
        Ok(sys)
    }

    /// Power iteration on `A⁻¹` from a seeded start vector.
    fn inverse_norm_estimate(&self, dim: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x = Mat::<C64>::from_fn(dim, 1, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut est = 0.0;
        for _ in 0..4 {
            let nx = x.norm_l2();
            if !(nx > 0.0) || !nx.is_finite() {
                return f64::INFINITY;
            }
            x = x * faer::Scale(c(1.0 / nx, 0.0));
            self.lu.solve_in_place(x.as_mut());
            est = x.norm_l2();
        }
        if est.is_finite() {
            est
        } else {
            f64::INFINITY
        }
    }

    pub fn n_unknowns(&self) -> usize {
        self.grid.n_interior() * self.m
    }

    /// Solves for several Dirichlet data sets at once. `data[col](curve, s)` returns the
    /// boundary value (an `m`-vector) on the outer curve; obstacles carry zero data.
    /// Result: column-major `n_unknowns × data.len()` with index `node·m + channel`.
    pub fn solve(&self, data: &[&(dyn Fn(f64) -> Vec<C64> + Sync)]) -> Mat<C64> {
        let n = self.n_unknowns();
        let m = self.m;
        let mut b = Mat::<C64>::zeros(n, data.len());
        for (col, f) in data.iter().enumerate() {
            for link in &self.links {
                if link.curve != 0 {
                    continue;
                }
                let fv = f(link.s);
                for i in 0..m {
                    let mut acc = c(0.0, 0.0);
                    for j in 0..m {
                        acc += link.coef[(i, j)] * fv[j];
                    }
                    b[(link.row * m + i, col)] -= acc;
                }
            }
        }
        self.lu.solve_in_place(b.as_mut());
        b
    }
}

/// Grid solution of one Dirichlet problem.
#[derive(Clone, Debug)]
pub struct GridSolution {
    pub m: usize,
    pub h: f64,
    pub positions: Vec<Vec2>,
    /// `values[node]` is the `m`-vector `u` at that interior node.
    pub values: Vec<Vec<C64>>,
    pub condition_estimate: f64,
}

impl GridSolution {
    /// Value at the interior node nearest to `x`, if it is within half a cell.
    pub fn at(&self, x: Vec2) -> Option<&[C64]> {
        self.positions
            .iter()
            .position(|p| (p - x).norm() <= 0.5 * self.h * (1.0 + 1e-12))
            .map(|k| &self.values[k][..])
    }
}

/// Solves the Schrödinger problem with data `f` on the outer curve (arc length `s`) and zero on obstacles.
pub fn solve_schrodinger(
    domain: &Domain,
    pot: &MatrixPotential,
    k: C64,
    f: &(dyn Fn(f64) -> Vec<C64> + Sync),
    opts: &SolverOptions,
) -> Result<GridSolution, DtnError> {
    let sys = System::assemble(domain, pot, k, opts)?;
    let sol = sys.solve(&[f]);
    let m = sys.m;
    let values = (0..sys.grid.n_interior()).map(|i| (0..m).map(|j| sol[(i * m + j, 0)]).collect()).collect();
    Ok(GridSolution {
        m,
        h: opts.h_grid,
        positions: sys.grid.interior.iter().map(|n| n.position).collect(),
        values,
        condition_estimate: sys.condition_estimate,
    })
}

/// Weights of a least-squares normal-derivative fit at one boundary point:
/// `∂_ν u ≈ Σ w·u(node) + Σ w_b·f(s_b)`.
#[derive(Clone, Debug)]
pub struct NormalFit {
    pub nodes: Vec<(usize, f64)>,
    pub boundary: Vec<(f64, f64)>,
}

fn monomials(xi: f64, eta: f64, degree: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for py in 0..=total {
            let px = total - py;
            out.push(xi.powi(px as i32) * eta.powi(py as i32));
        }
    }
    out
}

/// Local polynomial fit (degree `degree`) around the outer-curve point at `s`, using interior
/// nodes within `radius·h` and exact boundary samples at `s + j·h`, `|j| ≤ 2`.
pub fn normal_fit(domain: &Domain, grid: &SolverGrid, s: f64, degree: usize, radius: f64) -> Result<NormalFit, DtnError> {
    let outer = domain.outer();
    let h = grid.h;
    let x0 = outer.point(s);
    let nu = outer.normal(s);
    let nodes = grid.interior_near(x0, radius * h);
    let bsamples: Vec<f64> = (-2..=2).map(|j| s + j as f64 * h).collect();
    let mut pts: Vec<Vec2> = nodes.iter().map(|&k| grid.interior[k].position).collect();
    pts.extend(bsamples.iter().map(|&sb| outer.point(sb)));
    let ncoef = (degree + 1) * (degree + 2) / 2;
    if pts.len() < ncoef + 2 {
        return Err(DtnError::InvalidParameters(format!("only {} fit points near s = {s:.4}", pts.len())));
    }
    let v = nalgebra::DMatrix::<f64>::from_fn(pts.len(), ncoef, |r, col| {
        let d = (pts[r] - x0) / h;
        monomials(d.x, d.y, degree)[col]
    });
    // gradient at x0 is (c_x, c_y)/h with c_x, c_y the linear coefficients (columns 1, 2)
    let svd = v.svd(true, true);
    let pinv = svd.pseudo_inverse(1e-12).map_err(|e| DtnError::InvalidParameters(e.to_string()))?;
    let w: Vec<f64> = (0..pts.len()).map(|r| (nu.x * pinv[(1, r)] + nu.y * pinv[(2, r)]) / h).collect();
    let n_int = nodes.len();
    Ok(NormalFit {
        nodes: nodes.into_iter().zip(w[..n_int].iter().cloned()).collect(),
        boundary: bsamples.into_iter().zip(w[n_int..].iter().cloned()).collect(),
    })
}

//! Frequency-domain forward solver and Dirichlet-to-Neumann matrices
//! `Λf = (∂_ν u + i(A·ν)u)|∂Ω₀` in a trigonometric basis on the outer curve.

mod grid;
mod solver;

pub use grid::{Arm, ArmEnd, BoundaryTreatment, InteriorNode, NodeKind, SolverGrid, SNAP_FRACTION};
pub use solver::{normal_fit, solve_schrodinger, GridSolution, NormalFit, SolverOptions, System, DEFAULT_COND_LIMIT};

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DtnError, FieldError};
use crate::fields::{GaugeElement, MatrixPotential};
use crate::geometry::Domain;
use crate::linalg::{self, c, CMat, C64};

pub const DEFAULT_K: f64 = 2.0;
pub const DEFAULT_FIT_DEGREE: usize = 2;
pub const DEFAULT_FIT_RADIUS: f64 = 3.0;

/// Mode numbers for `n_b` consecutive trigonometric modes centred at zero.
pub fn modes(n_b: usize) -> Vec<i64> {
    let lo = -(n_b as i64 / 2);
    (0..n_b as i64).map(|k| lo + k).collect()
}

/// `e_n(s) = exp(2πins/P)/√P`.
pub fn basis(n: i64, s: f64, period: f64) -> C64 {
    let ph = 2.0 * PI * n as f64 * s / period;
    c(ph.cos(), ph.sin()) / period.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtnOptions {
    pub solver: SolverOptions,
    /// Polynomial degree of the normal-derivative fit.
    pub fit_degree: usize,
    /// Fit radius in grid spacings.
    pub fit_radius: f64,
    /// Quadrature points on the outer curve; `None` means `max(4·N_b, P/h)`.
    pub n_quad: Option<usize>,
}

impl DtnOptions {
    pub fn new(h_grid: f64) -> Self {
        DtnOptions { solver: SolverOptions::new(h_grid), fit_degree: DEFAULT_FIT_DEGREE, fit_radius: DEFAULT_FIT_RADIUS, n_quad: None }
    }
}

/// DtN operator in the basis `e_n ⊗ channel`, index `mode·m + channel`.
#[derive(Clone, Debug, PartialEq)]
pub struct DtnMatrix {
    pub k: C64,
    pub n_b: usize,
    pub m: usize,
    pub period: f64,
    pub h_grid: f64,
    pub domain_hash: String,
    pub entries: CMat,
    pub condition_estimate: f64,
}

#[derive(Serialize, Deserialize)]
struct DtnJson {
    k: [f64; 2],
    n_b: usize,
    m: usize,
    modes: Vec<i64>,
    period: f64,
    h_grid: f64,
    domain_hash: String,
    condition_estimate: f64,
    entries: Vec<Vec<[f64; 2]>>,
}

const DTN_MAGIC: &[u8; 8] = b"GLDTN001";

impl DtnMatrix {
    pub fn modes(&self) -> Vec<i64> {
        modes(self.n_b)
    }

    pub fn dim(&self) -> usize {
        self.n_b * self.m
    }

    /// `m×m` block for output mode index `l`, input mode index `n`.
    pub fn block(&self, l: usize, n: usize) -> CMat {
        self.entries.view((l * self.m, n * self.m), (self.m, self.m)).into_owned()
    }

    /// Submatrix over the modes with `|n| ≤ max_mode`.
    pub fn central(&self, max_mode: i64) -> DtnMatrix {
        let keep: Vec<usize> = self.modes().iter().enumerate().filter(|(_, n)| n.abs() <= max_mode).map(|(i, _)| i).collect();
        let m = self.m;
        let dim = keep.len() * m;
        let entries = CMat::from_fn(dim, dim, |r, col| {
            self.entries[(keep[r / m] * m + r % m, keep[col / m] * m + col % m)]
        });
        DtnMatrix { n_b: keep.len(), entries, ..self.clone() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(DtnJson {
            k: [self.k.re, self.k.im],
            n_b: self.n_b,
            m: self.m,
            modes: self.modes(),
            period: self.period,
            h_grid: self.h_grid,
            domain_hash: self.domain_hash.clone(),
            condition_estimate: self.condition_estimate,
            entries: linalg::to_pairs(&self.entries),
        })
        .expect("dtn serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, DtnError> {
        let j: DtnJson = serde_json::from_value(v.clone()).map_err(|e| DtnError::InvalidParameters(e.to_string()))?;
        let entries = linalg::from_pairs(&j.entries).ok_or_else(|| DtnError::ShapeMismatch("ragged entries".into()))?;
        if entries.nrows() != j.n_b * j.m || entries.ncols() != j.n_b * j.m {
            return Err(DtnError::ShapeMismatch(format!("entries {}x{} for n_b={} m={}", entries.nrows(), entries.ncols(), j.n_b, j.m)));
        }
        Ok(DtnMatrix {
            k: c(j.k[0], j.k[1]),
            n_b: j.n_b,
            m: j.m,
            period: j.period,
            h_grid: j.h_grid,
            domain_hash: j.domain_hash,
            entries,
            condition_estimate: j.condition_estimate,
        })
    }

    /// Binary layout (little-endian): magic `GLDTN001`; u64 `n_b`, `m`; f64 `Re k`, `Im k`,
    /// `period`, `h_grid`, `condition_estimate`; 64 ASCII bytes of domain hash; row-major entries (re, im).
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(DTN_MAGIC)?;
        w.write_all(&(self.n_b as u64).to_le_bytes())?;
        w.write_all(&(self.m as u64).to_le_bytes())?;
        for v in [self.k.re, self.k.im, self.period, self.h_grid, self.condition_estimate] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut hash = [b' '; 64];
        for (d, s) in hash.iter_mut().zip(self.domain_hash.bytes()) {
            *d = s;
        }
        w.write_all(&hash)?;
        for r in 0..self.dim() {
            for col in 0..self.dim() {
                let z = self.entries[(r, col)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self, DtnError> {
        let bad = |e: std::io::Error| DtnError::InvalidParameters(format!("dtn binary: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != DTN_MAGIC {
            return Err(DtnError::InvalidParameters("dtn binary: bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8], DtnError> {
            r.read_exact(&mut b8).map_err(bad)?;
            Ok(b8)
        };
        let n_b = u64::from_le_bytes(next(&mut r)?) as usize;
        let m = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut f = [0f64; 5];
        for v in f.iter_mut() {
            *v = f64::from_le_bytes(next(&mut r)?);
        }
        if n_b == 0 || m == 0 || n_b * m > 1 << 14 {
            return Err(DtnError::InvalidParameters(format!("dtn binary: bad sizes n_b={n_b} m={m}")));
        }
        let mut hash = [0u8; 64];
        r.read_exact(&mut hash).map_err(bad)?;
        let domain_hash = String::from_utf8_lossy(&hash).trim_end().to_string();
        let dim = n_b * m;
        let mut entries = CMat::zeros(dim, dim);
        for row in 0..dim {
            for col in 0..dim {
                let re = f64::from_le_bytes(next(&mut r)?);
                let im = f64::from_le_bytes(next(&mut r)?);
                entries[(row, col)] = c(re, im);
            }
        }
        Ok(DtnMatrix { k: c(f[0], f[1]), n_b, m, period: f[2], h_grid: f[3], domain_hash, entries, condition_estimate: f[4] })
    }
}

/// Assembles the DtN matrix: one solve per basis mode and channel against a shared factorization,
/// conormal trace from local polynomial fits, trapezoid projection on the outer curve.
pub fn dtn_matrix(domain: &Domain, pot: &MatrixPotential, k: C64, n_b: usize, opts: &DtnOptions) -> Result<DtnMatrix, DtnError> {
    if n_b == 0 {
        return Err(DtnError::InvalidParameters("N_b must be positive".into()));
    }
    let sys = System::assemble(domain, pot, k, &opts.solver)?;
    dtn_from_system(domain, pot, &sys, n_b, opts)
}

/// DtN matrix from an already factorized system.
pub fn dtn_from_system(domain: &Domain, pot: &MatrixPotential, sys: &System, n_b: usize, opts: &DtnOptions) -> Result<DtnMatrix, DtnError> {
    let m = sys.m;
    let h = sys.grid.h;
    let outer = domain.outer();
    let period = outer.length();
    let mode_list = modes(n_b);
    let n_q = opts.n_quad.unwrap_or_else(|| (4 * n_b).max((period / h).ceil() as usize));
    let quad_s: Vec<f64> = (0..n_q).map(|q| period * q as f64 / n_q as f64).collect();
    let fits = quad_s
        .par_iter()
        .map(|&s| normal_fit(domain, &sys.grid, s, opts.fit_degree, opts.fit_radius))
        .collect::<Result<Vec<_>, _>>()?;
    // A·ν at quadrature points
    let a_nu = quad_s
        .iter()
        .map(|&s| pot.a_dot(outer.point(s), outer.normal(s)))
        .collect::<Result<Vec<_>, FieldError>>()?;

    let data: Vec<Box<dyn Fn(f64) -> Vec<C64> + Sync>> = mode_list
        .iter()
        .flat_map(|&n| {
            (0..m).map(move |j| {
                Box::new(move |s: f64| {
                    let mut v = vec![c(0.0, 0.0); m];
                    v[j] = basis(n, s, period);
                    v
                }) as Box<dyn Fn(f64) -> Vec<C64> + Sync>
            })
        })
        .collect();
    let refs: Vec<&(dyn Fn(f64) -> Vec<C64> + Sync)> = data.iter().map(|b| b.as_ref()).collect();
    let sol = sys.solve(&refs);

    let dim = n_b * m;
    let w = period / n_q as f64;
    let mut entries = CMat::zeros(dim, dim);
    // conjugated basis at quadrature points
    let ebar: Vec<Vec<C64>> = mode_list.iter().map(|&l| quad_s.iter().map(|&s| basis(l, s, period).conj()).collect()).collect();
    for (ni, &n) in mode_list.iter().enumerate() {
        for j in 0..m {
            let col = ni * m + j;
            for (q, fit) in fits.iter().enumerate() {
                // Λf at quadrature point q, all output channels
                let mut lam = vec![c(0.0, 0.0); m];
                for &(node, wt) in &fit.nodes {
                    for (i, l) in lam.iter_mut().enumerate() {
                        *l += sol[(node * m + i, col)] * wt;
                    }
                }
                for &(sb, wt) in &fit.boundary {
                    lam[j] += basis(n, sb, period) * wt;
                }
                let fq = basis(n, quad_s[q], period);
                for (i, l) in lam.iter_mut().enumerate() {
                    *l += crate::linalg::I * a_nu[q][(i, j)] * fq;
                }
                for (li, eb) in ebar.iter().enumerate() {
                    for (i, l) in lam.iter().enumerate() {
                        entries[(li * m + i, col)] += eb[q] * l * w;
                    }
                }
            }
        }
    }
    Ok(DtnMatrix {
        k: sys.k,
        n_b,
        m,
        period,
        h_grid: h,
        domain_hash: domain.hash(),
        entries,
        condition_estimate: sys.condition_estimate,
    })
}

/// `g` evaluated at `n` equispaced arc-length nodes `s_p = pP/n` of the outer curve.
pub fn boundary_trace(g: &GaugeElement, domain: &Domain, n: usize) -> Result<Vec<CMat>, FieldError> {
    let outer = domain.outer();
    (0..n).map(|p| g.eval(outer.point(outer.length() * p as f64 / n as f64))).collect()
}

/// Nodal transform `T[p, n] = e_n(s_p)` at the `N_b` nodes `s_p = pP/N_b`; `T⁻¹ = (P/N_b)·T*`.
fn nodal_transform(n_b: usize, period: f64) -> CMat {
    let ms = modes(n_b);
    CMat::from_fn(n_b, n_b, |p, n| basis(ms[n], period * p as f64 / n_b as f64, period))
}

/// Basis matrix of multiplication by `h(s)` given its values at the `N_b` nodal points.
pub fn multiplication_matrix(h_nodes: &[CMat], n_b: usize, m: usize, period: f64) -> CMat {
    let t = nodal_transform(n_b, period);
    let tinv = t.adjoint() * c(period / n_b as f64, 0.0);
    let dim = n_b * m;
    // (T⁻¹ ⊗ I) diag(h) (T ⊗ I)
    let mut mid = CMat::zeros(dim, dim);
    for p in 0..n_b {
        for n in 0..n_b {
            let blk = &h_nodes[p] * t[(p, n)];
            mid.view_mut((p * m, n * m), (m, m)).copy_from(&blk);
        }
    }
    let mut out = CMat::zeros(dim, dim);
    for l in 0..n_b {
        for p in 0..n_b {
            let f = tinv[(l, p)];
            for n in 0..n_b {
                let src = mid.view((p * m, n * m), (m, m)) * f;
                let mut dst = out.view_mut((l * m, n * m), (m, m));
                dst += src;
            }
        }
    }
    out
}

/// Basis representation of `f ↦ h Λ(h⁻¹ f)` from the trace of `h` at the `N_b` nodal points.
pub fn conjugate_dtn(l: &DtnMatrix, h_nodes: &[CMat]) -> Result<DtnMatrix, DtnError> {
    if h_nodes.len() != l.n_b || h_nodes.iter().any(|h| h.nrows() != l.m || h.ncols() != l.m) {
        return Err(DtnError::ShapeMismatch(format!("need {} nodal {}x{} matrices", l.n_b, l.m, l.m)));
    }
    let mut inv = Vec::with_capacity(h_nodes.len());
    for h in h_nodes {
        let d = linalg::det(h).norm();
        if !(d > crate::fields::DET_GUARD) {
            return Err(DtnError::Field(FieldError::SingularGauge(f64::NAN, f64::NAN, d)));
        }
        inv.push(linalg::inverse(h).ok_or(DtnError::Field(FieldError::SingularGauge(f64::NAN, f64::NAN, d)))?);
    }
    let gh = multiplication_matrix(h_nodes, l.n_b, l.m, l.period);
    let ghi = multiplication_matrix(&inv, l.n_b, l.m, l.period);
    Ok(DtnMatrix { entries: gh * &l.entries * ghi, ..l.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtnComparison {
    pub op_abs: f64,
    pub op_rel: f64,
    pub fro_abs: f64,
    pub fro_rel: f64,
    /// Block `(l, n)` (mode numbers) with the largest Frobenius difference.
    pub worst_block: (i64, i64),
    pub worst_block_norm: f64,
}

impl DtnComparison {
    pub fn relative(&self, norm: NormKind) -> f64 {
        match norm {
            NormKind::Operator => self.op_rel,
            NormKind::Frobenius => self.fro_rel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Operator,
    Frobenius,
}

/// Differences `L2 − L1`, relative to `L1`.
pub fn compare_dtn(l1: &DtnMatrix, l2: &DtnMatrix) -> Result<DtnComparison, DtnError> {
    if l1.n_b != l2.n_b || l1.m != l2.m {
        return Err(DtnError::ShapeMismatch(format!("(N_b, m) = ({}, {}) vs ({}, {})", l1.n_b, l1.m, l2.n_b, l2.m)));
    }
    if (l1.k - l2.k).norm() > 1e-12 * l1.k.norm().max(1.0) {
        return Err(DtnError::ShapeMismatch(format!("k = {} vs {}", l1.k, l2.k)));
    }
    let d = &l2.entries - &l1.entries;
    let (op_abs, fro_abs) = (linalg::op_norm(&d), linalg::fro(&d));
    let (op1, fro1) = (linalg::op_norm(&l1.entries), linalg::fro(&l1.entries));
    let ms = l1.modes();
    let mut worst = ((0, 0), -1.0);
    for li in 0..l1.n_b {
        for ni in 0..l1.n_b {
            let b = linalg::fro(&d.view((li * l1.m, ni * l1.m), (l1.m, l1.m)).into_owned());
            if b > worst.1 {
                worst = ((ms[li], ms[ni]), b);
            }
        }
    }
    let rel = |a: f64, b: f64| if b > 0.0 { a / b } else if a == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(DtnComparison {
        op_abs,
        op_rel: rel(op_abs, op1),
        fro_abs,
        fro_rel: rel(fro_abs, fro1),
        worst_block: worst.0,
        worst_block_norm: worst.1,
    })
}

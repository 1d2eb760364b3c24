//! Matrix transport ODEs `i c' = (γ̇·A) c` along paths and broken rays, holonomies,
//! relative and adjoint transports.

mod path;

pub use path::{ray_crossings, ParamCurve, Path, PathPiece, PieceRecord, CLOSE_TOL, MEMBERSHIP_SPACING};

use serde::{Deserialize, Serialize};

use crate::billiards::BrokenRay;
use crate::error::TransportError;
use crate::fields::MatrixPotential;
use crate::geometry::Domain;
use crate::linalg::{self, identity, CMat, C64, I};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    /// Nominal step length; each piece uses `ceil(len/h)` equal steps.
    pub h: f64,
    /// Run the half-step integration and report a Richardson estimate.
    pub richardson: bool,
    /// Fail with `StepTooLarge` when the estimate exceeds this.
    pub tolerance: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { h: DEFAULT_STEP, richardson: true, tolerance: DEFAULT_TOLERANCE }
    }
}

impl TransportOptions {
    pub fn with_step(h: f64) -> Self {
        TransportOptions { h, ..Default::default() }
    }

    /// Single integration without the step-halving pass.
    pub fn fast(h: f64) -> Self {
        TransportOptions { h, richardson: false, tolerance: f64::INFINITY }
    }

    fn validate(&self) -> Result<(), TransportError> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(TransportError::InvalidStep(self.h));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TransportResult {
    /// Endpoint matrix at step `h`.
    pub c: CMat,
    /// Values at the end of every path piece (reflection points for broken rays).
    pub nodes: Vec<CMat>,
    pub h: f64,
    /// `‖c_h − c_{h/2}‖·16/15`, zero when step halving is disabled.
    pub error_estimate: f64,
    pub steps: usize,
}

/// JSON record of a transport.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportRecord {
    pub path_hash: String,
    pub h: f64,
    pub endpoint: Vec<Vec<[f64; 2]>>,
    pub error_estimate: f64,
}

impl TransportResult {
    pub fn record(&self, path: &Path) -> TransportRecord {
        TransportRecord {
            path_hash: path.hash(),
            h: self.h,
            endpoint: linalg::to_pairs(&self.c),
            error_estimate: self.error_estimate,
        }
    }
}

/// Coefficient samples along one piece: `samples[k]` holds one matrix per coefficient
/// at parameter `k·len/(n_pts−1)`.
struct PieceSamples {
    samples: Vec<Vec<CMat>>,
    dt_sample: f64,
}

fn sample_piece(
    piece: &PathPiece,
    n_intervals: usize,
    coeff: &dyn Fn(crate::Vec2, crate::Vec2) -> Result<Vec<CMat>, TransportError>,
) -> Result<PieceSamples, TransportError> {
    let len = piece.length();
    let dt = len / n_intervals as f64;
    let samples = (0..=n_intervals)
        .map(|k| {
            let (x, v) = piece.eval(k as f64 * dt);
            coeff(x, v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PieceSamples { samples, dt_sample: dt })
}

type Rhs<'a> = dyn Fn(&[CMat], &[CMat]) -> Vec<CMat> + 'a;

fn axpy(y: &[CMat], k: &[CMat], a: f64) -> Vec<CMat> {
    y.iter().zip(k).map(|(y, k)| y + k * C64::new(a, 0.0)).collect()
}

/// Classical RK4 over one piece using every `stride`-th sample as a half-step node.
fn rk4_piece(ps: &PieceSamples, stride: usize, mut y: Vec<CMat>, rhs: &Rhs) -> Vec<CMat> {
    let n_half = (ps.samples.len() - 1) / stride;
    let dt = 2.0 * stride as f64 * ps.dt_sample;
    for i in 0..n_half / 2 {
        let (a, b, e) = (&ps.samples[2 * i * stride], &ps.samples[(2 * i + 1) * stride], &ps.samples[(2 * i + 2) * stride]);
        let k1 = rhs(a, &y);
        let k2 = rhs(b, &axpy(&y, &k1, dt / 2.0));
        let k3 = rhs(b, &axpy(&y, &k2, dt / 2.0));
        let k4 = rhs(e, &axpy(&y, &k3, dt));
        for j in 0..y.len() {
            y[j] += (&k1[j] + (&k2[j] + &k3[j]) * C64::new(2.0, 0.0) + &k4[j]) * C64::new(dt / 6.0, 0.0);
        }
    }
    y
}

/// Integrates `y' = rhs(coefficients, y)` along `path`, returning the step-`h` solution,
/// piece-end values, and the Richardson estimate on the first state component.
fn integrate(
    path: &Path,
    opts: &TransportOptions,
    coeff: &dyn Fn(crate::Vec2, crate::Vec2) -> Result<Vec<CMat>, TransportError>,
    y0: Vec<CMat>,
    rhs: &Rhs,
) -> Result<(Vec<CMat>, Vec<Vec<CMat>>, f64, usize), TransportError> {
    opts.validate()?;
    let mut y = y0.clone();
    let mut y_half = y0;
    let mut nodes = Vec::with_capacity(path.pieces().len());
    let mut steps = 0;
    for piece in path.pieces() {
        let n = ((piece.length() / opts.h).ceil() as usize).max(1);
        steps += n;
        if opts.richardson {
            let ps = sample_piece(piece, 4 * n, coeff)?;
            y = rk4_piece(&ps, 2, y, rhs);
            y_half = rk4_piece(&ps, 1, y_half, rhs);
        } else {
            let ps = sample_piece(piece, 2 * n, coeff)?;
            y = rk4_piece(&ps, 1, y, rhs);
        }
        nodes.push(y.clone());
    }
    let err = if opts.richardson { linalg::dist(&y[0], &y_half[0]) * 16.0 / 15.0 } else { 0.0 };
    if err > opts.tolerance {
        return Err(TransportError::StepTooLarge { estimate: err, tolerance: opts.tolerance });
    }
    Ok((y, nodes, err, steps))
}

fn finish(y: Vec<CMat>, nodes: Vec<Vec<CMat>>, h: f64, err: f64, steps: usize) -> TransportResult {
    let c = y.into_iter().next().unwrap();
    TransportResult { c, nodes: nodes.into_iter().map(|v| v.into_iter().next().unwrap()).collect(), h, error_estimate: err, steps }
}

/// Solves `i dc/dτ = γ̇·A(γ) c`, `c(0) = I`.
pub fn transport(pot: &MatrixPotential, path: &Path, opts: &TransportOptions) -> Result<TransportResult, TransportError> {
    let coeff = |x, v| Ok(vec![pot.a_dot(x, v)?]);
    let rhs = |m: &[CMat], y: &[CMat]| vec![&m[0] * &y[0] * (-I)];
    let (y, nodes, err, steps) = integrate(path, opts, &coeff, vec![identity(pot.m())], &rhs)?;
    Ok(finish(y, nodes, opts.h, err, steps))
}

/// [`transport`] after checking that the path stays in the closed domain.
pub fn transport_in(domain: &Domain, pot: &MatrixPotential, path: &Path, opts: &TransportOptions) -> Result<TransportResult, TransportError> {
    path.check_inside(domain)?;
    transport(pot, path, opts)
}

/// Leg-by-leg transport along a broken ray; `nodes[j]` is the value at the end of leg `j`.
pub fn broken_transport(pot: &MatrixPotential, ray: &BrokenRay, opts: &TransportOptions) -> Result<TransportResult, TransportError> {
    transport(pot, &ray.to_path()?, opts)
}

/// Transport over a closed loop.
pub fn holonomy(pot: &MatrixPotential, lp: &Path, opts: &TransportOptions) -> Result<CMat, TransportError> {
    if !lp.is_closed() {
        return Err(TransportError::PathNotClosed(lp.closure_gap()));
    }
    Ok(transport(pot, lp, opts)?.c)
}

/// `b = c_B c_A⁻¹` from `i b' = (γ̇·A_B) b − b (γ̇·A_A)`, `b(0) = I`.
pub fn relative_transport(
    pot_a: &MatrixPotential,
    pot_b: &MatrixPotential,
    path: &Path,
    opts: &TransportOptions,
) -> Result<TransportResult, TransportError> {
    if pot_a.m() != pot_b.m() {
        let (a, b) = (pot_a.m(), pot_b.m());
        return Err(TransportError::ShapeMismatch(a, a, b, b));
    }
    let coeff = |x, v| Ok(vec![pot_a.a_dot(x, v)?, pot_b.a_dot(x, v)?]);
    let rhs = |m: &[CMat], y: &[CMat]| vec![(&m[1] * &y[0] - &y[0] * &m[0]) * (-I)];
    let (y, nodes, err, steps) = integrate(path, opts, &coeff, vec![identity(pot_a.m())], &rhs)?;
    Ok(finish(y, nodes, opts.h, err, steps))
}

/// Adjoint system `i c_*' = (γ̇·A)^* c_*`, `c_*(0) = I`; satisfies `(c_*^*)⁻¹ = c`.
pub fn adjoint_transport(pot: &MatrixPotential, path: &Path, opts: &TransportOptions) -> Result<TransportResult, TransportError> {
    let coeff = |x, v| Ok(vec![pot.a_dot(x, v)?.adjoint()]);
    let rhs = |m: &[CMat], y: &[CMat]| vec![&m[0] * &y[0] * (-I)];
    let (y, nodes, err, steps) = integrate(path, opts, &coeff, vec![identity(pot.m())], &rhs)?;
    Ok(finish(y, nodes, opts.h, err, steps))
}

/// Transport over `γ₁γ₂` from the transports over the pieces: `c_second · c_first`.
pub fn compose(c_first: &CMat, c_second: &CMat) -> Result<CMat, TransportError> {
    if c_first.shape() != c_second.shape() || c_first.nrows() != c_first.ncols() {
        return Err(TransportError::ShapeMismatch(c_first.nrows(), c_first.ncols(), c_second.nrows(), c_second.ncols()));
    }
    Ok(c_second * c_first)
}

#[derive(Clone, Debug)]
pub struct TelescopingReport {
    /// `∫ c₂⁻¹ (γ̇·(A₁ − A₂)) c₁ dτ` over each leg.
    pub leg_integrals: Vec<CMat>,
    /// `i (c₂⁻¹c₁ − I)` at the final point, from independent transports.
    pub endpoint_term: CMat,
    pub residual: f64,
}

/// Sums the per-leg integrals of `c₂⁻¹(A₁ − A₂)·θ c₁ = iθ·∇(c₂⁻¹c₁)` and compares with the
/// endpoint difference they telescope to.
pub fn telescoping_check(
    pot1: &MatrixPotential,
    pot2: &MatrixPotential,
    path: &Path,
    opts: &TransportOptions,
) -> Result<TelescopingReport, TransportError> {
    let m = pot1.m();
    let coeff = |x, v| Ok(vec![pot1.a_dot(x, v)?, pot2.a_dot(x, v)?]);
    // state: (c₁, c₂⁻¹, S)
    let rhs = |k: &[CMat], y: &[CMat]| {
        vec![&k[0] * &y[0] * (-I), &y[1] * &k[1] * I, &y[1] * (&k[0] - &k[1]) * &y[0]]
    };
    let (_, nodes, _, _) = integrate(path, &TransportOptions { richardson: false, tolerance: f64::INFINITY, ..*opts }, &coeff, vec![identity(m), identity(m), CMat::zeros(m, m)], &rhs)?;
    let mut leg_integrals = Vec::with_capacity(nodes.len());
    let mut prev = CMat::zeros(m, m);
    for n in &nodes {
        leg_integrals.push(&n[2] - &prev);
        prev = n[2].clone();
    }
    let c1 = transport(pot1, path, opts)?.c;
    let c2 = transport(pot2, path, opts)?.c;
    let c2i = linalg::inverse(&c2).ok_or(TransportError::InvalidPath("singular transport".into()))?;
    let endpoint_term = (c2i * c1 - identity(m)) * I;
    let sum = leg_integrals.iter().fold(CMat::zeros(m, m), |acc, l| acc + l);
    let residual = linalg::dist(&sum, &endpoint_term);
    Ok(TelescopingReport { leg_integrals, endpoint_term, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{gauge_transform, GaugeElement};
    use crate::linalg::{c, expm, from_real};
    use crate::Vec2;

    fn unit_path() -> Path {
        Path::polyline(&[Vec2::new(-0.3, -0.2), Vec2::new(0.2, 0.1), Vec2::new(0.1, 0.5)]).unwrap()
    }

    #[test]
    fn zero_potential_gives_identity() {
        let r = transport(&MatrixPotential::zero(3), &unit_path(), &TransportOptions::default()).unwrap();
        assert_eq!(r.c, identity(3));
        assert_eq!(r.error_estimate, 0.0);
    }

    #[test]
    fn constant_potential_matches_expm() {
        let a1 = CMat::from_row_slice(2, 2, &[c(0.3, 0.1), c(1.0, 0.0), c(-0.5, 0.2), c(0.0, 0.4)]);
        let a2 = from_real(2, &[0.1, -0.7, 0.2, 0.5]);
        let pot = MatrixPotential::constant(a1.clone(), a2.clone(), CMat::zeros(2, 2)).unwrap();
        let th = 0.7f64;
        let d = Vec2::new(th.cos(), th.sin());
        let len = 1.3;
        let p = Path::segment(Vec2::zeros(), d * len).unwrap();
        let r = transport(&pot, &p, &TransportOptions::default()).unwrap();
        let exact = expm(&((a1 * c(d.x, 0.0) + a2 * c(d.y, 0.0)) * (-I * len)));
        assert!(linalg::dist(&r.c, &exact) < 1e-10);
        assert!(r.error_estimate < 1e-10);
    }

    #[test]
    fn step_too_large_reported() {
        let a = from_real(1, &[40.0]);
        let pot = MatrixPotential::constant(a.clone(), a, CMat::zeros(1, 1)).unwrap();
        let opts = TransportOptions { h: 0.2, richardson: true, tolerance: 1e-8 };
        assert!(matches!(transport(&pot, &unit_path(), &opts), Err(TransportError::StepTooLarge { .. })));
        assert!(matches!(transport(&pot, &unit_path(), &TransportOptions::with_step(-1.0)), Err(TransportError::InvalidStep(_))));
    }

    #[test]
    fn relative_and_adjoint_identities() {
        let pa = MatrixPotential::random_smooth(2, 1, 2, 1.0, false, false);
        let pb = MatrixPotential::random_smooth(2, 2, 2, 1.0, false, false);
        let p = unit_path();
        let o = TransportOptions::default();
        let ca = transport(&pa, &p, &o).unwrap().c;
        let cb = transport(&pb, &p, &o).unwrap().c;
        let b = relative_transport(&pa, &pb, &p, &o).unwrap().c;
        assert!(linalg::dist(&b, &(&cb * linalg::inverse(&ca).unwrap())) < 1e-9);
        let cs = adjoint_transport(&pa, &p, &o).unwrap().c;
        assert!(linalg::dist(&linalg::inverse(&cs.adjoint()).unwrap(), &ca) < 1e-9);
        let same = relative_transport(&pa, &pa, &p, &o).unwrap().c;
        assert!(linalg::dist(&same, &identity(2)) < 1e-14);
    }

    #[test]
    fn reversal_and_composition() {
        let pot = MatrixPotential::random_smooth(2, 8, 2, 1.0, false, false);
        let p = unit_path();
        let q = Path::segment(Vec2::new(0.1, 0.5), Vec2::new(-0.4, 0.3)).unwrap();
        let o = TransportOptions::default();
        let c = transport(&pot, &p, &o).unwrap().c;
        let r = transport(&pot, &p.reversed(), &o).unwrap().c;
        assert!(linalg::dist(&(&r * &c), &identity(2)) < 1e-9);
        let cq = transport(&pot, &q, &o).unwrap().c;
        let whole = transport(&pot, &p.concat(&q).unwrap(), &o).unwrap().c;
        assert!(linalg::dist(&whole, &compose(&c, &cq).unwrap()) < 1e-10);
        assert_eq!(compose(&identity(2), &cq).unwrap(), cq);
        assert!(compose(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn gauge_equivariance_on_a_path() {
        let pot = MatrixPotential::random_smooth(2, 3, 2, 1.0, false, false);
        let g = GaugeElement::random_smooth(2, 4, 2, 0.5, false, None);
        let pg = gauge_transform(&pot, &g).unwrap();
        let p = unit_path();
        let o = TransportOptions::default();
        let c = transport(&pot, &p, &o).unwrap().c;
        let cg = transport(&pg, &p, &o).unwrap().c;
        let expect = linalg::inverse(&g.eval(p.end()).unwrap()).unwrap() * c * g.eval(p.start()).unwrap();
        assert!(linalg::dist(&cg, &expect) < 1e-8);
    }

    #[test]
    fn telescoping_sum() {
        let p1 = MatrixPotential::random_smooth(2, 5, 2, 1.0, false, false);
        let p2 = MatrixPotential::random_smooth(2, 6, 2, 1.0, false, false);
        let rep = telescoping_check(&p1, &p2, &unit_path(), &TransportOptions::default()).unwrap();
        assert_eq!(rep.leg_integrals.len(), 2);
        assert!(rep.residual < 1e-8, "{}", rep.residual);
    }

    #[test]
    fn holonomy_requires_closed_loop() {
        assert!(matches!(
            holonomy(&MatrixPotential::zero(1), &unit_path(), &TransportOptions::default()),
            Err(TransportError::PathNotClosed(_))
        ));
    }
}

//! Matrix-valued potentials `(A₁, A₂, V)`, gauge elements, and the gauge action
//! `A'ⱼ = g⁻¹Aⱼg − i g⁻¹∂ⱼg`, `V' = g⁻¹Vg`.

mod grid;
mod spec;

pub use grid::GridField;
pub use spec::{BumpSpec, GaugeSpec, MatrixSpec, PotentialSpec, ScalarSpec};

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::geometry::Domain;
use crate::linalg::{self, c, expm, identity, CMat, Vec2, C64, I};

/// Central-difference spacing for `div A` of gauged potentials.
pub const H_G: f64 = 1e-5;
/// Determinant guard for gauge elements.
pub const DET_GUARD: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PotentialValue {
    pub a: [CMat; 2],
    pub v: CMat,
}

impl PotentialValue {
    /// `d·A = d₁A₁ + d₂A₂`.
    pub fn a_dot(&self, d: Vec2) -> CMat {
        &self.a[0] * c(d.x, 0.0) + &self.a[1] * c(d.y, 0.0)
    }
}

/// Smooth compactly supported bump `ρ(x) = exp(1 − 1/(1 − |x−c|²/R²))`, `ρ(c) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec2,
    pub radius: f64,
}

impl Bump {
    pub fn value_grad(&self, x: Vec2) -> (f64, Vec2) {
        let d = x - self.center;
        let q = d.norm_squared() / (self.radius * self.radius);
        if q >= 1.0 {
            return (0.0, Vec2::zeros());
        }
        let one_minus = 1.0 - q;
        let rho = (1.0 - 1.0 / one_minus).exp();
        let drho_dq = -rho / (one_minus * one_minus);
        (rho, d * (2.0 * drho_dq / (self.radius * self.radius)))
    }
}

/// `F(x) = Σ_k P_k cos(k·x) + Q_k sin(k·x)`.
#[derive(Clone, Debug)]
pub struct TrigField {
    terms: Vec<(Vec2, CMat, CMat)>,
}

impl TrigField {
    /// Low-order random trigonometric polynomial; coefficients decay like `1/(1+|k|²)`.
    pub fn random(rng: &mut ChaCha8Rng, m: usize, order: usize, amplitude: f64, hermitian: bool, traceless: bool) -> Self {
        let mut terms = Vec::new();
        let order = order as i64;
        for k1 in 0..=order {
            for k2 in -order..=order {
                if k1 == 0 && k2 < 0 {
                    continue;
                }
                let k = Vec2::new(k1 as f64, k2 as f64);
                let scale = amplitude / (1.0 + k.norm_squared());
                let draw = |rng: &mut ChaCha8Rng| {
                    let mut mat = CMat::from_fn(m, m, |_, _| {
                        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
                    });
                    if hermitian {
                        mat = (&mat + mat.adjoint()) * c(0.5, 0.0);
                    }
                    if traceless {
                        let tr = mat.trace() / c(m as f64, 0.0);
                        mat -= identity(m) * tr;
                    }
                    mat
                };
                let p = draw(rng);
                let q = if k1 == 0 && k2 == 0 { CMat::zeros(m, m) } else { draw(rng) };
                terms.push((k, p, q));
            }
        }
        TrigField { terms }
    }

    pub fn value_grad(&self, x: Vec2) -> (CMat, [CMat; 2]) {
        let m = self.terms[0].1.nrows();
        let mut v = CMat::zeros(m, m);
        let mut gx = CMat::zeros(m, m);
        let mut gy = CMat::zeros(m, m);
        for (k, p, q) in &self.terms {
            let (s, co) = k.dot(&x).sin_cos();
            v += p * c(co, 0.0) + q * c(s, 0.0);
            let d = q * c(co, 0.0) - p * c(s, 0.0);
            gx += &d * c(k.x, 0.0);
            gy += &d * c(k.y, 0.0);
        }
        (v, [gx, gy])
    }

    pub fn value(&self, x: Vec2) -> CMat {
        let m = self.terms[0].1.nrows();
        let mut v = CMat::zeros(m, m);
        for (k, p, q) in &self.terms {
            let (s, co) = k.dot(&x).sin_cos();
            v += p * c(co, 0.0) + q * c(s, 0.0);
        }
        v
    }
}

/// Real scalar field used for abelian phase gauges `e^{iφ}`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    /// `coef · x₁x₂`
    Bilinear { coef: f64 },
    /// `a·x`
    Linear { a: Vec2 },
    /// `amplitude · ρ(x)`
    Bump { bump: Bump, amplitude: f64 },
}

impl ScalarField {
    pub fn value_grad(&self, x: Vec2) -> (f64, Vec2) {
        match self {
            ScalarField::Bilinear { coef } => (coef * x.x * x.y, Vec2::new(coef * x.y, coef * x.x)),
            ScalarField::Linear { a } => (a.dot(&x), *a),
            ScalarField::Bump { bump, amplitude } => {
                let (r, g) = bump.value_grad(x);
                (amplitude * r, g * *amplitude)
            }
        }
    }
}

#[derive(Debug)]
enum PotentialNode {
    Zero,
    Constant { a: [CMat; 2], v: CMat },
    AbVortex { alpha: f64, center: Vec2 },
    Bump { bump: Bump, a: [CMat; 2], v: CMat },
    Trig { a: [TrigField; 2], v: TrigField },
    Grid(Arc<GridField>),
    Gauged { base: MatrixPotential, gauge: GaugeElement },
    VShift { base: MatrixPotential, shift: C64 },
}

/// Smooth field `(A₁, A₂, V)` of complex `m×m` matrices.
#[derive(Clone, Debug)]
pub struct MatrixPotential {
    m: usize,
    node: Arc<PotentialNode>,
    hermitian: bool,
}

fn check_square(m: usize, mats: &[&CMat]) -> Result<(), FieldError> {
    for mat in mats {
        if mat.nrows() != m || mat.ncols() != m {
            return Err(FieldError::ChannelMismatch(m, mat.nrows()));
        }
    }
    Ok(())
}

impl MatrixPotential {
    fn wrap(m: usize, node: PotentialNode, hermitian: bool) -> Self {
        MatrixPotential { m, node: Arc::new(node), hermitian }
    }

    pub fn zero(m: usize) -> Self {
        Self::wrap(m, PotentialNode::Zero, true)
    }

    pub fn constant(a1: CMat, a2: CMat, v: CMat) -> Result<Self, FieldError> {
        let m = a1.nrows();
        check_square(m, &[&a1, &a2, &v])?;
        let herm = [&a1, &a2, &v].iter().all(|x| linalg::is_hermitian(x, 1e-12));
        Ok(Self::wrap(m, PotentialNode::Constant { a: [a1, a2], v }, herm))
    }

    /// Aharonov–Bohm vortex `A = α(−(x₂−c₂), x₁−c₁)/|x−c|²`, `m = 1`, centered inside an obstacle.
    pub fn ab_vortex(alpha: f64, center: Vec2, domain: &Domain) -> Result<Self, FieldError> {
        let inside = domain.obstacles().iter().any(|ob| ob.region_contains(center));
        if !inside {
            return Err(FieldError::VortexCenterInDomain(center.x, center.y));
        }
        Ok(Self::wrap(1, PotentialNode::AbVortex { alpha, center }, true))
    }

    /// `Aⱼ = ρ(x)Aⱼ⁰`, `V = ρ(x)V⁰` with a smooth bump `ρ`.
    pub fn bump(center: Vec2, radius: f64, a1: CMat, a2: CMat, v: CMat) -> Result<Self, FieldError> {
        if !(radius > 0.0) {
            return Err(FieldError::InvalidParameters("bump radius must be positive".into()));
        }
        let m = a1.nrows();
        check_square(m, &[&a1, &a2, &v])?;
        let herm = [&a1, &a2, &v].iter().all(|x| linalg::is_hermitian(x, 1e-12));
        Ok(Self::wrap(m, PotentialNode::Bump { bump: Bump { center, radius }, a: [a1, a2], v }, herm))
    }

    /// Seeded low-order trigonometric polynomial potential.
    pub fn random_smooth(m: usize, seed: u64, order: usize, amplitude: f64, hermitian: bool, traceless: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = TrigField::random(&mut rng, m, order, amplitude, hermitian, traceless);
        let a2 = TrigField::random(&mut rng, m, order, amplitude, hermitian, traceless);
        let v = TrigField::random(&mut rng, m, order, amplitude, hermitian, false);
        Self::wrap(m, PotentialNode::Trig { a: [a1, a2], v }, hermitian)
    }

    /// Grid potential with three fields per node: `A₁, A₂, V`.
    pub fn from_grid(grid: GridField) -> Result<Self, FieldError> {
        if grid.nfields != 3 {
            return Err(FieldError::GridFormat(format!("potential grid needs 3 fields, found {}", grid.nfields)));
        }
        let herm = grid.all_hermitian(1e-12);
        Ok(Self::wrap(grid.m, PotentialNode::Grid(Arc::new(grid)), herm))
    }

    /// Samples this potential onto a node grid.
    pub fn to_grid(&self, bbox: crate::geometry::BBox, nx: usize, ny: usize) -> Result<GridField, FieldError> {
        let mut err = None;
        let g = GridField::from_fn(self.m, nx, ny, bbox, 3, |x| match self.eval(x) {
            Ok(p) => vec![p.a[0].clone(), p.a[1].clone(), p.v],
            Err(e) => {
                err = Some(e);
                vec![CMat::zeros(self.m, self.m); 3]
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(g),
        }
    }

    /// Same potential with `V` replaced by `V + shift·I`.
    pub fn with_v_shift(&self, shift: C64) -> Self {
        let herm = self.hermitian && shift.im == 0.0;
        Self::wrap(self.m, PotentialNode::VShift { base: self.clone(), shift }, herm)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `A₁, A₂, V` all hermitian (tracked, tolerance 1e-12 where checked numerically).
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Built as the zero potential (structural check, no sampling).
    pub fn is_zero(&self) -> bool {
        matches!(&*self.node, PotentialNode::Zero)
    }

    /// Grid extrapolation count for grid-backed potentials, if any.
    pub fn extrapolations(&self) -> usize {
        match &*self.node {
            PotentialNode::Grid(g) => g.extrapolation_count(),
            PotentialNode::Gauged { base, gauge } => base.extrapolations() + gauge.extrapolations(),
            PotentialNode::VShift { base, .. } => base.extrapolations(),
            _ => 0,
        }
    }

    pub fn eval(&self, x: Vec2) -> Result<PotentialValue, FieldError> {
        let m = self.m;
        Ok(match &*self.node {
            PotentialNode::Zero => PotentialValue { a: [CMat::zeros(m, m), CMat::zeros(m, m)], v: CMat::zeros(m, m) },
            PotentialNode::Constant { a, v } => PotentialValue { a: a.clone(), v: v.clone() },
            PotentialNode::AbVortex { alpha, center } => {
                let d = x - center;
                let r2 = d.norm_squared();
                PotentialValue {
                    a: [
                        CMat::from_element(1, 1, c(-alpha * d.y / r2, 0.0)),
                        CMat::from_element(1, 1, c(alpha * d.x / r2, 0.0)),
                    ],
                    v: CMat::zeros(1, 1),
                }
            }
            PotentialNode::Bump { bump, a, v } => {
                let (r, _) = bump.value_grad(x);
                let rc = c(r, 0.0);
                PotentialValue { a: [&a[0] * rc, &a[1] * rc], v: v * rc }
            }
            PotentialNode::Trig { a, v } => PotentialValue { a: [a[0].value(x), a[1].value(x)], v: v.value(x) },
            PotentialNode::Grid(g) => PotentialValue {
                a: [g.eval(0, x)?.0, g.eval(1, x)?.0],
                v: g.eval(2, x)?.0,
            },
            PotentialNode::Gauged { base, gauge } => {
                let p = base.eval(x)?;
                let g = gauge.eval(x)?;
                let gi = linalg::inverse(&g).ok_or(FieldError::SingularGauge(x.x, x.y, 0.0))?;
                let dg = gauge.grad(x)?;
                let mut a = [CMat::zeros(m, m), CMat::zeros(m, m)];
                for j in 0..2 {
                    a[j] = &gi * &p.a[j] * &g - &gi * &dg[j] * I;
                }
                PotentialValue { a, v: &gi * &p.v * &g }
            }
            PotentialNode::VShift { base, shift } => {
                let mut p = base.eval(x)?;
                p.v += identity(m) * *shift;
                p
            }
        })
    }

    /// `d·A(x)`.
    pub fn a_dot(&self, x: Vec2, d: Vec2) -> Result<CMat, FieldError> {
        match &*self.node {
            PotentialNode::Zero => Ok(CMat::zeros(self.m, self.m)),
            PotentialNode::AbVortex { alpha, center } => {
                let r = x - center;
                Ok(CMat::from_element(1, 1, c(alpha * (-r.y * d.x + r.x * d.y) / r.norm_squared(), 0.0)))
            }
            PotentialNode::Trig { a, .. } => Ok(a[0].value(x) * c(d.x, 0.0) + a[1].value(x) * c(d.y, 0.0)),
            _ => Ok(self.eval(x)?.a_dot(d)),
        }
    }

    /// `∂₁A₁ + ∂₂A₂`, analytic where the representation allows it.
    pub fn div_a(&self, x: Vec2) -> Result<CMat, FieldError> {
        let m = self.m;
        match &*self.node {
            PotentialNode::Zero | PotentialNode::Constant { .. } | PotentialNode::AbVortex { .. } => Ok(CMat::zeros(m, m)),
            PotentialNode::Bump { bump, a, .. } => {
                let (_, g) = bump.value_grad(x);
                Ok(&a[0] * c(g.x, 0.0) + &a[1] * c(g.y, 0.0))
            }
            PotentialNode::Trig { a, .. } => Ok(a[0].value_grad(x).1[0].clone() + &a[1].value_grad(x).1[1]),
            PotentialNode::Grid(g) => Ok(g.eval(0, x)?.1[0].clone() + &g.eval(1, x)?.1[1]),
            PotentialNode::VShift { base, .. } => base.div_a(x),
            PotentialNode::Gauged { .. } => {
                let h = H_G;
                let ex = Vec2::new(h, 0.0);
                let ey = Vec2::new(0.0, h);
                let dx = (self.eval(x + ex)?.a[0].clone() - self.eval(x - ex)?.a[0].clone()) / c(2.0 * h, 0.0);
                let dy = (self.eval(x + ey)?.a[1].clone() - self.eval(x - ey)?.a[1].clone()) / c(2.0 * h, 0.0);
                Ok(dx + dy)
            }
        }
    }
}

#[derive(Debug)]
enum GaugeNode {
    Identity,
    Constant(CMat),
    Phase(ScalarField),
    /// `exp(i·amplitude·ρ(x)·K)`
    ExpBump { bump: Bump, amplitude: f64, generator: CMat },
    /// `exp(factor·ρ(x)·F(x))`, `ρ ≡ 1` without a support bump
    ExpTrig { field: TrigField, support: Option<Bump>, factor: C64 },
    Product(GaugeElement, GaugeElement),
    Inverse(GaugeElement),
    Grid(Arc<GridField>),
}

/// Smooth nonsingular matrix field `g(x)`.
#[derive(Clone, Debug)]
pub struct GaugeElement {
    m: usize,
    node: Arc<GaugeNode>,
    unitary: bool,
    is_g0: bool,
}

impl GaugeElement {
    fn wrap(m: usize, node: GaugeNode, unitary: bool) -> Self {
        GaugeElement { m, node: Arc::new(node), unitary, is_g0: false }
    }

    pub fn identity(m: usize) -> Self {
        let mut g = Self::wrap(m, GaugeNode::Identity, true);
        g.is_g0 = true;
        g
    }

    pub fn constant(g: CMat) -> Result<Self, FieldError> {
        let m = g.nrows();
        check_square(m, &[&g])?;
        let d = linalg::det(&g).norm();
        if d <= DET_GUARD {
            return Err(FieldError::SingularGauge(f64::NAN, f64::NAN, d));
        }
        let unitary = linalg::unitarity_defect(&g) < 1e-12;
        Ok(Self::wrap(m, GaugeNode::Constant(g), unitary))
    }

    /// `e^{iφ(x)}`, `m = 1`.
    pub fn phase(phi: ScalarField) -> Self {
        Self::wrap(1, GaugeNode::Phase(phi), true)
    }

    /// `exp(i·amplitude·ρ(x)·K)`; unitary when `K` is hermitian.
    pub fn exp_bump(center: Vec2, radius: f64, amplitude: f64, generator: CMat) -> Result<Self, FieldError> {
        let m = generator.nrows();
        check_square(m, &[&generator])?;
        if !(radius > 0.0) {
            return Err(FieldError::InvalidParameters("bump radius must be positive".into()));
        }
        let unitary = linalg::is_hermitian(&generator, 1e-12);
        Ok(Self::wrap(m, GaugeNode::ExpBump { bump: Bump { center, radius }, amplitude, generator }, unitary))
    }

    /// Seeded smooth gauge `exp(i ρ H(x))` (unitary) or `exp(ρ Z(x))` (general), `ρ` an optional support bump.
    pub fn random_smooth(m: usize, seed: u64, order: usize, amplitude: f64, unitary: bool, support: Option<(Vec2, f64)>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = TrigField::random(&mut rng, m, order, amplitude, unitary, false);
        let factor = if unitary { I } else { c(1.0, 0.0) };
        let support = support.map(|(center, radius)| Bump { center, radius });
        Self::wrap(m, GaugeNode::ExpTrig { field, support, factor }, unitary)
    }

    pub fn from_grid(grid: GridField) -> Result<Self, FieldError> {
        if grid.nfields != 1 {
            return Err(FieldError::GridFormat(format!("gauge grid needs 1 field, found {}", grid.nfields)));
        }
        let m = grid.m;
        Ok(Self::wrap(m, GaugeNode::Grid(Arc::new(grid)), false))
    }

    /// Pointwise product `g·h`.
    pub fn product(&self, other: &GaugeElement) -> Result<Self, FieldError> {
        if self.m != other.m {
            return Err(FieldError::ChannelMismatch(self.m, other.m));
        }
        let mut g = Self::wrap(self.m, GaugeNode::Product(self.clone(), other.clone()), self.unitary && other.unitary);
        g.is_g0 = self.is_g0 && other.is_g0;
        Ok(g)
    }

    /// Pointwise inverse `g⁻¹`.
    pub fn inverse(&self) -> Self {
        let mut g = Self::wrap(self.m, GaugeNode::Inverse(self.clone()), self.unitary);
        g.is_g0 = self.is_g0;
        g
    }

    /// Runs [`check_g0`] and records the result in the `is_g0` flag.
    pub fn checked_g0(mut self, domain: &Domain, n_samples: usize) -> Result<Self, FieldError> {
        self.is_g0 = check_g0(&self, domain, n_samples)?.is_g0;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn is_g0(&self) -> bool {
        self.is_g0
    }

    pub fn extrapolations(&self) -> usize {
        match &*self.node {
            GaugeNode::Grid(g) => g.extrapolation_count(),
            GaugeNode::Product(a, b) => a.extrapolations() + b.extrapolations(),
            GaugeNode::Inverse(a) => a.extrapolations(),
            _ => 0,
        }
    }

    fn raw(&self, x: Vec2) -> Result<CMat, FieldError> {
        let m = self.m;
        Ok(match &*self.node {
            GaugeNode::Identity => identity(m),
            GaugeNode::Constant(g) => g.clone(),
            GaugeNode::Phase(phi) => {
                let (p, _) = phi.value_grad(x);
                CMat::from_element(1, 1, c(p.cos(), p.sin()))
            }
            GaugeNode::ExpBump { bump, amplitude, generator } => {
                let (r, _) = bump.value_grad(x);
                if r == 0.0 {
                    identity(m)
                } else {
                    expm(&(generator * (I * (amplitude * r))))
                }
            }
            GaugeNode::ExpTrig { field, support, factor } => {
                let r = support.map_or(1.0, |b| b.value_grad(x).0);
                if r == 0.0 {
                    identity(m)
                } else {
                    expm(&(field.value(x) * (factor * r)))
                }
            }
            GaugeNode::Product(a, b) => a.eval(x)? * b.eval(x)?,
            GaugeNode::Inverse(a) => {
                let g = a.eval(x)?;
                linalg::inverse(&g).ok_or(FieldError::SingularGauge(x.x, x.y, 0.0))?
            }
            GaugeNode::Grid(g) => g.eval(0, x)?.0,
        })
    }

    /// `g(x)`, guarded by `|det g| > 1e-10`.
    pub fn eval(&self, x: Vec2) -> Result<CMat, FieldError> {
        let g = self.raw(x)?;
        if self.m <= 4 {
            let d = linalg::det(&g).norm();
            if !(d > DET_GUARD) {
                return Err(FieldError::SingularGauge(x.x, x.y, d));
            }
        }
        Ok(g)
    }

    /// `(∂₁g, ∂₂g)` in closed form; grid gauges differentiate the interpolant.
    pub fn grad(&self, x: Vec2) -> Result<[CMat; 2], FieldError> {
        let m = self.m;
        match &*self.node {
            GaugeNode::Identity | GaugeNode::Constant(_) => Ok([CMat::zeros(m, m), CMat::zeros(m, m)]),
            GaugeNode::Phase(phi) => {
                let (p, dp) = phi.value_grad(x);
                let g = c(p.cos(), p.sin()) * I;
                Ok([CMat::from_element(1, 1, g * dp.x), CMat::from_element(1, 1, g * dp.y)])
            }
            GaugeNode::ExpBump { bump, amplitude, generator } => {
                let (r, dr) = bump.value_grad(x);
                if r == 0.0 {
                    return Ok([CMat::zeros(m, m), CMat::zeros(m, m)]);
                }
                // K commutes with exp(iρK)
                let kg = generator * expm(&(generator * (I * (amplitude * r)))) * (I * *amplitude);
                Ok([&kg * c(dr.x, 0.0), &kg * c(dr.y, 0.0)])
            }
            GaugeNode::Product(a, b) => {
                let (ga, gb) = (a.eval(x)?, b.eval(x)?);
                let (da, db) = (a.grad(x)?, b.grad(x)?);
                Ok([&da[0] * &gb + &ga * &db[0], &da[1] * &gb + &ga * &db[1]])
            }
            GaugeNode::Inverse(a) => {
                let gi = self.eval(x)?;
                let da = a.grad(x)?;
                Ok([-(&gi * &da[0] * &gi), -(&gi * &da[1] * &gi)])
            }
            GaugeNode::Grid(g) => Ok(g.eval(0, x)?.1),
            GaugeNode::ExpTrig { field, support, factor } => {
                let (r, dr) = support.map_or((1.0, Vec2::zeros()), |b| b.value_grad(x));
                if r == 0.0 {
                    return Ok([CMat::zeros(m, m), CMat::zeros(m, m)]);
                }
                let (f, df) = field.value_grad(x);
                let xm = &f * (factor * r);
                let mut out = [CMat::zeros(m, m), CMat::zeros(m, m)];
                for j in 0..2 {
                    let dxm = (&f * c(dr[j], 0.0) + &df[j] * c(r, 0.0)) * *factor;
                    out[j] = exp_derivative(&xm, &dxm);
                }
                Ok(out)
            }
        }
    }

    /// Samples this gauge onto a node grid.
    pub fn to_grid(&self, bbox: crate::geometry::BBox, nx: usize, ny: usize) -> Result<GridField, FieldError> {
        let mut err = None;
        let g = GridField::from_fn(self.m, nx, ny, bbox, 1, |x| match self.eval(x) {
            Ok(v) => vec![v],
            Err(e) => {
                err = Some(e);
                vec![identity(self.m)]
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(g),
        }
    }
}

/// Directional derivative of `exp` at `x` along `dx`, read off the upper-right block of
/// `exp([[x, dx], [0, x]])`.
fn exp_derivative(x: &CMat, dx: &CMat) -> CMat {
    let m = x.nrows();
    let mut big = CMat::zeros(2 * m, 2 * m);
    big.view_mut((0, 0), (m, m)).copy_from(x);
    big.view_mut((m, m), (m, m)).copy_from(x);
    big.view_mut((0, m), (m, m)).copy_from(dx);
    expm(&big).view((0, m), (m, m)).into_owned()
}

/// Gauge action on a potential.
pub fn gauge_transform(pot: &MatrixPotential, g: &GaugeElement) -> Result<MatrixPotential, FieldError> {
    if pot.m != g.m {
        return Err(FieldError::ChannelMismatch(pot.m, g.m));
    }
    let herm = pot.hermitian && g.unitary;
    Ok(MatrixPotential::wrap(pot.m, PotentialNode::Gauged { base: pot.clone(), gauge: g.clone() }, herm))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct G0Check {
    pub max_deviation: f64,
    pub is_g0: bool,
}

/// Samples `‖g − I‖` at `n_samples` equispaced points of the outer curve.
pub fn check_g0(g: &GaugeElement, domain: &Domain, n_samples: usize) -> Result<G0Check, FieldError> {
    let outer = domain.outer();
    let n = n_samples.max(1);
    let mut max_dev: f64 = 0.0;
    for k in 0..n {
        let x = outer.point(outer.length() * k as f64 / n as f64);
        max_dev = max_dev.max(linalg::dist(&g.eval(x)?, &identity(g.m)));
    }
    Ok(G0Check { max_deviation: max_dev, is_g0: max_dev <= 1e-10 })
}

/// Loop integral `∮ A·dx` of a scalar (`m = 1`) potential over a circle, trapezoid rule.
pub fn circle_flux(pot: &MatrixPotential, center: Vec2, radius: f64, n: usize) -> Result<C64, FieldError> {
    let mut sum = c(0.0, 0.0);
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        let x = center + Vec2::new(t.cos(), t.sin()) * radius;
        let dx = Vec2::new(-t.sin(), t.cos()) * radius;
        sum += pot.a_dot(x, dx)?[(0, 0)];
    }
    Ok(sum * (2.0 * PI / n as f64))
}

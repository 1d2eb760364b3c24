//! Small dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type Vec2 = Vector2<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(m: usize) -> CMat {
    CMat::identity(m, m)
}

pub fn zeros(m: usize) -> CMat {
    CMat::zeros(m, m)
}

pub fn from_real(m: usize, entries: &[f64]) -> CMat {
    CMat::from_row_iterator(m, m, entries.iter().map(|&x| c(x, 0.0)))
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

pub fn det(a: &CMat) -> C64 {
    a.clone().determinant()
}

/// Frobenius norm.
pub fn fro(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Spectral norm (largest singular value).
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn dist(a: &CMat, b: &CMat) -> f64 {
    fro(&(a - b))
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    dist(a, &a.adjoint()) <= tol
}

/// `‖c*c − I‖`, the unitarity defect.
pub fn unitarity_defect(a: &CMat) -> f64 {
    dist(&(a.adjoint() * a), &identity(a.nrows()))
}

/// Matrix exponential by scaling and squaring with a [6/6] Pade approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * c(0.5f64.powi(s), 0.0);
    // Pade coefficients for q = 6
    let coef = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let id = identity(n);
    let mut num = id.clone();
    let mut den = id.clone();
    let mut power = id;
    for (k, &ck) in coef.iter().enumerate().skip(1) {
        power = &power * &scaled;
        let term = &power * c(ck, 0.0);
        num += &term;
        if k % 2 == 0 {
            den += &term;
        } else {
            den -= &term;
        }
    }
    let mut result = den.lu().solve(&num).expect("Pade denominator is nonsingular");
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Row-major `[re, im]` pairs, the layout used by every JSON export.
pub fn to_pairs(a: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

pub fn from_pairs(rows: &[Vec<[f64; 2]>]) -> Option<CMat> {
    let n = rows.len();
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != m) {
        return None;
    }
    Some(CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - c(1.0f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - c(2.0f64.cos(), 2.0f64.sin())).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_nilpotent_and_large() {
        let n = from_real(2, &[0.0, 3.0, 0.0, 0.0]);
        let e = expm(&n);
        assert!(dist(&e, &from_real(2, &[1.0, 3.0, 0.0, 1.0])) < 1e-13);
        // rotation generator with large angle
        let r = from_real(2, &[0.0, -20.0, 20.0, 0.0]);
        let e = expm(&r);
        let expect = from_real(2, &[20f64.cos(), -20f64.sin(), 20f64.sin(), 20f64.cos()]);
        assert!(dist(&e, &expect) < 1e-11);
    }

    #[test]
    fn norms() {
        let a = from_real(2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((fro(&a) - 5.0).abs() < 1e-15);
        assert!((op_norm(&a) - 4.0).abs() < 1e-12);
        assert!(unitarity_defect(&identity(3)) < 1e-15);
    }
}

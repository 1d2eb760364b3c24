//! Serializable descriptions of builtin potentials and gauges, as used in scenario configs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GaugeElement, GridField, MatrixPotential, ScalarField};
use crate::error::FieldError;
use crate::geometry::Domain;
use crate::linalg::{c, CMat, Vec2};

/// Complex matrix given by real and (optional) imaginary parts, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_mat(&self) -> Result<CMat, FieldError> {
        let m = self.re.len();
        let bad = || FieldError::InvalidParameters(format!("matrix must be square {m}x{m}"));
        if m == 0 || self.re.iter().any(|r| r.len() != m) {
            return Err(bad());
        }
        if let Some(im) = &self.im {
            if im.len() != m || im.iter().any(|r| r.len() != m) {
                return Err(bad());
            }
        }
        Ok(CMat::from_fn(m, m, |i, j| {
            c(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }

    pub fn from_mat(a: &CMat) -> Self {
        let re = (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].re).collect()).collect();
        let im: Vec<Vec<f64>> = (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)].im).collect()).collect();
        let any_im = im.iter().flatten().any(|v| *v != 0.0);
        MatrixSpec { re, im: any_im.then_some(im) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Bilinear { coef: f64 },
    Linear { a: [f64; 2] },
    Bump { center: [f64; 2], radius: f64, amplitude: f64 },
}

impl ScalarSpec {
    pub fn build(&self) -> Result<ScalarField, FieldError> {
        Ok(match self {
            ScalarSpec::Bilinear { coef } => ScalarField::Bilinear { coef: *coef },
            ScalarSpec::Linear { a } => ScalarField::Linear { a: Vec2::new(a[0], a[1]) },
            ScalarSpec::Bump { center, radius, amplitude } => {
                if !(*radius > 0.0) {
                    return Err(FieldError::InvalidParameters("bump radius must be positive".into()));
                }
                ScalarField::Bump {
                    bump: super::Bump { center: Vec2::new(center[0], center[1]), radius: *radius },
                    amplitude: *amplitude,
                }
            }
        })
    }
}

fn default_order() -> usize {
    2
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero {
        m: usize,
    },
    Constant {
        a1: MatrixSpec,
        a2: MatrixSpec,
        v: MatrixSpec,
    },
    AbVortex {
        alpha: f64,
        center: [f64; 2],
    },
    Bump {
        center: [f64; 2],
        radius: f64,
        a1: MatrixSpec,
        a2: MatrixSpec,
        v: MatrixSpec,
    },
    RandomSmooth {
        m: usize,
        seed: u64,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        hermitian: bool,
        #[serde(default)]
        traceless: bool,
    },
    /// Grid file with fields `A₁, A₂, V`; relative paths resolve against the config directory.
    Grid {
        path: String,
    },
}

impl PotentialSpec {
    pub fn build(&self, domain: &Domain, base_dir: &Path) -> Result<MatrixPotential, FieldError> {
        match self {
            PotentialSpec::Zero { m } => {
                check_m(*m)?;
                Ok(MatrixPotential::zero(*m))
            }
            PotentialSpec::Constant { a1, a2, v } => MatrixPotential::constant(a1.to_mat()?, a2.to_mat()?, v.to_mat()?),
            PotentialSpec::AbVortex { alpha, center } => {
                MatrixPotential::ab_vortex(*alpha, Vec2::new(center[0], center[1]), domain)
            }
            PotentialSpec::Bump { center, radius, a1, a2, v } => MatrixPotential::bump(
                Vec2::new(center[0], center[1]),
                *radius,
                a1.to_mat()?,
                a2.to_mat()?,
                v.to_mat()?,
            ),
            PotentialSpec::RandomSmooth { m, seed, order, amplitude, hermitian, traceless } => {
                check_m(*m)?;
                Ok(MatrixPotential::random_smooth(*m, *seed, *order, *amplitude, *hermitian, *traceless))
            }
            PotentialSpec::Grid { path } => MatrixPotential::from_grid(GridField::load(&base_dir.join(path))?),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    Identity {
        m: usize,
    },
    Constant {
        g: MatrixSpec,
    },
    Phase {
        phi: ScalarSpec,
    },
    ExpBump {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
        generator: MatrixSpec,
    },
    RandomSmooth {
        m: usize,
        seed: u64,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        unitary: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        support: Option<BumpSpec>,
    },
    Grid {
        path: String,
    },
}

impl GaugeSpec {
    /// Builds the gauge and sets its G₀ flag by sampling the outer curve.
    pub fn build(&self, domain: &Domain, base_dir: &Path) -> Result<GaugeElement, FieldError> {
        let g = match self {
            GaugeSpec::Identity { m } => {
                check_m(*m)?;
                GaugeElement::identity(*m)
            }
            GaugeSpec::Constant { g } => GaugeElement::constant(g.to_mat()?)?,
            GaugeSpec::Phase { phi } => GaugeElement::phase(phi.build()?),
            GaugeSpec::ExpBump { center, radius, amplitude, generator } => {
                GaugeElement::exp_bump(Vec2::new(center[0], center[1]), *radius, *amplitude, generator.to_mat()?)?
            }
            GaugeSpec::RandomSmooth { m, seed, order, amplitude, unitary, support } => {
                check_m(*m)?;
                let support = support.as_ref().map(|b| (Vec2::new(b.center[0], b.center[1]), b.radius));
                GaugeElement::random_smooth(*m, *seed, *order, *amplitude, *unitary, support)
            }
            GaugeSpec::Grid { path } => GaugeElement::from_grid(GridField::load(&base_dir.join(path))?)?,
        };
        g.checked_g0(domain, 256)
    }
}

fn check_m(m: usize) -> Result<(), FieldError> {
    if m == 0 || m > 16 {
        return Err(FieldError::InvalidParameters(format!("channel count {m} outside 1..=16")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn specs_parse_and_build() {
        let d = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 0.3)).unwrap();
        let p: PotentialSpec = toml::from_str("name = \"ab_vortex\"\nalpha = 0.5\ncenter = [0.0, 0.0]").unwrap();
        assert_eq!(p.build(&d, Path::new(".")).unwrap().m(), 1);
        let p: PotentialSpec = toml::from_str("name = \"random_smooth\"\nm = 2\nseed = 4\nhermitian = true").unwrap();
        assert!(p.build(&d, Path::new(".")).unwrap().is_hermitian());
        let bad = toml::from_str::<PotentialSpec>("name = \"zero\"\nm = 2\nmm = 3");
        assert!(bad.is_err());
        let g: GaugeSpec = toml::from_str(
            "name = \"exp_bump\"\ncenter = [0.5, 0.0]\nradius = 0.3\namplitude = 1.0\ngenerator = { re = [[1.0, 0.0], [0.0, -1.0]] }",
        )
        .unwrap();
        let g = g.build(&d, Path::new(".")).unwrap();
        assert!(g.is_g0() && g.is_unitary());
    }

    #[test]
    fn matrix_spec_round_trip() {
        let a = CMat::from_fn(2, 2, |i, j| c(i as f64, j as f64 - 0.5));
        assert_eq!(MatrixSpec::from_mat(&a).to_mat().unwrap(), a);
        assert!(MatrixSpec { re: vec![vec![1.0, 2.0]], im: None }.to_mat().is_err());
    }
}

//! Gauge reconstruction from path transports and the uniqueness diagnostics built on it:
//! homotopy residuals, gauge residuals, holonomy fingerprints and broken-ray endpoint checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::billiards::{generator_loops, RayFan, TraceOptions};
use crate::error::{BilliardError, ReconstructError, TransportError};
use crate::fields::{GaugeElement, GridField, MatrixPotential};
use crate::geometry::visibility::{VisibilityGraph, DEFAULT_VERTICES};
use crate::geometry::{BBox, BoundaryPoint, Domain};
use crate::linalg::{self, identity, CMat, Vec2, I};
use crate::transport::{broken_transport, holonomy, transport, Path, TransportOptions};

/// Relative tolerance for matching stencil neighbours among the samples.
const STENCIL_MATCH: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// The sample is the base point.
    Trivial,
    Straight,
    Visibility,
}

/// How the path from the base point to a sample was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathDescriptor {
    pub kind: PathKind,
    pub vertices: Vec<[f64; 2]>,
    pub length: f64,
    pub winding: Vec<i64>,
}

/// Uniform node lattice the samples were drawn from, if any.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub bbox: BBox,
    pub nx: usize,
    pub ny: usize,
}

impl Lattice {
    pub fn node(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.bbox.min.x + self.bbox.width() * ix as f64 / (self.nx - 1) as f64,
            self.bbox.min.y + self.bbox.height() * iy as f64 / (self.ny - 1) as f64,
        )
    }
}

/// Reconstructed gauge `g(x) = c_B(x)·c_A(x)^{-1}` at a set of sample points.
#[derive(Clone, Debug)]
pub struct GaugeField {
    pub base: BoundaryPoint,
    pub samples: Vec<Vec2>,
    pub matrices: Vec<CMat>,
    pub paths: Vec<PathDescriptor>,
    pub h: f64,
    /// Lattice index `iy·nx + ix` of each sample when built by [`reconstruct_on_lattice`].
    pub lattice: Option<(Lattice, Vec<usize>)>,
}

#[derive(Serialize, Deserialize)]
struct GaugeFieldJson {
    m: usize,
    h: f64,
    base: BoundaryPoint,
    samples: Vec<[f64; 2]>,
    matrices: Vec<Vec<Vec<[f64; 2]>>>,
    paths: Vec<PathDescriptor>,
}

impl GaugeField {
    pub fn m(&self) -> usize {
        self.matrices.first().map_or(0, |g| g.nrows())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GaugeFieldJson {
            m: self.m(),
            h: self.h,
            base: self.base,
            samples: self.samples.iter().map(|x| [x.x, x.y]).collect(),
            matrices: self.matrices.iter().map(linalg::to_pairs).collect(),
            paths: self.paths.clone(),
        })
        .expect("gauge field serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, ReconstructError> {
        let bad = |s: String| ReconstructError::Field(crate::error::FieldError::InvalidParameters(s));
        let j: GaugeFieldJson = serde_json::from_value(v.clone()).map_err(|e| bad(e.to_string()))?;
        let matrices = j
            .matrices
            .iter()
            .map(|p| linalg::from_pairs(p).ok_or_else(|| bad("ragged matrix".into())))
            .collect::<Result<Vec<_>, _>>()?;
        if matrices.len() != j.samples.len() {
            return Err(bad("sample and matrix counts differ".into()));
        }
        Ok(GaugeField {
            base: j.base,
            samples: j.samples.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
            matrices,
            paths: j.paths,
            h: j.h,
            lattice: None,
        })
    }

    /// Interpolated view over the sample lattice. Lattice nodes outside the closed domain
    /// are filled by repeated averaging of their reconstructed neighbours.
    pub fn interpolated(&self) -> Result<GaugeElement, ReconstructError> {
        let (lat, idx) = self
            .lattice
            .as_ref()
            .ok_or_else(|| ReconstructError::InsufficientSamples("field was not sampled on a lattice".into()))?;
        let m = self.m();
        let mut vals: Vec<Option<CMat>> = vec![None; lat.nx * lat.ny];
        for (k, &i) in idx.iter().enumerate() {
            vals[i] = Some(self.matrices[k].clone());
        }
        if vals.iter().all(|v| v.is_none()) {
            return Err(ReconstructError::InsufficientSamples("no lattice node reconstructed".into()));
        }
        while vals.iter().any(|v| v.is_none()) {
            let prev = vals.clone();
            for iy in 0..lat.ny {
                for ix in 0..lat.nx {
                    if prev[iy * lat.nx + ix].is_some() {
                        continue;
                    }
                    let mut acc = CMat::zeros(m, m);
                    let mut n = 0;
                    for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if jx < 0 || jy < 0 || jx >= lat.nx as i64 || jy >= lat.ny as i64 {
                            continue;
                        }
                        if let Some(g) = &prev[jy as usize * lat.nx + jx as usize] {
                            acc += g;
                            n += 1;
                        }
                    }
                    if n > 0 {
                        vals[iy * lat.nx + ix] = Some(acc / linalg::c(n as f64, 0.0));
                    }
                }
            }
        }
        let mut it = vals.into_iter().map(|v| v.expect("filled"));
        let grid = GridField::from_fn(m, lat.nx, lat.ny, lat.bbox, 1, |_| vec![it.next().expect("node")])?;
        Ok(GaugeElement::from_grid(grid)?)
    }
}

/// Lattice nodes lying in the closed domain, with their lattice indices.
pub fn lattice_samples(domain: &Domain, lattice: &Lattice) -> (Vec<Vec2>, Vec<usize>) {
    let mut pts = Vec::new();
    let mut idx = Vec::new();
    for iy in 0..lattice.ny {
        for ix in 0..lattice.nx {
            let x = lattice.node(ix, iy);
            if domain.closure_contains(x, 1e-12) {
                pts.push(x);
                idx.push(iy * lattice.nx + ix);
            }
        }
    }
    (pts, idx)
}

/// `x` together with its four neighbours at distance `spacing` along the axes.
pub fn stencil_samples(centers: &[Vec2], spacing: f64) -> Vec<Vec2> {
    centers
        .iter()
        .flat_map(|&x| {
            [
                x,
                x + Vec2::new(spacing, 0.0),
                x - Vec2::new(spacing, 0.0),
                x + Vec2::new(0.0, spacing),
                x - Vec2::new(0.0, spacing),
            ]
        })
        .collect()
}

/// Segment `p → q` meets no boundary curve strictly between its endpoints.
pub fn segment_unobstructed(domain: &Domain, p: Vec2, q: Vec2) -> bool {
    let d = q - p;
    let len = d.norm();
    if len == 0.0 {
        return true;
    }
    let dir = d / len;
    let tol = 1e-12 * (1.0 + len);
    let crossing = domain.curves().iter().any(|c| {
        c.intersect_ray(p, dir).into_iter().any(|(tau, _)| {
            // the ray may start or end on the curve
            tau > tol && tau < len - tol
        })
    });
    !crossing && domain.closure_contains(p + d * 0.5, 1e-12)
}

/// Deterministic path builder: straight when unobstructed, otherwise the shortest polyline
/// around the obstacles inflated by half the minimum gap.
pub struct PathPlanner<'a> {
    domain: &'a Domain,
    base: Vec2,
    graph: VisibilityGraph,
}

impl<'a> PathPlanner<'a> {
    pub fn new(domain: &'a Domain, base: Vec2) -> Self {
        let graph = VisibilityGraph::new(domain, DEFAULT_VERTICES, 0.5 * domain.min_gap());
        PathPlanner { domain, base, graph }
    }

    pub fn plan(&self, x: Vec2) -> Result<(Option<Path>, PathDescriptor), ReconstructError> {
        let fail = || ReconstructError::PathConstructionFailed(x.x, x.y);
        if !self.domain.closure_contains(x, 1e-9) {
            return Err(fail());
        }
        if (x - self.base).norm() < 1e-14 {
            let desc = PathDescriptor {
                kind: PathKind::Trivial,
                vertices: vec![[x.x, x.y]],
                length: 0.0,
                winding: vec![0; self.domain.n_obstacles()],
            };
            return Ok((None, desc));
        }
        let (kind, chain) = if segment_unobstructed(self.domain, self.base, x) {
            (PathKind::Straight, vec![self.base, x])
        } else {
            let lifted = self.graph.lift(x);
            let (_, mut chain) = self.graph.shortest_path(self.base, lifted).map_err(|_| fail())?;
            if (lifted - x).norm() > 0.0 {
                chain.push(x);
            }
            chain.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
            (PathKind::Visibility, chain)
        };
        let path = Path::polyline(&chain).map_err(|_| fail())?.with_winding(self.domain);
        if kind == PathKind::Visibility && path.check_inside(self.domain).is_err() {
            return Err(fail());
        }
        let desc = PathDescriptor {
            kind,
            vertices: chain.iter().map(|v| [v.x, v.y]).collect(),
            length: path.length(),
            winding: path.winding().map(|w| w.to_vec()).unwrap_or_default(),
        };
        Ok((Some(path), desc))
    }
}

fn check_m(a: &MatrixPotential, b: &MatrixPotential) -> Result<usize, ReconstructError> {
    if a.m() != b.m() {
        return Err(crate::error::FieldError::ChannelMismatch(a.m(), b.m()).into());
    }
    Ok(a.m())
}

/// `c_B·c_A^{-1}` along one path.
fn relative_endpoint(a: &MatrixPotential, b: &MatrixPotential, path: &Path, opts: &TransportOptions) -> Result<CMat, ReconstructError> {
    let ca = transport(a, path, opts)?.c;
    let cb = transport(b, path, opts)?.c;
    let inv = linalg::inverse(&ca).ok_or(TransportError::InvalidPath("singular transport".into()))?;
    Ok(cb * inv)
}

/// Reconstructs `g(x) = c_B(x)·c_A(x)^{-1}` at every sample, transporting from `base`.
pub fn reconstruct_gauge(
    pot_a: &MatrixPotential,
    pot_b: &MatrixPotential,
    domain: &Domain,
    base: &BoundaryPoint,
    samples: &[Vec2],
    h: f64,
) -> Result<GaugeField, ReconstructError> {
    let m = check_m(pot_a, pot_b)?;
    if base.curve != 0 {
        return Err(BilliardError::StartNotOnOuter.into());
    }
    let planner = PathPlanner::new(domain, base.position);
    let opts = TransportOptions::with_step(h);
    let out: Vec<(CMat, PathDescriptor)> = samples
        .par_iter()
        .map(|&x| {
            let (path, desc) = planner.plan(x)?;
            let g = match path {
                None => identity(m),
                Some(p) => relative_endpoint(pot_a, pot_b, &p, &opts)?,
            };
            Ok((g, desc))
        })
        .collect::<Result<_, ReconstructError>>()?;
    let (matrices, paths) = out.into_iter().unzip();
    Ok(GaugeField { base: *base, samples: samples.to_vec(), matrices, paths, h, lattice: None })
}

/// [`reconstruct_gauge`] at the lattice nodes inside the closed domain.
pub fn reconstruct_on_lattice(
    pot_a: &MatrixPotential,
    pot_b: &MatrixPotential,
    domain: &Domain,
    base: &BoundaryPoint,
    lattice: Lattice,
    h: f64,
) -> Result<GaugeField, ReconstructError> {
    if lattice.nx < 4 || lattice.ny < 4 {
        return Err(ReconstructError::InsufficientSamples("lattice needs at least 4x4 nodes".into()));
    }
    let (pts, idx) = lattice_samples(domain, &lattice);
    let mut gf = reconstruct_gauge(pot_a, pot_b, domain, base, &pts, h)?;
    gf.lattice = Some((lattice, idx));
    Ok(gf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub residual: f64,
    pub winding1: Vec<i64>,
    pub winding2: Vec<i64>,
    pub winding_match: bool,
}

/// `‖b(path1) − b(path2)‖` for the relative transport `b = c_B c_A^{-1}`.
pub fn homotopy_residual(
    pot_a: &MatrixPotential,
    pot_b: &MatrixPotential,
    domain: &Domain,
    x: Vec2,
    path1: &Path,
    path2: &Path,
    h: f64,
) -> Result<HomotopyReport, ReconstructError> {
    check_m(pot_a, pot_b)?;
    let gap = (path1.start() - path2.start())
        .norm()
        .max((path1.end() - x).norm())
        .max((path2.end() - x).norm());
    if gap > 1e-9 {
        return Err(ReconstructError::EndpointMismatch(gap));
    }
    let opts = TransportOptions::with_step(h);
    let b1 = relative_endpoint(pot_a, pot_b, path1, &opts)?;
    let b2 = relative_endpoint(pot_a, pot_b, path2, &opts)?;
    let centers = domain.obstacle_centers();
    let winding1 = path1.crossings(&centers);
    let winding2 = path2.crossings(&centers);
    Ok(HomotopyReport { residual: linalg::dist(&b1, &b2), winding_match: winding1 == winding2, winding1, winding2 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub x: [f64; 2],
    pub a: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeResidual {
    /// Max over stencil centres of `‖A_B − i(∂g)g^{-1} − gA_Ag^{-1}‖`.
    pub a_residual: f64,
    /// Max over stencil centres of `‖V_B − gV_Ag^{-1}‖`.
    pub v_residual: f64,
    pub fd_spacing: f64,
    pub points: Vec<ResidualPoint>,
}

/// Residuals of the gauge relation at every sample whose four axis neighbours at `fd_spacing`
/// are also samples; gradients by central differences.
pub fn gauge_residual(
    pot_a: &MatrixPotential,
    pot_b: &MatrixPotential,
    gf: &GaugeField,
    fd_spacing: f64,
) -> Result<GaugeResidual, ReconstructError> {
    check_m(pot_a, pot_b)?;
    if !(fd_spacing > 0.0) {
        return Err(ReconstructError::InsufficientSamples(format!("fd spacing {fd_spacing}")));
    }
    let tol = STENCIL_MATCH * fd_spacing;
    let key = |x: Vec2| ((x.x / tol).round() as i64, (x.y / tol).round() as i64);
    let mut index = std::collections::HashMap::new();
    for (k, &x) in gf.samples.iter().enumerate() {
        index.entry(key(x)).or_insert(k);
    }
    let find = |x: Vec2| -> Option<usize> {
        let (kx, ky) = key(x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&k) = index.get(&(kx + dx, ky + dy)) {
                    if (gf.samples[k] - x).norm() <= tol {
                        return Some(k);
                    }
                }
            }
        }
        None
    };
    let mut centres = Vec::new();
    for (k, &x) in gf.samples.iter().enumerate() {
        if find(x) != Some(k) {
            // repeated sample
            continue;
        }
        let e = [Vec2::new(fd_spacing, 0.0), Vec2::new(0.0, fd_spacing)];
        let nb: Option<Vec<usize>> = [x + e[0], x - e[0], x + e[1], x - e[1]].iter().map(|&y| find(y)).collect();
        if let Some(nb) = nb {
            centres.push((k, nb));
        }
    }
    if centres.is_empty() {
        return Err(ReconstructError::InsufficientSamples(format!(
            "no sample has a full stencil at spacing {fd_spacing:.3e}"
        )));
    }
    let points: Vec<ResidualPoint> = centres
        .par_iter()
        .map(|(k, nb)| {
            let x = gf.samples[*k];
            let g = &gf.matrices[*k];
            let ginv = linalg::inverse(g).ok_or(crate::error::FieldError::SingularGauge(x.x, x.y, 0.0))?;
            let dg = [
                (&gf.matrices[nb[0]] - &gf.matrices[nb[1]]) / linalg::c(2.0 * fd_spacing, 0.0),
                (&gf.matrices[nb[2]] - &gf.matrices[nb[3]]) / linalg::c(2.0 * fd_spacing, 0.0),
            ];
            let pa = pot_a.eval(x)?;
            let pb = pot_b.eval(x)?;
            let mut a = 0.0f64;
            for i in 0..2 {
                let r = &pb.a[i] - (&dg[i] * &ginv) * I - g * &pa.a[i] * &ginv;
                a = a.max(linalg::fro(&r));
            }
            let v = linalg::fro(&(&pb.v - g * &pa.v * &ginv));
            Ok(ResidualPoint { x: [x.x, x.y], a, v })
        })
        .collect::<Result<_, ReconstructError>>()?;
    Ok(GaugeResidual {
        a_residual: points.iter().map(|p| p.a).fold(0.0, f64::max),
        v_residual: points.iter().map(|p| p.v).fold(0.0, f64::max),
        fd_spacing,
        points,
    })
}

/// Holonomies of `pot` around closed loops sharing a base point.
pub fn holonomy_fingerprint(pot: &MatrixPotential, loops: &[Path], h: f64) -> Result<Vec<CMat>, ReconstructError> {
    if let Some(first) = loops.first() {
        for lp in loops {
            if !lp.is_closed() {
                return Err(TransportError::PathNotClosed(lp.closure_gap()).into());
            }
            let gap = (lp.start() - first.start()).norm();
            if gap > 1e-9 {
                return Err(ReconstructError::EndpointMismatch(gap));
            }
        }
    }
    let opts = TransportOptions::with_step(h);
    loops.par_iter().map(|lp| Ok(holonomy(pot, lp, &opts)?)).collect()
}

/// Fingerprint over the generator loops based at `base`.
pub fn generator_fingerprint(
    pot: &MatrixPotential,
    domain: &Domain,
    base: &BoundaryPoint,
    h: f64,
) -> Result<Vec<CMat>, ReconstructError> {
    let loops = generator_loops(domain, base)?;
    holonomy_fingerprint(pot, &loops, h)
}

/// Largest entrywise-Frobenius distance between two fingerprints.
pub fn fingerprint_distance(f1: &[CMat], f2: &[CMat]) -> Result<f64, ReconstructError> {
    if f1.len() != f2.len() {
        return Err(ReconstructError::InsufficientSamples(format!("fingerprints of length {} and {}", f1.len(), f2.len())));
    }
    Ok(f1.iter().zip(f2).map(|(a, b)| linalg::dist(a, b)).fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayMismatch {
    pub start_s: f64,
    pub direction: [f64; 2],
    pub reflections: usize,
    pub winding: Vec<i64>,
    pub mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedRay {
    pub start_s: f64,
    pub direction: [f64; 2],
    pub reason: String,
    pub tangential: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointReport {
    pub fan_size: usize,
    pub max_mismatch: f64,
    pub accepted: Vec<RayMismatch>,
    pub rejected: Vec<RejectedRay>,
}

impl EndpointReport {
    pub fn tangential_fraction(&self) -> f64 {
        self.rejected.iter().filter(|r| r.tangential).count() as f64 / self.fan_size.max(1) as f64
    }
}

/// Compares endpoint transports of both potentials over a fan of broken rays.
pub fn broken_ray_endpoint_check(
    pot_a: &MatrixPotential,
    pot_b: &MatrixPotential,
    domain: &Domain,
    fan: &RayFan,
    h: f64,
) -> Result<EndpointReport, ReconstructError> {
    check_m(pot_a, pot_b)?;
    let entries = fan.trace_all(domain, &TraceOptions::default());
    let opts = TransportOptions::with_step(h);
    let results: Vec<Result<RayMismatch, RejectedRay>> = entries
        .par_iter()
        .map(|e| {
            let reject = |reason: String, tangential: bool| RejectedRay {
                start_s: e.start.s,
                direction: [e.direction.x, e.direction.y],
                reason,
                tangential,
            };
            let ray = match &e.ray {
                Ok(r) => r,
                Err(err) => {
                    let tangential = matches!(err, BilliardError::TangentialReflection(..) | BilliardError::NotInward(_));
                    return Err(reject(err.to_string(), tangential));
                }
            };
            let ca = broken_transport(pot_a, ray, &opts).map_err(|err| reject(err.to_string(), false))?;
            let cb = broken_transport(pot_b, ray, &opts).map_err(|err| reject(err.to_string(), false))?;
            Ok(RayMismatch {
                start_s: e.start.s,
                direction: [e.direction.x, e.direction.y],
                reflections: ray.n_reflections(),
                winding: ray.winding.clone(),
                mismatch: linalg::dist(&ca.c, &cb.c),
            })
        })
        .collect();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for r in results {
        match r {
            Ok(a) => accepted.push(a),
            Err(j) => rejected.push(j),
        }
    }
    Ok(EndpointReport {
        fan_size: fan.size(),
        max_mismatch: accepted.iter().map(|a| a.mismatch).fold(0.0, f64::max),
        accepted,
        rejected,
    })
}

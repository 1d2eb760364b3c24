//! Broken rays (billiard trajectories reflecting off obstacles), extended broken rays
//! closed along the outer curve, and explicit fundamental-group generator loops.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BilliardError, GeometryError, TransportError};
use crate::geometry::visibility::{ConvexPoly, VisibilityGraph, DEFAULT_VERTICES};
use crate::geometry::{reflect, BoundaryPoint, Domain, Shape};
use crate::linalg::Vec2;
use crate::transport::{ray_crossings, Path, PathPiece, MEMBERSHIP_SPACING};

pub const DEFAULT_MAX_LEGS: usize = 64;
/// Default length cutoff in units of the bounding-box diameter.
pub const DEFAULT_MAX_LENGTH_DIAMETERS: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub origin: Vec2,
    pub direction: Vec2,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokenRay {
    pub start: BoundaryPoint,
    pub direction: Vec2,
    pub legs: Vec<Leg>,
    pub reflections: Vec<BoundaryPoint>,
    pub end: BoundaryPoint,
    pub total_length: f64,
    /// Signed crossings of the `+x` ray from each obstacle center, summed over legs.
    pub winding: Vec<i64>,
}

impl BrokenRay {
    pub fn n_reflections(&self) -> usize {
        self.reflections.len()
    }

    /// Vertices: start, reflection points, end.
    pub fn vertices(&self) -> Vec<Vec2> {
        let mut v = vec![self.start.position];
        v.extend(self.reflections.iter().map(|r| r.position));
        v.push(self.end.position);
        v
    }

    /// One segment per leg, parametrized by arc length.
    pub fn to_path(&self) -> Result<Path, TransportError> {
        Path::polyline(&self.vertices())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub max_legs: usize,
    /// Absolute length cutoff; `None` means 100 bounding-box diameters.
    pub max_length: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { max_legs: DEFAULT_MAX_LEGS, max_length: None }
    }
}

/// Traces a broken ray from `start` on the outer curve in direction `omega`.
pub fn trace(domain: &Domain, start: &BoundaryPoint, omega: Vec2, opts: &TraceOptions) -> Result<BrokenRay, BilliardError> {
    if start.curve != 0 || domain.outer().project(start.position).1 > 1e-9 {
        return Err(BilliardError::StartNotOnOuter);
    }
    let d0 = omega.normalize();
    let dn = d0.dot(&start.normal);
    if !(dn < 0.0) {
        return Err(BilliardError::NotInward(dn));
    }
    let max_length = opts.max_length.unwrap_or(DEFAULT_MAX_LENGTH_DIAMETERS * domain.bbox().diameter());
    let centers = domain.obstacle_centers();
    let mut legs = Vec::new();
    let mut reflections = Vec::new();
    let mut x = start.position;
    let mut d = d0;
    let mut total = 0.0;
    loop {
        if legs.len() >= opts.max_legs || total > max_length {
            return Err(BilliardError::TrappedRay { legs: legs.len(), length: total });
        }
        let hit = domain.first_hit(x, d)?;
        if hit.near_corner {
            return Err(BilliardError::CornerHit(hit.point.curve));
        }
        legs.push(Leg { origin: x, direction: d, length: hit.tau });
        total += hit.tau;
        let p = hit.point.position;
        if hit.point.curve == 0 {
            let mut winding = vec![0; centers.len()];
            let verts: Vec<Vec2> = legs.iter().map(|l| l.origin).chain(std::iter::once(p)).collect();
            for (w, c) in winding.iter_mut().zip(&centers) {
                *w = ray_crossings(&verts, *c);
            }
            return Ok(BrokenRay {
                start: *start,
                direction: d0,
                legs,
                reflections,
                end: hit.point,
                total_length: total,
                winding,
            });
        }
        if hit.grazing {
            return Err(BilliardError::TangentialReflection(p.x, p.y, hit.c_inc));
        }
        d = reflect(d, hit.point.normal, domain.eps_tan()).map_err(|_| BilliardError::TangentialReflection(p.x, p.y, hit.c_inc))?;
        reflections.push(hit.point);
        x = p;
    }
}

/// Traces back from the end of `ray` along the reversed final direction.
pub fn trace_reversed(domain: &Domain, ray: &BrokenRay, opts: &TraceOptions) -> Result<BrokenRay, BilliardError> {
    let last = ray.legs.last().expect("broken ray has at least one leg");
    trace(domain, &ray.end, -last.direction, opts)
}

/// Outer-boundary arc from parameter `s_from` to `s_to` along the shorter direction
/// (ties go in the positive direction). Returns `None` for coincident points.
pub fn outer_arc(domain: &Domain, s_from: f64, s_to: f64) -> Option<Path> {
    let outer = domain.outer();
    let len = outer.length();
    let fwd = outer.wrap(s_to - s_from);
    let fwd = if len - fwd < 1e-13 { 0.0 } else { fwd };
    if fwd < 1e-13 {
        return None;
    }
    let back = len - fwd;
    let (sign, dist) = if fwd <= back { (1.0, fwd) } else { (-1.0, back) };
    let pieces = match &outer.shape {
        Shape::Circle { center, radius } => {
            let p = outer.point(s_from) - center;
            vec![PathPiece::Arc { center: *center, radius: *radius, theta0: p.y.atan2(p.x), sweep: sign * dist / radius }]
        }
        Shape::Polygon { cum, .. } => {
            let mut breaks = vec![0.0];
            let n = cum.len() - 1;
            for k in 0..n {
                // offset along the arc at which vertex k is passed
                let off = if sign > 0.0 { outer.wrap(cum[k] - s_from) } else { outer.wrap(s_from - cum[k]) };
                if off > 1e-12 && off < dist - 1e-12 {
                    breaks.push(off);
                }
            }
            breaks.push(dist);
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let pts: Vec<Vec2> = breaks.iter().map(|o| outer.point(s_from + sign * o)).collect();
            pts.windows(2).map(|w| PathPiece::Segment { a: w[0], b: w[1] }).collect()
        }
    };
    Path::new(pieces).ok()
}

/// Closed loop `α₁ γ α₂` based at a point of the outer curve.
#[derive(Clone, Debug)]
pub struct ExtendedRay {
    pub base: BoundaryPoint,
    pub alpha1: Option<Path>,
    pub ray: BrokenRay,
    pub alpha2: Option<Path>,
    pub path: Path,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedRayRecord {
    pub base: BoundaryPoint,
    pub alpha1_length: f64,
    pub alpha2_length: f64,
    pub ray: BrokenRay,
    pub closure_gap: f64,
    pub winding: Vec<i64>,
}

impl ExtendedRay {
    pub fn record(&self) -> ExtendedRayRecord {
        ExtendedRayRecord {
            base: self.base,
            alpha1_length: self.alpha1.as_ref().map_or(0.0, |p| p.length()),
            alpha2_length: self.alpha2.as_ref().map_or(0.0, |p| p.length()),
            ray: self.ray.clone(),
            closure_gap: self.path.closure_gap(),
            winding: self.path.winding().map(|w| w.to_vec()).unwrap_or_default(),
        }
    }
}

/// Attaches the shorter outer arcs from `base` to the ray start and from the ray end to `base`.
pub fn extend(domain: &Domain, ray: &BrokenRay, base: &BoundaryPoint) -> Result<ExtendedRay, BilliardError> {
    if base.curve != 0 {
        return Err(BilliardError::StartNotOnOuter);
    }
    let alpha1 = outer_arc(domain, base.s, ray.start.s);
    let alpha2 = outer_arc(domain, ray.end.s, base.s);
    let to_err = |e: TransportError| BilliardError::Geometry(GeometryError::DegenerateCurve(e.to_string()));
    let mut path = ray.to_path().map_err(to_err)?;
    if let Some(a1) = &alpha1 {
        path = a1.concat(&path).map_err(to_err)?;
    }
    if let Some(a2) = &alpha2 {
        path = path.concat(a2).map_err(to_err)?;
    }
    let path = path.with_winding(domain);
    Ok(ExtendedRay { base: *base, alpha1, ray: ray.clone(), alpha2, path })
}

/// One closed loop per obstacle, based at `base`, winding once counterclockwise around
/// obstacle `j` and around no other obstacle, with clearance at least half the minimum gap.
pub fn generator_loops(domain: &Domain, base: &BoundaryPoint) -> Result<Vec<Path>, BilliardError> {
    if base.curve != 0 {
        return Err(BilliardError::StartNotOnOuter);
    }
    let offset = 0.5 * domain.min_gap();
    let mut loops = Vec::with_capacity(domain.n_obstacles());
    for j in 1..=domain.n_obstacles() {
        let ob = domain.curve(j);
        let polys: Vec<ConvexPoly> =
            domain.obstacles().iter().map(|c| ConvexPoly::around(c, DEFAULT_VERTICES, offset)).collect();
        let graph = VisibilityGraph::from_polys(polys, domain.outer().clone(), &[]);
        let (attach, ring) = match &ob.shape {
            Shape::Circle { center, radius } => {
                let u = (base.position - center).normalize();
                let r = radius + offset;
                let attach = center + u * r;
                let ring = PathPiece::Arc { center: *center, radius: r, theta0: u.y.atan2(u.x), sweep: 2.0 * PI };
                (attach, vec![ring])
            }
            Shape::Polygon { .. } => {
                let poly = &graph.polys()[j - 1];
                let n = poly.vertices.len();
                let k0 = (0..n)
                    .min_by(|&a, &b| {
                        let da = (poly.vertices[a] - base.position).norm();
                        let db = (poly.vertices[b] - base.position).norm();
                        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                    })
                    .unwrap();
                let ring = (0..n)
                    .map(|i| PathPiece::Segment { a: poly.vertices[(k0 + i) % n], b: poly.vertices[(k0 + i + 1) % n] })
                    .collect();
                (poly.vertices[k0], ring)
            }
        };
        let lifted = graph.lift(attach);
        let (_, mut chain) = graph.shortest_path(base.position, lifted).map_err(|_| BilliardError::NoCorridor(j))?;
        if (lifted - attach).norm() > 0.0 {
            chain.push(attach);
        }
        chain.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
        let corridor = Path::polyline(&chain).map_err(|_| BilliardError::NoCorridor(j))?;
        let ring = Path::new(ring).map_err(|_| BilliardError::NoCorridor(j))?;
        let lp = corridor
            .concat(&ring)
            .and_then(|p| p.concat(&corridor.reversed()))
            .map_err(|_| BilliardError::NoCorridor(j))?
            .with_winding(domain);
        let expected: Vec<i64> = (1..=domain.n_obstacles()).map(|k| i64::from(k == j)).collect();
        if lp.winding() != Some(&expected[..]) || lp.check_inside(domain).is_err() {
            return Err(BilliardError::NoCorridor(j));
        }
        loops.push(lp);
    }
    Ok(loops)
}

/// Smallest distance from sampled loop points to any obstacle curve (outer excluded).
pub fn obstacle_clearance(domain: &Domain, path: &Path) -> f64 {
    path.sample(MEMBERSHIP_SPACING)
        .into_iter()
        .flat_map(|x| domain.obstacles().iter().map(move |ob| ob.project(x).1))
        .fold(f64::INFINITY, f64::min)
}

/// Fan of rays: `n_starts` equispaced start points on the outer curve and `n_directions`
/// directions per start, spread symmetrically within `spread` radians of the inward normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayFan {
    pub n_starts: usize,
    pub n_directions: usize,
    pub spread: f64,
    /// Fraction of the start spacing by which the first start is shifted.
    #[serde(default)]
    pub phase: f64,
}

impl Default for RayFan {
    fn default() -> Self {
        RayFan { n_starts: 10, n_directions: 10, spread: 1.2, phase: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct FanEntry {
    pub start: BoundaryPoint,
    pub direction: Vec2,
    pub ray: Result<BrokenRay, BilliardError>,
}

impl RayFan {
    pub fn size(&self) -> usize {
        self.n_starts * self.n_directions
    }

    pub fn launches(&self, domain: &Domain) -> Vec<(BoundaryPoint, Vec2)> {
        let len = domain.outer().length();
        let mut out = Vec::with_capacity(self.size());
        for i in 0..self.n_starts {
            let bp = domain.boundary_point(0, len * (i as f64 + self.phase) / self.n_starts as f64);
            let inward = -bp.normal;
            for k in 0..self.n_directions {
                let a = if self.n_directions == 1 {
                    0.0
                } else {
                    -self.spread + 2.0 * self.spread * k as f64 / (self.n_directions - 1) as f64
                };
                let (s, c) = a.sin_cos();
                out.push((bp, Vec2::new(c * inward.x - s * inward.y, s * inward.x + c * inward.y)));
            }
        }
        out
    }

    /// Traces every ray of the fan (in parallel, order preserved).
    pub fn trace_all(&self, domain: &Domain, opts: &TraceOptions) -> Vec<FanEntry> {
        self.launches(domain)
            .into_par_iter()
            .map(|(start, direction)| FanEntry { start, direction, ray: trace(domain, &start, direction, opts) })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    fn disk() -> Domain {
        Domain::new(DomainSpec::unit_disk()).unwrap()
    }

    fn disk_with_center() -> Domain {
        Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 0.2)).unwrap()
    }

    #[test]
    fn chord_without_obstacles() {
        let d = disk();
        let start = d.boundary_point(0, PI);
        let r = trace(&d, &start, Vec2::new(1.0, 0.0), &TraceOptions::default()).unwrap();
        assert_eq!(r.legs.len(), 1);
        assert_eq!(r.n_reflections(), 0);
        assert!((r.end.position - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert!((r.total_length - 2.0).abs() < 1e-12);
    }

    #[test]
    fn normal_incidence_bounces_back() {
        let d = disk_with_center();
        let start = d.boundary_point(0, PI);
        let r = trace(&d, &start, Vec2::new(1.0, 0.0), &TraceOptions::default()).unwrap();
        assert_eq!(r.n_reflections(), 1);
        assert!((r.reflections[0].position - Vec2::new(-0.2, 0.0)).norm() < 1e-12);
        assert!((r.end.position - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((r.total_length - 1.6).abs() < 1e-12);
    }

    #[test]
    fn start_validation() {
        let d = disk();
        let start = d.boundary_point(0, 0.0);
        assert!(matches!(trace(&d, &start, Vec2::new(1.0, 0.0), &TraceOptions::default()), Err(BilliardError::NotInward(_))));
        let inner = BoundaryPoint { curve: 0, s: 0.0, position: Vec2::new(0.5, 0.0), normal: Vec2::new(1.0, 0.0) };
        assert!(matches!(trace(&d, &inner, Vec2::new(-1.0, 0.0), &TraceOptions::default()), Err(BilliardError::StartNotOnOuter)));
    }

    #[test]
    fn trapped_and_corner_rays() {
        let d = disk_with_center();
        let start = d.boundary_point(0, PI);
        let opts = TraceOptions { max_legs: 1, max_length: None };
        assert!(matches!(trace(&d, &start, Vec2::new(1.0, 0.0), &opts), Err(BilliardError::TrappedRay { .. })));
        let sq = Domain::new(DomainSpec {
            outer: crate::geometry::CurveSpec::Circle { center: [0.0, 0.0], radius: 1.0 },
            obstacles: vec![crate::geometry::CurveSpec::Polygon {
                vertices: vec![[0.0, -0.2], [0.2, 0.0], [0.0, 0.2], [-0.2, 0.0]],
            }],
            eps_tan: None,
        })
        .unwrap();
        let start = sq.boundary_point(0, PI);
        assert!(matches!(trace(&sq, &start, Vec2::new(1.0, 0.0), &TraceOptions::default()), Err(BilliardError::CornerHit(1))));
    }

    #[test]
    fn extension_arcs() {
        let d = disk();
        let start = d.boundary_point(0, PI);
        let r = trace(&d, &start, Vec2::new(1.0, 0.0), &TraceOptions::default()).unwrap();
        // base at angle π/2 is a quarter turn from both endpoints
        let e = extend(&d, &r, &d.boundary_point(0, PI / 2.0)).unwrap();
        assert!((e.alpha1.as_ref().unwrap().length() - PI / 2.0).abs() < 1e-12);
        assert!((e.alpha2.as_ref().unwrap().length() - PI / 2.0).abs() < 1e-12);
        assert!(e.path.closure_gap() <= 1e-12);
        // base equal to both endpoints
        let dc = disk_with_center();
        let r = trace(&dc, &start, Vec2::new(1.0, 0.0), &TraceOptions::default()).unwrap();
        let e = extend(&dc, &r, &start).unwrap();
        assert!(e.alpha1.is_none() && e.alpha2.is_none());
        assert!(e.path.closure_gap() <= 1e-12);
    }

    #[test]
    fn polygon_outer_arcs_follow_vertices() {
        let d = Domain::new(DomainSpec {
            outer: crate::geometry::CurveSpec::Polygon { vertices: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]] },
            obstacles: vec![],
            eps_tan: None,
        })
        .unwrap();
        let a = outer_arc(&d, 1.0, 3.5).unwrap();
        assert!((a.length() - 2.5).abs() < 1e-12);
        assert_eq!(a.pieces().len(), 2);
        let b = outer_arc(&d, 0.5, 7.5).unwrap();
        assert!((b.length() - 1.0).abs() < 1e-12);
        assert!((b.end() - d.outer().point(7.5)).norm() < 1e-12);
    }

    #[test]
    fn generator_loops_wind_once() {
        let d = Domain::new(
            DomainSpec::unit_disk().with_disk_obstacle([0.35, 0.0], 0.2).with_disk_obstacle([-0.35, 0.1], 0.15),
        )
        .unwrap();
        let base = d.boundary_point(0, 0.3);
        let loops = generator_loops(&d, &base).unwrap();
        assert_eq!(loops.len(), 2);
        assert_eq!(loops[0].winding().unwrap(), &[1, 0]);
        assert_eq!(loops[1].winding().unwrap(), &[0, 1]);
        for lp in &loops {
            assert!(lp.is_closed());
            assert!(lp.check_inside(&d).is_ok());
            assert!(obstacle_clearance(&d, lp) >= 0.5 * d.min_gap() * (1.0 - 1e-3));
        }
    }

    #[test]
    fn fan_launches_point_inward() {
        let d = disk_with_center();
        let fan = RayFan::default();
        let l = fan.launches(&d);
        assert_eq!(l.len(), 100);
        assert!(l.iter().all(|(bp, w)| w.dot(&bp.normal) < 0.0 && (w.norm() - 1.0).abs() < 1e-14));
    }
}

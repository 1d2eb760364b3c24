//! Planar domains with obstacles: `Ω = Ω₀ \ ∪ Ω̄ⱼ`.
//!
//! The outer curve has id 0 and is traversed counter-clockwise; obstacle
//! `j` (id `j ≥ 1`) is traversed clockwise, so along every boundary curve
//! the domain lies to the left and `ν = (t_y, −t_x)` is the outward
//! normal of `Ω` (pointing into the obstacle on obstacle curves).

pub mod visibility;

pub use visibility::{InteriorDistance, VisibilityGraph};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GeometryError;
use crate::linalg::{cross, Vec2};

/// Default tangential threshold on the incidence cosine.
pub const EPS_TAN: f64 = 1e-2;
/// Ray parameters below this are treated as the ray origin.
pub const TAU_MIN: f64 = 1e-12;
/// Hits closer than this (in arc length) to a polygon vertex are corner hits.
pub const CORNER_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub outer: CurveSpec,
    #[serde(default)]
    pub obstacles: Vec<CurveSpec>,
    #[serde(default)]
    pub eps_tan: Option<f64>,
}

impl DomainSpec {
    pub fn unit_disk() -> Self {
        DomainSpec {
            outer: CurveSpec::Circle { center: [0.0, 0.0], radius: 1.0 },
            obstacles: vec![],
            eps_tan: None,
        }
    }

    pub fn with_disk_obstacle(mut self, center: [f64; 2], radius: f64) -> Self {
        self.obstacles.push(CurveSpec::Circle { center, radius });
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle { center: Vec2, radius: f64 },
    /// Vertices in traversal order.
    Polygon { vertices: Vec<Vec2>, cum: Vec<f64> },
}

/// One closed boundary curve with an arc-length parametrization.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCurve {
    pub id: usize,
    pub shape: Shape,
    pub orientation: Orientation,
    length: f64,
}

fn segment_point_distance(a: Vec2, b: Vec2, x: Vec2) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((x - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((a + ab * t - x).norm(), t)
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Vec2, b: Vec2, p: Vec2, d: f64| d == 0.0 && segment_point_distance(a, b, p).0 == 0.0;
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

fn segment_distance(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    [
        segment_point_distance(q1, q2, p1).0,
        segment_point_distance(q1, q2, p2).0,
        segment_point_distance(p1, p2, q1).0,
        segment_point_distance(p1, p2, q2).0,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

fn signed_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>() * 0.5
}

impl BoundaryCurve {
    fn new(id: usize, spec: &CurveSpec) -> Result<Self, GeometryError> {
        let orientation = if id == 0 { Orientation::Positive } else { Orientation::Negative };
        let shape = match spec {
            CurveSpec::Circle { center, radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeometryError::DegenerateCurve(format!(
                        "curve {id}: radius {radius} must be positive"
                    )));
                }
                Shape::Circle { center: Vec2::new(center[0], center[1]), radius: *radius }
            }
            CurveSpec::Polygon { vertices } => {
                let mut v: Vec<Vec2> = vertices.iter().map(|p| Vec2::new(p[0], p[1])).collect();
                if v.len() > 1 && v.first() == v.last() {
                    v.pop();
                }
                if v.len() < 3 {
                    return Err(GeometryError::DegenerateCurve(format!(
                        "curve {id}: polygon needs at least 3 vertices"
                    )));
                }
                let n = v.len();
                for i in 0..n {
                    if (v[(i + 1) % n] - v[i]).norm() == 0.0 {
                        return Err(GeometryError::DegenerateCurve(format!(
                            "curve {id}: repeated vertex {i}"
                        )));
                    }
                }
                let area = signed_area(&v);
                if area.abs() < 1e-14 {
                    return Err(GeometryError::DegenerateCurve(format!("curve {id}: zero area")));
                }
                for i in 0..n {
                    for j in (i + 2)..n {
                        if i == 0 && j == n - 1 {
                            continue;
                        }
                        if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                            return Err(GeometryError::DegenerateCurve(format!(
                                "curve {id}: polygon self-intersects (edges {i}, {j})"
                            )));
                        }
                    }
                }
                let want_ccw = orientation == Orientation::Positive;
                if (area > 0.0) != want_ccw {
                    v.reverse();
                }
                if id > 0 {
                    // convexity: all turns have the sign of the (clockwise) traversal
                    let convex = (0..n).all(|i| {
                        cross(v[(i + 1) % n] - v[i], v[(i + 2) % n] - v[(i + 1) % n]) < 0.0
                    });
                    if !convex {
                        return Err(GeometryError::DegenerateCurve(format!(
                            "obstacle {id}: polygon obstacles must be strictly convex"
                        )));
                    }
                }
                let mut cum = vec![0.0];
                for i in 0..n {
                    let l = cum[i] + (v[(i + 1) % n] - v[i]).norm();
                    cum.push(l);
                }
                Shape::Polygon { vertices: v, cum }
            }
        };
        let length = match &shape {
            Shape::Circle { radius, .. } => 2.0 * PI * radius,
            Shape::Polygon { cum, .. } => *cum.last().unwrap(),
        };
        Ok(BoundaryCurve { id, shape, orientation, length })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    fn sign(&self) -> f64 {
        match self.orientation {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.length);
        if w >= self.length {
            0.0
        } else {
            w
        }
    }

    fn edge_at(&self, s: f64) -> (usize, f64) {
        match &self.shape {
            Shape::Polygon { cum, vertices } => {
                let s = self.wrap(s);
                let n = vertices.len();
                let i = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
                    Ok(i) => i.min(n - 1),
                    Err(i) => i - 1,
                };
                (i, s - cum[i])
            }
            Shape::Circle { .. } => (0, s),
        }
    }

    pub fn point(&self, s: f64) -> Vec2 {
        match &self.shape {
            Shape::Circle { center, radius } => {
                let phi = self.sign() * s / radius;
                center + Vec2::new(phi.cos(), phi.sin()) * *radius
            }
            Shape::Polygon { vertices, .. } => {
                let (i, off) = self.edge_at(s);
                let n = vertices.len();
                let a = vertices[i];
                let b = vertices[(i + 1) % n];
                a + (b - a).normalize() * off
            }
        }
    }

    /// Unit tangent `dγ/ds`.
    pub fn tangent(&self, s: f64) -> Vec2 {
        match &self.shape {
            Shape::Circle { radius, .. } => {
                let phi = self.sign() * s / radius;
                Vec2::new(-phi.sin(), phi.cos()) * self.sign()
            }
            Shape::Polygon { vertices, .. } => {
                let (i, _) = self.edge_at(s);
                let n = vertices.len();
                (vertices[(i + 1) % n] - vertices[i]).normalize()
            }
        }
    }

    /// Outward unit normal of `Ω`.
    pub fn normal(&self, s: f64) -> Vec2 {
        let t = self.tangent(s);
        Vec2::new(t.y, -t.x)
    }

    /// Closest point on the curve: `(s, distance)`.
    pub fn project(&self, x: Vec2) -> (f64, f64) {
        match &self.shape {
            Shape::Circle { center, radius } => {
                let d = x - center;
                let phi = d.y.atan2(d.x);
                (self.wrap(self.sign() * phi * radius), (d.norm() - radius).abs())
            }
            Shape::Polygon { vertices, cum } => {
                let n = vertices.len();
                let mut best = (0.0, f64::INFINITY);
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let (d, t) = segment_point_distance(a, b, x);
                    if d < best.1 {
                        best = (self.wrap(cum[i] + t * (b - a).norm()), d);
                    }
                }
                best
            }
        }
    }

    /// Strict interior of the region bounded by the curve.
    pub fn region_contains(&self, x: Vec2) -> bool {
        match &self.shape {
            Shape::Circle { center, radius } => (x - center).norm_squared() < radius * radius,
            Shape::Polygon { vertices, .. } => {
                let n = vertices.len();
                let mut inside = false;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if segment_point_distance(a, b, x).0 == 0.0 {
                        return false;
                    }
                    if (a.y > x.y) != (b.y > x.y) {
                        let xc = a.x + (x.y - a.y) * (b.x - a.x) / (b.y - a.y);
                        if x.x < xc {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// All crossings of the ray `x + τd`, `τ > TAU_MIN`, as `(τ, s)`.
    pub fn intersect_ray(&self, x: Vec2, d: Vec2) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        match &self.shape {
            Shape::Circle { center, radius } => {
                let f = x - center;
                let a = d.norm_squared();
                let b = f.dot(&d);
                let cc = f.norm_squared() - radius * radius;
                let disc = b * b - a * cc;
                if disc < 0.0 {
                    return out;
                }
                let sq = disc.sqrt();
                // numerically stable pair of roots
                let q = if b > 0.0 { -(b + sq) } else { -b + sq };
                let mut roots = vec![];
                if q != 0.0 {
                    roots.push(q / a);
                    roots.push(cc / q);
                } else {
                    roots.push(0.0);
                }
                for t in roots {
                    if t > TAU_MIN {
                        let p = x + d * t;
                        out.push((t, self.project(p).0));
                    }
                }
            }
            Shape::Polygon { vertices, cum } => {
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let e = vertices[(i + 1) % n] - a;
                    let den = cross(d, e);
                    if den == 0.0 {
                        continue;
                    }
                    let w = a - x;
                    let t = cross(w, e) / den;
                    let u = cross(w, d) / den;
                    if t > TAU_MIN && (0.0..=1.0).contains(&u) {
                        out.push((t, self.wrap(cum[i] + u * e.norm())));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        out
    }

    /// Arc-length distance from `s` to the nearest polygon vertex (infinite for circles).
    pub fn vertex_distance(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Circle { .. } => f64::INFINITY,
            Shape::Polygon { cum, .. } => cum
                .iter()
                .map(|&c| {
                    let d = (s - c).abs();
                    d.min(self.length - d)
                })
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn sample_point(&self) -> Vec2 {
        self.point(0.0)
    }

    /// Distance between two curves (zero when they intersect).
    fn curve_distance(&self, other: &BoundaryCurve) -> f64 {
        use Shape::*;
        match (&self.shape, &other.shape) {
            (Circle { center: c1, radius: r1 }, Circle { center: c2, radius: r2 }) => {
                let d = (c1 - c2).norm();
                if d >= r1 + r2 {
                    d - r1 - r2
                } else if d <= (r1 - r2).abs() {
                    (r1 - r2).abs() - d
                } else {
                    0.0
                }
            }
            (Circle { center, radius }, Polygon { vertices, .. })
            | (Polygon { vertices, .. }, Circle { center, radius }) => {
                let n = vertices.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let near = segment_point_distance(a, b, *center).0;
                    let far = (a - center).norm().max((b - center).norm());
                    let d = if near >= *radius {
                        near - radius
                    } else if far <= *radius {
                        radius - far
                    } else {
                        0.0
                    };
                    best = best.min(d);
                }
                best
            }
            (Polygon { vertices: v1, .. }, Polygon { vertices: v2, .. }) => {
                let mut best = f64::INFINITY;
                for i in 0..v1.len() {
                    for j in 0..v2.len() {
                        best = best.min(segment_distance(
                            v1[i],
                            v1[(i + 1) % v1.len()],
                            v2[j],
                            v2[(j + 1) % v2.len()],
                        ));
                    }
                }
                best
            }
        }
    }

    pub fn bbox(&self) -> BBox {
        match &self.shape {
            Shape::Circle { center, radius } => BBox {
                min: center - Vec2::new(*radius, *radius),
                max: center + Vec2::new(*radius, *radius),
            },
            Shape::Polygon { vertices, .. } => {
                let mut b = BBox { min: vertices[0], max: vertices[0] };
                for v in vertices {
                    b.min = b.min.inf(v);
                    b.max = b.max.sup(v);
                }
                b
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min: Vec2,
    pub max: Vec2,
}

impl BBox {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }
    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub curve: usize,
    pub s: f64,
    pub position: Vec2,
    pub normal: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub point: BoundaryPoint,
    pub tau: f64,
    /// `|d·ν|` at the hit.
    pub c_inc: f64,
    pub grazing: bool,
    pub near_corner: bool,
}

impl Hit {
    pub fn require_transversal(self) -> Result<Hit, GeometryError> {
        if self.grazing {
            Err(GeometryError::GrazingHit { curve: self.point.curve, c_inc: self.c_inc })
        } else {
            Ok(self)
        }
    }
}

/// Validated domain; immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Domain {
    spec: DomainSpec,
    curves: Vec<BoundaryCurve>,
    bbox: BBox,
    eps_tan: f64,
    /// `(i, j, clearance)` for every pair of curves involving an obstacle.
    clearances: Vec<(usize, usize, f64)>,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self, GeometryError> {
        let mut curves = vec![BoundaryCurve::new(0, &spec.outer)?];
        for (j, ob) in spec.obstacles.iter().enumerate() {
            curves.push(BoundaryCurve::new(j + 1, ob)?);
        }
        let outer = &curves[0];
        let mut clearances = Vec::new();
        for j in 1..curves.len() {
            let ob = &curves[j];
            let gap = outer.curve_distance(ob);
            if gap <= 0.0 || !outer.region_contains(ob.sample_point()) {
                return Err(GeometryError::ObstacleOutsideOuter(j));
            }
            clearances.push((0, j, gap));
        }
        for i in 1..curves.len() {
            for j in (i + 1)..curves.len() {
                let gap = curves[i].curve_distance(&curves[j]);
                let nested = curves[i].region_contains(curves[j].sample_point())
                    || curves[j].region_contains(curves[i].sample_point());
                if gap <= 0.0 || nested {
                    return Err(GeometryError::OverlappingObstacles(i, j, gap));
                }
                clearances.push((i, j, gap));
            }
        }
        let eps_tan = spec.eps_tan.unwrap_or(EPS_TAN);
        if !(eps_tan > 0.0 && eps_tan < 1.0) {
            return Err(GeometryError::DegenerateCurve(format!("eps_tan {eps_tan} not in (0,1)")));
        }
        let bbox = curves[0].bbox();
        Ok(Domain { spec, curves, bbox, eps_tan, clearances })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    /// SHA-256 of the canonical JSON description.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.spec).expect("domain spec serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn outer(&self) -> &BoundaryCurve {
        &self.curves[0]
    }

    pub fn obstacles(&self) -> &[BoundaryCurve] {
        &self.curves[1..]
    }

    pub fn n_obstacles(&self) -> usize {
        self.curves.len() - 1
    }

    pub fn curve(&self, id: usize) -> &BoundaryCurve {
        &self.curves[id]
    }

    pub fn curves(&self) -> &[BoundaryCurve] {
        &self.curves
    }

    pub fn bbox(&self) -> BBox {
        self.bbox
    }

    pub fn eps_tan(&self) -> f64 {
        self.eps_tan
    }

    pub fn clearances(&self) -> &[(usize, usize, f64)] {
        &self.clearances
    }

    /// Smallest clearance among obstacle pairs and obstacle/outer pairs.
    pub fn min_gap(&self) -> f64 {
        self.clearances.iter().map(|c| c.2).fold(f64::INFINITY, f64::min)
    }

    /// Representative interior point of obstacle `j` (its center for circles, centroid otherwise).
    pub fn obstacle_center(&self, j: usize) -> Vec2 {
        match &self.curves[j].shape {
            Shape::Circle { center, .. } => *center,
            Shape::Polygon { vertices, .. } => {
                vertices.iter().fold(Vec2::zeros(), |a, v| a + v) / vertices.len() as f64
            }
        }
    }

    pub fn obstacle_centers(&self) -> Vec<Vec2> {
        (1..self.curves.len()).map(|j| self.obstacle_center(j)).collect()
    }

    /// Membership in the open set `Ω`.
    pub fn contains(&self, x: Vec2) -> bool {
        if !self.curves[0].region_contains(x) {
            return false;
        }
        self.curves[1..].iter().all(|ob| {
            !ob.region_contains(x) && ob.project(x).1 > 0.0
        })
    }

    /// Distance from `x` to the nearest boundary curve, with its id.
    pub fn boundary_distance(&self, x: Vec2) -> (usize, f64) {
        self.curves
            .iter()
            .map(|c| (c.id, c.project(x).1))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }

    /// Membership in `Ω̄` up to `tol`.
    pub fn closure_contains(&self, x: Vec2, tol: f64) -> bool {
        self.contains(x) || self.boundary_distance(x).1 <= tol
    }

    pub fn boundary_point(&self, curve: usize, s: f64) -> BoundaryPoint {
        let c = &self.curves[curve];
        let s = c.wrap(s);
        BoundaryPoint { curve, s, position: c.point(s), normal: c.normal(s) }
    }

    /// Boundary point nearest to `x`.
    pub fn nearest_boundary_point(&self, x: Vec2) -> BoundaryPoint {
        let (id, _) = self.boundary_distance(x);
        let (s, _) = self.curves[id].project(x);
        self.boundary_point(id, s)
    }

    /// First crossing of `∂Ω` along `x + τd` that leaves `Ω`.
    pub fn first_hit(&self, x: Vec2, d: Vec2) -> Result<Hit, GeometryError> {
        let d = d.normalize();
        let mut best: Option<(f64, usize, f64)> = None;
        for c in &self.curves {
            for (tau, s) in c.intersect_ray(x, d) {
                if d.dot(&c.normal(s)) <= 0.0 {
                    continue;
                }
                if best.map_or(true, |b| tau < b.0) {
                    best = Some((tau, c.id, s));
                }
            }
        }
        let (tau, id, s) = best.ok_or(GeometryError::NoHit(x.x, x.y))?;
        let curve = &self.curves[id];
        let bp = self.boundary_point(id, s);
        let c_inc = d.dot(&bp.normal).abs();
        Ok(Hit {
            point: BoundaryPoint { position: x + d * tau, ..bp },
            tau,
            c_inc,
            grazing: c_inc < self.eps_tan,
            near_corner: curve.vertex_distance(s) < CORNER_TOL,
        })
    }

    /// Interior-distance helper with the default polygonization.
    pub fn interior_distance(&self, x: Vec2) -> Result<f64, GeometryError> {
        InteriorDistance::new(self, visibility::DEFAULT_VERTICES).distance(x)
    }

    /// Maximum interior distance to `∂Ω₀` over a sample grid of spacing `spacing`.
    pub fn max_interior_distance(&self, spacing: f64) -> MaxDistance {
        InteriorDistance::new(self, visibility::DEFAULT_VERTICES).max_over_grid(spacing)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxDistance {
    pub value: f64,
    pub argmax: Vec2,
    pub spacing: f64,
    pub samples: usize,
}

/// Specular reflection `d − 2(d·ν)ν`.
pub fn reflect(d: Vec2, nu: Vec2, eps_tan: f64) -> Result<Vec2, GeometryError> {
    let dn = d.dot(&nu);
    if dn.abs() < eps_tan {
        return Err(GeometryError::TangentialIncidence(dn.abs()));
    }
    Ok(d - nu * (2.0 * dn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn disk() -> Domain {
        Domain::new(DomainSpec::unit_disk()).unwrap()
    }

    #[test]
    fn build_examples() {
        let d = disk();
        assert_eq!(d.n_obstacles(), 0);
        let bad = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 1.1));
        assert_eq!(bad.unwrap_err(), GeometryError::ObstacleOutsideOuter(1));
        let two = Domain::new(
            DomainSpec::unit_disk()
                .with_disk_obstacle([0.3, 0.0], 0.2)
                .with_disk_obstacle([-0.3, 0.0], 0.2),
        )
        .unwrap();
        assert_eq!(two.n_obstacles(), 2);
        assert!((two.min_gap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn build_errors() {
        let overlap = Domain::new(
            DomainSpec::unit_disk()
                .with_disk_obstacle([0.1, 0.0], 0.2)
                .with_disk_obstacle([-0.1, 0.0], 0.2),
        );
        assert!(matches!(overlap, Err(GeometryError::OverlappingObstacles(1, 2, _))));
        let neg = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], -0.1));
        assert!(matches!(neg, Err(GeometryError::DegenerateCurve(_))));
        let bowtie = DomainSpec {
            outer: CurveSpec::Polygon {
                vertices: vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
            },
            obstacles: vec![],
            eps_tan: None,
        };
        assert!(matches!(Domain::new(bowtie), Err(GeometryError::DegenerateCurve(_))));
        let nonconvex = DomainSpec {
            outer: CurveSpec::Circle { center: [0.0, 0.0], radius: 2.0 },
            obstacles: vec![CurveSpec::Polygon {
                vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.2, 0.2], [0.0, 1.0]],
            }],
            eps_tan: None,
        };
        assert!(matches!(Domain::new(nonconvex), Err(GeometryError::DegenerateCurve(_))));
    }

    #[test]
    fn contains_examples() {
        let d = disk();
        assert!(d.contains(Vec2::new(0.0, 0.0)));
        assert!(!d.contains(Vec2::new(2.0, 0.0)));
        let ob = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 0.2)).unwrap();
        assert!(!ob.contains(Vec2::new(0.0, 0.0)));
        assert!(!ob.contains(Vec2::new(0.2, 0.0)));
        assert!(ob.contains(Vec2::new(0.5, 0.0)));
    }

    #[test]
    fn first_hit_examples() {
        let d = disk();
        let h = d.first_hit(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(h.point.curve, 0);
        assert!((h.tau - 1.0).abs() < 1e-15);
        assert!((h.point.position - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert!(!h.grazing);

        let ob = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 0.2)).unwrap();
        let h = ob.first_hit(Vec2::new(0.5, 0.0), Vec2::new(-1.0, 0.0)).unwrap();
        assert_eq!(h.point.curve, 1);
        assert!((h.tau - 0.3).abs() < 1e-14);
        assert!((h.point.position - Vec2::new(0.2, 0.0)).norm() < 1e-14);
        // normal points into the obstacle
        assert!((h.point.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-14);

        let h = d.first_hit(Vec2::new(0.0, 0.999999), Vec2::new(1.0, 0.0)).unwrap();
        let expect = (1.0f64 - 0.999999f64 * 0.999999).sqrt();
        assert!(h.grazing);
        assert!((h.c_inc - expect).abs() < 1e-9);
        assert!((h.c_inc - 1.414e-3).abs() < 1e-6);
        assert!(matches!(h.require_transversal(), Err(GeometryError::GrazingHit { .. })));
    }

    #[test]
    fn first_hit_from_boundary_start() {
        let d = disk();
        let h = d.first_hit(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert!((h.tau - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polygon_corner_flag() {
        let spec = DomainSpec {
            outer: CurveSpec::Polygon {
                vertices: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]],
            },
            obstacles: vec![],
            eps_tan: None,
        };
        let d = Domain::new(spec).unwrap();
        let h = d.first_hit(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap();
        assert!(h.near_corner);
        let h = d.first_hit(Vec2::zeros(), Vec2::new(1.0, 0.3)).unwrap();
        assert!(!h.near_corner);
        assert!((h.point.normal - Vec2::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn reflect_examples() {
        let r = reflect(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0), EPS_TAN).unwrap();
        assert_eq!(r, Vec2::new(1.0, 0.0));
        assert!(matches!(
            reflect(Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0), EPS_TAN),
            Err(GeometryError::TangentialIncidence(_))
        ));
        let r = reflect(Vec2::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2), Vec2::new(0.0, 1.0), EPS_TAN)
            .unwrap();
        assert!((r - Vec2::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn obstacle_parametrization_is_clockwise() {
        let d = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 0.5)).unwrap();
        let ob = d.curve(1);
        let p0 = ob.point(0.0);
        let p1 = ob.point(0.1);
        assert!(cross(p0, p1) < 0.0);
        // normal of Ω on an obstacle points into the obstacle
        assert!(ob.normal(0.3).dot(&ob.point(0.3)) < 0.0);
        let (s, dist) = ob.project(Vec2::new(0.0, -0.7));
        assert!((dist - 0.2).abs() < 1e-14);
        assert!((ob.point(s) - Vec2::new(0.0, -0.5)).norm() < 1e-14);
    }
}

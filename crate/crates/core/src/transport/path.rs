//! Piecewise paths: segments, circular arcs and parametric curves.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::TransportError;
use crate::geometry::Domain;
use crate::linalg::Vec2;

/// Gap below which a path counts as closed.
pub const CLOSE_TOL: f64 = 1e-10;
/// Membership sampling spacing for path validation.
pub const MEMBERSHIP_SPACING: f64 = 1e-3;

type CurveFn = dyn Fn(f64) -> (Vec2, Vec2) + Send + Sync;

/// Parametric curve `t ↦ (γ(t), γ̇(t))` on `[0, t_end]`.
#[derive(Clone)]
pub struct ParamCurve {
    f: Arc<CurveFn>,
    pub t_end: f64,
    pub label: String,
}

impl ParamCurve {
    pub fn new(label: impl Into<String>, t_end: f64, f: impl Fn(f64) -> (Vec2, Vec2) + Send + Sync + 'static) -> Self {
        ParamCurve { f: Arc::new(f), t_end, label: label.into() }
    }

    pub fn eval(&self, t: f64) -> (Vec2, Vec2) {
        (self.f)(t)
    }
}

impl fmt::Debug for ParamCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParamCurve({}, t_end={})", self.label, self.t_end)
    }
}

#[derive(Clone, Debug)]
pub enum PathPiece {
    Segment { a: Vec2, b: Vec2 },
    /// Arc of a circle, swept from angle `theta0` by the signed angle `sweep`.
    Arc { center: Vec2, radius: f64, theta0: f64, sweep: f64 },
    Curve(ParamCurve),
}

/// Serializable description of a path piece (curves keep only their label).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PieceRecord {
    Segment { a: [f64; 2], b: [f64; 2] },
    Arc { center: [f64; 2], radius: f64, theta0: f64, sweep: f64 },
    Curve { label: String, t_end: f64 },
}

impl PathPiece {
    /// Parameter length; arc length for segments and arcs.
    pub fn length(&self) -> f64 {
        match self {
            PathPiece::Segment { a, b } => (b - a).norm(),
            PathPiece::Arc { radius, sweep, .. } => radius * sweep.abs(),
            PathPiece::Curve(cv) => cv.t_end,
        }
    }

    /// Point and velocity at parameter `t ∈ [0, length]`.
    pub fn eval(&self, t: f64) -> (Vec2, Vec2) {
        match self {
            PathPiece::Segment { a, b } => {
                let len = (b - a).norm();
                let d = (b - a) / len;
                if t >= len {
                    (*b, d)
                } else {
                    (a + d * t, d)
                }
            }
            PathPiece::Arc { center, radius, theta0, sweep } => {
                let sg = sweep.signum();
                let th = if t >= radius * sweep.abs() { theta0 + sweep } else { theta0 + sg * t / radius };
                let (s, c) = th.sin_cos();
                (center + Vec2::new(c, s) * *radius, Vec2::new(-s, c) * sg)
            }
            PathPiece::Curve(cv) => cv.eval(t),
        }
    }

    pub fn start(&self) -> Vec2 {
        match self {
            PathPiece::Segment { a, .. } => *a,
            _ => self.eval(0.0).0,
        }
    }

    pub fn end(&self) -> Vec2 {
        match self {
            PathPiece::Segment { b, .. } => *b,
            _ => self.eval(self.length()).0,
        }
    }

    pub fn reversed(&self) -> PathPiece {
        match self {
            PathPiece::Segment { a, b } => PathPiece::Segment { a: *b, b: *a },
            PathPiece::Arc { center, radius, theta0, sweep } => {
                PathPiece::Arc { center: *center, radius: *radius, theta0: theta0 + sweep, sweep: -sweep }
            }
            PathPiece::Curve(cv) => {
                let inner = cv.clone();
                let t_end = cv.t_end;
                PathPiece::Curve(ParamCurve::new(format!("reversed({})", cv.label), t_end, move |t| {
                    let (p, v) = inner.eval(t_end - t);
                    (p, -v)
                }))
            }
        }
    }

    /// Points along the piece at parameter spacing at most `spacing` (in length units), endpoints included.
    pub fn sample(&self, spacing: f64) -> Vec<Vec2> {
        let len = self.length();
        let speed = match self {
            PathPiece::Curve(cv) => (0..=64).map(|k| cv.eval(cv.t_end * k as f64 / 64.0).1.norm()).fold(0.0, f64::max),
            _ => 1.0,
        };
        let n = ((len * speed / spacing).ceil() as usize).max(1);
        (0..=n).map(|k| self.eval(len * k as f64 / n as f64).0).collect()
    }

    pub fn record(&self) -> PieceRecord {
        match self {
            PathPiece::Segment { a, b } => PieceRecord::Segment { a: [a.x, a.y], b: [b.x, b.y] },
            PathPiece::Arc { center, radius, theta0, sweep } => {
                PieceRecord::Arc { center: [center.x, center.y], radius: *radius, theta0: *theta0, sweep: *sweep }
            }
            PathPiece::Curve(cv) => PieceRecord::Curve { label: cv.label.clone(), t_end: cv.t_end },
        }
    }

    pub fn from_record(r: &PieceRecord) -> Result<PathPiece, TransportError> {
        Ok(match r {
            PieceRecord::Segment { a, b } => PathPiece::Segment { a: Vec2::new(a[0], a[1]), b: Vec2::new(b[0], b[1]) },
            PieceRecord::Arc { center, radius, theta0, sweep } => {
                PathPiece::Arc { center: Vec2::new(center[0], center[1]), radius: *radius, theta0: *theta0, sweep: *sweep }
            }
            PieceRecord::Curve { label, .. } => {
                return Err(TransportError::InvalidPath(format!("curve '{label}' cannot be rebuilt from its record")))
            }
        })
    }
}

/// Signed crossings of the ray `{c + t·(1,0), t > 0}` by a polyline (upward = +1).
pub fn ray_crossings(points: &[Vec2], c: Vec2) -> i64 {
    let mut w = 0;
    for pq in points.windows(2) {
        let (p, q) = (pq[0] - c, pq[1] - c);
        let up = p.y < 0.0 && q.y >= 0.0;
        let down = q.y < 0.0 && p.y >= 0.0;
        if up || down {
            let x = p.x + (q.x - p.x) * (-p.y) / (q.y - p.y);
            if x > 0.0 {
                w += if up { 1 } else { -1 };
            }
        }
    }
    w
}

/// Concatenation of path pieces, traversed in order.
#[derive(Clone, Debug)]
pub struct Path {
    pieces: Vec<PathPiece>,
    winding: Option<Vec<i64>>,
}

impl Path {
    pub fn new(pieces: Vec<PathPiece>) -> Result<Self, TransportError> {
        if pieces.is_empty() {
            return Err(TransportError::InvalidPath("path has no pieces".into()));
        }
        for (k, p) in pieces.iter().enumerate() {
            let len = p.length();
            if !(len > 0.0) || !len.is_finite() {
                return Err(TransportError::InvalidPath(format!("piece {k} has length {len}")));
            }
        }
        for (k, w) in pieces.windows(2).enumerate() {
            let gap = (w[0].end() - w[1].start()).norm();
            if gap > 1e-9 {
                return Err(TransportError::InvalidPath(format!("pieces {k} and {} are {gap:.3e} apart", k + 1)));
            }
        }
        Ok(Path { pieces, winding: None })
    }

    /// Polyline through `nodes`; consecutive nodes must be distinct.
    pub fn polyline(nodes: &[Vec2]) -> Result<Self, TransportError> {
        if nodes.len() < 2 {
            return Err(TransportError::InvalidPath("polyline needs at least two nodes".into()));
        }
        Self::new(nodes.windows(2).map(|w| PathPiece::Segment { a: w[0], b: w[1] }).collect())
    }

    pub fn segment(a: Vec2, b: Vec2) -> Result<Self, TransportError> {
        Self::polyline(&[a, b])
    }

    /// Full circle starting at angle `theta0`, counterclockwise when `ccw`.
    pub fn circle(center: Vec2, radius: f64, theta0: f64, ccw: bool) -> Result<Self, TransportError> {
        let sweep = if ccw { 2.0 * PI } else { -2.0 * PI };
        Self::new(vec![PathPiece::Arc { center, radius, theta0, sweep }])
    }

    pub fn curve(curve: ParamCurve) -> Result<Self, TransportError> {
        Self::new(vec![PathPiece::Curve(curve)])
    }

    pub fn pieces(&self) -> &[PathPiece] {
        &self.pieces
    }

    pub fn start(&self) -> Vec2 {
        self.pieces[0].start()
    }

    pub fn end(&self) -> Vec2 {
        self.pieces[self.pieces.len() - 1].end()
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length()).sum()
    }

    pub fn closure_gap(&self) -> f64 {
        (self.end() - self.start()).norm()
    }

    pub fn is_closed(&self) -> bool {
        self.closure_gap() <= CLOSE_TOL
    }

    /// Winding record, if one was attached.
    pub fn winding(&self) -> Option<&[i64]> {
        self.winding.as_deref()
    }

    pub fn set_winding(&mut self, w: Vec<i64>) {
        self.winding = Some(w);
    }

    /// Attaches signed crossing counts around each obstacle center of `domain`.
    pub fn with_winding(mut self, domain: &Domain) -> Self {
        self.winding = Some(self.crossings(&domain.obstacle_centers()));
        self
    }

    /// Signed crossings of the `+x` ray from each center (polylinized at spacing 1e-3).
    pub fn crossings(&self, centers: &[Vec2]) -> Vec<i64> {
        let pts = self.sample(MEMBERSHIP_SPACING);
        centers.iter().map(|c| ray_crossings(&pts, *c)).collect()
    }

    pub fn reversed(&self) -> Path {
        Path {
            pieces: self.pieces.iter().rev().map(|p| p.reversed()).collect(),
            winding: self.winding.as_ref().map(|w| w.iter().map(|x| -x).collect()),
        }
    }

    /// `self` followed by `other`; winding records add when both are known.
    pub fn concat(&self, other: &Path) -> Result<Path, TransportError> {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        let mut p = Path::new(pieces)?;
        if let (Some(a), Some(b)) = (&self.winding, &other.winding) {
            p.winding = Some(a.iter().zip(b).map(|(x, y)| x + y).collect());
        }
        Ok(p)
    }

    pub fn sample(&self, spacing: f64) -> Vec<Vec2> {
        let mut out = vec![self.start()];
        for p in &self.pieces {
            out.extend(p.sample(spacing).into_iter().skip(1));
        }
        if self.is_closed() {
            // identical endpoints keep the half-open crossing rule consistent
            let first = out[0];
            *out.last_mut().unwrap() = first;
        }
        out
    }

    /// Checks that sampled points (spacing 1e-3) lie in the closure of the domain.
    pub fn check_inside(&self, domain: &Domain) -> Result<(), TransportError> {
        for x in self.sample(MEMBERSHIP_SPACING) {
            if !domain.closure_contains(x, 1e-9) {
                return Err(TransportError::PathLeavesDomain(x.x, x.y));
            }
        }
        Ok(())
    }

    pub fn records(&self) -> Vec<PieceRecord> {
        self.pieces.iter().map(|p| p.record()).collect()
    }

    pub fn from_records(records: &[PieceRecord]) -> Result<Path, TransportError> {
        Self::new(records.iter().map(PathPiece::from_record).collect::<Result<_, _>>()?)
    }

    /// SHA-256 of the JSON piece records.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.records()).expect("path records serialize");
        hex::encode(Sha256::digest(json))
    }
}

//! Cartesian solver grid with interior / boundary / exterior classification and
//! boundary-arm data for Shortley–Weller stencils.

use serde::{Deserialize, Serialize};

use crate::geometry::Domain;
use crate::linalg::Vec2;

/// Nodes closer than `SNAP_FRACTION·h` to a boundary curve are treated as boundary nodes.
pub const SNAP_FRACTION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTreatment {
    /// Exact boundary crossings with nonuniform stencils, `O(h²)`.
    ShortleyWeller,
    /// Exterior neighbours snapped to their nearest boundary point, `O(h)`.
    Snap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Interior(usize),
    Boundary { curve: usize, s: f64 },
    Exterior,
}

/// End of a stencil arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ArmEnd {
    Node(usize),
    /// Boundary point on `curve` at arc length `s`.
    Boundary { curve: usize, s: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arm {
    pub end: ArmEnd,
    pub length: f64,
}

/// Interior node with its four arms in the order east, west, north, south.
#[derive(Clone, Debug)]
pub struct InteriorNode {
    pub ix: i64,
    pub iy: i64,
    pub position: Vec2,
    pub arms: [Arm; 4],
}

#[derive(Clone, Debug)]
pub struct SolverGrid {
    pub h: f64,
    pub treatment: BoundaryTreatment,
    /// Integer index of the first column/row: node `(ix, iy)` sits at `(ix·h, iy·h)`.
    pub i0: i64,
    pub j0: i64,
    pub nx: usize,
    pub ny: usize,
    kinds: Vec<NodeKind>,
    pub interior: Vec<InteriorNode>,
}

const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl SolverGrid {
    pub fn new(domain: &Domain, h: f64, treatment: BoundaryTreatment) -> Self {
        let bb = domain.bbox();
        let i0 = (bb.min.x / h).floor() as i64 - 1;
        let j0 = (bb.min.y / h).floor() as i64 - 1;
        let nx = ((bb.max.x / h).ceil() as i64 + 1 - i0 + 1) as usize;
        let ny = ((bb.max.y / h).ceil() as i64 + 1 - j0 + 1) as usize;
        let eta = SNAP_FRACTION * h;
        let mut kinds = Vec::with_capacity(nx * ny);
        let mut n_int = 0;
        for jy in 0..ny {
            for jx in 0..nx {
                let x = Vec2::new((i0 + jx as i64) as f64 * h, (j0 + jy as i64) as f64 * h);
                let (id, dist) = domain.boundary_distance(x);
                let kind = if dist <= eta {
                    NodeKind::Boundary { curve: id, s: domain.curve(id).project(x).0 }
                } else if domain.contains(x) {
                    n_int += 1;
                    NodeKind::Interior(n_int - 1)
                } else {
                    NodeKind::Exterior
                };
                kinds.push(kind);
            }
        }
        let mut g = SolverGrid { h, treatment, i0, j0, nx, ny, kinds, interior: Vec::with_capacity(n_int) };
        for jy in 0..ny {
            for jx in 0..nx {
                if let NodeKind::Interior(_) = g.kinds[jy * nx + jx] {
                    let (ix, iy) = (i0 + jx as i64, j0 + jy as i64);
                    let x = g.position(ix, iy);
                    let arms = DIRS.map(|(dx, dy)| g.arm(domain, ix, iy, x, dx, dy));
                    g.interior.push(InteriorNode { ix, iy, position: x, arms });
                }
            }
        }
        g
    }

    pub fn position(&self, ix: i64, iy: i64) -> Vec2 {
        Vec2::new(ix as f64 * self.h, iy as f64 * self.h)
    }

    /// Kind of node `(ix, iy)`; nodes off the grid count as exterior.
    pub fn kind(&self, ix: i64, iy: i64) -> NodeKind {
        let (jx, jy) = (ix - self.i0, iy - self.j0);
        if jx < 0 || jy < 0 || jx >= self.nx as i64 || jy >= self.ny as i64 {
            return NodeKind::Exterior;
        }
        self.kinds[jy as usize * self.nx + jx as usize]
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    fn arm(&self, domain: &Domain, ix: i64, iy: i64, x: Vec2, dx: i64, dy: i64) -> Arm {
        let h = self.h;
        let nb = self.kind(ix + dx, iy + dy);
        if let NodeKind::Interior(k) = nb {
            return Arm { end: ArmEnd::Node(k), length: h };
        }
        let q = self.position(ix + dx, iy + dy);
        if self.treatment == BoundaryTreatment::Snap {
            let bp = domain.nearest_boundary_point(q);
            return Arm { end: ArmEnd::Boundary { curve: bp.curve, s: bp.s }, length: h };
        }
        let d = Vec2::new(dx as f64, dy as f64);
        let mut best: Option<(f64, usize, f64)> = None;
        for c in domain.curves() {
            for (tau, s) in c.intersect_ray(x, d) {
                if tau <= h * (1.0 + 1e-9) && best.map_or(true, |b| tau < b.0) {
                    best = Some((tau, c.id, s));
                }
            }
        }
        match (best, nb) {
            (Some((tau, curve, s)), _) => Arm { end: ArmEnd::Boundary { curve, s }, length: tau },
            (None, NodeKind::Boundary { curve, s }) => Arm { end: ArmEnd::Boundary { curve, s }, length: h },
            (None, _) => {
                // the crossing lies within rounding of the neighbour
                let bp = domain.nearest_boundary_point(q);
                Arm { end: ArmEnd::Boundary { curve: bp.curve, s: bp.s }, length: h }
            }
        }
    }

    /// Interior node indices within `radius` of `x`.
    pub fn interior_near(&self, x: Vec2, radius: f64) -> Vec<usize> {
        let h = self.h;
        let (ilo, ihi) = (((x.x - radius) / h).floor() as i64, ((x.x + radius) / h).ceil() as i64);
        let (jlo, jhi) = (((x.y - radius) / h).floor() as i64, ((x.y + radius) / h).ceil() as i64);
        let mut out = Vec::new();
        for iy in jlo..=jhi {
            for ix in ilo..=ihi {
                if let NodeKind::Interior(k) = self.kind(ix, iy) {
                    if (self.position(ix, iy) - x).norm() <= radius {
                        out.push(k);
                    }
                }
            }
        }
        out
    }
}

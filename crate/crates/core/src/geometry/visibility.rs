//! Visibility-graph shortest paths around polygonized obstacles.
//!
//! Circular obstacles are replaced by circumscribed regular polygons, so
//! every path found here is feasible for the exact obstacles and the
//! reported lengths are upper bounds that converge as the vertex count grows.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rayon::prelude::*;

use super::{segments_intersect, BoundaryCurve, Domain, MaxDistance, Shape};
use crate::error::GeometryError;
use crate::linalg::{cross, Vec2};

pub const DEFAULT_VERTICES: usize = 64;
const CLIP_EPS: f64 = 1e-10;

/// Convex polygon, counter-clockwise, with outward edge normals.
#[derive(Clone, Debug)]
pub struct ConvexPoly {
    pub vertices: Vec<Vec2>,
    normals: Vec<Vec2>,
    offsets: Vec<f64>,
    pub center: Vec2,
}

impl ConvexPoly {
    pub fn new(vertices: Vec<Vec2>, center: Vec2) -> Self {
        let n = vertices.len();
        let mut normals = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let e = vertices[(i + 1) % n] - vertices[i];
            let nrm = Vec2::new(e.y, -e.x).normalize();
            offsets.push(nrm.dot(&vertices[i]));
            normals.push(nrm);
        }
        ConvexPoly { vertices, normals, offsets, center }
    }

    /// Polygon enclosing the obstacle curve inflated by `inflate`.
    pub fn around(curve: &BoundaryCurve, n: usize, inflate: f64) -> Self {
        match &curve.shape {
            Shape::Circle { center, radius } => {
                let r = (radius + inflate) / (PI / n as f64).cos();
                let verts = (0..n)
                    .map(|k| {
                        let a = 2.0 * PI * k as f64 / n as f64;
                        center + Vec2::new(a.cos(), a.sin()) * r
                    })
                    .collect();
                ConvexPoly::new(verts, *center)
            }
            Shape::Polygon { vertices, .. } => {
                // stored clockwise for obstacles; flip to counter-clockwise
                let mut v: Vec<Vec2> = vertices.iter().rev().cloned().collect();
                let center = v.iter().fold(Vec2::zeros(), |a, p| a + p) / v.len() as f64;
                if inflate > 0.0 {
                    let base = ConvexPoly::new(v.clone(), center);
                    let m = v.len();
                    v = (0..m)
                        .map(|i| {
                            let prev = (i + m - 1) % m;
                            let (n1, b1) = (base.normals[prev], base.offsets[prev] + inflate);
                            let (n2, b2) = (base.normals[i], base.offsets[i] + inflate);
                            let det = cross(n1, n2);
                            Vec2::new(b1 * n2.y - b2 * n1.y, n1.x * b2 - n2.x * b1) / det
                        })
                        .collect();
                }
                ConvexPoly::new(v, center)
            }
        }
    }

    /// True when the segment passes through the interior (shrunk by a small margin).
    pub fn blocks(&self, p: Vec2, q: Vec2) -> bool {
        let d = q - p;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (nrm, &b) in self.normals.iter().zip(&self.offsets) {
            let num = nrm.dot(&p) - b;
            let den = nrm.dot(&d);
            if den == 0.0 {
                if num >= -CLIP_EPS {
                    return false;
                }
                continue;
            }
            let t = (-CLIP_EPS - num) / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t1 - t0 <= 1e-12 {
                return false;
            }
        }
        t1 - t0 > 1e-12
    }

    pub fn contains_strict(&self, x: Vec2) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(n, &b)| n.dot(&x) - b < -CLIP_EPS)
    }

    /// Radial projection from the center onto the polygon boundary.
    pub fn push_out(&self, x: Vec2) -> Vec2 {
        let u = x - self.center;
        let u = if u.norm() > 0.0 { u.normalize() } else { Vec2::new(1.0, 0.0) };
        let mut t_exit = f64::INFINITY;
        for (n, &b) in self.normals.iter().zip(&self.offsets) {
            let nu = n.dot(&u);
            if nu > 0.0 {
                t_exit = t_exit.min((b - n.dot(&self.center)) / nu);
            }
        }
        self.center + u * t_exit
    }
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, ties broken toward the lower node index
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra; `neighbors` lists `(node, edge length)` pairs.
fn dijkstra(
    n: usize,
    init: &[f64],
    neighbors: impl Fn(usize) -> Vec<(usize, f64)>,
) -> (Vec<f64>, Vec<usize>) {
    let mut dist = init.to_vec();
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<State> = (0..n)
        .filter(|&i| dist[i].is_finite())
        .map(|i| State { dist: dist[i], node: i })
        .collect();
    while let Some(State { dist: d, node }) = heap.pop() {
        if done[node] || d > dist[node] {
            continue;
        }
        done[node] = true;
        for (j, w) in neighbors(node) {
            if done[j] {
                continue;
            }
            let nd = d + w;
            if nd < dist[j] {
                dist[j] = nd;
                prev[j] = node;
                heap.push(State { dist: nd, node: j });
            }
        }
    }
    (dist, prev)
}

/// Visibility graph over the vertices of a set of convex polygons inside an outer curve.
#[derive(Clone, Debug)]
pub struct VisibilityGraph {
    polys: Vec<ConvexPoly>,
    outer: BoundaryCurve,
    nodes: Vec<Vec2>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl VisibilityGraph {
    /// Graph around every obstacle of `domain`, each polygonized with `n` vertices and inflated by `inflate`.
    pub fn new(domain: &Domain, n: usize, inflate: f64) -> Self {
        let polys = domain.obstacles().iter().map(|c| ConvexPoly::around(c, n, inflate)).collect();
        Self::from_polys(polys, domain.outer().clone(), &[])
    }

    pub fn from_polys(polys: Vec<ConvexPoly>, outer: BoundaryCurve, extra_nodes: &[Vec2]) -> Self {
        let mut g = VisibilityGraph { polys, outer, nodes: vec![], adj: vec![] };
        let mut nodes: Vec<Vec2> = g.polys.iter().flat_map(|p| p.vertices.iter().cloned()).collect();
        nodes.extend_from_slice(extra_nodes);
        nodes.retain(|&v| g.in_outer_closure(v) && !g.polys.iter().any(|p| p.contains_strict(v)));
        let n = nodes.len();
        let adj: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && g.segment_clear(nodes[i], nodes[j]))
                    .map(|j| (j, (nodes[i] - nodes[j]).norm()))
                    .collect()
            })
            .collect();
        g.nodes = nodes;
        g.adj = adj;
        g
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn polys(&self) -> &[ConvexPoly] {
        &self.polys
    }

    fn in_outer_closure(&self, x: Vec2) -> bool {
        self.outer.region_contains(x) || self.outer.project(x).1 <= 1e-12
    }

    fn segment_in_outer(&self, p: Vec2, q: Vec2) -> bool {
        match &self.outer.shape {
            Shape::Circle { .. } => self.in_outer_closure(p) && self.in_outer_closure(q),
            Shape::Polygon { vertices, .. } => {
                let n = vertices.len();
                let shrink = |a: Vec2, b: Vec2| {
                    let d = b - a;
                    let l = d.norm();
                    if l < 4e-9 {
                        return (a, a);
                    }
                    (a + d * (1e-9 / l), b - d * (1e-9 / l))
                };
                let (ps, qs) = shrink(p, q);
                if ps == qs {
                    return true;
                }
                for i in 0..n {
                    if segments_intersect(ps, qs, vertices[i], vertices[(i + 1) % n]) {
                        return false;
                    }
                }
                self.in_outer_closure((p + q) * 0.5)
            }
        }
    }

    /// Segment avoids every polygon interior and stays in the outer region.
    pub fn segment_clear(&self, p: Vec2, q: Vec2) -> bool {
        self.segment_in_outer(p, q) && !self.polys.iter().any(|poly| poly.blocks(p, q))
    }

    /// Moves `x` out of any polygon it sits inside (between a curved obstacle and its polygon).
    pub fn lift(&self, x: Vec2) -> Vec2 {
        for p in &self.polys {
            if p.contains_strict(x) {
                return p.push_out(x);
            }
        }
        x
    }

    /// Single-source Dijkstra from `source`: distances to every node.
    pub fn distances_from(&self, source: Vec2) -> (Vec<f64>, Vec<usize>) {
        let n = self.nodes.len();
        // node n is the source
        let mut init = vec![f64::INFINITY; n + 1];
        init[n] = 0.0;
        let src_adj: Vec<(usize, f64)> = (0..n)
            .filter(|&j| self.segment_clear(source, self.nodes[j]))
            .map(|j| (j, (source - self.nodes[j]).norm()))
            .collect();
        dijkstra(n + 1, &init, |a| if a == n { src_adj.clone() } else { self.adj[a].clone() })
    }

    /// Shortest obstacle-avoiding polyline from `p` to `q`.
    pub fn shortest_path(&self, p: Vec2, q: Vec2) -> Result<(f64, Vec<Vec2>), GeometryError> {
        if self.segment_clear(p, q) {
            return Ok(((q - p).norm(), vec![p, q]));
        }
        let n = self.nodes.len();
        let (dist, prev) = self.distances_from(p);
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if dist[j].is_finite() && self.segment_clear(self.nodes[j], q) {
                let total = dist[j] + (self.nodes[j] - q).norm();
                if total < best.0 {
                    best = (total, j);
                }
            }
        }
        if best.1 == usize::MAX {
            return Err(GeometryError::NoPath(p.x, p.y, q.x, q.y));
        }
        let mut chain = vec![q];
        let mut cur = best.1;
        while cur != n {
            chain.push(self.nodes[cur]);
            cur = prev[cur];
        }
        chain.push(p);
        chain.reverse();
        Ok((best.0, chain))
    }

    pub(crate) fn adjacency(&self, i: usize) -> &[(usize, f64)] {
        &self.adj[i]
    }
}

/// Shortest-path distance inside `Ω̄` to the outer boundary.
#[derive(Clone, Debug)]
pub struct InteriorDistance<'a> {
    domain: &'a Domain,
    graph: VisibilityGraph,
    node_cost: Vec<f64>,
}

impl<'a> InteriorDistance<'a> {
    pub fn new(domain: &'a Domain, vertices_per_obstacle: usize) -> Self {
        let polys = domain
            .obstacles()
            .iter()
            .map(|c| ConvexPoly::around(c, vertices_per_obstacle, 0.0))
            .collect();
        let outer_vertices: Vec<Vec2> = match &domain.outer().shape {
            Shape::Polygon { vertices, .. } => vertices.clone(),
            Shape::Circle { .. } => vec![],
        };
        let graph = VisibilityGraph::from_polys(polys, domain.outer().clone(), &outer_vertices);
        let n = graph.nodes.len();
        let init: Vec<f64> = (0..n)
            .map(|i| {
                let v = graph.nodes[i];
                if graph.outer.project(v).1 <= 1e-12 {
                    0.0
                } else {
                    Self::direct(&graph, v).unwrap_or(f64::INFINITY)
                }
            })
            .collect();
        let (node_cost, _) = dijkstra(n, &init, |a| graph.adjacency(a).to_vec());
        InteriorDistance { domain, graph, node_cost }
    }

    fn direct(graph: &VisibilityGraph, x: Vec2) -> Option<f64> {
        let (s, d) = graph.outer.project(x);
        let foot = graph.outer.point(s);
        graph.segment_clear(x, foot).then_some(d)
    }

    pub fn distance(&self, x: Vec2) -> Result<f64, GeometryError> {
        if !self.domain.closure_contains(x, 1e-9) {
            return Err(GeometryError::PointOutsideDomain(x.x, x.y));
        }
        let lifted = self.graph.lift(x);
        let offset = (lifted - x).norm();
        let mut best = Self::direct(&self.graph, lifted).unwrap_or(f64::INFINITY);
        for (i, v) in self.graph.nodes.iter().enumerate() {
            let c = self.node_cost[i];
            if !c.is_finite() {
                continue;
            }
            let cand = (lifted - v).norm() + c;
            if cand < best && self.graph.segment_clear(lifted, *v) {
                best = cand;
            }
        }
        if best.is_finite() {
            Ok(best + offset)
        } else {
            Err(GeometryError::NoPath(x.x, x.y, f64::NAN, f64::NAN))
        }
    }

    /// Maximum over grid nodes in `Ω` plus points sampled along every obstacle curve.
    pub fn max_over_grid(&self, spacing: f64) -> MaxDistance {
        let bb = self.domain.bbox();
        let nx = (bb.width() / spacing).floor() as usize + 1;
        let ny = (bb.height() / spacing).floor() as usize + 1;
        let mut pts: Vec<Vec2> = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| Vec2::new(bb.min.x + i as f64 * spacing, bb.min.y + j as f64 * spacing)))
            .filter(|p| self.domain.contains(*p))
            .collect();
        for ob in self.domain.obstacles() {
            let n = (ob.length() / spacing).ceil().max(8.0) as usize;
            pts.extend((0..n).map(|k| ob.point(ob.length() * k as f64 / n as f64)));
        }
        let vals: Vec<f64> = pts.par_iter().map(|p| self.distance(*p).unwrap_or(0.0)).collect();
        let (k, value) = vals
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        MaxDistance { value, argmax: pts[k], spacing, samples: pts.len() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn radial_distance_without_obstacles() {
        let d = Domain::new(DomainSpec::unit_disk()).unwrap();
        let id = InteriorDistance::new(&d, 64);
        assert!((id.distance(Vec2::new(0.5, 0.0)).unwrap() - 0.5).abs() < 1e-14);
        assert!(id.distance(Vec2::new(1.0, 0.0)).unwrap().abs() < 1e-14);
        assert!(matches!(id.distance(Vec2::new(1.5, 0.0)), Err(GeometryError::PointOutsideDomain(..))));
    }

    #[test]
    fn max_distance_disk_and_annulus() {
        let d = Domain::new(DomainSpec::unit_disk()).unwrap();
        let m = d.max_interior_distance(0.05);
        assert!((m.value - 1.0).abs() < 1e-12);
        let ann = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.0, 0.0], 0.5)).unwrap();
        let m = ann.max_interior_distance(0.05);
        assert!((m.value - 0.5).abs() < 1e-9, "{}", m.value);
        assert!(((m.argmax.norm()) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn blocked_path_bends() {
        let d = Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.6, 0.0], 0.3)).unwrap();
        let g = VisibilityGraph::new(&d, 64, 0.0);
        let (len, path) = g.shortest_path(Vec2::new(0.2, 0.0), Vec2::new(0.95, 0.0)).unwrap();
        assert!(path.len() > 2);
        assert!(len > 0.75);
        for w in path.windows(2) {
            for k in 0..=50 {
                let p = w[0] + (w[1] - w[0]) * (k as f64 / 50.0);
                assert!((p - Vec2::new(0.6, 0.0)).norm() >= 0.3 - 1e-9);
            }
        }
    }

    #[test]
    fn convex_poly_blocking() {
        let sq = ConvexPoly::new(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)],
            Vec2::new(0.5, 0.5),
        );
        assert!(sq.blocks(Vec2::new(-1.0, 0.5), Vec2::new(2.0, 0.5)));
        // along an edge is allowed
        assert!(!sq.blocks(Vec2::new(-1.0, 0.0), Vec2::new(2.0, 0.0)));
        // vertex to vertex along a diagonal passes through the interior
        assert!(sq.blocks(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)));
        assert!(!sq.blocks(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)));
        assert!(!sq.blocks(Vec2::new(-1.0, 2.0), Vec2::new(2.0, 2.0)));
        let out = sq.push_out(Vec2::new(0.6, 0.5));
        assert!((out - Vec2::new(1.0, 0.5)).norm() < 1e-14);
    }
}

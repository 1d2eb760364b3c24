mod common;

use common::*;
use gaugelab::billiards::{extend, trace, trace_reversed, TraceOptions};
use gaugelab::fields::{gauge_transform, GaugeElement, MatrixPotential};
use gaugelab::geometry::{reflect, Domain, DomainSpec};
use gaugelab::linalg::inverse;
use gaugelab::reconstruct::{generator_fingerprint, homotopy_residual};
use gaugelab::transport::{telescoping_check, transport, Path, TransportOptions};
use gaugelab::{CMat, Vec2};
use proptest::prelude::*;

fn domain() -> Domain {
    Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.3, 0.1], 0.25)).unwrap()
}

fn shadowed() -> Domain {
    Domain::new(DomainSpec::unit_disk().with_disk_obstacle([0.6, 0.0], 0.3)).unwrap()
}

fn unit(theta: f64) -> Vec2 {
    Vec2::new(theta.cos(), theta.sin())
}

fn inside(d: &Domain, x: f64, y: f64) -> Option<Vec2> {
    let p = Vec2::new(x, y);
    d.contains(p).then_some(p)
}

fn m2(v: [f64; 8]) -> CMat {
    CMat::from_row_slice(2, 2, &[c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_is_an_involution(a in 0.0f64..6.28, b in 0.0f64..6.28) {
        let (d, nu) = (unit(a), unit(b));
        prop_assume!(d.dot(&nu).abs() > 0.05);
        let r = reflect(d, nu, 1e-2).unwrap();
        prop_assert!((reflect(r, nu, 1e-2).unwrap() - d).norm() < 1e-14);
        prop_assert!((r.dot(&nu) + d.dot(&nu)).abs() < 1e-14);
        let t = Vec2::new(-nu.y, nu.x);
        prop_assert!((r.dot(&t) - d.dot(&t)).abs() < 1e-14);
    }

    #[test]
    fn first_hit_stays_inside_until_the_hit(x in -0.95f64..0.95, y in -0.95f64..0.95, a in 0.0f64..6.28) {
        let d = domain();
        let Some(p) = inside(&d, x, y) else { return Ok(()) };
        let u = unit(a);
        let hit = d.first_hit(p, u).unwrap();
        prop_assert!(d.contains(p + u * (hit.tau - 1e-9)));
        prop_assert!(d.boundary_distance(hit.point.position).1 < 1e-12);
    }

    #[test]
    fn interior_distance_is_lipschitz(x in -0.95f64..0.95, y in -0.95f64..0.95, dx in -0.2f64..0.2, dy in -0.2f64..0.2) {
        let d = shadowed();
        let (Some(p), Some(q)) = (inside(&d, x, y), inside(&d, x + dx, y + dy)) else { return Ok(()) };
        let (dp, dq) = (d.interior_distance(p).unwrap(), d.interior_distance(q).unwrap());
        prop_assert!((dp - dq).abs() <= (p - q).norm() + 1e-3, "{dp} {dq}");
        // never shorter than the Euclidean distance to the outer circle
        prop_assert!(dp >= 1.0 - p.norm() - 1e-3);
        let exit = p / p.norm();
        let clear = (1..200).all(|k| d.contains(p + (exit - p) * (k as f64 / 200.0)));
        if clear {
            prop_assert!((dp - (1.0 - p.norm())).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_then_inverse_is_identity(seed in 0u64..500, x in -0.8f64..0.8, y in -0.8f64..0.8) {
        let pot = MatrixPotential::random_smooth(2, seed, 2, 1.0, false, false);
        let g = GaugeElement::random_smooth(2, seed + 1, 2, 0.5, false, None);
        let back = gauge_transform(&gauge_transform(&pot, &g).unwrap(), &g.inverse()).unwrap();
        let p = Vec2::new(x, y);
        let (u, v) = (pot.eval(p).unwrap(), back.eval(p).unwrap());
        for k in 0..2 {
            prop_assert!(dist(&u.a[k], &v.a[k]) < 1e-8);
        }
        prop_assert!(dist(&u.v, &v.v) < 1e-8);
    }

    #[test]
    fn transport_is_gauge_equivariant(seed in 0u64..500) {
        let pot = MatrixPotential::random_smooth(2, seed, 2, 1.0, false, false);
        let g = GaugeElement::random_smooth(2, seed + 1, 2, 0.5, seed % 2 == 0, None);
        let pg = gauge_transform(&pot, &g).unwrap();
        let opts = TransportOptions::fast(2e-3);
        for p in random_polylines(seed + 2, 2, 0.9) {
            let c0 = transport(&pot, &p, &opts).unwrap().c;
            let c1 = transport(&pg, &p, &opts).unwrap().c;
            let want = inverse(&g.eval(p.end()).unwrap()).unwrap() * c0 * g.eval(p.start()).unwrap();
            prop_assert!(dist(&c1, &want) < 1e-8);
        }
    }

    #[test]
    fn reversed_path_inverts_the_transport(seed in 0u64..500) {
        let pot = MatrixPotential::random_smooth(3, seed, 2, 1.0, false, false);
        let opts = TransportOptions::fast(1e-3);
        for p in random_polylines(seed + 5, 2, 0.9) {
            let f = transport(&pot, &p, &opts).unwrap().c;
            let b = transport(&pot, &p.reversed(), &opts).unwrap().c;
            prop_assert!(dist(&(b * f), &CMat::identity(3, 3)) < 1e-9);
        }
    }

    #[test]
    fn telescoping_sum_closes(seed in 0u64..500) {
        let p1 = MatrixPotential::random_smooth(2, seed, 2, 0.8, false, false);
        let p2 = MatrixPotential::random_smooth(2, seed + 1, 2, 0.8, false, false);
        let path = random_polylines(seed + 2, 1, 0.9).remove(0);
        let r = telescoping_check(&p1, &p2, &path, &TransportOptions::fast(1e-3)).unwrap();
        prop_assert!(r.residual < 1e-8, "{}", r.residual);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traced_rays_are_reversible(s in 0.0f64..6.28, a in -1.2f64..1.2) {
        let d = domain();
        let bp = d.boundary_point(0, s);
        let inward = -bp.normal;
        let dir = Vec2::new(a.cos() * inward.x - a.sin() * inward.y, a.sin() * inward.x + a.cos() * inward.y);
        let opts = TraceOptions::default();
        let Ok(ray) = trace(&d, &bp, dir, &opts) else { return Ok(()) };
        let legs: f64 = ray.legs.iter().map(|l| l.length).sum();
        prop_assert!((legs - ray.total_length).abs() < 1e-12);
        for l in &ray.legs {
            prop_assert!((l.direction.norm() - 1.0).abs() < 1e-14);
        }
        let back = trace_reversed(&d, &ray, &opts).unwrap().vertices();
        let fwd = ray.vertices();
        prop_assert_eq!(back.len(), fwd.len());
        for (p, q) in fwd.iter().rev().zip(&back) {
            prop_assert!((p - q).norm() < 1e-9);
        }
        // the closed loop's winding is what its pieces add up to
        let base = d.boundary_point(0, 0.5);
        let ext = extend(&d, &ray, &base).unwrap();
        let mut want = ray.winding.clone();
        for arc in [&ext.alpha1, &ext.alpha2].into_iter().flatten() {
            for (w, k) in want.iter_mut().zip(arc.crossings(&d.obstacle_centers())) {
                *w += k;
            }
        }
        prop_assert_eq!(ext.record().winding, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fingerprints_conjugate_under_gauge(seed in 0u64..500) {
        let d = domain();
        let base = d.boundary_point(0, 2.0);
        let pot = MatrixPotential::random_smooth(2, seed, 2, 0.8, false, false);
        let g = GaugeElement::random_smooth(2, seed + 3, 2, 0.5, false, None);
        let f = generator_fingerprint(&pot, &d, &base, 1e-3).unwrap();
        let fg = generator_fingerprint(&gauge_transform(&pot, &g).unwrap(), &d, &base, 1e-3).unwrap();
        let gx = g.eval(base.position).unwrap();
        let gi = inverse(&gx).unwrap();
        for (a, b) in f.iter().zip(&fg) {
            prop_assert!(dist(b, &(&gi * a * &gx)) < 1e-8);
        }
    }

    #[test]
    fn g0_pairs_are_path_independent_around_the_obstacle(seed in 0u64..500, y in -0.6f64..0.6) {
        let d = domain();
        let pot = MatrixPotential::random_smooth(2, seed, 2, 0.8, false, false);
        let g0 = GaugeElement::exp_bump(Vec2::new(-0.1, -0.15), 0.8, 1.0, m2([0.4, 0.0, 1.0, 0.2, -0.6, 0.1, -0.3, 0.0])).unwrap();
        let pb = gauge_transform(&pot, &g0).unwrap();
        let b = d.boundary_point(0, 0.0).position;
        let x = Vec2::new(-0.3, y);
        let above = Path::polyline(&[b, Vec2::new(0.3, 0.55), x]).unwrap();
        let below = Path::polyline(&[b, Vec2::new(0.3, -0.35), x]).unwrap();
        let r = homotopy_residual(&pot, &pb, &d, x, &above, &below, 1e-3).unwrap();
        prop_assert!(!r.winding_match);
        prop_assert!(r.residual < 1e-7, "{}", r.residual);
    }
}

#[test]
fn vortex_line_integrals() {
    let d = domain();
    let alpha = 0.37;
    let pot = MatrixPotential::ab_vortex(alpha, Vec2::new(0.3, 0.1), &d).unwrap();
    let around = Path::circle(Vec2::new(0.3, 0.1), 0.5, 0.3, true).unwrap();
    let flux = line_integral(&pot, &around);
    assert!((flux.re - 2.0 * std::f64::consts::PI * alpha).abs() < 1e-12 && flux.im.abs() < 1e-14);
    let contractible = Path::circle(Vec2::new(-0.45, -0.2), 0.3, 1.0, false).unwrap();
    assert!(line_integral(&pot, &contractible).norm() < 1e-12);
}

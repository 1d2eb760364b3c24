use std::path::Path as FsPath;

use serde_json::{json, Value};

use super::{plot, suite, Artifact, CliError, Context, LoadedScenario, PathSpec, Task};
use crate::billiards::{extend, generator_loops, trace, trace_reversed, BrokenRay, RayFan, TraceOptions};
use crate::dtn::{boundary_trace, compare_dtn, conjugate_dtn, dtn_matrix, DtnComparison, DtnMatrix};
use crate::geometry::{CurveSpec, Domain};
use crate::linalg::{self, identity, Vec2};
use crate::reconstruct::{
    broken_ray_endpoint_check, fingerprint_distance, gauge_residual, generator_fingerprint, lattice_samples,
    reconstruct_gauge, stencil_samples, Lattice,
};
use crate::transport::{relative_transport, transport_in, Path};

type TaskOutput = (Vec<Artifact>, String, usize);

pub(crate) fn execute(ls: &LoadedScenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let s = &ls.scenario;
    let (mut artifacts, summary, failed) = match s.task {
        Task::Trace => run_trace(ls, ctx)?,
        Task::Transport => run_transport(ls, ctx)?,
        Task::Holonomy => run_holonomy(ls, ctx)?,
        Task::Dtn => run_dtn(ctx)?,
        Task::CompareDtn => run_compare(ls, ctx)?,
        Task::Reconstruct => run_reconstruct(ls, ctx)?,
        Task::VerifySuite => {
            let spec = s.suite.clone().unwrap_or_default();
            let report = suite::run_suite(&spec, s.seed);
            let table = report.table();
            let failed = report.failed();
            let v = json!({ "kind": "suite", "seed": s.seed, "checks": report.checks });
            (vec![Artifact::json("suite.json", &v), Artifact::text("suite.txt", table.clone())], table, failed)
        }
    };
    if s.output.plotdata {
        let mut csv = Vec::new();
        for a in &artifacts {
            if !a.name.ends_with(".json") {
                continue;
            }
            let v: Value = serde_json::from_slice(&a.bytes).expect("own json");
            if let Some(kind) = plot::detect(&v) {
                let text = plot::emit_plotdata(&v, Some(kind))?;
                csv.push(Artifact::text(&a.name.replace(".json", ".csv"), text));
            }
        }
        artifacts.extend(csv);
    }
    Ok((artifacts, summary, failed))
}

fn launch_direction(domain: &Domain, start_s: f64, angle: Option<f64>, direction: Option<[f64; 2]>) -> (crate::geometry::BoundaryPoint, Vec2) {
    let bp = domain.boundary_point(0, start_s);
    let dir = match direction {
        Some(d) => Vec2::new(d[0], d[1]),
        None => {
            let a = angle.unwrap_or(0.0);
            let n = -bp.normal;
            let (sn, cs) = a.sin_cos();
            Vec2::new(cs * n.x - sn * n.y, sn * n.x + cs * n.y)
        }
    };
    (bp, dir)
}

fn trace_opts(ctx: &Context) -> TraceOptions {
    TraceOptions { max_legs: ctx.numerics.max_legs, max_length: None }
}

/// Largest distance between the vertices of `ray` and those of its reversal, read backwards.
pub(crate) fn reversal_deviation(ray: &BrokenRay, back: &BrokenRay) -> f64 {
    let a = ray.vertices();
    let mut b = back.vertices();
    b.reverse();
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

fn run_trace(ls: &LoadedScenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let t = ls.scenario.trace.as_ref().expect("validated");
    let (bp, dir) = launch_direction(&ctx.domain, t.start_s, t.angle, t.direction);
    let opts = trace_opts(ctx);
    let ray = trace(&ctx.domain, &bp, dir, &opts)?;
    let back = trace_reversed(&ctx.domain, &ray, &opts)?;
    let dev = reversal_deviation(&ray, &back);
    let extended = match t.base_s {
        Some(b) => {
            let base = ctx.domain.boundary_point(0, b);
            Some(serde_json::to_value(extend(&ctx.domain, &ray, &base)?.record()).expect("record"))
        }
        None => None,
    };
    let summary = format!(
        "broken ray: {} reflections, length {:.6}, winding {:?}, reversal deviation {:.2e}\n",
        ray.n_reflections(),
        ray.total_length,
        ray.winding,
        dev
    );
    let v = json!({
        "kind": "broken_ray",
        "ray": ray,
        "vertices": ray.vertices().iter().map(|p| [p.x, p.y]).collect::<Vec<_>>(),
        "reversal_deviation": dev,
        "extended": extended,
    });
    Ok((vec![Artifact::json("ray.json", &v)], summary, 0))
}

fn build_paths(spec: &PathSpec, ctx: &Context) -> Result<Vec<(String, Path)>, CliError> {
    let d = &ctx.domain;
    Ok(match spec {
        PathSpec::Polyline { vertices } => {
            let pts: Vec<Vec2> = vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
            vec![("polyline".into(), Path::polyline(&pts)?.with_winding(d))]
        }
        PathSpec::Circle { center, radius, theta0, ccw } => {
            let p = Path::circle(Vec2::new(center[0], center[1]), *radius, *theta0, *ccw)?;
            vec![("circle".into(), p.with_winding(d))]
        }
        PathSpec::BrokenRay { start_s, angle } => {
            let (bp, dir) = launch_direction(d, *start_s, Some(*angle), None);
            let ray = trace(d, &bp, dir, &trace_opts(ctx))?;
            vec![("broken_ray".into(), ray.to_path()?.with_winding(d))]
        }
        PathSpec::GeneratorLoops { base_s } => {
            let base = d.boundary_point(0, *base_s);
            generator_loops(d, &base)?
                .into_iter()
                .enumerate()
                .map(|(j, p)| (format!("generator_{}", j + 1), p))
                .collect()
        }
    })
}

fn path_json(label: &str, p: &Path) -> Value {
    json!({
        "label": label,
        "hash": p.hash(),
        "length": p.length(),
        "start": [p.start().x, p.start().y],
        "end": [p.end().x, p.end().y],
        "winding": p.winding(),
    })
}

fn run_transport(ls: &LoadedScenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let pot = ctx.pot_a()?;
    let opts = ctx.numerics.transport_options();
    let paths = build_paths(ls.scenario.path.as_ref().expect("validated"), ctx)?;
    let mut items = Vec::new();
    let mut summary = String::new();
    for (label, p) in &paths {
        let r = transport_in(&ctx.domain, pot, p, &opts)?;
        let mut item = path_json(label, p);
        item["transport"] = serde_json::to_value(r.record(p)).expect("record");
        item["unitarity_defect"] = json!(linalg::unitarity_defect(&r.c));
        let det = linalg::det(&r.c);
        item["det"] = json!([det.re, det.im]);
        if let Some(pb) = &ctx.pot_b {
            let b = relative_transport(pot, pb, p, &opts)?;
            item["relative"] = json!(linalg::to_pairs(&b.c));
        }
        summary.push_str(&format!("{label}: {} steps, error estimate {:.2e}\n", r.steps, r.error_estimate));
        items.push(item);
    }
    Ok((vec![Artifact::json("transport.json", &json!({ "kind": "transport", "paths": items }))], summary, 0))
}

fn run_holonomy(ls: &LoadedScenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let pot = ctx.pot_a()?;
    let spec = ls.scenario.path.clone().unwrap_or(PathSpec::GeneratorLoops { base_s: 0.0 });
    let paths = build_paths(&spec, ctx)?;
    let loops: Vec<Path> = paths.iter().map(|(_, p)| p.clone()).collect();
    let h = ctx.numerics.h;
    let fp = crate::reconstruct::holonomy_fingerprint(pot, &loops, h)?;
    let mut v = json!({
        "kind": "holonomy",
        "loops": paths.iter().map(|(l, p)| path_json(l, p)).collect::<Vec<_>>(),
        "holonomies": fp.iter().map(linalg::to_pairs).collect::<Vec<_>>(),
    });
    let mut summary: String = fp
        .iter()
        .zip(&paths)
        .map(|(c, (l, _))| format!("{l}: trace {:.10}\n", c.trace()))
        .collect();
    if let Some(pb) = &ctx.pot_b {
        let fb = crate::reconstruct::holonomy_fingerprint(pb, &loops, h)?;
        let dist = fingerprint_distance(&fp, &fb)?;
        v["holonomies_b"] = json!(fb.iter().map(linalg::to_pairs).collect::<Vec<_>>());
        v["fingerprint_distance"] = json!(dist);
        summary.push_str(&format!("fingerprint distance {dist:.3e}\n"));
    }
    Ok((vec![Artifact::json("holonomy.json", &v)], summary, 0))
}

fn dtn_json(l: &DtnMatrix) -> Value {
    let mut v = l.to_json();
    v["kind"] = json!("dtn");
    v
}

fn dtn_bin(l: &DtnMatrix, name: &str) -> Artifact {
    let mut bytes = Vec::new();
    l.write_binary(&mut bytes).expect("in-memory write");
    Artifact { name: name.into(), bytes }
}

/// Bessel comparison when the run is the scalar free problem on a disk.
fn bessel_check(ctx: &Context, l: &DtnMatrix) -> Option<Value> {
    let pot = ctx.pot_a.as_ref()?;
    if !ctx.domain.obstacles().is_empty() || pot.m() != 1 || !pot.is_zero() {
        return None;
    }
    let CurveSpec::Circle { radius, .. } = &ctx.domain.spec().outer else { return None };
    let (diag, leak) = suite::bessel_disk_errors(l, *radius);
    Some(json!({ "max_relative_diagonal_error": diag, "off_diagonal_leakage": leak }))
}

fn run_dtn(ctx: &Context) -> Result<TaskOutput, CliError> {
    let pot = ctx.pot_a()?;
    let n = &ctx.numerics;
    let l = dtn_matrix(&ctx.domain, pot, n.k(), n.n_b, &n.dtn_options())?;
    let mut v = dtn_json(&l);
    let mut summary = format!("DtN {}x{}, condition estimate {:.3e}\n", l.dim(), l.dim(), l.condition_estimate);
    if let Some(b) = bessel_check(ctx, &l) {
        summary.push_str(&format!("Bessel oracle: {b}\n"));
        v["bessel_check"] = b;
    }
    Ok((vec![Artifact::json("dtn.json", &v), dtn_bin(&l, "dtn.bin")], summary, 0))
}

fn load_dtn(base: &FsPath, file: &str) -> Result<DtnMatrix, CliError> {
    let p = base.join(file);
    let bytes = std::fs::read(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    if file.ends_with(".json") {
        let v: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        Ok(DtnMatrix::from_json(&v)?)
    } else {
        Ok(DtnMatrix::read_binary(&bytes[..])?)
    }
}

fn comparison_json(c: &DtnComparison, norm: crate::dtn::NormKind) -> Value {
    let mut v = serde_json::to_value(c).expect("comparison");
    v["relative"] = json!(c.relative(norm));
    v
}

fn run_compare(ls: &LoadedScenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let n = &ctx.numerics;
    let spec = ls.scenario.compare.clone().unwrap_or_default();
    let mut artifacts = Vec::new();
    let la = match &spec.a {
        Some(f) => load_dtn(&ls.base_dir, f)?,
        None => {
            let l = dtn_matrix(&ctx.domain, ctx.pot_a()?, n.k(), n.n_b, &n.dtn_options())?;
            artifacts.push(Artifact::json("dtn_a.json", &dtn_json(&l)));
            l
        }
    };
    let lb = match &spec.b {
        Some(f) => load_dtn(&ls.base_dir, f)?,
        None => {
            let l = dtn_matrix(&ctx.domain, ctx.pot_b()?, n.k(), n.n_b, &n.dtn_options())?;
            artifacts.push(Artifact::json("dtn_b.json", &dtn_json(&l)));
            l
        }
    };
    let cmp = compare_dtn(&la, &lb)?;
    let mut v = json!({ "kind": "dtn_comparison", "norm": n.norm, "full": comparison_json(&cmp, n.norm) });
    let mut summary = format!("relative {:?} difference {:.3e}\n", n.norm, cmp.relative(n.norm));
    if let Some(cm) = spec.central_modes {
        let c = compare_dtn(&la.central(cm), &lb.central(cm))?;
        summary.push_str(&format!("central |n|<={cm}: {:.3e}\n", c.relative(n.norm)));
        v["central"] = comparison_json(&c, n.norm);
    }
    if let Some(g) = &ctx.gauge {
        // Λ(pot^g) against the conjugation of Λ(pot) by the boundary trace of g
        let tr = boundary_trace(&g.inverse(), &ctx.domain, la.n_b)?;
        let conj = conjugate_dtn(&la, &tr)?;
        let c = compare_dtn(&conj, &lb)?;
        summary.push_str(&format!("conjugation identity: {:.3e}\n", c.relative(n.norm)));
        v["conjugation"] = comparison_json(&c, n.norm);
        if let Some(cm) = spec.central_modes {
            let cc = compare_dtn(&conj.central(cm), &lb.central(cm))?;
            v["conjugation_central"] = comparison_json(&cc, n.norm);
        }
        v["gauge_is_g0"] = json!(g.is_g0());
    }
    artifacts.push(Artifact::json("compare.json", &v));
    Ok((artifacts, summary, 0))
}

fn run_reconstruct(ls: &LoadedScenario, ctx: &Context) -> Result<TaskOutput, CliError> {
    let (pa, pb) = (ctx.pot_a()?, ctx.pot_b()?);
    let n = &ctx.numerics;
    let spec = ls.scenario.reconstruct.clone().unwrap_or_default();
    let d = &ctx.domain;
    let base = d.boundary_point(0, spec.base_s);
    let lattice = spec.lattice.map(|l| Lattice { bbox: d.bbox(), nx: l.nx, ny: l.ny });
    let (mut samples, idx) = match &lattice {
        Some(l) => lattice_samples(d, l),
        None => (vec![], vec![]),
    };
    samples.extend(spec.points.iter().map(|p| Vec2::new(p[0], p[1])));
    let centres: Vec<Vec2> = spec.stencil_centers.iter().map(|p| Vec2::new(p[0], p[1])).collect();
    samples.extend(stencil_samples(&centres, n.fd_spacing));
    let mut gf = reconstruct_gauge(pa, pb, d, &base, &samples, n.h)?;
    if let Some(l) = lattice {
        gf.lattice = Some((l, idx));
    }
    let mut report = json!({ "kind": "reconstruct_report", "samples": gf.len(), "base": [base.position.x, base.position.y] });
    let mut summary = format!("reconstructed {} samples\n", gf.len());
    let on_outer: Vec<usize> = (0..gf.len()).filter(|&k| d.outer().project(gf.samples[k]).1 < 1e-12).collect();
    let boundary_dev = on_outer
        .iter()
        .map(|&k| linalg::dist(&gf.matrices[k], &identity(gf.m())))
        .fold(0.0, f64::max);
    report["boundary_samples"] = json!(on_outer.len());
    report["boundary_identity_deviation"] = json!(boundary_dev);
    if let Some(g) = &ctx.gauge {
        let mut worst = 0.0f64;
        for (x, m) in gf.samples.iter().zip(&gf.matrices) {
            let want = g.eval(*x)?;
            let inv = linalg::inverse(&want).ok_or(crate::error::FieldError::SingularGauge(x.x, x.y, 0.0))?;
            worst = worst.max(linalg::dist(m, &inv));
        }
        report["known_gauge_error"] = json!(worst);
        summary.push_str(&format!("max |g - g0^-1| = {worst:.3e}\n"));
    }
    if !centres.is_empty() {
        let r = gauge_residual(pa, pb, &gf, n.fd_spacing)?;
        summary.push_str(&format!("gauge residual: A {:.3e}, V {:.3e}\n", r.a_residual, r.v_residual));
        report["gauge_residual"] = serde_json::to_value(&r).expect("residual");
    }
    if spec.endpoint_check {
        let fan = ls.scenario.fan.unwrap_or_else(RayFan::default);
        let r = broken_ray_endpoint_check(pa, pb, d, &fan, n.h)?;
        summary.push_str(&format!(
            "broken-ray endpoints: max mismatch {:.3e} over {} rays, {} rejected\n",
            r.max_mismatch,
            r.accepted.len(),
            r.rejected.len()
        ));
        report["endpoint_check"] = serde_json::to_value(&r).expect("endpoint");
    }
    if spec.fingerprints && d.n_obstacles() > 0 {
        let fa = generator_fingerprint(pa, d, &base, n.h)?;
        let fb = generator_fingerprint(pb, d, &base, n.h)?;
        let dist = fingerprint_distance(&fa, &fb)?;
        summary.push_str(&format!("fingerprint distance {dist:.3e}\n"));
        report["fingerprint_distance"] = json!(dist);
    }
    let mut field = gf.to_json();
    field["kind"] = json!("gauge_field");
    Ok((vec![Artifact::json("gauge_field.json", &field), Artifact::json("reconstruct_report.json", &report)], summary, 0))
}

use std::fmt::Write;

use serde_json::Value;

use super::CliError;
use crate::dtn::DtnMatrix;
use crate::reconstruct::GaugeField;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    BrokenRay,
    GaugeField,
    Dtn,
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.replace('-', "_").as_str() {
            "broken_ray" | "ray" => Ok(PlotKind::BrokenRay),
            "gauge_field" => Ok(PlotKind::GaugeField),
            "dtn" => Ok(PlotKind::Dtn),
            _ => Err(CliError::Validation(format!("unknown plot kind {s:?} (broken_ray, gauge_field, dtn)"))),
        }
    }
}

pub(crate) fn detect(v: &Value) -> Option<PlotKind> {
    match v.get("kind")?.as_str()? {
        "broken_ray" => Some(PlotKind::BrokenRay),
        "gauge_field" => Some(PlotKind::GaugeField),
        "dtn" => Some(PlotKind::Dtn),
        _ => None,
    }
}

/// Flattens a result payload into CSV. The kind is read from the payload unless given.
pub fn emit_plotdata(v: &Value, kind: Option<PlotKind>) -> Result<String, CliError> {
    let kind = match kind.or_else(|| detect(v)) {
        Some(k) => k,
        None => {
            let found = v.get("kind").and_then(Value::as_str).unwrap_or("<missing>");
            return Err(CliError::Validation(format!("unknown result kind {found:?}")));
        }
    };
    let bad = |what: &str| CliError::Validation(format!("payload is not a {what} result"));
    let mut out = String::new();
    match kind {
        PlotKind::BrokenRay => {
            let verts = v.get("vertices").and_then(Value::as_array).ok_or_else(|| bad("broken ray"))?;
            out.push_str("index,x,y\n");
            for (i, p) in verts.iter().enumerate() {
                let x = p.get(0).and_then(Value::as_f64).ok_or_else(|| bad("broken ray"))?;
                let y = p.get(1).and_then(Value::as_f64).ok_or_else(|| bad("broken ray"))?;
                writeln!(out, "{i},{x:.17e},{y:.17e}").unwrap();
            }
        }
        PlotKind::Dtn => {
            let l = DtnMatrix::from_json(v).map_err(|_| bad("DtN"))?;
            out.push_str("mode,abs_diagonal,re_diagonal,im_diagonal\n");
            for (i, n) in l.modes().iter().enumerate() {
                // scalar channel 0 of each mode block
                let z = l.entries[(i * l.m, i * l.m)];
                writeln!(out, "{n},{:.17e},{:.17e},{:.17e}", z.norm(), z.re, z.im).unwrap();
            }
        }
        PlotKind::GaugeField => {
            let gf = GaugeField::from_json(v).map_err(|_| bad("gauge field"))?;
            let m = gf.m();
            if m == 1 {
                out.push_str("x,y,arg,abs\n");
                for (x, g) in gf.samples.iter().zip(&gf.matrices) {
                    let z = g[(0, 0)];
                    writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e}", x.x, x.y, z.arg(), z.norm()).unwrap();
                }
            } else {
                out.push_str("x,y");
                for r in 0..m {
                    for c in 0..m {
                        write!(out, ",re_{r}{c},im_{r}{c}").unwrap();
                    }
                }
                out.push('\n');
                for (x, g) in gf.samples.iter().zip(&gf.matrices) {
                    write!(out, "{:.17e},{:.17e}", x.x, x.y).unwrap();
                    for r in 0..m {
                        for c in 0..m {
                            write!(out, ",{:.17e},{:.17e}", g[(r, c)].re, g[(r, c)].im).unwrap();
                        }
                    }
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

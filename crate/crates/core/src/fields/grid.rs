//! Matrix fields sampled on a uniform node grid with cubic-convolution interpolation.
//!
//! Binary layout (all integers u64, all floats f64, little-endian):
//!
//! ```text
//! magic   b"GLGRID01"
//! m, nx, ny
//! xmin, ymin, xmax, ymax
//! nfields
//! entries: for iy in 0..ny, ix in 0..nx, field f, row r, column c: re, im
//! ```

use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::FieldError;
use crate::geometry::BBox;
use crate::linalg::{c, CMat, Vec2, C64};

const MAGIC: &[u8; 8] = b"GLGRID01";

#[derive(Debug)]
pub struct GridField {
    pub m: usize,
    pub nx: usize,
    pub ny: usize,
    pub bbox: BBox,
    pub nfields: usize,
    data: Vec<C64>,
    extrapolations: AtomicUsize,
}

impl Clone for GridField {
    fn clone(&self) -> Self {
        GridField {
            m: self.m,
            nx: self.nx,
            ny: self.ny,
            bbox: self.bbox,
            nfields: self.nfields,
            data: self.data.clone(),
            extrapolations: AtomicUsize::new(self.extrapolations.load(Ordering::Relaxed)),
        }
    }
}

/// Keys cubic convolution kernel (a = −1/2) and its derivative.
fn keys(t: f64) -> (f64, f64) {
    let a = -0.5;
    let s = t.abs();
    let sg = t.signum();
    if s < 1.0 {
        ((a + 2.0) * s.powi(3) - (a + 3.0) * s * s + 1.0, sg * (3.0 * (a + 2.0) * s * s - 2.0 * (a + 3.0) * s))
    } else if s < 2.0 {
        (
            a * s.powi(3) - 5.0 * a * s * s + 8.0 * a * s - 4.0 * a,
            sg * (3.0 * a * s * s - 10.0 * a * s + 8.0 * a),
        )
    } else {
        (0.0, 0.0)
    }
}

impl GridField {
    pub fn from_fn(
        m: usize,
        nx: usize,
        ny: usize,
        bbox: BBox,
        nfields: usize,
        mut f: impl FnMut(Vec2) -> Vec<CMat>,
    ) -> Result<Self, FieldError> {
        if nx < 4 || ny < 4 {
            return Err(FieldError::InvalidParameters("grid needs at least 4x4 nodes".into()));
        }
        let mut data = Vec::with_capacity(nx * ny * nfields * m * m);
        let hx = bbox.width() / (nx - 1) as f64;
        let hy = bbox.height() / (ny - 1) as f64;
        for iy in 0..ny {
            for ix in 0..nx {
                let x = Vec2::new(bbox.min.x + ix as f64 * hx, bbox.min.y + iy as f64 * hy);
                let mats = f(x);
                if mats.len() != nfields {
                    return Err(FieldError::InvalidParameters("wrong number of fields".into()));
                }
                for mat in mats {
                    for r in 0..m {
                        for col in 0..m {
                            data.push(mat[(r, col)]);
                        }
                    }
                }
            }
        }
        Ok(GridField { m, nx, ny, bbox, nfields, data, extrapolations: AtomicUsize::new(0) })
    }

    pub fn spacing(&self) -> Vec2 {
        Vec2::new(
            self.bbox.width() / (self.nx - 1) as f64,
            self.bbox.height() / (self.ny - 1) as f64,
        )
    }

    /// Evaluations that fell outside the node grid (within one cell).
    pub fn extrapolation_count(&self) -> usize {
        self.extrapolations.load(Ordering::Relaxed)
    }

    fn node(&self, ix: usize, iy: usize, f: usize) -> &[C64] {
        let mm = self.m * self.m;
        let base = ((iy * self.nx + ix) * self.nfields + f) * mm;
        &self.data[base..base + mm]
    }

    pub fn node_value(&self, ix: usize, iy: usize, f: usize) -> CMat {
        CMat::from_row_slice(self.m, self.m, self.node(ix, iy, f))
    }

    /// Value and gradient of field `f` at `x`.
    pub fn eval(&self, f: usize, x: Vec2) -> Result<(CMat, [CMat; 2]), FieldError> {
        let h = self.spacing();
        let gx = (x.x - self.bbox.min.x) / h.x;
        let gy = (x.y - self.bbox.min.y) / h.y;
        let (fx, fy) = (self.nx as f64 - 1.0, self.ny as f64 - 1.0);
        if gx < -1.0 || gy < -1.0 || gx > fx + 1.0 || gy > fy + 1.0 {
            return Err(FieldError::OutOfGrid(x.x, x.y));
        }
        if gx < 0.0 || gy < 0.0 || gx > fx || gy > fy {
            self.extrapolations.fetch_add(1, Ordering::Relaxed);
        }
        let ix0 = gx.floor() as i64;
        let iy0 = gy.floor() as i64;
        let m = self.m;
        let mut val = CMat::zeros(m, m);
        let mut dx = CMat::zeros(m, m);
        let mut dy = CMat::zeros(m, m);
        for jy in (iy0 - 1)..=(iy0 + 2) {
            let (wy, dwy) = keys(gy - jy as f64);
            if wy == 0.0 && dwy == 0.0 {
                continue;
            }
            let cy = jy.clamp(0, self.ny as i64 - 1) as usize;
            for jx in (ix0 - 1)..=(ix0 + 2) {
                let (wx, dwx) = keys(gx - jx as f64);
                if wx == 0.0 && dwx == 0.0 {
                    continue;
                }
                let cx = jx.clamp(0, self.nx as i64 - 1) as usize;
                let vals = self.node(cx, cy, f);
                for (k, v) in vals.iter().enumerate() {
                    let (r, col) = (k / m, k % m);
                    val[(r, col)] += v * (wx * wy);
                    dx[(r, col)] += v * (dwx * wy / h.x);
                    dy[(r, col)] += v * (wx * dwy / h.y);
                }
            }
        }
        Ok((val, [dx, dy]))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [self.m, self.nx, self.ny] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in [self.bbox.min.x, self.bbox.min.y, self.bbox.max.x, self.bbox.max.y] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.nfields as u64).to_le_bytes())?;
        for z in &self.data {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, FieldError> {
        let io = |e: std::io::Error| FieldError::GridFormat(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(FieldError::GridFormat("bad magic".into()));
        }
        let mut u = [0u8; 8];
        let mut read_u64 = |r: &mut dyn Read| -> Result<u64, FieldError> {
            r.read_exact(&mut u).map_err(io)?;
            Ok(u64::from_le_bytes(u))
        };
        let m = read_u64(&mut r)? as usize;
        let nx = read_u64(&mut r)? as usize;
        let ny = read_u64(&mut r)? as usize;
        let mut fl = [0f64; 4];
        for v in fl.iter_mut() {
            *v = f64::from_bits(read_u64(&mut r)?);
        }
        let nfields = read_u64(&mut r)? as usize;
        if m == 0 || nx < 4 || ny < 4 || nfields == 0 || m > 64 {
            return Err(FieldError::GridFormat(format!("bad header m={m} nx={nx} ny={ny} nfields={nfields}")));
        }
        let bbox = BBox { min: Vec2::new(fl[0], fl[1]), max: Vec2::new(fl[2], fl[3]) };
        if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
            return Err(FieldError::GridFormat("empty bounding box".into()));
        }
        let count = nx * ny * nfields * m * m;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let re = f64::from_bits(read_u64(&mut r)?);
            let im = f64::from_bits(read_u64(&mut r)?);
            data.push(c(re, im));
        }
        Ok(GridField { m, nx, ny, bbox, nfields, data, extrapolations: AtomicUsize::new(0) })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FieldError> {
        let f = std::fs::File::open(path)
            .map_err(|e| FieldError::GridFormat(format!("{}: {e}", path.display())))?;
        Self::read_from(std::io::BufReader::new(f))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FieldError> {
        let f = std::fs::File::create(path)
            .map_err(|e| FieldError::GridFormat(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w).map_err(|e| FieldError::GridFormat(e.to_string()))?;
        w.flush().map_err(|e| FieldError::GridFormat(e.to_string()))
    }

    /// All nodes satisfy `‖F − F*‖ ≤ tol` for every field.
    pub fn all_hermitian(&self, tol: f64) -> bool {
        (0..self.ny).all(|iy| {
            (0..self.nx).all(|ix| {
                (0..self.nfields).all(|f| crate::linalg::is_hermitian(&self.node_value(ix, iy, f), tol))
            })
        })
    }
}

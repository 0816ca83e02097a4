//! Scene files and matrix export.
//!
//! # Scene file (TOML)
//!
//! ```toml
//! # optional, degrees; defaults to 0.2
//! min_separation_deg = 0.2
//!
//! [[target]]
//! theta_deg = 30.0     # angle of arrival, strictly inside (0, 180)
//! tau_s = 3.2e-8       # round-trip delay in seconds, >= 0
//! alpha_re = 1.0       # complex gain, real part
//! alpha_im = 0.0       # complex gain, imaginary part
//! ```
//!
//! # Binary matrix layout
//!
//! All integers and floats little-endian:
//!
//! | offset | size | content                                  |
//! |--------|------|------------------------------------------|
//! | 0      | 4    | magic `b"CXMT"`                          |
//! | 4      | 4    | format version, `u32` = 1                |
//! | 8      | 8    | rows, `u64`                              |
//! | 16     | 8    | cols, `u64`                              |
//! | 24     | 8·r·c| entries in row-major order, each a complex64 pair (`f32` real, `f32` imaginary) |
//!
//! # CSV layout
//!
//! Header `row,col,re,im`, one line per entry in row-major order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Target, TargetScene, DEFAULT_MIN_SEPARATION};
use crate::cxmat::{ComplexMatrix, C64};
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"CXMT";
pub const MATRIX_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_separation_deg: Option<f64>,
    #[serde(rename = "target")]
    targets: Vec<TargetRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetRecord {
    theta_deg: f64,
    tau_s: f64,
    alpha_re: f64,
    alpha_im: f64,
}

pub fn parse_scene(text: &str) -> Result<TargetScene> {
    let file: SceneFile = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let targets = file
        .targets
        .iter()
        .map(|t| Target {
            theta: t.theta_deg.to_radians(),
            tau: t.tau_s,
            alpha: C64::new(t.alpha_re, t.alpha_im),
        })
        .collect();
    let sep = file
        .min_separation_deg
        .map(f64::to_radians)
        .unwrap_or(DEFAULT_MIN_SEPARATION);
    TargetScene::with_min_separation(targets, sep)
}

pub fn scene_to_toml(scene: &TargetScene) -> String {
    let file = SceneFile {
        min_separation_deg: Some(scene.min_separation().to_degrees()),
        targets: scene
            .targets()
            .iter()
            .map(|t| TargetRecord {
                theta_deg: t.theta.to_degrees(),
                tau_s: t.tau,
                alpha_re: t.alpha.re,
                alpha_im: t.alpha.im,
            })
            .collect(),
    };
    toml::to_string(&file).expect("scene serializes")
}

pub fn write_matrix_binary<W: Write>(mut w: W, a: &ComplexMatrix) -> Result<()> {
    w.write_all(&MATRIX_MAGIC)?;
    w.write_all(&MATRIX_VERSION.to_le_bytes())?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<ComplexMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MATRIX_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != MATRIX_VERSION {
        return Err(Error::Format(format!("unsupported matrix version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("empty matrix {rows}x{cols}")));
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            r.read_exact(&mut b4)?;
            let re = f32::from_le_bytes(b4);
            r.read_exact(&mut b4)?;
            let im = f32::from_le_bytes(b4);
            out[(i, j)] = C64::new(re as f64, im as f64);
        }
    }
    crate::cxmat::check_finite(&out)?;
    Ok(out)
}

pub fn write_matrix_csv<W: Write>(w: W, a: &ComplexMatrix) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    wr.write_record(["row", "col", "re", "im"]).map_err(csv_err)?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let z = a[(i, j)];
            wr.write_record(&[i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()])
                .map_err(csv_err)?;
        }
    }
    wr.flush()?;
    Ok(())
}

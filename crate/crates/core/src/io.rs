//! Field dumps: raw little-endian `f64` samples in row-major order, `x`
//! fastest, next to a JSON sidecar describing the grid.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::grid::{Grid, ScalarField2D};

/// Sidecar of one dump. `nx`, `ny` count the stored samples; `Lx`, `Ly` are
/// the side lengths of the cell or box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpMeta {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    pub name: String,
    pub component: usize,
}

impl DumpMeta {
    pub fn for_grid(grid: &Grid, name: &str, component: usize) -> Self {
        let (nx, ny) = grid.shape();
        let (lx, ly) = match grid {
            Grid::Torus(t) => (t.lx, t.ly),
            Grid::Plane(p) => (2.0 * p.half_width, 2.0 * p.half_width),
        };
        Self {
            nx,
            ny,
            lx,
            ly,
            name: name.to_string(),
            component,
        }
    }
}

/// Paths `<dir>/<name>_<component>.bin` and the matching `.json`.
pub fn dump_paths(dir: &Path, name: &str, component: usize) -> (PathBuf, PathBuf) {
    let stem = format!("{name}_{component}");
    (dir.join(format!("{stem}.bin")), dir.join(format!("{stem}.json")))
}

pub fn write_field(dir: &Path, name: &str, component: usize, field: &ScalarField2D) -> Result<()> {
    let (bin, json) = dump_paths(dir, name, component);
    let meta = DumpMeta::for_grid(&field.grid, name, component);
    fs::write(&json, serde_json::to_string_pretty(&meta)?)?;
    let bytes: Vec<u8> = field.values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(bin, bytes)?;
    Ok(())
}

/// Writes every component of `fields` under `name`, numbering from 1.
pub fn write_fields(dir: &Path, name: &str, fields: &[ScalarField2D]) -> Result<()> {
    for (j, f) in fields.iter().enumerate() {
        write_field(dir, name, j + 1, f)?;
    }
    Ok(())
}

/// Reads a dump back as `(metadata, samples)`.
pub fn read_field(dir: &Path, name: &str, component: usize) -> Result<(DumpMeta, Vec<f64>)> {
    let (bin, json) = dump_paths(dir, name, component);
    let meta: DumpMeta = serde_json::from_str(&fs::read_to_string(json)?)?;
    let bytes = fs::read(bin)?;
    if bytes.len() != 8 * meta.nx * meta.ny {
        return Err(VortexError::Domain(format!(
            "dump holds {} bytes, sidecar promises {} x {} samples",
            bytes.len(),
            meta.nx,
            meta.ny
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((meta, values))
}

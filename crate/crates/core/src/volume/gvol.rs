//! GVOL: a JSON header (`<name>.gvol.json`) next to a raw payload
//! (`<name>.gvol.raw`) of little-endian `f32` values in x-fastest order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BinaryMask, GridSpec, ProbabilityMap, ScalarField, Volume};
use crate::error::{GeoError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Scalar,
    Prob,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GvolHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub kind: VolumeKind,
    pub dtype: String,
    pub order: String,
}

const DTYPE: &str = "f32";
const ORDER: &str = "x-fastest";

/// Header and payload paths for a GVOL volume. Accepts the header path, the
/// payload path, or the bare `<name>` prefix.
pub fn gvol_paths(path: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let s = path.as_ref().to_string_lossy();
    let stem = [".gvol.json", ".gvol.raw", ".gvol"]
        .iter()
        .find_map(|suffix| s.strip_suffix(suffix))
        .unwrap_or(&s);
    (
        PathBuf::from(format!("{stem}.gvol.json")),
        PathBuf::from(format!("{stem}.gvol.raw")),
    )
}

/// Writes a volume. Values are narrowed to `f32`; a volume whose values are
/// already `f32`-representable round-trips bit-exactly.
pub fn write_gvol(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let (header_path, raw_path) = gvol_paths(path);
    let grid = volume.grid();
    let header = GvolHeader {
        dims: grid.dims(),
        spacing: grid.spacing(),
        kind: volume.kind(),
        dtype: DTYPE.to_string(),
        order: ORDER.to_string(),
    };
    let values = volume.values();
    let mut payload = Vec::with_capacity(values.len() * 4);
    for v in values {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&header_path, serde_json::to_string_pretty(&header)?)?;
    fs::write(&raw_path, payload)?;
    Ok(())
}

pub fn read_gvol(path: impl AsRef<Path>) -> Result<Volume> {
    let (header_path, raw_path) = gvol_paths(path);
    let corrupt = |reason: String| GeoError::Corrupt {
        path: header_path.clone(),
        reason,
    };
    let header: GvolHeader =
        serde_json::from_slice(&fs::read(&header_path)?).map_err(|e| corrupt(format!("bad header: {e}")))?;
    if header.dtype != DTYPE {
        return Err(corrupt(format!("unsupported dtype `{}`", header.dtype)));
    }
    if header.order != ORDER {
        return Err(corrupt(format!("unsupported order `{}`", header.order)));
    }
    let grid = GridSpec::new(header.dims, header.spacing)?;

    let payload = fs::read(&raw_path)?;
    let expected = grid.voxel_count() * 4;
    if payload.len() != expected {
        return Err(GeoError::Corrupt {
            path: raw_path,
            reason: format!(
                "header declares {} voxels ({expected} bytes), payload has {} bytes",
                grid.voxel_count(),
                payload.len()
            ),
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();

    Ok(match header.kind {
        VolumeKind::Scalar => Volume::Scalar(ScalarField::new(grid, values)?),
        VolumeKind::Prob => Volume::Prob(ProbabilityMap::new(grid, values)?),
        VolumeKind::Mask => Volume::Mask(BinaryMask::from_values(grid, &values)?),
    })
}

//! Volume data model: the voxel grid, typed fields over it, and reductions.
//!
//! Every field stores one value per voxel in x-fastest order:
//! `index(ix, iy, iz) = ix + nx * (iy + ny * iz)`.

mod gvol;

pub use gvol::{gvol_paths, read_gvol, write_gvol, GvolHeader, VolumeKind};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Voxel grid: dimensions in voxels and physical spacing in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    dims: [usize; 3],
    spacing: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    dims: [usize; 3],
    #[serde(default = "unit_spacing")]
    spacing: [f64; 3],
}

fn unit_spacing() -> [f64; 3] {
    [1.0; 3]
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = GeoError;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridSpec::new(raw.dims, raw.spacing)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid {
            dims: g.dims,
            spacing: g.spacing,
        }
    }
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(GeoError::InvalidGrid(format!("dimensions must be >= 1, got {dims:?}")));
        }
        if dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none() {
            return Err(GeoError::InvalidGrid(format!("{dims:?} overflows usize")));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(GeoError::InvalidGrid(format!(
                "spacing must be finite and > 0, got {spacing:?}"
            )));
        }
        Ok(Self { dims, spacing })
    }

    /// Unit-spacing grid.
    pub fn isotropic(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    /// |Ω|, the number of voxels.
    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Linear offset between neighbours along `axis` (0 = x, 1 = y, 2 = z).
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        }
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> VoxelIndex {
        let nx = self.dims[0];
        let ny = self.dims[1];
        VoxelIndex([index % nx, (index / nx) % ny, index / (nx * ny)])
    }

    /// Physical position of a voxel centre, with the first voxel centred at
    /// half a spacing from the origin.
    pub fn center_mm(&self, v: VoxelIndex) -> [f64; 3] {
        [0, 1, 2].map(|a| (v.0[a] as f64 + 0.5) * self.spacing[a])
    }

    /// Physical extent of the volume along each axis.
    pub fn extent_mm(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.dims[a] as f64 * self.spacing[a])
    }

    pub fn contains(&self, v: VoxelIndex) -> bool {
        (0..3).all(|a| v.0[a] < self.dims[a])
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self.dims != other.dims {
            return Err(GeoError::GridMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        if self.spacing != other.spacing {
            return Err(GeoError::InvariantViolation(format!(
                "spacing mismatch: {:?} vs {:?}",
                self.spacing, other.spacing
            )));
        }
        Ok(())
    }
}

/// Integer voxel position `(ix, iy, iz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex(pub [usize; 3]);

/// Unrestricted real field (transform outputs, gradients, logits).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn filled(grid: GridSpec, fill: f64) -> Self {
        Self {
            grid,
            data: vec![fill; grid.voxel_count()],
        }
    }

    /// Builds a field by evaluating `f` at every voxel.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(VoxelIndex) -> f64) -> Self {
        let data = (0..grid.voxel_count()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, v: VoxelIndex) -> f64 {
        self.data[self.grid.index(v.0[0], v.0[1], v.0[2])]
    }

    /// Index of the first non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Creates a field of |Ω| copies of `fill` on a grid with the given geometry.
pub fn new_volume(dims: [usize; 3], spacing: [f64; 3], fill: f64) -> Result<ScalarField> {
    Ok(ScalarField::filled(GridSpec::new(dims, spacing)?, fill))
}

/// Output probability map `s`, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        check_len(&grid, data.len())?;
        if let Some((i, v)) = data.iter().enumerate().find(|(_, &v)| !(0.0..=1.0).contains(&v)) {
            return Err(GeoError::InvariantViolation(format!(
                "probability {v} at voxel {i} is outside [0, 1]"
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn filled(grid: GridSpec, fill: f64) -> Result<Self> {
        Self::new(grid, vec![fill; grid.voxel_count()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.clone(),
        }
    }

    /// Copy of the map with one voxel replaced; the new value must stay in `[0, 1]`.
    pub fn with_value(&self, index: usize, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(GeoError::InvariantViolation(format!(
                "probability {value} at voxel {index} is outside [0, 1]"
            )));
        }
        let mut out = self.clone();
        out.data[index] = value;
        Ok(out)
    }
}

impl From<&BinaryMask> for ProbabilityMap {
    fn from(m: &BinaryMask) -> Self {
        Self {
            grid: m.grid,
            data: m.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

impl TryFrom<ScalarField> for ProbabilityMap {
    type Error = GeoError;

    fn try_from(f: ScalarField) -> Result<Self> {
        Self::new(f.grid, f.data)
    }
}

/// Ground-truth (or thresholded) binary mask `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    grid: GridSpec,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(grid: GridSpec, data: Vec<bool>) -> Result<Self> {
        check_len(&grid, data.len())?;
        Ok(Self { grid, data })
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![false; grid.voxel_count()],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(VoxelIndex) -> bool) -> Self {
        let data = (0..grid.voxel_count()).map(|i| f(grid.coords(i))).collect();
        Self { grid, data }
    }

    /// Accepts values that are exactly 0.0 or 1.0.
    pub fn from_values(grid: GridSpec, values: &[f64]) -> Result<Self> {
        check_len(&grid, values.len())?;
        let data = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v == 0.0 {
                    Ok(false)
                } else if v == 1.0 {
                    Ok(true)
                } else {
                    Err(GeoError::InvariantViolation(format!(
                        "mask value {v} at voxel {i} is not 0 or 1"
                    )))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.data[index] = value;
    }

    #[inline]
    pub fn value(&self, index: usize) -> f64 {
        if self.data[index] {
            1.0
        } else {
            0.0
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.data.len()).map(|i| self.value(i)).collect()
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.values(),
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.data.iter().all(|&b| b)
    }

    /// True when the mask has both foreground and background voxels.
    pub fn has_boundary(&self) -> bool {
        !self.is_empty() && !self.is_full()
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }
}

/// Thresholds a probability map; voxels with `s >= t` are foreground.
pub fn binarize(s: &ProbabilityMap, t: f64) -> Result<BinaryMask> {
    if !(t > 0.0 && t < 1.0) {
        return Err(GeoError::Parameter(format!("threshold must lie in (0, 1), got {t}")));
    }
    Ok(BinaryMask {
        grid: s.grid,
        data: s.data.iter().map(|&v| v >= t).collect(),
    })
}

/// A volume read from disk, tagged by its semantic kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Scalar(ScalarField),
    Prob(ProbabilityMap),
    Mask(BinaryMask),
}

impl Volume {
    pub fn kind(&self) -> VolumeKind {
        match self {
            Volume::Scalar(_) => VolumeKind::Scalar,
            Volume::Prob(_) => VolumeKind::Prob,
            Volume::Mask(_) => VolumeKind::Mask,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        match self {
            Volume::Scalar(f) => f.grid(),
            Volume::Prob(p) => p.grid(),
            Volume::Mask(m) => m.grid(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Volume::Scalar(f) => f.data().to_vec(),
            Volume::Prob(p) => p.data().to_vec(),
            Volume::Mask(m) => m.values(),
        }
    }

    pub fn to_field(&self) -> ScalarField {
        match self {
            Volume::Scalar(f) => f.clone(),
            Volume::Prob(p) => p.to_field(),
            Volume::Mask(m) => m.to_field(),
        }
    }

    /// Probability view: masks become 0/1 maps, scalar fields are validated.
    pub fn into_prob(self) -> Result<ProbabilityMap> {
        match self {
            Volume::Scalar(f) => ProbabilityMap::try_from(f),
            Volume::Prob(p) => Ok(p),
            Volume::Mask(m) => Ok(ProbabilityMap::from(&m)),
        }
    }

    /// Mask view: only 0/1-valued volumes convert.
    pub fn into_mask(self) -> Result<BinaryMask> {
        match self {
            Volume::Mask(m) => Ok(m),
            other => BinaryMask::from_values(*other.grid(), &other.values()),
        }
    }
}

impl From<ScalarField> for Volume {
    fn from(f: ScalarField) -> Self {
        Volume::Scalar(f)
    }
}

impl From<ProbabilityMap> for Volume {
    fn from(p: ProbabilityMap) -> Self {
        Volume::Prob(p)
    }
}

impl From<BinaryMask> for Volume {
    fn from(m: BinaryMask) -> Self {
        Volume::Mask(m)
    }
}

fn check_len(grid: &GridSpec, len: usize) -> Result<()> {
    if len != grid.voxel_count() {
        return Err(GeoError::InvariantViolation(format!(
            "grid {:?} needs {} values, got {len}",
            grid.dims(),
            grid.voxel_count()
        )));
    }
    Ok(())
}

const PAIRWISE_BLOCK: usize = 64;

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is reproducible for a given input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n`.
pub fn pairwise_sum_by(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, &f)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_by(a.len(), |i| a[i] * b[i])
}

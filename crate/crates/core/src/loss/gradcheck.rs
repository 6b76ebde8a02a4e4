use serde::Serialize;

use super::{CompositeLoss, LossResult};
use crate::error::{GeoError, Result};
use crate::volume::{BinaryMask, ProbabilityMap, VoxelIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub eps: f64,
    /// Check at most this many voxels, evenly strided through the volume.
    pub max_voxels: Option<usize>,
    /// Denominator floor for the relative error, `|a - n| / max(|a|, |n|, floor)`.
    pub rel_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_voxels: None,
            rel_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub worst_voxel: usize,
    pub worst_coords: VoxelIndex,
    pub checked: usize,
    pub eps: f64,
}

/// Compares the analytic gradient of `f` at `s` with central differences
/// `(f(s + eps e_v) - f(s - eps e_v)) / (2 eps)`.
pub fn grad_check_fn(
    f: impl Fn(&ProbabilityMap) -> Result<LossResult>,
    s: &ProbabilityMap,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let eps = opts.eps;
    if !(eps > 0.0) {
        return Err(GeoError::Parameter(format!("eps must be > 0, got {eps}")));
    }
    let analytic = f(s)?.grad;
    let n = s.grid().voxel_count();
    let step = match opts.max_voxels {
        Some(m) if m > 0 && m < n => n.div_ceil(m),
        _ => 1,
    };

    let mut report = GradCheckReport {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_voxel: 0,
        worst_coords: s.grid().coords(0),
        checked: 0,
        eps,
    };
    for v in (0..n).step_by(step) {
        let base = s.data()[v];
        let plus = s.with_value(v, base + eps).map_err(|_| out_of_range(v, base, eps))?;
        let minus = s.with_value(v, base - eps).map_err(|_| out_of_range(v, base, eps))?;
        let numeric = (f(&plus)?.value - f(&minus)?.value) / (2.0 * eps);
        let a = analytic.data()[v];
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(opts.rel_floor);
        report.max_abs_err = report.max_abs_err.max(abs);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_voxel = v;
            report.worst_coords = s.grid().coords(v);
        }
        report.checked += 1;
    }
    Ok(report)
}

fn out_of_range(v: usize, base: f64, eps: f64) -> GeoError {
    GeoError::Parameter(format!("perturbing voxel {v} (s = {base}) by ±{eps} leaves [0, 1]"))
}

/// Gradient check of a composite loss at a fixed progress. Stopped quantities
/// (prediction distance maps, `|·|` sign patterns) are frozen at `s`.
pub fn grad_check(
    loss: &CompositeLoss,
    s: &ProbabilityMap,
    g: &BinaryMask,
    progress: f64,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport> {
    let prepared = loss.prepare(s, g, true)?;
    grad_check_fn(|x| Ok(prepared.evaluate(x, progress)?.total), s, opts)
}

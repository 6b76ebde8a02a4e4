//! Voxel overlap and lesion-wise detection metrics.
//!
//! A lesion is a connected component of the foreground. A ground-truth lesion
//! is detected when it shares at least one voxel with the prediction; a
//! predicted lesion is a true positive when it shares at least one voxel with
//! the ground truth.

mod components;

pub use components::{connected_components, Connectivity, LabelMap};

use serde::Serialize;

use crate::error::Result;
use crate::volume::{binarize, BinaryMask, ProbabilityMap};

/// `2 |P ∩ G| / (|P| + |G|)`, 1.0 when both masks are empty.
pub fn dsc(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pred.grid().ensure_same(gt.grid())?;
    let (mut inter, mut total) = (0usize, 0usize);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        inter += (p && g) as usize;
        total += p as usize + g as usize;
    }
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LesionMetrics {
    pub dsc: f64,
    pub ltpr: f64,
    /// Fraction of predicted lesions that overlap the ground truth.
    pub lppv: f64,
    pub lf1: f64,
    /// Ground-truth lesions overlapping the prediction.
    pub tpr_count: usize,
    /// Predicted lesions overlapping the ground truth.
    pub matched_pred: usize,
    pub gl: usize,
    pub pl: usize,
    /// `tpr_count / pl`, with the same degenerate conventions as `lppv`.
    /// Can exceed 1 when one predicted lesion covers several true ones.
    pub lppv_literal: f64,
}

fn ratio(num: usize, den: usize, other_den: usize) -> f64 {
    match (den, other_den) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => num as f64 / den as f64,
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

pub fn lesion_metrics(pred: &BinaryMask, gt: &BinaryMask, connectivity: Connectivity) -> Result<LesionMetrics> {
    pred.grid().ensure_same(gt.grid())?;
    let p = connected_components(pred, connectivity);
    let g = connected_components(gt, connectivity);
    let mut gt_hit = vec![false; g.n_components()];
    let mut pred_hit = vec![false; p.n_components()];
    for (&lp, &lg) in p.labels().iter().zip(g.labels()) {
        if lp > 0 && lg > 0 {
            gt_hit[lg as usize - 1] = true;
            pred_hit[lp as usize - 1] = true;
        }
    }
    let tpr_count = gt_hit.iter().filter(|&&h| h).count();
    let matched_pred = pred_hit.iter().filter(|&&h| h).count();
    let (gl, pl) = (g.n_components(), p.n_components());
    let ltpr = ratio(tpr_count, gl, pl);
    let lppv = ratio(matched_pred, pl, gl);
    Ok(LesionMetrics {
        dsc: dsc(pred, gt)?,
        ltpr,
        lppv,
        lf1: harmonic(ltpr, lppv),
        tpr_count,
        matched_pred,
        gl,
        pl,
        lppv_literal: ratio(tpr_count, pl, gl),
    })
}

/// Nine thresholds 0.1, 0.2, ..., 0.9.
pub fn default_thresholds() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// `start, start + step, ...` up to and including `end` (within 1e-9), each
/// value rounded to 12 decimals.
pub fn threshold_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    #[serde(flatten)]
    pub metrics: LesionMetrics,
    /// Foreground voxel count of the thresholded prediction.
    pub foreground: usize,
}

pub fn threshold_sweep(
    s: &ProbabilityMap,
    gt: &BinaryMask,
    thresholds: &[f64],
    connectivity: Connectivity,
) -> Result<Vec<SweepRow>> {
    thresholds
        .iter()
        .map(|&t| {
            let pred = binarize(s, t)?;
            Ok(SweepRow {
                threshold: t,
                metrics: lesion_metrics(&pred, gt, connectivity)?,
                foreground: pred.count(),
            })
        })
        .collect()
}

pub const CSV_HEADER: &str = "threshold,dsc,lppv,ltpr,lf1,tpr,gl,pl";

/// CSV with [`CSV_HEADER`], one line per row.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(r.threshold, &r.metrics));
        out.push('\n');
    }
    out
}

pub fn csv_line(threshold: f64, m: &LesionMetrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        threshold, m.dsc, m.lppv, m.ltpr, m.lf1, m.tpr_count, m.gl, m.pl
    )
}

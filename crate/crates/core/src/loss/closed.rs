//! Direct implementations of each named loss.

use super::{sign0, FogVariant, LossResult, Normalization, PlaneMapping, SogSided};
use crate::error::Result;
use crate::transform::{edt, fog, fog_adjoint, sog, Axes, Axis, Boundary, DerivativeOp, DistanceMap, OperatorKind};
use crate::volume::{pairwise_sum_by, BinaryMask, ProbabilityMap, ScalarField};

/// Clamp applied to BCE log arguments.
pub const BCE_EPS: f64 = 1e-7;

fn check(s: &ProbabilityMap, g: &BinaryMask) -> Result<()> {
    s.grid().ensure_same(g.grid())
}

fn field(s: &ProbabilityMap, data: Vec<f64>) -> Result<ScalarField> {
    ScalarField::new(*s.grid(), data)
}

/// `1 - 2 Σ s g / Σ (s + g)`; zero (with zero gradient) when both are empty.
pub fn dice_loss(s: &ProbabilityMap, g: &BinaryMask) -> Result<LossResult> {
    check(s, g)?;
    let n = s.grid().voxel_count();
    let sv = s.data();
    let inter = pairwise_sum_by(n, |i| sv[i] * g.value(i));
    let total = pairwise_sum_by(n, |i| sv[i] + g.value(i));
    if total == 0.0 {
        return LossResult::checked(0.0, ScalarField::zeros(*s.grid()), "dice");
    }
    let grad = (0..n)
        .map(|i| 2.0 * (inter - g.value(i) * total) / (total * total))
        .collect();
    LossResult::checked(1.0 - 2.0 * inter / total, field(s, grad)?, "dice")
}

/// Binary cross-entropy, summed (`Normalization::Sum`) or averaged.
pub fn bce_loss(s: &ProbabilityMap, g: &BinaryMask, reduction: Normalization) -> Result<LossResult> {
    check(s, g)?;
    let n = s.grid().voxel_count();
    let scale = match reduction {
        Normalization::Sum => 1.0,
        Normalization::Mean => 1.0 / n as f64,
    };
    let clamped: Vec<f64> = s.data().iter().map(|v| v.clamp(BCE_EPS, 1.0 - BCE_EPS)).collect();
    let total = pairwise_sum_by(n, |i| {
        let p = clamped[i];
        if g.data()[i] {
            -p.ln()
        } else {
            -(1.0 - p).ln()
        }
    });
    let grad = clamped
        .iter()
        .enumerate()
        .map(|(i, &p)| scale * (p - g.value(i)) / (p * (1.0 - p)))
        .collect();
    LossResult::checked(total * scale, field(s, grad)?, "bce")
}

/// Boundary loss `Σ s_v φ_D(g, v)`, divided by |Ω| under `Mean`.
pub fn bd_loss(
    s: &ProbabilityMap,
    g: &BinaryMask,
    dtm: &DistanceMap,
    normalization: Normalization,
) -> Result<LossResult> {
    check(s, g)?;
    s.grid().ensure_same(dtm.grid())?;
    let n = s.grid().voxel_count();
    let scale = match normalization {
        Normalization::Sum => 1.0,
        Normalization::Mean => 1.0 / n as f64,
    };
    let d = dtm.data();
    let total = pairwise_sum_by(n, |i| s.data()[i] * d[i]);
    let grad = d.iter().map(|x| x * scale).collect();
    LossResult::checked(total * scale, field(s, grad)?, "bd")
}

/// Hausdorff-style loss `Σ (s - g)² (φ_D(g)² + φ_D(s)²)`, divided by |Ω| under
/// `Mean`. Both distance maps are constants under differentiation; pass
/// `None` for `dtm_s` when the binarised prediction has no boundary.
pub fn hd_loss(
    s: &ProbabilityMap,
    g: &BinaryMask,
    dtm_g: &DistanceMap,
    dtm_s: Option<&DistanceMap>,
    normalization: Normalization,
) -> Result<LossResult> {
    check(s, g)?;
    s.grid().ensure_same(dtm_g.grid())?;
    if let Some(ds) = dtm_s {
        s.grid().ensure_same(ds.grid())?;
    }
    let n = s.grid().voxel_count();
    let scale = match normalization {
        Normalization::Sum => 1.0,
        Normalization::Mean => 1.0 / n as f64,
    };
    let weight: Vec<f64> = (0..n)
        .map(|i| {
            let a = dtm_g.data()[i];
            let b = dtm_s.map_or(0.0, |d| d.data()[i]);
            a * a + b * b
        })
        .collect();
    let diff: Vec<f64> = (0..n).map(|i| s.data()[i] - g.value(i)).collect();
    let total = pairwise_sum_by(n, |i| diff[i] * diff[i] * weight[i]);
    let grad = (0..n).map(|i| 2.0 * diff[i] * weight[i] * scale).collect();
    LossResult::checked(total * scale, field(s, grad)?, "hd")
}

/// [`hd_loss`] with both distance maps computed here: `φ_D(g)` unsigned and
/// `φ_D(s)` on `binarize(s, 0.5)`.
pub fn hd_loss_auto(s: &ProbabilityMap, g: &BinaryMask, normalization: Normalization) -> Result<LossResult> {
    let dtm_g = edt(g, false)?;
    let dtm_s = super::generic::prediction_distance(s)?;
    hd_loss(s, g, &dtm_g, dtm_s.as_ref(), normalization)
}

/// First-order gradient loss `(1/|Ω|) Σ ‖φ(s) - φ(g)‖²` with the default
/// (RAS) plane mapping.
pub fn fog_loss(s: &ProbabilityMap, g: &BinaryMask, variant: FogVariant, op: DerivativeOp) -> Result<LossResult> {
    fog_loss_mapped(s, g, variant, &PlaneMapping::default(), op)
}

/// The full variant is accumulated as the x, y and z single-axis values added
/// in that order, so it equals the sum of the three planar variants exactly.
pub fn fog_loss_mapped(
    s: &ProbabilityMap,
    g: &BinaryMask,
    variant: FogVariant,
    planes: &PlaneMapping,
    op: DerivativeOp,
) -> Result<LossResult> {
    check(s, g)?;
    let n = s.grid().voxel_count();
    let nf = n as f64;
    let axes = match variant.operator_kind(planes) {
        OperatorKind::FogX => Axes::only(Axis::X),
        OperatorKind::FogY => Axes::only(Axis::Y),
        OperatorKind::FogZ => Axes::only(Axis::Z),
        _ => Axes::ALL,
    };
    let residual = fog(&s.to_field(), axes, op)?.sub(&fog(&g.to_field(), axes, op)?)?;
    let value = residual
        .components()
        .map(|(_, r)| pairwise_sum_by(n, |i| r.data()[i] * r.data()[i]) / nf)
        .fold(0.0, |acc, v| acc + v);
    let mut grad = fog_adjoint(&residual, op)?;
    grad.data_mut().iter_mut().for_each(|x| *x *= 2.0 / nf);
    LossResult::checked(value, grad, "fog")
}

/// Second-order gradient loss `(1/|Ω|) Σ |s - g| w` with `w = φ(g)` (one-sided)
/// or `w = φ(g) + φ(s)` (two-sided), optionally replaced by `|w|`.
pub fn sog_loss(
    s: &ProbabilityMap,
    g: &BinaryMask,
    sided: SogSided,
    magnitude: bool,
    boundary: Boundary,
) -> Result<LossResult> {
    check(s, g)?;
    let n = s.grid().voxel_count();
    let nf = n as f64;
    let lap_g = sog(&g.to_field(), boundary);
    let raw: Vec<f64> = match sided {
        SogSided::One => lap_g.data().to_vec(),
        SogSided::Two => {
            let lap_s = sog(&s.to_field(), boundary);
            lap_g.data().iter().zip(lap_s.data()).map(|(a, b)| a + b).collect()
        }
    };
    let w: Vec<f64> = if magnitude {
        raw.iter().map(|x| x.abs()).collect()
    } else {
        raw.clone()
    };
    let diff: Vec<f64> = (0..n).map(|i| s.data()[i] - g.value(i)).collect();
    let value = pairwise_sum_by(n, |i| diff[i].abs() * w[i]) / nf;

    let mut grad: Vec<f64> = (0..n).map(|i| sign0(diff[i]) * w[i] / nf).collect();
    if sided == SogSided::Two {
        // ∂/∂s through φ(s): Lᵀ(|s - g| · sign(w)) with L symmetric
        let inner: Vec<f64> = (0..n)
            .map(|i| {
                let m = if magnitude { sign0(raw[i]) } else { 1.0 };
                diff[i].abs() * m
            })
            .collect();
        let back = sog(&field(s, inner)?, boundary);
        grad.iter_mut().zip(back.data()).for_each(|(g, b)| *g += b / nf);
    }
    LossResult::checked(value, field(s, grad)?, "sog")
}

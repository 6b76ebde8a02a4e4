//! Ratio-of-sums segmentation losses
//!
//! ```text
//! L = Σ_v Θ(s_v, g_v) · Ψ(s, g, v, φ) / Σ_v Γ(s_v, g_v)
//! ```
//!
//! [`geo_eval`] evaluates any valid `(Θ, Ψ, Γ, φ)` selection with its analytic
//! gradient. The closed-form functions ([`dice_loss`], [`bce_loss`],
//! [`bd_loss`], [`hd_loss`], [`fog_loss`], [`sog_loss`]) compute the same
//! losses directly and serve as a second route for every instantiation.
//!
//! Stop-gradient conventions:
//! - the distance map of the binarised prediction in the Hausdorff loss is a
//!   constant under differentiation;
//! - `|x|` has subgradient `sign(x)` with `sign(0) = 0`.

mod closed;
mod composite;
mod config;
mod generic;
mod gradcheck;

pub use closed::{bce_loss, bd_loss, dice_loss, fog_loss, fog_loss_mapped, hd_loss, hd_loss_auto, sog_loss, BCE_EPS};
pub use composite::{
    composite_eval, CompositeLoss, CompositeResult, CompositeTerm, PreparedComposite, TermValue, WeightSchedule,
    BD_RAMP,
};
pub use config::{LossConfig, LossDocument, TermConfig};
pub use generic::{geo_eval, PreparedLoss};
pub use gradcheck::{grad_check, grad_check_fn, GradCheckOptions, GradCheckReport};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::transform::{Axis, Boundary, DerivativeOp, GeometricOperator, OperatorKind};
use crate::volume::ScalarField;

/// Voxelwise volumetric correlation Θ(s_v, g_v).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta {
    /// `-(g ln s + (1 - g) ln(1 - s))`, log arguments clamped to `[ε, 1 - ε]`.
    Bce,
    /// `s + g - 2 s g`
    DiceNum,
    /// `s`
    SOnly,
    /// `(s - g)²`
    SqDiff,
    /// `|s - g|`
    AbsDiff,
    One,
}

/// Geometric correlation Ψ(s, g, v, φ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    One,
    /// `φ_D(g, v)`
    DtmG,
    /// `φ_D(g, v)² + φ_D(s, v)²`
    DtmSqSum,
    /// `‖φ(s, v) - φ(g, v)‖²` with φ a first-order gradient.
    FogSqDiff,
    /// `φ(g, v)` with φ the Laplacian.
    SogG,
    /// `φ(g, v) + φ(s, v)` with φ the Laplacian.
    SogGPlusS,
}

/// Normaliser Γ. `UnitSum` means `Σ_v Γ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    UnitSum,
    /// `s + g`
    DiceDen,
    /// `Σ_v Γ = |Ω|`
    CardOmega,
}

/// Sum versus mean reduction for losses whose literal form is a plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Sum,
    Mean,
}

impl Normalization {
    fn gamma(self) -> Gamma {
        match self {
            Normalization::Sum => Gamma::UnitSum,
            Normalization::Mean => Gamma::CardOmega,
        }
    }
}

/// Which axes a first-order gradient loss uses. The planar variants follow a
/// [`PlaneMapping`] from anatomical names to array axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FogVariant {
    #[default]
    Full,
    #[serde(alias = "s")]
    Sagittal,
    #[serde(alias = "c")]
    Coronal,
    #[serde(alias = "a")]
    Axial,
}

/// Anatomical plane to array axis. The default assumes RAS-ordered volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PlaneMapping {
    pub sagittal: Axis,
    pub coronal: Axis,
    pub axial: Axis,
}

impl Default for PlaneMapping {
    fn default() -> Self {
        Self {
            sagittal: Axis::X,
            coronal: Axis::Y,
            axial: Axis::Z,
        }
    }
}

impl FogVariant {
    pub fn operator_kind(self, planes: &PlaneMapping) -> OperatorKind {
        let axis = match self {
            FogVariant::Full => return OperatorKind::FogFull,
            FogVariant::Sagittal => planes.sagittal,
            FogVariant::Coronal => planes.coronal,
            FogVariant::Axial => planes.axial,
        };
        match axis {
            Axis::X => OperatorKind::FogX,
            Axis::Y => OperatorKind::FogY,
            Axis::Z => OperatorKind::FogZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SogSided {
    #[default]
    One,
    Two,
}

/// A validated `(Θ, Ψ, Γ, φ)` selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GeoLossSpec {
    theta: Theta,
    psi: Psi,
    gamma: Gamma,
    operator: Option<GeometricOperator>,
    magnitude: bool,
}

impl GeoLossSpec {
    /// Validates the combination. Only the instantiations listed on the
    /// constructors below are accepted; `magnitude` (use `|φ|`) is only
    /// meaningful for the Laplacian terms.
    pub fn new(
        theta: Theta,
        psi: Psi,
        gamma: Gamma,
        operator: Option<GeometricOperator>,
        magnitude: bool,
    ) -> Result<Self> {
        let kind = operator.map(|o| o.kind);
        let sum_or_mean = matches!(gamma, Gamma::UnitSum | Gamma::CardOmega);
        let ok = match (theta, psi) {
            (Theta::Bce, Psi::One) => sum_or_mean && kind.is_none(),
            (Theta::DiceNum, Psi::One) => gamma == Gamma::DiceDen && kind.is_none(),
            (Theta::SOnly, Psi::DtmG) => sum_or_mean && kind.is_some_and(OperatorKind::is_dtm),
            (Theta::SqDiff, Psi::DtmSqSum) => sum_or_mean && kind == Some(OperatorKind::DtmUnsigned),
            (Theta::One, Psi::FogSqDiff) => gamma == Gamma::CardOmega && kind.is_some_and(OperatorKind::is_fog),
            (Theta::AbsDiff, Psi::SogG | Psi::SogGPlusS) => {
                gamma == Gamma::CardOmega && kind == Some(OperatorKind::Sog)
            }
            _ => false,
        };
        if !ok {
            return Err(GeoError::InvalidSpec(format!(
                "unsupported combination theta={theta:?} psi={psi:?} gamma={gamma:?} operator={kind:?}"
            )));
        }
        if magnitude && !matches!(psi, Psi::SogG | Psi::SogGPlusS) {
            return Err(GeoError::InvalidSpec(
                "magnitude only applies to laplacian terms".into(),
            ));
        }
        Ok(Self {
            theta,
            psi,
            gamma,
            operator,
            magnitude,
        })
    }

    pub fn dice() -> Self {
        Self::new(Theta::DiceNum, Psi::One, Gamma::DiceDen, None, false).expect("valid")
    }

    pub fn bce(reduction: Normalization) -> Self {
        Self::new(Theta::Bce, Psi::One, reduction.gamma(), None, false).expect("valid")
    }

    pub fn bd(signed: bool, normalization: Normalization) -> Self {
        let kind = if signed {
            OperatorKind::DtmSigned
        } else {
            OperatorKind::DtmUnsigned
        };
        Self::new(
            Theta::SOnly,
            Psi::DtmG,
            normalization.gamma(),
            Some(GeometricOperator::new(kind)),
            false,
        )
        .expect("valid")
    }

    pub fn hd(normalization: Normalization) -> Self {
        Self::new(
            Theta::SqDiff,
            Psi::DtmSqSum,
            normalization.gamma(),
            Some(GeometricOperator::new(OperatorKind::DtmUnsigned)),
            false,
        )
        .expect("valid")
    }

    pub fn fog(variant: FogVariant, op: DerivativeOp) -> Self {
        Self::fog_mapped(variant, &PlaneMapping::default(), op)
    }

    pub fn fog_mapped(variant: FogVariant, planes: &PlaneMapping, op: DerivativeOp) -> Self {
        Self::new(
            Theta::One,
            Psi::FogSqDiff,
            Gamma::CardOmega,
            Some(GeometricOperator::with_derivative(variant.operator_kind(planes), op)),
            false,
        )
        .expect("valid")
    }

    pub fn sog(sided: SogSided, magnitude: bool, boundary: Boundary) -> Self {
        let psi = match sided {
            SogSided::One => Psi::SogG,
            SogSided::Two => Psi::SogGPlusS,
        };
        let op = GeometricOperator {
            kind: OperatorKind::Sog,
            stencil: Default::default(),
            boundary,
        };
        Self::new(Theta::AbsDiff, psi, Gamma::CardOmega, Some(op), magnitude).expect("valid")
    }

    pub fn theta(&self) -> Theta {
        self.theta
    }

    pub fn psi(&self) -> Psi {
        self.psi
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    pub fn operator(&self) -> Option<GeometricOperator> {
        self.operator
    }

    pub fn magnitude(&self) -> bool {
        self.magnitude
    }

    /// True when evaluation needs a distance transform of the ground truth.
    pub fn needs_boundary(&self) -> bool {
        matches!(self.psi, Psi::DtmG | Psi::DtmSqSum)
    }

    /// Short identifier used in reports.
    pub fn name(&self) -> String {
        let kind = self.operator.map(|o| o.kind);
        match self.psi {
            Psi::One => match (self.theta, self.gamma) {
                (Theta::DiceNum, _) => "dice".into(),
                (_, Gamma::CardOmega) => "bce_mean".into(),
                _ => "bce".into(),
            },
            Psi::DtmG => {
                if kind == Some(OperatorKind::DtmSigned) {
                    "bd".into()
                } else {
                    "bd_unsigned".into()
                }
            }
            Psi::DtmSqSum => "hd".into(),
            Psi::FogSqDiff => match kind {
                Some(OperatorKind::FogX) => "fog_x".into(),
                Some(OperatorKind::FogY) => "fog_y".into(),
                Some(OperatorKind::FogZ) => "fog_z".into(),
                _ => "fog".into(),
            },
            Psi::SogG | Psi::SogGPlusS => {
                let sided = if self.psi == Psi::SogG { "one" } else { "two" };
                let abs = if self.magnitude { "_abs" } else { "" };
                format!("sog_{sided}{abs}")
            }
        }
    }
}

/// Loss value and its gradient with respect to every `s_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: ScalarField,
}

impl LossResult {
    pub(crate) fn checked(value: f64, grad: ScalarField, context: &str) -> Result<Self> {
        if !value.is_finite() {
            return Err(GeoError::NonFinite {
                context: format!("{context} value"),
                voxel: grad.first_non_finite().unwrap_or(0),
            });
        }
        if let Some(voxel) = grad.first_non_finite() {
            return Err(GeoError::NonFinite {
                context: format!("{context} gradient"),
                voxel,
            });
        }
        Ok(Self { value, grad })
    }
}

#[inline]
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

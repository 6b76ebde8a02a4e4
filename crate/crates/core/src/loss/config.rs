//! JSON loss documents.
//!
//! A single loss is an object tagged by `name`:
//!
//! ```json
//! {"name": "fog", "variant": "sagittal", "stencil": "central", "boundary": "replicate"}
//! ```
//!
//! A composite lists terms with optional weights (constant or ramp):
//!
//! ```json
//! {"terms": [
//!   {"loss": {"name": "dice"}},
//!   {"loss": {"name": "bd"}, "weight": {"start": 1.0, "end": 0.01}}
//! ]}
//! ```

use serde::{Deserialize, Serialize};

use super::{
    CompositeLoss, CompositeTerm, FogVariant, Gamma, GeoLossSpec, Normalization, PlaneMapping, Psi, SogSided, Theta,
    WeightSchedule,
};
use crate::error::Result;
use crate::transform::{Boundary, DerivativeOp, GeometricOperator, Stencil};

fn yes() -> bool {
    true
}

fn mean() -> Normalization {
    Normalization::Mean
}

fn sum() -> Normalization {
    Normalization::Sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    Dice,
    Bce {
        #[serde(default = "sum")]
        reduction: Normalization,
    },
    Bd {
        #[serde(default = "yes")]
        signed: bool,
        #[serde(default = "mean")]
        normalization: Normalization,
    },
    Hd {
        #[serde(default = "mean")]
        normalization: Normalization,
    },
    Fog {
        #[serde(default)]
        variant: FogVariant,
        #[serde(default)]
        stencil: Stencil,
        #[serde(default)]
        boundary: Boundary,
        #[serde(default)]
        planes: PlaneMapping,
    },
    Sog {
        #[serde(default)]
        sided: SogSided,
        #[serde(default)]
        magnitude: bool,
        #[serde(default)]
        boundary: Boundary,
    },
    /// Arbitrary validated `(Θ, Ψ, Γ, φ)` selection.
    Geo {
        theta: Theta,
        psi: Psi,
        gamma: Gamma,
        #[serde(default)]
        operator: Option<GeometricOperator>,
        #[serde(default)]
        magnitude: bool,
    },
}

impl LossConfig {
    pub fn to_spec(&self) -> Result<GeoLossSpec> {
        Ok(match *self {
            LossConfig::Dice => GeoLossSpec::dice(),
            LossConfig::Bce { reduction } => GeoLossSpec::bce(reduction),
            LossConfig::Bd { signed, normalization } => GeoLossSpec::bd(signed, normalization),
            LossConfig::Hd { normalization } => GeoLossSpec::hd(normalization),
            LossConfig::Fog {
                variant,
                stencil,
                boundary,
                planes,
            } => GeoLossSpec::fog_mapped(variant, &planes, DerivativeOp::new(stencil, boundary)),
            LossConfig::Sog {
                sided,
                magnitude,
                boundary,
            } => GeoLossSpec::sog(sided, magnitude, boundary),
            LossConfig::Geo {
                theta,
                psi,
                gamma,
                operator,
                magnitude,
            } => GeoLossSpec::new(theta, psi, gamma, operator, magnitude)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub loss: LossConfig,
    #[serde(default)]
    pub weight: WeightSchedule,
}

/// Either a composite (`{"terms": [...]}`) or a single loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossDocument {
    Composite { terms: Vec<TermConfig> },
    Single(LossConfig),
}

impl LossDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_composite(&self) -> Result<CompositeLoss> {
        match self {
            LossDocument::Single(c) => Ok(CompositeLoss::single(c.to_spec()?)),
            LossDocument::Composite { terms } => CompositeLoss::new(
                terms
                    .iter()
                    .map(|t| {
                        Ok(CompositeTerm {
                            spec: t.loss.to_spec()?,
                            weight: t.weight,
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::{GeoLossSpec, LossResult, PreparedLoss};
use crate::error::{GeoError, Result};
use crate::volume::{BinaryMask, ProbabilityMap, ScalarField};

/// Term weight as a function of training progress in `[0, 1]`.
///
/// JSON: a bare number for a constant, `{"start": a, "end": b}` for a linear ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSchedule {
    Constant(f64),
    Linear { start: f64, end: f64 },
}

/// Default ramp for boundary-loss scheduling.
pub const BD_RAMP: WeightSchedule = WeightSchedule::Linear { start: 1.0, end: 0.01 };

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule::Constant(1.0)
    }
}

impl WeightSchedule {
    pub fn weight_at(&self, progress: f64) -> f64 {
        match *self {
            WeightSchedule::Constant(w) => w,
            WeightSchedule::Linear { start, end } => (1.0 - progress) * start + progress * end,
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            WeightSchedule::Constant(w) => w.is_finite(),
            WeightSchedule::Linear { start, end } => start.is_finite() && end.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTerm {
    pub spec: GeoLossSpec,
    pub weight: WeightSchedule,
}

/// Weighted sum of losses.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLoss {
    terms: Vec<CompositeTerm>,
}

impl CompositeLoss {
    pub fn new(terms: Vec<CompositeTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(GeoError::InvalidSpec("composite loss needs at least one term".into()));
        }
        if let Some(t) = terms.iter().find(|t| !t.weight.is_finite()) {
            return Err(GeoError::InvalidSpec(format!(
                "non-finite weight for `{}`",
                t.spec.name()
            )));
        }
        Ok(Self { terms })
    }

    pub fn single(spec: GeoLossSpec) -> Self {
        Self {
            terms: vec![CompositeTerm {
                spec,
                weight: WeightSchedule::Constant(1.0),
            }],
        }
    }

    /// Adds a term; the builder form used for e.g. `Dice + 1.0 · FOG`.
    pub fn with(mut self, spec: GeoLossSpec, weight: WeightSchedule) -> Result<Self> {
        self.terms.push(CompositeTerm { spec, weight });
        Self::new(self.terms)
    }

    pub fn terms(&self) -> &[CompositeTerm] {
        &self.terms
    }

    pub fn needs_boundary(&self) -> bool {
        self.terms.iter().any(|t| t.spec.needs_boundary())
    }

    /// Binds every term to `(s, g)`; see [`PreparedLoss`] for `freeze`.
    pub fn prepare<'a>(&self, s: &ProbabilityMap, g: &'a BinaryMask, freeze: bool) -> Result<PreparedComposite<'a>> {
        let terms = self
            .terms
            .iter()
            .map(|t| Ok((PreparedLoss::new(&t.spec, s, g, freeze)?, t.weight)))
            .collect::<Result<_>>()?;
        Ok(PreparedComposite { terms })
    }
}

impl From<GeoLossSpec> for CompositeLoss {
    fn from(spec: GeoLossSpec) -> Self {
        Self::single(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermValue {
    pub name: String,
    pub weight: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeResult {
    pub total: LossResult,
    pub terms: Vec<TermValue>,
}

#[derive(Debug, Clone)]
pub struct PreparedComposite<'a> {
    terms: Vec<(PreparedLoss<'a>, WeightSchedule)>,
}

impl PreparedComposite<'_> {
    pub fn evaluate(&self, s: &ProbabilityMap, progress: f64) -> Result<CompositeResult> {
        if !(0.0..=1.0).contains(&progress) {
            return Err(GeoError::Parameter(format!("progress {progress} outside [0, 1]")));
        }
        let mut value = 0.0;
        let mut grad = ScalarField::zeros(*s.grid());
        let mut terms = Vec::with_capacity(self.terms.len());
        for (loss, schedule) in &self.terms {
            let w = schedule.weight_at(progress);
            let r = loss.evaluate(s)?;
            value += w * r.value;
            grad.data_mut()
                .iter_mut()
                .zip(r.grad.data())
                .for_each(|(acc, g)| *acc += w * g);
            terms.push(TermValue {
                name: loss.spec().name(),
                weight: w,
                value: r.value,
            });
        }
        Ok(CompositeResult {
            total: LossResult::checked(value, grad, "composite")?,
            terms,
        })
    }
}

/// Weighted sum of term values and gradients at the scheduled weights.
pub fn composite_eval(c: &CompositeLoss, s: &ProbabilityMap, g: &BinaryMask, progress: f64) -> Result<CompositeResult> {
    c.prepare(s, g, false)?.evaluate(s, progress)
}

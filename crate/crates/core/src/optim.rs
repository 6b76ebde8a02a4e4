//! Direct optimisation of a probability map against a ground-truth mask.
//!
//! The variable is an unconstrained logit field `θ` with `s = σ(θ)`; gradients
//! flow through the sigmoid as `∂L/∂θ_v = ∂L/∂s_v · s_v (1 - s_v)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::loss::{CompositeLoss, LossDocument, TermValue};
use crate::metrics::{dsc, lesion_metrics, Connectivity, LesionMetrics};
use crate::phantom::{generate_phantom, perturb, PerturbSpec, PhantomSpec};
use crate::volume::{binarize, BinaryMask, ProbabilityMap, ScalarField};

/// Learning-rate multiplier applied from `fraction` of training onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Milestone {
    pub fraction: f64,
    pub multiplier: f64,
}

impl From<(f64, f64)> for Milestone {
    fn from((fraction, multiplier): (f64, f64)) -> Self {
        Self { fraction, multiplier }
    }
}

impl From<Milestone> for (f64, f64) {
    fn from(m: Milestone) -> Self {
        (m.fraction, m.multiplier)
    }
}

/// Halving at 50 %, 70 % and 90 % of training.
pub fn default_milestones() -> Vec<Milestone> {
    vec![(0.5, 0.5).into(), (0.7, 0.5).into(), (0.9, 0.5).into()]
}

/// `base_lr` times every multiplier whose fraction is `<= progress`.
pub fn lr_at(progress: f64, base_lr: f64, milestones: &[Milestone]) -> f64 {
    milestones
        .iter()
        .filter(|m| m.fraction <= progress)
        .fold(base_lr, |lr, m| lr * m.multiplier)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    Gd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl UpdateRule {
    pub fn adam() -> Self {
        UpdateRule::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for UpdateRule {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    LogitZero,
    LogitNoise {
        seed: u64,
        std: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub loss: CompositeLoss,
    pub steps: usize,
    pub base_lr: f64,
    pub rule: UpdateRule,
    pub lr_milestones: Vec<Milestone>,
    pub init: Init,
    pub record_every: usize,
}

/// Logit-space default learning rate.
pub const DEFAULT_LR: f64 = 0.1;

impl OptimConfig {
    pub fn new(loss: CompositeLoss, steps: usize) -> Self {
        Self {
            loss,
            steps,
            base_lr: DEFAULT_LR,
            rule: UpdateRule::default(),
            lr_milestones: default_milestones(),
            init: Init::default(),
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.record_every == 0 {
            return Err(GeoError::Parameter("steps and record_every must be positive".into()));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(GeoError::Parameter(format!(
                "base_lr must be > 0, got {}",
                self.base_lr
            )));
        }
        let sorted = self.lr_milestones.windows(2).all(|w| w[0].fraction <= w[1].fraction);
        let in_range = self
            .lr_milestones
            .iter()
            .all(|m| m.fraction > 0.0 && m.fraction <= 1.0 && m.multiplier.is_finite());
        if !sorted || !in_range {
            return Err(GeoError::Parameter(
                "milestones must be sorted with fractions in (0, 1]".into(),
            ));
        }
        if let Init::LogitNoise { std, .. } = self.init {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(GeoError::Parameter(format!("init noise std must be >= 0, got {std}")));
            }
        }
        Ok(())
    }
}

/// JSON form of [`OptimConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimDocument {
    pub loss: LossDocument,
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub base_lr: f64,
    #[serde(default)]
    pub optimizer: UpdateRule,
    #[serde(default = "default_milestones")]
    pub lr_milestones: Vec<Milestone>,
    #[serde(default)]
    pub init: Init,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_lr() -> f64 {
    DEFAULT_LR
}

fn one() -> usize {
    1
}

impl OptimDocument {
    pub fn to_config(&self) -> Result<OptimConfig> {
        let cfg = OptimConfig {
            loss: self.loss.to_composite()?,
            steps: self.steps,
            base_lr: self.base_lr,
            rule: self.optimizer,
            lr_milestones: self.lr_milestones.clone(),
            init: self.init,
            record_every: self.record_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub terms: Vec<TermValue>,
    /// DSC of `binarize(s, 0.5)` against the ground truth.
    pub dsc: f64,
    /// Euclidean norm of `∂L/∂θ`.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Every `record_every`-th step from 0, then the state after the last update.
    pub records: Vec<StepRecord>,
    pub final_map: ProbabilityMap,
}

impl Trajectory {
    /// `step,loss,<term names>,dsc,grad_norm`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss");
        if let Some(first) = self.records.first() {
            for t in &first.terms {
                out.push(',');
                out.push_str(&t.name);
            }
        }
        out.push_str(",dsc,grad_norm\n");
        for r in &self.records {
            out.push_str(&format!("{},{}", r.step, r.loss));
            for t in &r.terms {
                out.push_str(&format!(",{}", t.value));
            }
            out.push_str(&format!(",{},{}\n", r.dsc, r.grad_norm));
        }
        out
    }

    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("at least one record")
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn to_probability(theta: &ScalarField) -> Result<ProbabilityMap> {
    ProbabilityMap::new(*theta.grid(), theta.data().iter().map(|&t| sigmoid(t)).collect())
}

/// Loss value, term values and `∂L/∂θ` at logits `theta`.
pub fn logit_objective(
    loss: &CompositeLoss,
    theta: &ScalarField,
    g: &BinaryMask,
    progress: f64,
) -> Result<(f64, Vec<TermValue>, ScalarField)> {
    let s = to_probability(theta)?;
    let r = loss.prepare(&s, g, false)?.evaluate(&s, progress)?;
    let mut grad = r.total.grad;
    grad.data_mut()
        .iter_mut()
        .zip(s.data())
        .for_each(|(d, &p)| *d *= p * (1.0 - p));
    Ok((r.total.value, r.terms, grad))
}

fn initial_logits(g: &BinaryMask, init: Init, start: Option<&ProbabilityMap>) -> Result<ScalarField> {
    let grid = *g.grid();
    let mut theta = match start {
        Some(s) => {
            grid.ensure_same(s.grid())?;
            let data = s
                .data()
                .iter()
                .map(|&p| {
                    let p = p.clamp(1e-4, 1.0 - 1e-4);
                    (p / (1.0 - p)).ln()
                })
                .collect();
            ScalarField::new(grid, data)?
        }
        None => ScalarField::zeros(grid),
    };
    if let Init::LogitNoise { seed, std } = init {
        if std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, std).map_err(|e| GeoError::Parameter(e.to_string()))?;
            theta.data_mut().iter_mut().for_each(|t| *t += normal.sample(&mut rng));
        }
    }
    Ok(theta)
}

pub fn optimize_map(g: &BinaryMask, cfg: &OptimConfig) -> Result<Trajectory> {
    optimize_from(g, cfg, None)
}

/// Like [`optimize_map`], starting from the logits of `start` (clamped to
/// `[1e-4, 1 - 1e-4]`) with the configured noise added on top.
pub fn optimize_from(g: &BinaryMask, cfg: &OptimConfig, start: Option<&ProbabilityMap>) -> Result<Trajectory> {
    cfg.validate()?;
    if cfg.loss.needs_boundary() && !g.has_boundary() {
        return Err(GeoError::NoBoundary);
    }
    let mut theta = initial_logits(g, cfg.init, start)?;
    let n = theta.data().len();
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; n];
    let mut records = Vec::new();

    let record = |step: usize,
                  theta: &ScalarField,
                  value: f64,
                  terms: Vec<TermValue>,
                  grad: &ScalarField|
     -> Result<StepRecord> {
        let s = to_probability(theta)?;
        Ok(StepRecord {
            step,
            loss: value,
            terms,
            dsc: dsc(&binarize(&s, 0.5)?, g)?,
            grad_norm: grad.norm(),
        })
    };
    let eval = |step: usize, theta: &ScalarField, progress: f64| {
        logit_objective(&cfg.loss, theta, g, progress).map_err(|e| match e {
            GeoError::NonFinite { context, voxel } => GeoError::Diverged {
                step,
                term: context,
                voxel,
            },
            other => other,
        })
    };

    for step in 0..cfg.steps {
        let progress = step as f64 / cfg.steps as f64;
        let (value, terms, grad) = eval(step, &theta, progress)?;
        if step % cfg.record_every == 0 {
            records.push(record(step, &theta, value, terms, &grad)?);
        }
        let lr = lr_at(progress, cfg.base_lr, &cfg.lr_milestones);
        match cfg.rule {
            UpdateRule::Gd => {
                for (t, d) in theta.data_mut().iter_mut().zip(grad.data()) {
                    *t -= lr * d;
                }
            }
            UpdateRule::Adam { beta1, beta2, eps } => {
                let k = (step + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(k), 1.0 - beta2.powi(k));
                for i in 0..n {
                    let d = grad.data()[i];
                    m1[i] = beta1 * m1[i] + (1.0 - beta1) * d;
                    m2[i] = beta2 * m2[i] + (1.0 - beta2) * d * d;
                    theta.data_mut()[i] -= lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
                }
            }
        }
        if let Some(voxel) = theta.first_non_finite() {
            return Err(GeoError::Diverged {
                step,
                term: "logits".into(),
                voxel,
            });
        }
    }

    let (value, terms, grad) = eval(cfg.steps, &theta, 1.0)?;
    records.push(record(cfg.steps, &theta, value, terms, &grad)?);
    Ok(Trajectory {
        records,
        final_map: to_probability(&theta)?,
    })
}

/// Paired run of two losses on perturbed phantoms: every seed generates a
/// phantom, perturbs it into a starting map and optimises each loss from the
/// same noisy start for the same budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub seeds: Vec<u64>,
    pub phantom: PhantomSpec,
    pub perturb: PerturbSpec,
    pub init_noise_std: f64,
    pub steps: usize,
    pub base_lr: f64,
}

impl Default for ComparisonSpec {
    fn default() -> Self {
        Self {
            seeds: (0..20).collect(),
            phantom: PhantomSpec::default(),
            perturb: PerturbSpec {
                blur_radius_mm: 1.0,
                noise_std: 0.1,
                drop_fraction: 0.3,
                spurious_count: 2,
                ..PerturbSpec::default()
            },
            init_noise_std: 0.5,
            steps: 20,
            base_lr: DEFAULT_LR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    /// Lesion F1 of the starting map at threshold 0.5.
    pub start_lf1: f64,
    pub lf1_a: f64,
    pub lf1_b: f64,
    pub dsc_a: f64,
    pub dsc_b: f64,
}

/// Phantom and perturbation seeds are both taken from `seeds`; the init noise
/// uses the seed too, so `a` and `b` start from identical logits.
pub fn compare_on_phantoms(a: &CompositeLoss, b: &CompositeLoss, spec: &ComparisonSpec) -> Result<Vec<ComparisonRow>> {
    let metrics_at = |s: &ProbabilityMap, g: &BinaryMask| -> Result<LesionMetrics> {
        lesion_metrics(&binarize(s, 0.5)?, g, Connectivity::default())
    };
    spec.seeds
        .iter()
        .map(|&seed| {
            let gt = generate_phantom(&PhantomSpec {
                seed,
                ..spec.phantom.clone()
            })?
            .mask;
            let start = perturb(
                &gt,
                &PerturbSpec {
                    seed,
                    ..spec.perturb.clone()
                },
            )?;
            let run = |loss: &CompositeLoss| -> Result<LesionMetrics> {
                let cfg = OptimConfig {
                    base_lr: spec.base_lr,
                    init: Init::LogitNoise {
                        seed,
                        std: spec.init_noise_std,
                    },
                    record_every: spec.steps,
                    ..OptimConfig::new(loss.clone(), spec.steps)
                };
                metrics_at(&optimize_from(&gt, &cfg, Some(&start))?.final_map, &gt)
            };
            let (ma, mb) = (run(a)?, run(b)?);
            Ok(ComparisonRow {
                seed,
                start_lf1: metrics_at(&start, &gt)?.lf1,
                lf1_a: ma.lf1,
                lf1_b: mb.lf1,
                dsc_a: ma.dsc,
                dsc_b: mb.dsc,
            })
        })
        .collect()
}

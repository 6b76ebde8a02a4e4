use log::warn;

use super::{sign0, Gamma, GeoLossSpec, LossResult, Psi, Theta, BCE_EPS};
use crate::error::{GeoError, Result};
use crate::transform::{edt, fog, fog_adjoint, sog, sog_adjoint, DistanceMap, OperatorKind, VectorField};
use crate::volume::{binarize, pairwise_sum_by, BinaryMask, ProbabilityMap, ScalarField};

/// A loss bound to a ground truth with every `s`-independent or stopped
/// quantity precomputed.
///
/// With `freeze` set, the sign patterns of `|·|` terms are also taken from the
/// preparation point, which turns the loss into the smooth branch the analytic
/// subgradient describes. Finite-difference checks evaluate that branch.
#[derive(Debug, Clone)]
pub struct PreparedLoss<'a> {
    spec: GeoLossSpec,
    g: &'a BinaryMask,
    g_values: Vec<f64>,
    dtm_g: Option<DistanceMap>,
    dtm_s: Option<DistanceMap>,
    fog_g: Option<VectorField>,
    lap_g: Option<ScalarField>,
    theta_sign: Option<Vec<f64>>,
    psi_sign: Option<Vec<f64>>,
}

impl<'a> PreparedLoss<'a> {
    pub fn new(spec: &GeoLossSpec, s: &ProbabilityMap, g: &'a BinaryMask, freeze: bool) -> Result<Self> {
        s.grid().ensure_same(g.grid())?;
        let op = spec.operator();
        let mut p = PreparedLoss {
            spec: *spec,
            g,
            g_values: g.values(),
            dtm_g: None,
            dtm_s: None,
            fog_g: None,
            lap_g: None,
            theta_sign: None,
            psi_sign: None,
        };
        match spec.psi() {
            Psi::One => {}
            Psi::DtmG => {
                let signed = op.map(|o| o.kind) == Some(OperatorKind::DtmSigned);
                p.dtm_g = Some(edt(g, signed)?);
            }
            Psi::DtmSqSum => {
                p.dtm_g = Some(edt(g, false)?);
                p.dtm_s = prediction_distance(s)?;
            }
            Psi::FogSqDiff => {
                let op = op.expect("validated");
                let axes = op.kind.fog_axes().expect("validated");
                p.fog_g = Some(fog(&g.to_field(), axes, op.derivative())?);
            }
            Psi::SogG | Psi::SogGPlusS => {
                let op = op.expect("validated");
                p.lap_g = Some(sog(&g.to_field(), op.boundary));
            }
        }
        if freeze {
            if spec.theta() == Theta::AbsDiff {
                p.theta_sign = Some(s.data().iter().zip(&p.g_values).map(|(a, b)| sign0(a - b)).collect());
            }
            if spec.magnitude() {
                let w = p.laplacian_weight(s);
                p.psi_sign = Some(w.iter().map(|&x| sign0(x)).collect());
            }
        }
        Ok(p)
    }

    pub fn spec(&self) -> &GeoLossSpec {
        &self.spec
    }

    /// Laplacian weight before any magnitude: `φ(g)` or `φ(g) + φ(s)`.
    fn laplacian_weight(&self, s: &ProbabilityMap) -> Vec<f64> {
        let lap_g = self.lap_g.as_ref().expect("laplacian term");
        match self.spec.psi() {
            Psi::SogGPlusS => {
                let boundary = self.spec.operator().expect("validated").boundary;
                let lap_s = sog(&s.to_field(), boundary);
                lap_g.data().iter().zip(lap_s.data()).map(|(a, b)| a + b).collect()
            }
            _ => lap_g.data().to_vec(),
        }
    }

    pub fn evaluate(&self, s: &ProbabilityMap) -> Result<LossResult> {
        let grid = *s.grid();
        grid.ensure_same(self.g.grid())?;
        let n = grid.voxel_count();
        let sv = s.data();
        let gv = &self.g_values;

        // Θ and ∂Θ/∂s_v
        let mut theta = vec![0.0; n];
        let mut dtheta = vec![0.0; n];
        for i in 0..n {
            let (t, dt) = match self.spec.theta() {
                Theta::Bce => {
                    let c = sv[i].clamp(BCE_EPS, 1.0 - BCE_EPS);
                    let t = -(gv[i] * c.ln() + (1.0 - gv[i]) * (1.0 - c).ln());
                    (t, (c - gv[i]) / (c * (1.0 - c)))
                }
                Theta::DiceNum => (sv[i] + gv[i] - 2.0 * sv[i] * gv[i], 1.0 - 2.0 * gv[i]),
                Theta::SOnly => (sv[i], 1.0),
                Theta::SqDiff => {
                    let d = sv[i] - gv[i];
                    (d * d, 2.0 * d)
                }
                Theta::AbsDiff => {
                    let d = sv[i] - gv[i];
                    let sg = match &self.theta_sign {
                        Some(frozen) => frozen[i],
                        None => sign0(d),
                    };
                    (sg * d, sg)
                }
                Theta::One => (1.0, 0.0),
            };
            theta[i] = t;
            dtheta[i] = dt;
        }

        // Ψ, plus Σ_u Θ_u ∂Ψ_u/∂s_v for terms that depend on s
        let mut back: Option<Vec<f64>> = None;
        // per-axis numerators, so a full FOG value is the exact sum of the
        // single-axis values
        let mut axis_parts: Option<Vec<f64>> = None;
        let psi: Vec<f64> = match self.spec.psi() {
            Psi::One => vec![1.0; n],
            Psi::DtmG => self.dtm_g.as_ref().expect("prepared").data().to_vec(),
            Psi::DtmSqSum => {
                let dg = self.dtm_g.as_ref().expect("prepared").data();
                match &self.dtm_s {
                    Some(ds) => dg.iter().zip(ds.data()).map(|(a, b)| a * a + b * b).collect(),
                    None => dg.iter().map(|a| a * a).collect(),
                }
            }
            Psi::FogSqDiff => {
                let op = self.spec.operator().expect("validated");
                let axes = op.kind.fog_axes().expect("validated");
                let r = fog(&s.to_field(), axes, op.derivative())?.sub(self.fog_g.as_ref().expect("prepared"))?;
                let mut psi = vec![0.0; n];
                for (_, c) in r.components() {
                    for (p, x) in psi.iter_mut().zip(c.data()) {
                        *p += x * x;
                    }
                }
                let weighted = VectorField::new(
                    grid,
                    op.derivative(),
                    crate::transform::Axis::ALL.map(|a| {
                        r.component(a).map(|c| {
                            let d = c.data().iter().zip(&theta).map(|(x, t)| 2.0 * t * x).collect();
                            ScalarField::new(grid, d).expect("same grid")
                        })
                    }),
                )?;
                back = Some(fog_adjoint(&weighted, op.derivative())?.into_data());
                axis_parts = Some(
                    r.components()
                        .map(|(_, c)| pairwise_sum_by(n, |i| theta[i] * c.data()[i] * c.data()[i]))
                        .collect(),
                );
                psi
            }
            Psi::SogG | Psi::SogGPlusS => {
                let w = self.laplacian_weight(s);
                let m: Vec<f64> = if self.spec.magnitude() {
                    match &self.psi_sign {
                        Some(frozen) => frozen.clone(),
                        None => w.iter().map(|&x| sign0(x)).collect(),
                    }
                } else {
                    vec![1.0; n]
                };
                if self.spec.psi() == Psi::SogGPlusS {
                    let boundary = self.spec.operator().expect("validated").boundary;
                    let tm = ScalarField::new(grid, theta.iter().zip(&m).map(|(t, s)| t * s).collect())?;
                    back = Some(sog_adjoint(&tm, boundary).into_data());
                }
                w.iter().zip(&m).map(|(x, s)| s * x).collect()
            }
        };

        let numerator = pairwise_sum_by(n, |i| theta[i] * psi[i]);
        let mut d_num: Vec<f64> = (0..n).map(|i| dtheta[i] * psi[i]).collect();
        if let Some(b) = back {
            d_num.iter_mut().zip(b).for_each(|(d, b)| *d += b);
        }

        let name = self.spec.name();
        let (value, grad) = match self.spec.gamma() {
            Gamma::UnitSum => (numerator, d_num),
            Gamma::CardOmega => {
                let nf = n as f64;
                let value = match &axis_parts {
                    Some(parts) => parts.iter().fold(0.0, |acc, p| acc + p / nf),
                    None => numerator / nf,
                };
                (value, d_num.into_iter().map(|d| d / nf).collect())
            }
            Gamma::DiceDen => {
                let den = pairwise_sum_by(n, |i| sv[i] + gv[i]);
                if den == 0.0 {
                    (0.0, vec![0.0; n])
                } else {
                    let den2 = den * den;
                    let grad = d_num.into_iter().map(|d| (d * den - numerator) / den2).collect();
                    (numerator / den, grad)
                }
            }
        };
        LossResult::checked(value, ScalarField::new(grid, grad)?, &name)
    }
}

/// Distance map of `binarize(s, 0.5)`, or `None` (with a warning) when the
/// thresholded prediction has no boundary.
pub(crate) fn prediction_distance(s: &ProbabilityMap) -> Result<Option<DistanceMap>> {
    let b = binarize(s, 0.5)?;
    match edt(&b, false) {
        Ok(d) => Ok(Some(d)),
        Err(GeoError::NoBoundary) => {
            warn!("binarized prediction has no boundary; dropping its distance term");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Evaluates `spec` on `(s, g)` with its analytic gradient.
pub fn geo_eval(spec: &GeoLossSpec, s: &ProbabilityMap, g: &BinaryMask) -> Result<LossResult> {
    PreparedLoss::new(spec, s, g, false)?.evaluate(s)
}

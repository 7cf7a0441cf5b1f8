//! Dyad decision models.
//!
//! Weighted confidence sharing (WCS) decides by the sign of the summed
//! confidence ratios `x₁/σ₁ + x₂/σ₂`, which yields a cumulative-Gaussian dyad
//! curve with
//!
//! ```text
//! b_dyad = (σ₂ b₁ + σ₁ b₂) / (σ₁ + σ₂)
//! σ_dyad = √2 σ₁ σ₂ / (σ₁ + σ₂)        s_dyad = (s₁ + s₂) / √2
//! ```
//!
//! The alternatives are coin flip (CF: conflicts settled at random, a mixture
//! of the two member curves), behaviour-and-feedback (BF: defer to the more
//! sensitive member, implemented at its asymptote) and direct signal sharing
//! (DSS: ideal fusion, `s_dyad = sqrt(s₁² + s₂²)`).

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psychometrics::{CurveFitter, PsychCurve, ResponseTable, CANONICAL_LEVELS};
use crate::trials::Choice;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DyadModel {
    #[serde(rename = "WCS")]
    Wcs,
    #[serde(rename = "CF")]
    Cf,
    #[serde(rename = "BF")]
    Bf,
    #[serde(rename = "DSS")]
    Dss,
}

impl DyadModel {
    pub fn as_str(self) -> &'static str {
        match self {
            DyadModel::Wcs => "WCS",
            DyadModel::Cf => "CF",
            DyadModel::Bf => "BF",
            DyadModel::Dss => "DSS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadPrediction {
    model: DyadModel,
    /// Closed-form dyad curve; `None` for CF, whose prediction is a mixture.
    curve: Option<PsychCurve>,
    members: [PsychCurve; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySample {
    pub delta_c: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadPredictionJson {
    pub model: DyadModel,
    pub b: f64,
    pub sigma: f64,
    pub slope: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<Vec<ProbabilitySample>>,
}

impl DyadPrediction {
    pub fn model(&self) -> DyadModel {
        self.model
    }

    pub fn closed_form(&self) -> Option<&PsychCurve> {
        self.curve.as_ref()
    }

    pub fn members(&self) -> &[PsychCurve; 2] {
        &self.members
    }

    /// Predicted probability of a "second" group response.
    pub fn probability(&self, delta_c: f64) -> f64 {
        match &self.curve {
            Some(c) => c.prob_second(delta_c),
            None => 0.5 * (self.members[0].prob_second(delta_c) + self.members[1].prob_second(delta_c)),
        }
    }

    /// The closed-form curve, or for CF the cumulative Gaussian fitted to the
    /// mixture at the canonical design levels.
    pub fn equivalent_curve(&self) -> Result<PsychCurve> {
        match self.curve {
            Some(c) => Ok(c),
            None => {
                let pts: Vec<(f64, f64)> = CANONICAL_LEVELS
                    .iter()
                    .map(|&l| (l, self.probability(l)))
                    .collect();
                Ok(CurveFitter::default().fit_points(&pts)?.curve)
            }
        }
    }

    pub fn slope(&self) -> Result<f64> {
        Ok(self.equivalent_curve()?.slope())
    }

    pub fn to_json(&self) -> Result<DyadPredictionJson> {
        let c = self.equivalent_curve()?;
        let samples = (self.model == DyadModel::Cf).then(|| {
            CANONICAL_LEVELS
                .iter()
                .map(|&delta_c| ProbabilitySample {
                    delta_c,
                    p: self.probability(delta_c),
                })
                .collect()
        });
        Ok(DyadPredictionJson {
            model: self.model,
            b: c.bias(),
            sigma: c.sigma(),
            slope: c.slope(),
            samples,
        })
    }
}

pub fn wcs_dyad(c1: &PsychCurve, c2: &PsychCurve) -> DyadPrediction {
    let (s1, s2) = (c1.sigma(), c2.sigma());
    let bias = (s2 * c1.bias() + s1 * c2.bias()) / (s1 + s2);
    let sigma = SQRT_2 * s1 * s2 / (s1 + s2);
    DyadPrediction {
        model: DyadModel::Wcs,
        curve: Some(PsychCurve::new(bias, sigma).expect("positive combination of valid curves")),
        members: [*c1, *c2],
    }
}

pub fn wcs_slope(s1: f64, s2: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0) || !s1.is_finite() || !s2.is_finite() {
        return Err(Error::invalid(format!("sensitivities must be positive, got {s1}, {s2}")));
    }
    Ok((s1 + s2) * FRAC_1_SQRT_2)
}

/// Dyad sensitivity relative to the best member, `s_dyad / s_max`, as a
/// function of `s_min / s_max`. Exceeds 1 iff the ratio exceeds `√2 − 1`.
pub fn collective_benefit(ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("sensitivity ratio must lie in (0, 1], got {ratio}")));
    }
    Ok(FRAC_1_SQRT_2 + FRAC_1_SQRT_2 * ratio)
}

/// The collective benefit when the dyad over-weights its more sensitive
/// member by `beta / alpha`; the intercept is unchanged and the slope is
/// scaled by `alpha / beta`.
pub fn biased_wcs_benefit(ratio: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::invalid(format!("weights must be positive, got {alpha}, {beta}")));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid(format!("sensitivity ratio must lie in [0, 1], got {ratio}")));
    }
    Ok(FRAC_1_SQRT_2 + FRAC_1_SQRT_2 * (alpha * ratio) / beta)
}

pub fn cf_dyad(c1: &PsychCurve, c2: &PsychCurve) -> DyadPrediction {
    DyadPrediction {
        model: DyadModel::Cf,
        curve: None,
        members: [*c1, *c2],
    }
}

/// The more sensitive member's curve; ties go to member 1.
pub fn bf_dyad(c1: &PsychCurve, c2: &PsychCurve) -> DyadPrediction {
    let best = if c2.slope() > c1.slope() { c2 } else { c1 };
    DyadPrediction {
        model: DyadModel::Bf,
        curve: Some(*best),
        members: [*c1, *c2],
    }
}

pub fn dss_dyad(c1: &PsychCurve, c2: &PsychCurve) -> DyadPrediction {
    let (v1, v2) = (c1.sigma().powi(2), c2.sigma().powi(2));
    let bias = (v2 * c1.bias() + v1 * c2.bias()) / (v1 + v2);
    let sigma = c1.sigma() * c2.sigma() / (v1 + v2).sqrt();
    DyadPrediction {
        model: DyadModel::Dss,
        curve: Some(PsychCurve::new(bias, sigma).expect("positive combination of valid curves")),
        members: [*c1, *c2],
    }
}

pub fn predict(model: DyadModel, c1: &PsychCurve, c2: &PsychCurve) -> DyadPrediction {
    match model {
        DyadModel::Wcs => wcs_dyad(c1, c2),
        DyadModel::Cf => cf_dyad(c1, c2),
        DyadModel::Bf => bf_dyad(c1, c2),
        DyadModel::Dss => dss_dyad(c1, c2),
    }
}

/// Outcome of the trial-level WCS rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupDecision {
    pub choice: Choice,
    /// The summed confidence was exactly zero and a fair coin decided.
    pub coin_flip: bool,
}

/// "Second" iff `x₁/σ₁ + x₂/σ₂ > 0`; an exact zero is settled by a fair coin
/// from `rng`.
pub fn wcs_group_decision<R: Rng + ?Sized>(
    x1: f64,
    sigma1: f64,
    x2: f64,
    sigma2: f64,
    rng: &mut R,
) -> GroupDecision {
    debug_assert!(sigma1 > 0.0 && sigma2 > 0.0);
    let total = x1 / sigma1 + x2 / sigma2;
    match Choice::from_sign(total) {
        Some(choice) => GroupDecision {
            choice,
            coin_flip: false,
        },
        None => GroupDecision {
            choice: if rng.random_bool(0.5) {
                Choice::Second
            } else {
                Choice::First
            },
            coin_flip: true,
        },
    }
}

pub fn wcs_group_choice<R: Rng + ?Sized>(
    x1: f64,
    sigma1: f64,
    x2: f64,
    sigma2: f64,
    rng: &mut R,
) -> Choice {
    wcs_group_decision(x1, sigma1, x2, sigma2, rng).choice
}

/// Individual and WCS group response tables from one simulated session.
#[derive(Debug, Clone, PartialEq)]
pub struct WcsTables {
    pub members: [ResponseTable; 2],
    pub dyad: ResponseTable,
}

/// Simulates `trials_per_level` trials per level in which both members draw
/// a noisy sample `x ~ N(ΔC + b, σ)`, answer individually by its sign, and
/// the dyad answers by the WCS rule on the same samples.
pub fn simulate_wcs_tables<R: Rng + ?Sized>(
    c1: &PsychCurve,
    c2: &PsychCurve,
    levels: &[f64],
    trials_per_level: u64,
    rng: &mut R,
) -> Result<WcsTables> {
    use rand_distr::{Distribution, StandardNormal};

    if levels.is_empty() || trials_per_level == 0 {
        return Err(Error::invalid("simulation needs levels and at least one trial per level"));
    }
    let mut m1 = Vec::with_capacity(levels.len());
    let mut m2 = Vec::with_capacity(levels.len());
    let mut dyad = Vec::with_capacity(levels.len());
    for &level in levels {
        let (mut k1, mut k2, mut kd) = (0u64, 0u64, 0u64);
        for _ in 0..trials_per_level {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            let x1 = level + c1.bias() + c1.sigma() * z1;
            let x2 = level + c2.bias() + c2.sigma() * z2;
            k1 += (x1 > 0.0) as u64;
            k2 += (x2 > 0.0) as u64;
            kd += (wcs_group_choice(x1, c1.sigma(), x2, c2.sigma(), rng) == Choice::Second) as u64;
        }
        let row = |n_second| crate::psychometrics::LevelCount {
            delta_c: level,
            n_trials: trials_per_level,
            n_second,
        };
        m1.push(row(k1));
        m2.push(row(k2));
        dyad.push(row(kd));
    }
    Ok(WcsTables {
        members: [ResponseTable::new(m1)?, ResponseTable::new(m2)?],
        dyad: ResponseTable::new(dyad)?,
    })
}

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::fits::DyadFits;
use crate::coupling_sim::derive_seed;
use crate::error::{Error, Result};
use crate::group_models::{collective_benefit, simulate_wcs_tables};
use crate::psychometrics::{fit_curve, PsychCurve, CANONICAL_LEVELS};
use crate::stats::{describe, linear_regression, t_test_one_sample, t_test_paired, RegressionResult};

/// Sensitivity ratio above which a dyad is expected to beat its best member.
pub const SIMILARITY_THRESHOLD: f64 = SQRT_2 - 1.0;

/// Slope-determining noise of the better member in sweeps.
const SWEEP_BEST_SIGMA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub ratio: f64,
    pub theory: f64,
    pub simulated_mean: f64,
    pub simulated_se: f64,
    pub fitted_ratio_mean: f64,
    pub fitted_benefit_mean: f64,
    pub repetitions: usize,
    pub trials_per_level: u64,
}

/// Monte-Carlo collective benefit of WCS dyads at each sensitivity ratio.
/// Each repetition simulates a fresh dyad and fits it. The dyad slope is
/// divided by the true `s_max` of the generating curves; dividing by the
/// larger of two noisy member fits biases the benefit low near ratio 1, so
/// that variant is reported separately as `fitted_benefit_mean`.
pub fn benefit_sweep(ratios: &[f64], trials_per_level: u64, repetitions: usize, seed: u64) -> Result<Vec<SweepPoint>> {
    if ratios.is_empty() {
        return Err(Error::invalid("ratio grid is empty"));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::invalid(format!("ratio {r} outside (0, 1]")));
    }
    if repetitions < 2 {
        return Err(Error::invalid("a sweep needs at least 2 repetitions per ratio"));
    }
    if trials_per_level == 0 {
        return Err(Error::invalid("trials per level must be positive"));
    }
    ratios
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let best = PsychCurve::new(0.0, SWEEP_BEST_SIGMA)?;
            let worst = PsychCurve::new(0.0, SWEEP_BEST_SIGMA / ratio)?;
            let reps: Vec<(f64, f64, f64)> = (0..repetitions)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64, rep as u64]));
                    let tables = simulate_wcs_tables(&best, &worst, &CANONICAL_LEVELS, trials_per_level, &mut rng)?;
                    let s1 = fit_curve(&tables.members[0])?.curve.slope();
                    let s2 = fit_curve(&tables.members[1])?.curve.slope();
                    let sd = fit_curve(&tables.dyad)?.curve.slope();
                    Ok((sd / best.slope(), s1.min(s2) / s1.max(s2), sd / s1.max(s2)))
                })
                .collect::<Result<_>>()?;
            let benefits: Vec<f64> = reps.iter().map(|r| r.0).collect();
            let fitted: Vec<f64> = reps.iter().map(|r| r.1).collect();
            let fitted_benefit: Vec<f64> = reps.iter().map(|r| r.2).collect();
            let b = describe(&benefits).expect("repetitions >= 2");
            Ok(SweepPoint {
                ratio,
                theory: collective_benefit(ratio)?,
                simulated_mean: b.mean,
                simulated_se: b.std / (b.n as f64).sqrt(),
                fitted_ratio_mean: describe(&fitted).expect("repetitions >= 2").mean,
                fitted_benefit_mean: describe(&fitted_benefit).expect("repetitions >= 2").mean,
                repetitions,
                trials_per_level,
            })
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(f)))
}

pub fn write_sweep(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
struct SlopeRow {
    dyad: u32,
    s1: f64,
    s2: f64,
    sensitivity_ratio: f64,
    observed_slope: f64,
    wcs_predicted_slope: f64,
    low_confidence: bool,
}

#[derive(Debug, Clone, Serialize)]
struct BenefitRow {
    dyad: u32,
    sensitivity_ratio: f64,
    collective_benefit: f64,
    wcs_benefit: f64,
    similar: bool,
}

#[derive(Debug, Clone, Serialize)]
struct CurveRow {
    panel: &'static str,
    delta_c: f64,
    worst: f64,
    best: f64,
    dyad: f64,
}

fn panel(f: &DyadFits) -> &'static str {
    if f.sensitivity_ratio() > SIMILARITY_THRESHOLD {
        "similar"
    } else {
        "different"
    }
}

/// Benefit regression of observed `s_dyad / s_max` on `s_min / s_max`.
pub fn benefit_regression(fits: &[DyadFits]) -> Result<RegressionResult> {
    let xs: Vec<f64> = fits.iter().map(DyadFits::sensitivity_ratio).collect();
    let ys: Vec<f64> = fits.iter().map(DyadFits::collective_benefit).collect();
    linear_regression(&xs, &ys)
}

/// Writes the figure-data files for a fitted cohort.
pub fn write_report(out: &Path, fits: &[DyadFits], observed: &[[Vec<(f64, f64)>; 3]]) -> Result<Vec<PathBuf>> {
    if fits.len() < 2 {
        return Err(Error::invalid(format!(
            "a cohort report needs at least 2 dyads, got {}",
            fits.len()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();

    let p = out.join("dyad_slopes.csv");
    let mut w = csv_writer(&p)?;
    for f in fits {
        let [s1, s2] = f.slopes();
        w.serialize(SlopeRow {
            dyad: f.dyad,
            s1,
            s2,
            sensitivity_ratio: f.sensitivity_ratio(),
            observed_slope: f.group.curve.slope(),
            wcs_predicted_slope: f.wcs_predicted_slope()?,
            low_confidence: f.low_confidence(),
        })?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    written.push(p);

    let p = out.join("benefit_points.csv");
    let mut w = csv_writer(&p)?;
    for f in fits {
        w.serialize(BenefitRow {
            dyad: f.dyad,
            sensitivity_ratio: f.sensitivity_ratio(),
            collective_benefit: f.collective_benefit(),
            wcs_benefit: collective_benefit(f.sensitivity_ratio())?,
            similar: panel(f) == "similar",
        })?;
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    written.push(p);

    // averaged fitted curves and observed proportions, per panel
    let p = out.join("mean_curves.csv");
    let mut w = csv_writer(&p)?;
    let p_points = out.join("mean_curve_points.csv");
    let mut wp = csv_writer(&p_points)?;
    for name in ["similar", "different"] {
        let idx: Vec<usize> = (0..fits.len()).filter(|&i| panel(&fits[i]) == name).collect();
        if idx.is_empty() {
            continue;
        }
        let n = idx.len() as f64;
        for step in -60..=60 {
            let d = step as f64 * 0.25;
            let avg = |pick: &dyn Fn(&DyadFits) -> PsychCurve| {
                idx.iter().map(|&i| pick(&fits[i]).prob_second(d)).sum::<f64>() / n
            };
            w.serialize(CurveRow {
                panel: name,
                delta_c: d,
                worst: avg(&|f| f.members[f.worst_member()].curve),
                best: avg(&|f| f.members[1 - f.worst_member()].curve),
                dyad: avg(&|f| f.group.curve),
            })?;
        }
        for &level in &CANONICAL_LEVELS {
            let avg = |which: &dyn Fn(usize) -> usize| {
                let vals: Vec<f64> = idx
                    .iter()
                    .filter_map(|&i| {
                        observed[i][which(i)]
                            .iter()
                            .find(|(d, _)| *d == level)
                            .map(|&(_, p)| p)
                    })
                    .collect();
                describe(&vals).map_or(f64::NAN, |s| s.mean)
            };
            wp.serialize(CurveRow {
                panel: name,
                delta_c: level,
                worst: avg(&|i| fits[i].worst_member()),
                best: avg(&|i| 1 - fits[i].worst_member()),
                dyad: avg(&|_| 2),
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(&p, e))?;
    wp.flush().map_err(|e| Error::io(&p_points, e))?;
    written.push(p);
    written.push(p_points);

    let benefits = |similar: bool| -> Vec<f64> {
        fits.iter()
            .filter(|f| (panel(f) == "similar") == similar)
            .map(DyadFits::collective_benefit)
            .collect()
    };
    let as_json = |r: Result<_>| match r {
        Ok(v) => serde_json::to_value::<crate::stats::TTestResult>(v).unwrap_or_default(),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let observed_slopes: Vec<f64> = fits.iter().map(|f| f.group.curve.slope()).collect();
    let predicted: Vec<f64> = fits.iter().map(|f| f.wcs_predicted_slope()).collect::<Result<_>>()?;
    let (regression, reason) = match benefit_regression(fits) {
        Ok(r) => (json!(r), None),
        Err(e) => (serde_json::Value::Null, Some(e.to_string())),
    };
    let doc = json!({
        "n_dyads": fits.len(),
        "regression": regression,
        "regression_unavailable": reason,
        "theory": { "slope": FRAC_1_SQRT_2, "intercept": FRAC_1_SQRT_2 },
        "reference_human_value": "slope 0.64 ± 0.13, intercept 0.66 ± 0.09, R²=0.62, F(1,17)=24.8",
        "benefit_vs_one": {
            "similar": as_json(t_test_one_sample(&benefits(true), 1.0)),
            "different": as_json(t_test_one_sample(&benefits(false), 1.0)),
            "reference_human_value": "similar t(13)=3.94, different t(4)=-9.89",
        },
        "observed_vs_wcs_slope": {
            "paired": as_json(t_test_paired(&observed_slopes, &predicted)),
            "reference_human_value": "t(17)=0.51, p=0.62",
        },
    });
    let p = out.join("benefit_regression.json");
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}

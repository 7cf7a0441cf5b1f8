//! Cumulative-Gaussian psychometric curves.
//!
//! A curve gives the probability of reporting the second interval as a
//! function of the signed contrast difference `ΔC`:
//! `P(ΔC) = H((ΔC + b) / σ)`. Its maximum slope `s = 1 / sqrt(2π σ²)` is the
//! sensitivity used throughout the dyad models.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{Bound, NelderMead};
use crate::special::{phi, probit};

/// The contrast differences used in the experiment, ascending.
pub const CANONICAL_LEVELS: [f64; 8] = [-15.0, -7.0, -3.5, -1.5, 1.5, 3.5, 7.0, 15.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsychCurve {
    bias: f64,
    sigma: f64,
}

impl PsychCurve {
    pub fn new(bias: f64, sigma: f64) -> Result<Self> {
        if !bias.is_finite() {
            return Err(Error::invalid(format!("bias must be finite, got {bias}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { bias, sigma })
    }

    pub fn from_slope(bias: f64, slope: f64) -> Result<Self> {
        Self::new(bias, sigma_from_slope(slope)?)
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Probability of choosing the second interval.
    pub fn prob_second(&self, delta_c: f64) -> f64 {
        phi((delta_c + self.bias) / self.sigma)
    }

    /// Maximum slope (sensitivity).
    pub fn slope(&self) -> f64 {
        slope(self)
    }
}

pub fn prob_second(curve: &PsychCurve, delta_c: f64) -> f64 {
    curve.prob_second(delta_c)
}

pub fn slope(curve: &PsychCurve) -> f64 {
    1.0 / (2.0 * PI * curve.sigma * curve.sigma).sqrt()
}

pub fn sigma_from_slope(s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid(format!("slope must be positive, got {s}")));
    }
    Ok(1.0 / (s * (2.0 * PI).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub delta_c: f64,
    pub n_trials: u64,
    pub n_second: u64,
}

impl LevelCount {
    pub fn proportion(&self) -> f64 {
        self.n_second as f64 / self.n_trials as f64
    }
}

/// Binomial response counts per contrast level, sorted by level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResponseTable {
    rows: Vec<LevelCount>,
}

impl ResponseTable {
    /// Sorts rows by level and validates them.
    pub fn new(mut rows: Vec<LevelCount>) -> Result<Self> {
        rows.sort_by(|a, b| a.delta_c.total_cmp(&b.delta_c));
        for r in &rows {
            if !r.delta_c.is_finite() {
                return Err(Error::invalid("contrast level must be finite"));
            }
            if r.n_trials == 0 {
                return Err(Error::invalid(format!("level {} has no trials", r.delta_c)));
            }
            if r.n_second > r.n_trials {
                return Err(Error::invalid(format!(
                    "level {}: {} second-interval responses out of {} trials",
                    r.delta_c, r.n_second, r.n_trials
                )));
            }
        }
        if rows.windows(2).any(|w| w[0].delta_c == w[1].delta_c) {
            return Err(Error::invalid("duplicate contrast level"));
        }
        Ok(Self { rows })
    }

    /// Builds a table by tallying individual binary responses.
    pub fn from_responses<I>(responses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, bool)>,
    {
        let mut rows: Vec<LevelCount> = Vec::new();
        for (level, second) in responses {
            match rows.iter_mut().find(|r| r.delta_c == level) {
                Some(r) => {
                    r.n_trials += 1;
                    r.n_second += second as u64;
                }
                None => rows.push(LevelCount {
                    delta_c: level,
                    n_trials: 1,
                    n_second: second as u64,
                }),
            }
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[LevelCount] {
        &self.rows
    }

    pub fn levels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta_c).collect()
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.proportion()).collect()
    }

    pub fn total_trials(&self) -> u64 {
        self.rows.iter().map(|r| r.n_trials).sum()
    }

    /// CSV with header `delta_c,n_trials,n_second`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<response table>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<LevelCount>, _>>()?;
        Self::new(rows)
    }
}

/// Draws `trials_per_level` binomial responses at every level.
pub fn simulate_responses<R: Rng + ?Sized>(
    curve: &PsychCurve,
    levels: &[f64],
    trials_per_level: u64,
    rng: &mut R,
) -> Result<ResponseTable> {
    if levels.is_empty() {
        return Err(Error::invalid("simulate_responses needs at least one level"));
    }
    if trials_per_level == 0 {
        return Err(Error::invalid("trials_per_level must be at least 1"));
    }
    let rows = levels
        .iter()
        .map(|&delta_c| {
            let p = curve.prob_second(delta_c);
            let n_second = Binomial::new(trials_per_level, p)
                .map_err(|e| Error::invalid(format!("binomial({trials_per_level}, {p}): {e}")))?
                .sample(rng);
            Ok(LevelCount {
                delta_c,
                n_trials: trials_per_level,
                n_second,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ResponseTable::new(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub curve: PsychCurve,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// JSON shape of a fit: `{b, sigma, slope, sse, converged}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub b: f64,
    pub sigma: f64,
    pub slope: f64,
    pub sse: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn summary(&self) -> FitSummary {
        FitSummary {
            b: self.curve.bias(),
            sigma: self.curve.sigma(),
            slope: self.curve.slope(),
            sse: self.sse,
            converged: self.converged,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.summary()).expect("fit summary serializes")
    }
}

/// Unweighted least-squares fit of a cumulative Gaussian to observed
/// proportions, by multi-start Nelder–Mead over `(b, ln σ)`.
#[derive(Debug, Clone)]
pub struct CurveFitter {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_starts: Vec<f64>,
    pub bias_limit: f64,
    pub diameter_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CurveFitter {
    fn default() -> Self {
        Self {
            sigma_min: 0.05,
            sigma_max: 100.0,
            sigma_starts: vec![1.0, 3.0, 8.0, 20.0],
            bias_limit: 1000.0,
            diameter_tolerance: 1e-9,
            max_iterations: 2000,
        }
    }
}

impl CurveFitter {
    pub fn fit(&self, table: &ResponseTable) -> Result<FitResult> {
        let points: Vec<(f64, f64)> = table
            .rows()
            .iter()
            .map(|r| (r.delta_c, r.proportion()))
            .collect();
        self.fit_points(&points)
    }

    /// Fits `(level, proportion)` pairs; levels need not be sorted.
    pub fn fit_points(&self, points: &[(f64, f64)]) -> Result<FitResult> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate contrast level"));
        }
        if pts.len() < 3 {
            return Err(Error::invalid(format!(
                "curve fitting needs at least 3 distinct levels, got {}",
                pts.len()
            )));
        }
        if pts.iter().any(|&(l, p)| !l.is_finite() || !(0.0..=1.0).contains(&p)) {
            return Err(Error::invalid("levels must be finite and proportions in [0, 1]"));
        }

        let sse_of = |bias: f64, sigma: f64| -> f64 {
            pts.iter()
                .map(|&(l, p)| {
                    let r = p - phi((l + bias) / sigma);
                    r * r
                })
                .sum()
        };

        let first = pts[0].1;
        if pts.iter().all(|&(_, p)| p == first) {
            // Flat data: no finite curve fits better than a maximally wide one
            // centered so that it reproduces the common proportion.
            let sigma = self.sigma_max;
            let mean_level = pts.iter().map(|&(l, _)| l).sum::<f64>() / pts.len() as f64;
            let z = probit(first.clamp(1e-3, 1.0 - 1e-3))?;
            let bias = (sigma * z - mean_level).clamp(-self.bias_limit, self.bias_limit);
            let curve = PsychCurve::new(bias, sigma)?;
            return Ok(FitResult {
                curve,
                sse: sse_of(bias, sigma),
                converged: false,
                iterations: 0,
            });
        }

        let bias0 = initial_bias(&pts).clamp(-self.bias_limit, self.bias_limit);
        let (ln_lo, ln_hi) = (self.sigma_min.ln(), self.sigma_max.ln());
        let nm = NelderMead::new(vec![1.0, 0.3])
            .with_bounds(vec![
                Bound::new(-self.bias_limit, self.bias_limit),
                Bound::new(ln_lo, ln_hi),
            ])
            .with_tolerance(self.diameter_tolerance, self.max_iterations);
        let objective = |x: &[f64]| sse_of(x[0], x[1].exp());

        let mut best = None::<crate::simplex::Minimum>;
        let mut iterations = 0;
        for &s0 in &self.sigma_starts {
            let m = nm.minimize(objective, &[bias0, s0.clamp(self.sigma_min, self.sigma_max).ln()]);
            iterations += m.iterations;
            if best.as_ref().is_none_or(|b| m.value < b.value) {
                best = Some(m);
            }
        }
        let start = best
            .map(|b| b.x)
            .unwrap_or_else(|| vec![bias0, 1.0f64.clamp(ln_lo, ln_hi)]);
        // final restart from the best vertex guards against a collapsed simplex
        let polished = nm.minimize(objective, &start);
        iterations += polished.iterations;

        let sigma = polished.x[1].exp().clamp(self.sigma_min, self.sigma_max);
        Ok(FitResult {
            curve: PsychCurve::new(polished.x[0], sigma)?,
            sse: polished.value.max(0.0),
            converged: polished.converged,
            iterations,
        })
    }
}

/// Bias at which the empirical proportion crosses one half, by linear
/// interpolation between neighbouring levels.
fn initial_bias(pts: &[(f64, f64)]) -> f64 {
    for w in pts.windows(2) {
        let ((l0, p0), (l1, p1)) = (w[0], w[1]);
        if (p0 - 0.5) * (p1 - 0.5) <= 0.0 && p0 != p1 {
            let crossing = l0 + (0.5 - p0) * (l1 - l0) / (p1 - p0);
            return -crossing;
        }
    }
    let nearest = pts
        .iter()
        .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
        .expect("non-empty");
    -nearest.0
}

pub fn fit_curve(table: &ResponseTable) -> Result<FitResult> {
    CurveFitter::default().fit(table)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn noiseless(curve: &PsychCurve, levels: &[f64]) -> Vec<(f64, f64)> {
        levels.iter().map(|&l| (l, curve.prob_second(l))).collect()
    }

    #[test]
    fn prob_second_examples() {
        let c = PsychCurve::new(0.0, 1.5).unwrap();
        assert_eq!(c.prob_second(0.0), 0.5);
        assert!((c.prob_second(1.5) - 0.841_344_746_068_542_9).abs() < 1e-15);
        let c = PsychCurve::new(2.0, 7.3).unwrap();
        assert_eq!(c.prob_second(-2.0), 0.5);
        // positive bias favours the second interval
        assert!(c.prob_second(0.0) > 0.5);
    }

    #[test]
    fn invalid_sigma_rejected() {
        assert!(PsychCurve::new(0.0, 0.0).is_err());
        assert!(PsychCurve::new(0.0, -1.0).is_err());
        assert!(PsychCurve::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn slope_examples() {
        let root_2pi = (2.0 * PI).sqrt();
        assert!((PsychCurve::new(0.0, 1.0 / root_2pi).unwrap().slope() - 1.0).abs() < 1e-15);
        assert!((PsychCurve::new(0.0, 2.0 / root_2pi).unwrap().slope() - 0.5).abs() < 1e-15);
        // 0.07978845608028653558798921
        assert!((PsychCurve::new(0.0, 5.0).unwrap().slope() - 0.079_788_456_080_286_54).abs() < 1e-16);
    }

    #[test]
    fn sigma_from_slope_examples() {
        assert!((sigma_from_slope(1.0).unwrap() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let s = PsychCurve::new(0.0, 3.0).unwrap().slope();
        assert!((sigma_from_slope(s).unwrap() - 3.0).abs() < 1e-12);
        assert!(sigma_from_slope(0.0).is_err());
        assert!(sigma_from_slope(-2.0).is_err());
    }

    #[test]
    fn step_limit_responses() {
        let c = PsychCurve::new(0.0, 1e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = simulate_responses(&c, &[-15.0, 15.0], 100, &mut rng).unwrap();
        assert_eq!(t.rows()[0].n_second, 0);
        assert_eq!(t.rows()[1].n_second, 100);
    }

    #[test]
    fn center_proportion_concentrates() {
        let c = PsychCurve::new(0.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = simulate_responses(&c, &[0.0], 1_000_000, &mut rng).unwrap();
        // 3 sigma binomial bound: 3 * sqrt(0.25 / 1e6) = 0.0015
        assert!((t.rows()[0].proportion() - 0.5).abs() < 0.002);
    }

    #[test]
    fn simulation_is_seed_deterministic() {
        let c = PsychCurve::new(0.3, 4.0).unwrap();
        let a = simulate_responses(&c, &CANONICAL_LEVELS, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = simulate_responses(&c, &CANONICAL_LEVELS, 50, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulate_rejects_empty_levels() {
        let c = PsychCurve::new(0.0, 1.0).unwrap();
        assert!(simulate_responses(&c, &[], 10, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        assert!(simulate_responses(&c, &[1.0], 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn table_validation() {
        let row = |d, n, k| LevelCount { delta_c: d, n_trials: n, n_second: k };
        assert!(ResponseTable::new(vec![row(1.0, 5, 6)]).is_err());
        assert!(ResponseTable::new(vec![row(1.0, 0, 0)]).is_err());
        assert!(ResponseTable::new(vec![row(1.0, 5, 1), row(1.0, 5, 2)]).is_err());
        let t = ResponseTable::new(vec![row(2.0, 5, 1), row(-1.0, 5, 2)]).unwrap();
        assert_eq!(t.levels(), vec![-1.0, 2.0]);
    }

    #[test]
    fn table_csv_round_trip() {
        let c = PsychCurve::new(0.5, 5.0).unwrap();
        let t = simulate_responses(&c, &CANONICAL_LEVELS, 40, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("delta_c,n_trials,n_second\n-15.0,40,"));
        assert_eq!(ResponseTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn noiseless_fit_recovers_parameters() {
        let truth = PsychCurve::new(0.5, 5.0).unwrap();
        let fit = CurveFitter::default().fit_points(&noiseless(&truth, &CANONICAL_LEVELS)).unwrap();
        assert!(fit.converged);
        assert!((fit.curve.bias() - 0.5).abs() < 1e-6);
        assert!((fit.curve.sigma() - 5.0).abs() < 1e-6);
        assert!(fit.sse < 1e-20);
    }

    #[test]
    fn binomial_fit_recovers_parameters() {
        let truth = PsychCurve::new(0.0, 5.0).unwrap();
        let t = simulate_responses(&truth, &CANONICAL_LEVELS, 2000, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
        let fit = fit_curve(&t).unwrap();
        assert!(fit.curve.bias().abs() < 0.2);
        assert!((fit.curve.sigma() / 5.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn fit_needs_three_levels() {
        let row = |d, k| LevelCount { delta_c: d, n_trials: 10, n_second: k };
        let t = ResponseTable::new(vec![row(-1.0, 2), row(1.0, 8)]).unwrap();
        assert!(matches!(fit_curve(&t), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_table_is_flagged() {
        let row = |d| LevelCount { delta_c: d, n_trials: 10, n_second: 10 };
        let t = ResponseTable::new(CANONICAL_LEVELS.iter().map(|&d| row(d)).collect()).unwrap();
        let fit = fit_curve(&t).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.curve.sigma(), 100.0);
        assert!(fit.sse >= 0.0);

        let half = |d| LevelCount { delta_c: d, n_trials: 10, n_second: 5 };
        let t = ResponseTable::new(CANONICAL_LEVELS.iter().map(|&d| half(d)).collect()).unwrap();
        let fit = fit_curve(&t).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.curve.sigma(), 100.0);
        assert!(fit.curve.bias().abs() < 1e-12);
        assert!(fit.sse < 0.01);
    }

    #[test]
    fn fit_summary_json_shape() {
        let truth = PsychCurve::new(0.0, 2.0).unwrap();
        let fit = CurveFitter::default().fit_points(&noiseless(&truth, &CANONICAL_LEVELS)).unwrap();
        let v = fit.to_json();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in ["b", "sigma", "slope", "sse", "converged"] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
    }

    #[test]
    fn initial_bias_interpolates_half_crossing() {
        let pts = [(-2.0, 0.2), (0.0, 0.4), (2.0, 0.8)];
        assert!((initial_bias(&pts) - (-0.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn slope_sigma_round_trip(log_s in -3.0f64..3.0) {
            let s = 10f64.powf(log_s);
            let c = PsychCurve::from_slope(0.0, s).unwrap();
            prop_assert!((c.slope() - s).abs() <= 1e-12 * s.max(1.0));
        }

        #[test]
        fn prob_second_monotone(bias in -10.0f64..10.0, sigma in 0.05f64..50.0) {
            let c = PsychCurve::new(bias, sigma).unwrap();
            let mut last = 0.0;
            for i in 0..=200 {
                let p = c.prob_second(-40.0 + 0.4 * i as f64);
                prop_assert!(p >= last);
                last = p;
            }
        }

        #[test]
        fn noiseless_recovery_on_random_curves(bias in -2.0f64..2.0, sigma in 1.0f64..12.0) {
            let truth = PsychCurve::new(bias, sigma).unwrap();
            let fit = CurveFitter::default().fit_points(&noiseless(&truth, &CANONICAL_LEVELS)).unwrap();
            prop_assert!((fit.curve.bias() - bias).abs() < 1e-6);
            prop_assert!((fit.curve.sigma() - sigma).abs() < 1e-6);
        }

        #[test]
        fn fit_ignores_level_order(seed in 0u64..1000) {
            let truth = PsychCurve::new(0.4, 4.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = simulate_responses(&truth, &CANONICAL_LEVELS, 30, &mut rng).unwrap();
            let mut pts: Vec<(f64, f64)> = t.rows().iter().map(|r| (r.delta_c, r.proportion())).collect();
            let forward = CurveFitter::default().fit_points(&pts).unwrap();
            pts.reverse();
            pts.swap(1, 5);
            let shuffled = CurveFitter::default().fit_points(&pts).unwrap();
            prop_assert_eq!(forward, shuffled);
        }
    }
}

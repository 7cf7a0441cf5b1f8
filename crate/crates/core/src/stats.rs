//! t-tests, simple linear regression and Student's t distribution.
//!
//! All p-values are two-sided. The t CDF goes through the regularized
//! incomplete beta function; critical values are found by bisection on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::inc_beta_pair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFlavor {
    OneSample,
    /// Student's test with a pooled variance.
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_diff: f64,
    pub flavor: TestFlavor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    pub f_stat: f64,
    pub df: [usize; 2],
    pub ci95_slope: [f64; 2],
    pub ci95_intercept: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Unbiased sample variance, two-pass.
pub fn variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn describe(xs: &[f64]) -> Option<SampleSummary> {
    let mean = mean(xs)?;
    Some(SampleSummary {
        n: xs.len(),
        mean,
        std: variance(xs).map_or(0.0, f64::sqrt),
    })
}

fn check_df(df: f64) -> Result<()> {
    if df > 0.0 && !df.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")))
    }
}

/// `P(|T| >= |t|)`; equals `I_x(df/2, 1/2)` with `x = df / (df + t²)`.
fn two_sided_tail(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    inc_beta_pair(0.5 * df, 0.5, x, y).clamp(0.0, 1.0)
}

/// CDF of Student's t with real-valued `df`.
pub fn t_cdf(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::invalid("t_cdf of NaN"));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let tail = 0.5 * two_sided_tail(t, df);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if t.is_nan() {
        return Err(Error::invalid("p-value of NaN statistic"));
    }
    Ok(two_sided_tail(t, df))
}

/// Inverse of [`t_cdf`] by bisection.
pub fn t_quantile(p: f64, df: f64) -> Result<f64> {
    check_df(df)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t_cdf(lo, df)? > p {
        lo *= 2.0;
    }
    while t_cdf(hi, df)? < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if t_cdf(mid, df)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn finite_samples(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains non-finite values")))
    }
}

pub fn t_test_one_sample(xs: &[f64], mu0: f64) -> Result<TTestResult> {
    finite_samples(xs, "sample")?;
    if xs.len() < 2 {
        return Err(Error::invalid(format!("one-sample t-test needs n >= 2, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let m = mean(xs).expect("non-empty");
    let var = variance(xs).expect("n >= 2");
    if var == 0.0 {
        return Err(Error::Degenerate("sample has zero variance".into()));
    }
    let t = (m - mu0) / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTestResult {
        t,
        df,
        p: t_two_sided_p(t, df)?,
        mean_diff: m - mu0,
        flavor: TestFlavor::OneSample,
    })
}

/// Paired test on `xs[i] - ys[i]`.
pub fn t_test_paired(xs: &[f64], ys: &[f64]) -> Result<TTestResult> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("paired samples differ in length"));
    }
    let diffs: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    t_test_one_sample(&diffs, 0.0)
}

pub fn t_test_two_sample(xs: &[f64], ys: &[f64], flavor: TestFlavor) -> Result<TTestResult> {
    finite_samples(xs, "first sample")?;
    finite_samples(ys, "second sample")?;
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::invalid("two-sample t-test needs n >= 2 in both groups"));
    }
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (m1, m2) = (mean(xs).expect("n >= 2"), mean(ys).expect("n >= 2"));
    let (v1, v2) = (variance(xs).expect("n >= 2"), variance(ys).expect("n >= 2"));
    let diff = m1 - m2;
    let (se, df) = match flavor {
        TestFlavor::Pooled => {
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
            ((pooled * (1.0 / n1 + 1.0 / n2)).sqrt(), n1 + n2 - 2.0)
        }
        TestFlavor::Welch => {
            let (a, b) = (v1 / n1, v2 / n2);
            let df = (a + b) * (a + b) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
            ((a + b).sqrt(), df)
        }
        TestFlavor::OneSample => {
            return Err(Error::invalid("two-sample test needs the pooled or welch flavor"));
        }
    };
    if se == 0.0 || !df.is_finite() {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = diff / se;
    Ok(TTestResult {
        t,
        df,
        p: t_two_sided_p(t, df)?,
        mean_diff: diff,
        flavor,
    })
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<RegressionResult> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y differ in length"));
    }
    finite_samples(xs, "x")?;
    finite_samples(ys, "y")?;
    let n = xs.len();
    if n < 3 {
        return Err(Error::invalid(format!("regression needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = mean(xs).expect("non-empty");
    let my = mean(ys).expect("non-empty");
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let ssr = (syy - sse).max(0.0);
    let r_squared = if syy > 0.0 { (ssr / syy).clamp(0.0, 1.0) } else { 0.0 };
    let df_resid = nf - 2.0;
    let mse = sse / df_resid;
    let slope_se = (mse / sxx).sqrt();
    let intercept_se = (mse * (1.0 / nf + mx * mx / sxx)).sqrt();
    let f_stat = if mse > 0.0 {
        ssr / mse
    } else if ssr > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let crit = t_quantile(0.975, df_resid)?;
    Ok(RegressionResult {
        slope,
        intercept,
        slope_se,
        intercept_se,
        r_squared,
        f_stat,
        df: [1, n - 2],
        ci95_slope: [slope - crit * slope_se, slope + crit * slope_se],
        ci95_intercept: [intercept - crit * intercept_se, intercept + crit * intercept_se],
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn one_sample_hand_values() {
        let r = t_test_one_sample(&[1.0, 2.0, 3.0], 0.0).unwrap();
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 2.0);
        let r = t_test_one_sample(&[1.0, 2.0, 3.0], 2.0).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(t_test_one_sample(&[1.0], 0.0).is_err());
        assert!(matches!(
            t_test_one_sample(&[2.0, 2.0], 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn two_sample_hand_values() {
        let r = t_test_two_sample(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], TestFlavor::Pooled).unwrap();
        assert!((r.t + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(r.df, 4.0);
        let w = t_test_two_sample(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], TestFlavor::Welch).unwrap();
        assert!((w.t - r.t).abs() < 1e-12);
        assert!((w.df - r.df).abs() < 1e-12);
        let same = t_test_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], TestFlavor::Welch).unwrap();
        assert_eq!(same.t, 0.0);
        assert_eq!(same.p, 1.0);
    }

    #[test]
    fn regression_trivial_cases() {
        let r = linear_regression(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.slope, 1.0);
        assert_eq!(r.intercept, 0.0);
        assert_eq!(r.r_squared, 1.0);
        let r = linear_regression(&[0.0, 1.0, 2.0, 5.0], &[3.0; 4]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.r_squared, 0.0);
        assert!(linear_regression(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(linear_regression(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn f_equals_t_squared() {
        let xs = [0.1, 0.5, 0.9, 1.3, 2.0, 2.2];
        let ys = [1.0, 1.4, 1.5, 2.4, 2.9, 3.5];
        let r = linear_regression(&xs, &ys).unwrap();
        let t = r.slope / r.slope_se;
        assert!((r.f_stat / (t * t) - 1.0).abs() < 1e-12);
        assert_eq!(r.df, [1, 4]);
    }

    #[test]
    fn t_cdf_basics() {
        assert_eq!(t_cdf(0.0, 3.0).unwrap(), 0.5);
        assert!(t_cdf(1.0, 0.0).is_err());
        // Cauchy: F(1) = 3/4
        assert!((t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-14);
        // df = 2 closed form: 1/2 + t / (2 sqrt(2 + t^2))
        let t: f64 = 1.7;
        assert!((t_cdf(t, 2.0).unwrap() - (0.5 + t / (2.0 * (2.0 + t * t).sqrt()))).abs() < 1e-14);
        assert!((t_cdf(1.959964, 1e6).unwrap() - 0.974_999_862_255_948_1).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for df in [1.0, 4.0, 17.0, 300.0] {
            for p in [0.01, 0.3, 0.975] {
                let q = t_quantile(p, df).unwrap();
                assert!((t_cdf(q, df).unwrap() - p).abs() < 1e-12);
            }
        }
        // classic table value
        assert!((t_quantile(0.975, 10.0).unwrap() - 2.228_138_851_986_274).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn t_cdf_symmetry(t in -30.0f64..30.0, df in 0.2f64..500.0) {
            let s = t_cdf(t, df).unwrap() + t_cdf(-t, df).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-14);
        }

        #[test]
        fn stats_ignore_order(mut xs in prop::collection::vec(-10.0f64..10.0, 3..30), ys_seed in 0u64..1000) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 2.0 * x + ((i as u64 * 31 + ys_seed) % 7) as f64).collect();
            let before = t_test_one_sample(&xs, 0.5);
            let reg = linear_regression(&xs, &ys);
            let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            pairs.reverse();
            xs.reverse();
            let (rx, ry): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let (Ok(a), Ok(b)) = (before, t_test_one_sample(&xs, 0.5)) {
                prop_assert!((a.t - b.t).abs() <= 1e-9 * a.t.abs().max(1.0));
            }
            if let (Ok(a), Ok(b)) = (reg, linear_regression(&rx, &ry)) {
                prop_assert!((a.slope - b.slope).abs() <= 1e-9 * a.slope.abs().max(1.0));
            }
        }

        #[test]
        fn regression_scales_with_y(xs in prop::collection::vec(-5.0f64..5.0, 4..20), c in -8i32..8) {
            let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x + x.sin()).collect();
            let scale = 2f64.powi(c);
            let scaled: Vec<f64> = ys.iter().map(|y| y * scale).collect();
            if let (Ok(a), Ok(b)) = (linear_regression(&xs, &ys), linear_regression(&xs, &scaled)) {
                prop_assert_eq!(a.slope * scale, b.slope);
                prop_assert_eq!(a.intercept * scale, b.intercept);
            }
        }
    }
}

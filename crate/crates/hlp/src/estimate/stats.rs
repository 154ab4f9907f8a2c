//! Interval estimates and two-sample tests.

use rand::Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// A point estimate with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub trials: u64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes / trials`.
pub fn wilson(successes: u64, trials: u64) -> Estimate {
    assert!(successes <= trials);
    if trials == 0 {
        return Estimate {
            value: f64::NAN,
            lo: 0.0,
            hi: 1.0,
            trials,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Estimate {
        value: p,
        // The interval always contains p; clamp the rounding at k = 0, n.
        lo: (centre - half).clamp(0.0, p),
        hi: (centre + half).clamp(p, 1.0),
        trials,
    }
}

/// Sample mean with a percentile-bootstrap 95% interval.
pub fn bootstrap_mean(xs: &[f64], resamples: usize, seed: u64) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
            trials: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let mut r = rng::stream(seed, 0);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| xs[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    Estimate {
        value: mean,
        lo: if resamples > 0 { at(0.025) } else { mean },
        hi: if resamples > 0 { at(0.975) } else { mean },
        trials: n as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Minimum pooled count of a bin in [`chi_square_two_sample`].
pub const MIN_BIN_COUNT: u64 = 10;

/// Two-sample chi-square homogeneity test on aligned category counts.
/// Categories with fewer than [`MIN_BIN_COUNT`] pooled observations are
/// merged into one bin before testing.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        if x + y >= MIN_BIN_COUNT {
            bins.push((x as f64, y as f64));
        } else {
            rest.0 += x as f64;
            rest.1 += y as f64;
        }
    }
    if rest.0 + rest.1 > 0.0 {
        bins.push(rest);
    }
    let na: f64 = bins.iter().map(|b| b.0).sum();
    let nb: f64 = bins.iter().map(|b| b.1).sum();
    if bins.len() < 2 || na == 0.0 || nb == 0.0 {
        return ChiSquare {
            statistic: 0.0,
            dof: 0.0,
            p_value: 1.0,
        };
    }
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| (ka * x - kb * y).powi(2) / (x + y))
        .sum();
    let dof = (bins.len() - 1) as f64;
    let p_value = ChiSquared::new(dof).map_or(f64::NAN, |d| d.sf(statistic));
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // Reference values from statsmodels' proportion_confint(method="wilson").
        let e = wilson(1, 10);
        assert!((e.lo - 0.017_876_213_095_072_924).abs() < 1e-12);
        assert!((e.hi - 0.404_150_026_795_238_54).abs() < 1e-12);
        let e = wilson(0, 20);
        assert_eq!(e.lo, 0.0);
        assert!((e.hi - 0.161_125_158_052_819_4).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_are_homogeneous() {
        let t = chi_square_two_sample(&[100, 200, 50, 3], &[100, 200, 50, 3]);
        assert!(t.statistic.abs() < 1e-12);
        assert!(t.p_value > 0.999);
        let t = chi_square_two_sample(&[500, 100], &[100, 500]);
        assert!(t.p_value < 1e-10);
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let xs: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        let e = bootstrap_mean(&xs, 500, 3);
        assert!(e.lo < e.value && e.value < e.hi);
    }
}

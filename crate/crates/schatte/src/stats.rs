//! Statistical helpers for the verification experiments: the Kolmogorov sup
//! distribution, a tie-aware two-sample Kolmogorov-Smirnov test, and simple
//! least-squares fits with confidence intervals.
//!
//! # Example
//!
//! ```
//! use schatte::stats::{kolmogorov_cdf, ks_two_sample};
//!
//! // The sup-of-bridge distribution at 1.0 (frozen reference value).
//! assert!((kolmogorov_cdf(1.0) - 0.7300003283228461).abs() < 1e-12);
//!
//! // Identical samples cannot be told apart.
//! let xs = [0.1, 0.4, 0.9];
//! let ks = ks_two_sample(&xs, &xs)?;
//! assert_eq!((ks.statistic, ks.p_value), (0.0, 1.0));
//! # Ok::<(), schatte::Error>(())
//! ```

use crate::error::{Error, Result};

/// CDF of the Kolmogorov sup-of-bridge distribution.
///
/// Uses the theta-series in its fast-converging form on each side of
/// `x = 1.18`: the reciprocal (Jacobi-transformed) series below, the
/// alternating series above.  Both are summed to machine accuracy.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.18 {
        // sqrt(2 pi)/x * sum_{k odd} exp(-(k pi)^2 / (8 x^2))
        let a = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let mut sum = 0.0;
        let mut k = 1u32;
        loop {
            let term = (-a * (k * k) as f64).exp();
            sum += term;
            if term < 1e-18 * sum.max(1e-300) || k > 99 {
                break;
            }
            k += 2;
        }
        ((2.0 * std::f64::consts::PI).sqrt() / x * sum).min(1.0)
    } else {
        1.0 - upper_tail(x)
    }
}

/// Survival function `1 - kolmogorov_cdf`, computed directly in the upper
/// tail where the subtraction would lose precision.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        (1.0 - kolmogorov_cdf(x)).clamp(0.0, 1.0)
    } else {
        upper_tail(x)
    }
}

/// `2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
fn upper_tail(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..100u32 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        if term < 1e-18 {
            break;
        }
        sum += sign * term;
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    /// Sup distance between the two empirical CDFs.
    pub statistic: f64,
    /// `statistic * sqrt(n m / (n + m))`.
    pub scaled: f64,
    /// Asymptotic p-value `kolmogorov_sf(scaled)`.
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidConfig("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("KS test samples must be finite".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n || j < m {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        // Consume every copy of v on both sides before comparing, so ties
        // never produce phantom gaps.
        while i < n && xs[i] == v {
            i += 1;
        }
        while j < m && ys[j] == v {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    let scaled = d * ((n * m) as f64 / (n + m) as f64).sqrt();
    Ok(KsTest { statistic: d, scaled, p_value: kolmogorov_sf(scaled) })
}

/// Ordinary least squares `y = intercept + slope x` with a 95% CI on the
/// slope from the t distribution (two-sided; the critical value falls back
/// to the normal 1.96 beyond 10 residual degrees of freedom).
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

fn t_critical_95(df: usize) -> f64 {
    const TABLE: [f64; 10] =
        [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if df == 0 {
        f64::INFINITY
    } else if df <= 10 {
        TABLE[df - 1]
    } else {
        1.96
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidConfig(format!(
            "fit input lengths differ: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidConfig(
            "fit needs at least three points for an error bar".into(),
        ));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("fit inputs must be finite".into()));
    }
    let nf = n as f64;
    let mean_x = xs.iter().sum::<f64>() / nf;
    let mean_y = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if sxx <= 0.0 {
        return Err(Error::Domain("fit abscissae are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let df = n - 2;
    let slope_se = (ssr / df as f64 / sxx).sqrt();
    let half = t_critical_95(df) * slope_se;
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        ci_low: slope - half,
        ci_high: slope + half,
        points: n,
    })
}

/// Mean and its standard error (`sd / sqrt(n)`; infinite for a single
/// observation).
pub fn mean_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::InvalidConfig("mean of an empty sample".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Ok((mean, f64::INFINITY));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cdf_matches_frozen_series_values() {
        // Alternating series at x = 1:
        // 1 - 2(e^-2 - e^-8 + e^-18 - e^-32 + ...)
        assert!((kolmogorov_cdf(1.0) - 0.7300003283228461).abs() < 1e-12);
        // Median of the distribution.
        assert!((kolmogorov_cdf(0.8275735551899077) - 0.5).abs() < 1e-4);
        // Deep upper tail, computed directly: 2 e^-18 minus nothing visible.
        assert!((kolmogorov_sf(3.0) - 3.045995948942526e-8).abs() < 1e-20);
    }

    #[test]
    fn cdf_is_continuous_across_the_branch_point() {
        let below = kolmogorov_cdf(1.18 - 1e-9);
        let above = kolmogorov_cdf(1.18 + 1e-9);
        assert!((below - above).abs() < 1e-8, "branch jump: {below} vs {above}");
    }

    #[test]
    fn cdf_and_sf_are_complementary_and_bounded() {
        for i in 1..60 {
            let x = i as f64 * 0.05;
            let c = kolmogorov_cdf(x);
            let s = kolmogorov_sf(x);
            assert!((0.0..=1.0).contains(&c));
            assert!((c + s - 1.0).abs() < 1e-12, "x = {x}");
        }
        assert_eq!(kolmogorov_cdf(0.0), 0.0);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert_eq!(kolmogorov_cdf(-1.0), 0.0);
    }

    #[test]
    fn ks_statistic_matches_hand_values() {
        let t = ks_two_sample(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]).unwrap();
        assert!((t.statistic - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.scaled - (1.0 / 3.0) * (9.0f64 / 6.0).sqrt()).abs() < 1e-15);
        assert!(t.p_value > 0.9);
        // Ties on both sides.
        let t = ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((t.statistic - 1.0 / 3.0).abs() < 1e-15);
        // Identical samples: zero distance, p-value one.
        let t = ks_two_sample(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn ks_separates_shifted_samples_and_accepts_null_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let null = ks_two_sample(&a, &b).unwrap();
        assert!(null.p_value > 0.001, "null p = {}", null.p_value);
        let shifted: Vec<f64> = b.iter().map(|v| v + 0.4).collect();
        let alt = ks_two_sample(&a, &shifted).unwrap();
        assert!(alt.p_value < 1e-6, "shifted p = {}", alt.p_value);
    }

    #[test]
    fn ks_validates_inputs() {
        assert!(ks_two_sample(&[], &[1.0]).is_err());
        assert!(ks_two_sample(&[1.0], &[]).is_err());
        assert!(ks_two_sample(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn exact_line_fits_with_zero_error_bar() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!(fit.slope_se < 1e-14);
        assert!((fit.ci_low - fit.slope).abs() < 1e-12);
        assert!((fit.ci_high - fit.slope).abs() < 1e-12);
    }

    #[test]
    fn fit_matches_normal_equations_oracle() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 0.9, 2.2, 2.8, 4.15];
        let fit = linear_fit(&xs, &ys).unwrap();
        // Solve the 2x2 normal equations independently.
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let intercept = (sy * sxx - sx * sxy) / det;
        assert!((fit.slope - slope).abs() < 1e-12);
        assert!((fit.intercept - intercept).abs() < 1e-12);
        // Degrees of freedom 3 -> t = 3.182.
        assert!((fit.ci_high - fit.slope - 3.182 * fit.slope_se).abs() < 1e-12);
    }

    #[test]
    fn fit_validates_inputs() {
        assert!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn mean_se_handles_small_samples() {
        assert!(mean_se(&[]).is_err());
        let (m, se) = mean_se(&[2.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!(se.is_infinite());
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// The CDF is nondecreasing.
        #[test]
        fn cdf_is_monotone(x in 0.01..3.0f64, h in 0.0..0.5f64) {
            prop_assert!(kolmogorov_cdf(x + h) + 1e-12 >= kolmogorov_cdf(x));
        }

        /// The KS statistic is symmetric in its arguments and within [0, 1].
        #[test]
        fn ks_is_symmetric(
            a in prop::collection::vec(0.0..1.0f64, 1..40),
            b in prop::collection::vec(0.0..1.0f64, 1..40),
        ) {
            let ab = ks_two_sample(&a, &b).unwrap();
            let ba = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(ab.statistic.to_bits(), ba.statistic.to_bits());
            prop_assert!((0.0..=1.0).contains(&ab.statistic));
        }
    }
}

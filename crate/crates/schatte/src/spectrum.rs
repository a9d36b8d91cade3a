//! Fourier analysis of the wrapped walk.
//!
//! For increment law with characteristic function `phi` and scale `x`, the
//! wrapped position `{S_rho x}` after `rho` steps has a density `g_rho` on the
//! circle whose Fourier coefficients are powers of `phi` sampled on the
//! frequency lattice:
//!
//! ```text
//! E exp(-2 pi i k {S_rho x}) = conj(phi(2 pi k x))^rho,    k = 1, 2, ...
//! ```
//!
//! Everything downstream is controlled by how fast these coefficients decay:
//! decay in `k` (power-law envelopes per family) fixes how many Fourier terms
//! a density synthesis needs, and decay in `rho` (geometric, at the rate of
//! the spectral gap) fixes how many terms the covariance series needs.
//!
//! # Example
//!
//! ```
//! use schatte::model::IncrementDistribution;
//! use schatte::spectrum::WrappedSpectrum;
//!
//! let dist = IncrementDistribution::uniform(0.0, 0.5)?;
//! let sp = WrappedSpectrum::new(dist, 1.0)?;
//!
//! // Largest coefficient modulus 2/pi, attained at k = 1, so the spectral
//! // gap (decay rate per lag) is log(pi/2).
//! assert!((sp.sup_modulus() - 2.0 / std::f64::consts::PI).abs() < 1e-12);
//! assert_eq!(sp.sup_frequency(), 1);
//! assert!((sp.decay_rate() - (std::f64::consts::PI / 2.0).ln()).abs() < 1e-12);
//!
//! // Certified truncation: beyond this many lags the covariance series
//! // tail is provably below 1e-10.
//! assert!(sp.series_length(1e-10)? > 10);
//! # Ok::<(), schatte::Error>(())
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{IncrementDistribution, IncrementKind};

/// Frequencies scanned exactly when taking suprema and partial sums.
pub const KSCAN: usize = 10_000;

/// Hard cap on the number of Fourier terms a single pointwise evaluation may
/// request; reached only when the coefficient tail is not absolutely summable
/// (first-power decay at `rho = 1`).
pub const KMAX_CAP: usize = 1_000_000;

/// Walks whose sup coefficient modulus reaches this value are rejected as
/// non-mixing: the geometric decay in `rho` would be too slow to use.
const MIXING_MARGIN: f64 = 1e-12;

/// Upper bound on covariance series lengths before giving up.
const SERIES_CAP: usize = 100_000;

/// Scanned suprema at or below this level are rounding noise, not structure:
/// exactly degenerate wraps (e.g. uniform increments spanning a whole period,
/// whose coefficients vanish on the integer lattice) evaluate to ~1e-16
/// because `sin(pi k)` is inexact in floats.  Snapping to zero changes any
/// covariance by at most ~1e-12 (the overlap transform decays quadratically,
/// so the lag-1 term is bounded by this level times `sum 1/k^2`).
const DEGENERATE_SUP: f64 = 1e-13;

/// First-power Fourier coefficient `E exp(-2 pi i k {X x}) = conj(phi(2 pi k x))`.
pub fn coefficient(dist: &IncrementDistribution, x: f64, k: usize) -> Complex64 {
    let theta = std::f64::consts::TAU * k as f64 * x;
    dist.char_fn(theta).conj()
}

/// Modulus of the `k`-th coefficient; the same for every `rho = 1` power base.
pub fn coefficient_modulus(dist: &IncrementDistribution, x: f64, k: usize) -> f64 {
    let theta = std::f64::consts::TAU * k as f64 * x;
    dist.char_fn(theta).norm()
}

/// Fourier coefficient of the wrapped density after `rho` steps.
pub fn wrapped_coefficient(dist: &IncrementDistribution, x: f64, k: usize, rho: u32) -> Complex64 {
    coefficient(dist, x, k).powu(rho)
}

/// Truncated Fourier synthesis of the wrapped density `g_rho` at a point:
///
/// `g_rho(u) ~ 1 + 2 sum_{k=1..k_terms} Re( c_k(rho) exp(2 pi i k u) )`.
///
/// The value is returned raw (no clipping): with `k_terms` from [`kmax`] the
/// negative excursions are below the requested tolerance by construction.
pub fn wrapped_density(
    dist: &IncrementDistribution,
    x: f64,
    rho: u32,
    k_terms: usize,
    u: f64,
) -> f64 {
    // Incremental rotator instead of a trig call per term; the phase drift
    // over 10^6 multiplies is ~10^-10 radians, far below synthesis accuracy.
    let base = Complex64::from_polar(1.0, std::f64::consts::TAU * u);
    let mut rot = base;
    let mut acc = 0.0;
    for k in 1..=k_terms {
        let c = wrapped_coefficient(dist, x, k, rho);
        acc += (c * rot).re;
        rot *= base;
    }
    1.0 + 2.0 * acc
}

/// Power-law ceiling on coefficient moduli: `|c_k| <= amplitude / k^power`
/// for every `k >= min_k` (and trivially `|c_k| <= 1` everywhere).
#[derive(Debug, Clone, Copy)]
pub struct DecayEnvelope {
    pub amplitude: f64,
    pub power: u32,
    pub min_k: f64,
}

impl DecayEnvelope {
    /// The certified bound at frequency `k`.
    pub fn bound(&self, k: usize) -> f64 {
        if (k as f64) < self.min_k {
            return 1.0;
        }
        (self.amplitude / (k as f64).powi(self.power as i32)).min(1.0)
    }
}

/// The decay envelope of a wrapped-coefficient sequence.
///
/// With `v = pi |x| (b - a)`, the coefficient modulus at frequency `k` is:
///
/// * uniform:       `|sinc(k v)|            <= 1 / (k v)`
/// * triangular:    `sinc(k v / 2)^2        <= 4 / (k v)^2`
/// * raised cosine: `|sinc| * pole factor   <= 2 pi^2 / (k v)^3` once
///   `k v >= sqrt(2) pi` (outside the first lobe of the pole factor).
pub fn decay_envelope(dist: &IncrementDistribution, x: f64) -> DecayEnvelope {
    let v = std::f64::consts::PI * x.abs() * (dist.b - dist.a);
    match dist.kind {
        IncrementKind::Uniform => DecayEnvelope { amplitude: 1.0 / v, power: 1, min_k: 0.0 },
        IncrementKind::Triangular => {
            DecayEnvelope { amplitude: 4.0 / (v * v), power: 2, min_k: 0.0 }
        }
        IncrementKind::RaisedCosine => DecayEnvelope {
            amplitude: 2.0 * std::f64::consts::PI.powi(2) / (v * v * v),
            power: 3,
            min_k: std::f64::consts::SQRT_2 * std::f64::consts::PI / v,
        },
    }
}

/// Supremum of coefficient moduli over the scanned band `k = 1..=KSCAN`,
/// together with the frequency attaining it.  Rejects non-mixing
/// configurations (supremum indistinguishable from 1).
pub fn sup_coefficient_modulus(dist: &IncrementDistribution, x: f64) -> Result<(f64, usize)> {
    let mut sup = 0.0;
    let mut argmax = 1usize;
    for k in 1..=KSCAN {
        let m = coefficient_modulus(dist, x, k);
        if m > sup {
            sup = m;
            argmax = k;
        }
    }
    if sup >= 1.0 - MIXING_MARGIN {
        return Err(Error::NonMixing { k: argmax as i64, modulus: sup });
    }
    if sup <= DEGENERATE_SUP {
        // Exactly degenerate wrap; the frequency slot is meaningless noise.
        return Ok((0.0, 0));
    }
    Ok((sup, argmax))
}

/// Spectral gap `lambda = -ln sup_k |c_k|` over the scanned band.
///
/// Returns `+inf` when every scanned coefficient vanishes (the wrapped walk is
/// exactly uniform after one step, e.g. uniform increments spanning a full
/// period).
pub fn spectral_gap(dist: &IncrementDistribution, x: f64) -> Result<f64> {
    let (sup, _) = sup_coefficient_modulus(dist, x)?;
    if sup == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-sup.ln())
    }
}

/// `sum_{k > from} bound(k)^rho` for the envelope, by integral comparison.
/// Frequencies between `from` and `min_k` are bounded by 1 each.
fn envelope_tail_sum(env: &DecayEnvelope, rho: u32, from: usize) -> f64 {
    let q = env.power as f64 * rho as f64;
    if q <= 1.0 {
        return f64::INFINITY;
    }
    let start = from.max(env.min_k.ceil() as usize);
    let ones = (start - from) as f64;
    let ln_rem = rho as f64 * env.amplitude.ln() + (1.0 - q) * (start as f64).ln() - (q - 1.0).ln();
    ones + ln_rem.exp()
}

/// Number of Fourier terms needed so the truncated synthesis of `g_rho` is
/// within `tol` in sup norm: smallest `K` with `2 sum_{k>K} |c_k|^rho <= tol`
/// by the envelope bound, clamped to [`KMAX_CAP`].
pub fn kmax(dist: &IncrementDistribution, x: f64, tol: f64, rho: u32) -> Result<usize> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
    }
    if rho == 0 {
        return Err(Error::InvalidConfig("kmax needs rho >= 1".into()));
    }
    let env = decay_envelope(dist, x);
    let q = env.power as f64 * rho as f64;
    if q <= 1.0 {
        // First-power tail is not absolutely summable; cap and let callers
        // fall back on band-limited use of the terms they can afford.
        return Ok(KMAX_CAP);
    }
    let ln_k =
        (std::f64::consts::LN_2 + rho as f64 * env.amplitude.ln() - tol.ln() - (q - 1.0).ln())
            / (q - 1.0);
    if ln_k >= (KMAX_CAP as f64).ln() {
        return Ok(KMAX_CAP);
    }
    let k = ln_k.exp().ceil().max(1.0).max(env.min_k.ceil());
    Ok((k as usize).min(KMAX_CAP))
}

/// `S(rho) = 2 sum_{k>=1} |c_k|^rho`: the sup-norm distance `||g_rho - 1||`
/// is at most `S(rho)`.  Computed as an exact partial sum over the scanned
/// band plus the envelope bound for the tail, so the result is an upper bound
/// that is tight to ~1e-4 relative for the scanned families.
pub fn series_sum(dist: &IncrementDistribution, x: f64, rho: u32) -> f64 {
    let mut acc = 0.0;
    for k in 1..=KSCAN {
        let m = coefficient_modulus(dist, x, k);
        if m > 0.0 {
            acc += m.powi(rho as i32);
        }
    }
    let env = decay_envelope(dist, x);
    2.0 * (acc + envelope_tail_sum(&env, rho, KSCAN))
}

/// Number of covariance-series terms needed for tolerance `tol`.
///
/// Each term of the covariance series is bounded by `2 S(rho)` and the sums
/// contract geometrically with ratio `q = sup_k |c_k|`, so the tail beyond `R`
/// terms is at most `2 S(R+1) / (1 - q)`.  Returns the smallest `R >= 0` that
/// pushes this bound below `tol`.
pub fn series_length(dist: &IncrementDistribution, x: f64, tol: f64) -> Result<usize> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
    }
    let (sup, _) = sup_coefficient_modulus(dist, x)?;
    if sup == 0.0 {
        return Ok(0);
    }
    let env = decay_envelope(dist, x);
    // Contraction certified over all k: beyond the scanned band use the
    // envelope at the first unscanned frequency.
    let beyond = if env.min_k <= KSCAN as f64 { env.bound(KSCAN + 1) } else { 1.0 };
    let q = sup.max(beyond);
    if q >= 1.0 - MIXING_MARGIN {
        return Err(Error::NonMixing { k: (KSCAN + 1) as i64, modulus: q });
    }

    // Maintain |c_k|^rho incrementally; drop frequencies once they cannot
    // matter (1e4 terms below 1e-30 total to 1e-26, far under any tol here).
    let mut powers: Vec<(f64, f64)> = (1..=KSCAN)
        .filter_map(|k| {
            let m = coefficient_modulus(dist, x, k);
            if m > 0.0 {
                Some((m, m))
            } else {
                None
            }
        })
        .collect();

    for r in 0..=SERIES_CAP {
        // powers currently hold |c_k|^(r+1).
        let partial: f64 = powers.iter().map(|&(_, p)| p).sum();
        let s_next = 2.0 * (partial + envelope_tail_sum(&env, (r + 1) as u32, KSCAN));
        if 2.0 * s_next / (1.0 - q) < tol {
            return Ok(r);
        }
        for entry in powers.iter_mut() {
            entry.1 *= entry.0;
        }
        powers.retain(|&(_, p)| p > 1e-30);
    }
    Err(Error::Domain(format!(
        "covariance series needs more than {SERIES_CAP} terms at tolerance {tol}; \
         the spectral gap is too small"
    )))
}

/// A pointwise density value together with the amount clipped away below
/// zero.  Clip magnitudes above the synthesis tolerance indicate a bug, not
/// legitimate truncation noise.
#[derive(Debug, Clone, Copy)]
pub struct ClippedDensity {
    pub value: f64,
    pub clipped: f64,
}

/// A validated (increment law, scale) pair with its spectral summary: the
/// entry point for everything that needs a certified mixing rate.
/// Construction scans the frequency band once and rejects non-mixing
/// configurations, so downstream evaluations cannot silently diverge.
#[derive(Debug, Clone, Copy)]
pub struct WrappedSpectrum {
    dist: IncrementDistribution,
    x: f64,
    sup_modulus: f64,
    sup_frequency: usize,
}

impl WrappedSpectrum {
    pub fn new(dist: IncrementDistribution, x: f64) -> Result<Self> {
        if x == 0.0 || !x.is_finite() {
            return Err(Error::InvalidConfig(format!("scale x = {x} must be finite and nonzero")));
        }
        let (sup_modulus, sup_frequency) = sup_coefficient_modulus(&dist, x)?;
        Ok(WrappedSpectrum { dist, x, sup_modulus, sup_frequency })
    }

    pub fn dist(&self) -> &IncrementDistribution {
        &self.dist
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// Largest coefficient modulus over the scanned band.
    pub fn sup_modulus(&self) -> f64 {
        self.sup_modulus
    }

    /// Frequency attaining the supremum.
    pub fn sup_frequency(&self) -> usize {
        self.sup_frequency
    }

    /// Spectral gap `-ln sup|c_k|`; `+inf` when the wrap is exactly uniform
    /// after one step.
    pub fn decay_rate(&self) -> f64 {
        if self.sup_modulus == 0.0 {
            f64::INFINITY
        } else {
            -self.sup_modulus.ln()
        }
    }

    /// Geometric contraction ratio per step, certified over all frequencies
    /// (scanned supremum joined with the envelope beyond the scan).
    pub fn contraction(&self) -> f64 {
        let env = decay_envelope(&self.dist, self.x);
        let beyond = if env.min_k <= KSCAN as f64 { env.bound(KSCAN + 1) } else { 1.0 };
        self.sup_modulus.max(beyond)
    }

    pub fn coeff(&self, k: usize, rho: u32) -> Complex64 {
        wrapped_coefficient(&self.dist, self.x, k, rho)
    }

    pub fn kmax(&self, tol: f64, rho: u32) -> Result<usize> {
        kmax(&self.dist, self.x, tol, rho)
    }

    pub fn series_sum(&self, rho: u32) -> f64 {
        series_sum(&self.dist, self.x, rho)
    }

    pub fn series_length(&self, tol: f64) -> Result<usize> {
        series_length(&self.dist, self.x, tol)
    }

    /// Band-limited density synthesis with an explicit term count.
    pub fn density(&self, rho: u32, k_terms: usize, u: f64) -> f64 {
        wrapped_density(&self.dist, self.x, rho, k_terms, u)
    }

    /// Density at a point with the term count chosen from `tol`, clipped
    /// below at zero with the clip magnitude recorded.
    pub fn density_auto(&self, rho: u32, tol: f64, u: f64) -> Result<ClippedDensity> {
        let k = self.kmax(tol, rho)?;
        let raw = self.density(rho, k, u);
        Ok(ClippedDensity { value: raw.max(0.0), clipped: (-raw).max(0.0) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn uniform_half() -> IncrementDistribution {
        IncrementDistribution::uniform(0.0, 0.5).unwrap()
    }

    #[test]
    fn sup_modulus_of_uniform_half_is_two_over_pi_at_k1() {
        let (sup, argmax) = sup_coefficient_modulus(&uniform_half(), 1.0).unwrap();
        assert!((sup - 2.0 / PI).abs() < 1e-14, "sup = {sup}");
        assert_eq!(argmax, 1);
    }

    #[test]
    fn spectral_gap_of_uniform_half_is_ln_pi_over_two() {
        let gap = spectral_gap(&uniform_half(), 1.0).unwrap();
        assert!((gap - (PI / 2.0).ln()).abs() < 1e-14);
        assert!((gap - 0.4515827052894548).abs() < 1e-14);
    }

    #[test]
    fn full_period_increments_have_infinite_gap() {
        // uniform(0,1) at x = 1 wraps to the exact uniform law after one
        // step: every coefficient vanishes.  Same for triangular(-1,1),
        // whose coefficients sinc^2(pi k) also vanish on the lattice.
        let u = IncrementDistribution::uniform(0.0, 1.0).unwrap();
        let t = IncrementDistribution::triangular(-1.0, 1.0).unwrap();
        assert_eq!(spectral_gap(&u, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(spectral_gap(&t, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tiny_scale_is_rejected_as_non_mixing() {
        let err = spectral_gap(&uniform_half(), 1e-9).unwrap_err();
        match err {
            crate::error::Error::NonMixing { k, modulus } => {
                assert_eq!(k, 1);
                assert!(modulus > 1.0 - 1e-12);
            }
            other => panic!("expected NonMixing, got {other}"),
        }
    }

    #[test]
    fn wrapped_coefficients_match_hand_values() {
        // uniform(0, 0.5), x = 1: phi(2 pi) = exp(i pi / 2) sinc(pi / 2)
        // = (2 / pi) i, so the k = 1 coefficient is -(2 / pi) i and its
        // square is -4 / pi^2.
        let d = uniform_half();
        let c1 = wrapped_coefficient(&d, 1.0, 1, 1);
        assert!(c1.re.abs() < 1e-15);
        assert!((c1.im + 2.0 / PI).abs() < 1e-15);

        let c1_sq = wrapped_coefficient(&d, 1.0, 1, 2);
        assert!((c1_sq.re + 4.0 / (PI * PI)).abs() < 1e-15);
        assert!(c1_sq.im.abs() < 1e-15);

        // Even frequencies vanish for this support.
        assert!(wrapped_coefficient(&d, 1.0, 2, 1).norm() < 1e-15);
        assert!(wrapped_coefficient(&d, 1.0, 4, 3).norm() < 1e-15);
    }

    #[test]
    fn wrapped_density_after_one_step_recovers_uniform_half_density() {
        // {X} with X ~ uniform(0, 0.5) has density 2 on (0, 1/2), 0 after.
        // Pointwise Fourier convergence away from the jumps is O(1/K).
        let d = uniform_half();
        let k = 20_001;
        assert!((wrapped_density(&d, 1.0, 1, k, 0.25) - 2.0).abs() < 1e-3);
        assert!((wrapped_density(&d, 1.0, 1, k, 0.1) - 2.0).abs() < 1e-3);
        assert!(wrapped_density(&d, 1.0, 1, k, 0.75).abs() < 1e-3);
    }

    #[test]
    fn wrapped_density_after_two_steps_is_triangular() {
        // The sum of two uniform(0, 0.5) draws is triangular on (0, 1):
        // density 4u rising to 2 at u = 1/2, then 4(1 - u).  Continuous, so
        // the truncation error is the absolute coefficient tail ~ 4/(pi^2 K).
        let d = uniform_half();
        let k = 2001;
        assert!((wrapped_density(&d, 1.0, 2, k, 0.25) - 1.0).abs() < 1e-3);
        assert!((wrapped_density(&d, 1.0, 2, k, 0.5) - 2.0).abs() < 1e-3);
        assert!((wrapped_density(&d, 1.0, 2, k, 0.8) - 0.8).abs() < 1e-3);
    }

    #[test]
    fn wrapped_density_averages_to_one_on_midpoint_grid() {
        // With fewer Fourier terms than half the grid size there is no
        // aliasing, and the midpoint average of every rotator vanishes
        // exactly; only the unit constant term survives.
        let d = IncrementDistribution::raised_cosine(-0.3, 0.4).unwrap();
        let n = 4096;
        let mean = (0..n)
            .map(|j| wrapped_density(&d, 1.3, 3, 64, (j as f64 + 0.5) / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 1e-12, "mean = {mean}");
    }

    #[test]
    fn kmax_matches_envelope_arithmetic() {
        let d = uniform_half();
        // First power: not absolutely summable, capped.
        assert_eq!(kmax(&d, 1.0, 1e-6, 1).unwrap(), KMAX_CAP);
        // rho = 2: K = ceil(2 A^2 / tol) with A = 2 / pi.
        assert_eq!(kmax(&d, 1.0, 1e-6, 2).unwrap(), 810_570);
        // rho = 16 at 1e-10 collapses to a handful of terms.
        assert_eq!(kmax(&d, 1.0, 1e-10, 16).unwrap(), 3);
        assert!(kmax(&d, 1.0, -1.0, 2).is_err());
        assert!(kmax(&d, 1.0, 1e-6, 0).is_err());
    }

    #[test]
    fn kmax_certifies_its_tolerance() {
        // Direct check of the defining property: the coefficient tail beyond
        // the returned K, summed with the envelope, is below tol.
        let d = IncrementDistribution::triangular(0.0, 1.0).unwrap();
        for &tol in &[1e-4, 1e-8] {
            for rho in [1u32, 2, 5] {
                let k = kmax(&d, 0.7, tol, rho).unwrap();
                if k == KMAX_CAP {
                    continue;
                }
                let env = decay_envelope(&d, 0.7);
                let tail = 2.0 * envelope_tail_sum(&env, rho, k);
                assert!(tail <= tol, "rho = {rho}, tol = {tol}: tail {tail} at K = {k}");
            }
        }
    }

    #[test]
    fn series_sum_matches_closed_forms() {
        // For uniform(0, 0.5) at x = 1 the moduli are 2/(pi k) on odd k, so
        // S(2) = (8/pi^2) sum_odd k^-2 = 1 and S(4) = 2 (2/pi)^4 pi^4/96 = 1/3.
        // The computed value adds an envelope tail bound ~1e-4 at rho = 2.
        let d = uniform_half();
        let s2 = series_sum(&d, 1.0, 2);
        assert!((s2 - 1.0).abs() < 2e-4, "S(2) = {s2}");
        assert!(s2 >= 1.0 - 5e-5, "S must stay an upper bound: {s2}");
        let s4 = series_sum(&d, 1.0, 4);
        assert!((s4 - 1.0 / 3.0).abs() < 1e-9, "S(4) = {s4}");
    }

    #[test]
    fn series_length_is_zero_for_exactly_uniform_wrap() {
        let u = IncrementDistribution::uniform(0.0, 1.0).unwrap();
        assert_eq!(series_length(&u, 1.0, 1e-10).unwrap(), 0);
    }

    #[test]
    fn series_length_is_minimal_for_its_bound() {
        let d = uniform_half();
        let tol = 1e-10;
        let r = series_length(&d, 1.0, tol).unwrap();
        assert!((50..=62).contains(&r), "R = {r}");
        let (sup, _) = sup_coefficient_modulus(&d, 1.0).unwrap();
        let q = sup.max(decay_envelope(&d, 1.0).bound(KSCAN + 1));
        // Defining property and minimality.
        assert!(2.0 * series_sum(&d, 1.0, (r + 1) as u32) / (1.0 - q) < tol);
        assert!(2.0 * series_sum(&d, 1.0, r as u32) / (1.0 - q) >= tol);
    }

    #[test]
    fn series_length_grows_as_tolerance_shrinks() {
        let d = uniform_half();
        let r6 = series_length(&d, 1.0, 1e-6).unwrap();
        let r10 = series_length(&d, 1.0, 1e-10).unwrap();
        assert!(r6 <= r10, "R(1e-6) = {r6}, R(1e-10) = {r10}");
        assert!(r6 > 0);
    }

    #[test]
    fn truncation_bound_verified_by_direct_summation() {
        // The discarded tail beyond K = kmax(tol, rho), summed directly out
        // to k = 10^5, must sit below tol.
        let d = uniform_half();
        let tol = 1e-6;
        let rho = 3u32;
        let k = kmax(&d, 1.0, tol, rho).unwrap();
        assert!(k < 100_000, "test needs K below the direct-summation range, got {k}");
        let tail: f64 =
            (k + 1..=100_000).map(|j| coefficient_modulus(&d, 1.0, j).powi(rho as i32)).sum();
        assert!(2.0 * tail < tol, "direct tail {} at K = {k}", 2.0 * tail);
    }

    #[test]
    fn spectrum_construction_validates_scale() {
        let d = uniform_half();
        assert!(WrappedSpectrum::new(d, 0.0).is_err());
        assert!(WrappedSpectrum::new(d, f64::NAN).is_err());
        assert!(WrappedSpectrum::new(d, 1e-9).is_err());
        let spec = WrappedSpectrum::new(d, 1.0).unwrap();
        assert_eq!(spec.sup_frequency(), 1);
        assert!((spec.sup_modulus() - 2.0 / PI).abs() < 1e-14);
        assert!((spec.decay_rate() - (PI / 2.0).ln()).abs() < 1e-14);
        // Beyond the scanned band the envelope is tiny, so the certified
        // contraction equals the scanned supremum here.
        assert_eq!(spec.contraction(), spec.sup_modulus());
    }

    #[test]
    fn density_of_full_period_uniform_is_one_everywhere() {
        let d = IncrementDistribution::uniform(0.0, 1.0).unwrap();
        let spec = WrappedSpectrum::new(d, 1.0).unwrap();
        for &u in &[0.0, 0.3, 0.77] {
            for rho in [1u32, 5] {
                assert!((spec.density(rho, 100, u) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn density_flattens_to_uniform_for_long_walks() {
        let spec = WrappedSpectrum::new(uniform_half(), 1.0).unwrap();
        for &u in &[0.1, 0.5, 0.9] {
            let d = spec.density_auto(200, 1e-6, u).unwrap();
            assert!((d.value - 1.0).abs() < 1e-6, "g_200({u}) = {}", d.value);
            assert_eq!(d.clipped, 0.0);
        }
    }

    #[test]
    fn density_normalizes_under_trapezoid_rule() {
        // Trapezoid on 2^12 closed points of the band-limited synthesis:
        // every rotator below the Nyquist band averages to zero exactly.
        let d = uniform_half();
        let n = 1 << 12;
        let mut acc = 0.0;
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            acc += w * wrapped_density(&d, 1.0, 1, 4095, j as f64 / n as f64);
        }
        acc /= n as f64;
        assert!((acc - 1.0).abs() < 1e-10, "integral = {acc}");
    }

    #[test]
    fn density_stays_above_minus_tol_before_clipping() {
        let d = uniform_half();
        let tol = 1e-4;
        let k = kmax(&d, 1.0, tol, 2).unwrap();
        for j in 0..=100 {
            let u = j as f64 / 100.0;
            let raw = wrapped_density(&d, 1.0, 2, k, u);
            assert!(raw >= -tol, "g_2({u}) = {raw}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Coefficient moduli never exceed 1 and always sit under the
        /// certified envelope wherever it applies.
        #[test]
        fn envelope_dominates_moduli(
            kind in 0..3usize,
            a in -2.0..2.0f64,
            width in 0.1..3.0f64,
            x in 0.05..5.0f64,
            neg in proptest::bool::ANY,
            k in 1..5000usize,
        ) {
            let kind = [IncrementKind::Uniform, IncrementKind::Triangular, IncrementKind::RaisedCosine][kind];
            let dist = IncrementDistribution::new(kind, a, a + width).unwrap();
            let x = if neg { -x } else { x };
            let m = coefficient_modulus(&dist, x, k);
            prop_assert!(m <= 1.0 + 1e-12);
            let env = decay_envelope(&dist, x);
            prop_assert!(m <= env.bound(k) + 1e-12,
                "k = {}, modulus = {}, bound = {}", k, m, env.bound(k));
        }

        /// Powers of coefficients equal coefficients of longer walks.
        #[test]
        fn wrapped_coefficient_is_a_power(
            x in 0.1..3.0f64,
            k in 1..50usize,
            rho in 1..20u32,
        ) {
            let d = IncrementDistribution::raised_cosine(-0.5, 1.0).unwrap();
            let direct = wrapped_coefficient(&d, x, k, rho);
            let base = coefficient(&d, x, k);
            let mut acc = num_complex::Complex64::new(1.0, 0.0);
            for _ in 0..rho { acc *= base; }
            prop_assert!((direct - acc).norm() < 1e-12);
        }
    }
}

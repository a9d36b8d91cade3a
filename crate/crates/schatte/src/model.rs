//! Random walks observed modulo one.
//!
//! The object of study is the sequence of fractional parts `{S_j * x}` where
//! `S_j = X_1 + ... + X_j` is a random walk with absolutely continuous
//! increments and `x` is a fixed nonzero scale.  This module provides the
//! increment laws, the walk simulator, and the empirical statistics (ECDF,
//! centered-and-scaled empirical process, sup statistics) built from a sample.
//!
//! # Example
//!
//! ```
//! use schatte::model::{empirical_process, simulate_walk, IncrementDistribution, WalkConfig};
//!
//! let dist = IncrementDistribution::uniform(0.0, 0.5)?;
//! let walk = WalkConfig::new(dist, 1.0, 1024, 9)?;
//! let sample = simulate_walk(&walk);
//! assert!(sample.values().iter().all(|v| (0.0..1.0).contains(v)));
//!
//! // The centered, scaled empirical process sqrt(n) (F_n(s) - s).
//! let dev = empirical_process(&sample, &[0.25, 0.5, 0.75])?;
//! assert_eq!(dev.len(), 3);
//! assert!(dev.iter().all(|d| d.abs() < 3.0));
//! # Ok::<(), schatte::Error>(())
//! ```

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional part mapped into `[0, 1)`.
///
/// `x - floor(x)` is mathematically in `[0, 1)`; rounding can push the result
/// to exactly `1.0` when `x` sits just below an integer, in which case the
/// correct wrapped value is `0`.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// The centered indicator kernel `f_a(x) = 1{ {x} <= a } - a`.
///
/// It is 1-periodic and has mean zero in `a` over one period.
pub fn kernel_value(a: f64, x: f64) -> f64 {
    if frac(x) <= a {
        1.0 - a
    } else {
        -a
    }
}

/// A validated kernel level `a` in `[0, 1]` for the indicator kernel family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelLevel(f64);

impl KernelLevel {
    pub fn new(a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Domain(format!("kernel level {a} outside [0, 1]")));
        }
        Ok(KernelLevel(a))
    }

    pub fn level(&self) -> f64 {
        self.0
    }

    pub fn value_at(&self, x: f64) -> f64 {
        kernel_value(self.0, x)
    }
}

/// The supported increment families.  All three are absolutely continuous
/// with bounded density, which is what the mixing theory requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementKind {
    Uniform,
    Triangular,
    RaisedCosine,
}

/// An increment law on the interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncrementDistribution {
    pub kind: IncrementKind,
    pub a: f64,
    pub b: f64,
}

impl IncrementDistribution {
    pub fn new(kind: IncrementKind, a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(Error::InvalidConfig(format!(
                "increment support [{a}, {b}] must be a nondegenerate finite interval"
            )));
        }
        Ok(IncrementDistribution { kind, a, b })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new(IncrementKind::Uniform, a, b)
    }

    pub fn triangular(a: f64, b: f64) -> Result<Self> {
        Self::new(IncrementKind::Triangular, a, b)
    }

    pub fn raised_cosine(a: f64, b: f64) -> Result<Self> {
        Self::new(IncrementKind::RaisedCosine, a, b)
    }

    fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    /// Probability density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            return 0.0;
        }
        let c = self.midpoint();
        let w = self.half_width();
        // Membership is decided on the stored endpoints above; clamping only
        // absorbs the rounding of (x - c) / w at the support boundary.
        let z = ((x - c) / w).clamp(-1.0, 1.0);
        match self.kind {
            IncrementKind::Uniform => 0.5 / w,
            IncrementKind::Triangular => (1.0 - z.abs()) / w,
            IncrementKind::RaisedCosine => 0.5 * (1.0 + (std::f64::consts::PI * z).cos()) / w,
        }
    }

    /// The essential supremum of the density (used as the constant `M` in the
    /// mixing estimates).
    pub fn density_bound(&self) -> f64 {
        let w = self.half_width();
        match self.kind {
            IncrementKind::Uniform => 0.5 / w,
            // Both peak at the midpoint with height 2 / (b - a).
            IncrementKind::Triangular | IncrementKind::RaisedCosine => 1.0 / w,
        }
    }

    /// Characteristic function `E exp(i * theta * X)`.
    ///
    /// Closed forms, written around the midpoint so the modulus factor is a
    /// real function of `theta * half_width` with removable singularities
    /// handled explicitly:
    ///
    /// * uniform:       `exp(i theta c) * sinc(theta w)`
    /// * triangular:    `exp(i theta c) * sinc(theta w / 2)^2`
    /// * raised cosine: `exp(i theta c) * sinc(theta w) * pi^2 / (pi^2 - (theta w)^2)`
    pub fn char_fn(&self, theta: f64) -> Complex64 {
        let c = self.midpoint();
        let w = self.half_width();
        let phase = Complex64::from_polar(1.0, theta * c);
        let z = theta * w;
        let modulus = match self.kind {
            IncrementKind::Uniform => sinc(z),
            IncrementKind::Triangular => {
                let s = sinc(0.5 * z);
                s * s
            }
            IncrementKind::RaisedCosine => raised_cosine_factor(z),
        };
        phase * modulus
    }

    /// Draw one increment.  Inverse-CDF sampling throughout, so a given RNG
    /// stream always produces the same values.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.quantile(u)
    }

    /// Quantile function on `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let c = self.midpoint();
        let w = self.half_width();
        match self.kind {
            IncrementKind::Uniform => self.a + (self.b - self.a) * u,
            IncrementKind::Triangular => {
                if u <= 0.5 {
                    self.a + w * (2.0 * u).sqrt()
                } else {
                    self.b - w * (2.0 * (1.0 - u)).sqrt()
                }
            }
            IncrementKind::RaisedCosine => {
                // Solve (z + 1 + sin(pi z)/pi) / 2 = u for z in [-1, 1] by
                // bisection; ~60 iterations pin the root to full precision.
                let target = 2.0 * u - 1.0;
                let g = |z: f64| z + (std::f64::consts::PI * z).sin() / std::f64::consts::PI;
                let mut lo = -1.0_f64;
                let mut hi = 1.0_f64;
                for _ in 0..70 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                c + w * 0.5 * (lo + hi)
            }
        }
    }
}

/// `sin(z) / z` with the removable singularity at zero.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// `sinc(z) * pi^2 / (pi^2 - z^2)` with the removable singularities at
/// `z = +-pi` rewritten as `pi^2 sin(d) / (d (pi + d)(2 pi + d))` for
/// `d = |z| - pi`, which is stable near the pole.
fn raised_cosine_factor(z: f64) -> f64 {
    use std::f64::consts::PI;
    let az = z.abs();
    if (az - PI).abs() < 1e-3 {
        let d = az - PI;
        let sd = if d.abs() < 1e-8 { 1.0 - d * d / 6.0 } else { d.sin() / d };
        PI * PI * sd / ((PI + d) * (2.0 * PI + d))
    } else {
        sinc(z) * PI * PI / (PI * PI - z * z)
    }
}

/// Full description of a walk to simulate: increment law, scale, length, seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub dist: IncrementDistribution,
    pub x: f64,
    pub n: usize,
    pub seed: u64,
}

impl WalkConfig {
    pub fn new(dist: IncrementDistribution, x: f64, n: usize, seed: u64) -> Result<Self> {
        if x == 0.0 || !x.is_finite() {
            return Err(Error::InvalidConfig(format!("scale x = {x} must be finite and nonzero")));
        }
        if n == 0 {
            return Err(Error::InvalidConfig("walk length n must be at least 1".into()));
        }
        Ok(WalkConfig { dist, x, n, seed })
    }
}

/// A simulated (or hand-built) sample of fractional parts together with its
/// provenance, so any derived statistic can be regenerated exactly.
#[derive(Debug, Clone)]
pub struct FracSample {
    values: Vec<f64>,
    config: WalkConfig,
    stream: u64,
}

impl FracSample {
    /// Wrap precomputed values (used by tests and by file import).  Every
    /// value must lie in `[0, 1)`.
    pub fn from_values(values: Vec<f64>, config: WalkConfig, stream: u64) -> Result<Self> {
        if values.len() != config.n {
            return Err(Error::InvalidConfig(format!(
                "sample has {} values but the configuration says n = {}",
                values.len(),
                config.n
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(Error::Domain(format!("sample value {v} outside [0, 1)")));
        }
        Ok(FracSample { values, config, stream })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Write the sample as CSV with header `index,frac_value`; the index is
    /// the step number `j = 1..n` and values carry 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,frac_value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{:.16e}", j + 1, v)?;
        }
        Ok(())
    }
}

/// Simulate the walk of `config` on RNG stream 0.
pub fn simulate_walk(config: &WalkConfig) -> FracSample {
    simulate_walk_stream(config, 0)
}

/// Simulate the walk of `config` on a numbered RNG stream.  Streams with the
/// same seed and different indices are statistically independent, which is how
/// replicas are parallelized deterministically.
pub fn simulate_walk_stream(config: &WalkConfig, stream: u64) -> FracSample {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let mut values = Vec::with_capacity(config.n);
    // Kahan-compensated accumulation of the wrapped partial sums.  Each step
    // adds frac(X_j * x) and reduces mod 1; the subtraction of 1 on values in
    // [1, 2) is exact, so the compensation survives the wrap and the total
    // roundoff stays O(n * ulp).
    let mut s = 0.0_f64;
    let mut comp = 0.0_f64;
    for _ in 0..config.n {
        let step = frac(config.dist.sample(&mut rng) * config.x);
        let y = step - comp;
        let t = s + y;
        comp = (t - s) - y;
        s = t;
        if s >= 1.0 {
            s -= 1.0;
        }
        values.push(s);
    }
    FracSample { values, config: *config, stream }
}

/// Empirical CDF `F_n(s) = (1/n) #{ j : value_j <= s }` for `s` in `[0, 1]`.
pub fn empirical_cdf(sample: &FracSample, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("ECDF argument {s} outside [0, 1]")));
    }
    if sample.is_empty() {
        return Err(Error::InvalidConfig("ECDF of an empty sample".into()));
    }
    let count = sample.values.iter().filter(|v| **v <= s).count();
    Ok(count as f64 / sample.len() as f64)
}

/// Centered and scaled empirical process `sqrt(n) (F_n(z_j) - z_j)` on a grid.
///
/// The grid must be sorted, within `[0, 1]`, and nonempty.  One sort of the
/// sample plus a single merge makes the whole evaluation O(n log n + grid).
pub fn empirical_process(sample: &FracSample, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empirical process needs a nonempty grid".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("empirical process grid must be sorted".into()));
    }
    if grid[0] < 0.0 || *grid.last().unwrap() > 1.0 {
        return Err(Error::Domain("empirical process grid must lie in [0, 1]".into()));
    }
    if sample.is_empty() {
        return Err(Error::InvalidConfig("empirical process of an empty sample".into()));
    }

    let mut sorted = sample.values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let sqrt_n = (n as f64).sqrt();

    let mut out = Vec::with_capacity(grid.len());
    let mut idx = 0usize;
    for &z in grid {
        while idx < n && sorted[idx] <= z {
            idx += 1;
        }
        out.push(sqrt_n * (idx as f64 / n as f64 - z));
    }
    Ok(out)
}

/// `max_j |values[j]|` of a nonempty slice.
pub fn sup_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sup statistic of an empty slice".into()));
    }
    Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn uniform01_config(n: usize, seed: u64) -> WalkConfig {
        WalkConfig::new(IncrementDistribution::uniform(0.0, 1.0).unwrap(), 1.0, n, seed).unwrap()
    }

    /// Quadrature oracle for the characteristic function: Simpson's rule on
    /// the density, split at the midpoint kink.
    fn char_fn_oracle(dist: &IncrementDistribution, theta: f64) -> Complex64 {
        let simpson = |lo: f64, hi: f64| {
            let m = 20_000usize;
            let h = (hi - lo) / m as f64;
            // Nodes by exact interpolation fractions so the first and last
            // land on lo and hi without drifting off the support.
            let node = |t: f64| lo + (hi - lo) * t;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..m {
                let x0 = node(i as f64 / m as f64);
                let x1 = node((i as f64 + 0.5) / m as f64);
                let x2 = node((i as f64 + 1.0) / m as f64);
                let f = |x: f64| Complex64::from_polar(dist.density(x), theta * x);
                acc += (f(x0) + 4.0 * f(x1) + f(x2)) * (h / 6.0);
            }
            acc
        };
        let c = 0.5 * (dist.a + dist.b);
        simpson(dist.a, c) + simpson(c, dist.b)
    }

    #[test]
    fn frac_stays_in_unit_interval() {
        for &x in &[-5.3, -1.0, -1e-17, 0.0, 0.25, 1.0, 7.9, 1e9 + 0.5, -4.440892098500626e-16] {
            let f = frac(x);
            assert!((0.0..1.0).contains(&f), "frac({x}) = {f}");
        }
        assert!((frac(-5.3) - 0.7).abs() < 1e-12);
        assert_eq!(frac(3.0), 0.0);
    }

    #[test]
    fn kernel_is_periodic_and_mean_zero() {
        let a = 0.37;
        // Periodicity holds wherever the shifted argument's rounding does
        // not cross the indicator threshold (x = a itself would).
        for &x in &[0.1, 0.36, 0.5, 0.9] {
            assert_eq!(kernel_value(a, x), kernel_value(a, x + 1.0));
            assert_eq!(kernel_value(a, x), kernel_value(a, x - 2.0));
        }
        // Mean zero over one period: exact Riemann evaluation by splitting at a.
        let integral = a * (1.0 - a) + (1.0 - a) * (-a);
        assert!(integral.abs() < TOL);
        // Indicator jump: f_a(a) uses the inclusive indicator.
        assert_eq!(kernel_value(a, a), 1.0 - a);
    }

    #[test]
    fn kernel_l2_modulus_is_sqrt_scale() {
        // || f_a(. + h) - f_a ||_2^2 = 2h for h below min(a, 1 - a): the
        // kernels are Hoelder-1/2 in L^2, not Lipschitz.
        let a = 0.4;
        for &h in &[1e-1, 1e-2, 1e-3] {
            let m = 200_000usize;
            let mut acc = 0.0;
            for i in 0..m {
                let x = (i as f64 + 0.5) / m as f64;
                let d = kernel_value(a, x + h) - kernel_value(a, x);
                acc += d * d;
            }
            acc /= m as f64;
            assert!((acc - 2.0 * h).abs() < 1e-4, "h = {h}: got {acc}");
        }
    }

    #[test]
    fn density_bounds_match_hand_values() {
        let u01 = IncrementDistribution::uniform(0.0, 1.0).unwrap();
        let u05 = IncrementDistribution::uniform(0.0, 0.5).unwrap();
        let tri = IncrementDistribution::triangular(-1.0, 1.0).unwrap();
        assert_eq!(u01.density_bound(), 1.0);
        assert_eq!(u05.density_bound(), 2.0);
        assert_eq!(tri.density_bound(), 1.0);
    }

    #[test]
    fn densities_integrate_to_one() {
        // Simpson with a split at the midpoint kink; tolerance 1e-10.
        let dists = [
            IncrementDistribution::uniform(0.0, 1.0).unwrap(),
            IncrementDistribution::uniform(-0.3, 0.9).unwrap(),
            IncrementDistribution::triangular(-1.0, 1.0).unwrap(),
            IncrementDistribution::triangular(0.2, 0.7).unwrap(),
            IncrementDistribution::raised_cosine(0.0, 0.5).unwrap(),
            IncrementDistribution::raised_cosine(-2.0, 1.0).unwrap(),
        ];
        for dist in dists {
            let total = char_fn_oracle(&dist, 0.0).re;
            assert!((total - 1.0).abs() < 1e-10, "{dist:?}: integral = {total}");
        }
    }

    #[test]
    fn char_fn_at_zero_is_one() {
        let dists = [
            IncrementDistribution::uniform(0.0, 0.5).unwrap(),
            IncrementDistribution::triangular(-1.0, 1.0).unwrap(),
            IncrementDistribution::raised_cosine(0.0, 1.0).unwrap(),
        ];
        for dist in dists {
            let v = dist.char_fn(0.0);
            assert!((v - Complex64::new(1.0, 0.0)).norm() < TOL);
        }
    }

    #[test]
    fn char_fn_agrees_with_quadrature_oracle() {
        let dists = [
            IncrementDistribution::uniform(0.0, 0.5).unwrap(),
            IncrementDistribution::uniform(-0.25, 1.5).unwrap(),
            IncrementDistribution::triangular(-1.0, 1.0).unwrap(),
            IncrementDistribution::triangular(0.1, 0.9).unwrap(),
            IncrementDistribution::raised_cosine(0.0, 0.5).unwrap(),
            IncrementDistribution::raised_cosine(-1.0, 2.0).unwrap(),
        ];
        for dist in dists {
            for &theta in &[0.3, 1.0, std::f64::consts::TAU, 7.0, 12.56, 40.0] {
                let exact = dist.char_fn(theta);
                let quad = char_fn_oracle(&dist, theta);
                assert!(
                    (exact - quad).norm() < 1e-9,
                    "{dist:?} at theta = {theta}: {exact} vs {quad}"
                );
            }
        }
    }

    #[test]
    fn char_fn_uniform_half_at_tau_has_modulus_two_over_pi() {
        // Frozen from the quadrature oracle and the closed form alike.
        let dist = IncrementDistribution::uniform(0.0, 0.5).unwrap();
        let v = dist.char_fn(std::f64::consts::TAU);
        assert!((v.norm() - 2.0 / std::f64::consts::PI).abs() < TOL);
        assert!((v.norm() - std::f64::consts::FRAC_2_PI).abs() < TOL);
    }

    #[test]
    fn raised_cosine_factor_is_continuous_at_pole() {
        // The removable singularity at z = pi evaluates to 1/2.
        use std::f64::consts::PI;
        assert!((raised_cosine_factor(PI) - 0.5).abs() < 1e-12);
        for &d in &[1e-9, 1e-6, 1e-4, 9.9e-4, 1.1e-3, 1e-2] {
            let lo = raised_cosine_factor(PI - d);
            let hi = raised_cosine_factor(PI + d);
            assert!((lo - 0.5).abs() < 2e-2);
            assert!((hi - 0.5).abs() < 2e-2);
            assert!((lo - hi).abs() < 2e-2);
        }
    }

    #[test]
    fn quantiles_invert_the_cdf() {
        // Numerically integrate the density up to the quantile and compare
        // with u, for all three families.
        let dists = [
            IncrementDistribution::uniform(-0.5, 2.0).unwrap(),
            IncrementDistribution::triangular(0.0, 1.0).unwrap(),
            IncrementDistribution::raised_cosine(-1.0, 3.0).unwrap(),
        ];
        for dist in dists {
            for &u in &[0.01, 0.2, 0.5, 0.77, 0.99] {
                let q = dist.quantile(u);
                // CDF by fine Riemann sum.
                let m = 400_000usize;
                let h = (q - dist.a) / m as f64;
                let mut acc = 0.0;
                for i in 0..m {
                    acc += dist.density(dist.a + (i as f64 + 0.5) * h) * h;
                }
                assert!((acc - u).abs() < 1e-5, "{dist:?} u = {u}: cdf(quantile) = {acc}");
            }
        }
    }

    #[test]
    fn walk_values_stay_in_unit_interval() {
        for x in [1.0, -0.37, 2.719, 1e4] {
            let cfg =
                WalkConfig::new(IncrementDistribution::triangular(-1.0, 1.0).unwrap(), x, 1000, 7)
                    .unwrap();
            let sample = simulate_walk(&cfg);
            assert_eq!(sample.len(), 1000);
            assert!(sample.values().iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn walk_is_deterministic_per_seed_and_stream() {
        let cfg = uniform01_config(500, 99);
        let a = simulate_walk_stream(&cfg, 3);
        let b = simulate_walk_stream(&cfg, 3);
        let c = simulate_walk_stream(&cfg, 4);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn walk_single_step_matches_direct_draw() {
        let cfg = uniform01_config(1, 123);
        let sample = simulate_walk(&cfg);
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        rng.set_stream(0);
        let direct = frac(cfg.dist.sample(&mut rng) * cfg.x);
        assert_eq!(sample.values()[0], direct);
    }

    #[test]
    fn walk_sample_mean_near_half_for_uniform_increments() {
        // LLN check: for uniform(0,1) increments at x = 1 the wrapped values
        // are i.i.d. uniform, so the sample mean concentrates at 1/2.  The
        // band 0.005 is 5.5 standard errors wide.
        let cfg = uniform01_config(100_000, 2024);
        let sample = simulate_walk(&cfg);
        let mean: f64 = sample.values().iter().sum::<f64>() / sample.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean = {mean}");
    }

    #[test]
    fn walk_uniform01_is_equidistributed_chi_square() {
        // 20-bin chi-square at the 0.001 level; the critical value for 19
        // degrees of freedom is 43.82.
        let cfg = uniform01_config(100_000, 11);
        let sample = simulate_walk(&cfg);
        let mut counts = [0usize; 20];
        for v in sample.values() {
            counts[(v * 20.0) as usize] += 1;
        }
        let expected = sample.len() as f64 / 20.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(stat < 43.82, "chi-square statistic {stat}");
    }

    #[test]
    fn walk_dependent_model_is_also_equidistributed() {
        // uniform(0, 0.5) at x = 1 mixes geometrically; the wrapped law still
        // equidistributes.  Same chi-square gate as above.
        let dist = IncrementDistribution::uniform(0.0, 0.5).unwrap();
        let cfg = WalkConfig::new(dist, 1.0, 100_000, 5).unwrap();
        let sample = simulate_walk(&cfg);
        let mut counts = [0usize; 20];
        for v in sample.values() {
            counts[(v * 20.0) as usize] += 1;
        }
        let expected = sample.len() as f64 / 20.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(stat < 43.82, "chi-square statistic {stat}");
    }

    #[test]
    fn ecdf_matches_hand_counts() {
        let cfg = uniform01_config(3, 0);
        let sample = FracSample::from_values(vec![0.2, 0.4, 0.9], cfg, 0).unwrap();
        assert!((empirical_cdf(&sample, 0.5).unwrap() - 2.0 / 3.0).abs() < TOL);
        // The indicator is inclusive at the threshold.
        assert!((empirical_cdf(&sample, 0.2).unwrap() - 1.0 / 3.0).abs() < TOL);
        assert_eq!(empirical_cdf(&sample, 0.0).unwrap(), 0.0);
        assert_eq!(empirical_cdf(&sample, 1.0).unwrap(), 1.0);
        assert!(empirical_cdf(&sample, 1.5).is_err());
        assert!(empirical_cdf(&sample, -0.1).is_err());
    }

    #[test]
    fn empirical_process_matches_direct_count() {
        let cfg = uniform01_config(4, 0);
        let sample = FracSample::from_values(vec![0.1, 0.3, 0.5, 0.7], cfg, 0).unwrap();
        let vals = empirical_process(&sample, &[0.0, 0.5, 1.0]).unwrap();
        assert!(vals[0].abs() < TOL);
        // F_4(0.5) = 3/4 (inclusive), so sqrt(4) * (3/4 - 1/2) = 1/2.
        assert!((vals[1] - 0.5).abs() < TOL);
        assert!(vals[2].abs() < TOL);
    }

    #[test]
    fn empirical_process_rejects_bad_grids() {
        let cfg = uniform01_config(2, 0);
        let sample = FracSample::from_values(vec![0.1, 0.9], cfg, 0).unwrap();
        assert!(empirical_process(&sample, &[]).is_err());
        assert!(empirical_process(&sample, &[0.4, 0.2]).is_err());
        assert!(empirical_process(&sample, &[0.4, 1.2]).is_err());
    }

    #[test]
    fn empirical_process_agrees_with_brute_force() {
        // The sorted-merge fast path must equal the O(n * grid) brute force
        // exactly, including ties between sample values and grid points.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for case in 0..100 {
            let n = rng.gen_range(1..200usize);
            let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
            values.iter_mut().for_each(|v| *v = v.min(0.999_999));
            let cfg = uniform01_config(n, 0);
            let sample = FracSample::from_values(values.clone(), cfg, 0).unwrap();
            let mut grid: Vec<f64> = (0..rng.gen_range(1..20usize))
                .map(|_| rng.gen_range(0..=10) as f64 / 10.0)
                .collect();
            grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let fast = empirical_process(&sample, &grid).unwrap();
            let sqrt_n = (n as f64).sqrt();
            for (i, &z) in grid.iter().enumerate() {
                let count = values.iter().filter(|v| **v <= z).count();
                let brute = sqrt_n * (count as f64 / n as f64 - z);
                assert_eq!(fast[i], brute, "case {case}, z = {z}");
            }
        }
    }

    #[test]
    fn sup_statistic_takes_absolute_values() {
        assert_eq!(sup_statistic(&[0.1, -0.7, 0.3]).unwrap(), 0.7);
        assert_eq!(sup_statistic(&[0.0]).unwrap(), 0.0);
        assert!(sup_statistic(&[]).is_err());
    }

    #[test]
    fn from_values_validates_range_and_length() {
        let cfg = uniform01_config(2, 0);
        assert!(FracSample::from_values(vec![0.5, 1.0], cfg, 0).is_err());
        assert!(FracSample::from_values(vec![-0.1, 0.5], cfg, 0).is_err());
        assert!(FracSample::from_values(vec![0.5], cfg, 0).is_err());
        assert!(FracSample::from_values(vec![0.0, 0.999], cfg, 0).is_ok());
    }

    #[test]
    fn walk_config_validation() {
        let dist = IncrementDistribution::uniform(0.0, 1.0).unwrap();
        assert!(WalkConfig::new(dist, 0.0, 10, 0).is_err());
        assert!(WalkConfig::new(dist, f64::NAN, 10, 0).is_err());
        assert!(WalkConfig::new(dist, 1.0, 0, 0).is_err());
        assert!(IncrementDistribution::uniform(1.0, 1.0).is_err());
        assert!(IncrementDistribution::uniform(2.0, 1.0).is_err());
    }
}

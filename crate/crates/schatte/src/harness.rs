//! Experiment orchestration: configuration, seed bookkeeping, the three
//! verification experiments (covariance, distribution, rate), and the block
//! profile runner.
//!
//! Reports are plain serializable structs with a fixed field order and no
//! timestamps, so a given configuration always produces byte-identical
//! output regardless of thread count; wall-clock chatter belongs on stderr.
//!
//! # Example
//!
//! ```
//! use schatte::harness::{run_blocks, ExperimentConfig};
//! use schatte::model::IncrementDistribution;
//!
//! // The documented defaults are deliberately outside the admissible
//! // exponent regime (desk-scale blocks sit far from asymptopia); every
//! // report carries that flag.
//! let config = ExperimentConfig::default();
//! assert!(!config.exponents().is_feasible());
//!
//! // A tiny block-profile run; long blocks carry positive variance.
//! let dist = IncrementDistribution::uniform(0.0, 1.0)?;
//! let out = run_blocks(dist, 1.0, 3, 256, 0.5, 0.25, 0.5, 32)?;
//! assert!(out.sum_var_long > 0.0);
//! # Ok::<(), schatte::Error>(())
//! ```

use serde::{Deserialize, Serialize, Serializer};

use crate::blocks::{block_correlation, replica_block_sums, variance_profile, BlockPlan};
use crate::covariance::{CovarianceEvaluator, CovarianceSettings};
use crate::error::{Error, Result};
use crate::exponents::ExponentTuple;
use crate::gp::{sup_abs, GpSampler, SampleGrid};
use crate::model::{
    empirical_process, simulate_walk_stream, IncrementDistribution, IncrementKind, KernelLevel,
    WalkConfig,
};
use crate::stats::{ks_two_sample, linear_fit, mean_se};

/// JSON has no infinities: serialize non-finite floats as the strings
/// "inf" / "-inf" / "nan".
pub fn serialize_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

/// Increment law as it appears in configuration files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    pub kind: IncrementKind,
    pub a: f64,
    pub b: f64,
}

/// One experiment configuration; the single JSON object understood by the
/// command-line driver.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dist: DistConfig,
    /// Scale multiplier applied to the walk before wrapping.
    pub x: f64,
    /// Walk length.
    pub n: usize,
    /// Grid exponent: level mesh `n^-epsilon`.
    pub epsilon: f64,
    /// Long-block exponent.
    pub alpha: f64,
    /// Short-block exponent.
    pub beta: f64,
    /// Target polynomial rate (recorded in the regime check).
    pub gamma: f64,
    /// Monte Carlo replicas per experiment.
    pub replicas: usize,
    /// Series / quadrature tolerance for covariance evaluation.
    pub tol: f64,
    /// Base seed; replicas use generator streams, never reseeding.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dist: DistConfig { kind: IncrementKind::Uniform, a: 0.0, b: 0.5 },
            x: 1.0,
            n: 4096,
            epsilon: 0.5,
            alpha: 0.5,
            beta: 0.1,
            gamma: 0.02,
            replicas: 2000,
            tol: 1e-10,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.dist()?;
        Ok(config)
    }

    /// The validated increment law (deserialization alone does not check
    /// the support interval).
    pub fn dist(&self) -> Result<IncrementDistribution> {
        IncrementDistribution::new(self.dist.kind, self.dist.a, self.dist.b)
    }

    pub fn exponents(&self) -> ExponentTuple {
        ExponentTuple::new(self.alpha, self.beta, self.gamma, self.epsilon)
    }

    fn covariance_settings(&self) -> CovarianceSettings {
        CovarianceSettings { tol: self.tol, ..CovarianceSettings::default() }
    }
}

/// Where every random number in a report came from.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StreamSpan {
    pub purpose: String,
    pub first_stream: u64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SeedManifest {
    pub seed: u64,
    pub spans: Vec<StreamSpan>,
}

/// Feasibility of the configured exponents (desk-scale settings are allowed
/// to be out of regime; the report says so).
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RegimeSummary {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub feasible: bool,
    pub violated: Vec<String>,
}

impl RegimeSummary {
    fn from_config(config: &ExperimentConfig) -> Self {
        let tuple = config.exponents();
        let violated: Vec<String> = tuple.violated().iter().map(|c| c.name().to_string()).collect();
        RegimeSummary {
            alpha: tuple.alpha,
            beta: tuple.beta,
            gamma: tuple.gamma,
            epsilon: tuple.epsilon,
            feasible: violated.is_empty(),
            violated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Common report envelope; `details` describe the setup, `estimates` carry
/// the numbers, `verdict` is the one-word conclusion.
#[derive(Debug, Clone, Serialize)]
pub struct Report<D: Serialize, E: Serialize> {
    pub experiment: &'static str,
    pub parameters: ExperimentConfig,
    pub exponent_regime: RegimeSummary,
    pub seed_manifest: SeedManifest,
    pub details: D,
    pub estimates: E,
    pub verdict: Verdict,
}

/// Run `f` on a dedicated rayon pool of `threads` workers (or the global
/// pool when `None`).  All experiments produce thread-count-independent
/// results; this merely controls parallelism.
pub fn with_thread_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Normalized empirical processes for walk replicas on `streams
/// 0..replicas`, flattened row-major (`replica * grid_len + level`).
fn replica_processes(walk: &WalkConfig, grid: &[f64], replicas: usize) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let rows: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|stream| {
            let sample = simulate_walk_stream(walk, stream);
            empirical_process(&sample, grid)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let g = grid.len();
    let mut flat = Vec::with_capacity(replicas * g);
    for row in rows {
        debug_assert_eq!(row.len(), g);
        flat.extend_from_slice(&row);
    }
    Ok(flat)
}

// ---------------------------------------------------------------------------
// Covariance experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceDetails {
    pub grid_len: usize,
    pub delta: f64,
    pub series_len: usize,
    pub quad_nodes: usize,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceLadderEntry {
    pub n: usize,
    #[serde(serialize_with = "serialize_extended")]
    pub max_abs_z: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub mean_abs_z: f64,
    pub worst_pair: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceEstimates {
    pub ladder: Vec<CovarianceLadderEntry>,
    #[serde(serialize_with = "serialize_extended")]
    pub final_max_abs_z: f64,
}

pub type CovarianceReport = Report<CovarianceDetails, CovarianceEstimates>;

/// Empirical-vs-exact covariance deviations in jackknife standard errors,
/// per grid pair, on a ladder of walk lengths ending at the configured `n`.
fn pair_deviation_stats(
    flat: &[f64],
    replicas: usize,
    grid: &[f64],
    gamma: &nalgebra::DMatrix<f64>,
) -> (f64, f64, (f64, f64)) {
    use rayon::prelude::*;
    let g = grid.len();
    let m = replicas;
    let mf = m as f64;
    let mut s1 = vec![0.0f64; g];
    for r in 0..m {
        for i in 0..g {
            s1[i] += flat[r * g + i];
        }
    }
    let pairs: Vec<(usize, usize)> = (0..g).flat_map(|i| (i..g).map(move |j| (i, j))).collect();
    let zs: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut s_ij = 0.0;
            for r in 0..m {
                s_ij += flat[r * g + i] * flat[r * g + j];
            }
            let cov = (s_ij - s1[i] * s1[j] / mf) / (mf - 1.0);
            let diff = cov - gamma[(i, j)];
            // Leave-one-replica-out covariances from sufficient statistics.
            let rm = mf - 1.0;
            let mut loo_sum = 0.0;
            let mut loo_sq = 0.0;
            for r in 0..m {
                let (ei, ej) = (flat[r * g + i], flat[r * g + j]);
                let c = (s_ij - ei * ej - (s1[i] - ei) * (s1[j] - ej) / rm) / (rm - 1.0);
                loo_sum += c;
                loo_sq += c * c;
            }
            let loo_mean = loo_sum / mf;
            let se = (rm / mf * (loo_sq - mf * loo_mean * loo_mean).max(0.0)).sqrt();
            if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut max_z = 0.0f64;
    let mut worst = (grid[0], grid[0]);
    let mut total = 0.0;
    for (&z, &(i, j)) in zs.iter().zip(pairs.iter()) {
        total += z;
        if z > max_z {
            max_z = z;
            worst = (grid[i], grid[j]);
        }
    }
    (max_z, total / pairs.len() as f64, worst)
}

pub fn run_covariance(config: &ExperimentConfig) -> Result<CovarianceReport> {
    let dist = config.dist()?;
    let grid = SampleGrid::build(config.n, config.epsilon)?;
    let settings = config.covariance_settings();
    let evaluator = CovarianceEvaluator::new(dist, config.x, settings)?;
    let gamma = evaluator.gamma_matrix(grid.points())?;

    let mut ladder_ns: Vec<usize> =
        [config.n / 16, config.n / 4, config.n].into_iter().filter(|&v| v >= 2).collect();
    ladder_ns.dedup();

    let m = config.replicas;
    let mut ladder = Vec::new();
    let mut final_max = f64::INFINITY;
    let verdict = if m < 3 {
        // No jackknife error bars from fewer than three replicas.
        Verdict::Inconclusive
    } else {
        for &nj in &ladder_ns {
            let walk = WalkConfig::new(dist, config.x, nj, config.seed)?;
            let flat = replica_processes(&walk, grid.points(), m)?;
            let (max_z, mean_z, worst) = pair_deviation_stats(&flat, m, grid.points(), &gamma);
            ladder.push(CovarianceLadderEntry {
                n: nj,
                max_abs_z: max_z,
                mean_abs_z: mean_z,
                worst_pair: worst,
            });
        }
        final_max = ladder.last().map(|e| e.max_abs_z).unwrap_or(f64::INFINITY);
        if final_max <= 3.0 {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };

    let g = grid.len();
    Ok(Report {
        experiment: "covariance",
        parameters: config.clone(),
        exponent_regime: RegimeSummary::from_config(config),
        seed_manifest: SeedManifest {
            seed: config.seed,
            spans: vec![StreamSpan {
                purpose: "walk replicas (per ladder length)".into(),
                first_stream: 0,
                count: m as u64,
            }],
        },
        details: CovarianceDetails {
            grid_len: g,
            delta: grid.delta(),
            series_len: evaluator.series_len(),
            quad_nodes: settings.quad_nodes,
            pairs: g * (g + 1) / 2,
        },
        estimates: CovarianceEstimates { ladder, final_max_abs_z: final_max },
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Distribution experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct DistributionDetails {
    pub grid_len: usize,
    pub delta: f64,
    pub series_len: usize,
    pub gp_rank: usize,
    pub clipped_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionEstimates {
    pub ks_statistic: f64,
    pub ks_scaled: f64,
    pub p_value: f64,
    pub empirical_mean_sup: f64,
    pub gaussian_mean_sup: f64,
    pub empirical_median_sup: f64,
    pub gaussian_median_sup: f64,
}

pub type DistributionReport = Report<DistributionDetails, DistributionEstimates>;

fn median_of(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Compare sup statistics of the normalized empirical process against sups
/// of the Gaussian limit field sampled on the same grid, via two-sample KS.
pub fn run_distribution(config: &ExperimentConfig) -> Result<DistributionReport> {
    let dist = config.dist()?;
    if config.replicas < 10 {
        return Err(Error::InvalidConfig(
            "distribution experiment needs at least 10 replicas".into(),
        ));
    }
    let grid = SampleGrid::build(config.n, config.epsilon)?;
    let settings = config.covariance_settings();
    let evaluator = CovarianceEvaluator::new(dist, config.x, settings)?;
    let gamma = evaluator.gamma_matrix(grid.points())?;
    let sampler = GpSampler::from_matrix(grid.clone(), gamma)?;

    let m = config.replicas;
    let walk = WalkConfig::new(dist, config.x, config.n, config.seed)?;
    let flat = replica_processes(&walk, grid.points(), m)?;
    let g = grid.len();
    let emp_sups: Vec<f64> = (0..m).map(|r| sup_abs(&flat[r * g..(r + 1) * g])).collect();
    let gp_sups: Vec<f64> =
        sampler.sample_paths(config.seed, m as u64, m).iter().map(|p| sup_abs(p)).collect();

    let ks = ks_two_sample(&emp_sups, &gp_sups)?;
    let verdict = if ks.p_value >= 0.01 { Verdict::Pass } else { Verdict::Fail };

    Ok(Report {
        experiment: "distribution",
        parameters: config.clone(),
        exponent_regime: RegimeSummary::from_config(config),
        seed_manifest: SeedManifest {
            seed: config.seed,
            spans: vec![
                StreamSpan { purpose: "walk replicas".into(), first_stream: 0, count: m as u64 },
                StreamSpan {
                    purpose: "gaussian paths".into(),
                    first_stream: m as u64,
                    count: m as u64,
                },
            ],
        },
        details: DistributionDetails {
            grid_len: g,
            delta: grid.delta(),
            series_len: evaluator.series_len(),
            gp_rank: sampler.rank(),
            clipped_mass: sampler.clipped_mass(),
        },
        estimates: DistributionEstimates {
            ks_statistic: ks.statistic,
            ks_scaled: ks.scaled,
            p_value: ks.p_value,
            empirical_mean_sup: mean_se(&emp_sups)?.0,
            gaussian_mean_sup: mean_se(&gp_sups)?.0,
            empirical_median_sup: median_of(emp_sups),
            gaussian_median_sup: median_of(gp_sups),
        },
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Rate experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RateDetails {
    pub grid_len: usize,
    pub self_test: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateLadderEntry {
    pub n: usize,
    pub mean_proxy: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimates {
    pub ladder: Vec<RateLadderEntry>,
    pub slope: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub type RateReport = Report<RateDetails, RateEstimates>;

/// Fit the log-log slope of a convergence proxy (the mean sup distance
/// between the empirical CDF and the identity over the level grid) against
/// the walk length.  The verdict is `pass` when the slope's confidence
/// interval is consistent with decay, i.e. reaches below zero.
///
/// `self_test` short-circuits the proxy to the constant 1, a sequence with
/// no decay whatsoever: a correct harness must answer `fail`.
pub fn run_rate(config: &ExperimentConfig, self_test: bool) -> Result<RateReport> {
    let dist = config.dist()?;
    if config.replicas < 2 {
        return Err(Error::InvalidConfig("rate experiment needs at least 2 replicas".into()));
    }
    let grid = SampleGrid::build(config.n, config.epsilon)?;
    let mut ladder_ns: Vec<usize> = [config.n / 8, config.n / 4, config.n / 2, config.n]
        .into_iter()
        .filter(|&v| v >= 8)
        .collect();
    ladder_ns.dedup();
    if ladder_ns.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "walk length {} leaves fewer than three usable ladder points",
            config.n
        )));
    }

    let m = config.replicas;
    let g = grid.len();
    let mut ladder = Vec::new();
    for &nj in &ladder_ns {
        let proxies: Vec<f64> = if self_test {
            vec![1.0; m]
        } else {
            let walk = WalkConfig::new(dist, config.x, nj, config.seed)?;
            let flat = replica_processes(&walk, grid.points(), m)?;
            let scale = (nj as f64).sqrt();
            (0..m).map(|r| sup_abs(&flat[r * g..(r + 1) * g]) / scale).collect()
        };
        let (mean, se) = mean_se(&proxies)?;
        ladder.push(RateLadderEntry { n: nj, mean_proxy: mean, se });
    }

    let xs: Vec<f64> = ladder.iter().map(|e| (e.n as f64).ln()).collect();
    let ys: Vec<f64> = ladder.iter().map(|e| e.mean_proxy.ln()).collect();
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("rate proxy vanished; log fit impossible".into()));
    }
    let fit = linear_fit(&xs, &ys)?;
    let verdict = if fit.ci_low < 0.0 { Verdict::Pass } else { Verdict::Fail };

    Ok(Report {
        experiment: "rate",
        parameters: config.clone(),
        exponent_regime: RegimeSummary::from_config(config),
        seed_manifest: SeedManifest {
            seed: config.seed,
            spans: vec![StreamSpan {
                purpose: "walk replicas (per ladder length)".into(),
                first_stream: 0,
                count: if self_test { 0 } else { m as u64 },
            }],
        },
        details: RateDetails { grid_len: g, self_test },
        estimates: RateEstimates {
            ladder,
            slope: fit.slope,
            slope_se: fit.slope_se,
            ci_low: fit.ci_low,
            ci_high: fit.ci_high,
        },
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Block profile runner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct BlockPlanSummary {
    pub long_len: usize,
    pub short_len: usize,
    pub count: usize,
    pub tail_len: usize,
}

/// Output of the block profile: per-step variances inside long and short
/// blocks (sum of across-replica block variances over total block steps),
/// the jackknife error of the long estimate, and lag-1 correlations between
/// successive long blocks.
#[derive(Debug, Clone, Serialize)]
pub struct BlocksOutput {
    pub sum_var_long: f64,
    pub sum_var_short: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub se: f64,
    pub correlations: Vec<f64>,
    pub plan: BlockPlanSummary,
}

#[allow(clippy::too_many_arguments)] // one argument per CLI flag of `blocks`
pub fn run_blocks(
    dist: IncrementDistribution,
    x: f64,
    seed: u64,
    n: usize,
    alpha: f64,
    beta: f64,
    level: f64,
    replicas: usize,
) -> Result<BlocksOutput> {
    let plan = BlockPlan::build(n, alpha, beta)?;
    let walk = WalkConfig::new(dist, x, n, seed)?;
    let level = KernelLevel::new(level)?;
    let sums = replica_block_sums(&walk, level, &plan, replicas)?;
    let profile = variance_profile(&sums, &plan)?;
    let correlations = block_correlation(&sums, &plan)?;
    Ok(BlocksOutput {
        sum_var_long: profile.long_per_step,
        sum_var_short: profile.short_per_step,
        se: profile.long_se,
        correlations,
        plan: BlockPlanSummary {
            long_len: plan.long_len,
            short_len: plan.short_len,
            count: plan.count,
            tail_len: plan.tail_len,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_uniform_config() -> ExperimentConfig {
        ExperimentConfig {
            dist: DistConfig { kind: IncrementKind::Uniform, a: 0.0, b: 1.0 },
            n: 256,
            epsilon: 0.5,
            replicas: 200,
            seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_config_matches_documented_values() {
        let c = ExperimentConfig::default();
        assert_eq!(c.dist, DistConfig { kind: IncrementKind::Uniform, a: 0.0, b: 0.5 });
        assert_eq!(c.x, 1.0);
        assert_eq!(c.n, 4096);
        assert_eq!(c.epsilon, 0.5);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.beta, 0.1);
        assert_eq!(c.gamma, 0.02);
        assert_eq!(c.replicas, 2000);
        assert_eq!(c.tol, 1e-10);
        assert_eq!(c.seed, 42);
        // Desk-scale defaults are out of regime, and the report must say so.
        let regime = RegimeSummary::from_config(&c);
        assert!(!regime.feasible);
        assert!(regime.violated.contains(&"coupling".to_string()));
    }

    #[test]
    fn config_round_trips_through_json_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = ExperimentConfig {
            n: 1024,
            dist: DistConfig { kind: IncrementKind::Triangular, a: -1.0, b: 1.0 },
            ..Default::default()
        };
        std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
        let loaded = ExperimentConfig::from_json_file(&path).unwrap();
        assert_eq!(loaded, config);
        // Partial files pick up defaults; unknown keys are rejected.
        std::fs::write(&path, r#"{"n": 512}"#).unwrap();
        let loaded = ExperimentConfig::from_json_file(&path).unwrap();
        assert_eq!(loaded.n, 512);
        assert_eq!(loaded.seed, 42);
        std::fs::write(&path, r#"{"walk_length": 512}"#).unwrap();
        assert!(ExperimentConfig::from_json_file(&path).is_err());
        // Invalid support interval is caught at load time.
        std::fs::write(&path, r#"{"dist": {"kind": "uniform", "a": 1.0, "b": 0.0}}"#).unwrap();
        assert!(ExperimentConfig::from_json_file(&path).is_err());
    }

    #[test]
    fn covariance_experiment_passes_on_the_independent_model() {
        let config = small_uniform_config();
        let report = run_covariance(&config).unwrap();
        assert_eq!(report.experiment, "covariance");
        assert_eq!(report.details.grid_len, 17);
        assert_eq!(report.details.series_len, 0);
        assert_eq!(report.estimates.ladder.len(), 3);
        let final_z = report.estimates.final_max_abs_z;
        assert!(final_z.is_finite());
        // Self-consistency between the verdict and the threshold.
        match report.verdict {
            Verdict::Pass => assert!(final_z <= 3.0),
            Verdict::Fail => assert!(final_z > 3.0),
            Verdict::Inconclusive => panic!("unexpected inconclusive"),
        }
        assert!(final_z < 6.0, "implausibly large deviation {final_z}");
    }

    #[test]
    fn covariance_reports_are_byte_deterministic() {
        let config = small_uniform_config();
        let a = serde_json::to_string(&run_covariance(&config).unwrap()).unwrap();
        let b = serde_json::to_string(&run_covariance(&config).unwrap()).unwrap();
        assert_eq!(a, b);
        // Field order of the envelope is pinned.
        let head = r#"{"experiment":"covariance","parameters":"#;
        assert!(a.starts_with(head), "{}", &a[..80.min(a.len())]);
        let d = a.find("\"details\"").unwrap();
        let e = a.find("\"estimates\"").unwrap();
        let v = a.find("\"verdict\"").unwrap();
        assert!(d < e && e < v);
    }

    #[test]
    fn covariance_with_two_replicas_is_inconclusive() {
        let mut config = small_uniform_config();
        config.replicas = 2;
        let report = run_covariance(&config).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"final_max_abs_z\":\"inf\""), "{json}");
    }

    #[test]
    fn thread_count_does_not_change_reports() {
        let config = small_uniform_config();
        let one = with_thread_pool(Some(1), || run_covariance(&config)).unwrap().unwrap();
        let four = with_thread_pool(Some(4), || run_covariance(&config)).unwrap().unwrap();
        assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
    }

    #[test]
    fn distribution_experiment_compares_sups() {
        let mut config = small_uniform_config();
        config.n = 512;
        config.replicas = 300;
        let report = run_distribution(&config).unwrap();
        assert_eq!(report.experiment, "distribution");
        // Streams are disjoint between walks and Gaussian paths.
        let spans = &report.seed_manifest.spans;
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].first_stream, 0);
        assert_eq!(spans[1].first_stream, 300);
        // Null-ish comparison at desk scale: not catastrophically rejected.
        assert!(report.estimates.p_value > 1e-4, "p = {}", report.estimates.p_value);
        assert!(report.estimates.empirical_mean_sup > 0.3);
        assert!(report.estimates.gaussian_mean_sup > 0.3);
        let again = run_distribution(&config).unwrap();
        assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn distribution_experiment_validates_replicas() {
        let mut config = small_uniform_config();
        config.replicas = 5;
        assert!(run_distribution(&config).is_err());
    }

    #[test]
    fn rate_experiment_sees_square_root_decay_on_iid_walks() {
        let mut config = small_uniform_config();
        config.n = 2048;
        config.replicas = 400;
        let report = run_rate(&config, false).unwrap();
        assert_eq!(report.estimates.ladder.len(), 4);
        let slope = report.estimates.slope;
        assert!((-0.65..-0.35).contains(&slope), "slope = {slope}");
        assert_eq!(report.verdict, Verdict::Pass);
        assert!(report.estimates.ci_low < slope && slope < report.estimates.ci_high);
    }

    #[test]
    fn rate_self_test_flags_a_flat_proxy() {
        let mut config = small_uniform_config();
        config.n = 2048;
        config.replicas = 50;
        let report = run_rate(&config, true).unwrap();
        assert!(report.details.self_test);
        assert_eq!(report.estimates.slope, 0.0);
        assert_eq!(report.verdict, Verdict::Fail);
        assert_eq!(report.seed_manifest.spans[0].count, 0);
    }

    #[test]
    fn rate_experiment_needs_a_usable_ladder() {
        let mut config = small_uniform_config();
        config.n = 16;
        assert!(run_rate(&config, false).is_err());
    }

    #[test]
    fn block_runner_recovers_bernoulli_variance_on_iid_walks() {
        let dist = IncrementDistribution::uniform(0.0, 1.0).unwrap();
        let out = run_blocks(dist, 1.0, 3, 4096, 0.5, 0.25, 0.5, 300).unwrap();
        assert_eq!(out.plan.long_len, 64);
        assert_eq!(out.plan.short_len, 8);
        assert!((out.sum_var_long - 0.25).abs() < 4.0 * out.se, "{out:?}");
        assert!(out.se.is_finite());
        assert_eq!(out.correlations.len(), out.plan.count - 1);
        assert!(out.correlations.iter().all(|c| c.abs() < 0.3));
    }
}

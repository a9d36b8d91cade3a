//! Long/short block decomposition of kernel sums along one walk.
//!
//! A walk of length `n` is cut into `count` rounds of one long block
//! (`long_len = floor(n^alpha)` steps) followed by one short block
//! (`short_len = floor(n^beta)` steps), plus a tail.  Long blocks carry the
//! variance; short blocks are the mixing buffers that make the long-block
//! sums nearly independent.  The profile estimators below measure exactly
//! that: per-step variance inside each block type, and the correlation left
//! between neighboring long blocks.
//!
//! # Example
//!
//! ```
//! use schatte::blocks::{block_sums, BlockPlan};
//! use schatte::model::KernelLevel;
//!
//! // n = 100, alpha = 1/2, beta = 1/4: rounds of 10 + 3 steps, 7 full
//! // rounds, 9 tail steps.
//! let plan = BlockPlan::build(100, 0.5, 0.25)?;
//! assert_eq!(
//!     (plan.long_len, plan.short_len, plan.count, plan.tail_len),
//!     (10, 3, 7, 9)
//! );
//!
//! // Kernel sums per block for a hand-made sample: the first long block
//! // holds 0.00..=0.09, all at or below the level, so each step adds 1/2.
//! let values: Vec<f64> = (0..100).map(|j| j as f64 / 100.0).collect();
//! let sums = block_sums(&values, KernelLevel::new(0.5)?, &plan)?;
//! assert_eq!(sums.long.len(), 7);
//! assert_eq!(sums.long[0], 5.0);
//! # Ok::<(), schatte::Error>(())
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{kernel_value, simulate_walk_stream, FracSample, KernelLevel, WalkConfig};

/// Exponent-driven partition of `0..n` into long/short rounds plus a tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub n: usize,
    pub long_len: usize,
    pub short_len: usize,
    /// Number of complete long+short rounds.
    pub count: usize,
    pub tail_len: usize,
}

/// `floor(n^e)` with a relative nudge so that mathematically exact integer
/// powers are not floored down by `powf` rounding.
fn floor_power(n: usize, e: f64) -> usize {
    let raw = (n as f64).powf(e);
    (raw + raw * 1e-12 + 1e-12).floor() as usize
}

impl BlockPlan {
    /// Build the partition for exponents `0 < beta <= alpha < 1`.
    pub fn build(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("walk length must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) || !beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "long-block exponent {alpha} outside (0, 1)"
            )));
        }
        if !(beta > 0.0 && beta <= alpha) {
            return Err(Error::InvalidConfig(format!(
                "short-block exponent {beta} outside (0, alpha = {alpha}]"
            )));
        }
        let long_len = floor_power(n, alpha);
        let short_len = floor_power(n, beta);
        let round = long_len + short_len;
        let count = n / round;
        if count == 0 {
            return Err(Error::InvalidConfig(format!(
                "walk length {n} shorter than one round of {round} steps"
            )));
        }
        Ok(BlockPlan { n, long_len, short_len, count, tail_len: n - count * round })
    }

    fn round_len(&self) -> usize {
        self.long_len + self.short_len
    }

    /// Index range of the `k`-th long block (`k < count`).
    pub fn long_range(&self, k: usize) -> std::ops::Range<usize> {
        debug_assert!(k < self.count);
        let start = k * self.round_len();
        start..start + self.long_len
    }

    /// Index range of the `k`-th short block (`k < count`).
    pub fn short_range(&self, k: usize) -> std::ops::Range<usize> {
        debug_assert!(k < self.count);
        let start = k * self.round_len() + self.long_len;
        start..start + self.short_len
    }

    /// Index range of the tail (possibly empty).
    pub fn tail_range(&self) -> std::ops::Range<usize> {
        self.count * self.round_len()..self.n
    }

    /// Fraction of the walk covered by long blocks, `count * long_len / n`.
    pub fn long_coverage(&self) -> f64 {
        (self.count * self.long_len) as f64 / self.n as f64
    }

    /// Fraction of the walk covered by short blocks.
    pub fn short_coverage(&self) -> f64 {
        (self.count * self.short_len) as f64 / self.n as f64
    }
}

/// Kernel sums per block for one walk: one entry per long block, one per
/// short block, and the tail total.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSums {
    pub long: Vec<f64>,
    pub short: Vec<f64>,
    pub tail: f64,
}

/// Batch block sums of the level-`a` kernel over a full sample.
pub fn block_sums(values: &[f64], level: KernelLevel, plan: &BlockPlan) -> Result<BlockSums> {
    if values.len() != plan.n {
        return Err(Error::InvalidConfig(format!(
            "sample length {} does not match plan length {}",
            values.len(),
            plan.n
        )));
    }
    let mut acc = BlockAccumulator::new(*plan, level);
    for &v in values {
        acc.push(v);
    }
    acc.finish()
}

/// Streaming counterpart of [`block_sums`]: feed walk values one at a time
/// in index order.  Produces bitwise-identical sums to the batch version.
pub struct BlockAccumulator {
    plan: BlockPlan,
    level: KernelLevel,
    seen: usize,
    long: Vec<f64>,
    short: Vec<f64>,
    tail: f64,
}

impl BlockAccumulator {
    pub fn new(plan: BlockPlan, level: KernelLevel) -> Self {
        BlockAccumulator {
            plan,
            level,
            seen: 0,
            long: vec![0.0; plan.count],
            short: vec![0.0; plan.count],
            tail: 0.0,
        }
    }

    pub fn push(&mut self, value: f64) {
        let i = self.seen;
        self.seen += 1;
        let term = kernel_value(self.level.level(), value);
        let round = self.plan.round_len();
        let k = i / round;
        if k >= self.plan.count {
            self.tail += term;
        } else if i - k * round < self.plan.long_len {
            self.long[k] += term;
        } else {
            self.short[k] += term;
        }
    }

    /// Finish after exactly `plan.n` values.
    pub fn finish(self) -> Result<BlockSums> {
        if self.seen != self.plan.n {
            return Err(Error::InvalidConfig(format!(
                "accumulator saw {} values, plan expects {}",
                self.seen, self.plan.n
            )));
        }
        Ok(BlockSums { long: self.long, short: self.short, tail: self.tail })
    }
}

/// Block sums across independent walk replicas (generator streams
/// `0..replicas` of the configured seed), computed in parallel with a
/// replica-ordered result.
pub fn replica_block_sums(
    config: &WalkConfig,
    level: KernelLevel,
    plan: &BlockPlan,
    replicas: usize,
) -> Result<Vec<BlockSums>> {
    if plan.n != config.n {
        return Err(Error::InvalidConfig(format!(
            "plan length {} does not match walk length {}",
            plan.n, config.n
        )));
    }
    if replicas == 0 {
        return Err(Error::InvalidConfig("need at least one replica".into()));
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|stream| {
            let sample: FracSample = simulate_walk_stream(config, stream);
            block_sums(sample.values(), level, plan)
        })
        .collect()
}

/// Variance of block sums across replicas, normalized per step.
///
/// For each block index the variance is taken across replicas; the summed
/// variances are divided by the total steps of that block type
/// (`count * long_len`, resp. `count * short_len`), so both estimates
/// converge to the long-run variance of the kernel when blocks are long
/// enough.  Standard errors come from a leave-one-replica-out jackknife
/// (infinite when fewer than three replicas).
#[derive(Debug, Clone, Copy)]
pub struct VarianceProfile {
    pub replicas: usize,
    /// Per-step variance within long blocks.
    pub long_per_step: f64,
    pub long_se: f64,
    /// Per-step variance within short blocks.
    pub short_per_step: f64,
    pub short_se: f64,
    /// `count * long_len / n` — multiply onto `long_per_step` to get the
    /// long-block share of the total variance per walk step.
    pub coverage_long: f64,
    pub coverage_short: f64,
}

fn column_stats(
    sums: &[BlockSums],
    pick: impl Fn(&BlockSums, usize) -> f64,
    cols: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut s1 = vec![0.0; cols];
    let mut s2 = vec![0.0; cols];
    for row in sums {
        for k in 0..cols {
            let x = pick(row, k);
            s1[k] += x;
            s2[k] += x * x;
        }
    }
    (s1, s2)
}

/// Per-step variance (sum over block columns of across-replica variances,
/// over total steps) and its jackknife standard error.
fn per_step_variance(
    sums: &[BlockSums],
    pick: impl Fn(&BlockSums, usize) -> f64 + Copy,
    cols: usize,
    steps: f64,
) -> (f64, f64) {
    let r = sums.len();
    let (s1, s2) = column_stats(sums, pick, cols);
    let rf = r as f64;
    let mut total = 0.0;
    for k in 0..cols {
        total += (s2[k] - s1[k] * s1[k] / rf) / (rf - 1.0);
    }
    let estimate = total / steps;
    if r < 3 {
        return (estimate, f64::INFINITY);
    }
    // Leave-one-out estimates from the same sufficient statistics.
    let rm = rf - 1.0;
    let mut loo = Vec::with_capacity(r);
    for row in sums {
        let mut t = 0.0;
        for k in 0..cols {
            let x = pick(row, k);
            let s1p = s1[k] - x;
            let s2p = s2[k] - x * x;
            t += (s2p - s1p * s1p / rm) / (rm - 1.0);
        }
        loo.push(t / steps);
    }
    let mean = loo.iter().sum::<f64>() / rf;
    let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
    (estimate, (rm / rf * ss).sqrt())
}

pub fn variance_profile(sums: &[BlockSums], plan: &BlockPlan) -> Result<VarianceProfile> {
    if sums.len() < 2 {
        return Err(Error::InvalidConfig("variance profile needs at least two replicas".into()));
    }
    if sums.iter().any(|s| s.long.len() != plan.count || s.short.len() != plan.count) {
        return Err(Error::InvalidConfig("block sums do not match the plan's block count".into()));
    }
    let long_steps = (plan.count * plan.long_len) as f64;
    let short_steps = (plan.count * plan.short_len) as f64;
    let (long_per_step, long_se) =
        per_step_variance(sums, |row, k| row.long[k], plan.count, long_steps);
    let (short_per_step, short_se) =
        per_step_variance(sums, |row, k| row.short[k], plan.count, short_steps);
    Ok(VarianceProfile {
        replicas: sums.len(),
        long_per_step,
        long_se,
        short_per_step,
        short_se,
        coverage_long: plan.long_coverage(),
        coverage_short: plan.short_coverage(),
    })
}

/// Correlation between successive long-block sums, estimated across
/// replicas: entry `k` is the Pearson correlation of block `k` with block
/// `k + 1`.  Empty when the plan has a single round.  A denominator of zero
/// (degenerate column) yields 0 for that entry.
pub fn block_correlation(sums: &[BlockSums], plan: &BlockPlan) -> Result<Vec<f64>> {
    if sums.len() < 2 {
        return Err(Error::InvalidConfig("block correlation needs at least two replicas".into()));
    }
    if sums.iter().any(|s| s.long.len() != plan.count) {
        return Err(Error::InvalidConfig("block sums do not match the plan's block count".into()));
    }
    if plan.count < 2 {
        return Ok(Vec::new());
    }
    let r = sums.len() as f64;
    let (s1, s2) = column_stats(sums, |row, k| row.long[k], plan.count);
    let mut out = Vec::with_capacity(plan.count - 1);
    for k in 0..plan.count - 1 {
        let cross: f64 = sums.iter().map(|row| row.long[k] * row.long[k + 1]).sum();
        let cov = cross / r - (s1[k] / r) * (s1[k + 1] / r);
        let va = s2[k] / r - (s1[k] / r) * (s1[k] / r);
        let vb = s2[k + 1] / r - (s1[k + 1] / r) * (s1[k + 1] / r);
        let denom = (va * vb).sqrt();
        out.push(if denom > 0.0 { cov / denom } else { 0.0 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IncrementDistribution;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn level(a: f64) -> KernelLevel {
        KernelLevel::new(a).unwrap()
    }

    #[test]
    fn plan_matches_hand_computed_partitions() {
        let p = BlockPlan::build(16, 0.5, 0.5).unwrap();
        assert_eq!(p, BlockPlan { n: 16, long_len: 4, short_len: 4, count: 2, tail_len: 0 });
        let p = BlockPlan::build(100, 0.5, 0.25).unwrap();
        assert_eq!(p, BlockPlan { n: 100, long_len: 10, short_len: 3, count: 7, tail_len: 9 });
        let p = BlockPlan::build(8192, 0.5, 0.1).unwrap();
        assert_eq!(p, BlockPlan { n: 8192, long_len: 90, short_len: 2, count: 89, tail_len: 4 });
    }

    #[test]
    fn plan_rejects_bad_exponents() {
        assert!(BlockPlan::build(0, 0.5, 0.5).is_err());
        assert!(BlockPlan::build(100, 1.0, 0.5).is_err());
        assert!(BlockPlan::build(100, 0.0, 0.0).is_err());
        assert!(BlockPlan::build(100, 0.5, 0.6).is_err());
        assert!(BlockPlan::build(100, 0.5, 0.0).is_err());
        assert!(BlockPlan::build(100, 0.5, -0.1).is_err());
        // One round would already exceed the walk.
        assert!(BlockPlan::build(1, 0.5, 0.5).is_err());
    }

    #[test]
    fn ranges_partition_the_walk() {
        for &(n, a, b) in &[(16usize, 0.5, 0.5), (100, 0.5, 0.25), (1000, 0.6, 0.3), (37, 0.4, 0.2)]
        {
            let p = BlockPlan::build(n, a, b).unwrap();
            let mut hits = vec![0u32; n];
            for k in 0..p.count {
                for i in p.long_range(k) {
                    hits[i] += 1;
                }
                for i in p.short_range(k) {
                    hits[i] += 1;
                }
            }
            for i in p.tail_range() {
                hits[i] += 1;
            }
            assert!(hits.iter().all(|&h| h == 1), "partition failed for n = {n}");
        }
    }

    #[test]
    fn block_sums_match_hand_example() {
        // Four points, level 0.5, rounds of 2+2: the first (and only) long
        // block holds {0.1, 0.3}, both below the level, so the sum is
        // 2 * (1 - 0.5) = 1.
        let plan = BlockPlan::build(4, 0.5, 0.5).unwrap();
        let sums = block_sums(&[0.1, 0.3, 0.5, 0.7], level(0.5), &plan).unwrap();
        assert_eq!(sums.long.len(), 1);
        assert!((sums.long[0] - 1.0).abs() < 1e-15);
        // Short block {0.5, 0.7}: 0.5 is inclusive, 0.7 is out.
        assert!((sums.short[0] - (0.5 - 0.5)).abs() < 1e-15);
        assert_eq!(plan.tail_len, 0);
        assert_eq!(sums.tail, 0.0);
    }

    #[test]
    fn block_sums_validates_length() {
        let plan = BlockPlan::build(4, 0.5, 0.5).unwrap();
        assert!(block_sums(&[0.1, 0.2], level(0.5), &plan).is_err());
        let mut acc = BlockAccumulator::new(plan, level(0.5));
        acc.push(0.1);
        assert!(acc.finish().is_err());
    }

    #[test]
    fn replica_sums_are_deterministic_and_validated() {
        let dist = IncrementDistribution::uniform(0.0, 0.5).unwrap();
        let config = WalkConfig::new(dist, 1.0, 64, 7).unwrap();
        let plan = BlockPlan::build(64, 0.5, 0.25).unwrap();
        let a = replica_block_sums(&config, level(0.3), &plan, 5).unwrap();
        let b = replica_block_sums(&config, level(0.3), &plan, 5).unwrap();
        assert_eq!(a, b);
        let other_plan = BlockPlan::build(32, 0.5, 0.25).unwrap();
        assert!(replica_block_sums(&config, level(0.3), &other_plan, 5).is_err());
        assert!(replica_block_sums(&config, level(0.3), &plan, 0).is_err());
    }

    #[test]
    fn jackknife_matches_brute_force_recomputation() {
        // Fabricated sums, small enough to recompute the leave-one-out
        // estimates directly from scratch.
        let plan = BlockPlan { n: 12, long_len: 2, short_len: 2, count: 3, tail_len: 0 };
        let rows = [
            vec![1.0, -0.5, 0.25],
            vec![0.2, 0.4, -0.8],
            vec![-0.3, 0.9, 0.1],
            vec![0.6, -0.2, 0.5],
            vec![-0.1, 0.3, -0.4],
        ];
        let sums: Vec<BlockSums> = rows
            .iter()
            .map(|long| BlockSums { long: long.clone(), short: vec![0.0; 3], tail: 0.0 })
            .collect();
        let profile = variance_profile(&sums, &plan).unwrap();

        let estimate_of = |subset: &[&BlockSums]| -> f64 {
            let rf = subset.len() as f64;
            let mut total = 0.0;
            for k in 0..3 {
                let mean = subset.iter().map(|s| s.long[k]).sum::<f64>() / rf;
                let ss =
                    subset.iter().map(|s| (s.long[k] - mean) * (s.long[k] - mean)).sum::<f64>();
                total += ss / (rf - 1.0);
            }
            total / 6.0
        };
        let full: Vec<&BlockSums> = sums.iter().collect();
        let theta = estimate_of(&full);
        assert!((profile.long_per_step - theta).abs() < 1e-12);

        let loo: Vec<f64> = (0..sums.len())
            .map(|i| {
                let subset: Vec<&BlockSums> =
                    sums.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s).collect();
                estimate_of(&subset)
            })
            .collect();
        let mean = loo.iter().sum::<f64>() / loo.len() as f64;
        let ss: f64 = loo.iter().map(|v| (v - mean) * (v - mean)).sum();
        let se = ((loo.len() as f64 - 1.0) / loo.len() as f64 * ss).sqrt();
        assert!((profile.long_se - se).abs() < 1e-12, "{} vs {se}", profile.long_se);
    }

    #[test]
    fn tiny_replica_counts_get_infinite_error_bars() {
        let plan = BlockPlan { n: 8, long_len: 2, short_len: 2, count: 2, tail_len: 0 };
        let sums = vec![
            BlockSums { long: vec![1.0, 0.0], short: vec![0.0, 0.0], tail: 0.0 },
            BlockSums { long: vec![0.0, 1.0], short: vec![0.0, 0.0], tail: 0.0 },
        ];
        let profile = variance_profile(&sums, &plan).unwrap();
        assert!(profile.long_se.is_infinite());
        assert!(variance_profile(&sums[..1], &plan).is_err());
    }

    #[test]
    fn iid_variance_recovers_bernoulli_level() {
        // With iid uniform values the kernel is a centered Bernoulli(a)
        // indicator: per-step variance a(1 - a) = 0.25 at a = 1/2.
        let n = 4096usize;
        let plan = BlockPlan::build(n, 0.5, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let replicas: Vec<BlockSums> = (0..400)
            .map(|_| {
                let values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                block_sums(&values, level(0.5), &plan).unwrap()
            })
            .collect();
        let profile = variance_profile(&replicas, &plan).unwrap();
        assert!(
            (profile.long_per_step - 0.25).abs() < 3.0 * profile.long_se,
            "long {} +- {}",
            profile.long_per_step,
            profile.long_se
        );
        assert!(profile.long_se < 0.02);
        assert!(
            (profile.short_per_step - 0.25).abs() < 4.0 * profile.short_se,
            "short {} +- {}",
            profile.short_per_step,
            profile.short_se
        );
        // Independent blocks: every lag-1 correlation is small.
        let corr = block_correlation(&replicas, &plan).unwrap();
        assert_eq!(corr.len(), plan.count - 1);
        assert!(
            corr.iter().all(|c| c.abs() < 0.25),
            "max |corr| = {:?}",
            corr.iter().cloned().fold(0.0f64, |m, c| m.max(c.abs()))
        );
    }

    #[test]
    fn correlation_hits_the_extremes_on_fabricated_data() {
        let plan = BlockPlan { n: 8, long_len: 2, short_len: 2, count: 2, tail_len: 0 };
        // Second block always the negative of the first: correlation -1.
        let sums: Vec<BlockSums> = [1.0, -0.5, 2.0, 0.25]
            .iter()
            .map(|&v| BlockSums { long: vec![v, -v], short: vec![0.0, 0.0], tail: 0.0 })
            .collect();
        let corr = block_correlation(&sums, &plan).unwrap();
        assert_eq!(corr.len(), 1);
        assert!((corr[0] + 1.0).abs() < 1e-12);
        // Single-round plans have nothing to correlate.
        let single = BlockPlan { n: 4, long_len: 2, short_len: 2, count: 1, tail_len: 0 };
        let sums = vec![
            BlockSums { long: vec![1.0], short: vec![0.0], tail: 0.0 },
            BlockSums { long: vec![0.5], short: vec![0.0], tail: 0.0 },
        ];
        assert!(block_correlation(&sums, &single).unwrap().is_empty());
        // Degenerate (constant) columns correlate as zero, not NaN.
        let flat = vec![
            BlockSums { long: vec![1.0, 1.0], short: vec![0.0, 0.0], tail: 0.0 },
            BlockSums { long: vec![1.0, 1.0], short: vec![0.0, 0.0], tail: 0.0 },
        ];
        assert_eq!(block_correlation(&flat, &plan).unwrap(), vec![0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Streaming accumulation is bitwise identical to the batch path.
        #[test]
        fn streaming_matches_batch_bitwise(seed in 0u64..1000, a in 0.05..0.95f64) {
            let n = 257usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let plan = BlockPlan::build(n, 0.55, 0.3).unwrap();
            let lv = level(a);
            let batch = block_sums(&values, lv, &plan).unwrap();
            let mut acc = BlockAccumulator::new(plan, lv);
            for &v in &values {
                acc.push(v);
            }
            let streamed = acc.finish().unwrap();
            prop_assert_eq!(batch.long.len(), streamed.long.len());
            for (x, y) in batch.long.iter().zip(streamed.long.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in batch.short.iter().zip(streamed.short.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            prop_assert_eq!(batch.tail.to_bits(), streamed.tail.to_bits());
        }

        /// Every index lands in exactly one block for arbitrary settings.
        #[test]
        fn partition_is_exact(n in 4usize..5000, alpha in 0.2..0.9f64, frac in 0.1..1.0f64) {
            let beta = alpha * frac;
            if let Ok(p) = BlockPlan::build(n, alpha, beta) {
                let mut covered = 0usize;
                for k in 0..p.count {
                    covered += p.long_range(k).len() + p.short_range(k).len();
                }
                covered += p.tail_range().len();
                prop_assert_eq!(covered, n);
                prop_assert_eq!(p.count * (p.long_len + p.short_len) + p.tail_len, n);
                prop_assert!(p.tail_len < p.long_len + p.short_len);
            }
        }
    }
}

//! The admissible exponent region for the block/grid construction.
//!
//! Four exponents steer the asymptotic argument: `alpha` (long blocks),
//! `beta` (short blocks), `gamma` (the polynomial rate extracted at the
//! end), and `epsilon` (grid refinement).  They must satisfy a system of
//! strict linear inequalities; this module checks tuples, computes the exact
//! supremum of the achievable rate, and scans a product grid for near-optimal
//! feasible tuples.
//!
//! # Example
//!
//! ```
//! use num_rational::Ratio;
//! use schatte::exponents::{gamma_envelope_exact, supremum_exact};
//!
//! // The rate envelope min(alpha/2, (1 - 7 alpha)/2) evaluated exactly.
//! assert_eq!(gamma_envelope_exact(Ratio::new(1, 10)), Ratio::new(1, 20));
//! // It peaks where the two branches cross: alpha* = 1/8, rate sup 1/16.
//! assert_eq!(supremum_exact(), (Ratio::new(1, 8), Ratio::new(1, 16)));
//! ```

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One linear constraint of the admissible region, in the order checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    AlphaPositive,
    BetaPositive,
    GammaPositive,
    EpsilonPositive,
    /// `alpha > beta`: long blocks dominate short ones.
    BlockOrder,
    /// `alpha - beta > 2 gamma`: the block-length gap pays for the rate.
    BlockGap,
    /// `1/2 - gamma > 5 epsilon / 2 + alpha`: the Gaussian coupling error
    /// stays below the target rate.
    Coupling,
    /// `alpha + gamma < 1/2`: within-block fluctuations stay subcritical.
    VarianceFluctuation,
    /// `gamma < epsilon / 2`: grid transfer absorbs the rate.
    GridFluctuation,
    /// `epsilon > alpha`: the grid refines faster than blocks grow.
    GridRefinement,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::AlphaPositive => "alpha_positive",
            Constraint::BetaPositive => "beta_positive",
            Constraint::GammaPositive => "gamma_positive",
            Constraint::EpsilonPositive => "epsilon_positive",
            Constraint::BlockOrder => "block_order",
            Constraint::BlockGap => "block_gap",
            Constraint::Coupling => "coupling",
            Constraint::VarianceFluctuation => "variance_fluctuation",
            Constraint::GridFluctuation => "grid_fluctuation",
            Constraint::GridRefinement => "grid_refinement",
        }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A candidate exponent tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTuple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl ExponentTuple {
    pub fn new(alpha: f64, beta: f64, gamma: f64, epsilon: f64) -> Self {
        ExponentTuple { alpha, beta, gamma, epsilon }
    }

    /// All violated constraints, in checking order (empty means feasible).
    pub fn violated(&self) -> Vec<Constraint> {
        let ExponentTuple { alpha, beta, gamma, epsilon } = *self;
        let mut out = Vec::new();
        let mut check = |ok: bool, c: Constraint| {
            if !ok {
                out.push(c);
            }
        };
        check(alpha > 0.0, Constraint::AlphaPositive);
        check(beta > 0.0, Constraint::BetaPositive);
        check(gamma > 0.0, Constraint::GammaPositive);
        check(epsilon > 0.0, Constraint::EpsilonPositive);
        check(alpha > beta, Constraint::BlockOrder);
        check(alpha - beta > 2.0 * gamma, Constraint::BlockGap);
        check(0.5 - gamma > 2.5 * epsilon + alpha, Constraint::Coupling);
        check(alpha + gamma < 0.5, Constraint::VarianceFluctuation);
        check(gamma < 0.5 * epsilon, Constraint::GridFluctuation);
        check(epsilon > alpha, Constraint::GridRefinement);
        out
    }

    pub fn is_feasible(&self) -> bool {
        self.violated().is_empty()
    }
}

/// Upper envelope of achievable `gamma` at a fixed `alpha`, in exact
/// rational arithmetic.
///
/// Sending `beta -> 0` and `epsilon -> alpha` relaxes the system to
/// `gamma < min(alpha / 2, (1 - 7 alpha) / 2)`; the envelope is that min
/// (clamped at zero once the coupling side goes negative).
pub fn gamma_envelope_exact(alpha: Ratio<i64>) -> Ratio<i64> {
    let zero = Ratio::new(0, 1);
    if alpha <= zero {
        return zero;
    }
    let half = Ratio::new(1, 2);
    let left = alpha * half;
    let right = (Ratio::new(1, 1) - Ratio::new(7, 1) * alpha) * half;
    left.min(right).max(zero)
}

/// Exact supremum of the rate over the admissible region: the peak of the
/// envelope, at the intersection of its two linear pieces.
pub fn supremum_exact() -> (Ratio<i64>, Ratio<i64>) {
    // alpha/2 = (1 - 7 alpha)/2  <=>  8 alpha = 1.
    let alpha_star = Ratio::new(1, 1) / Ratio::new(8, 1);
    (alpha_star, gamma_envelope_exact(alpha_star))
}

/// `supremum_exact` as floats: `(alpha_star, gamma_sup)`.
pub fn gamma_supremum() -> (f64, f64) {
    let (a, g) = supremum_exact();
    (ratio_to_f64(a), ratio_to_f64(g))
}

fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Axis ceilings for the product grid, scaled to bracket the optimum
/// (`alpha* = 1/8`, `gamma* = 1/16`, `epsilon* = 1/8+`) without wasting
/// resolution on the far-infeasible corner near 1.
pub const ALPHA_MAX: f64 = 0.15;
pub const BETA_MAX: f64 = 0.05;
pub const GAMMA_MAX: f64 = 0.075;
pub const EPSILON_MAX: f64 = 0.2;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSearchResult {
    pub best: ExponentTuple,
    pub resolution: usize,
}

/// Scan the product grid (`resolution` points per axis, axis `i` taking
/// values `max_i * k / resolution`) for the feasible tuple with the largest
/// rate.  For each `(alpha, beta, epsilon)` cell the best grid `gamma` is
/// the largest one under the binding constraints, so the scan is cubic, not
/// quartic, in the resolution.  Ties keep the first tuple in scan order.
pub fn grid_search(resolution: usize) -> Result<GridSearchResult> {
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!("grid resolution {resolution} too small")));
    }
    let margin = 1e-12;
    let step = |max: f64, k: usize| max * k as f64 / resolution as f64;
    let gamma_step = GAMMA_MAX / resolution as f64;
    let mut best: Option<ExponentTuple> = None;
    for ia in 1..=resolution {
        let alpha = step(ALPHA_MAX, ia);
        // Envelope prune: no gamma in this alpha-slice can beat the best.
        if let Some(b) = &best {
            if (0.5 * alpha).min(0.5 * (1.0 - 7.0 * alpha)) <= b.gamma {
                continue;
            }
        }
        for ib in 1..=resolution {
            let beta = step(BETA_MAX, ib);
            if beta >= alpha {
                break;
            }
            for ie in 1..=resolution {
                let epsilon = step(EPSILON_MAX, ie);
                if epsilon <= alpha {
                    continue;
                }
                let bound = (0.5 * (alpha - beta))
                    .min(0.5 - alpha - 2.5 * epsilon)
                    .min(0.5 - alpha)
                    .min(0.5 * epsilon);
                let k = ((bound - margin) / gamma_step).floor();
                if k < 1.0 {
                    continue;
                }
                let k = (k as usize).min(resolution);
                let gamma = gamma_step * k as f64;
                if best.is_none_or(|b| gamma > b.gamma) {
                    best = Some(ExponentTuple { alpha, beta, gamma, epsilon });
                }
            }
        }
    }
    let best = best
        .ok_or_else(|| Error::Domain(format!("no feasible tuple on a {resolution}-point grid")))?;
    let violated = best.violated();
    if !violated.is_empty() {
        return Err(Error::Domain(format!(
            "grid search produced an infeasible tuple {best:?}: {violated:?}"
        )));
    }
    Ok(GridSearchResult { best, resolution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn supremum_is_exactly_one_sixteenth_at_one_eighth() {
        let (alpha, gamma) = supremum_exact();
        assert_eq!(alpha, Ratio::new(1, 8));
        assert_eq!(gamma, Ratio::new(1, 16));
        let (af, gf) = gamma_supremum();
        assert_eq!(af, 0.125);
        assert_eq!(gf, 0.0625);
    }

    #[test]
    fn envelope_matches_hand_values() {
        assert_eq!(gamma_envelope_exact(Ratio::new(1, 10)), Ratio::new(1, 20));
        assert_eq!(gamma_envelope_exact(Ratio::new(1, 8)), Ratio::new(1, 16));
        // Past the peak the coupling side takes over.
        assert_eq!(gamma_envelope_exact(Ratio::new(13, 100)), Ratio::new(9, 200));
        // At 1/7 the envelope closes.
        assert_eq!(gamma_envelope_exact(Ratio::new(1, 7)), Ratio::new(0, 1));
        assert_eq!(gamma_envelope_exact(Ratio::new(-1, 4)), Ratio::new(0, 1));
    }

    #[test]
    fn near_optimal_tuple_fails_only_the_coupling_constraint() {
        // (1/8, 1/64, 1/32, 1/7): plausible-looking, but epsilon = 1/7 is
        // just too coarse for the coupling budget.
        let t = ExponentTuple::new(0.125, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 7.0);
        assert_eq!(t.violated(), vec![Constraint::Coupling]);
        // Shrinking epsilon to 2/15 restores feasibility.
        let t = ExponentTuple::new(0.125, 1.0 / 64.0, 1.0 / 32.0, 2.0 / 15.0);
        assert!(t.is_feasible(), "violated: {:?}", t.violated());
    }

    #[test]
    fn oversized_rate_fails_gap_and_coupling() {
        let t = ExponentTuple::new(0.125, 1.0 / 64.0, 1.0 / 16.0, 1.0 / 7.0);
        assert_eq!(t.violated(), vec![Constraint::BlockGap, Constraint::Coupling]);
    }

    #[test]
    fn desk_scale_defaults_are_flagged_out_of_regime() {
        // The simulation default (alpha, beta, gamma, epsilon) =
        // (0.5, 0.1, 0.02, 0.5) is fine for desk-scale experiments but far
        // outside the admissible region.
        let t = ExponentTuple::new(0.5, 0.1, 0.02, 0.5);
        assert_eq!(
            t.violated(),
            vec![Constraint::Coupling, Constraint::VarianceFluctuation, Constraint::GridRefinement]
        );
        // A regime-compliant default for asymptotic reasoning.
        let t = ExponentTuple::new(0.125, 0.015625, 0.02, 0.14);
        assert!(t.is_feasible(), "violated: {:?}", t.violated());
    }

    #[test]
    fn positivity_is_checked_per_coordinate() {
        let t = ExponentTuple::new(-0.1, 0.0, 0.01, 0.2);
        let v = t.violated();
        assert!(v.contains(&Constraint::AlphaPositive));
        assert!(v.contains(&Constraint::BetaPositive));
        assert!(!v.contains(&Constraint::GammaPositive));
        assert!(!v.contains(&Constraint::EpsilonPositive));
    }

    #[test]
    fn grid_search_closes_in_on_the_supremum() {
        let result = grid_search(200).unwrap();
        let best = result.best;
        assert!(best.is_feasible());
        assert!((best.gamma - 0.061875).abs() < 1e-12, "gamma = {}", best.gamma);
        let (_, sup) = gamma_supremum();
        let gap = sup - best.gamma;
        assert!(gap > 0.0, "grid beat the supremum: {}", best.gamma);
        assert!(gap < 0.002, "gap {gap} too wide at resolution 200");
    }

    #[test]
    fn grid_search_improves_with_resolution() {
        let gammas: Vec<f64> =
            [25usize, 50, 100, 200].iter().map(|&r| grid_search(r).unwrap().best.gamma).collect();
        for w in gammas.windows(2) {
            assert!(w[1] >= w[0], "resolutions not monotone: {gammas:?}");
        }
        let (_, sup) = gamma_supremum();
        assert!(gammas.iter().all(|g| *g < sup));
    }

    #[test]
    fn grid_search_validates_resolution() {
        assert!(grid_search(0).is_err());
        assert!(grid_search(1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// The exact envelope really bounds every feasible tuple's rate.
        #[test]
        fn envelope_dominates_feasible_tuples(
            na in 1i64..300,
            nb in 1i64..300,
            ng in 1i64..300,
            ne in 1i64..300,
        ) {
            let t = ExponentTuple::new(
                na as f64 / 2000.0,
                nb as f64 / 4000.0,
                ng as f64 / 4000.0,
                ne as f64 / 1500.0,
            );
            if t.is_feasible() {
                let env = gamma_envelope_exact(Ratio::new(na, 2000));
                let env_f = *env.numer() as f64 / *env.denom() as f64;
                prop_assert!(t.gamma <= env_f + 1e-12,
                    "gamma {} exceeds envelope {} at alpha {}", t.gamma, env_f, t.alpha);
            }
        }

        /// The global supremum dominates the envelope everywhere.
        #[test]
        fn supremum_dominates_envelope(num in 1i64..500, den in 500i64..4000) {
            let alpha = Ratio::new(num, den);
            let (_, sup) = supremum_exact();
            prop_assert!(gamma_envelope_exact(alpha) <= sup);
        }
    }
}

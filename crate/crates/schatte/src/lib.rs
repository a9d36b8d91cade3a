//! A laboratory for wrapped random walks: exact limit covariances and
//! Monte Carlo verification.
//!
//! Take a walk `S_k = X_1 + ... + X_k` with absolutely continuous iid
//! increments, scale by `x`, and keep only the fractional parts
//! `{S_k x}`.  The sequence equidistributes on `[0, 1)`, and the normalized
//! empirical process of the first `n` points converges to a centered
//! Gaussian process whose covariance `Gamma(s, t)` is a Brownian-bridge term
//! plus an absolutely convergent series of lag corrections.  This crate
//! computes that covariance to certified accuracy, samples the Gaussian
//! limit, and runs statistical experiments that cross-check simulation
//! against the exact numbers.
//!
//! # Modules
//!
//! * [`model`] — increment laws, walk simulation, empirical processes.
//! * [`spectrum`] — wrapped Fourier coefficients, decay envelopes, certified
//!   truncation lengths.
//! * [`covariance`] — overlap geometry and quadrature for `Gamma(s, t)`.
//! * [`blocks`] — long/short block decompositions and variance profiles.
//! * [`gp`] — grid discretization and Gaussian limit-path sampling.
//! * [`exponents`] — the admissible exponent region and its exact optimum.
//! * [`stats`] — Kolmogorov asymptotics, two-sample KS, least squares.
//! * [`harness`] — experiment configs, reports, and verification runners.
//!
//! # Example: simulate and compare against the exact covariance
//!
//! ```
//! use schatte::covariance::{CovarianceEvaluator, CovarianceSettings};
//! use schatte::model::{simulate_walk, IncrementDistribution, WalkConfig};
//!
//! // Full-period uniform increments make the wrapped points iid uniform,
//! // so the limit covariance is exactly the Brownian bridge's.
//! let dist = IncrementDistribution::uniform(0.0, 1.0)?;
//! let walk = WalkConfig::new(dist, 1.0, 512, 7)?;
//! let sample = simulate_walk(&walk);
//! assert!(sample.values().iter().all(|v| (0.0..1.0).contains(v)));
//!
//! let ev = CovarianceEvaluator::new(dist, 1.0, CovarianceSettings::default())?;
//! assert_eq!(ev.gamma(0.25, 0.5)?, 0.25 - 0.25 * 0.5);
//! # Ok::<(), schatte::error::Error>(())
//! ```
//!
//! # Example: the exact exponent optimum
//!
//! ```
//! use schatte::exponents::{gamma_supremum, ExponentTuple};
//!
//! let (alpha_star, gamma_sup) = gamma_supremum();
//! assert_eq!((alpha_star, gamma_sup), (0.125, 0.0625));
//! // A tuple just outside the region, and why.
//! let t = ExponentTuple::new(0.125, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 7.0);
//! assert_eq!(t.violated()[0].name(), "coupling");
//! ```

pub mod blocks;
pub mod covariance;
pub mod error;
pub mod exponents;
pub mod gp;
pub mod harness;
pub mod model;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};

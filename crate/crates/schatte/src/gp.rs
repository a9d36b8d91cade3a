//! Gaussian-process sampling of the limit field on a level grid.
//!
//! The limit of the normalized empirical process is a centered Gaussian
//! process on `[0, 1]` with covariance `Gamma`.  This module discretizes it:
//! a uniform grid of mesh `n^-epsilon`, the covariance matrix on that grid,
//! a guarded eigenvalue clip (the matrix is PSD in exact arithmetic; the
//! quadrature noise is not), a rank-revealing pivoted Cholesky factor, and a
//! deterministic per-stream path sampler.
//!
//! # Example
//!
//! ```
//! use schatte::covariance::CovarianceSettings;
//! use schatte::gp::{GpSampler, SampleGrid};
//! use schatte::model::IncrementDistribution;
//!
//! // The mesh n^-epsilon snaps to the dyadic 1/16 at n = 256, epsilon = 1/2.
//! let grid = SampleGrid::build(256, 0.5)?;
//! assert_eq!(grid.len(), 17);
//! assert_eq!(grid.delta(), 0.0625);
//!
//! // Exactly-uniform wraps give the Brownian bridge; sampled paths are
//! // pinned to zero at both endpoints.
//! let dist = IncrementDistribution::uniform(0.0, 1.0)?;
//! let sampler = GpSampler::new(dist, 1.0, 256, 0.5, CovarianceSettings::default())?;
//! let path = sampler.sample_path(7, 0);
//! assert_eq!(path.len(), 17);
//! assert_eq!((path[0], path[16]), (0.0, 0.0));
//! # Ok::<(), schatte::Error>(())
//! ```

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::covariance::{CovarianceEvaluator, CovarianceSettings};
use crate::error::{Error, Result};
use crate::model::IncrementDistribution;

/// Uniform level grid `{0, delta, 2 delta, ...} ∩ [0, 1]` with mesh
/// `delta = n^-epsilon`.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    points: Vec<f64>,
    delta: f64,
    n: usize,
    epsilon: f64,
}

impl SampleGrid {
    /// Mesh from the walk length and grid exponent.  When `n^epsilon` is a
    /// power of two the mesh snaps to the exact dyadic so the endpoint 1 is
    /// hit exactly.
    pub fn build(n: usize, epsilon: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "walk length {n} too short for a sampling grid"
            )));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!("grid exponent {epsilon} outside (0, 1]")));
        }
        let t = epsilon * (n as f64).log2();
        let snapped = t.round();
        let delta = if (t - snapped).abs() < 1e-9 { (-snapped).exp2() } else { (-t).exp2() };
        let mut r = (1.0 / delta).floor() as usize;
        while (r + 1) as f64 * delta <= 1.0 {
            r += 1;
        }
        while r as f64 * delta > 1.0 {
            r -= 1;
        }
        let points: Vec<f64> = (0..=r).map(|j| j as f64 * delta).collect();
        Ok(SampleGrid { points, delta, n, epsilon })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn walk_length(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Result of the guarded eigenvalue clip.
#[derive(Debug)]
pub struct PsdRepair {
    pub matrix: DMatrix<f64>,
    /// Total magnitude of clipped negative eigenvalues (0 when the input was
    /// already PSD up to solver noise and was returned untouched).
    pub clipped: f64,
}

/// Clip negative eigenvalues of a symmetric matrix.
///
/// Inputs whose smallest eigenvalue is above `-1e-13 * max(trace, 1)` are
/// considered PSD already and returned bit-for-bit unchanged.  Otherwise
/// negative eigenvalues are clipped to zero and the matrix reassembled; a
/// clipped mass above `1e-8 * max(trace, 1)` is a genuine spectral defect
/// and fails instead of being silently repaired.
pub fn repair_psd(matrix: &DMatrix<f64>) -> Result<PsdRepair> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::InvalidConfig("covariance matrix must be square".into()));
    }
    let scale = matrix.trace().max(1.0);
    let identity_eps = 1e-13 * scale;
    let tolerance = 1e-8 * scale;
    let eig = SymmetricEigen::new(matrix.clone());
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig >= -identity_eps {
        return Ok(PsdRepair { matrix: matrix.clone(), clipped: 0.0 });
    }
    let clipped: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    if clipped > tolerance {
        return Err(Error::NotPositiveSemidefinite { clipped, tolerance });
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let q = eig.eigenvectors;
    let raw = &q * DMatrix::from_diagonal(&clamped) * q.transpose();
    let repaired = (&raw + raw.transpose()) * 0.5;
    Ok(PsdRepair { matrix: repaired, clipped })
}

/// Rank-revealing Cholesky factor `P M P^T = L L^T` with diagonal pivoting.
///
/// `l` is stored in pivoted row order: row `i` of `l` belongs to original
/// index `perm[i]`.  Columns beyond `rank` are zero and never used.
pub struct PivotedCholesky {
    pub l: DMatrix<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
}

pub fn pivoted_cholesky(matrix: &DMatrix<f64>) -> Result<PivotedCholesky> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::InvalidConfig("covariance matrix must be square".into()));
    }
    let n = matrix.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut d: Vec<f64> = (0..n).map(|i| matrix[(i, i)]).collect();
    let max_diag = d.iter().cloned().fold(0.0f64, f64::max);
    let pivot_tol = max_diag * 1e-14;
    let mut l = DMatrix::zeros(n, n);
    let mut rank = n;
    for j in 0..n {
        let (offset, &dmax) =
            d[j..].iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap();
        let p = j + offset;
        if dmax <= pivot_tol {
            rank = j;
            break;
        }
        perm.swap(j, p);
        d.swap(j, p);
        l.swap_rows(j, p);
        let ljj = d[j].sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = matrix[(perm[i], perm[j])];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            let lij = v / ljj;
            l[(i, j)] = lij;
            d[i] = (d[i] - lij * lij).max(0.0);
        }
    }
    Ok(PivotedCholesky { l, perm, rank })
}

impl PivotedCholesky {
    /// `max_ij | (L L^T)_{perm} - M |` — the factorization residual.
    pub fn max_reconstruction_error(&self, matrix: &DMatrix<f64>) -> f64 {
        let n = matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for k in 0..self.rank {
                    v += self.l[(i, k)] * self.l[(j, k)];
                }
                worst = worst.max((v - matrix[(self.perm[i], self.perm[j])]).abs());
            }
        }
        worst
    }
}

/// Deterministic sampler for the grid-restricted Gaussian limit field.
pub struct GpSampler {
    grid: SampleGrid,
    matrix: DMatrix<f64>,
    clipped: f64,
    factor: PivotedCholesky,
}

impl GpSampler {
    /// Full pipeline: grid from `(n, epsilon)`, covariance from the model,
    /// repair, factorization.
    pub fn new(
        dist: IncrementDistribution,
        x: f64,
        n: usize,
        epsilon: f64,
        settings: CovarianceSettings,
    ) -> Result<Self> {
        let grid = SampleGrid::build(n, epsilon)?;
        let evaluator = CovarianceEvaluator::new(dist, x, settings)?;
        let matrix = evaluator.gamma_matrix(grid.points())?;
        Self::from_matrix(grid, matrix)
    }

    /// Sampler over an externally supplied covariance matrix on the grid.
    pub fn from_matrix(grid: SampleGrid, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "covariance is {}x{}, grid has {} points",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        let repair = repair_psd(&matrix)?;
        let factor = pivoted_cholesky(&repair.matrix)?;
        let residual = factor.max_reconstruction_error(&repair.matrix);
        let scale = 1.0f64.max(repair.matrix.amax());
        if residual > 1e-10 * scale {
            return Err(Error::Domain(format!(
                "factorization residual {residual:.3e} exceeds tolerance"
            )));
        }
        Ok(GpSampler { grid, matrix: repair.matrix, clipped: repair.clipped, factor })
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped
    }

    pub fn rank(&self) -> usize {
        self.factor.rank
    }

    /// One path, indexed like the grid.  Reproducible: the draw depends only
    /// on `(seed, stream)`.
    pub fn sample_path(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let z: Vec<f64> = (0..self.factor.rank).map(|_| StandardNormal.sample(&mut rng)).collect();
        let g = self.grid.len();
        let mut path = vec![0.0; g];
        for i in 0..g {
            let mut v = 0.0;
            for (k, zk) in z.iter().enumerate() {
                v += self.factor.l[(i, k)] * zk;
            }
            path[self.factor.perm[i]] = v;
        }
        path
    }

    /// Paths for streams `first_stream..first_stream + count`, in stream
    /// order, computed in parallel.
    pub fn sample_paths(&self, seed: u64, first_stream: u64, count: usize) -> Vec<Vec<f64>> {
        (0..count as u64)
            .into_par_iter()
            .map(|r| self.sample_path(seed, first_stream + r))
            .collect()
    }
}

/// Sup of absolute values over a path (0 for an empty slice).
pub fn sup_abs(path: &[f64]) -> f64 {
    path.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::CovarianceSettings;

    fn bridge_matrix(points: &[f64]) -> DMatrix<f64> {
        let g = points.len();
        DMatrix::from_fn(g, g, |i, j| points[i].min(points[j]) - points[i] * points[j])
    }

    #[test]
    fn grid_snaps_to_exact_dyadics() {
        let g = SampleGrid::build(4096, 1.0 / 3.0).unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g.delta().to_bits(), 0.0625f64.to_bits());
        assert_eq!(g.points()[16], 1.0);
        assert_eq!(g.points()[4], 0.25);

        let g = SampleGrid::build(4096, 0.5).unwrap();
        assert_eq!(g.len(), 65);
        assert_eq!(g.delta(), 0.015625);
        assert_eq!(g.points()[64], 1.0);
    }

    #[test]
    fn grid_handles_non_dyadic_meshes() {
        let g = SampleGrid::build(1000, 0.4).unwrap();
        let delta = 1000f64.powf(-0.4);
        assert!((g.delta() - delta).abs() < 1e-12);
        let r = g.len() - 1;
        assert!(r as f64 * g.delta() <= 1.0);
        assert!((r + 1) as f64 * g.delta() > 1.0);
        assert_eq!(g.points()[0], 0.0);
    }

    #[test]
    fn grid_validates_inputs() {
        assert!(SampleGrid::build(1, 0.5).is_err());
        assert!(SampleGrid::build(100, 0.0).is_err());
        assert!(SampleGrid::build(100, 1.5).is_err());
        assert!(SampleGrid::build(100, -0.2).is_err());
    }

    #[test]
    fn repair_leaves_psd_input_untouched() {
        let points: Vec<f64> = (0..=32).map(|j| j as f64 / 32.0).collect();
        let m = bridge_matrix(&points);
        let repair = repair_psd(&m).unwrap();
        assert_eq!(repair.clipped, 0.0);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                assert_eq!(repair.matrix[(i, j)].to_bits(), m[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn repair_clips_small_defects_and_rejects_large_ones() {
        let small = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-11]);
        let repair = repair_psd(&small).unwrap();
        assert!((repair.clipped - 1e-11).abs() < 1e-13);
        assert!(repair.matrix[(1, 1)].abs() < 1e-12);
        assert_eq!(repair.matrix[(0, 0)], 1.0);

        let big = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        match repair_psd(&big) {
            Err(Error::NotPositiveSemidefinite { clipped, .. }) => {
                assert!((clipped - 0.5).abs() < 1e-12)
            }
            other => panic!("expected spectral failure, got {other:?}"),
        }
    }

    #[test]
    fn pivoted_cholesky_reconstructs_and_reveals_rank() {
        // Full-rank SPD example.
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let f = pivoted_cholesky(&m).unwrap();
        assert_eq!(f.rank, 3);
        assert!(f.max_reconstruction_error(&m) < 1e-12);

        // Bridge on {0, 1/2, 1} has rank one.
        let m = bridge_matrix(&[0.0, 0.5, 1.0]);
        let f = pivoted_cholesky(&m).unwrap();
        assert_eq!(f.rank, 1);
        assert!(f.max_reconstruction_error(&m) < 1e-14);
    }

    #[test]
    fn sampler_pins_degenerate_levels_to_zero() {
        let grid = SampleGrid::build(4096, 1.0 / 3.0).unwrap();
        let m = bridge_matrix(grid.points());
        let sampler = GpSampler::from_matrix(grid, m).unwrap();
        assert_eq!(sampler.rank(), 15);
        for stream in 0..5 {
            let path = sampler.sample_path(7, stream);
            assert_eq!(path[0], 0.0);
            assert_eq!(path[16], 0.0);
            assert!(path.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn sampler_is_deterministic_per_stream() {
        let grid = SampleGrid::build(4096, 1.0 / 3.0).unwrap();
        let m = bridge_matrix(grid.points());
        let sampler = GpSampler::from_matrix(grid, m).unwrap();
        let a = sampler.sample_path(42, 3);
        let b = sampler.sample_path(42, 3);
        assert_eq!(a, b);
        let c = sampler.sample_path(42, 4);
        assert_ne!(a, c);
        // Batch sampling is the ordered collection of single draws.
        let batch = sampler.sample_paths(42, 3, 2);
        assert_eq!(batch[0], a);
        assert_eq!(batch[1], c);
    }

    #[test]
    fn sampled_moments_match_the_bridge_covariance() {
        let grid = SampleGrid::build(4096, 1.0 / 3.0).unwrap();
        let m = bridge_matrix(grid.points());
        let sampler = GpSampler::from_matrix(grid, m).unwrap();
        let paths = sampler.sample_paths(1234, 0, 20_000);
        let mp = 20_000f64;
        // Index 4 is level 0.25, index 8 is level 0.5.
        let mean4 = paths.iter().map(|p| p[4]).sum::<f64>() / mp;
        assert!(mean4.abs() < 4.0 * (0.1875f64 / mp).sqrt(), "mean {mean4}");
        let var4 = paths.iter().map(|p| p[4] * p[4]).sum::<f64>() / mp;
        let se_var = 0.1875 * (2.0 / mp).sqrt();
        assert!((var4 - 0.1875).abs() < 4.0 * se_var, "var {var4}");
        let cov48 = paths.iter().map(|p| p[4] * p[8]).sum::<f64>() / mp;
        assert!((cov48 - 0.125).abs() < 5.0 * se_var, "cov {cov48}");
        // The grid-restricted sup is squeezed between the single-point
        // statistic |path(1/2)| (median 0.337) and the continuum sup of the
        // bridge (median 0.8276); 17 points sit well inside that range.
        let mut sups: Vec<f64> = paths.iter().map(|p| sup_abs(p)).collect();
        sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sups[sups.len() / 2];
        assert!((0.5..0.8276).contains(&median), "median sup {median}");
    }

    #[test]
    fn dependent_model_sampler_runs_end_to_end() {
        let dist = IncrementDistribution::uniform(0.0, 0.5).unwrap();
        let sampler = GpSampler::new(dist, 1.0, 4096, 0.25, CovarianceSettings::default()).unwrap();
        assert_eq!(sampler.grid().len(), 9);
        assert!(sampler.clipped_mass() < 1e-8);
        let paths = sampler.sample_paths(5, 0, 4000);
        let mp = 4000f64;
        let mid = 4; // level 0.5
        let var = paths.iter().map(|p| p[mid] * p[mid]).sum::<f64>() / mp;
        let target = sampler.covariance()[(mid, mid)];
        assert!((var - target).abs() < 0.02, "var {var} vs {target}");
        assert!(paths.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn from_matrix_validates_dimensions() {
        let grid = SampleGrid::build(4096, 1.0 / 3.0).unwrap();
        let m = bridge_matrix(&[0.0, 0.5, 1.0]);
        assert!(GpSampler::from_matrix(grid, m).is_err());
    }

    #[test]
    fn sup_abs_handles_edges() {
        assert_eq!(sup_abs(&[]), 0.0);
        assert_eq!(sup_abs(&[0.2, -0.9, 0.5]), 0.9);
    }
}

//! Alternating least squares for sparse CP decomposition.
//!
//! Each iteration sweeps the modes in order. For mode `n` the factor update
//! solves the normal equations
//!
//! ```text
//! A_n * Gamma = V,    Gamma = hadamard over m != n of (A_m^T A_m)
//! ```
//!
//! where `V` is the mode-`n` MTTKRP of the tensor against the current model
//! with unit weights. The updated factor's columns are normalized and their
//! norms absorbed into the model weights, keeping factor entries well
//! scaled across iterations. Gram matrices are cached per mode and
//! refreshed only for the factor that changed.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ktensor::{inner_product, FactorMatrix, KTensor};
use crate::mttkrp::{blocking_policy, mttkrp, MttkrpVariant, Profile};
use crate::sptensor::{build_perm, SparseTensor};

/// Settings for one [`cp_als`] run.
#[derive(Debug, Clone)]
pub struct AlsOptions {
    /// Number of rank-one components to fit.
    pub rank: usize,
    /// Hard cap on iterations.
    pub max_iters: usize,
    /// Stop once the fit changes by less than this between iterations;
    /// 0 disables early stopping.
    pub fit_tolerance: f64,
    /// Kernel used for every MTTKRP.
    pub variant: MttkrpVariant,
    /// Worker threads for the kernels.
    pub threads: usize,
    /// Seed for the random initial guess.
    pub seed: u64,
    /// Ridge term added to the normal equations' diagonal; 0 solves them
    /// as-is and reports singularity as an error.
    pub regularization: f64,
}

impl AlsOptions {
    /// Defaults: 50 iterations max, fit tolerance `1e-8`, blocked kernel,
    /// one thread, seed 0, no regularization.
    pub fn new(rank: usize) -> Self {
        AlsOptions {
            rank,
            max_iters: 50,
            fit_tolerance: 1e-8,
            variant: MttkrpVariant::Blocked,
            threads: 1,
            seed: 0,
            regularization: 0.0,
        }
    }
}

/// Timing and convergence record of one [`cp_als`] run.
#[derive(Debug, Clone)]
pub struct AlsTrace {
    /// Fit after each completed iteration: `1 - ||X - M|| / ||X||`.
    pub fits: Vec<f64>,
    /// MTTKRP seconds, indexed `[iteration][mode]`.
    pub mttkrp_seconds: Vec<Vec<f64>>,
    /// Normal-equation solve seconds, indexed `[iteration][mode]`.
    pub solve_seconds: Vec<Vec<f64>>,
    /// Wall seconds per iteration.
    pub iteration_seconds: Vec<f64>,
    /// One-time permutation build cost (permuted kernel only).
    pub sort_seconds: Option<f64>,
    /// Wall seconds for the whole run, including setup.
    pub total_seconds: f64,
    /// Seed the initial guess was drawn from.
    pub seed: u64,
}

impl AlsTrace {
    /// Iterations actually performed.
    pub fn iterations(&self) -> usize {
        self.fits.len()
    }
}

/// Solves `(G + regularization * I) Z = B` for symmetric positive
/// (semi-)definite `G`, returning `Z` with the shape of `B`.
///
/// A Cholesky factorization is the fast path. If it fails, or its pivots
/// collapse far enough to suggest rank deficiency, the solve falls back to
/// a singular value decomposition: a matrix whose smallest singular value
/// sits at rounding level relative to the largest is reported as
/// [`Error::SolveFailed`], otherwise the SVD solves the system (handling
/// indefinite matrices as well).
pub fn solve_spd(
    gram: &FactorMatrix,
    rhs: &FactorMatrix,
    regularization: f64,
) -> Result<FactorMatrix> {
    let r = gram.rows();
    if gram.cols() != r {
        return Err(Error::DimensionMismatch(format!(
            "coefficient matrix is {} x {}, not square",
            r,
            gram.cols()
        )));
    }
    if rhs.rows() != r {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows; expected {r}",
            rhs.rows()
        )));
    }
    if !regularization.is_finite() || regularization < 0.0 {
        return Err(Error::InvalidConfig(
            "regularization must be finite and non-negative".into(),
        ));
    }

    let mut g = DMatrix::from_row_slice(r, r, gram.data());
    for i in 0..r {
        g[(i, i)] += regularization;
    }
    let b = DMatrix::from_row_slice(r, rhs.cols(), rhs.data());
    let solution = match g.clone().cholesky() {
        // Rounding can hand a singular matrix a formally positive pivot;
        // only trust factorizations whose pivots never collapse.
        Some(chol) if cholesky_pivots_ok(&chol, r) => chol.solve(&b),
        _ => {
            let svd = g.svd(true, true);
            let largest = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
            let smallest = svd
                .singular_values
                .iter()
                .fold(f64::INFINITY, |a, &s| a.min(s));
            if smallest <= largest * rank_tolerance(r) {
                return Err(Error::SolveFailed(
                    "matrix is singular to working precision".into(),
                ));
            }
            svd.solve(&b, 0.0)
                .map_err(|e| Error::SolveFailed(e.to_string()))?
        }
    };

    let mut data = Vec::with_capacity(r * rhs.cols());
    for i in 0..r {
        for j in 0..rhs.cols() {
            data.push(solution[(i, j)]);
        }
    }
    FactorMatrix::from_vec(r, rhs.cols(), data)
}

/// Relative singular-value floor below which a matrix counts as singular.
fn rank_tolerance(r: usize) -> f64 {
    (r as f64).max(1.0) * 8.0 * f64::EPSILON
}

/// Whether a Cholesky factorization's pivot spread is small enough to rule
/// out hidden rank deficiency (pivot ratios track the square root of the
/// singular-value ratio, hence the square root of the rank tolerance).
fn cholesky_pivots_ok(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, r: usize) -> bool {
    let diagonal = chol.l_dirty().diagonal();
    let largest = diagonal.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let smallest = diagonal.iter().fold(f64::INFINITY, |a, &v| a.min(v.abs()));
    smallest > largest * rank_tolerance(r).sqrt()
}

/// Fits a rank-`opts.rank` Kruskal model to `x` by alternating least
/// squares from a random initial guess.
///
/// Returns the model with unit-norm factor columns (scales absorbed into
/// the weights) and a [`AlsTrace`] of per-iteration fits and timings. Stops
/// after `max_iters` iterations or when the fit change drops below
/// `fit_tolerance`. The permuted kernel's traversal orders are built once
/// up front and their cost reported in [`AlsTrace::sort_seconds`].
pub fn cp_als(x: &SparseTensor, opts: &AlsOptions) -> Result<(KTensor, AlsTrace)> {
    if opts.rank == 0 {
        return Err(Error::ZeroRank);
    }
    if opts.max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
    }
    if !(opts.fit_tolerance >= 0.0) {
        return Err(Error::InvalidConfig(
            "fit_tolerance must be non-negative".into(),
        ));
    }
    let xnorm = x.frobenius_norm();
    if xnorm == 0.0 {
        return Err(Error::ZeroNormTensor);
    }

    let total_timer = Instant::now();
    let d = x.ndims();
    let rank = opts.rank;
    let policy = blocking_policy(rank, Profile::CpuLike, x.nnz(), 0)?;

    let mut sort_seconds = None;
    let perms = if opts.variant == MttkrpVariant::Permuted {
        let timer = Instant::now();
        let perms = build_perm(x);
        sort_seconds = Some(timer.elapsed().as_secs_f64());
        Some(perms)
    } else {
        None
    };

    let mut model = KTensor::random(x.dims(), rank, opts.seed)?;
    let mut grams: Vec<FactorMatrix> = (0..d).map(|n| model.factor(n).gram()).collect();
    let xnorm2 = xnorm * xnorm;

    let mut trace = AlsTrace {
        fits: Vec::new(),
        mttkrp_seconds: Vec::new(),
        solve_seconds: Vec::new(),
        iteration_seconds: Vec::new(),
        sort_seconds,
        total_seconds: 0.0,
        seed: opts.seed,
    };
    let mut previous_fit: Option<f64> = None;

    for iteration in 0..opts.max_iters {
        let iteration_timer = Instant::now();
        let mut mttkrp_times = vec![0.0; d];
        let mut solve_times = vec![0.0; d];

        for n in 0..d {
            // The kernel must see unit weights: scales absorbed so far are
            // folded into the unknown factor being solved for.
            model.weights_mut().fill(1.0);
            let timer = Instant::now();
            let v = mttkrp(x, &model, n, opts.variant, &policy, perms.as_ref(), opts.threads)?;
            mttkrp_times[n] = timer.elapsed().as_secs_f64();

            let mut gamma = FactorMatrix::from_vec(rank, rank, vec![1.0; rank * rank])?;
            for (m, gram) in grams.iter().enumerate() {
                if m != n {
                    gamma.hadamard_assign(gram);
                }
            }

            let timer = Instant::now();
            let z = match solve_spd(&gamma, &v.transposed(), opts.regularization) {
                Ok(z) => z,
                Err(Error::SolveFailed(_)) if opts.regularization == 0.0 => {
                    return Err(Error::SingularSolve { mode: n, iteration });
                }
                Err(e) => return Err(e),
            };
            solve_times[n] = timer.elapsed().as_secs_f64();

            let mut updated = z.transposed();
            let norms = updated.normalize_columns();
            model.weights_mut().copy_from_slice(&norms.norms);
            grams[n] = updated.gram();
            model.set_factor(n, updated)?;
        }

        let model_norm2 = model.norm_squared();
        let ip = inner_product(x, &model)?;
        let residual2 = (xnorm2 + model_norm2 - 2.0 * ip).max(0.0);
        let fit = 1.0 - residual2.sqrt() / xnorm;

        trace.fits.push(fit);
        trace.mttkrp_seconds.push(mttkrp_times);
        trace.solve_seconds.push(solve_times);
        trace
            .iteration_seconds
            .push(iteration_timer.elapsed().as_secs_f64());

        if let Some(previous) = previous_fit {
            if (fit - previous).abs() < opts.fit_tolerance {
                break;
            }
        }
        previous_fit = Some(fit);
    }

    trace.total_seconds = total_timer.elapsed().as_secs_f64();
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ktensor::fit;
    use crate::oracle::reconstruct;
    use crate::sptensor::DuplicatePolicy;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    /// Turns a model into a sparse tensor holding every dense entry, for
    /// exact-recovery tests.
    fn dense_as_sparse(m: &KTensor) -> SparseTensor {
        let dense = reconstruct(m).unwrap();
        let dims = dense.dims().to_vec();
        let mut coords = Vec::new();
        let mut values = Vec::new();
        let mut idx = vec![0usize; dims.len()];
        for &v in dense.data() {
            coords.extend_from_slice(&idx);
            values.push(v);
            for m in (0..dims.len()).rev() {
                idx[m] += 1;
                if idx[m] < dims[m] {
                    break;
                }
                idx[m] = 0;
            }
        }
        SparseTensor::from_coo(&dims, &coords, &values, DuplicatePolicy::Error).unwrap()
    }

    #[test]
    fn solve_identity_returns_rhs() {
        let mut eye = FactorMatrix::zeros(3, 3);
        for i in 0..3 {
            eye.set(i, i, 1.0);
        }
        let b = FactorMatrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let z = solve_spd(&eye, &b, 0.0).unwrap();
        for (a, b) in z.data().iter().zip(b.data()) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn solve_scaled_identity() {
        let mut g = FactorMatrix::zeros(2, 2);
        g.set(0, 0, 2.0);
        g.set(1, 1, 2.0);
        let b = FactorMatrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let z = solve_spd(&g, &b, 0.0).unwrap();
        assert_relative_eq!(z.get(0, 0), 0.5);
        assert_relative_eq!(z.get(1, 0), 0.5);
    }

    /// Random SPD system built as Q^T D Q with positive diagonal D: the
    /// reconstructed solution matches the known one to tight tolerance.
    #[test]
    fn solve_random_spd_residual_is_tiny() {
        let r = 6;
        let raw = DMatrix::from_fn(r, r, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 + 0.1);
        let q = raw.qr().q();
        let diag = DVector::from_iterator(r, (1..=r).map(|k| k as f64));
        let g_na = q.transpose() * DMatrix::from_diagonal(&diag) * &q;
        let g = FactorMatrix::from_vec(r, r, g_na.transpose().as_slice().to_vec()).unwrap();
        let z_known = FactorMatrix::from_vec(
            r,
            2,
            (0..r * 2).map(|k| (k as f64 * 0.37).sin()).collect(),
        )
        .unwrap();
        // B = G * Z
        let mut b = FactorMatrix::zeros(r, 2);
        for i in 0..r {
            for j in 0..2 {
                let mut sum = 0.0;
                for k in 0..r {
                    sum += g.get(i, k) * z_known.get(k, j);
                }
                b.set(i, j, sum);
            }
        }
        let z = solve_spd(&g, &b, 0.0).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, w) in z.data().iter().zip(z_known.data()) {
            num += (a - w) * (a - w);
            den += w * w;
        }
        assert!((num / den).sqrt() < 1e-9, "relative error too large");
    }

    #[test]
    fn solve_singular_matrix_fails_without_regularization() {
        let g = FactorMatrix::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = FactorMatrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            solve_spd(&g, &b, 0.0).unwrap_err(),
            Error::SolveFailed(_)
        ));
        // A ridge term restores solvability.
        assert!(solve_spd(&g, &b, 1e-6).is_ok());
    }

    #[test]
    fn solve_rejects_bad_shapes_and_regularization() {
        let g = FactorMatrix::zeros(2, 3);
        let b = FactorMatrix::zeros(2, 1);
        assert!(matches!(
            solve_spd(&g, &b, 0.0).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
        let g = FactorMatrix::zeros(2, 2);
        let b = FactorMatrix::zeros(3, 1);
        assert!(matches!(
            solve_spd(&g, &b, 0.0).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
        let b = FactorMatrix::zeros(2, 1);
        assert!(matches!(
            solve_spd(&g, &b, -1.0).unwrap_err(),
            Error::InvalidConfig(_)
        ));
    }

    #[test]
    fn recovers_rank_one_model_exactly() {
        let truth = KTensor::random(&[5, 6, 7], 1, 42).unwrap();
        let x = dense_as_sparse(&truth);
        let mut opts = AlsOptions::new(1);
        opts.max_iters = 50;
        opts.fit_tolerance = 0.0;
        let (model, trace) = cp_als(&x, &opts).unwrap();
        let final_fit = *trace.fits.last().unwrap();
        assert!(final_fit > 0.999, "final fit {final_fit}");
        assert_relative_eq!(fit(&x, &model).unwrap(), final_fit, max_relative = 1e-9);
    }

    #[test]
    fn fits_never_decrease_on_random_data() {
        let x = SparseTensor::random_sparse(&[8, 9, 10], 200, 3).unwrap();
        let mut opts = AlsOptions::new(3);
        opts.max_iters = 25;
        opts.fit_tolerance = 0.0;
        let (_, trace) = cp_als(&x, &opts).unwrap();
        assert_eq!(trace.fits.len(), 25);
        for pair in trace.fits.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-10,
                "fit decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn variants_converge_to_the_same_fit() {
        let x = SparseTensor::random_sparse(&[10, 11, 12], 300, 9).unwrap();
        let mut fits = Vec::new();
        for variant in MttkrpVariant::ALL {
            let mut opts = AlsOptions::new(4);
            opts.max_iters = 8;
            opts.fit_tolerance = 0.0;
            opts.variant = variant;
            opts.threads = 2;
            opts.seed = 17;
            let (_, trace) = cp_als(&x, &opts).unwrap();
            assert_eq!(trace.iterations(), 8);
            if variant == MttkrpVariant::Permuted {
                assert!(trace.sort_seconds.unwrap() > 0.0);
            } else {
                assert!(trace.sort_seconds.is_none());
            }
            fits.push(*trace.fits.last().unwrap());
        }
        for f in &fits[1..] {
            assert_relative_eq!(f, &fits[0], max_relative = 1e-8);
        }
    }

    #[test]
    fn output_model_has_unit_factor_columns() {
        let x = SparseTensor::random_sparse(&[6, 7, 8], 150, 12).unwrap();
        let mut opts = AlsOptions::new(3);
        opts.max_iters = 4;
        let (model, _) = cp_als(&x, &opts).unwrap();
        for n in 0..3 {
            let f = model.factor(n);
            for j in 0..3 {
                let norm2: f64 = (0..f.rows()).map(|i| f.get(i, j).powi(2)).sum();
                assert_relative_eq!(norm2, 1.0, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn trace_accounts_for_every_iteration() {
        let x = SparseTensor::random_sparse(&[5, 5, 5], 60, 1).unwrap();
        let mut opts = AlsOptions::new(2);
        opts.max_iters = 3;
        opts.fit_tolerance = 0.0;
        opts.seed = 99;
        let (_, trace) = cp_als(&x, &opts).unwrap();
        assert_eq!(trace.fits.len(), 3);
        assert_eq!(trace.mttkrp_seconds.len(), 3);
        assert_eq!(trace.solve_seconds.len(), 3);
        assert_eq!(trace.iteration_seconds.len(), 3);
        assert_eq!(trace.seed, 99);
        for (per_mode, iter_secs) in trace.mttkrp_seconds.iter().zip(&trace.iteration_seconds) {
            assert_eq!(per_mode.len(), 3);
            let spent: f64 = per_mode.iter().sum();
            assert!(spent <= *iter_secs + 1e-6);
        }
        let iter_total: f64 = trace.iteration_seconds.iter().sum();
        assert!(iter_total <= trace.total_seconds + 1e-6);
    }

    #[test]
    fn early_stop_honours_fit_tolerance() {
        let x = SparseTensor::random_sparse(&[6, 6, 6], 100, 4).unwrap();
        let mut opts = AlsOptions::new(2);
        opts.max_iters = 30;
        opts.fit_tolerance = 1.0;
        let (_, trace) = cp_als(&x, &opts).unwrap();
        // Fit change is always below a tolerance of 1, so the run stops at
        // the first comparison: exactly two iterations.
        assert_eq!(trace.iterations(), 2);
    }

    #[test]
    fn max_iters_one_runs_single_iteration() {
        let x = SparseTensor::random_sparse(&[4, 4], 8, 2).unwrap();
        let mut opts = AlsOptions::new(2);
        opts.max_iters = 1;
        let (_, trace) = cp_als(&x, &opts).unwrap();
        assert_eq!(trace.iterations(), 1);
    }

    /// Rank 2 on a 1 x 1 x 1 tensor makes every Gram matrix rank one, so
    /// the normal equations are exactly singular: without regularization
    /// the failure names the mode and iteration, with a ridge term the
    /// sweep proceeds.
    #[test]
    fn singular_normal_equations_are_diagnosed() {
        let x = SparseTensor::from_coo(&[1, 1, 1], &[0, 0, 0], &[1.0], DuplicatePolicy::Error)
            .unwrap();
        let mut opts = AlsOptions::new(2);
        opts.max_iters = 2;
        match cp_als(&x, &opts).unwrap_err() {
            Error::SingularSolve { mode, iteration } => {
                assert_eq!((mode, iteration), (0, 0));
            }
            other => panic!("unexpected error {other:?}"),
        }
        opts.regularization = 1e-8;
        assert!(cp_als(&x, &opts).is_ok());
    }

    #[test]
    fn invalid_options_are_rejected() {
        let x = SparseTensor::random_sparse(&[4, 4], 8, 2).unwrap();
        assert!(matches!(
            cp_als(&x, &AlsOptions::new(0)).unwrap_err(),
            Error::ZeroRank
        ));
        let mut opts = AlsOptions::new(2);
        opts.max_iters = 0;
        assert!(matches!(
            cp_als(&x, &opts).unwrap_err(),
            Error::InvalidConfig(_)
        ));
        let mut opts = AlsOptions::new(2);
        opts.fit_tolerance = f64::NAN;
        assert!(matches!(
            cp_als(&x, &opts).unwrap_err(),
            Error::InvalidConfig(_)
        ));
        let zero = SparseTensor::from_coo(&[2, 2], &[0, 0], &[0.0], DuplicatePolicy::Error)
            .unwrap();
        assert!(matches!(
            cp_als(&zero, &AlsOptions::new(1)).unwrap_err(),
            Error::ZeroNormTensor
        ));
    }
}

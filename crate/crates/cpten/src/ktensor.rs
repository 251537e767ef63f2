//! Kruskal tensors: a weight vector plus one factor matrix per mode.
//!
//! A rank-`R` model of a `d`-way tensor is `sum_j lambda_j a1_j o ... o ad_j`
//! where `o` is the vector outer product, `lambda` holds the `R` weights and
//! the `j`-th column of each factor matrix holds that mode's vector. Factor
//! matrices are stored row-major so a kernel reading one tensor coordinate
//! touches one contiguous row.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sptensor::SparseTensor;

/// A dense row-major matrix of factor columns (or any small dense matrix the
/// solver exchanges with the kernels).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Outcome of column normalization: the Euclidean norm absorbed from each
/// column and which columns were identically zero (and thus replaced).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnNorms {
    /// Norm of each column before scaling; zero columns report 0.
    pub norms: Vec<f64>,
    /// Indices of columns that were zero and were reset to a unit basis vector.
    pub zeroed: Vec<usize>,
}

impl FactorMatrix {
    /// An all-zero `rows x cols` matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FactorMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wraps row-major `data` as a `rows x cols` matrix.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "matrix data holds {} entries; expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(FactorMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major backing storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a contiguous slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// The transposed matrix (fresh storage).
    pub fn transposed(&self) -> FactorMatrix {
        let mut out = FactorMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// The Gram matrix `A^T A` (`cols x cols`, symmetric).
    pub fn gram(&self) -> FactorMatrix {
        let r = self.cols;
        let mut g = FactorMatrix::zeros(r, r);
        for row in self.data.chunks_exact(r.max(1)) {
            for j in 0..r {
                let aj = row[j];
                for k in j..r {
                    g.data[j * r + k] += aj * row[k];
                }
            }
        }
        for j in 0..r {
            for k in 0..j {
                g.data[j * r + k] = g.data[k * r + j];
            }
        }
        g
    }

    /// Scales every column to unit Euclidean norm, returning the absorbed
    /// norms. A zero column cannot be scaled; it is replaced by the first
    /// standard basis vector, its norm reported as 0, and its index flagged.
    pub fn normalize_columns(&mut self) -> ColumnNorms {
        let mut norms = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols.max(1)) {
            for (j, &v) in row.iter().enumerate() {
                norms[j] += v * v;
            }
        }
        let mut zeroed = Vec::new();
        for (j, n) in norms.iter_mut().enumerate() {
            *n = n.sqrt();
            if *n == 0.0 {
                zeroed.push(j);
                for i in 0..self.rows {
                    self.data[i * self.cols + j] = if i == 0 { 1.0 } else { 0.0 };
                }
            } else {
                let inv = 1.0 / *n;
                for i in 0..self.rows {
                    self.data[i * self.cols + j] *= inv;
                }
            }
        }
        ColumnNorms { norms, zeroed }
    }

    /// Entrywise product with `other`, in place.
    pub(crate) fn hadamard_assign(&mut self, other: &FactorMatrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
    }
}

/// A rank-`R` Kruskal tensor: weights plus one factor matrix per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct KTensor {
    weights: Vec<f64>,
    factors: Vec<FactorMatrix>,
}

impl KTensor {
    /// Assembles a model from weights and factors, checking that every
    /// factor has the same column count as there are weights.
    pub fn new(weights: Vec<f64>, factors: Vec<FactorMatrix>) -> Result<Self> {
        let rank = weights.len();
        if rank == 0 {
            return Err(Error::ZeroRank);
        }
        if factors.is_empty() {
            return Err(Error::DimensionMismatch(
                "model must have at least one factor matrix".into(),
            ));
        }
        for (n, f) in factors.iter().enumerate() {
            if f.cols() != rank {
                return Err(Error::DimensionMismatch(format!(
                    "factor {n} has {} columns; expected rank {rank}",
                    f.cols()
                )));
            }
        }
        Ok(KTensor { weights, factors })
    }

    /// A random model: unit weights and factor entries i.i.d. uniform on
    /// `[0, 1)`, reproducible from `seed`.
    pub fn random(dims: &[usize], rank: usize, seed: u64) -> Result<Self> {
        if rank == 0 {
            return Err(Error::ZeroRank);
        }
        if dims.is_empty() {
            return Err(Error::DimensionMismatch(
                "model must have at least one mode".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors = dims
            .iter()
            .map(|&extent| {
                let data = (0..extent * rank).map(|_| rng.random::<f64>()).collect();
                FactorMatrix::from_vec(extent, rank, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KTensor {
            weights: vec![1.0; rank],
            factors,
        })
    }

    pub fn ndims(&self) -> usize {
        self.factors.len()
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Mode lengths (factor row counts).
    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.rows()).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn factor(&self, mode: usize) -> &FactorMatrix {
        &self.factors[mode]
    }

    pub fn factor_mut(&mut self, mode: usize) -> &mut FactorMatrix {
        &mut self.factors[mode]
    }

    /// Replaces the factor for `mode`, keeping shape checks.
    pub fn set_factor(&mut self, mode: usize, factor: FactorMatrix) -> Result<()> {
        if mode >= self.ndims() {
            return Err(Error::ModeOutOfRange {
                mode,
                ndims: self.ndims(),
            });
        }
        if factor.cols() != self.rank() {
            return Err(Error::DimensionMismatch(format!(
                "factor has {} columns; expected rank {}",
                factor.cols(),
                self.rank()
            )));
        }
        self.factors[mode] = factor;
        Ok(())
    }

    /// The dense tensor entry at `idx`.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.ndims() {
            return Err(Error::DimensionMismatch(format!(
                "index has {} coordinates; expected {}",
                idx.len(),
                self.ndims()
            )));
        }
        for (mode, (&i, f)) in idx.iter().zip(&self.factors).enumerate() {
            if i >= f.rows() {
                return Err(Error::CoordinateOutOfRange {
                    nonzero: 0,
                    mode,
                    index: i,
                    extent: f.rows(),
                });
            }
        }
        Ok(self.entry_unchecked(idx))
    }

    /// [`KTensor::entry`] without validation; callers must pass a full
    /// in-range index.
    #[inline]
    pub(crate) fn entry_unchecked(&self, idx: &[usize]) -> f64 {
        let mut sum = 0.0;
        for j in 0..self.rank() {
            let mut term = self.weights[j];
            for (f, &i) in self.factors.iter().zip(idx) {
                term *= f.get(i, j);
            }
            sum += term;
        }
        sum
    }

    /// Returns a copy with unit-norm factor columns, the norms absorbed into
    /// the weights, along with `(mode, column)` pairs that were zero and got
    /// replaced by basis vectors (their weight becomes 0).
    pub fn normalize_columns(&self) -> (KTensor, Vec<(usize, usize)>) {
        let mut out = self.clone();
        let mut flagged = Vec::new();
        for (mode, factor) in out.factors.iter_mut().enumerate() {
            let norms = factor.normalize_columns();
            for (j, w) in out.weights.iter_mut().enumerate() {
                *w *= norms.norms[j];
            }
            flagged.extend(norms.zeroed.iter().map(|&j| (mode, j)));
        }
        (out, flagged)
    }

    /// Squared Frobenius norm via the Gram identity
    /// `lambda^T (G_1 .* ... .* G_d) lambda` where `G_n = A_n^T A_n`.
    /// The result can dip infinitesimally below zero from rounding.
    pub fn norm_squared(&self) -> f64 {
        let r = self.rank();
        let mut gram = FactorMatrix::from_vec(r, r, vec![1.0; r * r])
            .expect("rank x rank buffer");
        for f in &self.factors {
            gram.hadamard_assign(&f.gram());
        }
        let mut total = 0.0;
        for j in 0..r {
            for k in 0..r {
                total += self.weights[j] * self.weights[k] * gram.get(j, k);
            }
        }
        total
    }
}

/// Inner product `<X, M>` between a sparse tensor and a model: the sum over
/// stored nonzeros of `x_i * M[coord_i]`. Evaluation is sequential in
/// storage order, so the result is reproducible.
pub fn inner_product(x: &SparseTensor, m: &KTensor) -> Result<f64> {
    check_same_shape(x, m)?;
    let mut sum = 0.0;
    for i in 0..x.nnz() {
        sum += x.value(i) * m.entry_unchecked(x.coord_row(i));
    }
    Ok(sum)
}

/// Fit of a model to a tensor: `1 - ||X - M|| / ||X||`.
///
/// The residual norm is expanded as
/// `||X - M||^2 = ||X||^2 + ||M||^2 - 2 <X, M>` and clamped at zero before
/// the square root, since rounding can push the expansion slightly negative
/// near exact fits. Errors with [`Error::ZeroNormTensor`] when `||X|| = 0`.
pub fn fit(x: &SparseTensor, m: &KTensor) -> Result<f64> {
    check_same_shape(x, m)?;
    let xnorm = x.frobenius_norm();
    if xnorm == 0.0 {
        return Err(Error::ZeroNormTensor);
    }
    let residual2 =
        (xnorm * xnorm + m.norm_squared() - 2.0 * inner_product(x, m)?).max(0.0);
    Ok(1.0 - residual2.sqrt() / xnorm)
}

fn check_same_shape(x: &SparseTensor, m: &KTensor) -> Result<()> {
    if x.dims() != m.dims().as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "tensor dims {:?} do not match model dims {:?}",
            x.dims(),
            m.dims()
        )));
    }
    Ok(())
}

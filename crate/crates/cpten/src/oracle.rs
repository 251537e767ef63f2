//! Dense reference implementations for validating the sparse kernels.
//!
//! Everything here is written for clarity, not speed: sequential loops over
//! explicitly materialized dense arrays, sharing no traversal or blocking
//! code with the production kernels. Sizes are capped so an accidental
//! large input fails fast instead of exhausting memory.

use crate::error::{Error, Result};
use crate::ktensor::{FactorMatrix, KTensor};
use crate::sptensor::SparseTensor;

/// Default cap on dense element counts (`8 MB` of f64).
pub const DENSE_CAP: usize = 1 << 20;

/// A dense row-major tensor, used only as a test oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// An all-zero tensor, refusing shapes over `cap` elements.
    pub fn zeros_with_cap(dims: &[usize], cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::DimensionMismatch(
                "tensor must have at least one mode".into(),
            ));
        }
        let cells: u128 = dims.iter().map(|&e| e as u128).product();
        if cells > cap as u128 {
            return Err(Error::DenseCapExceeded { cells, cap });
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; cells as usize],
        })
    }

    /// An all-zero tensor under the default cap.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::zeros_with_cap(dims, DENSE_CAP)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn linear(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        for (&i, &extent) in idx.iter().zip(&self.dims) {
            debug_assert!(i < extent);
            lin = lin * extent + i;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let lin = self.linear(idx);
        self.data[lin] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Visits every index in row-major order.
    fn for_each_index(&self, mut visit: impl FnMut(&[usize], usize)) {
        let d = self.dims.len();
        let mut idx = vec![0usize; d];
        for lin in 0..self.data.len() {
            visit(&idx, lin);
            // Odometer increment, last mode fastest.
            for m in (0..d).rev() {
                idx[m] += 1;
                if idx[m] < self.dims[m] {
                    break;
                }
                idx[m] = 0;
            }
        }
    }
}

/// Materializes a sparse tensor densely (zeros elsewhere).
pub fn densify(x: &SparseTensor) -> Result<DenseTensor> {
    densify_with_cap(x, DENSE_CAP)
}

/// [`densify`] with an explicit element cap.
pub fn densify_with_cap(x: &SparseTensor, cap: usize) -> Result<DenseTensor> {
    let mut dense = DenseTensor::zeros_with_cap(x.dims(), cap)?;
    for i in 0..x.nnz() {
        dense.set(x.coord_row(i), x.value(i));
    }
    Ok(dense)
}

/// Materializes a model densely by evaluating every entry.
pub fn reconstruct(m: &KTensor) -> Result<DenseTensor> {
    reconstruct_with_cap(m, DENSE_CAP)
}

/// [`reconstruct`] with an explicit element cap.
pub fn reconstruct_with_cap(m: &KTensor, cap: usize) -> Result<DenseTensor> {
    let mut dense = DenseTensor::zeros_with_cap(&m.dims(), cap)?;
    let mut values = vec![0.0; dense.data.len()];
    dense.for_each_index(|idx, lin| values[lin] = m.entry_unchecked(idx));
    dense.data = values;
    Ok(dense)
}

/// Direct evaluation of the matricized-tensor-times-Khatri-Rao product for
/// `mode`: for each stored nonzero `x_i` at coordinates `l_i`,
///
/// `V[l_i(mode)][j] += lambda_j * x_i * prod_{m != mode} A_m[l_i(m)][j]`.
///
/// Rows of `V` whose tensor slice holds no nonzero stay exactly zero. This
/// shares no code with the production kernels; it is the correctness oracle
/// and is intended for small inputs (about 1e5 nonzeros or fewer).
pub fn mttkrp_oracle(x: &SparseTensor, m: &KTensor, mode: usize) -> Result<FactorMatrix> {
    let d = x.ndims();
    if mode >= d {
        return Err(Error::ModeOutOfRange { mode, ndims: d });
    }
    if x.dims() != m.dims().as_slice() {
        return Err(Error::DimensionMismatch(format!(
            "tensor dims {:?} do not match model dims {:?}",
            x.dims(),
            m.dims()
        )));
    }
    let rank = m.rank();
    let mut v = FactorMatrix::zeros(x.dims()[mode], rank);
    for i in 0..x.nnz() {
        let row = x.coord(i, mode);
        for j in 0..rank {
            let mut term = m.weights()[j] * x.value(i);
            for mm in 0..d {
                if mm != mode {
                    term *= m.factor(mm).get(x.coord(i, mm), j);
                }
            }
            let cur = v.get(row, j);
            v.set(row, j, cur + term);
        }
    }
    Ok(v)
}

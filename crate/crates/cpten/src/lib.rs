//! Sparse tensor CP decomposition with interchangeable parallel MTTKRP kernels.

pub mod bench;
pub mod cpals;
pub mod error;
pub mod ktensor;
pub mod mttkrp;
pub mod oracle;
pub mod sptensor;

pub use cpals::{cp_als, solve_spd, AlsOptions, AlsTrace};
pub use error::{Error, Result};
pub use ktensor::{FactorMatrix, KTensor};
pub use mttkrp::{blocking_policy, mttkrp, BlockingPolicy, MttkrpVariant, Profile};
pub use sptensor::{
    build_perm, read_tns, write_tns, DuplicatePolicy, PermutationSet, SparseTensor,
};

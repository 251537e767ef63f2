//! Parallel sparse MTTKRP: the matricized-tensor-times-Khatri-Rao product.
//!
//! For a mode `n`, the product of a sparse tensor `X` with the factors of a
//! Kruskal model `M` is the `I_n x R` matrix
//!
//! ```text
//! V[k][j] = lambda_j * sum over nonzeros x_i with mode-n coordinate k of
//!           x_i * prod over modes m != n of A_m[coord_i(m)][j]
//! ```
//!
//! This is the dominant kernel inside alternating least squares. Three
//! interchangeable parallel variants are provided, selected by
//! [`MttkrpVariant`]; they share one blocked iteration space described by a
//! [`BlockingPolicy`] and differ only in how partial results reach the
//! output (see [`kernels`](self) docs on each variant). All variants give
//! results equal up to floating-point summation order, for any thread count.

mod atomic_f64;
mod kernels;
mod pool;
mod tile;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ktensor::{FactorMatrix, KTensor};
use crate::sptensor::{PermutationSet, SparseTensor};

use atomic_f64::AtomicF64;
use kernels::{AccumulatorSink, Geometry, KernelCtx};

/// Which kernel strategy runs the product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MttkrpVariant {
    /// Scatter with atomic adds and a runtime-sized scratch row.
    Atomic,
    /// Scatter with compile-time-width column tiles; atomic adds.
    Blocked,
    /// Sorted traversal with run-length accumulation; atomic writes only at
    /// span boundaries. Requires a precomputed [`PermutationSet`].
    #[serde(rename = "perm")]
    Permuted,
}

impl MttkrpVariant {
    /// All variants, in a stable order.
    pub const ALL: [MttkrpVariant; 3] = [
        MttkrpVariant::Atomic,
        MttkrpVariant::Blocked,
        MttkrpVariant::Permuted,
    ];
}

impl std::fmt::Display for MttkrpVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            MttkrpVariant::Atomic => "atomic",
            MttkrpVariant::Blocked => "blocked",
            MttkrpVariant::Permuted => "perm",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for MttkrpVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atomic" => Ok(MttkrpVariant::Atomic),
            "blocked" => Ok(MttkrpVariant::Blocked),
            "perm" | "permuted" => Ok(MttkrpVariant::Permuted),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?}; expected atomic, blocked, or perm"
            ))),
        }
    }
}

/// Hardware flavour steering the blocking heuristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Cache-oriented sizing: scalar lanes, single-member teams, factor
    /// block size `min(2^ceil(log2 R), 32)`.
    CpuLike,
    /// Throughput-oriented sizing from a lookup table of vector widths and
    /// factor block sizes; team size defaults to `128 / vector_size`.
    GpuTable,
}

/// Default nonzeros assigned to each team member's span.
pub const NZPTM: usize = 128;

/// Width of the default flat team on the throughput profile.
const GPU_TEAM_LANES: usize = 128;

/// Throughput-profile sizes as `(max_rank, vector_size, fbs)` rows; the
/// first row with `rank <= max_rank` applies.
const GPU_SIZES: [(usize, usize, usize); 13] = [
    (1, 1, 1),
    (2, 2, 2),
    (3, 2, 4),
    (4, 4, 4),
    (7, 4, 8),
    (8, 8, 8),
    (16, 8, 16),
    (24, 8, 24),
    (47, 8, 32),
    (48, 16, 48),
    (95, 16, 64),
    (96, 32, 96),
    (usize::MAX, 32, 128),
];

/// How one MTTKRP launch carves nonzeros and factor columns into blocks.
///
/// `league_size` reflects the nonzero count given to [`blocking_policy`];
/// kernels recompute the league from the tensor they actually receive, so a
/// policy may be reused across tensors with the same rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockingPolicy {
    /// Factor block size: columns per tile.
    pub fbs: usize,
    /// SIMD lanes the sizing assumes; informational on this scalar build
    /// (inner loops are left to the auto-vectorizer).
    pub vector_size: usize,
    /// Member spans per league block.
    pub team_size: usize,
    /// Nonzeros per team member's span.
    pub nzptm: usize,
    /// Nonzeros per league block: `nzptm * team_size`.
    pub nzpt: usize,
    /// Blocks needed to cover the nonzero count the policy was sized for.
    pub league_size: usize,
}

/// Chooses tile and team sizes for a rank-`rank` product over `nnz`
/// nonzeros.
///
/// `team_size_hint` of 0 keeps the profile default (1 member on
/// [`Profile::CpuLike`], `128 / vector_size` lanes' worth of members on
/// [`Profile::GpuTable`]); a nonzero hint overrides the member count
/// directly.
pub fn blocking_policy(
    rank: usize,
    profile: Profile,
    nnz: usize,
    team_size_hint: usize,
) -> Result<BlockingPolicy> {
    if rank == 0 {
        return Err(Error::ZeroRank);
    }
    let (vector_size, fbs, team_size) = match profile {
        Profile::CpuLike => {
            let fbs = rank.next_power_of_two().min(32);
            let team = if team_size_hint > 0 { team_size_hint } else { 1 };
            (1, fbs, team)
        }
        Profile::GpuTable => {
            let &(_, vector_size, fbs) = GPU_SIZES
                .iter()
                .find(|&&(max_rank, _, _)| rank <= max_rank)
                .expect("size table covers every rank");
            let team = if team_size_hint > 0 {
                team_size_hint
            } else {
                (GPU_TEAM_LANES / vector_size).max(1)
            };
            (vector_size, fbs, team)
        }
    };
    let nzpt = NZPTM
        .checked_mul(team_size)
        .ok_or_else(|| Error::InvalidConfig("team size overflows block size".into()))?;
    Ok(BlockingPolicy {
        fbs,
        vector_size,
        team_size,
        nzptm: NZPTM,
        nzpt,
        league_size: nnz.div_ceil(nzpt),
    })
}

/// Arithmetic per stored nonzero of one rank-`rank` MTTKRP over a `ndims`-way
/// tensor: `ndims * rank` multiplies plus `rank` accumulating adds.
pub fn flops_per_nonzero(ndims: usize, rank: usize) -> u64 {
    (ndims as u64 + 1) * rank as u64
}

/// Computes the mode-`mode` MTTKRP of `x` against model `m` with the chosen
/// kernel variant on `threads` worker threads.
///
/// The output accumulator is zero-initialized on every launch, so output
/// rows whose tensor slice holds no nonzero are exactly zero. The
/// [`MttkrpVariant::Permuted`] variant additionally needs the tensor's
/// [`PermutationSet`]; other variants ignore `perms`.
pub fn mttkrp(
    x: &SparseTensor,
    m: &KTensor,
    mode: usize,
    variant: MttkrpVariant,
    policy: &BlockingPolicy,
    perms: Option<&PermutationSet>,
    threads: usize,
) -> Result<FactorMatrix> {
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
    if policy.fbs == 0 || policy.team_size == 0 || policy.nzptm == 0 {
        return Err(Error::InvalidConfig(
            "blocking policy sizes must be positive".into(),
        ));
    }
    if policy.nzpt != policy.nzptm * policy.team_size {
        return Err(Error::InvalidConfig(format!(
            "nzpt {} must equal nzptm {} x team_size {}",
            policy.nzpt, policy.nzptm, policy.team_size
        )));
    }

    let rank = m.rank();
    let rows = x.dims()[mode];
    let nnz = x.nnz();
    // Zero-initialized shared accumulator; converted back to plain floats
    // once every worker has joined.
    let out: Vec<AtomicF64> = (0..rows * rank).map(|_| AtomicF64::new(0.0)).collect();
    let ctx = KernelCtx::new(x, m, mode, &out);
    let geom = Geometry {
        fbs: policy.fbs,
        nzptm: policy.nzptm,
        team_size: policy.team_size,
        nzpt: policy.nzpt,
        league: nnz.div_ceil(policy.nzpt),
        nnz,
    };

    match variant {
        MttkrpVariant::Atomic => kernels::run_atomic(&ctx, &geom, threads),
        MttkrpVariant::Blocked => kernels::run_blocked(&ctx, &geom, threads),
        MttkrpVariant::Permuted => {
            let perms = perms.ok_or(Error::MissingPermutations)?;
            if perms.nnz() != nnz || perms.ndims() != d {
                return Err(Error::DimensionMismatch(format!(
                    "permutation set covers {} nonzeros over {} modes; tensor has {} over {}",
                    perms.nnz(),
                    perms.ndims(),
                    nnz,
                    d
                )));
            }
            let sink = AccumulatorSink { out: &out, rank };
            kernels::run_permuted(&ctx, &geom, perms.perm(mode), &sink, threads);
        }
    }

    let data: Vec<f64> = out.into_iter().map(AtomicF64::into_inner).collect();
    FactorMatrix::from_vec(rows, rank, data)
}

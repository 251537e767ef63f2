//! The three parallel MTTKRP kernel bodies.
//!
//! All variants traverse the same blocked iteration space: the nonzero list
//! is cut into league blocks of `nzpt` nonzeros, each block into `team_size`
//! member spans of `nzptm` nonzeros, and factor columns into tiles of `fbs`
//! columns. A worker owns one block at a time (see [`super::pool`]), walks
//! the column tiles, and within each tile processes its member spans:
//!
//! * **atomic scatter** — per nonzero, build the scaled Hadamard row product
//!   in a runtime-sized scratch tile and add every lane atomically into the
//!   output row. Simple and always safe; pays one atomic per lane.
//! * **blocked scatter** — identical traversal, but full tiles run through a
//!   compile-time-width tile so the inner loops unroll; remainder tiles fall
//!   back to the runtime path. Output adds are still atomic.
//! * **permuted traversal** — walk the nonzeros in the mode's sorted order,
//!   accumulate a running row total, and flush only when the row changes.
//!   Rows strictly inside a member span are owned by exactly one worker and
//!   flushed with plain writes; the first and last rows of a span may be
//!   shared with neighbouring spans and are flushed atomically.

use crate::ktensor::KTensor;
use crate::sptensor::SparseTensor;

use super::atomic_f64::AtomicF64;
use super::pool::run_league;
use super::tile::{FixedTile, HeapTile, Tile};

/// Widths with a compiled [`FixedTile`] instantiation: every block size the
/// policy tables can produce. Other widths use the runtime tile.
pub(crate) fn has_fixed_width(width: usize) -> bool {
    matches!(width, 1 | 2 | 4 | 8 | 16 | 24 | 32 | 48 | 64 | 96 | 128)
}

/// Dispatches `$call!(N)` with the matching compile-time width.
macro_rules! with_fixed_width {
    ($width:expr, $call:ident) => {
        match $width {
            1 => $call!(1),
            2 => $call!(2),
            4 => $call!(4),
            8 => $call!(8),
            16 => $call!(16),
            24 => $call!(24),
            32 => $call!(32),
            48 => $call!(48),
            64 => $call!(64),
            96 => $call!(96),
            128 => $call!(128),
            other => unreachable!("no fixed tile of width {other}"),
        }
    };
}

/// Read-only kernel inputs plus the shared output accumulator.
///
/// Factor matrices are exposed as raw row-major slices with stride `rank`
/// so the hot loops slice one row segment per mode without indirection.
pub(crate) struct KernelCtx<'a> {
    pub x: &'a SparseTensor,
    pub mode: usize,
    pub rank: usize,
    pub weights: &'a [f64],
    pub factors: Vec<&'a [f64]>,
    pub out: &'a [AtomicF64],
}

impl<'a> KernelCtx<'a> {
    pub fn new(x: &'a SparseTensor, m: &'a KTensor, mode: usize, out: &'a [AtomicF64]) -> Self {
        KernelCtx {
            x,
            mode,
            rank: m.rank(),
            weights: m.weights(),
            factors: (0..m.ndims()).map(|n| m.factor(n).data()).collect(),
            out,
        }
    }
}

/// The blocked iteration space: how nonzeros and columns are cut up.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Geometry {
    pub fbs: usize,
    pub nzptm: usize,
    pub team_size: usize,
    pub nzpt: usize,
    pub league: usize,
    pub nnz: usize,
}

impl Geometry {
    /// Half-open nonzero span `[i0, i1)` of `member` within `block`,
    /// clipped to the nonzero count.
    #[inline]
    fn member_span(&self, block: usize, member: usize) -> (usize, usize) {
        let start = block * self.nzpt + member * self.nzptm;
        if start >= self.nnz {
            return (self.nnz, self.nnz);
        }
        (start, (start + self.nzptm).min(self.nnz))
    }

    /// Column tiles as `(jb, width)` pairs.
    fn tiles(&self, rank: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let fbs = self.fbs;
        (0..rank).step_by(fbs).map(move |jb| (jb, fbs.min(rank - jb)))
    }
}

/// Where the permuted kernel sends finished row totals. The production sink
/// writes into the shared accumulator; tests substitute a recording sink to
/// audit the write discipline.
pub(crate) trait RowSink {
    /// Add `values` into output row `row` at column offset `jb` atomically;
    /// used when the row may be shared with another worker's span.
    fn flush_atomic(&self, row: usize, jb: usize, values: &[f64]);
    /// Same, but with plain writes; only legal for rows this span owns.
    fn flush_plain(&self, row: usize, jb: usize, values: &[f64]);
}

/// The production sink: adds into the shared output buffer.
pub(crate) struct AccumulatorSink<'a> {
    pub out: &'a [AtomicF64],
    pub rank: usize,
}

impl RowSink for AccumulatorSink<'_> {
    #[inline]
    fn flush_atomic(&self, row: usize, jb: usize, values: &[f64]) {
        let base = row * self.rank + jb;
        for (offset, &v) in values.iter().enumerate() {
            self.out[base + offset].add_atomic(v);
        }
    }

    #[inline]
    fn flush_plain(&self, row: usize, jb: usize, values: &[f64]) {
        let base = row * self.rank + jb;
        for (offset, &v) in values.iter().enumerate() {
            self.out[base + offset].add_plain(v);
        }
    }
}

/// Scatter body shared by the atomic and blocked variants: for each nonzero
/// in the span, build `weight * value * prod(factor rows)` in `tmp` and add
/// each lane atomically into the output row for the target mode.
#[inline]
fn scatter_span<T: Tile>(ctx: &KernelCtx<'_>, jb: usize, i0: usize, i1: usize, tmp: &mut T) {
    let nj = tmp.width();
    let rank = ctx.rank;
    let mode = ctx.mode;
    let weights = &ctx.weights[jb..jb + nj];
    for i in i0..i1 {
        let coords = ctx.x.coord_row(i);
        tmp.fill_scaled(ctx.x.value(i), weights);
        for (m, factor) in ctx.factors.iter().enumerate() {
            if m == mode {
                continue;
            }
            tmp.mul_assign_slice(&factor[coords[m] * rank + jb..][..nj]);
        }
        let base = coords[mode] * rank + jb;
        for (offset, &v) in tmp.as_slice().iter().enumerate() {
            ctx.out[base + offset].add_atomic(v);
        }
    }
}

/// Permuted-traversal body for one member span: walk `perm[i0..i1]` (sorted
/// by the target-mode coordinate), accumulate the running row total in
/// `val`, and flush on row changes. The first and last rows of the span go
/// through [`RowSink::flush_atomic`]; interior rows are plain writes.
#[inline]
fn permuted_span<T: Tile, S: RowSink>(
    ctx: &KernelCtx<'_>,
    perm: &[usize],
    jb: usize,
    i0: usize,
    i1: usize,
    tmp: &mut T,
    val: &mut T,
    sink: &S,
) {
    if i0 >= i1 {
        return;
    }
    let nj = tmp.width();
    let rank = ctx.rank;
    let mode = ctx.mode;
    let weights = &ctx.weights[jb..jb + nj];
    val.clear();
    let first_row = ctx.x.coord(perm[i0], mode);
    let mut prev_row = first_row;
    for i in i0..i1 {
        let position = perm[i];
        let coords = ctx.x.coord_row(position);
        let row = coords[mode];
        if row != prev_row {
            if prev_row == first_row {
                sink.flush_atomic(prev_row, jb, val.as_slice());
            } else {
                sink.flush_plain(prev_row, jb, val.as_slice());
            }
            val.clear();
            prev_row = row;
        }
        tmp.fill_scaled(ctx.x.value(position), weights);
        for (m, factor) in ctx.factors.iter().enumerate() {
            if m == mode {
                continue;
            }
            tmp.mul_assign_slice(&factor[coords[m] * rank + jb..][..nj]);
        }
        val.add_assign_tile(tmp);
        if i + 1 == i1 {
            sink.flush_atomic(row, jb, val.as_slice());
        }
    }
}

/// Atomic-scatter variant: every tile uses the runtime-sized scratch.
pub(crate) fn run_atomic(ctx: &KernelCtx<'_>, geom: &Geometry, threads: usize) {
    run_league(threads, geom.league, || {
        let mut scratch = HeapTile::new(geom.fbs);
        move |block| {
            for (jb, nj) in geom.tiles(ctx.rank) {
                scratch.set_width(nj);
                for member in 0..geom.team_size {
                    let (i0, i1) = geom.member_span(block, member);
                    scatter_span(ctx, jb, i0, i1, &mut scratch);
                }
            }
        }
    });
}

fn scatter_block_fixed<const N: usize>(ctx: &KernelCtx<'_>, geom: &Geometry, block: usize, jb: usize) {
    let mut tmp = FixedTile::<N>::new();
    for member in 0..geom.team_size {
        let (i0, i1) = geom.member_span(block, member);
        scatter_span(ctx, jb, i0, i1, &mut tmp);
    }
}

/// Blocked variant: full tiles run at compile-time width, remainders on the
/// runtime path.
pub(crate) fn run_blocked(ctx: &KernelCtx<'_>, geom: &Geometry, threads: usize) {
    run_league(threads, geom.league, || {
        let mut spill = HeapTile::new(geom.fbs);
        move |block| {
            for (jb, nj) in geom.tiles(ctx.rank) {
                if nj == geom.fbs && has_fixed_width(nj) {
                    macro_rules! go {
                        ($n:literal) => {
                            scatter_block_fixed::<$n>(ctx, geom, block, jb)
                        };
                    }
                    with_fixed_width!(nj, go);
                } else {
                    spill.set_width(nj);
                    for member in 0..geom.team_size {
                        let (i0, i1) = geom.member_span(block, member);
                        scatter_span(ctx, jb, i0, i1, &mut spill);
                    }
                }
            }
        }
    });
}

fn permuted_block_fixed<const N: usize, S: RowSink>(
    ctx: &KernelCtx<'_>,
    geom: &Geometry,
    perm: &[usize],
    sink: &S,
    block: usize,
    jb: usize,
) {
    let mut tmp = FixedTile::<N>::new();
    let mut val = FixedTile::<N>::new();
    for member in 0..geom.team_size {
        let (i0, i1) = geom.member_span(block, member);
        permuted_span(ctx, perm, jb, i0, i1, &mut tmp, &mut val, sink);
    }
}

/// Permuted-traversal variant over a sorted permutation of the nonzeros.
pub(crate) fn run_permuted<S: RowSink + Sync>(
    ctx: &KernelCtx<'_>,
    geom: &Geometry,
    perm: &[usize],
    sink: &S,
    threads: usize,
) {
    run_league(threads, geom.league, || {
        let mut spill_tmp = HeapTile::new(geom.fbs);
        let mut spill_val = HeapTile::new(geom.fbs);
        move |block| {
            for (jb, nj) in geom.tiles(ctx.rank) {
                if nj == geom.fbs && has_fixed_width(nj) {
                    macro_rules! go {
                        ($n:literal) => {
                            permuted_block_fixed::<$n, S>(ctx, geom, perm, sink, block, jb)
                        };
                    }
                    with_fixed_width!(nj, go);
                } else {
                    spill_tmp.set_width(nj);
                    spill_val.set_width(nj);
                    for member in 0..geom.team_size {
                        let (i0, i1) = geom.member_span(block, member);
                        permuted_span(ctx, perm, jb, i0, i1, &mut spill_tmp, &mut spill_val, sink);
                    }
                }
            }
        }
    });
}

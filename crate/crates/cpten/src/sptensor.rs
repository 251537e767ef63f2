//! Sparse tensors in coordinate (COO) format.
//!
//! A tensor is stored as a list of nonzeros: a row-major `P x d` table of
//! 0-based coordinates plus a parallel array of `P` values. The layout is
//! deliberately flat so kernels touch one contiguous coordinate row and one
//! value per nonzero. Mode-wise traversal orders are precomputed separately
//! as a [`PermutationSet`] so the nonzero storage itself is never reordered.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// What to do when the same coordinate appears more than once in input data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// Sum the values of repeated coordinates into the first occurrence.
    MergeSum,
    /// Reject the input with [`Error::DuplicateCoordinate`].
    Error,
}

/// A `d`-way sparse tensor holding `P` explicit nonzeros.
///
/// Invariants maintained by every constructor:
/// * every mode length is positive,
/// * every coordinate lies within its mode length,
/// * no coordinate row appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    dims: Vec<usize>,
    /// Row-major `P x d` coordinate table, 0-based.
    coords: Vec<usize>,
    values: Vec<f64>,
}

impl SparseTensor {
    /// Builds a tensor from a flat row-major `P x d` coordinate table and a
    /// parallel value array, validating every coordinate against `dims`.
    ///
    /// Duplicate coordinate rows are handled per `policy`; under
    /// [`DuplicatePolicy::MergeSum`] the surviving nonzeros keep the input
    /// order of their first occurrence.
    pub fn from_coo(
        dims: &[usize],
        coords: &[usize],
        values: &[f64],
        policy: DuplicatePolicy,
    ) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::DimensionMismatch(
                "tensor must have at least one mode".into(),
            ));
        }
        if let Some(m) = dims.iter().position(|&e| e == 0) {
            return Err(Error::DimensionMismatch(format!(
                "mode {m} has length 0; every mode length must be positive"
            )));
        }
        let d = dims.len();
        if values.len().checked_mul(d) != Some(coords.len()) {
            return Err(Error::DimensionMismatch(format!(
                "coordinate table has {} entries; expected {} nonzeros x {} modes",
                coords.len(),
                values.len(),
                d
            )));
        }
        for (i, row) in coords.chunks_exact(d).enumerate() {
            for (mode, (&index, &extent)) in row.iter().zip(dims).enumerate() {
                if index >= extent {
                    return Err(Error::CoordinateOutOfRange {
                        nonzero: i,
                        mode,
                        index,
                        extent,
                    });
                }
            }
        }

        // Deduplicate while preserving first-occurrence order. The map keys
        // borrow rows of the input table, so output buffers are built apart.
        let mut seen: HashMap<&[usize], usize> = HashMap::with_capacity(values.len());
        let mut out_coords = Vec::with_capacity(coords.len());
        let mut out_values: Vec<f64> = Vec::with_capacity(values.len());
        for (i, (row, &v)) in coords.chunks_exact(d).zip(values).enumerate() {
            match seen.entry(row) {
                std::collections::hash_map::Entry::Occupied(slot) => {
                    if policy == DuplicatePolicy::Error {
                        return Err(Error::DuplicateCoordinate(i));
                    }
                    out_values[*slot.get()] += v;
                }
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(out_values.len());
                    out_coords.extend_from_slice(row);
                    out_values.push(v);
                }
            }
        }

        Ok(SparseTensor {
            dims: dims.to_vec(),
            coords: out_coords,
            values: out_values,
        })
    }

    /// Generates a tensor with exactly `nnz` distinct coordinates drawn
    /// uniformly at random and values i.i.d. uniform on `[0, 1)`.
    ///
    /// The same `(dims, nnz, seed)` triple always produces the same tensor.
    pub fn random_sparse(dims: &[usize], nnz: usize, seed: u64) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::DimensionMismatch(
                "tensor must have at least one mode".into(),
            ));
        }
        if let Some(m) = dims.iter().position(|&e| e == 0) {
            return Err(Error::DimensionMismatch(format!(
                "mode {m} has length 0; every mode length must be positive"
            )));
        }
        let capacity: u128 = dims.iter().map(|&e| e as u128).product();
        if nnz as u128 > capacity {
            return Err(Error::CapacityExceeded {
                requested: nnz,
                capacity,
            });
        }

        let d = dims.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords = Vec::with_capacity(nnz * d);

        // Dense regime: a partial Fisher-Yates shuffle over all linear cells
        // guarantees distinctness without rejection stalls. Sparse regime:
        // rejection sampling on hashed linear indices stays O(nnz) expected.
        let dense_regime =
            capacity <= 2 * nnz as u128 && usize::try_from(capacity).is_ok();
        if dense_regime {
            let cap = capacity as usize;
            let mut cells: Vec<usize> = (0..cap).collect();
            for k in 0..nnz {
                let j = rng.random_range(k..cap);
                cells.swap(k, j);
                let mut linear = cells[k];
                // Decode row-major: the last mode varies fastest.
                let row_start = coords.len();
                coords.resize(row_start + d, 0);
                for m in (0..d).rev() {
                    coords[row_start + m] = linear % dims[m];
                    linear /= dims[m];
                }
            }
        } else {
            let mut taken: HashSet<u128> = HashSet::with_capacity(nnz);
            let mut row = vec![0usize; d];
            while taken.len() < nnz {
                let mut linear: u128 = 0;
                for (m, &extent) in dims.iter().enumerate() {
                    row[m] = rng.random_range(0..extent);
                    linear = linear * extent as u128 + row[m] as u128;
                }
                if taken.insert(linear) {
                    coords.extend_from_slice(&row);
                }
            }
        }

        let values: Vec<f64> = (0..nnz).map(|_| rng.random::<f64>()).collect();
        Ok(SparseTensor {
            dims: dims.to_vec(),
            coords,
            values,
        })
    }

    /// Number of modes `d`.
    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    /// Mode lengths.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of explicit nonzeros `P`.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Value of nonzero `i`.
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Coordinate of nonzero `i` in mode `mode`.
    #[inline]
    pub fn coord(&self, i: usize, mode: usize) -> usize {
        self.coords[i * self.dims.len() + mode]
    }

    /// Full coordinate row of nonzero `i`.
    #[inline]
    pub fn coord_row(&self, i: usize) -> &[usize] {
        let d = self.dims.len();
        &self.coords[i * d..(i + 1) * d]
    }

    /// All values in storage order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Frobenius norm: the square root of the sum of squared values.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Bytes needed to store the nonzero list with `float_bytes` per value
    /// and `ordinal_bytes` per coordinate; `with_perms` additionally counts
    /// one precomputed traversal permutation per mode.
    ///
    /// For any `P > 0` the permuted footprint is strictly less than twice
    /// the base footprint, since the permutations only double the ordinal
    /// portion of each nonzero.
    pub fn storage_bytes(&self, with_perms: bool, float_bytes: u64, ordinal_bytes: u64) -> u64 {
        let d = self.ndims() as u64;
        let p = self.nnz() as u64;
        let ordinals = if with_perms { 2 * d } else { d };
        (float_bytes + ordinals * ordinal_bytes) * p
    }
}

/// Reads a tensor from whitespace-separated text: one nonzero per line, `d`
/// 1-based coordinates followed by the value.
///
/// Blank lines are skipped. Lines starting with `#` are comments, except
/// that a `# dims: I1 I2 ...` header pins the mode lengths explicitly;
/// without it each mode length is inferred as the per-mode coordinate
/// maximum. Duplicate coordinates are merge-summed.
pub fn read_tns<R: BufRead>(reader: R) -> Result<SparseTensor> {
    let mut header_dims: Option<Vec<usize>> = None;
    let mut coords: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut ncols: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            if let Some(spec) = comment.trim_start().strip_prefix("dims:") {
                let mut dims = Vec::new();
                for token in spec.split_whitespace() {
                    let extent: usize = token.parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("invalid mode length {token:?} in dims header"),
                    })?;
                    dims.push(extent);
                }
                if dims.is_empty() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "dims header lists no mode lengths".into(),
                    });
                }
                header_dims = Some(dims);
            }
            continue;
        }

        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "expected at least one coordinate and a value, found {} token(s)",
                    tokens.len()
                ),
            });
        }
        match ncols {
            None => ncols = Some(tokens.len()),
            Some(n) if n != tokens.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {n} columns, found {}", tokens.len()),
                });
            }
            Some(_) => {}
        }

        for token in &tokens[..tokens.len() - 1] {
            let index: usize = token.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid coordinate {token:?}"),
            })?;
            if index == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "coordinates are 1-based; found 0".into(),
                });
            }
            coords.push(index - 1);
        }
        let vtoken = tokens[tokens.len() - 1];
        let value: f64 = vtoken.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("invalid value {vtoken:?}"),
        })?;
        values.push(value);
    }

    if values.is_empty() {
        return Err(Error::EmptyFile);
    }
    let d = ncols.unwrap() - 1;
    let dims = match header_dims {
        Some(dims) => {
            if dims.len() != d {
                return Err(Error::Parse {
                    line: 0,
                    message: format!(
                        "dims header names {} modes but data lines have {d} coordinates",
                        dims.len()
                    ),
                });
            }
            dims
        }
        None => {
            let mut dims = vec![0usize; d];
            for row in coords.chunks_exact(d) {
                for (m, &ix) in row.iter().enumerate() {
                    dims[m] = dims[m].max(ix + 1);
                }
            }
            dims
        }
    };
    SparseTensor::from_coo(&dims, &coords, &values, DuplicatePolicy::MergeSum)
}

/// Writes a tensor as whitespace-separated text, one nonzero per line with
/// 1-based coordinates and the value last, e.g. `1 2 3.5`.
pub fn write_tns<W: Write>(x: &SparseTensor, mut writer: W) -> Result<()> {
    let mut line = String::new();
    for i in 0..x.nnz() {
        line.clear();
        for &ix in x.coord_row(i) {
            line.push_str(&(ix + 1).to_string());
            line.push(' ');
        }
        line.push_str(&x.value(i).to_string());
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Precomputed stable traversal orders, one permutation per mode.
///
/// `perm(n)` lists nonzero positions so that the mode-`n` coordinate is
/// non-decreasing along the traversal; ties keep storage order (the sorts
/// are stable), so the set is a pure function of the tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSet {
    nnz: usize,
    perms: Vec<Vec<usize>>,
}

impl PermutationSet {
    /// Number of modes covered.
    pub fn ndims(&self) -> usize {
        self.perms.len()
    }

    /// Number of nonzeros each permutation covers.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// The traversal order for `mode`.
    pub fn perm(&self, mode: usize) -> &[usize] {
        &self.perms[mode]
    }
}

/// Builds the per-mode stable sort permutations for `x`, one mode per thread.
///
/// Modes whose length does not exceed the nonzero count use a counting sort
/// (linear time); longer modes fall back to a stable comparison sort. Both
/// produce the unique stable order, so the result does not depend on which
/// path ran or on threading.
pub fn build_perm(x: &SparseTensor) -> PermutationSet {
    let d = x.ndims();
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(d);
    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(d.saturating_sub(1));
        for mode in 1..d {
            handles.push(scope.spawn(move || sort_mode(x, mode)));
        }
        perms.push(sort_mode(x, 0));
        for handle in handles {
            perms.push(handle.join().expect("permutation sort thread panicked"));
        }
    });
    PermutationSet { nnz: x.nnz(), perms }
}

/// Stable sort of nonzero positions by their coordinate in `mode`.
fn sort_mode(x: &SparseTensor, mode: usize) -> Vec<usize> {
    let p = x.nnz();
    let extent = x.dims()[mode];
    if extent <= p {
        // Counting sort: histogram, exclusive prefix, stable scatter.
        let mut count = vec![0usize; extent + 1];
        for i in 0..p {
            count[x.coord(i, mode) + 1] += 1;
        }
        for k in 1..=extent {
            count[k] += count[k - 1];
        }
        let mut perm = vec![0usize; p];
        for i in 0..p {
            let k = x.coord(i, mode);
            perm[count[k]] = i;
            count[k] += 1;
        }
        perm
    } else {
        let mut perm: Vec<usize> = (0..p).collect();
        perm.sort_by_key(|&i| x.coord(i, mode));
        perm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn tiny() -> SparseTensor {
        SparseTensor::from_coo(
            &[2, 3],
            &[0, 0, 1, 2, 0, 1],
            &[1.0, 2.0, 3.0],
            DuplicatePolicy::Error,
        )
        .unwrap()
    }

    #[test]
    fn from_coo_accepts_valid_input() {
        let x = tiny();
        assert_eq!(x.ndims(), 2);
        assert_eq!(x.nnz(), 3);
        assert_eq!(x.coord_row(1), &[1, 2]);
        assert_eq!(x.value(2), 3.0);
    }

    #[test]
    fn from_coo_rejects_out_of_range_coordinate() {
        let err = SparseTensor::from_coo(&[2, 3], &[0, 3], &[1.0], DuplicatePolicy::Error)
            .unwrap_err();
        match err {
            Error::CoordinateOutOfRange {
                nonzero,
                mode,
                index,
                extent,
            } => {
                assert_eq!((nonzero, mode, index, extent), (0, 1, 3, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn from_coo_rejects_zero_length_mode() {
        let err =
            SparseTensor::from_coo(&[2, 0], &[], &[], DuplicatePolicy::Error).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn from_coo_rejects_mismatched_table() {
        let err = SparseTensor::from_coo(&[2, 3], &[0, 0, 1], &[1.0], DuplicatePolicy::Error)
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn duplicates_merge_in_first_occurrence_order() {
        let x = SparseTensor::from_coo(
            &[4],
            &[2, 0, 2, 1],
            &[1.0, 5.0, 0.25, -1.0],
            DuplicatePolicy::MergeSum,
        )
        .unwrap();
        assert_eq!(x.nnz(), 3);
        assert_eq!(x.coord_row(0), &[2]);
        assert_eq!(x.value(0), 1.25);
        assert_eq!(x.coord_row(1), &[0]);
        assert_eq!(x.coord_row(2), &[1]);
    }

    #[test]
    fn duplicates_error_under_strict_policy() {
        let err = SparseTensor::from_coo(
            &[4],
            &[2, 0, 2],
            &[1.0, 5.0, 0.25],
            DuplicatePolicy::Error,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateCoordinate(2)));
    }

    #[test]
    fn empty_nonzero_list_is_allowed() {
        let x = SparseTensor::from_coo(&[3, 3], &[], &[], DuplicatePolicy::Error).unwrap();
        assert_eq!(x.nnz(), 0);
        assert_eq!(x.frobenius_norm(), 0.0);
    }

    #[test]
    fn random_sparse_is_deterministic_and_distinct() {
        let a = SparseTensor::random_sparse(&[5, 6, 7], 100, 42).unwrap();
        let b = SparseTensor::random_sparse(&[5, 6, 7], 100, 42).unwrap();
        assert_eq!(a, b);
        let c = SparseTensor::random_sparse(&[5, 6, 7], 100, 43).unwrap();
        assert_ne!(a, c);

        let mut seen = HashSet::new();
        for i in 0..a.nnz() {
            assert!(seen.insert(a.coord_row(i).to_vec()), "repeated coordinate");
            for (m, &ix) in a.coord_row(i).iter().enumerate() {
                assert!(ix < a.dims()[m]);
            }
            let v = a.value(i);
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn random_sparse_fills_tensor_exactly_at_capacity() {
        // Forces the dense Fisher-Yates branch to emit every cell once.
        let x = SparseTensor::random_sparse(&[3, 4], 12, 7).unwrap();
        let mut seen = HashSet::new();
        for i in 0..12 {
            seen.insert((x.coord(i, 0), x.coord(i, 1)));
        }
        assert_eq!(seen.len(), 12);
    }

    #[test]
    fn random_sparse_rejects_over_capacity() {
        let err = SparseTensor::random_sparse(&[2, 3], 7, 0).unwrap_err();
        assert!(matches!(
            err,
            Error::CapacityExceeded {
                requested: 7,
                capacity: 6
            }
        ));
    }

    #[test]
    fn read_tns_parses_comments_blanks_and_duplicates() {
        let text = "# a comment\n\n1 1 1 1.0\n2 3 4 2.5\n\n1 1 1 0.5\n";
        let x = read_tns(Cursor::new(text)).unwrap();
        assert_eq!(x.dims(), &[2, 3, 4]);
        assert_eq!(x.nnz(), 2);
        assert_eq!(x.value(0), 1.5);
        assert_eq!(x.coord_row(1), &[1, 2, 3]);
    }

    #[test]
    fn read_tns_honours_dims_header() {
        let text = "# dims: 10 10 10\n1 2 3 4.0\n";
        let x = read_tns(Cursor::new(text)).unwrap();
        assert_eq!(x.dims(), &[10, 10, 10]);
    }

    #[test]
    fn read_tns_rejects_bad_input() {
        assert!(matches!(
            read_tns(Cursor::new("")).unwrap_err(),
            Error::EmptyFile
        ));
        assert!(matches!(
            read_tns(Cursor::new("# only a comment\n")).unwrap_err(),
            Error::EmptyFile
        ));
        assert!(matches!(
            read_tns(Cursor::new("1 2 x\n")).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(
            read_tns(Cursor::new("1 2 3.0\n1 2 3 4.0\n")).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(matches!(
            read_tns(Cursor::new("0 2 3.0\n")).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn write_tns_formats_one_based_rows() {
        let x = tiny();
        let mut out = Vec::new();
        write_tns(&x, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "1 1 1\n2 3 2\n1 2 3\n");
    }

    #[test]
    fn build_perm_orders_every_mode() {
        let x = SparseTensor::random_sparse(&[9, 40, 3], 60, 11).unwrap();
        let perms = build_perm(&x);
        assert_eq!(perms.ndims(), 3);
        assert_eq!(perms.nnz(), 60);
        for mode in 0..3 {
            let perm = perms.perm(mode);
            let mut seen = vec![false; x.nnz()];
            for &i in perm {
                assert!(!seen[i], "permutation repeats position {i}");
                seen[i] = true;
            }
            for w in perm.windows(2) {
                let (a, b) = (x.coord(w[0], mode), x.coord(w[1], mode));
                assert!(a < b || (a == b && w[0] < w[1]), "not a stable order");
            }
        }
    }

    #[test]
    fn counting_and_comparison_sorts_agree() {
        // dims straddle the nonzero count so both paths are exercised on the
        // same data: mode 0 counts (4 <= 50), mode 1 compares (600 > 50).
        let x = SparseTensor::random_sparse(&[4, 600], 50, 5).unwrap();
        let perms = build_perm(&x);
        for mode in 0..2 {
            let mut expect: Vec<usize> = (0..x.nnz()).collect();
            expect.sort_by_key(|&i| x.coord(i, mode));
            assert_eq!(perms.perm(mode), expect.as_slice());
        }
    }

    #[test]
    fn storage_bytes_matches_closed_form() {
        let x = SparseTensor::random_sparse(&[8, 8, 8], 100, 1).unwrap();
        assert_eq!(x.storage_bytes(false, 8, 8), (8 + 3 * 8) * 100);
        assert_eq!(x.storage_bytes(true, 8, 8), (8 + 6 * 8) * 100);
        assert_eq!(x.storage_bytes(false, 4, 4), (4 + 3 * 4) * 100);
        assert!(x.storage_bytes(true, 8, 8) < 2 * x.storage_bytes(false, 8, 8));
    }

    proptest! {
        /// Round-trip through the text format preserves the nonzero multiset
        /// (coordinates are distinct post-construction, so order-insensitive
        /// equality is exact).
        #[test]
        fn tns_round_trip(dims in proptest::collection::vec(1usize..6, 1..4),
                          seed in 0u64..1000) {
            let capacity: usize = dims.iter().product();
            let nnz = 1 + seed as usize % capacity;
            let x = SparseTensor::random_sparse(&dims, nnz, seed).unwrap();
            let mut buf = Vec::new();
            write_tns(&x, &mut buf).unwrap();
            let y = read_tns(Cursor::new(buf)).unwrap();
            prop_assert_eq!(y.nnz(), x.nnz());
            let mut expect: HashMap<Vec<usize>, f64> = HashMap::new();
            for i in 0..x.nnz() {
                expect.insert(x.coord_row(i).to_vec(), x.value(i));
            }
            for i in 0..y.nnz() {
                let got = expect.remove(y.coord_row(i));
                prop_assert_eq!(got, Some(y.value(i)));
            }
            // Inferred dims never exceed the true dims.
            for (a, b) in y.dims().iter().zip(&dims) {
                prop_assert!(a <= b);
            }
        }

        /// Permutations are bijections with non-decreasing keys for random
        /// shapes, including repeated coordinates in short modes.
        #[test]
        fn perm_invariants(dims in proptest::collection::vec(1usize..12, 1..4),
                           seed in 0u64..1000) {
            let capacity: usize = dims.iter().product();
            let nnz = 1 + seed as usize % capacity.min(64);
            let x = SparseTensor::random_sparse(&dims, nnz, seed).unwrap();
            let perms = build_perm(&x);
            for mode in 0..x.ndims() {
                let perm = perms.perm(mode);
                let mut seen = vec![false; nnz];
                for &i in perm {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
                for w in perm.windows(2) {
                    prop_assert!(x.coord(w[0], mode) <= x.coord(w[1], mode));
                }
            }
        }

        /// Merge-summing duplicates matches a naive map-based accumulator.
        #[test]
        fn merge_sum_matches_map(rows in proptest::collection::vec(
            (0usize..3, 0usize..3, -10.0f64..10.0), 0..20)) {
            let mut coords = Vec::new();
            let mut values = Vec::new();
            for &(a, b, v) in &rows {
                coords.extend_from_slice(&[a, b]);
                values.push(v);
            }
            let x = SparseTensor::from_coo(&[3, 3], &coords, &values,
                                           DuplicatePolicy::MergeSum).unwrap();
            let mut expect: HashMap<(usize, usize), f64> = HashMap::new();
            for &(a, b, v) in &rows {
                *expect.entry((a, b)).or_insert(0.0) += v;
            }
            prop_assert_eq!(x.nnz(), expect.len());
            for i in 0..x.nnz() {
                let key = (x.coord(i, 0), x.coord(i, 1));
                prop_assert_eq!(expect.get(&key).copied(), Some(x.value(i)));
            }
        }
    }
}

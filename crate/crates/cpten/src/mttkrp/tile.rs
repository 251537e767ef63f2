//! Small per-worker vectors covering one column tile of the output.
//!
//! The kernels process factor columns in tiles of the policy's block size.
//! [`FixedTile`] pins the tile width at compile time so the inner loops
//! unroll and vectorize; [`HeapTile`] handles remainder tiles and widths
//! with no compiled instantiation at a small cost. Both implement the same
//! [`Tile`] operations, so kernel bodies are written once and monomorphized.

/// Elementwise operations on one column tile.
pub(crate) trait Tile {
    /// Current tile width.
    fn width(&self) -> usize;
    /// `tile[j] = scale * weights[j]`.
    fn fill_scaled(&mut self, scale: f64, weights: &[f64]);
    /// `tile[j] *= row[j]`.
    fn mul_assign_slice(&mut self, row: &[f64]);
    /// `tile[j] += other[j]`.
    fn add_assign_tile(&mut self, other: &Self);
    /// `tile[j] = 0`.
    fn clear(&mut self);
    /// The tile contents.
    fn as_slice(&self) -> &[f64];
}

/// A tile of compile-time width `N`, stored on the stack.
pub(crate) struct FixedTile<const N: usize>([f64; N]);

impl<const N: usize> FixedTile<N> {
    #[inline]
    pub fn new() -> Self {
        FixedTile([0.0; N])
    }
}

impl<const N: usize> Tile for FixedTile<N> {
    #[inline]
    fn width(&self) -> usize {
        N
    }

    #[inline]
    fn fill_scaled(&mut self, scale: f64, weights: &[f64]) {
        let weights = &weights[..N];
        for j in 0..N {
            self.0[j] = scale * weights[j];
        }
    }

    #[inline]
    fn mul_assign_slice(&mut self, row: &[f64]) {
        let row = &row[..N];
        for j in 0..N {
            self.0[j] *= row[j];
        }
    }

    #[inline]
    fn add_assign_tile(&mut self, other: &Self) {
        for j in 0..N {
            self.0[j] += other.0[j];
        }
    }

    #[inline]
    fn clear(&mut self) {
        self.0 = [0.0; N];
    }

    #[inline]
    fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A tile whose width is set at run time, reusing one heap buffer.
pub(crate) struct HeapTile {
    buf: Vec<f64>,
    width: usize,
}

impl HeapTile {
    /// A tile with room for widths up to `capacity`.
    pub fn new(capacity: usize) -> Self {
        HeapTile {
            buf: vec![0.0; capacity],
            width: capacity,
        }
    }

    /// Shrinks or widens the active window (must fit the buffer).
    pub fn set_width(&mut self, width: usize) {
        debug_assert!(width <= self.buf.len());
        self.width = width;
    }
}

impl Tile for HeapTile {
    #[inline]
    fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn fill_scaled(&mut self, scale: f64, weights: &[f64]) {
        let buf = &mut self.buf[..self.width];
        let weights = &weights[..buf.len()];
        for (t, &w) in buf.iter_mut().zip(weights) {
            *t = scale * w;
        }
    }

    #[inline]
    fn mul_assign_slice(&mut self, row: &[f64]) {
        let buf = &mut self.buf[..self.width];
        let row = &row[..buf.len()];
        for (t, &r) in buf.iter_mut().zip(row) {
            *t *= r;
        }
    }

    #[inline]
    fn add_assign_tile(&mut self, other: &Self) {
        debug_assert_eq!(self.width, other.width);
        let buf = &mut self.buf[..self.width];
        for (t, &o) in buf.iter_mut().zip(&other.buf[..other.width]) {
            *t += o;
        }
    }

    #[inline]
    fn clear(&mut self) {
        for t in &mut self.buf[..self.width] {
            *t = 0.0;
        }
    }

    #[inline]
    fn as_slice(&self) -> &[f64] {
        &self.buf[..self.width]
    }
}

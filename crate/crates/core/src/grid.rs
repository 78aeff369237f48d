//! Complex 2D grids, the unitary 2D DFT and the quadrant mirror maps.
//!
//! Storage is row-major with row 0 at the top. The DFT is scaled by
//! `1/sqrt(rows*cols)` in both directions so that it is an isometry.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A position on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn check(&self, rows: usize, cols: usize) -> Result<()> {
        if self.row >= rows || self.col >= cols {
            return Err(Error::OutOfBounds {
                row: self.row,
                col: self.col,
                rows,
                cols,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn flat(&self, cols: usize) -> usize {
        self.row * cols + self.col
    }
}

impl From<(usize, usize)> for GridIndex {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// A rows x cols grid of complex amplitudes.
#[derive(Clone, PartialEq)]
pub struct ComplexField {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexField")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("rms", &self.rms())
            .finish()
    }
}

impl ComplexField {
    /// Builds a field from row-major data, rejecting bad shapes and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{rows}x{cols} grid is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", rows * cols),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn constant(rows: usize, cols: usize, value: C64) -> Self {
        let mut f = Self::zeros(rows, cols);
        f.data.fill(value);
        f
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Internal constructor for buffers produced by our own arithmetic.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, idx: GridIndex) -> Option<C64> {
        (idx.row < self.rows && idx.col < self.cols).then(|| self.data[idx.flat(self.cols)])
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&z| f(z)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    pub fn imag_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.im).collect()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Root mean square of the magnitudes.
    pub fn rms(&self) -> f64 {
        (self.energy() / self.data.len() as f64).sqrt()
    }

    pub fn mean(&self) -> C64 {
        self.data.iter().sum::<C64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                actual: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexField {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexField {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        assert!(r < self.rows && c < self.cols, "index ({r}, {c}) out of bounds");
        &mut self.data[r * self.cols + c]
    }
}

/// Planned unitary 2D FFT for a fixed grid shape.
///
/// Plans are immutable and shareable; each call allocates its own scratch.
#[derive(Clone)]
pub struct Fft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fft2({}x{})", self.rows, self.cols)
    }
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn forward_in_place(&self, data: &mut [C64]) {
        self.transform(data, true);
    }

    pub fn inverse_in_place(&self, data: &mut [C64]) {
        self.transform(data, false);
    }

    pub fn forward(&self, field: &ComplexField) -> ComplexField {
        assert_eq!(field.dims(), (self.rows, self.cols), "FFT plan shape mismatch");
        let mut data = field.data.clone();
        self.transform(&mut data, true);
        ComplexField::from_raw(self.rows, self.cols, data)
    }

    pub fn inverse(&self, field: &ComplexField) -> ComplexField {
        assert_eq!(field.dims(), (self.rows, self.cols), "FFT plan shape mismatch");
        let mut data = field.data.clone();
        self.transform(&mut data, false);
        ComplexField::from_raw(self.rows, self.cols, data)
    }

    fn transform(&self, data: &mut [C64], forward: bool) {
        let (rows, cols) = (self.rows, self.cols);
        assert_eq!(data.len(), rows * cols);
        let (row_plan, col_plan) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        if cols > 1 {
            row_plan.process(data);
        }
        if rows > 1 {
            let mut t = vec![C64::new(0.0, 0.0); rows * cols];
            transpose(data, &mut t, rows, cols);
            col_plan.process(&mut t);
            transpose(&t, data, cols, rows);
        }
        for z in data.iter_mut() {
            *z *= self.scale;
        }
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Unitary forward 2D DFT.
pub fn dft2(field: &ComplexField) -> ComplexField {
    Fft2::new(field.rows, field.cols).forward(field)
}

/// Unitary inverse 2D DFT.
pub fn idft2(field: &ComplexField) -> ComplexField {
    Fft2::new(field.rows, field.cols).inverse(field)
}

/// Signed integer frequency of DFT bin `k` on an axis of length `n`.
#[inline]
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if k > n / 2 {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

/// Reflects an MxN field into a 2Mx2N field without repeating edge samples.
pub fn mirror_extend(field: &ComplexField) -> ComplexField {
    let (m, n) = field.dims();
    ComplexField::from_fn(2 * m, 2 * n, |r, c| {
        let (sr, sc) = mirror_source(r, c, m, n);
        field.data[sr * n + sc]
    })
}

/// Maps a position of the 2Mx2N extension back to its source in the MxN quadrant.
#[inline]
pub fn mirror_source(r: usize, c: usize, m: usize, n: usize) -> (usize, usize) {
    let sr = if r < m { r } else { 2 * m - 1 - r };
    let sc = if c < n { c } else { 2 * n - 1 - c };
    (sr, sc)
}

/// Top-left quadrant of an even-sized field.
pub fn take_quadrant(field: &ComplexField) -> Result<ComplexField> {
    let (rows, cols) = field.dims();
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::Shape(format!(
            "take_quadrant needs even dimensions, got {rows}x{cols}"
        )));
    }
    let (m, n) = (rows / 2, cols / 2);
    Ok(ComplexField::from_fn(m, n, |r, c| field.data[r * cols + c]))
}

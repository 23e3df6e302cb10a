//! Grayscale images, boundary-aware correlation, blockwise DCT and metrics.
//!
//! Intensities live on the nominal `[0, 255]` scale and are never clamped
//! here; clamping and rounding only happen when writing 8-bit files.

mod conv;
mod dct;
mod metrics;

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

pub use conv::{correlate_adjoint, correlate_same, crop, pad, tap_gradient};
pub use dct::{block_dct, block_idct, forward_blocks, inverse_blocks, BLOCK};
pub use metrics::{half_scale, psnr, PSNR_CAP_DB};

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "image must be at least 1x1, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} samples do not fill a {height}x{width} image",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// # Panics
    /// If either side is zero.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image must be at least 1x1");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(height, width);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(y, x);
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn ensure_same_dims(&self, other: &Image) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination; panics on mismatched dimensions.
    pub fn zip_map(&self, other: &Image, mut f: impl FnMut(f64, f64) -> f64) -> Image {
        assert_eq!(self.dims(), other.dims(), "image dimensions differ");
        Image {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Image) {
        assert_eq!(self.dims(), other.dims(), "image dimensions differ");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn dot(&self, other: &Image) -> f64 {
        assert_eq!(self.dims(), other.dims(), "image dimensions differ");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Boundary extension used when a filter window leaves the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Half-sample reflection: the edge pixel is duplicated.
    #[default]
    Symmetric,
    Zero,
    Periodic,
}

impl BoundaryMode {
    /// Source index for a (possibly out of range) coordinate, `None` when the
    /// extension is zero.
    #[inline]
    pub(crate) fn source(self, i: isize, n: usize) -> Option<usize> {
        let n_i = n as isize;
        match self {
            BoundaryMode::Zero => (0..n_i).contains(&i).then_some(i as usize),
            BoundaryMode::Periodic => Some(i.rem_euclid(n_i) as usize),
            BoundaryMode::Symmetric => {
                let j = i.rem_euclid(2 * n_i);
                Some(if j < n_i { j } else { 2 * n_i - 1 - j } as usize)
            }
        }
    }
}

/// Rectangular filter kernel with an explicit anchor.
///
/// Correlation reads `out(y, x) = Σ k[a][b] · u(y + a - anchor_row, x + b - anchor_col)`.
/// Odd kernels are anchored at their center. Even kernels default to the
/// anchor `(rows - 1) / 2`, so `[-1, 1]` is a forward difference.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    anchor_row: usize,
    anchor_col: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        Self::with_anchor(rows, cols, (rows.saturating_sub(1)) / 2, (cols.saturating_sub(1)) / 2, taps)
    }

    pub fn with_anchor(
        rows: usize,
        cols: usize,
        anchor_row: usize,
        anchor_col: usize,
        taps: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || taps.len() != rows * cols {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} taps do not fill a {rows}x{cols} kernel",
                taps.len()
            )));
        }
        if anchor_row >= rows || anchor_col >= cols {
            return Err(Error::InvalidArgument("kernel anchor outside the kernel".into()));
        }
        Ok(Self {
            rows,
            cols,
            anchor_row,
            anchor_col,
            taps,
        })
    }

    pub fn square(m: usize, taps: Vec<f64>) -> Result<Self> {
        Self::new(m, m, taps)
    }

    /// Centered unit impulse of odd size `m`.
    pub fn delta(m: usize) -> Self {
        let mut taps = vec![0.0; m * m];
        taps[(m / 2) * m + m / 2] = 1.0;
        Self::new(m, m, taps).expect("valid delta kernel")
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![0.0; rows * cols]).expect("valid zero kernel")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn anchor(&self) -> (usize, usize) {
        (self.anchor_row, self.anchor_col)
    }

    #[inline]
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.taps[a * self.cols + b]
    }

    /// Kernel reversed along both axes, anchor mirrored with it.
    pub fn rot180(&self) -> Kernel {
        Kernel {
            rows: self.rows,
            cols: self.cols,
            anchor_row: self.rows - 1 - self.anchor_row,
            anchor_col: self.cols - 1 - self.anchor_col,
            taps: self.taps.iter().rev().copied().collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Rows above, rows below, columns left, columns right of the anchor.
    #[inline]
    pub(crate) fn extents(&self) -> (usize, usize, usize, usize) {
        (
            self.anchor_row,
            self.rows - 1 - self.anchor_row,
            self.anchor_col,
            self.cols - 1 - self.anchor_col,
        )
    }
}

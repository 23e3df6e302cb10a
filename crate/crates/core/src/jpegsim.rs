//! Grayscale JPEG quantization simulator and the quantization constraint box.
//!
//! Only the lossy part of JPEG is modelled: orthonormal 8×8 DCT, division
//! by the quantization table and rounding. Entropy coding is lossless and
//! does not affect the constraint set.

use alloc::vec::Vec;

use crate::imgproc::{block_dct, block_idct, crop, Image, BLOCK};
use crate::{Error, Result};

/// ITU-T T.81 Annex K, Table K.1 (luminance), row-major.
pub const BASE_LUMINANCE: [u8; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantTable([u8; 64]);

impl QuantTable {
    pub fn new(entries: [u8; 64]) -> Result<Self> {
        if entries.contains(&0) {
            return Err(Error::InvalidArgument("quantization steps must be ≥ 1".into()));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[u8; 64] {
        &self.0
    }

    /// Step for DCT frequency `(u, v)`.
    #[inline]
    pub fn step(&self, u: usize, v: usize) -> f64 {
        f64::from(self.0[u * BLOCK + v])
    }
}

/// Luminance table for quality `1..=100` with the IJG scaling rule.
pub fn quant_table(quality: u8) -> Result<QuantTable> {
    if !(1..=100).contains(&quality) {
        return Err(Error::InvalidArgument(alloc::format!(
            "JPEG quality must be in 1..=100, got {quality}"
        )));
    }
    let q = u32::from(quality);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u8; 64];
    for (o, &b) in out.iter_mut().zip(&BASE_LUMINANCE) {
        *o = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as u8;
    }
    QuantTable::new(out)
}

/// Per-coefficient bounds of the quantization constraint set `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QBox {
    lower: Image,
    upper: Image,
}

impl QBox {
    pub fn new(lower: Image, upper: Image) -> Result<Self> {
        lower.ensure_same_dims(&upper)?;
        let (h, w) = lower.dims();
        if h % BLOCK != 0 || w % BLOCK != 0 {
            return Err(Error::NotBlockAligned(h, w));
        }
        if lower.data().iter().zip(upper.data()).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument("lower bound above upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &Image {
        &self.lower
    }

    pub fn upper(&self) -> &Image {
        &self.upper
    }

    pub fn dims(&self) -> (usize, usize) {
        self.lower.dims()
    }

    /// Whether every coefficient lies within the box, up to `tol`.
    pub fn contains(&self, coeffs: &Image, tol: f64) -> bool {
        coeffs.dims() == self.dims()
            && coeffs
                .data()
                .iter()
                .zip(self.lower.data().iter().zip(self.upper.data()))
                .all(|(c, (l, u))| *c >= l - tol && *c <= u + tol)
    }

    /// `true` where a coefficient lies strictly inside its interval, i.e.
    /// where the projection has unit derivative. Ties count as clamped.
    pub fn interior_mask(&self, coeffs: &Image) -> Vec<bool> {
        coeffs
            .data()
            .iter()
            .zip(self.lower.data().iter().zip(self.upper.data()))
            .map(|(c, (l, u))| c > l && c < u)
            .collect()
    }
}

/// Orthogonal projection onto the box: elementwise clamping.
pub fn proj_q(coeffs: &Image, qbox: &QBox) -> Result<Image> {
    qbox.lower.ensure_same_dims(coeffs)?;
    let mut out = coeffs.clone();
    for (c, (l, u)) in out
        .data_mut()
        .iter_mut()
        .zip(qbox.lower.data().iter().zip(qbox.upper.data()))
    {
        *c = c.clamp(*l, *u);
    }
    Ok(out)
}

/// Result of simulating JPEG compression of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct JpegObservation {
    /// Decoded image at the original size.
    pub decoded: Image,
    /// Decoded image on the block-aligned grid the box lives on.
    pub decoded_grid: Image,
    pub qbox: QBox,
    /// Quantization indices `d`, one per coefficient of the aligned grid.
    pub indices: Vec<i32>,
}

/// Edge-replicates `img` up to the next multiple of 8 in both directions.
pub fn pad_to_blocks(img: &Image) -> Image {
    let (h, w) = img.dims();
    let ph = h.div_ceil(BLOCK) * BLOCK;
    let pw = w.div_ceil(BLOCK) * BLOCK;
    if (ph, pw) == (h, w) {
        return img.clone();
    }
    Image::from_fn(ph, pw, |y, x| img.get(y.min(h - 1), x.min(w - 1)))
}

/// Quantization indices `round(c / step)` of a block-aligned image.
pub fn quantize(img: &Image, table: &QuantTable) -> Result<Vec<i32>> {
    let coeffs = block_dct(img)?;
    let w = coeffs.width();
    Ok(coeffs
        .data()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (y, x) = (i / w, i % w);
            libm::round(c / table.step(y % BLOCK, x % BLOCK)) as i32
        })
        .collect())
}

pub fn jpeg_degrade(img: &Image, quality: u8) -> Result<JpegObservation> {
    let table = quant_table(quality)?;
    let grid = pad_to_blocks(img);
    let indices = quantize(&grid, &table)?;
    let (h, w) = grid.dims();
    let step = |i: usize| table.step((i / w) % BLOCK, (i % w) % BLOCK);
    let coeffs = |offset: f64| {
        let data = indices
            .iter()
            .enumerate()
            .map(|(i, &d)| (f64::from(d) + offset) * step(i))
            .collect();
        Image::new(h, w, data)
    };
    let decoded_grid = block_idct(&coeffs(0.0)?)?;
    let qbox = QBox::new(coeffs(-0.5)?, coeffs(0.5)?)?;
    let decoded = crop(&decoded_grid, 0, 0, img.height(), img.width())?;
    Ok(JpegObservation {
        decoded,
        decoded_grid,
        qbox,
        indices,
    })
}

//! Orthonormal 8×8 block DCT-II with the JPEG level shift.

use super::Image;
use crate::{Error, Result};

pub const BLOCK: usize = 8;
const LEVEL_SHIFT: f64 = 128.0;

/// `basis[k][n] = c_k cos(π (2n + 1) k / 16)`, orthonormal rows.
fn dct_matrix() -> [[f64; BLOCK]; BLOCK] {
    let mut m = [[0.0; BLOCK]; BLOCK];
    let n = BLOCK as f64;
    for (k, row) in m.iter_mut().enumerate() {
        let scale = if k == 0 {
            libm::sqrt(1.0 / n)
        } else {
            libm::sqrt(2.0 / n)
        };
        for (i, v) in row.iter_mut().enumerate() {
            *v = scale * libm::cos(core::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n));
        }
    }
    m
}

fn check_aligned(img: &Image) -> Result<()> {
    let (h, w) = img.dims();
    if h % BLOCK != 0 || w % BLOCK != 0 {
        return Err(Error::NotBlockAligned(h, w));
    }
    Ok(())
}

fn transform(img: &Image, inverse: bool) -> Result<Image> {
    check_aligned(img)?;
    let c = dct_matrix();
    let w = img.width();
    let mut out = img.clone();
    let data = out.data_mut();
    let mut block = [[0.0; BLOCK]; BLOCK];
    let mut tmp = [[0.0; BLOCK]; BLOCK];
    for by in (0..img.height()).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            for (r, row) in block.iter_mut().enumerate() {
                row.copy_from_slice(&img.data()[(by + r) * w + bx..(by + r) * w + bx + BLOCK]);
            }
            // forward: C B Cᵀ, inverse: Cᵀ B C
            for i in 0..BLOCK {
                for j in 0..BLOCK {
                    let mut acc = 0.0;
                    for k in 0..BLOCK {
                        let a = if inverse { c[k][i] } else { c[i][k] };
                        acc += a * block[k][j];
                    }
                    tmp[i][j] = acc;
                }
            }
            for i in 0..BLOCK {
                for j in 0..BLOCK {
                    let mut acc = 0.0;
                    for k in 0..BLOCK {
                        let a = if inverse { c[k][j] } else { c[j][k] };
                        acc += tmp[i][k] * a;
                    }
                    data[(by + i) * w + bx + j] = acc;
                }
            }
        }
    }
    Ok(out)
}

/// Blockwise orthonormal DCT without level shift (the linear map `D`).
pub fn forward_blocks(img: &Image) -> Result<Image> {
    transform(img, false)
}

/// Blockwise inverse DCT without level shift (`Dᵀ = D⁻¹`).
pub fn inverse_blocks(coeffs: &Image) -> Result<Image> {
    transform(coeffs, true)
}

/// Per 8×8 block DCT of `img - 128`; coefficient `(u, v)` of a block is
/// stored at the block's pixel `(u, v)`.
pub fn block_dct(img: &Image) -> Result<Image> {
    check_aligned(img)?;
    forward_blocks(&img.map(|v| v - LEVEL_SHIFT))
}

/// Inverse of [`block_dct`], including the `+128` unshift.
pub fn block_idct(coeffs: &Image) -> Result<Image> {
    Ok(inverse_blocks(coeffs)?.map(|v| v + LEVEL_SHIFT))
}

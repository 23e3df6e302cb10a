use alloc::vec;
use alloc::vec::Vec;

use super::{BoundaryMode, Image, Kernel};
use crate::{Error, Result};

/// Extends `img` by `margin` pixels on every side.
///
/// Margins wider than the smallest image side are rejected: repeated
/// reflection is well defined but rarely what a caller means.
pub fn pad(img: &Image, margin: usize, mode: BoundaryMode) -> Result<Image> {
    let side = img.height().min(img.width());
    if margin > side {
        return Err(Error::MarginTooLarge { margin, side });
    }
    let (h, w, data) = extend(img, margin, margin, margin, margin, mode);
    Image::new(h, w, data)
}

/// Crops an `h × w` window starting at `(top, left)`.
pub fn crop(img: &Image, top: usize, left: usize, h: usize, w: usize) -> Result<Image> {
    if top + h > img.height() || left + w > img.width() {
        return Err(Error::InvalidArgument(alloc::format!(
            "crop {h}x{w}+{top}+{left} exceeds {}x{}",
            img.height(),
            img.width()
        )));
    }
    let mut data = Vec::with_capacity(h * w);
    for y in top..top + h {
        data.extend_from_slice(&img.row(y)[left..left + w]);
    }
    Image::new(h, w, data)
}

fn extend(
    img: &Image,
    top: usize,
    bottom: usize,
    left: usize,
    right: usize,
    mode: BoundaryMode,
) -> (usize, usize, Vec<f64>) {
    let (h, w) = img.dims();
    let ph = h + top + bottom;
    let pw = w + left + right;
    let cols: Vec<Option<usize>> = (0..pw)
        .map(|px| mode.source(px as isize - left as isize, w))
        .collect();
    let mut out = vec![0.0; ph * pw];
    for py in 0..ph {
        let Some(sy) = mode.source(py as isize - top as isize, h) else {
            continue;
        };
        let src = img.row(sy);
        let dst = &mut out[py * pw..(py + 1) * pw];
        dst[left..left + w].copy_from_slice(src);
        for px in (0..left).chain(left + w..pw) {
            if let Some(sx) = cols[px] {
                dst[px] = src[sx];
            }
        }
    }
    (ph, pw, out)
}

/// Same-size cross-correlation of the boundary-extended image with `k`.
pub fn correlate_same(img: &Image, k: &Kernel, mode: BoundaryMode) -> Image {
    let (h, w) = img.dims();
    let (top, bottom, left, right) = k.extents();
    let (_, pw, padded) = extend(img, top, bottom, left, right, mode);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let dst = &mut out[y * w..(y + 1) * w];
        for a in 0..k.rows() {
            let prow = &padded[(y + a) * pw..(y + a + 1) * pw];
            for b in 0..k.cols() {
                let t = k.get(a, b);
                if t == 0.0 {
                    continue;
                }
                for (d, &s) in dst.iter_mut().zip(&prow[b..b + w]) {
                    *d += t * s;
                }
            }
        }
    }
    Image::new(h, w, out).expect("shape preserved")
}

/// Exact adjoint of `u ↦ correlate_same(u, k, mode)` applied to `g`.
///
/// Under the zero mode this equals `correlate_same(g, k.rot180(), Zero)`;
/// under the other modes it also folds the boundary extension back.
pub fn correlate_adjoint(g: &Image, k: &Kernel, mode: BoundaryMode) -> Image {
    let (h, w) = g.dims();
    let (top, bottom, left, right) = k.extents();
    let ph = h + top + bottom;
    let pw = w + left + right;
    let mut padded = vec![0.0; ph * pw];
    for y in 0..h {
        let src = g.row(y);
        for a in 0..k.rows() {
            let prow = &mut padded[(y + a) * pw..(y + a + 1) * pw];
            for b in 0..k.cols() {
                let t = k.get(a, b);
                if t == 0.0 {
                    continue;
                }
                for (d, &s) in prow[b..b + w].iter_mut().zip(src) {
                    *d += t * s;
                }
            }
        }
    }

    let mut out = Image::zeros(h, w);
    let cols: Vec<Option<usize>> = (0..pw)
        .map(|px| mode.source(px as isize - left as isize, w))
        .collect();
    let data = out.data_mut();
    for py in 0..ph {
        let Some(sy) = mode.source(py as isize - top as isize, h) else {
            continue;
        };
        let prow = &padded[py * pw..(py + 1) * pw];
        let dst = &mut data[sy * w..(sy + 1) * w];
        for (d, &s) in dst.iter_mut().zip(&prow[left..left + w]) {
            *d += s;
        }
        for px in (0..left).chain(left + w..pw) {
            if let Some(sx) = cols[px] {
                dst[sx] += prow[px];
            }
        }
    }
    out
}

/// Gradient of `⟨correlate_same(img, k, mode), g⟩` with respect to the taps
/// of `k`, laid out like `k.taps()`.
pub fn tap_gradient(img: &Image, g: &Image, k: &Kernel, mode: BoundaryMode) -> Vec<f64> {
    let (h, w) = img.dims();
    assert_eq!(img.dims(), g.dims(), "image dimensions differ");
    let (top, bottom, left, right) = k.extents();
    let (_, pw, padded) = extend(img, top, bottom, left, right, mode);
    let mut grad = vec![0.0; k.rows() * k.cols()];
    for a in 0..k.rows() {
        for b in 0..k.cols() {
            let mut acc = 0.0;
            for y in 0..h {
                let prow = &padded[(y + a) * pw + b..(y + a) * pw + b + w];
                acc += prow.iter().zip(g.row(y)).map(|(p, q)| p * q).sum::<f64>();
            }
            grad[a * k.cols() + b] = acc;
        }
    }
    grad
}

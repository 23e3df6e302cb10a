use super::Image;
use crate::Result;

/// Ceiling reported for (near-)identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Peak signal-to-noise ratio on the 255 scale over the full frame.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    let rmse = libm::sqrt(mse);
    if rmse < 255.0 * libm::pow(10.0, -PSNR_CAP_DB / 20.0) {
        return Ok(PSNR_CAP_DB);
    }
    Ok(20.0 * libm::log10(255.0 / rmse))
}

/// Downscales by two with 2×2 box averaging (odd trailing row/column dropped).
pub fn half_scale(img: &Image) -> Image {
    let h = (img.height() / 2).max(1);
    let w = (img.width() / 2).max(1);
    Image::from_fn(h, w, |y, x| {
        let y0 = (2 * y).min(img.height() - 1);
        let y1 = (2 * y + 1).min(img.height() - 1);
        let x0 = (2 * x).min(img.width() - 1);
        let x1 = (2 * x + 1).min(img.width() - 1);
        0.25 * (img.get(y0, x0) + img.get(y0, x1) + img.get(y1, x0) + img.get(y1, x1))
    })
}

//! Binary (P5) and plain (P2) graymaps with maxval 255.

use std::fs;
use std::path::Path;

use thiserror::Error;
use trd_core::Image;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed PGM: {0}")]
    Malformed(String),
    #[error("unsupported PGM maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u64),
    #[error("image contains non-finite values")]
    NonFinite,
}

struct Header {
    plain: bool,
    width: usize,
    height: usize,
    data_start: usize,
}

/// Skips whitespace and `#` comments, then reads one unsigned decimal token.
fn token(bytes: &[u8], pos: &mut usize) -> Result<u64, PgmError> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    *pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(PgmError::Malformed("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(PgmError::Malformed(format!("expected a number at byte {start}")));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PgmError::Malformed("number out of range".into()))
}

fn header(bytes: &[u8]) -> Result<Header, PgmError> {
    let plain = match bytes.get(..2) {
        Some(b"P5") => false,
        Some(b"P2") => true,
        _ => return Err(PgmError::Malformed("missing P5/P2 magic".into())),
    };
    let mut pos = 2;
    let width = token(bytes, &mut pos)? as usize;
    let height = token(bytes, &mut pos)? as usize;
    let maxval = token(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(PgmError::Malformed(format!("empty image {width}x{height}")));
    }
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from binary samples
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ if plain => {}
        _ => return Err(PgmError::Malformed("missing whitespace after maxval".into())),
    }
    Ok(Header {
        plain,
        width,
        height,
        data_start: pos,
    })
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Image, PgmError> {
    let h = header(bytes)?;
    let n = h.width * h.height;
    let data: Vec<f64> = if h.plain {
        let mut pos = h.data_start;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let v = token(bytes, &mut pos).map_err(|_| PgmError::Malformed("truncated sample data".into()))?;
            if v > 255 {
                return Err(PgmError::Malformed(format!("sample {v} exceeds maxval")));
            }
            out.push(v as f64);
        }
        out
    } else {
        let raw = &bytes[h.data_start..];
        if raw.len() < n {
            return Err(PgmError::Malformed(format!("expected {n} samples, found {}", raw.len())));
        }
        raw[..n].iter().map(|&b| f64::from(b)).collect()
    };
    Image::new(h.height, h.width, data).map_err(|e| PgmError::Malformed(e.to_string()))
}

/// Clamps to `[0, 255]` and rounds half away from zero.
pub fn quantize(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

/// Canonical binary encoding: `P5\n<w> <h>\n255\n` followed by the samples.
pub fn encode_pgm(img: &Image) -> Result<Vec<u8>, PgmError> {
    if img.data().iter().any(|v| !v.is_finite()) {
        return Err(PgmError::NonFinite);
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image, PgmError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| PgmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_pgm(&bytes)
}

pub fn save_pgm(img: &Image, path: impl AsRef<Path>) -> Result<(), PgmError> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)?).map_err(|source| PgmError::Io {
        path: path.display().to_string(),
        source,
    })
}

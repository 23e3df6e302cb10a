//! Image directories, patch sampling and synthetic degradation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use trd_core::imgproc::{crop, BLOCK};
use trd_core::jpegsim::jpeg_degrade;
use trd_core::model::Task;
use trd_core::training::{add_noise, TrainSample};
use trd_core::Image;

use crate::CliError;
use crate::pgm::load_pgm;

/// A named clean image.
#[derive(Debug, Clone, PartialEq)]
pub struct Named {
    pub name: String,
    pub image: Image,
}

/// All `.pgm` files of `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<Named>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("{}: no .pgm images found", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let image = load_pgm(&p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Named { name, image })
        })
        .collect()
}

/// `count` square patches of side `size`, cycling through `images`, at
/// positions drawn from ChaCha20 seeded with `seed`.
pub fn sample_patches(images: &[Named], size: usize, count: usize, seed: u64) -> Result<Vec<Named>, CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let src = &images[k % images.len()];
            let (h, w) = src.image.dims();
            if h < size || w < size {
                return Err(CliError::Data(format!("{} ({w}x{h}) is smaller than a {size}x{size} patch", src.name)));
            }
            let top = rng.random_range(0..=h - size);
            let left = rng.random_range(0..=w - size);
            let image = crop(&src.image, top, left, size, size)?;
            Ok(Named {
                name: format!("{}@{top},{left}", src.name),
                image,
            })
        })
        .collect()
}

/// Per-image noise seeds derived from one run seed.
pub fn noise_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Largest top-left crop whose sides are multiples of the JPEG block.
pub fn block_aligned(img: &Image) -> Result<Image, CliError> {
    let (h, w) = img.dims();
    let (bh, bw) = (h / BLOCK * BLOCK, w / BLOCK * BLOCK);
    if bh == 0 || bw == 0 {
        return Err(CliError::Data(format!("image {w}x{h} is smaller than one 8x8 block")));
    }
    Ok(crop(img, 0, 0, bh, bw)?)
}

/// Degrades every clean image for `task`. Denoising samples get noise from
/// [`noise_seeds`]; deblocking samples are cropped to the block grid.
pub fn make_samples(clean: &[Named], task: Task, seed: u64) -> Result<Vec<TrainSample>, CliError> {
    let seeds = noise_seeds(seed, clean.len());
    clean
        .iter()
        .zip(seeds)
        .map(|(c, s)| match task {
            Task::Denoise { sigma } => {
                let noisy = add_noise(&c.image, sigma, s)?;
                Ok(TrainSample::denoise(noisy, c.image.clone())?)
            }
            Task::Deblock { quality } => {
                let target = block_aligned(&c.image)?;
                let obs = jpeg_degrade(&target, quality)?;
                Ok(TrainSample::deblock(obs.decoded_grid, target, obs.qbox)?)
            }
        })
        .collect()
}

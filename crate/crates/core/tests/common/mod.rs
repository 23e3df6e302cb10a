#![allow(dead_code)]

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use trd_core::influence::{RbfConfig, RbfKind, RbfMixture};
use trd_core::jpegsim::jpeg_degrade;
use trd_core::model::{init_model, ModelConfig, Task, TrdModel};
use trd_core::training::{add_noise, TrainSample};
use trd_core::imgproc::correlate_same;
use trd_core::{BoundaryMode, Image};

pub const GAMMA_SCALE: f64 = 3.0;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    Uniform::new(lo, hi).unwrap().sample(rng)
}

/// A smooth-ish random scene on the 0..255 scale.
pub fn scene(rng: &mut ChaCha20Rng, h: usize, w: usize) -> Image {
    let (a, b, c) = (uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.0, 6.0));
    let base = uniform(rng, 60.0, 190.0);
    let amp = uniform(rng, 20.0, 60.0);
    let edge = uniform(rng, 1.0, w as f64 - 1.0);
    Image::from_fn(h, w, |y, x| {
        let s = base + amp * ((a * y as f64 + b * x as f64 + c).sin());
        let step = if (x as f64) < edge + 0.3 * y as f64 { 0.0 } else { 40.0 };
        s + step + 8.0 * normal(rng)
    })
}

pub fn rbf(kind: RbfKind) -> RbfConfig {
    RbfConfig::new(kind, 15, 200.0).unwrap()
}

/// Rebuilds the model's RBF grid so its outermost centers sit at the
/// `quantile` of first-stage filter response magnitudes on `samples`; every
/// atom then sees data.
pub fn cover_responses(model: &mut TrdModel, samples: &[TrainSample], quantile: f64) {
    let basis = model.basis().unwrap();
    let mut mags = Vec::new();
    for c in &model.stages[0].coeffs {
        let k = basis.assemble_filter(c).unwrap();
        for s in samples {
            let v = correlate_same(&s.input, &k, BoundaryMode::Symmetric);
            mags.extend(v.data().iter().map(|x| x.abs()));
        }
    }
    mags.sort_by(f64::total_cmp);
    let radius = mags[((mags.len() - 1) as f64 * quantile) as usize];
    let count = model.rbf.count();
    let cfg = RbfConfig::with_gamma(model.rbf.kind(), count, radius, GAMMA_SCALE * 2.0 * radius / (count - 1) as f64).unwrap();
    model.rbf = cfg;
    for stage in &mut model.stages {
        for m in &mut stage.mixtures {
            *m = RbfMixture::new(cfg, m.weights().to_vec()).unwrap();
        }
    }
    model.validate().unwrap();
}

/// A model with every parameter randomly perturbed away from plain init.
pub fn random_model(rng: &mut ChaCha20Rng, task: Task, stages: usize, filters: usize, kind: RbfKind) -> TrdModel {
    let config = ModelConfig {
        task,
        stages,
        filter_size: 3,
        filters,
        rbf: rbf(kind),
    };
    let mut model = init_model(&config).unwrap();
    for stage in &mut model.stages {
        for c in &mut stage.coeffs {
            c.iter_mut().for_each(|v| *v += 0.3 * normal(rng));
        }
        for m in &mut stage.mixtures {
            let w: Vec<f64> = m.weights().iter().map(|w| w + 2.0 * normal(rng)).collect();
            *m = RbfMixture::new(*m.config(), w).unwrap();
        }
        if let Some(l) = stage.log_lambda.as_mut() {
            *l += 0.5 * normal(rng);
        }
    }
    model
}

pub fn denoise_samples(rng: &mut ChaCha20Rng, n: usize, size: usize) -> Vec<TrainSample> {
    (0..n)
        .map(|_| {
            let clean = scene(rng, size, size);
            let seed = rng_u64(rng);
            let noisy = add_noise(&clean, 25.0, seed).unwrap();
            TrainSample::denoise(noisy, clean).unwrap()
        })
        .collect()
}

pub fn deblock_samples(rng: &mut ChaCha20Rng, n: usize, size: usize, quality: u8) -> Vec<TrainSample> {
    (0..n)
        .map(|_| {
            let clean = scene(rng, size, size);
            let obs = jpeg_degrade(&clean, quality).unwrap();
            TrainSample::deblock(obs.decoded_grid, clean, obs.qbox).unwrap()
        })
        .collect()
}

pub fn rng_u64(rng: &mut ChaCha20Rng) -> u64 {
    use rand_chacha::rand_core::RngCore;
    rng.next_u64()
}

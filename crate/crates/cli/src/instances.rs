//! Random small training problems for gradient certification.
//!
//! Instances are 16×16 scenes with two 3×3 filters and 15 Gaussian RBFs.
//! The RBF grid is fitted to the first-stage filter responses (outer
//! centers at the 90% quantile, `γ` three times the spacing) so that every
//! parameter has a gradient well above finite-difference noise.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use trd_core::imgproc::correlate_same;
use trd_core::influence::{RbfConfig, RbfKind, RbfMixture};
use trd_core::jpegsim::jpeg_degrade;
use trd_core::model::{init_model, ModelConfig, Task, TrdModel};
use trd_core::training::{
    add_noise, grad_check, GradCheckReport, JointObjective, ParamGroups, StageObjective, TrainSample,
};
use trd_core::{BoundaryMode, Image};

pub const SIDE: usize = 16;
pub const RBF_COUNT: usize = 15;
pub const FILTERS: usize = 2;
pub const COVER_QUANTILE: f64 = 0.9;
pub const GAMMA_SCALE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    DenoiseStage,
    DeblockStage,
    /// All parameters of a 3-stage denoising model.
    JointDenoise,
    /// All parameters of a 2-stage deblocking model.
    JointDeblock,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::DenoiseStage => "denoise-stage",
            Problem::DeblockStage => "deblock-stage",
            Problem::JointDenoise => "joint-denoise",
            Problem::JointDeblock => "joint-deblock",
        }
    }

    fn deblock(self) -> bool {
        matches!(self, Problem::DeblockStage | Problem::JointDeblock)
    }

    fn stages(self) -> usize {
        match self {
            Problem::DenoiseStage | Problem::DeblockStage => 1,
            Problem::JointDenoise => 3,
            Problem::JointDeblock => 2,
        }
    }
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Sinusoid plus a slanted step plus mild noise, on the 0..255 scale.
pub fn scene(rng: &mut ChaCha20Rng, h: usize, w: usize) -> Image {
    let a = rng.random_range(0.1..0.9);
    let b = rng.random_range(0.1..0.9);
    let c = rng.random_range(0.0..6.0);
    let base = rng.random_range(60.0..190.0);
    let amp = rng.random_range(20.0..60.0);
    let edge = rng.random_range(1.0..w as f64 - 1.0);
    Image::from_fn(h, w, |y, x| {
        let s: f64 = base + amp * (a * y as f64 + b * x as f64 + c).sin();
        let step = if (x as f64) < edge + 0.3 * y as f64 { 0.0 } else { 40.0 };
        s + step + 8.0 * normal(rng)
    })
}

fn sample(rng: &mut ChaCha20Rng, deblock: bool) -> TrainSample {
    let clean = scene(rng, SIDE, SIDE);
    if deblock {
        let obs = jpeg_degrade(&clean, 10).expect("valid quality");
        TrainSample::deblock(obs.decoded_grid, clean, obs.qbox).expect("aligned scene")
    } else {
        let noisy = add_noise(&clean, 25.0, rng.next_u64()).expect("valid sigma");
        TrainSample::denoise(noisy, clean).expect("same dims")
    }
}

/// Plain init with every coefficient, weight and `log λ` perturbed.
fn perturbed_model(rng: &mut ChaCha20Rng, task: Task, stages: usize) -> TrdModel {
    let config = ModelConfig {
        task,
        stages,
        filter_size: 3,
        filters: FILTERS,
        rbf: RbfConfig::new(RbfKind::Gaussian, RBF_COUNT, 200.0).expect("valid RBF config"),
    };
    let mut model = init_model(&config).expect("valid model config");
    for stage in &mut model.stages {
        for c in &mut stage.coeffs {
            c.iter_mut().for_each(|v| *v += 0.3 * normal(rng));
        }
        for m in &mut stage.mixtures {
            let w = m.weights().iter().map(|w| w + 2.0 * normal(rng)).collect();
            *m = RbfMixture::new(*m.config(), w).expect("finite weights");
        }
        if let Some(l) = stage.log_lambda.as_mut() {
            *l += 0.5 * normal(rng);
        }
    }
    model
}

/// Moves the RBF grid onto the observed first-stage response range.
fn cover_responses(model: &mut TrdModel, samples: &[TrainSample]) {
    let basis = model.basis().expect("supported size");
    let mut mags = Vec::new();
    for c in &model.stages[0].coeffs {
        let k = basis.assemble_filter(c).expect("coefficient count");
        for s in samples {
            let v = correlate_same(&s.input, &k, BoundaryMode::Symmetric);
            mags.extend(v.data().iter().map(|x| x.abs()));
        }
    }
    mags.sort_by(f64::total_cmp);
    let radius = mags[((mags.len() - 1) as f64 * COVER_QUANTILE) as usize].max(1.0);
    let gamma = GAMMA_SCALE * 2.0 * radius / (RBF_COUNT - 1) as f64;
    let cfg = RbfConfig::with_gamma(model.rbf.kind(), RBF_COUNT, radius, gamma).expect("positive radius");
    model.rbf = cfg;
    for stage in &mut model.stages {
        for m in &mut stage.mixtures {
            *m = RbfMixture::new(cfg, m.weights().to_vec()).expect("same count");
        }
    }
}

/// One random instance: a model and a single training sample.
pub fn instance(problem: Problem, seed: u64) -> (TrdModel, Vec<TrainSample>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let samples = vec![sample(&mut rng, problem.deblock())];
    let task = if problem.deblock() {
        Task::Deblock { quality: 10 }
    } else {
        Task::Denoise { sigma: 25.0 }
    };
    let mut model = perturbed_model(&mut rng, task, problem.stages());
    cover_responses(&mut model, &samples);
    (model, samples)
}

/// Runs [`grad_check`] on the instance drawn from `seed`.
pub fn check(problem: Problem, seed: u64, h: f64) -> trd_core::Result<GradCheckReport> {
    let (model, samples) = instance(problem, seed);
    let mode = BoundaryMode::Symmetric;
    match problem {
        Problem::DenoiseStage | Problem::DeblockStage => {
            let inputs = samples.iter().map(|s| s.input.clone()).collect();
            let obj = StageObjective::new(&samples, inputs, model.stages[0].clone(), &model, ParamGroups::ALL, mode)?;
            grad_check(&obj, &obj.initial_point(), h, None)
        }
        Problem::JointDenoise | Problem::JointDeblock => {
            let obj = JointObjective::new(&samples, model, ParamGroups::ALL, mode)?;
            grad_check(&obj, &obj.initial_point(), h, None)
        }
    }
}

//! Forward diffusion: the Perona-Malik baseline step, TRD stages and
//! multi-stage inference.
//!
//! With `Δt = 1` a denoising stage computes
//! `u_t = u_{t-1} - (Σ_i k̄_i ⋆ φ_i(k_i ⋆ u_{t-1}) + λ (u_{t-1} - f))`
//! and a deblocking stage computes
//! `u_t = Dᵀ proj_Q(D (u_{t-1} - Σ_i k̄_i ⋆ φ_i(k_i ⋆ u_{t-1})))`,
//! where `⋆` is boundary-extended correlation and `k̄_i` the 180° rotation.

use alloc::vec::Vec;

use crate::imgproc::{block_dct, block_idct, correlate_same, crop, BoundaryMode, Image, Kernel};
use crate::influence::RbfMixture;
use crate::jpegsim::{pad_to_blocks, proj_q, QBox};
use crate::model::{Task, TrdModel};
use crate::{par, Error, Result};

/// One stage with assembled filters, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    filters: Vec<Kernel>,
    flipped: Vec<Kernel>,
    mixtures: Vec<RbfMixture>,
    lambda: Option<f64>,
}

impl Stage {
    pub fn new(filters: Vec<Kernel>, mixtures: Vec<RbfMixture>, lambda: Option<f64>) -> Result<Self> {
        if filters.len() != mixtures.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} filters but {} influence functions",
                filters.len(),
                mixtures.len()
            )));
        }
        let flipped = filters.iter().map(Kernel::rot180).collect();
        Ok(Self {
            filters,
            flipped,
            mixtures,
            lambda,
        })
    }

    pub fn filters(&self) -> &[Kernel] {
        &self.filters
    }

    pub fn flipped(&self) -> &[Kernel] {
        &self.flipped
    }

    pub fn mixtures(&self) -> &[RbfMixture] {
        &self.mixtures
    }

    /// Reaction weight; absent means zero.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// `Σ_i k̄_i ⋆ φ_i(k_i ⋆ u)`, summed in filter order.
    pub fn diffusion_term(&self, u: &Image, mode: BoundaryMode) -> Image {
        let parts = par::map_range(self.filters.len(), |i| {
            let response = correlate_same(u, &self.filters[i], mode);
            correlate_same(&self.mixtures[i].apply(&response), &self.flipped[i], mode)
        });
        let mut total = Image::zeros(u.height(), u.width());
        for p in &parts {
            total.add_scaled(1.0, p);
        }
        total
    }
}

/// Explicit Perona-Malik step with `φ(z) = z / (1 + z²)` on forward
/// differences and symmetric boundaries.
pub fn pm_step(u: &Image, dt: f64) -> Result<Image> {
    pm_step_with_mode(u, dt, BoundaryMode::Symmetric)
}

pub fn pm_step_with_mode(u: &Image, dt: f64, mode: BoundaryMode) -> Result<Image> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidArgument(alloc::format!("time step must be positive, got {dt}")));
    }
    let kx = Kernel::new(1, 2, alloc::vec![-1.0, 1.0])?;
    let ky = Kernel::new(2, 1, alloc::vec![-1.0, 1.0])?;
    let mut out = u.clone();
    for k in [kx, ky] {
        let flux = correlate_same(u, &k, mode).map(|z| z / (1.0 + z * z));
        out.add_scaled(-dt, &correlate_same(&flux, &k.rot180(), mode));
    }
    Ok(out)
}

pub fn denoise_stage(u_prev: &Image, f_n: &Image, stage: &Stage, mode: BoundaryMode) -> Result<Image> {
    u_prev.ensure_same_dims(f_n)?;
    let mut out = u_prev.clone();
    out.add_scaled(-1.0, &stage.diffusion_term(u_prev, mode));
    if let Some(lambda) = stage.lambda {
        for ((o, &u), &f) in out.data_mut().iter_mut().zip(u_prev.data()).zip(f_n.data()) {
            *o -= lambda * (u - f);
        }
    }
    Ok(out)
}

pub fn deblock_stage(u_prev: &Image, qbox: &QBox, stage: &Stage, mode: BoundaryMode) -> Result<Image> {
    qbox.lower().ensure_same_dims(u_prev)?;
    let mut v = u_prev.clone();
    v.add_scaled(-1.0, &stage.diffusion_term(u_prev, mode));
    block_idct(&proj_q(&block_dct(&v)?, qbox)?)
}

/// Side information a model needs besides its input.
#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    /// Gaussian denoising: the input itself is the noisy observation `f`.
    Noisy,
    /// Deblocking: the quantization box of the compressed image.
    Jpeg(&'a QBox),
}

/// Intermediate images `u_0 ..= u_T` of one inference run.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub outputs: Vec<Image>,
}

/// Runs all stages of `model` on `input`.
pub fn infer(
    model: &TrdModel,
    input: &Image,
    obs: Observation<'_>,
    keep_trace: bool,
) -> Result<(Image, Option<StageTrace>)> {
    infer_stages(model, input, obs, model.num_stages(), keep_trace)
}

/// Runs the first `count` stages of `model` on `input`.
pub fn infer_stages(
    model: &TrdModel,
    input: &Image,
    obs: Observation<'_>,
    count: usize,
    keep_trace: bool,
) -> Result<(Image, Option<StageTrace>)> {
    if count > model.num_stages() {
        return Err(Error::InvalidArgument(alloc::format!(
            "model has {} stages, {count} requested",
            model.num_stages()
        )));
    }
    let stages = model.realize_stages()?;
    let stages = &stages[..count];
    let mode = BoundaryMode::Symmetric;
    let mut trace = keep_trace.then(Vec::new);
    match (model.task, obs) {
        (Task::Denoise { .. }, Observation::Noisy) => {
            let mut u = input.clone();
            for stage in stages {
                let next = denoise_stage(&u, input, stage, mode)?;
                if let Some(t) = trace.as_mut() {
                    t.push(core::mem::replace(&mut u, next));
                } else {
                    u = next;
                }
            }
            if let Some(t) = trace.as_mut() {
                t.push(u.clone());
            }
            Ok((u, trace.map(|outputs| StageTrace { outputs })))
        }
        (Task::Deblock { .. }, Observation::Jpeg(qbox)) => {
            let mut u = if input.dims() == qbox.dims() {
                input.clone()
            } else {
                let grid = pad_to_blocks(input);
                grid.ensure_same_dims(qbox.lower())?;
                grid
            };
            for stage in stages {
                let next = deblock_stage(&u, qbox, stage, mode)?;
                if let Some(t) = trace.as_mut() {
                    t.push(core::mem::replace(&mut u, next));
                } else {
                    u = next;
                }
            }
            if let Some(t) = trace.as_mut() {
                t.push(u.clone());
            }
            let out = crop(&u, 0, 0, input.height(), input.width())?;
            Ok((out, trace.map(|outputs| StageTrace { outputs })))
        }
        (Task::Denoise { .. }, Observation::Jpeg(_)) => {
            Err(Error::TaskMismatch("denoising model given a JPEG constraint box".into()))
        }
        (Task::Deblock { .. }, Observation::Noisy) => {
            Err(Error::TaskMismatch("deblocking model needs a JPEG constraint box".into()))
        }
    }
}

//! Greedy stage-by-stage and joint training.

use alloc::vec::Vec;

use super::lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsResult, LbfgsStatus};
use super::objective::{JointObjective, Objective, StageObjective};
use super::params::ParamGroups;
use super::TrainSample;
use crate::diffusion::{deblock_stage, denoise_stage};
use crate::imgproc::BoundaryMode;
use crate::model::{init_model, ModelConfig, TrainedMode, TrdModel};
use crate::{par, Error, Result};

pub const WARM_START_NOTE: &str =
    "greedy: stage 1 starts from plain init, stage t > 1 from the trained parameters of stage t-1";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainConfig {
    pub lbfgs: LbfgsConfig,
    pub groups: ParamGroups,
    pub boundary: BoundaryMode,
}

/// Outcome of one L-BFGS run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimReport {
    /// Cost at the start and after every iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
    pub grad_norm: f64,
}

impl OptimReport {
    fn from_result(r: &LbfgsResult) -> Self {
        Self {
            history: r.history.clone(),
            iterations: r.iterations,
            evaluations: r.evaluations,
            status: r.status,
            grad_norm: r.grad_norm,
        }
    }

    pub fn final_cost(&self) -> f64 {
        *self.history.last().expect("history starts with the initial cost")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub stages: Vec<OptimReport>,
}

fn minimize<O: Objective>(objective: &O, x0: &[f64], cfg: &LbfgsConfig, what: &str) -> Result<LbfgsResult> {
    // surface structural errors before the optimizer can mask them
    let (f0, _) = objective.value_grad(x0)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite(alloc::format!("{what}: initial cost is {f0}")));
    }
    let n = objective.dim();
    let result = lbfgs_minimize(
        |x| match objective.value_grad(x) {
            Ok(v) => v,
            Err(_) => (f64::INFINITY, alloc::vec![0.0; n]),
        },
        x0,
        cfg,
    )?;
    if !result.f.is_finite() {
        return Err(Error::NonFinite(alloc::format!("{what}: cost became {}", result.f)));
    }
    Ok(result)
}

/// Trains the stages of a fresh model one after another, each against the
/// loss of its own output with earlier stages frozen.
pub fn greedy_train(samples: &[TrainSample], config: &ModelConfig, cfg: &TrainConfig) -> Result<(TrdModel, TrainReport)> {
    let mut model = init_model(config)?;
    check_samples(samples, &model)?;
    let basis = model.basis()?;
    let mut inputs: Vec<_> = samples.iter().map(|s| s.input.clone()).collect();
    let mut reports = Vec::with_capacity(config.stages);
    for t in 0..config.stages {
        let template = if t == 0 {
            model.stages[0].clone()
        } else {
            model.stages[t - 1].clone()
        };
        let objective = StageObjective::new(samples, inputs.clone(), template, &model, cfg.groups, cfg.boundary)?;
        let result = minimize(
            &objective,
            &objective.initial_point(),
            &cfg.lbfgs,
            &alloc::format!("stage {}", t + 1),
        )?;
        model.stages[t] = objective.unpack(&result.x)?;
        reports.push(OptimReport::from_result(&result));

        let stage = model.stages[t].realize(&basis)?;
        let next = par::map_range(samples.len(), |s| match &samples[s].qbox {
            Some(qbox) => deblock_stage(&inputs[s], qbox, &stage, cfg.boundary),
            None => denoise_stage(&inputs[s], &samples[s].input, &stage, cfg.boundary),
        });
        inputs = next.into_iter().collect::<Result<_>>()?;
    }
    model.trained_mode = TrainedMode::Greedy;
    Ok((model, TrainReport { stages: reports }))
}

/// Refines all stages of `model` together against the loss of the last stage.
pub fn joint_train(samples: &[TrainSample], model: &TrdModel, cfg: &TrainConfig) -> Result<(TrdModel, OptimReport)> {
    check_samples(samples, model)?;
    let objective = JointObjective::new(samples, model.clone(), cfg.groups, cfg.boundary)?;
    let result = minimize(&objective, &objective.initial_point(), &cfg.lbfgs, "joint")?;
    let mut trained = objective.unpack(&result.x)?;
    trained.trained_mode = TrainedMode::Joint;
    Ok((trained, OptimReport::from_result(&result)))
}

fn check_samples(samples: &[TrainSample], model: &TrdModel) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training needs at least one sample".into()));
    }
    let deblock = !model.task.has_reaction();
    for s in samples {
        s.input.ensure_same_dims(&s.target)?;
        if s.qbox.is_some() != deblock {
            return Err(Error::TaskMismatch("sample kind does not match the model task".into()));
        }
    }
    Ok(())
}

//! Training costs as functions of a flat parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use super::grad::{stage_backward, stage_forward, StageGrad};
use super::params::{ParamGroups, ParamLayout, StageLayout};
use super::{loss, TrainSample};
use crate::diffusion::Stage;
use crate::imgproc::{BoundaryMode, Image};
use crate::model::{FilterBasis, StageParams, TrdModel};
use crate::{par, Error, Result};

/// A differentiable training cost.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Cost and gradient at `x`.
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Cost at `x` plus the active set of every non-smooth selection the
    /// cost depends on, if any. Two points with equal active sets lie on
    /// the same smooth piece.
    fn probe(&self, x: &[f64]) -> Result<(f64, Option<Vec<bool>>)>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.probe(x)?.0)
    }
}

fn check_len(x: &[f64], n: usize) -> Result<()> {
    if x.len() == n {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!(
            "parameter vector has {} entries, expected {n}",
            x.len()
        )))
    }
}

/// Sum of per-sample results in sample order.
fn reduce<T>(parts: Vec<Result<(f64, T)>>, mut fold: impl FnMut(T)) -> Result<f64> {
    let mut total = 0.0;
    for part in parts {
        let (cost, extra) = part?;
        total += cost;
        fold(extra);
    }
    Ok(total)
}

/// The greedy cost of one stage: `Σ_s ℓ(S(u_{t-1}^s; Θ_t), u_gt^s)` with the
/// stage inputs held fixed.
#[derive(Debug)]
pub struct StageObjective<'a> {
    samples: &'a [TrainSample],
    inputs: Vec<Image>,
    template: StageParams,
    layout: StageLayout,
    basis: FilterBasis,
    mode: BoundaryMode,
}

impl<'a> StageObjective<'a> {
    /// `inputs[s]` is `u_{t-1}` of sample `s`.
    pub fn new(
        samples: &'a [TrainSample],
        inputs: Vec<Image>,
        template: StageParams,
        model: &TrdModel,
        groups: ParamGroups,
        mode: BoundaryMode,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("training needs at least one sample".into()));
        }
        if inputs.len() != samples.len() {
            return Err(Error::InvalidArgument("one stage input per sample required".into()));
        }
        for (u, s) in inputs.iter().zip(samples) {
            u.ensure_same_dims(&s.target)?;
        }
        Ok(Self {
            samples,
            inputs,
            template,
            layout: StageLayout::new(&model.config(), groups),
            basis: model.basis()?,
            mode,
        })
    }

    pub fn layout(&self) -> &StageLayout {
        &self.layout
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.layout.pack(&self.template)
    }

    pub fn unpack(&self, x: &[f64]) -> Result<StageParams> {
        self.layout.unpack(x, &self.template)
    }

    fn stage(&self, x: &[f64]) -> Result<Stage> {
        check_len(x, self.layout.len())?;
        self.unpack(x)?.realize(&self.basis)
    }
}

impl Objective for StageObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let stage = self.stage(x)?;
        let parts = par::map_range(self.samples.len(), |s| {
            let sample = &self.samples[s];
            let input = sample.stage_input();
            let (u, cache) = stage_forward(&stage, &self.inputs[s], input, self.mode)?;
            let upstream = u.zip_map(&sample.target, |a, b| a - b);
            let (g, _) = stage_backward(&stage, &cache, input, &upstream, self.mode, false)?;
            Ok((loss(&u, &sample.target)?, g))
        });
        let mut total: Option<StageGrad> = None;
        let cost = reduce(parts, |g| match total.as_mut() {
            Some(t) => t.add(&g),
            None => total = Some(g),
        })?;
        let grad = self.layout.pack_grad(&total.expect("non-empty sample set"), &self.basis);
        Ok((cost, grad))
    }

    fn probe(&self, x: &[f64]) -> Result<(f64, Option<Vec<bool>>)> {
        let stage = self.stage(x)?;
        let parts = par::map_range(self.samples.len(), |s| {
            let sample = &self.samples[s];
            let (u, cache) = stage_forward(&stage, &self.inputs[s], sample.stage_input(), self.mode)?;
            Ok((loss(&u, &sample.target)?, cache.mask().map(<[bool]>::to_vec)))
        });
        let mut active: Option<Vec<bool>> = None;
        let cost = reduce(parts, |m| {
            if let Some(m) = m {
                active.get_or_insert_with(Vec::new).extend(m);
            }
        })?;
        Ok((cost, active))
    }
}

/// The joint cost `Σ_s ℓ(u_T^s, u_gt^s)` over all stage parameters.
#[derive(Debug)]
pub struct JointObjective<'a> {
    samples: &'a [TrainSample],
    template: TrdModel,
    layout: ParamLayout,
    basis: FilterBasis,
    mode: BoundaryMode,
}

impl<'a> JointObjective<'a> {
    pub fn new(samples: &'a [TrainSample], template: TrdModel, groups: ParamGroups, mode: BoundaryMode) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("training needs at least one sample".into()));
        }
        let want_box = !template.task.has_reaction();
        for s in samples {
            if s.qbox.is_some() != want_box {
                return Err(Error::TaskMismatch("sample kind does not match the model task".into()));
            }
        }
        Ok(Self {
            samples,
            layout: ParamLayout::new(&template.config(), groups),
            basis: template.basis()?,
            template,
            mode,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.template.stages.iter().flat_map(|s| self.layout.stage.pack(s)).collect()
    }

    pub fn unpack(&self, x: &[f64]) -> Result<TrdModel> {
        check_len(x, self.layout.len())?;
        let n = self.layout.stage.len();
        let mut model = self.template.clone();
        for (t, stage) in model.stages.iter_mut().enumerate() {
            *stage = self.layout.stage.unpack(&x[t * n..(t + 1) * n], stage)?;
        }
        Ok(model)
    }

    fn stages(&self, x: &[f64]) -> Result<Vec<Stage>> {
        self.unpack(x)?.stages.iter().map(|s| s.realize(&self.basis)).collect()
    }
}

impl Objective for JointObjective<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let stages = self.stages(x)?;
        let parts = par::map_range(self.samples.len(), |s| {
            let sample = &self.samples[s];
            let input = sample.stage_input();
            let mut caches = Vec::with_capacity(stages.len());
            let mut u = sample.input.clone();
            for stage in &stages {
                let (next, cache) = stage_forward(stage, &u, input, self.mode)?;
                caches.push(cache);
                u = next;
            }
            let cost = loss(&u, &sample.target)?;
            let mut upstream = u.zip_map(&sample.target, |a, b| a - b);
            let mut grads = vec![None; stages.len()];
            for t in (0..stages.len()).rev() {
                let (g, down) = stage_backward(&stages[t], &caches[t], input, &upstream, self.mode, t > 0)?;
                grads[t] = Some(g);
                if let Some(d) = down {
                    upstream = d;
                }
            }
            Ok((cost, grads.into_iter().map(|g| g.expect("every stage visited")).collect::<Vec<_>>()))
        });
        let mut total: Option<Vec<StageGrad>> = None;
        let cost = reduce(parts, |gs| match total.as_mut() {
            Some(t) => t.iter_mut().zip(&gs).for_each(|(a, b)| a.add(b)),
            None => total = Some(gs),
        })?;
        let grad = total
            .expect("non-empty sample set")
            .iter()
            .flat_map(|g| self.layout.stage.pack_grad(g, &self.basis))
            .collect();
        Ok((cost, grad))
    }

    fn probe(&self, x: &[f64]) -> Result<(f64, Option<Vec<bool>>)> {
        let stages = self.stages(x)?;
        let parts = par::map_range(self.samples.len(), |s| {
            let sample = &self.samples[s];
            let input = sample.stage_input();
            let mut u = sample.input.clone();
            let mut active: Option<Vec<bool>> = None;
            for stage in &stages {
                let (next, cache) = stage_forward(stage, &u, input, self.mode)?;
                if let Some(m) = cache.mask() {
                    active.get_or_insert_with(Vec::new).extend_from_slice(m);
                }
                u = next;
            }
            Ok((loss(&u, &sample.target)?, active))
        });
        let mut active: Option<Vec<bool>> = None;
        let cost = reduce(parts, |m| {
            if let Some(m) = m {
                active.get_or_insert_with(Vec::new).extend(m);
            }
        })?;
        Ok((cost, active))
    }
}

//! Flat parameter vectors and their layout.
//!
//! A stage packs as `[coeffs of filter 0, .., coeffs of filter N-1,
//! weights of filter 0, .., weights of filter N-1, log λ]`, skipping frozen
//! groups. A model packs its stages back to back.

use alloc::vec::Vec;

use super::grad::StageGrad;
use crate::influence::RbfMixture;
use crate::model::{FilterBasis, ModelConfig, StageParams, TrdModel};
use crate::{Error, Result};

/// Which parameter groups the optimizer may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGroups {
    pub filters: bool,
    pub influence: bool,
    pub reaction: bool,
}

impl ParamGroups {
    pub const ALL: Self = Self {
        filters: true,
        influence: true,
        reaction: true,
    };

    /// Influence functions frozen at their initial shape.
    pub const FILTERS_ONLY: Self = Self {
        filters: true,
        influence: false,
        reaction: true,
    };
}

impl Default for ParamGroups {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLayout {
    pub filters: usize,
    pub coeffs_per_filter: usize,
    pub weights_per_filter: usize,
    pub filters_trained: bool,
    pub influence_trained: bool,
    pub reaction_trained: bool,
}

impl StageLayout {
    pub fn new(config: &ModelConfig, groups: ParamGroups) -> Self {
        Self {
            filters: config.filters,
            coeffs_per_filter: config.filter_size * config.filter_size - 1,
            weights_per_filter: config.rbf.count(),
            filters_trained: groups.filters,
            influence_trained: groups.influence,
            reaction_trained: groups.reaction && config.task.has_reaction(),
        }
    }

    fn coeff_len(&self) -> usize {
        if self.filters_trained {
            self.filters * self.coeffs_per_filter
        } else {
            0
        }
    }

    fn weight_len(&self) -> usize {
        if self.influence_trained {
            self.filters * self.weights_per_filter
        } else {
            0
        }
    }

    pub fn len(&self) -> usize {
        self.coeff_len() + self.weight_len() + usize::from(self.reaction_trained)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack(&self, params: &StageParams) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        if self.filters_trained {
            params.coeffs.iter().for_each(|c| out.extend_from_slice(c));
        }
        if self.influence_trained {
            params.mixtures.iter().for_each(|m| out.extend_from_slice(m.weights()));
        }
        if self.reaction_trained {
            out.push(params.log_lambda.unwrap_or(0.0));
        }
        out
    }

    /// Rebuilds stage parameters from `values`; frozen groups come from `template`.
    pub fn unpack(&self, values: &[f64], template: &StageParams) -> Result<StageParams> {
        if values.len() != self.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "parameter vector has {} entries, layout expects {}",
                values.len(),
                self.len()
            )));
        }
        let mut out = template.clone();
        let (coeffs, rest) = values.split_at(self.coeff_len());
        let (weights, reaction) = rest.split_at(self.weight_len());
        if self.filters_trained {
            for (dst, src) in out.coeffs.iter_mut().zip(coeffs.chunks(self.coeffs_per_filter)) {
                dst.copy_from_slice(src);
            }
        }
        if self.influence_trained {
            for (dst, src) in out.mixtures.iter_mut().zip(weights.chunks(self.weights_per_filter)) {
                *dst = RbfMixture::new(*dst.config(), src.to_vec())?;
            }
        }
        if self.reaction_trained {
            out.log_lambda = Some(reaction[0]);
        }
        Ok(out)
    }

    /// Packs a full stage gradient, pulling tap gradients onto the basis.
    pub fn pack_grad(&self, grad: &StageGrad, basis: &FilterBasis) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        if self.filters_trained {
            grad.taps.iter().for_each(|t| out.extend(basis.project_taps(t)));
        }
        if self.influence_trained {
            grad.weights.iter().for_each(|w| out.extend_from_slice(w));
        }
        if self.reaction_trained {
            out.push(grad.log_lambda);
        }
        out
    }
}

/// Layout of all stages of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub stage: StageLayout,
    pub stages: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig, groups: ParamGroups) -> Self {
        Self {
            stage: StageLayout::new(config, groups),
            stages: config.stages,
        }
    }

    pub fn len(&self) -> usize {
        self.stage.len() * self.stages
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Parameters of one stage or of a whole model, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn from_model(model: &TrdModel, groups: ParamGroups) -> Self {
        let layout = ParamLayout::new(&model.config(), groups);
        let values = model.stages.iter().flat_map(|s| layout.stage.pack(s)).collect();
        Self { values, layout }
    }

    /// Writes the values into a copy of `template`.
    pub fn to_model(&self, template: &TrdModel) -> Result<TrdModel> {
        if template.num_stages() != self.layout.stages || self.values.len() != self.layout.len() {
            return Err(Error::InvalidArgument("parameter vector does not match the model".into()));
        }
        let mut model = template.clone();
        let n = self.layout.stage.len();
        for (stage, chunk) in model.stages.iter_mut().zip(self.values.chunks(n.max(1))) {
            *stage = self.layout.stage.unpack(&chunk[..n], stage)?;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::{RbfConfig, RbfKind};
    use crate::model::{init_model, Task};

    fn model() -> TrdModel {
        let mut m = init_model(&ModelConfig {
            task: Task::Denoise { sigma: 25.0 },
            stages: 3,
            filter_size: 3,
            filters: 4,
            rbf: RbfConfig::new(RbfKind::Gaussian, 7, 100.0).unwrap(),
        })
        .unwrap();
        for (t, s) in m.stages.iter_mut().enumerate() {
            s.coeffs[1][2] = t as f64 + 0.5;
            s.log_lambda = Some(-1.0 - t as f64);
        }
        m
    }

    #[test]
    fn pack_unpack_round_trip() {
        let m = model();
        for groups in [ParamGroups::ALL, ParamGroups::FILTERS_ONLY] {
            let pv = ParamVector::from_model(&m, groups);
            assert_eq!(pv.values.len(), pv.layout.len());
            assert_eq!(pv.to_model(&m).unwrap(), m);
        }
        let pv = ParamVector::from_model(&m, ParamGroups::ALL);
        assert_eq!(pv.layout.stage.len(), 4 * 8 + 4 * 7 + 1);
    }

    #[test]
    fn frozen_groups_come_from_template() {
        let m = model();
        let layout = StageLayout::new(&m.config(), ParamGroups::FILTERS_ONLY);
        let mut v = layout.pack(&m.stages[0]);
        v.iter_mut().for_each(|x| *x += 1.0);
        let s = layout.unpack(&v, &m.stages[0]).unwrap();
        assert_eq!(s.mixtures, m.stages[0].mixtures);
        assert_eq!(s.coeffs[0][0], m.stages[0].coeffs[0][0] + 1.0);
        assert!(layout.unpack(&v[1..], &m.stages[0]).is_err());
    }
}

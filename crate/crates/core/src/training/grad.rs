//! Reverse-mode derivatives of single stages.
//!
//! For a stage `u_t = S(u_{t-1}; Θ)` and an upstream gradient `g = ∂ℓ/∂u_t`
//! this computes `(∂u_t/∂Θ)ᵀ g` and `(∂u_t/∂u_{t-1})ᵀ g`. The transposes are
//! the exact adjoints of the forward operators under the chosen boundary
//! mode, so they also hold for the symmetric extension where `k̄` is not
//! the transpose of `k`.
//!
//! With `v_i = k_i ⋆ u`, `x_i = φ_i(v_i)`, `d = Σ_i k̄_i ⋆ x_i` and `y = u - d`:
//!
//! - denoising: `u_t = y - λ (u - f)`, so `g_y = g`;
//! - deblocking: `u_t = Dᵀ proj(D y)`, so `g_y = Dᵀ (m ⊙ D g)` with `m` the
//!   mask of coefficients strictly inside the box.
//!
//! Then `r_i = (k̄_i ⋆)ᵀ g_y`, `∂/∂w_ij = -Σ_p r_i B_j(v_i)`,
//! `∂/∂k̄_i = -taps(x_i, g_y)`, `∂/∂k_i = -taps(u, r_i ⊙ φ'_i(v_i))` and
//! `(∂u_t/∂u)ᵀ g = g_y - Σ_i (k_i ⋆)ᵀ (r_i ⊙ φ'_i(v_i)) [- λ g]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::diffusion::Stage;
use crate::imgproc::{
    block_dct, block_idct, correlate_adjoint, correlate_same, forward_blocks, inverse_blocks, tap_gradient,
    BoundaryMode, Image,
};
use crate::jpegsim::{proj_q, QBox};
use crate::Result;

/// What a stage is conditioned on besides its input.
#[derive(Debug, Clone, Copy)]
pub enum StageInput<'a> {
    Denoise { observed: &'a Image },
    Deblock { qbox: &'a QBox },
}

/// Gradient of a scalar with respect to every stage parameter, with
/// filters expressed as raw taps.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGrad {
    pub taps: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    /// Derivative with respect to `log λ` (zero for deblocking).
    pub log_lambda: f64,
}

impl StageGrad {
    fn zeros(stage: &Stage) -> Self {
        Self {
            taps: stage.filters().iter().map(|k| vec![0.0; k.taps().len()]).collect(),
            weights: stage.mixtures().iter().map(|m| vec![0.0; m.config().count()]).collect(),
            log_lambda: 0.0,
        }
    }

    pub fn add(&mut self, other: &StageGrad) {
        for (a, b) in self.taps.iter_mut().flatten().zip(other.taps.iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.weights.iter_mut().flatten().zip(other.weights.iter().flatten()) {
            *a += b;
        }
        self.log_lambda += other.log_lambda;
    }
}

/// Forward intermediates needed by [`stage_backward`].
#[derive(Debug, Clone)]
pub struct StageCache {
    u_prev: Image,
    responses: Vec<Image>,
    influence: Vec<Image>,
    slopes: Vec<Image>,
    mask: Option<Vec<bool>>,
}

impl StageCache {
    /// Interior mask of the projection (deblocking only).
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }
}

/// Evaluates one stage and keeps what the backward pass needs.
pub fn stage_forward(
    stage: &Stage,
    u_prev: &Image,
    input: StageInput<'_>,
    mode: BoundaryMode,
) -> Result<(Image, StageCache)> {
    let n = stage.filters().len();
    let mut responses = Vec::with_capacity(n);
    let mut influence = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    let mut y = u_prev.clone();
    for i in 0..n {
        let v = correlate_same(u_prev, &stage.filters()[i], mode);
        let (x, dx) = stage.mixtures()[i].apply_with_deriv(&v);
        y.add_scaled(-1.0, &correlate_same(&x, &stage.flipped()[i], mode));
        responses.push(v);
        influence.push(x);
        slopes.push(dx);
    }
    let (out, mask) = match input {
        StageInput::Denoise { observed } => {
            u_prev.ensure_same_dims(observed)?;
            if let Some(lambda) = stage.lambda() {
                for ((o, &u), &f) in y.data_mut().iter_mut().zip(u_prev.data()).zip(observed.data()) {
                    *o -= lambda * (u - f);
                }
            }
            (y, None)
        }
        StageInput::Deblock { qbox } => {
            let c = block_dct(&y)?;
            let mask = qbox.interior_mask(&c);
            (block_idct(&proj_q(&c, qbox)?)?, Some(mask))
        }
    };
    Ok((
        out,
        StageCache {
            u_prev: u_prev.clone(),
            responses,
            influence,
            slopes,
            mask,
        },
    ))
}

/// Pulls `upstream` back through one stage. Returns the parameter gradient
/// and, when `want_input` is set, the gradient with respect to `u_{t-1}`.
pub fn stage_backward(
    stage: &Stage,
    cache: &StageCache,
    input: StageInput<'_>,
    upstream: &Image,
    mode: BoundaryMode,
    want_input: bool,
) -> Result<(StageGrad, Option<Image>)> {
    let mut grad = StageGrad::zeros(stage);
    let g_y = match (&cache.mask, input) {
        (Some(mask), StageInput::Deblock { .. }) => {
            let mut c = forward_blocks(upstream)?;
            for (v, &keep) in c.data_mut().iter_mut().zip(mask) {
                if !keep {
                    *v = 0.0;
                }
            }
            inverse_blocks(&c)?
        }
        _ => upstream.clone(),
    };

    let mut input_grad = want_input.then(|| g_y.clone());
    if let StageInput::Denoise { observed } = input {
        if let Some(lambda) = stage.lambda() {
            let residual: f64 = cache
                .u_prev
                .data()
                .iter()
                .zip(observed.data())
                .zip(upstream.data())
                .map(|((u, f), g)| (u - f) * g)
                .sum();
            grad.log_lambda = -lambda * residual;
            if let Some(ig) = input_grad.as_mut() {
                ig.add_scaled(-lambda, upstream);
            }
        }
    }

    let mut basis = Vec::new();
    for i in 0..stage.filters().len() {
        let k = &stage.filters()[i];
        let mixture = &stage.mixtures()[i];
        let r = correlate_adjoint(&g_y, &stage.flipped()[i], mode);

        let cfg = mixture.config();
        basis.resize(cfg.count(), 0.0);
        let wg = &mut grad.weights[i];
        for (&v, &rp) in cache.responses[i].data().iter().zip(r.data()) {
            if rp == 0.0 {
                continue;
            }
            cfg.basis_into(v, &mut basis);
            for (acc, b) in wg.iter_mut().zip(&basis) {
                *acc -= rp * b;
            }
        }

        // k̄ path: taps of the flipped kernel, rotated back onto k
        let flipped_grad = tap_gradient(&cache.influence[i], &g_y, &stage.flipped()[i], mode);
        let s = r.zip_map(&cache.slopes[i], |a, b| a * b);
        let direct_grad = tap_gradient(&cache.u_prev, &s, k, mode);
        let tg = &mut grad.taps[i];
        let n = tg.len();
        for t in 0..n {
            tg[t] = -direct_grad[t] - flipped_grad[n - 1 - t];
        }

        if let Some(ig) = input_grad.as_mut() {
            ig.add_scaled(-1.0, &correlate_adjoint(&s, k, mode));
        }
    }
    Ok((grad, input_grad))
}

/// `(∂u_t/∂Θ)ᵀ · upstream` for one sample.
pub fn stage_param_grad(
    stage: &Stage,
    u_prev: &Image,
    input: StageInput<'_>,
    upstream: &Image,
    mode: BoundaryMode,
) -> Result<StageGrad> {
    let (_, cache) = stage_forward(stage, u_prev, input, mode)?;
    Ok(stage_backward(stage, &cache, input, upstream, mode, false)?.0)
}

/// `(∂u_t/∂u_{t-1})ᵀ · upstream`.
pub fn stage_input_grad(
    stage: &Stage,
    u_prev: &Image,
    input: StageInput<'_>,
    upstream: &Image,
    mode: BoundaryMode,
) -> Result<Image> {
    let (_, cache) = stage_forward(stage, u_prev, input, mode)?;
    Ok(stage_backward(stage, &cache, input, upstream, mode, true)?
        .1
        .expect("input gradient requested"))
}

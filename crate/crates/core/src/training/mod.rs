//! Loss, analytic gradients, L-BFGS and the greedy and joint drivers.

mod driver;
mod grad;
mod gradcheck;
mod lbfgs;
mod objective;
mod params;

pub use driver::{greedy_train, joint_train, OptimReport, TrainConfig, TrainReport, WARM_START_NOTE};
pub use grad::{stage_backward, stage_forward, stage_input_grad, stage_param_grad, StageCache, StageGrad, StageInput};
pub use gradcheck::{grad_check, GradCheckReport};
pub use lbfgs::{lbfgs_minimize, LbfgsConfig, LbfgsResult, LbfgsStatus};
pub use objective::{JointObjective, Objective, StageObjective};
pub use gradcheck::rel_error;
pub use params::{ParamGroups, ParamLayout, ParamVector, StageLayout};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::imgproc::{Image, BLOCK};
use crate::jpegsim::QBox;
use crate::{Error, Result};

/// A degraded input with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: Image,
    pub target: Image,
    /// Constraint box of the observed JPEG indices (deblocking only).
    pub qbox: Option<QBox>,
}

impl TrainSample {
    pub fn denoise(noisy: Image, clean: Image) -> Result<Self> {
        noisy.ensure_same_dims(&clean)?;
        Ok(Self {
            input: noisy,
            target: clean,
            qbox: None,
        })
    }

    /// `decoded` and `clean` must already sit on the 8×8 block grid of `qbox`.
    pub fn deblock(decoded: Image, clean: Image, qbox: QBox) -> Result<Self> {
        decoded.ensure_same_dims(&clean)?;
        let (h, w) = decoded.dims();
        if h % BLOCK != 0 || w % BLOCK != 0 {
            return Err(Error::NotBlockAligned(h, w));
        }
        if qbox.dims() != (h, w) {
            return Err(Error::DimensionMismatch {
                expected: (h, w),
                actual: qbox.dims(),
            });
        }
        Ok(Self {
            input: decoded,
            target: clean,
            qbox: Some(qbox),
        })
    }

    pub(crate) fn stage_input(&self) -> StageInput<'_> {
        match &self.qbox {
            Some(qbox) => StageInput::Deblock { qbox },
            None => StageInput::Denoise { observed: &self.input },
        }
    }
}

/// `½‖u − u_gt‖²`.
pub fn loss(u: &Image, u_gt: &Image) -> Result<f64> {
    u.ensure_same_dims(u_gt)?;
    Ok(0.5 * u.data().iter().zip(u_gt.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
}

/// Adds i.i.d. `N(0, σ²)` noise drawn from ChaCha20 seeded with `seed`.
pub fn add_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidArgument(alloc::format!("noise level must be finite and >= 0, got {sigma}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(img.map(|v| {
        let n: f64 = StandardNormal.sample(&mut rng);
        v + sigma * n
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        let a = Image::from_fn(3, 4, |y, x| (y * 7 + x) as f64);
        assert_eq!(loss(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b.set(1, 2, b.get(1, 2) + 2.0);
        assert_eq!(loss(&a, &b).unwrap(), 2.0);
        let c = Image::from_fn(3, 4, |y, x| ((y * 13 + x * 5) % 7) as f64 * 0.3);
        let mut naive = 0.0;
        for y in 0..3 {
            for x in 0..4 {
                let d = a.get(y, x) - c.get(y, x);
                naive += d * d;
            }
        }
        assert!((loss(&a, &c).unwrap() - 0.5 * naive).abs() < 1e-12);
        assert!(loss(&a, &Image::zeros(4, 3)).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let img = Image::filled(16, 16, 100.0);
        assert_eq!(add_noise(&img, 0.0, 3).unwrap(), img);
        assert_eq!(add_noise(&img, 25.0, 3).unwrap(), add_noise(&img, 25.0, 3).unwrap());
        assert_ne!(add_noise(&img, 25.0, 3).unwrap(), add_noise(&img, 25.0, 4).unwrap());
        assert!(add_noise(&img, -1.0, 3).is_err());
    }

    #[test]
    fn noise_std_matches_sigma() {
        let img = Image::zeros(1000, 1000);
        let out = add_noise(&img, 25.0, 7).unwrap();
        let n = out.len() as f64;
        let mean = out.mean();
        let var = out.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = libm::sqrt(var);
        assert!((0.98 * 25.0..=1.02 * 25.0).contains(&std), "std {std}");
    }
}

//! Influence functions `φ(z) = Σ_j w_j φ_rbf(|z - μ_j| / γ)` over equidistant
//! centers `μ_j ∈ [-R, R]` with one shared scale `γ`.
//!
//! Gaussian atoms are `exp(-(z - μ)² / (2γ²))`, triangular atoms are
//! `max(0, 1 - |z - μ| / γ)`. Arguments outside `[-R, R]` are evaluated as-is.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::imgproc::Image;
use crate::{Error, Result};

/// Ridge added to the normal equations in [`fit_weights`].
pub const FIT_RIDGE: f64 = 1e-8;

/// Number of equidistant samples used to fit the plain initialization.
pub const PLAIN_FIT_SAMPLES: usize = 1000;

/// The influence function of the plain initialization, `2z / (1 + z²)`.
pub fn plain_influence(z: f64) -> f64 {
    2.0 * z / (1.0 + z * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RbfKind {
    #[default]
    Gaussian,
    Triangular,
}

impl RbfKind {
    pub fn name(self) -> &'static str {
        match self {
            RbfKind::Gaussian => "gaussian",
            RbfKind::Triangular => "triangular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(RbfKind::Gaussian),
            "triangular" => Some(RbfKind::Triangular),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfConfig {
    kind: RbfKind,
    count: usize,
    radius: f64,
    gamma: f64,
}

impl RbfConfig {
    /// Config with `γ` equal to the center spacing `2R / (M - 1)`.
    pub fn new(kind: RbfKind, count: usize, radius: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument(alloc::format!("need at least 2 RBF atoms, got {count}")));
        }
        Self::with_gamma(kind, count, radius, 2.0 * radius / (count - 1) as f64)
    }

    pub fn with_gamma(kind: RbfKind, count: usize, radius: f64, gamma: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument(alloc::format!("need at least 2 RBF atoms, got {count}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("RBF radius must be positive, got {radius}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("RBF scale must be positive, got {gamma}")));
        }
        Ok(Self {
            kind,
            count,
            radius,
            gamma,
        })
    }

    #[inline]
    pub fn kind(&self) -> RbfKind {
        self.kind
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.count - 1) as f64
    }

    #[inline]
    pub fn center(&self, j: usize) -> f64 {
        -self.radius + j as f64 * self.spacing()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.center(j)).collect()
    }

    /// Responses of all atoms at `z`.
    pub fn basis_eval(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.count];
        self.basis_into(z, &mut out);
        out
    }

    /// Writes the atom responses at `z` into `out` (length `M`).
    ///
    /// Gaussian atoms are generated from the nearest center outwards with
    /// the ratio recurrence `B_{j±1} / B_j = exp(±ρ t_j - ρ²/2)`, `ρ = Δ/γ`,
    /// which needs three exponentials per call instead of `M`.
    pub fn basis_into(&self, z: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.count);
        let t0 = (z + self.radius) / self.gamma;
        match self.kind {
            RbfKind::Gaussian => {
                let rho = self.spacing() / self.gamma;
                let decay = libm::exp(-rho * rho);
                let nearest = libm::round((z + self.radius) / self.spacing());
                let j0 = nearest.clamp(0.0, (self.count - 1) as f64) as usize;
                let t_j0 = t0 - j0 as f64 * rho;
                let peak = libm::exp(-0.5 * t_j0 * t_j0);
                out[j0] = peak;
                if peak == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                let mut b = peak;
                let mut ratio = libm::exp(rho * t_j0 - 0.5 * rho * rho);
                for v in out[j0 + 1..].iter_mut() {
                    b *= ratio;
                    ratio *= decay;
                    *v = b;
                }
                b = peak;
                ratio = libm::exp(-rho * t_j0 - 0.5 * rho * rho);
                for v in out[..j0].iter_mut().rev() {
                    b *= ratio;
                    ratio *= decay;
                    *v = b;
                }
            }
            RbfKind::Triangular => {
                let rho = self.spacing() / self.gamma;
                for (j, v) in out.iter_mut().enumerate() {
                    let t = t0 - j as f64 * rho;
                    *v = (1.0 - t.abs()).max(0.0);
                }
            }
        }
    }

    /// Derivative of each atom with respect to `z`, scaled so that
    /// `Σ w_j · slope_j = φ'(z)`. Triangular kinks take the left limit.
    fn slope(&self, z: f64, j: usize, response: f64) -> f64 {
        let t = (z - self.center(j)) / self.gamma;
        match self.kind {
            RbfKind::Gaussian => -response * t / self.gamma,
            RbfKind::Triangular => {
                if t > -1.0 && t <= 0.0 {
                    1.0 / self.gamma
                } else if t > 0.0 && t <= 1.0 {
                    -1.0 / self.gamma
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_{-∞}^{z}` of atom `j`.
    fn atom_integral(&self, z: f64, j: usize) -> f64 {
        let g = self.gamma;
        let t = (z - self.center(j)) / g;
        match self.kind {
            RbfKind::Gaussian => {
                g * libm::sqrt(core::f64::consts::FRAC_PI_2) * libm::erf(t * core::f64::consts::FRAC_1_SQRT_2)
            }
            RbfKind::Triangular => {
                if t <= -1.0 {
                    0.0
                } else if t <= 0.0 {
                    0.5 * g * (1.0 + t) * (1.0 + t)
                } else if t < 1.0 {
                    g * (1.0 - 0.5 * (1.0 - t) * (1.0 - t))
                } else {
                    g
                }
            }
        }
    }
}

/// One influence function: weights over the atoms of a shared [`RbfConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct RbfMixture {
    config: RbfConfig,
    weights: Vec<f64>,
}

impl RbfMixture {
    pub fn new(config: RbfConfig, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != config.count {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} weights for {} RBF atoms",
                weights.len(),
                config.count
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("RBF weights must be finite".into()));
        }
        Ok(Self { config, weights })
    }

    pub fn zeros(config: RbfConfig) -> Self {
        Self {
            config,
            weights: vec![0.0; config.count],
        }
    }

    #[inline]
    pub fn config(&self) -> &RbfConfig {
        &self.config
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phi_eval(&self, z: f64) -> f64 {
        let mut basis = vec![0.0; self.config.count];
        self.eval_with(z, &mut basis)
    }

    pub fn phi_deriv(&self, z: f64) -> f64 {
        let mut basis = vec![0.0; self.config.count];
        self.eval_deriv_with(z, &mut basis).1
    }

    /// `φ(z)` using caller-provided scratch for the atom responses.
    #[inline]
    pub fn eval_with(&self, z: f64, scratch: &mut [f64]) -> f64 {
        self.config.basis_into(z, scratch);
        scratch.iter().zip(&self.weights).map(|(b, w)| b * w).sum()
    }

    /// `(φ(z), φ'(z))`; `scratch` holds the atom responses afterwards.
    #[inline]
    pub fn eval_deriv_with(&self, z: f64, scratch: &mut [f64]) -> (f64, f64) {
        self.config.basis_into(z, scratch);
        let cfg = &self.config;
        let mut value = 0.0;
        let mut slope = 0.0;
        match cfg.kind {
            RbfKind::Gaussian => {
                let inv_g2 = 1.0 / (cfg.gamma * cfg.gamma);
                for (j, (&b, &w)) in scratch.iter().zip(&self.weights).enumerate() {
                    value += w * b;
                    slope -= w * b * (z - cfg.center(j)) * inv_g2;
                }
            }
            RbfKind::Triangular => {
                for (j, (&b, &w)) in scratch.iter().zip(&self.weights).enumerate() {
                    value += w * b;
                    slope += w * cfg.slope(z, j, b);
                }
            }
        }
        (value, slope)
    }

    /// Pointwise `φ` over an image.
    pub fn apply(&self, img: &Image) -> Image {
        let mut scratch = vec![0.0; self.config.count];
        img.map(|z| self.eval_with(z, &mut scratch))
    }

    /// Pointwise `(φ, φ')` over an image.
    pub fn apply_with_deriv(&self, img: &Image) -> (Image, Image) {
        let mut scratch = vec![0.0; self.config.count];
        let mut value = Image::zeros(img.height(), img.width());
        let mut slope = Image::zeros(img.height(), img.width());
        for (i, &z) in img.data().iter().enumerate() {
            let (v, d) = self.eval_deriv_with(z, &mut scratch);
            value.data_mut()[i] = v;
            slope.data_mut()[i] = d;
        }
        (value, slope)
    }

    /// Penalty `ρ(z) = ∫_0^z φ(s) ds`, integrated atom by atom in closed form.
    pub fn rho_eval(&self, z: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(j, w)| w * (self.config.atom_integral(z, j) - self.config.atom_integral(0.0, j)))
            .sum()
    }
}

/// Least-squares weights for samples `(z_k, y_k)` via ridge-regularized
/// normal equations.
pub fn fit_weights(config: RbfConfig, samples: &[(f64, f64)]) -> Result<RbfMixture> {
    let m = config.count;
    if samples.len() < m {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} samples cannot determine {m} RBF weights",
            samples.len()
        )));
    }
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut basis = vec![0.0; m];
    for &(z, y) in samples {
        config.basis_into(z, &mut basis);
        for i in 0..m {
            if basis[i] == 0.0 {
                continue;
            }
            rhs[i] += basis[i] * y;
            for j in i..m {
                gram[(i, j)] += basis[i] * basis[j];
            }
        }
    }
    for i in 0..m {
        gram[(i, i)] += FIT_RIDGE;
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    RbfMixture::new(config, w.iter().copied().collect())
}

/// `n` equidistant samples of `f` over `[-R, R]`.
pub fn sample_target(config: &RbfConfig, n: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let r = config.radius;
    (0..n)
        .map(|k| {
            let z = -r + 2.0 * r * k as f64 / (n - 1) as f64;
            (z, f(z))
        })
        .collect()
}

/// Mixture fitted to `2z / (1 + z²)` on [`PLAIN_FIT_SAMPLES`] samples.
pub fn fit_plain(config: RbfConfig) -> Result<RbfMixture> {
    fit_weights(config, &sample_target(&config, PLAIN_FIT_SAMPLES, plain_influence))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(m: usize, r: f64) -> RbfConfig {
        RbfConfig::new(RbfKind::Gaussian, m, r).unwrap()
    }

    fn pseudo(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn config_invariants() {
        assert!(RbfConfig::new(RbfKind::Gaussian, 1, 1.0).is_err());
        assert!(RbfConfig::new(RbfKind::Gaussian, 5, 0.0).is_err());
        assert!(RbfConfig::with_gamma(RbfKind::Gaussian, 5, 1.0, -1.0).is_err());
        let c = gauss(63, 310.0);
        assert_eq!(c.center(0), -310.0);
        assert!((c.center(62) - 310.0).abs() < 1e-12);
        assert!((c.gamma() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_basis_at_center_and_one_gamma() {
        let c = gauss(15, 70.0);
        for j in [0, 3, 7, 14] {
            let mu = c.center(j);
            assert!((c.basis_eval(mu)[j] - 1.0).abs() < 1e-14);
            assert!((c.basis_eval(mu + c.gamma())[j] - libm::exp(-0.5)).abs() < 1e-14);
            assert!((libm::exp(-0.5) - 0.60653).abs() < 1e-5);
        }
    }

    #[test]
    fn gaussian_recurrence_matches_direct_formula() {
        for c in [gauss(63, 310.0), RbfConfig::with_gamma(RbfKind::Gaussian, 31, 100.0, 3.1).unwrap()] {
            for z in [-1e4, -400.0, -310.0, -12.3, 0.0, 0.7, 155.5, 309.9, 500.0] {
                let fast = c.basis_eval(z);
                for (j, b) in fast.iter().enumerate() {
                    let d = z - c.center(j);
                    let direct = libm::exp(-d * d / (2.0 * c.gamma() * c.gamma()));
                    assert!((b - direct).abs() <= 1e-12 * direct + 1e-300, "{z} {j}: {b:e} vs {direct:e}");
                }
            }
        }
    }

    #[test]
    fn triangular_support_edges() {
        let c = RbfConfig::new(RbfKind::Triangular, 9, 4.0).unwrap();
        let mu = c.center(4);
        assert_eq!(c.basis_eval(mu + c.gamma())[4], 0.0);
        assert_eq!(c.basis_eval(mu - c.gamma())[4], 0.0);
        assert_eq!(c.basis_eval(mu)[4], 1.0);
    }

    #[test]
    fn phi_trivial_cases() {
        let c = gauss(11, 5.0);
        let zero = RbfMixture::zeros(c);
        assert_eq!(zero.phi_eval(1.3), 0.0);
        assert_eq!(zero.phi_deriv(-2.0), 0.0);
        let mut w = vec![0.0; 11];
        w[4] = 2.0;
        let mix = RbfMixture::new(c, w).unwrap();
        assert!((mix.phi_eval(c.center(4)) - 2.0).abs() < 1e-14);
        let mut single = vec![0.0; 11];
        single[6] = 1.0;
        let mix = RbfMixture::new(c, single).unwrap();
        assert!(mix.phi_deriv(c.center(6)).abs() < 1e-14);
    }

    #[test]
    fn phi_matches_naive_sum() {
        let c = gauss(21, 50.0);
        let mix = RbfMixture::new(c, pseudo(3, 21)).unwrap();
        for (k, z) in pseudo(4, 100).into_iter().enumerate() {
            let z = z * 80.0 + k as f64 * 0.01;
            let naive: f64 = (0..21)
                .map(|j| {
                    let d = z - c.center(j);
                    mix.weights()[j] * libm::exp(-d * d / (2.0 * c.gamma() * c.gamma()))
                })
                .sum();
            assert!((mix.phi_eval(z) - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_deriv_matches_central_differences() {
        let h = 1e-4;
        let c = gauss(17, 40.0);
        let mix = RbfMixture::new(c, pseudo(9, 17)).unwrap();
        for z in pseudo(10, 60) {
            let z = z * 60.0;
            let fd = (mix.phi_eval(z + h) - mix.phi_eval(z - h)) / (2.0 * h);
            let an = mix.phi_deriv(z);
            assert!((fd - an).abs() / (fd.abs() + an.abs()).max(1e-8) < 1e-6, "{z}: {fd} vs {an}");
        }
        let tri = RbfMixture::new(RbfConfig::new(RbfKind::Triangular, 17, 40.0).unwrap(), pseudo(9, 17)).unwrap();
        for z in [-33.3, -1.1, 0.4, 7.7, 22.2] {
            let fd = (tri.phi_eval(z + h) - tri.phi_eval(z - h)) / (2.0 * h);
            let an = tri.phi_deriv(z);
            assert!((fd - an).abs() / (fd.abs() + an.abs()).max(1e-8) < 1e-6);
        }
    }

    #[test]
    fn triangular_kink_uses_left_limit() {
        let c = RbfConfig::new(RbfKind::Triangular, 5, 2.0).unwrap();
        let mut w = vec![0.0; 5];
        w[2] = 3.0;
        let mix = RbfMixture::new(c, w).unwrap();
        // center 0, γ = 1: slope left of the peak is +3, right edge left slope -3
        assert_eq!(mix.phi_deriv(0.0), 3.0);
        assert_eq!(mix.phi_deriv(1.0), -3.0);
        assert_eq!(mix.phi_deriv(-1.0), 0.0);
    }

    #[test]
    fn linear_in_weights() {
        let c = gauss(13, 30.0);
        let a = RbfMixture::new(c, pseudo(1, 13)).unwrap();
        let b = RbfMixture::new(c, pseudo(2, 13)).unwrap();
        let sum = RbfMixture::new(c, a.weights().iter().zip(b.weights()).map(|(x, y)| x + y).collect()).unwrap();
        for z in [-40.0, -3.0, 0.0, 12.5] {
            assert!((sum.phi_eval(z) - a.phi_eval(z) - b.phi_eval(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_is_weight_gradient() {
        let c = gauss(13, 30.0);
        let z = 4.2;
        let basis = c.basis_eval(z);
        for j in 0..13 {
            let mut w = vec![0.0; 13];
            w[j] = 1.0;
            assert_eq!(RbfMixture::new(c, w).unwrap().phi_eval(z), basis[j]);
        }
    }

    #[test]
    fn fit_recovers_exact_mixture() {
        let c = gauss(15, 20.0);
        let truth = RbfMixture::new(c, pseudo(5, 15)).unwrap();
        let fitted = fit_weights(c, &sample_target(&c, 400, |z| truth.phi_eval(z))).unwrap();
        for (a, b) in fitted.weights().iter().zip(truth.weights()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_zero_target() {
        let c = gauss(31, 310.0);
        let fitted = fit_weights(c, &sample_target(&c, 500, |_| 0.0)).unwrap();
        assert!(fitted.weights().iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn fit_needs_enough_samples() {
        let c = gauss(31, 310.0);
        assert!(fit_weights(c, &sample_target(&c, 10, |z| z)).is_err());
    }

    #[test]
    fn fit_resolves_plain_target_with_fine_spacing() {
        let c = gauss(63, 10.0);
        let mix = fit_weights(c, &sample_target(&c, 1000, plain_influence)).unwrap();
        let worst = sample_target(&c, 5000, plain_influence)
            .into_iter()
            .map(|(z, y)| (mix.phi_eval(z) - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }

    #[test]
    fn rho_trivial_cases() {
        let c = gauss(21, 30.0);
        let w = pseudo(6, 21);
        let mix = RbfMixture::new(c, w.clone()).unwrap();
        assert_eq!(mix.rho_eval(0.0), 0.0);
        // antisymmetric weights give an odd φ and an even ρ
        let odd: Vec<f64> = (0..21).map(|j| w[j] - w[20 - j]).collect();
        let mix = RbfMixture::new(c, odd).unwrap();
        for z in [0.5, 3.0, 17.0, 55.0] {
            assert!((mix.rho_eval(z) - mix.rho_eval(-z)).abs() < 1e-8);
        }
    }

    #[test]
    fn rho_integrates_plain_target_to_log_penalty() {
        let c = gauss(201, 20.0);
        let mix = fit_weights(c, &sample_target(&c, 4000, plain_influence)).unwrap();
        for k in 0..=200 {
            let z = -10.0 + 0.1 * k as f64;
            assert!((mix.rho_eval(z) - libm::log(1.0 + z * z)).abs() < 0.02, "{z}");
        }
    }

    #[test]
    fn rho_derivative_is_phi() {
        let h = 1e-4;
        for kind in [RbfKind::Gaussian, RbfKind::Triangular] {
            let mix = RbfMixture::new(RbfConfig::new(kind, 15, 60.0).unwrap(), pseudo(8, 15)).unwrap();
            for z in [-50.3, -7.1, 2.2, 31.7] {
                let fd = (mix.rho_eval(z + h) - mix.rho_eval(z - h)) / (2.0 * h);
                assert!((fd - mix.phi_eval(z)).abs() < 1e-7 * (1.0 + fd.abs()));
            }
        }
    }
}

//! Filter parameterization, stage containers and model assembly.
//!
//! Filters are linear combinations of the `m² - 1` non-constant atoms of the
//! orthonormal 2-D DCT basis, so every filter is zero-mean whatever its
//! coefficients. The reaction weight is stored as `log λ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::diffusion::Stage;
use crate::imgproc::Kernel;
use crate::influence::{fit_plain, RbfConfig, RbfMixture};
use crate::{Error, Result};

/// Initial reaction weight of the plain initialization.
pub const INITIAL_LAMBDA: f64 = 0.1;

pub const SUPPORTED_FILTER_SIZES: [usize; 4] = [3, 5, 7, 9];

/// Zero-mean orthonormal DCT atoms of size `m × m`, lowest frequencies first.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBasis {
    m: usize,
    atoms: Vec<Kernel>,
}

pub fn build_basis(m: usize) -> Result<FilterBasis> {
    if !SUPPORTED_FILTER_SIZES.contains(&m) {
        return Err(Error::UnsupportedFilterSize(m));
    }
    let dct_1d = |k: usize, n: usize| {
        let scale = if k == 0 {
            libm::sqrt(1.0 / m as f64)
        } else {
            libm::sqrt(2.0 / m as f64)
        };
        scale * libm::cos(core::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * m) as f64)
    };
    let mut freqs: Vec<(usize, usize)> = (0..m)
        .flat_map(|p| (0..m).map(move |q| (p, q)))
        .filter(|&pq| pq != (0, 0))
        .collect();
    freqs.sort_by_key(|&(p, q)| (p + q, p));
    let atoms = freqs
        .into_iter()
        .map(|(p, q)| {
            let taps = (0..m)
                .flat_map(|a| (0..m).map(move |b| dct_1d(p, a) * dct_1d(q, b)))
                .collect();
            Kernel::square(m, taps).expect("m×m taps")
        })
        .collect();
    Ok(FilterBasis { m, atoms })
}

impl FilterBasis {
    #[inline]
    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Kernel] {
        &self.atoms
    }

    /// Filter with taps `Σ_b coeff[b] · atom_b`.
    pub fn assemble_filter(&self, coeff: &[f64]) -> Result<Kernel> {
        if coeff.len() != self.atoms.len() {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} coefficients for {} basis atoms",
                coeff.len(),
                self.atoms.len()
            )));
        }
        let mut taps = vec![0.0; self.m * self.m];
        for (c, atom) in coeff.iter().zip(&self.atoms) {
            for (t, a) in taps.iter_mut().zip(atom.taps()) {
                *t += c * a;
            }
        }
        Kernel::square(self.m, taps)
    }

    /// Pulls a gradient over filter taps back onto basis coefficients.
    pub fn project_taps(&self, tap_grad: &[f64]) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|atom| atom.taps().iter().zip(tap_grad).map(|(a, g)| a * g).sum())
            .collect()
    }
}

/// Restoration task a model is trained for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    /// Additive white Gaussian noise of the given standard deviation.
    Denoise { sigma: f64 },
    /// JPEG artifacts at the given quality setting.
    Deblock { quality: u8 },
}

impl Task {
    pub fn has_reaction(&self) -> bool {
        matches!(self, Task::Denoise { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainedMode {
    #[default]
    Greedy,
    Joint,
}

/// Trainable parameters of one diffusion stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageParams {
    /// One coefficient vector over the basis atoms per filter.
    pub coeffs: Vec<Vec<f64>>,
    pub mixtures: Vec<RbfMixture>,
    /// `log λ`; `None` for deblocking stages.
    pub log_lambda: Option<f64>,
}

impl StageParams {
    pub fn lambda(&self) -> Option<f64> {
        self.log_lambda.map(libm::exp)
    }

    /// Assembles the filters and returns the evaluable stage.
    pub fn realize(&self, basis: &FilterBasis) -> Result<Stage> {
        let filters = self
            .coeffs
            .iter()
            .map(|c| basis.assemble_filter(c))
            .collect::<Result<Vec<_>>>()?;
        Stage::new(filters, self.mixtures.clone(), self.lambda())
    }
}

/// Shape of a model, shared by initialization and training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub task: Task,
    pub stages: usize,
    pub filter_size: usize,
    pub filters: usize,
    pub rbf: RbfConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrdModel {
    pub task: Task,
    pub filter_size: usize,
    pub filters: usize,
    pub rbf: RbfConfig,
    pub stages: Vec<StageParams>,
    pub trained_mode: TrainedMode,
}

impl TrdModel {
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            task: self.task,
            stages: self.stages.len(),
            filter_size: self.filter_size,
            filters: self.filters,
            rbf: self.rbf,
        }
    }

    pub fn basis(&self) -> Result<FilterBasis> {
        build_basis(self.filter_size)
    }

    pub fn realize_stages(&self) -> Result<Vec<Stage>> {
        let basis = self.basis()?;
        self.stages.iter().map(|s| s.realize(&basis)).collect()
    }

    /// Checks every structural invariant; used after loading from disk.
    pub fn validate(&self) -> Result<()> {
        if !SUPPORTED_FILTER_SIZES.contains(&self.filter_size) {
            return Err(Error::UnsupportedFilterSize(self.filter_size));
        }
        let available = self.filter_size * self.filter_size - 1;
        if self.filters > available {
            return Err(Error::TooManyFilters {
                filters: self.filters,
                m: self.filter_size,
                available,
            });
        }
        if self.filters == 0 {
            return Err(Error::InvalidArgument("a stage needs at least one filter".into()));
        }
        match self.task {
            Task::Denoise { sigma } if !(sigma.is_finite() && sigma >= 0.0) => {
                return Err(Error::InvalidArgument(alloc::format!("invalid noise level {sigma}")));
            }
            Task::Deblock { quality } if !(1..=100).contains(&quality) => {
                return Err(Error::InvalidArgument(alloc::format!("invalid JPEG quality {quality}")));
            }
            _ => {}
        }
        for (t, stage) in self.stages.iter().enumerate() {
            let bad = |what: &str| Err(Error::InvalidArgument(alloc::format!("stage {t}: {what}")));
            if stage.coeffs.len() != self.filters || stage.mixtures.len() != self.filters {
                return bad("filter count differs from the model");
            }
            if stage.coeffs.iter().any(|c| c.len() != available) {
                return bad("coefficient vector length differs from the basis size");
            }
            if stage.coeffs.iter().flatten().any(|v| !v.is_finite()) {
                return bad("non-finite filter coefficient");
            }
            if stage.mixtures.iter().any(|m| m.config() != &self.rbf) {
                return bad("influence function config differs from the model");
            }
            if stage.mixtures.iter().flat_map(|m| m.weights()).any(|v| !v.is_finite()) {
                return bad("non-finite RBF weight");
            }
            match (self.task.has_reaction(), stage.log_lambda) {
                (true, None) => return bad("denoising stage without reaction weight"),
                (false, Some(_)) => return bad("deblocking stage with a reaction weight"),
                (true, Some(l)) if !l.is_finite() => return bad("non-finite reaction weight"),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Plain initialization: DCT atoms as filters, influence functions fitted to
/// `2z / (1 + z²)`, `λ = 0.1`; identical in every stage.
pub fn init_model(config: &ModelConfig) -> Result<TrdModel> {
    let stage = plain_stage(config)?;
    let model = TrdModel {
        task: config.task,
        filter_size: config.filter_size,
        filters: config.filters,
        rbf: config.rbf,
        stages: vec![stage; config.stages],
        trained_mode: TrainedMode::Greedy,
    };
    model.validate()?;
    Ok(model)
}

pub(crate) fn plain_stage(config: &ModelConfig) -> Result<StageParams> {
    let basis = build_basis(config.filter_size)?;
    if config.filters > basis.len() {
        return Err(Error::TooManyFilters {
            filters: config.filters,
            m: config.filter_size,
            available: basis.len(),
        });
    }
    let phi = fit_plain(config.rbf)?;
    let coeffs = (0..config.filters)
        .map(|i| {
            let mut c = vec![0.0; basis.len()];
            c[i] = 1.0;
            c
        })
        .collect();
    Ok(StageParams {
        coeffs,
        mixtures: vec![phi; config.filters],
        log_lambda: config.task.has_reaction().then(|| libm::log(INITIAL_LAMBDA)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::influence::RbfKind;

    #[test]
    fn basis_counts() {
        for m in SUPPORTED_FILTER_SIZES {
            assert_eq!(build_basis(m).unwrap().len(), m * m - 1);
        }
        assert_eq!(build_basis(4), Err(Error::UnsupportedFilterSize(4)));
    }

    #[test]
    fn basis_is_orthonormal_and_zero_mean() {
        for m in [3, 5, 7] {
            let basis = build_basis(m).unwrap();
            for (i, a) in basis.atoms().iter().enumerate() {
                assert!(a.sum().abs() < 1e-10);
                for (j, b) in basis.atoms().iter().enumerate() {
                    let g: f64 = a.taps().iter().zip(b.taps()).map(|(x, y)| x * y).sum();
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((g - e).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn assemble_unit_and_zero() {
        let basis = build_basis(3).unwrap();
        let mut c = vec![0.0; 8];
        c[5] = 1.0;
        assert_eq!(basis.assemble_filter(&c).unwrap().taps(), basis.atoms()[5].taps());
        assert!(basis.assemble_filter(&[0.0; 8]).unwrap().taps().iter().all(|&t| t == 0.0));
        assert!(basis.assemble_filter(&[0.0; 7]).is_err());
    }

    #[test]
    fn assemble_matches_direct_sum() {
        let basis = build_basis(5).unwrap();
        let c: Vec<f64> = (0..24).map(|i| libm::sin(i as f64 * 1.7) * 3.0).collect();
        let k = basis.assemble_filter(&c).unwrap();
        for t in 0..25 {
            let direct: f64 = c.iter().zip(basis.atoms()).map(|(cb, a)| cb * a.taps()[t]).sum();
            assert!((k.taps()[t] - direct).abs() < 1e-12);
        }
    }

    fn config(m: usize, n: usize) -> ModelConfig {
        ModelConfig {
            task: Task::Denoise { sigma: 25.0 },
            stages: 2,
            filter_size: m,
            filters: n,
            rbf: RbfConfig::new(RbfKind::Gaussian, 63, 310.0).unwrap(),
        }
    }

    #[test]
    fn init_filter_counts() {
        let m5 = init_model(&config(5, 24)).unwrap();
        assert!(m5.stages.iter().all(|s| s.coeffs.len() == 24));
        let m7 = init_model(&config(7, 48)).unwrap();
        assert!(m7.stages.iter().all(|s| s.coeffs.len() == 48));
        assert!(matches!(init_model(&config(3, 9)), Err(Error::TooManyFilters { .. })));
    }

    #[test]
    fn init_reaction_weight() {
        let m = init_model(&config(3, 8)).unwrap();
        assert!((m.stages[0].lambda().unwrap() - 0.1).abs() < 1e-15);
        let mut cfg = config(3, 8);
        cfg.task = Task::Deblock { quality: 10 };
        assert!(init_model(&cfg).unwrap().stages[1].log_lambda.is_none());
    }

    #[test]
    fn validate_catches_broken_models() {
        let mut m = init_model(&config(3, 8)).unwrap();
        m.validate().unwrap();
        m.stages[1].coeffs[0].pop();
        assert!(m.validate().is_err());
        let mut m = init_model(&config(3, 8)).unwrap();
        m.filters = 9;
        assert!(matches!(m.validate(), Err(Error::TooManyFilters { .. })));
        let mut m = init_model(&config(3, 8)).unwrap();
        m.stages[0].log_lambda = None;
        assert!(m.validate().is_err());
    }
}

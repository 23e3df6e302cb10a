//! Central finite-difference certification of analytic gradients.

use alloc::vec::Vec;

use super::objective::Objective;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|a − n| / max(1e-8, |a| + |n|)` over checked coordinates.
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    /// Coordinates whose ±h probe switched a non-smooth selection.
    pub excluded: Vec<usize>,
}

/// Relative error used throughout the certification.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    libm::fabs(analytic - numeric) / libm::fmax(1e-8, libm::fabs(analytic) + libm::fabs(numeric))
}

/// Compares the gradient of `objective` at `x` with central differences of
/// step `h`. With `coords` set only those coordinates are probed.
pub fn grad_check<O: Objective + ?Sized>(
    objective: &O,
    x: &[f64],
    h: f64,
    coords: Option<&[usize]>,
) -> Result<GradCheckReport> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidArgument(alloc::format!("step must be positive, got {h}")));
    }
    let (_, analytic) = objective.value_grad(x)?;
    let (_, base_active) = objective.probe(x)?;
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: None,
        checked: 0,
        excluded: Vec::new(),
    };
    let mut xp = x.to_vec();
    for &j in coords {
        if j >= x.len() {
            return Err(Error::InvalidArgument(alloc::format!("coordinate {j} out of range")));
        }
        xp[j] = x[j] + h;
        let (fp, ap) = objective.probe(&xp)?;
        xp[j] = x[j] - h;
        let (fm, am) = objective.probe(&xp)?;
        xp[j] = x[j];
        if ap != base_active || am != base_active {
            report.excluded.push(j);
            continue;
        }
        let numeric = (fp - fm) / (2.0 * h);
        let err = rel_error(analytic[j], numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = libm::fmax(err, report.max_rel_error);
            report.worst_index = Some(j);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            3
        }

        fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let w = [1.0, 4.0, 0.25];
            let f = x.iter().zip(&w).map(|(v, w)| 0.5 * w * v * v).sum();
            Ok((f, x.iter().zip(&w).map(|(v, w)| w * v).collect()))
        }

        fn probe(&self, x: &[f64]) -> Result<(f64, Option<Vec<bool>>)> {
            Ok((self.value_grad(x)?.0, None))
        }
    }

    #[test]
    fn quadratic_is_exact() {
        let r = grad_check(&Quadratic, &[1.0, -2.0, 3.0], 1e-4, None).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.checked, 3);
        assert!(grad_check(&Quadratic, &[0.0; 3], 0.0, None).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(rel_error(0.0, 0.0), 0.0);
        assert!((rel_error(1.0, 3.0) - 0.5).abs() < 1e-15);
    }
}

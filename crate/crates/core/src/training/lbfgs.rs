//! Limited-memory BFGS with a strong Wolfe line search.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    pub c1: f64,
    pub c2: f64,
    /// Stop once `‖g‖ ≤ grad_tol · ‖g₀‖`.
    pub grad_tol: f64,
    /// Interpolation/bisection steps allowed inside one zoom phase.
    pub max_zoom: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200,
            c1: 1e-4,
            c2: 0.9,
            grad_tol: 1e-6,
            max_zoom: 30,
        }
    }
}

impl LbfgsConfig {
    pub fn with_max_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "Wolfe constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1,
                self.c2
            )));
        }
        if self.memory == 0 {
            return Err(Error::InvalidArgument("L-BFGS memory must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStatus {
    Converged,
    MaxIterations,
    /// No step satisfying the Wolfe conditions was found; the result is the
    /// best point seen.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Cost at the start and after every accepted step.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub status: LbfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[derive(Clone)]
struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept away
/// from the interval ends; falls back to bisection.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !hi.f.is_finite() || !hi.slope.is_finite() {
        return mid;
    }
    let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    if disc < 0.0 {
        return mid;
    }
    let d2 = libm::copysign(libm::sqrt(disc), b - a);
    let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if t.is_finite() && t > left + margin && t < right - margin {
        t
    } else {
        mid
    }
}

/// Minimizes `fg` from `x0`. `fg` returns the value and the gradient; a
/// non-finite value is treated as "too large" during line searches.
pub fn lbfgs_minimize<F>(mut fg: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let n = x0.len();
    let (f0, g0) = fg(x0);
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective is not finite at the starting point".into()));
    }
    if g0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: (n, 1),
            actual: (g0.len(), 1),
        });
    }
    let mut evaluations = 1;
    let mut x = x0.to_vec();
    let mut f = f0;
    let mut g = g0;
    let g0_norm = norm(&g);
    let mut history = Vec::from([f]);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;

    let status = loop {
        let gn = norm(&g);
        if gn <= cfg.grad_tol * g0_norm || gn == 0.0 {
            break LbfgsStatus::Converged;
        }
        if iterations >= cfg.max_iters {
            break LbfgsStatus::MaxIterations;
        }

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope0 = dot(&g, &d);
        if slope0.is_nan() || slope0 >= 0.0 {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope0 = -gn * gn;
        }
        let first = if pairs.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };

        let mut trial = |alpha: f64| {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let (ft, gt) = fg(&xt);
            let ft = if ft.is_finite() && gt.iter().all(|v| v.is_finite()) {
                ft
            } else {
                f64::INFINITY
            };
            let slope = if ft.is_finite() { dot(&gt, &d) } else { f64::NAN };
            Point {
                alpha,
                f: ft,
                g: gt,
                slope,
            }
        };

        let start = Point {
            alpha: 0.0,
            f,
            g: g.clone(),
            slope: slope0,
        };
        let armijo = |p: &Point| p.f.is_finite() && p.f <= f + cfg.c1 * p.alpha * slope0;
        let curvature = |p: &Point| libm::fabs(p.slope) <= -cfg.c2 * slope0;

        let mut accepted: Option<Point> = None;
        let mut prev = start;
        let mut alpha = first;
        let mut bracket: Option<(Point, Point)> = None;
        for i in 0..cfg.max_zoom {
            let p = trial(alpha);
            evaluations += 1;
            if !armijo(&p) || (i > 0 && p.f >= prev.f) {
                bracket = Some((prev.clone(), p));
                break;
            }
            if curvature(&p) {
                accepted = Some(p);
                break;
            }
            if p.slope >= 0.0 {
                bracket = Some((p, prev.clone()));
                break;
            }
            alpha = 2.0 * p.alpha;
            prev = p;
        }
        if accepted.is_none() {
            if let Some((mut lo, mut hi)) = bracket {
                for _ in 0..cfg.max_zoom {
                    let p = trial(interpolate(&lo, &hi));
                    evaluations += 1;
                    if !armijo(&p) || p.f >= lo.f {
                        hi = p;
                    } else {
                        if curvature(&p) {
                            accepted = Some(p);
                            break;
                        }
                        if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                            hi = lo;
                        }
                        lo = p;
                    }
                }
                // sufficient decrease without curvature still makes progress
                if accepted.is_none() && lo.alpha > 0.0 && lo.f < f {
                    accepted = Some(lo);
                }
            } else if prev.alpha > 0.0 && prev.f < f {
                accepted = Some(prev);
            }
        }

        let Some(p) = accepted else {
            break LbfgsStatus::LineSearchFailed;
        };
        let s: Vec<f64> = d.iter().map(|di| p.alpha * di).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        x.iter_mut().zip(&s).for_each(|(xi, si)| *xi += si);
        f = p.f;
        g = p.g;
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        history.push(f);
        iterations += 1;
    };

    Ok(LbfgsResult {
        grad_norm: norm(&g),
        x,
        f,
        iterations,
        history,
        evaluations,
        status,
    })
}

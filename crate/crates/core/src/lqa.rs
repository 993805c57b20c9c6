//! Local quadratic approximation baselines.
//!
//! Each iteration replaces the penalty by a quadratic through the current
//! iterate and maximizes the resulting ridge-penalized likelihood. The plain
//! variant deletes coordinates that fall below `eps0` (they never return);
//! the perturbed variant keeps every coordinate and adds `tau0` to the
//! denominator of the ridge coefficient.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::glm::{self, Dataset, Family};
use crate::linalg::{Cholesky, Matrix};
use crate::lla::penalized_loglik;
use crate::math::{max_abs, max_abs_diff};
use crate::penalty::{Penalty, PenaltyFamily};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Newton iterations per ridge maximization (non-Gaussian families).
    pub inner_max_iter: usize,
}

impl Default for LqaOptions {
    fn default() -> Self {
        LqaOptions {
            tol: 1e-8,
            max_iter: 1000,
            inner_max_iter: 100,
        }
    }
}

/// Relative default for the deletion threshold: `eps0 = 1e-8 * max |b0_j|`.
pub const DEFAULT_EPS0_RATIO: f64 = 1e-8;
/// Relative default for the perturbation: `tau0 = 1e-6 * max |b0_j|`.
pub const DEFAULT_TAU0_RATIO: f64 = 1e-6;
/// Perturbed-LQA coefficients below `1e-6 * max |beta_j|` are reported as 0.
pub const PERTURBED_ZERO_RATIO: f64 = 1e-6;

fn check_family(p: &Penalty, routine: &'static str) -> Result<()> {
    if matches!(p.family(), PenaltyFamily::Log) {
        return Err(Error::FamilyMismatch {
            routine,
            family: p.family().name(),
        });
    }
    Ok(())
}

/// Maximizes `l(b) - n * sum_j c_j b_j^2` over the coordinates in `active`
/// (others held at zero), starting from `start`.
pub fn ridge_maximize(
    d: &Dataset,
    active: &[usize],
    coef: &[f64],
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = d.n() as f64;
    let k = d.ncoef();
    let xa = d.design().select_columns(active);
    let ridge: Vec<f64> = active.iter().map(|&j| 2.0 * n * coef[j]).collect();
    let embed = |ba: &[f64]| -> Vec<f64> {
        let mut b = vec![0.0; k];
        for (&j, &v) in active.iter().zip(ba) {
            b[j] = v;
        }
        b
    };
    if active.is_empty() {
        return Ok(vec![0.0; k]);
    }
    let add_ridge = |h: &mut Matrix| {
        for (a, r) in ridge.iter().enumerate() {
            h.set(a, a, h.get(a, a) + r);
        }
    };
    if d.family() == Family::Gaussian {
        let mut h = xa.gram();
        add_ridge(&mut h);
        let ch = Cholesky::new(&h).ok_or(Error::SingularSystem)?;
        return Ok(embed(&ch.solve(&xa.tr_mul_vec(d.response()))));
    }
    let objective = |ba: &[f64]| -> Result<f64> {
        let pen: f64 = ba.iter().zip(&ridge).map(|(b, r)| 0.5 * r * b * b).sum();
        Ok(glm::loglik(d, &embed(ba))? - pen)
    };
    let mut ba: Vec<f64> = active.iter().map(|&j| start[j]).collect();
    let mut f = objective(&ba)?;
    let family = d.family();
    for _ in 0..max_iter {
        let eta = xa.mul_vec(&ba);
        let score: Vec<f64> = eta
            .iter()
            .zip(d.response())
            .map(|(&e, &y)| family.score_obs(e, y))
            .collect();
        let mut g = xa.tr_mul_vec(&score);
        for ((gi, r), b) in g.iter_mut().zip(&ridge).zip(&ba) {
            *gi -= r * b;
        }
        let w: Vec<f64> = eta.iter().map(|&e| family.curvature(e)).collect();
        let mut h = xa.weighted_gram(&w);
        add_ridge(&mut h);
        let step = Cholesky::new(&h).ok_or(Error::SingularSystem)?.solve(&g);
        let mut t = 1.0;
        let mut next = ba.clone();
        let mut accepted = false;
        for _ in 0..50 {
            for ((nx, b), s) in next.iter_mut().zip(&ba).zip(&step) {
                *nx = b + t * s;
            }
            let fnext = objective(&next)?;
            if fnext >= f - 1e-12 * (1.0 + f.abs()) {
                f = fnext;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(embed(&ba));
        }
        let change = max_abs_diff(&next, &ba);
        ba = next;
        if change <= tol {
            return Ok(embed(&ba));
        }
    }
    Err(Error::non_convergence("ridge Newton", max_iter))
}

fn start(d: &Dataset, b0: Option<&[f64]>) -> Result<Vec<f64>> {
    match b0 {
        Some(b) => {
            d.check_coef(b)?;
            Ok(b.to_vec())
        }
        None => glm::fit_mle(d),
    }
}

fn penalized_max(d: &Dataset, b: &[f64]) -> f64 {
    (0..d.ncoef())
        .filter(|&j| d.is_penalized(j))
        .map(|j| b[j].abs())
        .fold(0.0, f64::max)
}

/// LQA with the deletion rule: any penalized coordinate with
/// `|beta_j| < eps0` is set to zero and removed for good.
/// `eps0 = None` uses `1e-8 * max |b0_j|`.
pub fn lqa_fit(
    d: &Dataset,
    p: &Penalty,
    b0: Option<&[f64]>,
    eps0: Option<f64>,
    opts: &LqaOptions,
) -> Result<FitResult> {
    check_family(p, "lqa_fit")?;
    let mut beta = start(d, b0)?;
    let eps0 = eps0.unwrap_or(DEFAULT_EPS0_RATIO * penalized_max(d, &beta));
    if !(eps0 > 0.0) && penalized_max(d, &beta) > 0.0 {
        return Err(Error::InvalidParameter(alloc::format!("eps0 must be positive, got {eps0}")));
    }
    let k = d.ncoef();
    let mut deleted = vec![false; k];
    let delete_small = |beta: &mut [f64], deleted: &mut [bool]| {
        for j in 0..k {
            if d.is_penalized(j) && !deleted[j] && beta[j].abs() < eps0 {
                beta[j] = 0.0;
                deleted[j] = true;
            }
        }
    };
    delete_small(&mut beta, &mut deleted);
    let mut trace = vec![penalized_loglik(d, p, &beta)?];
    for it in 1..=opts.max_iter {
        let active: Vec<usize> = (0..k).filter(|&j| !deleted[j]).collect();
        let coef: Vec<f64> = (0..k)
            .map(|j| if d.is_penalized(j) && !deleted[j] { p.lqa_coefficient(beta[j].abs(), 0.0) } else { 0.0 })
            .collect();
        let mut next = ridge_maximize(d, &active, &coef, &beta, opts.tol / 10.0, opts.inner_max_iter)?;
        delete_small(&mut next, &mut deleted);
        trace.push(penalized_loglik(d, p, &next)?);
        let change = max_abs_diff(&next, &beta);
        beta = next;
        if change <= opts.tol {
            return Ok(FitResult::new(beta, d.has_intercept(), p.lambda(), Method::Lqa)
                .with_trace(trace, it, true));
        }
    }
    Err(Error::NonConvergence {
        routine: "lqa_fit",
        iterations: opts.max_iter,
        partial: Some(Box::new(
            FitResult::new(beta, d.has_intercept(), p.lambda(), Method::Lqa)
                .with_trace(trace, opts.max_iter, false),
        )),
    })
}

/// `l(beta) - n * sum_j p_{lambda,tau}(|beta_j|)`, the objective that the
/// perturbed LQA increases monotonically.
pub fn perturbed_objective(d: &Dataset, p: &Penalty, tau0: f64, beta: &[f64]) -> Result<f64> {
    let ll = glm::loglik(d, beta)?;
    let pen: f64 = (0..d.ncoef())
        .filter(|&j| d.is_penalized(j))
        .map(|j| p.perturbed_value(beta[j].abs(), tau0))
        .sum();
    Ok(ll - d.n() as f64 * pen)
}

/// Perturbed LQA: ridge coefficients `p'(|b|) / (2(|b| + tau0))`, no
/// deletion. At convergence coefficients below `1e-6 * max |beta_j|` are
/// reported as exact zeros. `tau0 = None` uses `1e-6 * max |b0_j|`.
pub fn perturbed_lqa_fit(
    d: &Dataset,
    p: &Penalty,
    b0: Option<&[f64]>,
    tau0: Option<f64>,
    opts: &LqaOptions,
) -> Result<FitResult> {
    check_family(p, "perturbed_lqa_fit")?;
    let mut beta = start(d, b0)?;
    let tau0 = tau0.unwrap_or(DEFAULT_TAU0_RATIO * penalized_max(d, &beta));
    if !(tau0 > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("tau0 must be positive, got {tau0}")));
    }
    let k = d.ncoef();
    let active: Vec<usize> = (0..k).collect();
    let mut trace = vec![perturbed_objective(d, p, tau0, &beta)?];
    let mut converged = false;
    let mut iterations = opts.max_iter;
    for it in 1..=opts.max_iter {
        let coef: Vec<f64> = (0..k)
            .map(|j| if d.is_penalized(j) { p.lqa_coefficient(beta[j].abs(), tau0) } else { 0.0 })
            .collect();
        let next = ridge_maximize(d, &active, &coef, &beta, opts.tol / 10.0, opts.inner_max_iter)?;
        trace.push(perturbed_objective(d, p, tau0, &next)?);
        let change = max_abs_diff(&next, &beta);
        beta = next;
        if change <= opts.tol {
            converged = true;
            iterations = it;
            break;
        }
    }
    let cutoff = PERTURBED_ZERO_RATIO * max_abs(&beta[usize::from(d.has_intercept())..]);
    for j in 0..k {
        if d.is_penalized(j) && beta[j].abs() < cutoff {
            beta[j] = 0.0;
        }
    }
    let fit = FitResult::new(beta, d.has_intercept(), p.lambda(), Method::PerturbedLqa)
        .with_trace(trace, iterations, converged);
    if converged {
        Ok(fit)
    } else {
        Err(Error::NonConvergence {
            routine: "perturbed_lqa_fit",
            iterations,
            partial: Some(Box::new(fit)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal(z: &[f64]) -> Dataset {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ]);
        let y = x.mul_vec(z);
        Dataset::new(x, y, Family::Gaussian, false).unwrap()
    }

    #[test]
    fn zero_lambda_is_mle() {
        let d = orthonormal(&[3.0, 0.2, -1.0]);
        let opts = LqaOptions::default();
        for fit in [
            lqa_fit(&d, &Penalty::scad(0.0, 3.7).unwrap(), None, None, &opts).unwrap(),
            perturbed_lqa_fit(&d, &Penalty::scad(0.0, 3.7).unwrap(), None, None, &opts).unwrap(),
        ] {
            for (a, b) in fit.beta.iter().zip(&[3.0, 0.2, -1.0]) {
                assert!((a - b).abs() < 1e-10);
            }
            assert_eq!(fit.support, vec![0, 1, 2]);
        }
    }

    #[test]
    fn l1_fixed_point_is_soft_threshold() {
        // beta = z / (1 + lambda / |beta|) has the root |z| - lambda.
        let d = orthonormal(&[3.0, 0.5, -2.0]);
        let fit = lqa_fit(&d, &Penalty::l1(1.0).unwrap(), None, None, &LqaOptions::default()).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-6);
        assert_eq!(fit.beta[1], 0.0);
        assert!((fit.beta[2] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn deleted_coordinate_never_returns() {
        let d = orthonormal(&[3.0, 0.5, -2.0]);
        let b0 = [3.0, 1e-9, -2.0];
        let fit = lqa_fit(&d, &Penalty::scad(0.1, 3.7).unwrap(), Some(&b0), Some(1e-6), &LqaOptions::default())
            .unwrap();
        // without the deletion the weak penalty would keep 0.5
        assert_eq!(fit.beta[1], 0.0);
        assert_eq!(fit.support, vec![0, 2]);
    }

    #[test]
    fn one_dimensional_perturbed_limit() {
        let x = Matrix::from_rows(&[vec![1.0]]);
        let d = Dataset::new(x, vec![3.0], Family::Gaussian, false).unwrap();
        let fit = perturbed_lqa_fit(&d, &Penalty::l1(1.0).unwrap(), None, Some(1e-6), &LqaOptions::default())
            .unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn huge_perturbation_recovers_mle() {
        let d = orthonormal(&[3.0, 0.5, -2.0]);
        let fit = perturbed_lqa_fit(&d, &Penalty::l1(1.0).unwrap(), None, Some(1e9), &LqaOptions::default())
            .unwrap();
        for (a, b) in fit.beta.iter().zip(&[3.0, 0.5, -2.0]) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn log_penalty_rejected() {
        let d = orthonormal(&[3.0, 0.5, -2.0]);
        let p = Penalty::log(1.0).unwrap();
        assert!(matches!(lqa_fit(&d, &p, None, None, &LqaOptions::default()), Err(Error::FamilyMismatch { .. })));
        assert!(matches!(
            perturbed_lqa_fit(&d, &p, None, None, &LqaOptions::default()),
            Err(Error::FamilyMismatch { .. })
        ));
    }
}

//! Likelihood families, their derivatives in the linear predictor, and the
//! unpenalized maximum likelihood fit that seeds every one-step estimator.
//!
//! Gaussian log-likelihood is `-(y - mu)^2 / 2` per observation, so its
//! curvature weight is 1 and the one-step objective for least squares and
//! for general likelihoods coincide exactly. Implementations that use the
//! unhalved squared loss carry a curvature of 2 and a lambda that differs by
//! that factor.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::math::{exp, floor, ln_gamma, max_abs, sigmoid, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gaussian,
    Logistic,
    Poisson,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        }
    }

    /// `l_i` as a function of the linear predictor.
    #[inline]
    pub fn loglik_obs(&self, eta: f64, y: f64) -> f64 {
        match self {
            Family::Gaussian => -0.5 * (y - eta) * (y - eta),
            Family::Logistic => y * eta - softplus(eta),
            Family::Poisson => y * eta - exp(eta) - ln_gamma(y + 1.0),
        }
    }

    /// `d l_i / d eta`
    #[inline]
    pub fn score_obs(&self, eta: f64, y: f64) -> f64 {
        y - self.mean(eta)
    }

    /// `-d^2 l_i / d eta^2`
    #[inline]
    pub fn curvature(&self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Logistic => {
                let p = sigmoid(eta);
                p * (1.0 - p)
            }
            Family::Poisson => exp(eta),
        }
    }

    /// Conditional mean `E[y | eta]`.
    #[inline]
    pub fn mean(&self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Logistic => sigmoid(eta),
            Family::Poisson => exp(eta),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "linear" => Ok(Family::Gaussian),
            "logistic" | "binomial" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

/// Design, response and likelihood family.
///
/// With `intercept` set, a column of ones is stored as column 0 of
/// [`Dataset::design`]; that coordinate is never penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    family: Family,
    intercept: bool,
}

impl Dataset {
    /// `predictors` is the n x p matrix without an intercept column.
    pub fn new(predictors: Matrix, response: Vec<f64>, family: Family, intercept: bool) -> Result<Self> {
        let n = predictors.nrows();
        let p = predictors.ncols();
        if n == 0 {
            return Err(Error::InvalidData(String::from("no observations")));
        }
        if p == 0 && !intercept {
            return Err(Error::InvalidData(String::from("no predictors")));
        }
        if response.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: n,
                found: response.len(),
            });
        }
        if !predictors.is_finite() {
            return Err(Error::InvalidData(String::from("design has non-finite entries")));
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("response row {i} is not finite")));
        }
        match family {
            Family::Logistic => {
                if let Some(i) = response.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::InvalidData(format!(
                        "logistic response must be 0 or 1 (row {i} is {})",
                        response[i]
                    )));
                }
            }
            Family::Poisson => {
                if let Some(i) = response.iter().position(|&v| v < 0.0 || floor(v) != v) {
                    return Err(Error::InvalidData(format!(
                        "Poisson response must be a nonnegative integer (row {i} is {})",
                        response[i]
                    )));
                }
            }
            Family::Gaussian => {}
        }
        let x = if intercept {
            let mut cols = Vec::with_capacity(p + 1);
            cols.push(vec![1.0; n]);
            for j in 0..p {
                cols.push(predictors.col(j).to_vec());
            }
            Matrix::from_columns(&cols)
        } else {
            predictors
        };
        Ok(Dataset {
            x,
            y: response,
            family,
            intercept,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of predictors, intercept excluded.
    #[inline]
    pub fn p(&self) -> usize {
        self.x.ncols() - usize::from(self.intercept)
    }

    /// Length of a coefficient vector (predictors plus intercept slot).
    #[inline]
    pub fn ncoef(&self) -> usize {
        self.x.ncols()
    }

    /// The design as fitted, including the intercept column when present.
    #[inline]
    pub fn design(&self) -> &Matrix {
        &self.x
    }

    #[inline]
    pub fn response(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn family(&self) -> Family {
        self.family
    }

    #[inline]
    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    /// Whether coefficient slot `j` carries a penalty.
    #[inline]
    pub fn is_penalized(&self, j: usize) -> bool {
        !(self.intercept && j == 0)
    }

    /// The predictor matrix without the intercept column.
    pub fn predictors(&self) -> Matrix {
        let offset = usize::from(self.intercept);
        let idx: Vec<usize> = (offset..self.x.ncols()).collect();
        self.x.select_columns(&idx)
    }

    /// Dataset restricted to the given observations.
    pub fn subset_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            family: self.family,
            intercept: self.intercept,
        }
    }

    /// Dataset keeping only the listed predictors (0-based, intercept kept).
    pub fn subset_predictors(&self, predictors: &[usize]) -> Dataset {
        let offset = usize::from(self.intercept);
        let mut idx = Vec::with_capacity(predictors.len() + offset);
        if self.intercept {
            idx.push(0);
        }
        idx.extend(predictors.iter().map(|j| j + offset));
        Dataset {
            x: self.x.select_columns(&idx),
            y: self.y.clone(),
            family: self.family,
            intercept: self.intercept,
        }
    }

    pub(crate) fn check_coef(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.ncoef() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.ncoef(),
                found: b.len(),
            });
        }
        Ok(())
    }
}

pub fn linear_predictor(d: &Dataset, b: &[f64]) -> Result<Vec<f64>> {
    d.check_coef(b)?;
    Ok(d.x.mul_vec(b))
}

/// `l(beta) = sum_i l_i(x_i' beta)`
pub fn loglik(d: &Dataset, b: &[f64]) -> Result<f64> {
    let eta = linear_predictor(d, b)?;
    Ok(eta
        .iter()
        .zip(&d.y)
        .map(|(&e, &y)| d.family.loglik_obs(e, y))
        .sum())
}

/// `X' (y - mu)`
pub fn gradient(d: &Dataset, b: &[f64]) -> Result<Vec<f64>> {
    let eta = linear_predictor(d, b)?;
    let r: Vec<f64> = eta
        .iter()
        .zip(&d.y)
        .map(|(&e, &y)| d.family.score_obs(e, y))
        .collect();
    Ok(d.x.tr_mul_vec(&r))
}

/// Diagonal of `D`, `D_ii = -l_i''(mu_i)` at `mu_i = x_i' beta`.
pub fn curvature_weights(d: &Dataset, b: &[f64]) -> Result<Vec<f64>> {
    let eta = linear_predictor(d, b)?;
    Ok(eta.iter().map(|&e| d.family.curvature(e)).collect())
}

/// `-Hessian of l = X' D X`
pub fn neg_hessian(d: &Dataset, b: &[f64]) -> Result<Matrix> {
    let w = curvature_weights(d, b)?;
    Ok(d.x.weighted_gram(&w))
}

/// Out-of-sample loss used for cross-validation: mean squared error for the
/// Gaussian family, mean negative log-likelihood otherwise.
pub fn validation_loss(d: &Dataset, b: &[f64]) -> Result<f64> {
    let n = d.n() as f64;
    match d.family {
        Family::Gaussian => {
            let eta = linear_predictor(d, b)?;
            Ok(eta
                .iter()
                .zip(&d.y)
                .map(|(e, y)| (y - e) * (y - e))
                .sum::<f64>()
                / n)
        }
        _ => Ok(-loglik(d, b)? / n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Stop once `max |gradient| <= grad_tol`.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// On a singular Newton system, add `1e-6 * mean(diag(X'DX)) * I`
    /// instead of failing.
    pub ridge_fallback: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            grad_tol: 1e-10,
            max_iter: 100,
            ridge_fallback: true,
        }
    }
}

pub fn fit_mle(d: &Dataset) -> Result<Vec<f64>> {
    fit_mle_with(d, &MleOptions::default())
}

fn ridge_solve(h: &Matrix, g: &[f64], allow: bool) -> Result<Vec<f64>> {
    if let Some(ch) = Cholesky::new(h) {
        return Ok(ch.solve(g));
    }
    if !allow {
        return Err(Error::SingularDesign);
    }
    let k = h.nrows();
    let mean_diag = (h.trace() / k as f64).max(f64::MIN_POSITIVE);
    let mut hr = h.clone();
    let mut ridge = 1e-6 * mean_diag;
    // A rank-deficient Gram matrix is semidefinite, so the first ridge
    // normally suffices; grow it only for badly conditioned inputs.
    for _ in 0..12 {
        for i in 0..k {
            hr.set(i, i, h.get(i, i) + ridge);
        }
        if let Some(ch) = Cholesky::new(&hr) {
            log::warn!("singular X'DX in maximum likelihood fit; applied ridge {ridge:e}");
            return Ok(ch.solve(g));
        }
        ridge *= 10.0;
    }
    Err(Error::SingularDesign)
}

/// Unpenalized maximum likelihood by Newton-Raphson with step halving.
/// The Gaussian case is a single linear solve.
pub fn fit_mle_with(d: &Dataset, opts: &MleOptions) -> Result<Vec<f64>> {
    let k = d.ncoef();
    if d.family == Family::Gaussian {
        let g = d.x.gram();
        let c = d.x.tr_mul_vec(&d.y);
        return ridge_solve(&g, &c, opts.ridge_fallback);
    }
    let mut beta = vec![0.0; k];
    let mut ll = loglik(d, &beta)?;
    for _ in 0..opts.max_iter {
        let grad = gradient(d, &beta)?;
        if max_abs(&grad) <= opts.grad_tol {
            return Ok(beta);
        }
        let h = neg_hessian(d, &beta)?;
        let step = ridge_solve(&h, &grad, opts.ridge_fallback)?;
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = beta.clone();
        for _ in 0..60 {
            for ((tr, b), s) in trial.iter_mut().zip(&beta).zip(&step) {
                *tr = b + t * s;
            }
            let trial_ll = loglik(d, &trial)?;
            if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * (1.0 + ll.abs()) {
                ll = trial_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent direction survives rounding: we are at the optimum.
            return Ok(beta);
        }
        let change = crate::math::max_abs_diff(&trial, &beta);
        beta.copy_from_slice(&trial);
        if change <= 1e-13 * (1.0 + max_abs(&beta)) {
            return Ok(beta);
        }
    }
    let grad = gradient(d, &beta)?;
    if max_abs(&grad) <= 1e-8 * (1.0 + ll.abs()) {
        return Ok(beta);
    }
    Err(Error::non_convergence("fit_mle", opts.max_iter))
}

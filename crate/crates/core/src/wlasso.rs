//! Weighted-L1 least squares,
//!
//! ```text
//! minimize  1/2 ||y - X b||^2 + sum_j v_j |b_j|,   v_j in [0, +inf]
//! ```
//!
//! solved by cyclic coordinate descent with covariance updates and
//! active-set sweeps. `v_j = +inf` pins a coordinate at zero (it is removed
//! before iterating); `v_j = 0` leaves it unpenalized. Every one-step,
//! k-step and full LLA estimator reduces to this problem.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::math::{dot, exp, ln};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
pub const DEFAULT_GRID_POINTS: usize = 100;
pub const DEFAULT_GRID_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct WlassoProblem {
    design: Matrix,
    response: Vec<f64>,
    weights: Vec<f64>,
}

impl WlassoProblem {
    pub fn new(design: Matrix, response: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if response.len() != design.nrows() {
            return Err(Error::DimensionMismatch {
                what: "working response",
                expected: design.nrows(),
                found: response.len(),
            });
        }
        if weights.len() != design.ncols() {
            return Err(Error::DimensionMismatch {
                what: "penalty weights",
                expected: design.ncols(),
                found: weights.len(),
            });
        }
        if !design.is_finite() || response.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("working data has non-finite entries")));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("penalty weight {w} is negative")));
        }
        Ok(WlassoProblem {
            design,
            response,
            weights,
        })
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `1/2 ||y - X b||^2 + sum_j v_j |b_j|`, with `inf * 0 = 0`.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let fitted = self.design.mul_vec(beta);
        let rss: f64 = self
            .response
            .iter()
            .zip(&fitted)
            .map(|(y, f)| (y - f) * (y - f))
            .sum();
        0.5 * rss + l1_term(&self.weights, beta)
    }
}

fn l1_term(weights: &[f64], beta: &[f64]) -> f64 {
    weights
        .iter()
        .zip(beta)
        .filter(|(_, b)| **b != 0.0)
        .map(|(w, b)| w * b.abs())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlassoSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub sweeps: usize,
    /// Objective after each sweep; filled only when
    /// [`WlassoOptions::record_objective`] is set.
    pub sweep_objectives: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlassoOptions {
    /// Largest coefficient change in a sweep that counts as converged.
    pub tol: f64,
    pub max_sweeps: usize,
    pub record_objective: bool,
}

impl Default for WlassoOptions {
    fn default() -> Self {
        WlassoOptions {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            record_objective: false,
        }
    }
}

impl WlassoOptions {
    pub fn with_tol(tol: f64) -> Self {
        WlassoOptions {
            tol,
            ..Self::default()
        }
    }
}

/// Gram-form state for the finite-weight coordinates of one design.
struct Covariance {
    /// Indices into the full coefficient vector.
    active: Vec<usize>,
    gram: Matrix,
    xty: Vec<f64>,
    yty: f64,
}

impl Covariance {
    fn new(design: &Matrix, response: &[f64], active: Vec<usize>) -> Self {
        let sub = design.select_columns(&active);
        Covariance {
            gram: sub.gram(),
            xty: sub.tr_mul_vec(response),
            yty: dot(response, response),
            active,
        }
    }

    fn objective(&self, beta: &[f64], weights: &[f64]) -> f64 {
        let gb = self.gram.mul_vec(beta);
        0.5 * self.yty - dot(&self.xty, beta) + 0.5 * dot(beta, &gb) + l1_term(weights, beta)
    }

    fn residual_correlation(&self, beta: &[f64]) -> Vec<f64> {
        let gb = self.gram.mul_vec(beta);
        self.xty.iter().zip(&gb).map(|(c, g)| c - g).collect()
    }
}

fn kkt_violation(r: f64, w: f64, b: f64) -> f64 {
    if b == 0.0 {
        (r.abs() - w).max(0.0)
    } else if b > 0.0 {
        (r - w).abs()
    } else {
        (r + w).abs()
    }
}

#[inline]
fn soft_threshold(z: f64, w: f64) -> f64 {
    if z > w {
        z - w
    } else if z < -w {
        z + w
    } else {
        0.0
    }
}

/// Coordinate descent on the active block. `beta` and `weights` are indexed
/// by position in `cov.active`. Returns the number of sweeps.
fn descend(
    cov: &Covariance,
    weights: &[f64],
    beta: &mut [f64],
    opts: &WlassoOptions,
    trace: &mut Vec<f64>,
) -> Result<usize> {
    let k = beta.len();
    let mut r = cov.residual_correlation(beta);
    let g = &cov.gram;
    let mut sweeps = 0;
    let mut full = true;
    let mut last_kkt = f64::INFINITY;

    let update = |j: usize, beta: &mut [f64], r: &mut [f64]| -> f64 {
        let gjj = g.get(j, j);
        if gjj <= 0.0 {
            return 0.0;
        }
        let z = r[j] + gjj * beta[j];
        let new = soft_threshold(z, weights[j]) / gjj;
        let delta = new - beta[j];
        if delta != 0.0 {
            beta[j] = new;
            for (i, ri) in r.iter_mut().enumerate() {
                *ri -= delta * g.get(i, j);
            }
        }
        delta.abs()
    };

    loop {
        if sweeps >= opts.max_sweeps {
            return Err(Error::non_convergence("weighted lasso", sweeps));
        }
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..k {
            if full || beta[j] != 0.0 {
                max_change = max_change.max(update(j, beta, &mut r));
            }
        }
        if opts.record_objective {
            trace.push(cov.objective(beta, weights));
        }
        if max_change > opts.tol {
            // keep iterating on the nonzero set until it settles
            full = false;
            continue;
        }
        if !full {
            full = true;
            continue;
        }
        // Converged on a full sweep: confirm stationarity with fresh
        // correlations so that incremental drift cannot fake it.
        r = cov.residual_correlation(beta);
        let kkt = (0..k).fold(0.0_f64, |m, j| {
            if g.get(j, j) <= 0.0 {
                m
            } else {
                m.max(kkt_violation(r[j], weights[j], beta[j]))
            }
        });
        // A fixed point, or no progress at rounding level, ends the loop.
        if kkt <= 10.0 * opts.tol || max_change == 0.0 || kkt >= last_kkt {
            return Ok(sweeps);
        }
        last_kkt = kkt;
    }
}

fn finite_coordinates(weights: &[f64]) -> Vec<usize> {
    (0..weights.len()).filter(|&j| weights[j].is_finite()).collect()
}

pub fn solve(prob: &WlassoProblem, tol: f64) -> Result<WlassoSolution> {
    solve_with(prob, &WlassoOptions::with_tol(tol), None)
}

/// Solves one problem, optionally warm-started from `init`.
pub fn solve_with(
    prob: &WlassoProblem,
    opts: &WlassoOptions,
    init: Option<&[f64]>,
) -> Result<WlassoSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive")));
    }
    let p = prob.design.ncols();
    if let Some(b) = init {
        if b.len() != p {
            return Err(Error::DimensionMismatch {
                what: "warm start",
                expected: p,
                found: b.len(),
            });
        }
    }
    let cov = Covariance::new(&prob.design, &prob.response, finite_coordinates(&prob.weights));
    solve_covariance(prob, &cov, opts, init)
}

fn solve_covariance(
    prob: &WlassoProblem,
    cov: &Covariance,
    opts: &WlassoOptions,
    init: Option<&[f64]>,
) -> Result<WlassoSolution> {
    let weights: Vec<f64> = cov.active.iter().map(|&j| prob.weights[j]).collect();
    let mut beta_a: Vec<f64> = match init {
        Some(b) => cov.active.iter().map(|&j| b[j]).collect(),
        None => vec![0.0; cov.active.len()],
    };
    // zero-norm columns stay at zero
    for (a, b) in beta_a.iter_mut().enumerate() {
        if cov.gram.get(a, a) <= 0.0 {
            *b = 0.0;
        }
    }
    let mut trace = Vec::new();
    let sweeps = descend(cov, &weights, &mut beta_a, opts, &mut trace)?;
    let mut beta = vec![0.0; prob.design.ncols()];
    for (a, &j) in cov.active.iter().enumerate() {
        beta[j] = beta_a[a];
    }
    Ok(WlassoSolution {
        objective: prob.objective(&beta),
        kkt_residual: certify_kkt(prob, &beta),
        beta,
        sweeps,
        sweep_objectives: trace,
    })
}

/// Largest subgradient-optimality violation of `beta`:
/// `(|g_j| - v_j)_+` where `beta_j = 0` and `|g_j - v_j sign(beta_j)|`
/// elsewhere, with `g = X'(y - X beta)`. Zero means optimal.
pub fn certify_kkt(prob: &WlassoProblem, beta: &[f64]) -> f64 {
    let fitted = prob.design.mul_vec(beta);
    let resid: Vec<f64> = prob.response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let g = prob.design.tr_mul_vec(&resid);
    g.iter()
        .zip(&prob.weights)
        .zip(beta)
        .fold(0.0_f64, |m, ((&gj, &w), &b)| {
            if w.is_infinite() {
                if b == 0.0 {
                    m
                } else {
                    f64::INFINITY
                }
            } else {
                m.max(kkt_violation(gj, w, b))
            }
        })
}

/// Smallest lambda at which every coordinate with a positive finite profile
/// weight `u_j` is zero, for weights `lambda * u_j`. Coordinates with
/// `u_j = 0` are first fitted by least squares.
pub fn lambda_max(design: &Matrix, response: &[f64], profile: &[f64]) -> f64 {
    let free: Vec<usize> = (0..profile.len()).filter(|&j| profile[j] == 0.0).collect();
    let resid: Vec<f64> = if free.is_empty() {
        response.to_vec()
    } else {
        let xf = design.select_columns(&free);
        let (b, _) = least_squares(&xf, response);
        let f = xf.mul_vec(&b);
        response.iter().zip(&f).map(|(y, f)| y - f).collect()
    };
    (0..profile.len())
        .filter(|&j| profile[j] > 0.0 && profile[j].is_finite())
        .map(|j| dot(design.col(j), &resid).abs() / profile[j])
        .fold(0.0, f64::max)
}

/// `points` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
pub fn default_grid(lambda_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    if points <= 1 || !(lambda_max > 0.0) {
        return vec![lambda_max];
    }
    let lo = ln(ratio);
    (0..points)
        .map(|i| {
            if i == 0 {
                lambda_max
            } else {
                lambda_max * exp(lo * i as f64 / (points - 1) as f64)
            }
        })
        .collect()
}

/// Solutions for weights `lambda * u_j` along a strictly descending grid,
/// each warm-started from the previous one.
pub fn solve_path(
    design: &Matrix,
    response: &[f64],
    profile: &[f64],
    grid: &[f64],
    opts: &WlassoOptions,
) -> Result<Vec<WlassoSolution>> {
    if grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter(format!("lambda grid must be strictly descending")));
    }
    if grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidParameter(format!("lambda grid must be nonnegative")));
    }
    let template = WlassoProblem::new(design.clone(), response.to_vec(), profile.to_vec())?;
    let cov = Covariance::new(design, response, finite_coordinates(profile));
    let mut out: Vec<WlassoSolution> = Vec::with_capacity(grid.len());
    for &lam in grid {
        let weights = profile
            .iter()
            .map(|&u| if u.is_infinite() || u == 0.0 { u } else { lam * u })
            .collect();
        let prob = WlassoProblem {
            weights,
            ..template.clone()
        };
        let warm = out.last().map(|s| s.beta.clone());
        out.push(solve_covariance(&prob, &cov, opts, warm.as_deref())?);
    }
    Ok(out)
}

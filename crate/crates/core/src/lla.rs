//! Local linear approximation estimators: one-step, k-step and the fully
//! iterative LLA.
//!
//! Each LLA step replaces the penalty by its tangent at the current iterate,
//! which turns the problem into a weighted-L1 fit. The one-step estimator
//! expands the log-likelihood to second order at the MLE, so the step is a
//! plain weighted lasso on working data:
//!
//! * separable penalties (`lambda * p(t)`: bridge, log, L1) rescale column
//!   `j` by `1 / p'(|b0_j|)` and solve a lasso at level `n * lambda`;
//! * SCAD can have `p' = 0`; those coordinates form the unpenalized block
//!   `U`, are projected out, and are recovered by a least-squares back-solve.
//!   Penalized columns are rescaled by `lambda / p'_lambda(|b0_j|)`.
//!
//! An unpenalized intercept always joins `U`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::glm::{self, Dataset};
use crate::linalg::{least_squares, Matrix};
use crate::math::{max_abs_diff, sqrt};
use crate::penalty::{Penalty, PenaltyFamily};
use crate::wlasso::{self, WlassoOptions, WlassoProblem};

/// Derivative ratios beyond this are treated as infinite: the coordinate is
/// pinned (separable families) or treated as unpenalized (SCAD, where the
/// ratio is `lambda / p'_lambda`).
pub const WEIGHT_CAP: f64 = 1e12;

/// Smallest curvature weight used when forming working data.
const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlaOptions {
    /// Outer convergence: max coefficient change between iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Coefficient-change tolerance of the inner weighted-lasso solves.
    pub inner_tol: f64,
    pub max_sweeps: usize,
}

impl Default for LlaOptions {
    fn default() -> Self {
        LlaOptions {
            tol: 1e-8,
            max_iter: 100,
            inner_tol: wlasso::DEFAULT_TOL,
            max_sweeps: wlasso::DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Transformed design and response of one one-step LLA problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingData {
    /// `x*`: rows scaled by `sqrt(D_ii)`, columns by `scale_factors`.
    pub wdesign: Matrix,
    /// `y*`
    pub wresponse: Vec<f64>,
    /// Coordinates fitted without penalty.
    pub u_set: Vec<usize>,
    /// Coordinates entering the lasso.
    pub v_set: Vec<usize>,
    /// Coordinates fixed at zero (infinite derivative).
    pub pinned: Vec<usize>,
    /// Multiplier taking a working coefficient back to the original scale.
    pub scale_factors: Vec<f64>,
    /// `y** = (I - H_U) y*`
    pub projected_response: Vec<f64>,
    /// `X_V** = (I - H_U) X_V*`, columns in `v_set` order.
    pub projected_design: Matrix,
    /// `X_U*` was rank deficient; a pseudo-inverse was used.
    pub singular_projection: bool,
}

/// Solution of the working lasso mapped back to the original coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingSolution {
    pub beta: Vec<f64>,
    /// Working-scale coefficients (`beta*`).
    pub working_beta: Vec<f64>,
    /// KKT residual of the projected lasso on `V`.
    pub kkt_residual: f64,
}

fn check_family(p: &Penalty, separable: bool, routine: &'static str) -> Result<()> {
    if p.family().is_separable() != separable {
        return Err(Error::FamilyMismatch {
            routine,
            family: p.family().name(),
        });
    }
    Ok(())
}

/// Working data of the rescaled-design algorithm for separable penalties.
pub fn build_working_data_type1(d: &Dataset, b0: &[f64], p: &Penalty) -> Result<WorkingData> {
    check_family(p, true, "build_working_data_type1")?;
    build(d, b0, b0, p, false)
}

/// Working data of the projection algorithm for SCAD.
pub fn build_working_data_type2(d: &Dataset, b0: &[f64], p: &Penalty) -> Result<WorkingData> {
    check_family(p, false, "build_working_data_type2")?;
    build(d, b0, b0, p, false)
}

/// Builds working data for a quadratic expansion at `expand_at` with tangent
/// weights taken at `weight_at`. Without `with_score` the working response
/// is `sqrt(D) mu`, which is exact when `expand_at` is the MLE; with it the
/// score term `(y - mu) / sqrt(D)` is added.
fn build(
    d: &Dataset,
    expand_at: &[f64],
    weight_at: &[f64],
    p: &Penalty,
    with_score: bool,
) -> Result<WorkingData> {
    d.check_coef(expand_at)?;
    d.check_coef(weight_at)?;
    let k = d.ncoef();
    let eta = glm::linear_predictor(d, expand_at)?;
    let family = d.family();
    let root_d: Vec<f64> = eta
        .iter()
        .map(|&e| sqrt(family.curvature(e).max(MIN_CURVATURE)))
        .collect();
    let wresponse: Vec<f64> = eta
        .iter()
        .zip(d.response())
        .zip(&root_d)
        .map(|((&e, &y), &r)| {
            if with_score {
                r * e + family.score_obs(e, y) / r
            } else {
                r * e
            }
        })
        .collect();

    let separable = p.family().is_separable();
    let lam = p.lambda();
    let mut u_set = Vec::new();
    let mut v_set = Vec::new();
    let mut pinned = Vec::new();
    let mut scale_factors = vec![1.0; k];
    for j in 0..k {
        if !d.is_penalized(j) {
            u_set.push(j);
            continue;
        }
        let t = weight_at[j].abs();
        if separable {
            let dp = p.unit_derivative(t).unwrap_or(f64::INFINITY);
            if !dp.is_finite() || dp > WEIGHT_CAP || (lam > 0.0 && lam * dp > WEIGHT_CAP) {
                pinned.push(j);
                scale_factors[j] = 0.0;
            } else {
                v_set.push(j);
                scale_factors[j] = 1.0 / dp;
            }
        } else {
            let dp = p.derivative(t);
            if dp == 0.0 || lam / dp > WEIGHT_CAP {
                u_set.push(j);
            } else {
                v_set.push(j);
                scale_factors[j] = lam / dp;
            }
        }
    }

    let mut wdesign = d.design().clone();
    wdesign.scale_rows(&root_d);
    for j in 0..k {
        let s = scale_factors[j];
        if s != 1.0 {
            for v in wdesign.col_mut(j) {
                *v *= s;
            }
        }
    }

    let (projected_response, projected_design, singular_projection) = if u_set.is_empty() {
        (wresponse.clone(), wdesign.select_columns(&v_set), false)
    } else {
        let xu = wdesign.select_columns(&u_set);
        let mut singular = false;
        let mut residualize = |v: &[f64]| -> Vec<f64> {
            let (g, s) = least_squares(&xu, v);
            singular |= s;
            let f = xu.mul_vec(&g);
            v.iter().zip(&f).map(|(a, b)| a - b).collect()
        };
        let yr = residualize(&wresponse);
        let cols: Vec<Vec<f64>> = v_set.iter().map(|&j| residualize(wdesign.col(j))).collect();
        let xv = if cols.is_empty() {
            Matrix::zeros(d.n(), 0)
        } else {
            Matrix::from_columns(&cols)
        };
        if singular {
            log::warn!("unpenalized block of the working design is rank deficient; using a pseudo-inverse projection");
        }
        (yr, xv, singular)
    };

    Ok(WorkingData {
        wdesign,
        wresponse,
        u_set,
        v_set,
        pinned,
        scale_factors,
        projected_response,
        projected_design,
        singular_projection,
    })
}

impl WorkingData {
    /// The lasso on `V` at total penalty level `level`.
    pub fn v_problem(&self, level: f64) -> Result<WlassoProblem> {
        WlassoProblem::new(
            self.projected_design.clone(),
            self.projected_response.clone(),
            vec![level; self.v_set.len()],
        )
    }

    /// Back-solves the `U` block given the working `V` coefficients and maps
    /// everything to the original scale.
    pub fn recover(&self, beta_v: &[f64]) -> Vec<f64> {
        let k = self.scale_factors.len();
        let mut working = vec![0.0; k];
        for (&j, &b) in self.v_set.iter().zip(beta_v) {
            working[j] = b;
        }
        if !self.u_set.is_empty() {
            let mut target = self.wresponse.clone();
            for (&j, &b) in self.v_set.iter().zip(beta_v) {
                if b != 0.0 {
                    for (t, x) in target.iter_mut().zip(self.wdesign.col(j)) {
                        *t -= b * x;
                    }
                }
            }
            let xu = self.wdesign.select_columns(&self.u_set);
            let (bu, _) = least_squares(&xu, &target);
            for (&j, &b) in self.u_set.iter().zip(&bu) {
                working[j] = b;
            }
        }
        working
            .iter()
            .zip(&self.scale_factors)
            .enumerate()
            .map(|(j, (&b, &s))| if self.pinned.contains(&j) { 0.0 } else { b * s })
            .collect()
    }

    fn recover_full(&self, beta_v: &[f64], kkt: f64) -> WorkingSolution {
        let beta = self.recover(beta_v);
        let mut working_beta = vec![0.0; self.scale_factors.len()];
        for (j, (&b, &s)) in beta.iter().zip(&self.scale_factors).enumerate() {
            working_beta[j] = if s == 0.0 { 0.0 } else { b / s };
        }
        for (&j, &b) in self.v_set.iter().zip(beta_v) {
            working_beta[j] = b;
        }
        WorkingSolution {
            beta,
            working_beta,
            kkt_residual: kkt,
        }
    }

    /// Coefficient tolerance in working units that gives `tol` on the
    /// original scale.
    fn working_tol(&self, tol: f64) -> f64 {
        let s = self
            .v_set
            .iter()
            .map(|&j| self.scale_factors[j])
            .fold(1.0_f64, f64::max);
        (tol / s).max(1e-15)
    }

    /// Solves the working lasso at penalty level `level` (normally
    /// `n * lambda`).
    pub fn solve(&self, level: f64, opts: &LlaOptions) -> Result<WorkingSolution> {
        if self.v_set.is_empty() {
            return Ok(self.recover_full(&[], 0.0));
        }
        let prob = self.v_problem(level)?;
        let wopts = WlassoOptions {
            tol: self.working_tol(opts.inner_tol),
            max_sweeps: opts.max_sweeps,
            record_objective: false,
        };
        let sol = wlasso::solve_with(&prob, &wopts, None)?;
        Ok(self.recover_full(&sol.beta, sol.kkt_residual))
    }

    /// Solves along a descending grid of penalty levels with warm starts.
    /// Only meaningful when the working data do not depend on the level,
    /// i.e. for separable penalties.
    pub fn solve_path(&self, levels: &[f64], opts: &LlaOptions) -> Result<Vec<WorkingSolution>> {
        if self.v_set.is_empty() {
            return Ok(levels.iter().map(|_| self.recover_full(&[], 0.0)).collect());
        }
        let wopts = WlassoOptions {
            tol: self.working_tol(opts.inner_tol),
            max_sweeps: opts.max_sweeps,
            record_objective: false,
        };
        let unit = vec![1.0; self.v_set.len()];
        let path = wlasso::solve_path(
            &self.projected_design,
            &self.projected_response,
            &unit,
            levels,
            &wopts,
        )?;
        Ok(path
            .iter()
            .map(|s| self.recover_full(&s.beta, s.kkt_residual))
            .collect())
    }
}

/// The one-step problem as a weighted-L1 fit in the original coordinates:
/// design `sqrt(D) X`, response `sqrt(D) X b0`, weights `n p'_lambda(|b0_j|)`
/// (0 for unpenalized slots, `+inf` for pinned ones). Exact when `b0` is
/// the MLE.
pub fn naive_problem(d: &Dataset, p: &Penalty, b0: &[f64]) -> Result<WlassoProblem> {
    let wd = working_data(d, b0, p)?;
    let n = d.n() as f64;
    let mut design = d.design().clone();
    let root_d: Vec<f64> = glm::curvature_weights(d, b0)?
        .into_iter()
        .map(|w| sqrt(w.max(MIN_CURVATURE)))
        .collect();
    design.scale_rows(&root_d);
    let mut weights = vec![0.0; d.ncoef()];
    for &j in &wd.pinned {
        weights[j] = f64::INFINITY;
    }
    for &j in &wd.v_set {
        weights[j] = n * p.derivative(b0[j].abs());
    }
    WlassoProblem::new(design, wd.wresponse, weights)
}

/// KKT residual of `beta` for the one-step problem at `b0`, per observation.
pub fn one_step_kkt(d: &Dataset, p: &Penalty, b0: &[f64], beta: &[f64]) -> Result<f64> {
    d.check_coef(beta)?;
    Ok(wlasso::certify_kkt(&naive_problem(d, p, b0)?, beta) / d.n() as f64)
}

/// `Q(beta) = l(beta) - n * sum_j p_lambda(|beta_j|)` over penalized slots.
pub fn penalized_loglik(d: &Dataset, p: &Penalty, beta: &[f64]) -> Result<f64> {
    let ll = glm::loglik(d, beta)?;
    let n = d.n() as f64;
    let pen: f64 = beta
        .iter()
        .enumerate()
        .filter(|(j, _)| d.is_penalized(*j))
        .map(|(_, b)| p.value(b.abs()))
        .sum();
    Ok(ll - n * pen)
}

fn initial(d: &Dataset, b0: Option<&[f64]>) -> Result<Vec<f64>> {
    match b0 {
        Some(b) => {
            d.check_coef(b)?;
            Ok(b.to_vec())
        }
        None => glm::fit_mle(d),
    }
}

fn working_data(d: &Dataset, b0: &[f64], p: &Penalty) -> Result<WorkingData> {
    build(d, b0, b0, p, false)
}

fn trace_for(d: &Dataset, p: &Penalty, iterates: &[&[f64]]) -> Result<Vec<f64>> {
    if !p.family().is_bounded() {
        return Ok(Vec::new());
    }
    iterates.iter().map(|b| penalized_loglik(d, p, b)).collect()
}

/// One-step LLA estimator started from `b0` (the MLE when `None`).
pub fn one_step(d: &Dataset, p: &Penalty, b0: Option<&[f64]>) -> Result<FitResult> {
    one_step_with(d, p, b0, &LlaOptions::default())
}

pub fn one_step_with(
    d: &Dataset,
    p: &Penalty,
    b0: Option<&[f64]>,
    opts: &LlaOptions,
) -> Result<FitResult> {
    let b0 = initial(d, b0)?;
    let wd = working_data(d, &b0, p)?;
    let sol = wd.solve(d.n() as f64 * p.lambda(), opts)?;
    let trace = trace_for(d, p, &[&b0, &sol.beta])?;
    Ok(FitResult::new(sol.beta, d.has_intercept(), p.lambda(), Method::OneStep)
        .with_trace(trace, 1, true))
}

/// Smallest lambda at which the one-step estimator of `family` started at
/// `b0` has every penalized coefficient at zero (an upper bound for SCAD).
pub fn lambda_max(d: &Dataset, b0: &[f64], family: PenaltyFamily) -> Result<f64> {
    let n = d.n() as f64;
    match family {
        PenaltyFamily::Scad { .. } => {
            // At lambda >= max |b0_j| every penalized coordinate sits on the
            // flat-derivative branch, so the problem is the plain lasso.
            let l1 = lambda_max(d, b0, PenaltyFamily::L1)?;
            let big = (0..d.ncoef())
                .filter(|&j| d.is_penalized(j))
                .map(|j| b0[j].abs())
                .fold(0.0, f64::max);
            Ok(l1.max(big))
        }
        _ => {
            let p = Penalty::new(family, 1.0)?;
            let wd = working_data(d, b0, &p)?;
            let unit = vec![1.0; wd.v_set.len()];
            Ok(wlasso::lambda_max(&wd.projected_design, &wd.projected_response, &unit) / n)
        }
    }
}

/// Default cross-validation grid for a penalty family.
pub fn default_grid(d: &Dataset, b0: &[f64], family: PenaltyFamily) -> Result<Vec<f64>> {
    Ok(wlasso::default_grid(
        lambda_max(d, b0, family)?,
        wlasso::DEFAULT_GRID_POINTS,
        wlasso::DEFAULT_GRID_RATIO,
    ))
}

/// One-step estimates along a descending lambda grid. Separable families
/// reuse one set of working data and a warm-started path; SCAD rebuilds the
/// working data at every lambda since `U` and `V` move with it.
pub fn one_step_path(
    d: &Dataset,
    family: PenaltyFamily,
    b0: Option<&[f64]>,
    grid: &[f64],
    opts: &LlaOptions,
) -> Result<Vec<Result<FitResult>>> {
    let b0 = initial(d, b0)?;
    let n = d.n() as f64;
    let make = |beta: Vec<f64>, lam: f64| -> Result<FitResult> {
        let p = Penalty::new(family, lam)?;
        let trace = trace_for(d, &p, &[&b0, &beta])?;
        Ok(FitResult::new(beta, d.has_intercept(), lam, Method::OneStep).with_trace(trace, 1, true))
    };
    if family.is_separable() {
        let unit = Penalty::new(family, 1.0)?;
        let wd = working_data(d, &b0, &unit)?;
        let levels: Vec<f64> = grid.iter().map(|l| n * l).collect();
        return Ok(match wd.solve_path(&levels, opts) {
            Ok(path) => path
                .into_iter()
                .zip(grid)
                .map(|(s, &lam)| make(s.beta, lam))
                .collect(),
            Err(_) => grid
                .iter()
                .map(|&lam| one_step_with(d, &Penalty::new(family, lam)?, Some(&b0), opts))
                .collect(),
        });
    }
    Ok(grid
        .iter()
        .map(|&lam| one_step_with(d, &Penalty::new(family, lam)?, Some(&b0), opts))
        .collect())
}

/// k iterations of the one-step construction, re-expanding the likelihood
/// at each new iterate. `k = 1` is [`one_step`].
pub fn k_step(
    d: &Dataset,
    p: &Penalty,
    b0: Option<&[f64]>,
    k: usize,
    opts: &LlaOptions,
) -> Result<FitResult> {
    if k == 0 {
        return Err(Error::InvalidParameter(format!("k-step needs k >= 1")));
    }
    let b0 = initial(d, b0)?;
    let first = one_step_with(d, p, Some(&b0), opts)?;
    let mut iterates = vec![b0, first.beta];
    let level = d.n() as f64 * p.lambda();
    for _ in 1..k {
        let cur = iterates.last().unwrap();
        let wd = build(d, cur, cur, p, true)?;
        let sol = wd.solve(level, opts)?;
        iterates.push(sol.beta);
    }
    let refs: Vec<&[f64]> = iterates.iter().map(Vec::as_slice).collect();
    let trace = trace_for(d, p, &refs)?;
    let beta = iterates.pop().unwrap();
    Ok(FitResult::new(beta, d.has_intercept(), p.lambda(), Method::KStep(k)).with_trace(trace, k, true))
}

/// Maximizes `l(b) - sum_j v_j |b_j|` from `start`.
///
/// Gaussian: one weighted lasso. Otherwise proximal Newton: weighted lasso
/// on the quadratic expansion at the current point, followed by a
/// backtracking step that never decreases the objective.
pub fn maximize_weighted_l1(
    d: &Dataset,
    weights: &[f64],
    start: &[f64],
    tol: f64,
    max_iter: usize,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    d.check_coef(start)?;
    let wopts = WlassoOptions {
        tol,
        max_sweeps,
        record_objective: false,
    };
    if d.family() == glm::Family::Gaussian {
        let prob = WlassoProblem::new(d.design().clone(), d.response().to_vec(), weights.to_vec())?;
        return Ok(wlasso::solve_with(&prob, &wopts, Some(start))?.beta);
    }
    let objective = |b: &[f64]| -> Result<f64> {
        let l1: f64 = weights
            .iter()
            .zip(b)
            .filter(|(_, x)| **x != 0.0)
            .map(|(w, x)| w * x.abs())
            .sum();
        Ok(glm::loglik(d, b)? - l1)
    };
    let mut beta = start.to_vec();
    for (j, w) in weights.iter().enumerate() {
        if w.is_infinite() {
            beta[j] = 0.0;
        }
    }
    let mut f = objective(&beta)?;
    for _ in 0..max_iter {
        let eta = glm::linear_predictor(d, &beta)?;
        let family = d.family();
        let root_w: Vec<f64> = eta
            .iter()
            .map(|&e| sqrt(family.curvature(e).max(MIN_CURVATURE)))
            .collect();
        let z: Vec<f64> = eta
            .iter()
            .zip(d.response())
            .zip(&root_w)
            .map(|((&e, &y), &r)| r * e + family.score_obs(e, y) / r)
            .collect();
        let mut xw = d.design().clone();
        xw.scale_rows(&root_w);
        let prob = WlassoProblem::new(xw, z, weights.to_vec())?;
        let target = wlasso::solve_with(&prob, &wopts, Some(&beta))?.beta;
        let mut t = 1.0;
        let mut next = beta.clone();
        let mut accepted = false;
        for _ in 0..50 {
            for ((nx, b), tg) in next.iter_mut().zip(&beta).zip(&target) {
                *nx = b + t * (tg - b);
            }
            let fn_ = objective(&next)?;
            if fn_ >= f {
                f = fn_;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Ok(beta);
        }
        let change = max_abs_diff(&next, &beta);
        beta = next;
        if change <= tol {
            return Ok(beta);
        }
    }
    Err(Error::non_convergence("penalized Newton", max_iter))
}

/// Fully iterative LLA: repeats the tangent-weighted L1 maximization until
/// iterates stop moving. Only SCAD and L1 are accepted, the families whose
/// penalized likelihood is bounded with a finite derivative at zero.
pub fn full_lla(d: &Dataset, p: &Penalty, b0: Option<&[f64]>, opts: &LlaOptions) -> Result<FitResult> {
    if !matches!(p.family(), PenaltyFamily::Scad { .. } | PenaltyFamily::L1) {
        return Err(Error::FamilyMismatch {
            routine: "full_lla",
            family: p.family().name(),
        });
    }
    let mut beta = initial(d, b0)?;
    let n = d.n() as f64;
    let mut trace = vec![penalized_loglik(d, p, &beta)?];
    let inner_tol = (opts.tol / 10.0).min(opts.inner_tol);
    for it in 1..=opts.max_iter {
        let weights: Vec<f64> = beta
            .iter()
            .enumerate()
            .map(|(j, b)| if d.is_penalized(j) { n * p.derivative(b.abs()) } else { 0.0 })
            .collect();
        let next = maximize_weighted_l1(d, &weights, &beta, inner_tol, 200, opts.max_sweeps)?;
        trace.push(penalized_loglik(d, p, &next)?);
        let change = max_abs_diff(&next, &beta);
        beta = next;
        if change <= opts.tol {
            return Ok(FitResult::new(beta, d.has_intercept(), p.lambda(), Method::FullLla)
                .with_trace(trace, it, true));
        }
    }
    let partial = FitResult::new(beta, d.has_intercept(), p.lambda(), Method::FullLla)
        .with_trace(trace, opts.max_iter, false);
    Err(Error::NonConvergence {
        routine: "full_lla",
        iterations: opts.max_iter,
        partial: Some(Box::new(partial)),
    })
}

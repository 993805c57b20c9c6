//! Output formats: JSON documents (schema `sparsefit/1`), CSV tables and
//! the plain-text simulation table.

use std::fmt::Write as _;

use serde::Serialize;
use sparsefit_core::sim::{MethodRow, SimulationReport};
use sparsefit_core::threshold::Curve;
use sparsefit_core::tuning::CvCurve;
use sparsefit_core::{FitResult, Penalty};

pub const SCHEMA: &str = "sparsefit/1";

/// A number with 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct CvJson {
    pub folds: usize,
    pub seed: u64,
    pub lambda_star: f64,
    pub curve: Vec<[f64; 2]>,
}

impl CvJson {
    pub fn new(cv: &CvCurve, folds: usize, seed: u64) -> Self {
        CvJson {
            folds,
            seed,
            lambda_star: cv.lambda_star,
            curve: cv.curve.iter().map(|&(l, v)| [l, v]).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitJson {
    pub schema: &'static str,
    pub family: String,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criterion: Option<String>,
    pub lambda: f64,
    pub intercept: Option<f64>,
    pub predictors: Vec<String>,
    pub coefficients: Vec<f64>,
    /// 1-based predictor positions with a nonzero coefficient.
    pub support: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvJson>,
}

impl FitJson {
    pub fn new(fit: &FitResult, family: &str, predictors: &[String], penalty: Option<&Penalty>) -> Self {
        FitJson {
            schema: SCHEMA,
            family: family.to_owned(),
            method: fit.method.to_string(),
            penalty: penalty.map(|p| p.to_string()),
            criterion: None,
            lambda: fit.lambda,
            intercept: fit.intercept(),
            predictors: predictors.to_vec(),
            coefficients: fit.coefficients().to_vec(),
            support: fit.support.iter().map(|j| j + 1).collect(),
            iterations: fit.iterations,
            converged: fit.converged,
            objective_trace: fit.objective_trace.clone(),
            cv: None,
        }
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Path CSV: `lambda,[intercept,]<predictors...>,kkt`.
pub fn path_csv(predictors: &[String], intercept: bool, rows: &[(FitResult, f64)]) -> String {
    let mut out = String::from("lambda");
    if intercept {
        out.push_str(",intercept");
    }
    for p in predictors {
        out.push(',');
        out.push_str(p);
    }
    out.push_str(",kkt\n");
    for (fit, kkt) in rows {
        out.push_str(&num(fit.lambda));
        for b in &fit.beta {
            out.push(',');
            out.push_str(&num(*b));
        }
        out.push(',');
        out.push_str(&num(*kkt));
        out.push('\n');
    }
    out
}

/// CV CSV: `lambda,cv_loss,selected`.
pub fn cv_csv(cv: &CvCurve) -> String {
    let mut out = String::from("lambda,cv_loss,selected\n");
    for &(l, v) in &cv.curve {
        let _ = writeln!(out, "{},{},{}", num(l), num(v), u8::from(l == cv.lambda_star));
    }
    out
}

/// Threshold CSV: `z,theta,discontinuity`, the flag marking a jump from the
/// previous row.
pub fn threshold_csv(curve: &Curve) -> String {
    let mut out = String::from("z,theta,discontinuity\n");
    let mut flags = curve.discontinuities.iter().peekable();
    for (i, &(z, t)) in curve.rows.iter().enumerate() {
        let flag = flags.next_if_eq(&&i).is_some();
        let _ = writeln!(out, "{},{},{}", num(z), num(t), u8::from(flag));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RowJson {
    pub method: String,
    pub label: String,
    pub mrme: f64,
    pub c: f64,
    pub ic: f64,
    pub underfit: f64,
    pub correctfit: f64,
    pub overfit: f64,
    pub support_mse: f64,
    pub replications: usize,
    pub failures: usize,
}

impl From<&MethodRow> for RowJson {
    fn from(r: &MethodRow) -> Self {
        RowJson {
            method: r.method.to_string(),
            label: r.method.label(),
            mrme: r.mrme,
            c: r.c_avg,
            ic: r.ic_avg,
            underfit: r.underfit,
            correctfit: r.correctfit,
            overfit: r.overfit,
            support_mse: r.support_mse,
            replications: r.replications,
            failures: r.failures,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioJson {
    pub name: String,
    pub example: String,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta_true: Vec<f64>,
    pub seed: u64,
    pub replications: usize,
    pub folds: usize,
    pub test_points: usize,
    pub valid: bool,
    pub rows: Vec<RowJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationJson {
    pub schema: &'static str,
    pub scenarios: Vec<ScenarioJson>,
}

/// Aligned text table with the columns MRME, C, IC, Under-fit, Correct-fit
/// and Over-fit.
pub fn table(name: &str, r: &SimulationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{name}: {} model, n = {}, p = {}, {} replications, seed {}",
        r.example, r.n, r.p, r.replications, r.seed
    );
    let width = r.rows.iter().map(|row| row.method.label().len()).max().unwrap_or(6).max(6);
    let _ = writeln!(
        out,
        "{:<width$}  {:>6}  {:>5}  {:>5}  {:>9}  {:>11}  {:>8}",
        "Method", "MRME", "C", "IC", "Under-fit", "Correct-fit", "Over-fit"
    );
    for row in &r.rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.3}  {:>5.2}  {:>5.2}  {:>9.3}  {:>11.3}  {:>8.3}",
            row.method.label(),
            row.mrme,
            row.c_avg,
            row.ic_avg,
            row.underfit,
            row.correctfit,
            row.overfit
        );
    }
    for row in r.rows.iter().filter(|row| row.failures > 0) {
        let _ = writeln!(out, "  {} failed in {} replications", row.method.label(), row.failures);
    }
    if !r.valid {
        let _ = writeln!(out, "  INVALID: failure rate above 2%");
    }
    out
}

//! Simulation scenarios: AR(rho) Gaussian covariates, linear / logistic /
//! Poisson responses, model error, and the per-method selection metrics.
//!
//! A scenario is run replication by replication. Each replication draws its
//! data from its own random stream, fits the full-model MLE as the
//! baseline, fits every method (tuning parameters by K-fold CV, subset
//! methods by their criterion) and records the model-error ratio against
//! the baseline and the selected support. [`aggregate`] turns the ordered
//! replication outcomes into one row per method.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::glm::{self, Dataset, Family};
use crate::linalg::{Cholesky, Matrix};
use crate::lla::{self, LlaOptions};
use crate::lqa::LqaOptions;
use crate::math::{dot, exp, sigmoid};
use crate::penalty::{Penalty, PenaltyFamily};
use crate::rng::{self, Purpose, StreamRng};
use crate::subset::{self, Criterion};
use crate::tuning;

/// Coefficients of the linear and logistic scenarios (12 predictors).
pub const LINEAR_BETA: [f64; 12] = [3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
/// Coefficients of the Poisson scenario.
pub const POISSON_BETA: [f64; 12] = [1.2, 0.6, 0.0, 0.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_TEST_POINTS: usize = 10_000;
/// A report is invalid when more than this share of replications fail.
pub const MAX_FAILURE_RATE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    Linear,
    Logistic,
    Poisson,
}

impl Example {
    pub fn family(&self) -> Family {
        match self {
            Example::Linear => Family::Gaussian,
            Example::Logistic => Family::Logistic,
            Example::Poisson => Family::Poisson,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Example::Linear => "linear",
            Example::Logistic => "logistic",
            Example::Poisson => "poisson",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "gaussian" => Ok(Example::Linear),
            "logistic" | "binomial" => Ok(Example::Logistic),
            "poisson" => Ok(Example::Poisson),
            other => Err(Error::InvalidParameter(format!("unknown example '{other}'"))),
        }
    }
}

/// An estimator compared in a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    /// One-step LLA, lambda by cross-validation.
    OneStep(PenaltyFamily),
    /// LQA with the deletion rule, lambda by cross-validation.
    Lqa(PenaltyFamily),
    /// Perturbed LQA, lambda by cross-validation.
    PerturbedLqa(PenaltyFamily),
    Subset(Criterion),
    /// Unpenalized MLE on all predictors (the model-error baseline).
    Full,
    /// Unpenalized MLE on the true support.
    Oracle,
    /// Returns the true coefficients.
    Truth,
}

fn family_tag(f: &PenaltyFamily) -> String {
    match f {
        PenaltyFamily::Scad { a } if *a == crate::penalty::DEFAULT_SCAD_A => "scad".into(),
        PenaltyFamily::Scad { a } => format!("scad:a={a}"),
        PenaltyFamily::Lq { q } => format!("lq:q={q}"),
        PenaltyFamily::Log => "log".into(),
        PenaltyFamily::L1 => "l1".into(),
    }
}

fn family_label(f: &PenaltyFamily) -> String {
    match f {
        PenaltyFamily::Scad { .. } => "SCAD".into(),
        PenaltyFamily::Lq { q } => format!("L_{q}"),
        PenaltyFamily::Log => "LOG".into(),
        PenaltyFamily::L1 => "L1".into(),
    }
}

impl MethodSpec {
    /// Row label for reports.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::OneStep(f) => format!("One-step {}", family_label(f)),
            MethodSpec::Lqa(f) => format!("LQA {}", family_label(f)),
            MethodSpec::PerturbedLqa(f) => format!("P-LQA {}", family_label(f)),
            MethodSpec::Subset(Criterion::Aic) => "AIC".into(),
            MethodSpec::Subset(Criterion::Bic) => "BIC".into(),
            MethodSpec::Full => "Full".into(),
            MethodSpec::Oracle => "Oracle".into(),
            MethodSpec::Truth => "Truth".into(),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            MethodSpec::Lqa(PenaltyFamily::Log) | MethodSpec::PerturbedLqa(PenaltyFamily::Log) => Err(
                Error::InvalidParameter("the log penalty is not supported by the LQA methods".into()),
            ),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MethodSpec {
    /// The descriptor accepted by [`MethodSpec::from_str`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::OneStep(fam) => write!(f, "one_step:{}", family_tag(fam)),
            MethodSpec::Lqa(fam) => write!(f, "lqa:{}", family_tag(fam)),
            MethodSpec::PerturbedLqa(fam) => write!(f, "plqa:{}", family_tag(fam)),
            MethodSpec::Subset(c) => f.write_str(c.name()),
            MethodSpec::Full => f.write_str("full"),
            MethodSpec::Oracle => f.write_str("oracle"),
            MethodSpec::Truth => f.write_str("truth"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    /// `one_step:<penalty>`, `lqa:<penalty>`, `plqa:<penalty>`, `aic`, `bic`,
    /// `full`, `oracle` or `truth`, where `<penalty>` is a penalty spec
    /// without lambda, e.g. `scad`, `lq:q=0.01`, `log`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let head = head.to_ascii_lowercase().replace('-', "_");
        let family = |r: Option<&str>| -> Result<PenaltyFamily> {
            let r = r.ok_or_else(|| Error::InvalidParameter(format!("method '{s}' needs a penalty")))?;
            Ok(r.parse::<Penalty>()?.family())
        };
        let m = match head.as_str() {
            "one_step" | "onestep" => MethodSpec::OneStep(family(rest)?),
            "lqa" => MethodSpec::Lqa(family(rest)?),
            "plqa" | "perturbed_lqa" => MethodSpec::PerturbedLqa(family(rest)?),
            "aic" | "bic" if rest.is_none() => MethodSpec::Subset(head.parse()?),
            "full" | "mle" if rest.is_none() => MethodSpec::Full,
            "oracle" if rest.is_none() => MethodSpec::Oracle,
            "truth" if rest.is_none() => MethodSpec::Truth,
            _ => return Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        };
        m.check()?;
        Ok(m)
    }
}

/// Everything that determines a simulation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub beta_true: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    /// Monte Carlo sample size for the logistic model error.
    pub test_points: usize,
    pub folds: usize,
}

impl ScenarioSpec {
    /// The standard scenario for `example`: 12 AR(0.5) predictors and the
    /// matching true coefficients, 100 replications, five-fold CV.
    pub fn standard(example: Example, n: usize, methods: Vec<MethodSpec>) -> Self {
        let beta = match example {
            Example::Poisson => POISSON_BETA,
            _ => LINEAR_BETA,
        };
        ScenarioSpec {
            example,
            n,
            p: beta.len(),
            rho: DEFAULT_RHO,
            beta_true: beta.to_vec(),
            replications: 100,
            seed: 1,
            methods,
            test_points: DEFAULT_TEST_POINTS,
            folds: tuning::DEFAULT_FOLDS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.beta_true.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "beta_true length",
                expected: self.p,
                found: self.beta_true.len(),
            });
        }
        if self.p == 0 || self.p > 63 {
            return bad(format!("p must be in 1..=63, got {}", self.p));
        }
        if !(self.rho.abs() < 1.0) {
            return bad(format!("rho must lie in (-1, 1), got {}", self.rho));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return bad("beta_true must be finite".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.folds < 2 || self.folds > self.n {
            return bad(format!("folds must be in [2, n], got {}", self.folds));
        }
        if self.n <= self.p {
            return bad(format!("n = {} must exceed p = {}", self.n, self.p));
        }
        if self.example == Example::Logistic && self.test_points == 0 {
            return bad("test_points must be positive for the logistic example".into());
        }
        for m in &self.methods {
            m.check()?;
        }
        Ok(())
    }

    /// Indices with a nonzero true coefficient.
    pub fn true_support(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.beta_true[j] != 0.0).collect()
    }
}

/// `Sigma_ij = rho^|i - j|`.
pub fn ar_covariance(p: usize, rho: f64) -> Matrix {
    let mut s = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            s.set(i, j, libm::pow(rho, i.abs_diff(j) as f64));
        }
    }
    s
}

/// Draws `n` rows from `N(0, Sigma)`; with `dichotomize`, every second
/// coordinate (1-based even positions) is replaced by `I(z < 0)`.
fn draw_covariates(n: usize, factor: &Matrix, dichotomize: bool, r: &mut StreamRng) -> Matrix {
    let p = factor.nrows();
    let mut x = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = r.sample(StandardNormal);
        }
        for a in 0..p {
            let mut s = 0.0;
            for b in 0..=a {
                s += factor.get(a, b) * z[b];
            }
            if dichotomize && a % 2 == 1 {
                s = if s < 0.0 { 1.0 } else { 0.0 };
            }
            x.set(i, a, s);
        }
    }
    x
}

fn covariance_factor(spec: &ScenarioSpec) -> Result<Matrix> {
    Ok(Cholesky::new(&ar_covariance(spec.p, spec.rho))
        .ok_or(Error::SingularSystem)?
        .factor()
        .clone())
}

fn expect(spec: &ScenarioSpec, example: Example) -> Result<()> {
    spec.validate()?;
    if spec.example != example {
        return Err(Error::InvalidParameter(format!(
            "scenario is {}, not {}",
            spec.example, example
        )));
    }
    Ok(())
}

/// `y = x^T beta + eps`, `x ~ N(0, Sigma)`, `eps ~ N(0, 1)`.
pub fn gen_linear(spec: &ScenarioSpec, rep: u64) -> Result<Dataset> {
    expect(spec, Example::Linear)?;
    let mut r = rng::stream(spec.seed, rep, Purpose::Data);
    let x = draw_covariates(spec.n, &covariance_factor(spec)?, false, &mut r);
    let mu = x.mul_vec(&spec.beta_true);
    let y = mu
        .into_iter()
        .map(|m| {
            let e: f64 = r.sample(StandardNormal);
            m + e
        })
        .collect();
    Dataset::new(x, y, Family::Gaussian, false)
}

/// Bernoulli response with success probability `sigmoid(x^T beta)`;
/// even-position covariates are dichotomized at zero.
pub fn gen_logistic(spec: &ScenarioSpec, rep: u64) -> Result<Dataset> {
    expect(spec, Example::Logistic)?;
    let mut r = rng::stream(spec.seed, rep, Purpose::Data);
    let x = draw_covariates(spec.n, &covariance_factor(spec)?, true, &mut r);
    let eta = x.mul_vec(&spec.beta_true);
    let y = eta
        .into_iter()
        .map(|e| if r.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 })
        .collect();
    Dataset::new(x, y, Family::Logistic, false)
}

/// Poisson response with mean `exp(x^T beta)`.
pub fn gen_poisson(spec: &ScenarioSpec, rep: u64) -> Result<Dataset> {
    expect(spec, Example::Poisson)?;
    let mut r = rng::stream(spec.seed, rep, Purpose::Data);
    let x = draw_covariates(spec.n, &covariance_factor(spec)?, false, &mut r);
    let eta = x.mul_vec(&spec.beta_true);
    let mut y = Vec::with_capacity(spec.n);
    for e in eta {
        let dist = Poisson::new(exp(e))
            .map_err(|_| Error::InvalidData(format!("Poisson mean exp({e}) is out of range")))?;
        y.push(dist.sample(&mut r));
    }
    Dataset::new(x, y, Family::Poisson, false)
}

pub fn generate(spec: &ScenarioSpec, rep: u64) -> Result<Dataset> {
    match spec.example {
        Example::Linear => gen_linear(spec, rep),
        Example::Logistic => gen_logistic(spec, rep),
        Example::Poisson => gen_poisson(spec, rep),
    }
}

/// Fresh covariates for the Monte Carlo model error of replication `rep`.
pub fn test_design(spec: &ScenarioSpec, rep: u64) -> Result<Matrix> {
    spec.validate()?;
    let mut r = rng::stream(spec.seed, rep, Purpose::TestPoints);
    Ok(draw_covariates(
        spec.test_points,
        &covariance_factor(spec)?,
        spec.example == Example::Logistic,
        &mut r,
    ))
}

/// `(b_hat - b)^T Sigma (b_hat - b)`.
pub fn model_error_linear(beta_hat: &[f64], beta: &[f64], sigma: &Matrix) -> f64 {
    let d: Vec<f64> = beta_hat.iter().zip(beta).map(|(a, b)| a - b).collect();
    dot(&d, &sigma.mul_vec(&d)).max(0.0)
}

/// `E(exp(x^T b_hat) - exp(x^T b))^2` for `x ~ N(0, Sigma)`:
/// `M(2 b_hat) - 2 M(b_hat + b) + M(2 b)` with `M(a) = exp(a^T Sigma a / 2)`.
pub fn model_error_poisson(beta_hat: &[f64], beta: &[f64], sigma: &Matrix) -> f64 {
    let mgf = |a: &[f64]| exp(0.5 * dot(a, &sigma.mul_vec(a)));
    let twice = |v: &[f64]| v.iter().map(|x| 2.0 * x).collect::<Vec<_>>();
    let sum: Vec<f64> = beta_hat.iter().zip(beta).map(|(a, b)| a + b).collect();
    (mgf(&twice(beta_hat)) - 2.0 * mgf(&sum) + mgf(&twice(beta))).max(0.0)
}

/// Mean of `(sigmoid(x^T b_hat) - sigmoid(x^T b))^2` over the rows of `test`.
pub fn model_error_logistic(beta_hat: &[f64], beta: &[f64], test: &Matrix) -> f64 {
    let a = test.mul_vec(beta_hat);
    let b = test.mul_vec(beta);
    let s: f64 = a.iter().zip(&b).map(|(u, v)| (sigmoid(*u) - sigmoid(*v)).powi(2)).sum();
    s / test.nrows() as f64
}

/// Model error of `beta_hat` (predictor coefficients only). `test` is used
/// by the logistic example only.
pub fn model_error(
    example: Example,
    beta_hat: &[f64],
    beta: &[f64],
    sigma: &Matrix,
    test: &Matrix,
) -> Result<f64> {
    if beta_hat.len() != beta.len() || sigma.nrows() != beta.len() {
        return Err(Error::DimensionMismatch {
            what: "model error coefficients",
            expected: beta.len(),
            found: beta_hat.len(),
        });
    }
    Ok(match example {
        Example::Linear => model_error_linear(beta_hat, beta, sigma),
        Example::Poisson => model_error_poisson(beta_hat, beta, sigma),
        Example::Logistic => {
            if test.ncols() != beta.len() {
                return Err(Error::DimensionMismatch {
                    what: "test design columns",
                    expected: beta.len(),
                    found: test.ncols(),
                });
            }
            model_error_logistic(beta_hat, beta, test)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitClass {
    Under,
    Correct,
    Over,
}

/// One method in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub model_error: f64,
    /// `model_error` divided by the baseline's.
    pub ratio: f64,
    pub support: Vec<usize>,
    /// True nonzeros estimated as nonzero.
    pub correct: usize,
    /// True zeros estimated as nonzero.
    pub incorrect: usize,
    pub class: FitClass,
    /// Squared error on the true-support block.
    pub support_sq_error: f64,
    /// Selected tuning parameter (CV lambda or criterion cost; 0 otherwise).
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: u64,
    pub baseline_error: f64,
    /// One entry per method; `Err` holds the failure message.
    pub methods: Vec<core::result::Result<MethodOutcome, String>>,
}

pub fn classify(support: &[usize], truth: &[usize]) -> (usize, usize, FitClass) {
    let correct = support.iter().filter(|j| truth.contains(j)).count();
    let incorrect = support.len() - correct;
    let class = if correct < truth.len() {
        FitClass::Under
    } else if incorrect == 0 {
        FitClass::Correct
    } else {
        FitClass::Over
    };
    (correct, incorrect, class)
}

fn converged(r: Result<FitResult>) -> Result<FitResult> {
    let fit = r?;
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::non_convergence("fit", fit.iterations))
    }
}

/// Coefficients selected by `method` on `d` (no intercept), plus the tuning
/// value used.
pub fn fit_method(
    spec: &ScenarioSpec,
    method: &MethodSpec,
    d: &Dataset,
    mle: &[f64],
    fold_seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let cv_fit = |family: PenaltyFamily, fitter: &dyn Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>>| {
        let grid = lla::default_grid(d, mle, family)?;
        let cv = tuning::cv_select(d, &grid, spec.folds, fold_seed, fitter)?;
        let fits = fitter(d, &[cv.lambda_star]);
        let fit = converged(fits.and_then(|mut v| v.pop().ok_or(Error::SingularSystem)).and_then(|r| r))?;
        Ok((fit.beta, cv.lambda_star))
    };
    match method {
        MethodSpec::OneStep(f) => {
            let family = *f;
            let opts = LlaOptions::default();
            let b0 = mle.to_vec();
            let full = move |train: &Dataset, grid: &[f64]| -> Result<Vec<Result<FitResult>>> {
                if train.n() == d.n() {
                    lla::one_step_path(train, family, Some(&b0), grid, &opts)
                } else {
                    tuning::one_step_fitter(family, opts)(train, grid)
                }
            };
            cv_fit(family, &full)
        }
        MethodSpec::Lqa(f) => cv_fit(*f, &tuning::lqa_fitter(*f, LqaOptions::default())),
        MethodSpec::PerturbedLqa(f) => cv_fit(*f, &tuning::perturbed_lqa_fitter(*f, LqaOptions::default())),
        MethodSpec::Subset(c) => {
            let fit = subset::best_subset(d, *c, subset::DEFAULT_MAX_P)?;
            Ok((fit.beta, fit.lambda))
        }
        MethodSpec::Full => Ok((mle.to_vec(), 0.0)),
        MethodSpec::Oracle => {
            let support = spec.true_support();
            let mut beta = vec![0.0; spec.p];
            if !support.is_empty() {
                let b = glm::fit_mle(&d.subset_predictors(&support))?;
                for (&j, v) in support.iter().zip(b) {
                    beta[j] = v;
                }
            }
            Ok((beta, 0.0))
        }
        MethodSpec::Truth => Ok((spec.beta_true.clone(), 0.0)),
    }
}

/// Runs replication `rep` of the scenario. Only an invalid scenario is an
/// error; failures of the data generator or the baseline mark every method
/// of the replication as failed.
pub fn run_replication(spec: &ScenarioSpec, rep: u64) -> Result<ReplicationOutcome> {
    spec.validate()?;
    let fail_all = |msg: String| ReplicationOutcome {
        index: rep,
        baseline_error: f64::NAN,
        methods: spec.methods.iter().map(|_| Err(msg.clone())).collect(),
    };
    let sigma = ar_covariance(spec.p, spec.rho);
    let test = if spec.example == Example::Logistic {
        test_design(spec, rep)?
    } else {
        Matrix::zeros(0, spec.p)
    };
    let d = match generate(spec, rep) {
        Ok(d) => d,
        Err(e) => return Ok(fail_all(format!("data generation: {e}"))),
    };
    let mle = match glm::fit_mle(&d) {
        Ok(b) => b,
        Err(e) => return Ok(fail_all(format!("full-model fit: {e}"))),
    };
    let me = |b: &[f64]| model_error(spec.example, b, &spec.beta_true, &sigma, &test);
    let baseline_error = me(&mle)?;
    let fold_seed = rng::stream(spec.seed, rep, Purpose::Folds).next_u64();
    let truth = spec.true_support();
    let methods = spec
        .methods
        .iter()
        .map(|m| {
            let (beta, lambda) = fit_method(spec, m, &d, &mle, fold_seed).map_err(|e| format!("{e}"))?;
            let model_error = me(&beta).map_err(|e| format!("{e}"))?;
            let support: Vec<usize> = (0..spec.p).filter(|&j| beta[j] != 0.0).collect();
            let (correct, incorrect, class) = classify(&support, &truth);
            let support_sq_error = truth.iter().map(|&j| (beta[j] - spec.beta_true[j]).powi(2)).sum();
            Ok(MethodOutcome {
                model_error,
                ratio: model_error / baseline_error,
                support,
                correct,
                incorrect,
                class,
                support_sq_error,
                lambda,
            })
        })
        .collect();
    Ok(ReplicationOutcome {
        index: rep,
        baseline_error,
        methods,
    })
}

/// Aggregated metrics for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: MethodSpec,
    /// Median model-error ratio.
    pub mrme: f64,
    pub c_avg: f64,
    pub ic_avg: f64,
    pub underfit: f64,
    pub correctfit: f64,
    pub overfit: f64,
    /// Mean squared error on the true-support block.
    pub support_mse: f64,
    /// Replications that produced a result.
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub replications: usize,
    pub rows: Vec<MethodRow>,
    /// False when some method failed in more than 2% of replications.
    pub valid: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Combines replication outcomes, which must be in replication order.
pub fn aggregate(spec: &ScenarioSpec, outcomes: &[ReplicationOutcome]) -> SimulationReport {
    let rows: Vec<MethodRow> = spec
        .methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let ok: Vec<&MethodOutcome> = outcomes.iter().filter_map(|o| o.methods[k].as_ref().ok()).collect();
            let failures = outcomes.len() - ok.len();
            let cnt = ok.len() as f64;
            let mean = |f: &dyn Fn(&MethodOutcome) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|o| f(o)).sum::<f64>() / cnt
                }
            };
            let share = |c: FitClass| mean(&|o: &MethodOutcome| f64::from(u8::from(o.class == c)));
            MethodRow {
                method: *m,
                mrme: median(ok.iter().map(|o| o.ratio).collect()),
                c_avg: mean(&|o| o.correct as f64),
                ic_avg: mean(&|o| o.incorrect as f64),
                underfit: share(FitClass::Under),
                correctfit: share(FitClass::Correct),
                overfit: share(FitClass::Over),
                support_mse: mean(&|o| o.support_sq_error),
                replications: ok.len(),
                failures,
            }
        })
        .collect();
    let limit = MAX_FAILURE_RATE * outcomes.len() as f64;
    SimulationReport {
        example: spec.example,
        n: spec.n,
        p: spec.p,
        seed: spec.seed,
        replications: outcomes.len(),
        valid: rows.iter().all(|r| r.failures as f64 <= limit),
        rows,
    }
}

/// Runs every replication in order on the current thread.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<SimulationReport> {
    spec.validate()?;
    let outcomes = (0..spec.replications as u64)
        .map(|r| run_replication(spec, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(spec, &outcomes))
}

use alloc::vec::Vec;
use core::fmt;

/// Which estimator produced a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    OneStep,
    KStep(usize),
    FullLla,
    Lqa,
    PerturbedLqa,
    Subset,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::OneStep => f.write_str("one_step"),
            Method::KStep(k) => write!(f, "k_step({k})"),
            Method::FullLla => f.write_str("full_lla"),
            Method::Lqa => f.write_str("lqa"),
            Method::PerturbedLqa => f.write_str("perturbed_lqa"),
            Method::Subset => f.write_str("subset"),
        }
    }
}

/// Output of every estimator in the crate.
///
/// `beta` is the full coefficient vector in design order: the intercept
/// (when the dataset has one) occupies slot 0. `support` lists predictor
/// indices (0-based, intercept excluded) whose coefficient is exactly
/// nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub has_intercept: bool,
    pub support: Vec<usize>,
    pub lambda: f64,
    pub method: Method,
    /// Penalized log-likelihood `Q` at successive iterates, when defined.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn new(beta: Vec<f64>, has_intercept: bool, lambda: f64, method: Method) -> Self {
        let offset = usize::from(has_intercept);
        let support = beta
            .iter()
            .enumerate()
            .skip(offset)
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j - offset)
            .collect();
        FitResult {
            beta,
            has_intercept,
            support,
            lambda,
            method,
            objective_trace: Vec::new(),
            iterations: 0,
            converged: true,
        }
    }

    pub(crate) fn with_trace(mut self, trace: Vec<f64>, iterations: usize, converged: bool) -> Self {
        self.objective_trace = trace;
        self.iterations = iterations;
        self.converged = converged;
        self
    }

    /// Predictor coefficients (intercept excluded).
    pub fn coefficients(&self) -> &[f64] {
        &self.beta[usize::from(self.has_intercept)..]
    }

    pub fn intercept(&self) -> Option<f64> {
        self.has_intercept.then(|| self.beta[0])
    }
}

//! The `sparsefit` command line.
//!
//! Exit codes: 0 success, 2 bad flags or parameters, 3 data errors, 4 a
//! solver did not converge (the partial result is still written, marked
//! `"converged": false`).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sparsefit_core::lla::{self, LlaOptions};
use sparsefit_core::lqa::{self, LqaOptions};
use sparsefit_core::subset::{self, Criterion};
use sparsefit_core::threshold::{self, RuleMode};
use sparsefit_core::{glm, tuning, wlasso, Dataset, Error, Family, FitResult, Penalty, PenaltyFamily};

use crate::config;
use crate::data::{self, LoadedData};
use crate::driver;
use crate::error::{CliError, CliResult};
use crate::report::{self, CvJson, FitJson, RowJson, ScenarioJson, SimulationJson};

#[derive(Debug, Parser)]
#[command(name = "sparsefit", version, about = "One-step sparse estimation for penalized likelihood models")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model and write it as JSON.
    Fit(FitArgs),
    /// One-step estimates along a lambda grid, as CSV.
    Path(PathArgs),
    /// Cross-validation curve over a lambda grid, as CSV.
    Cv(CvArgs),
    /// Orthogonal-design thresholding rule on a z grid, as CSV.
    Threshold(ThresholdArgs),
    /// Run simulation scenarios from a config file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column; all other columns are predictors.
    #[arg(long)]
    response: String,
    /// gaussian, logistic or poisson.
    #[arg(long, default_value = "gaussian")]
    family: String,
    /// Add an unpenalized intercept.
    #[arg(long)]
    intercept: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitMethod {
    OneStep,
    KStep,
    FullLla,
    Lqa,
    Plqa,
    Subset,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Comma-separated, strictly descending lambda values.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Size of the default log-spaced grid.
    #[arg(long, default_value_t = wlasso::DEFAULT_GRID_POINTS)]
    points: usize,
    /// Smallest lambda of the default grid relative to lambda_max.
    #[arg(long, default_value_t = wlasso::DEFAULT_GRID_RATIO)]
    ratio: f64,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Number of LLA iterations for k-step.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// LQA deletion threshold (default 1e-8 * max |b0|).
    #[arg(long)]
    eps0: Option<f64>,
    /// Perturbed-LQA perturbation (default 1e-6 * max |b0|).
    #[arg(long)]
    tau0: Option<f64>,
    /// Convergence tolerance of iterative methods.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap of iterative methods.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "one-step")]
    method: FitMethod,
    /// Penalty spec such as `scad:lambda=0.5,a=3.7`, `lq:lambda=1,q=0.5`,
    /// `log:lambda=2` or `l1:lambda=1`.
    #[arg(long, default_value = "scad")]
    penalty: String,
    /// Overrides the lambda of --penalty.
    #[arg(long, conflicts_with = "cv")]
    lambda: Option<f64>,
    /// Choose lambda by K-fold cross-validation.
    #[arg(long)]
    cv: bool,
    #[arg(long, default_value_t = tuning::DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Subset criterion: aic or bic.
    #[arg(long, default_value = "bic")]
    criterion: String,
    /// Largest predictor count accepted by subset selection.
    #[arg(long, default_value_t = subset::DEFAULT_MAX_P)]
    max_p: usize,
    #[arg(long)]
    threads: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Penalty family (any lambda given is ignored).
    #[arg(long, default_value = "scad")]
    penalty: String,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "one-step")]
    method: FitMethod,
    #[arg(long, default_value = "scad")]
    penalty: String,
    #[arg(long, default_value_t = tuning::DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    penalty: String,
    /// exact or one-step.
    #[arg(long, default_value = "one-step")]
    mode: String,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    zmin: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    zmax: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the replication count of every scenario.
    #[arg(long)]
    reps: Option<usize>,
    /// Overrides the seed of every scenario.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the text table here instead of stdout.
    #[arg(long)]
    table: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Cv(a) => cmd_cv(&a),
        Command::Threshold(a) => cmd_threshold(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sparsefit: {e}");
            e.exit_code()
        }
    }
}

fn write_out(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
            Ok(())
        }
    }
}

fn load(a: &DataArgs) -> CliResult<LoadedData> {
    let family: Family = a.family.parse()?;
    data::load_csv(&a.data, &a.response, family, a.intercept)
}

fn parse_penalty(s: &str) -> CliResult<Penalty> {
    Ok(s.parse::<Penalty>()?)
}

fn lla_opts(s: &SolverArgs) -> LlaOptions {
    let mut o = LlaOptions::default();
    if let Some(t) = s.tol {
        o.tol = t;
    }
    if let Some(m) = s.max_iter {
        o.max_iter = m;
    }
    o
}

fn lqa_opts(s: &SolverArgs) -> LqaOptions {
    let mut o = LqaOptions::default();
    if let Some(t) = s.tol {
        o.tol = t;
    }
    if let Some(m) = s.max_iter {
        o.max_iter = m;
    }
    o
}

/// Fits `method` at the lambda of `p`, starting from `b0`.
fn fit_at(method: FitMethod, d: &Dataset, p: &Penalty, b0: &[f64], s: &SolverArgs) -> sparsefit_core::Result<FitResult> {
    match method {
        FitMethod::OneStep => lla::one_step_with(d, p, Some(b0), &lla_opts(s)),
        FitMethod::KStep => lla::k_step(d, p, Some(b0), s.k, &lla_opts(s)),
        FitMethod::FullLla => lla::full_lla(d, p, Some(b0), &lla_opts(s)),
        FitMethod::Lqa => lqa::lqa_fit(d, p, Some(b0), s.eps0, &lqa_opts(s)),
        FitMethod::Plqa => lqa::perturbed_lqa_fit(d, p, Some(b0), s.tau0, &lqa_opts(s)),
        FitMethod::Subset => Err(Error::InvalidParameter("subset selection has no lambda".into())),
    }
}

type Fitter<'a> = Box<dyn Fn(&Dataset, &[f64]) -> sparsefit_core::Result<Vec<sparsefit_core::Result<FitResult>>> + Sync + 'a>;

/// Maps a training set and a grid to one fit per grid point, starting from
/// the training-set MLE.
fn fitter<'a>(method: FitMethod, family: PenaltyFamily, s: &'a SolverArgs) -> CliResult<Fitter<'a>> {
    if method == FitMethod::Subset {
        return Err(CliError::Usage("subset selection has no lambda to cross-validate".into()));
    }
    if method == FitMethod::OneStep {
        return Ok(Box::new(tuning::one_step_fitter(family, lla_opts(s))));
    }
    Ok(Box::new(move |train: &Dataset, grid: &[f64]| {
        let b0 = glm::fit_mle(train)?;
        Ok(grid
            .iter()
            .map(|&lam| fit_at(method, train, &Penalty::new(family, lam)?, &b0, s))
            .collect())
    }))
}

fn grid_for(d: &Dataset, b0: &[f64], family: PenaltyFamily, g: &GridArgs) -> CliResult<Vec<f64>> {
    match &g.lambdas {
        Some(l) => {
            if l.is_empty() || l.windows(2).any(|w| w[1] >= w[0]) || l.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(CliError::Usage("--lambdas must be nonnegative and strictly descending".into()));
            }
            Ok(l.clone())
        }
        None => {
            if g.points == 0 || !(g.ratio > 0.0 && g.ratio < 1.0) {
                return Err(CliError::Usage("--points must be positive and --ratio in (0, 1)".into()));
            }
            Ok(wlasso::default_grid(lla::lambda_max(d, b0, family)?, g.points, g.ratio))
        }
    }
}

/// Writes the partial result of a non-converged fit, then reports the
/// failure.
fn finish_fit(
    result: sparsefit_core::Result<FitResult>,
    make: impl Fn(&FitResult) -> FitJson,
    out: Option<&Path>,
) -> CliResult<()> {
    match result {
        Ok(fit) => write_out(out, &report::to_json(&make(&fit))),
        Err(Error::NonConvergence {
            routine,
            iterations,
            partial: Some(fit),
        }) => {
            write_out(out, &report::to_json(&make(&fit)))?;
            Err(CliError::NonConvergence(format!(
                "{routine} did not converge after {iterations} iterations (partial result written)"
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    let loaded = load(&a.data)?;
    let d = &loaded.dataset;
    let family_name = d.family().to_string();
    if a.method == FitMethod::Subset {
        let criterion: Criterion = a.criterion.parse()?;
        let fit = subset::best_subset(d, criterion, a.max_p)?;
        let mut json = FitJson::new(&fit, &family_name, &loaded.predictors, None);
        json.criterion = Some(criterion.to_string());
        return write_out(a.out.as_deref(), &report::to_json(&json));
    }
    let mut penalty = parse_penalty(&a.penalty)?;
    if let Some(l) = a.lambda {
        penalty = penalty.with_lambda(l)?;
    }
    let b0 = glm::fit_mle(d)?;
    let mut cv_json = None;
    if a.cv {
        let grid = grid_for(d, &b0, penalty.family(), &a.grid)?;
        let pool = driver::pool(a.threads)?;
        let f = fitter(a.method, penalty.family(), &a.solver)?;
        let cv = driver::cross_validate(d, &grid, a.folds, a.seed, f, &pool)?;
        log::info!("cross-validation selected lambda = {}", cv.lambda_star);
        penalty = penalty.with_lambda(cv.lambda_star)?;
        cv_json = Some(CvJson::new(&cv, a.folds, a.seed));
    }
    let result = fit_at(a.method, d, &penalty, &b0, &a.solver);
    finish_fit(
        result,
        |fit| {
            let mut j = FitJson::new(fit, &family_name, &loaded.predictors, Some(&penalty));
            j.cv = cv_json.clone();
            j
        },
        a.out.as_deref(),
    )
}

fn cmd_path(a: &PathArgs) -> CliResult<()> {
    let loaded = load(&a.data)?;
    let d = &loaded.dataset;
    let family = parse_penalty(&a.penalty)?.family();
    let b0 = glm::fit_mle(d)?;
    let grid = grid_for(d, &b0, family, &a.grid)?;
    let fits = lla::one_step_path(d, family, Some(&b0), &grid, &LlaOptions::default())?;
    let mut rows = Vec::with_capacity(fits.len());
    for (fit, &lam) in fits.into_iter().zip(&grid) {
        let fit = fit?;
        let kkt = lla::one_step_kkt(d, &Penalty::new(family, lam)?, &b0, &fit.beta)?;
        rows.push((fit, kkt));
    }
    write_out(a.out.as_deref(), &report::path_csv(&loaded.predictors, d.has_intercept(), &rows))
}

fn cmd_cv(a: &CvArgs) -> CliResult<()> {
    let loaded = load(&a.data)?;
    let d = &loaded.dataset;
    let family = parse_penalty(&a.penalty)?.family();
    let b0 = glm::fit_mle(d)?;
    let grid = grid_for(d, &b0, family, &a.grid)?;
    let pool = driver::pool(a.threads)?;
    let f = fitter(a.method, family, &a.solver)?;
    let cv = driver::cross_validate(d, &grid, a.folds, a.seed, f, &pool)?;
    log::info!("cross-validation selected lambda = {}", cv.lambda_star);
    write_out(a.out.as_deref(), &report::cv_csv(&cv))
}

fn cmd_threshold(a: &ThresholdArgs) -> CliResult<()> {
    let penalty = parse_penalty(&a.penalty)?;
    let mode: RuleMode = a.mode.parse()?;
    let grid = threshold::z_grid(a.zmin, a.zmax, a.step)?;
    let curve = threshold::emit_curve(&penalty, mode, &grid)?;
    if !curve.discontinuities.is_empty() {
        log::info!("{} discontinuities flagged", curve.discontinuities.len());
    }
    write_out(a.out.as_deref(), &report::threshold_csv(&curve))
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let mut scenarios = config::load(&a.config)?;
    for s in &mut scenarios {
        if let Some(r) = a.reps {
            s.spec.replications = r;
        }
        if let Some(seed) = a.seed {
            s.spec.seed = seed;
        }
        s.spec.validate().map_err(|e| CliError::Usage(format!("scenario '{}': {e}", s.name)))?;
    }
    let pool = driver::pool(a.threads)?;
    let mut text = String::new();
    let mut json = SimulationJson {
        schema: report::SCHEMA,
        scenarios: Vec::new(),
    };
    for s in &scenarios {
        let r = driver::simulate(&s.spec, &pool)?;
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&report::table(&s.name, &r));
        json.scenarios.push(ScenarioJson {
            name: s.name.clone(),
            example: s.spec.example.to_string(),
            n: s.spec.n,
            p: s.spec.p,
            rho: s.spec.rho,
            beta_true: s.spec.beta_true.clone(),
            seed: s.spec.seed,
            replications: r.replications,
            folds: s.spec.folds,
            test_points: s.spec.test_points,
            valid: r.valid,
            rows: r.rows.iter().map(RowJson::from).collect(),
        });
    }
    if let Some(p) = &a.out {
        write_out(Some(p), &report::to_json(&json))?;
    }
    write_out(a.table.as_deref(), &text)
}

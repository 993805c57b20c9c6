//! Scenario configuration files.
//!
//! A config file is TOML. Either the top level describes one scenario, or
//! every top-level table is a named scenario (run in file order):
//!
//! ```toml
//! [ex1_n50]
//! example = "linear"
//! n = 50
//! replications = 400
//! methods = ["one_step:scad", "one_step:log", "bic"]
//! ```
//!
//! Omitted keys take the standard values for the example: 12 AR(0.5)
//! predictors, the matching true coefficients, 100 replications, seed 1,
//! five folds and 10000 Monte Carlo test points.

use std::path::Path;

use serde::Deserialize;
use sparsefit_core::sim::{Example, MethodSpec, ScenarioSpec};

use crate::error::{CliError, CliResult};

/// Methods used when a scenario lists none.
pub const DEFAULT_METHODS: [&str; 7] = [
    "one_step:scad",
    "one_step:log",
    "one_step:lq:q=0.01",
    "lqa:scad",
    "plqa:scad",
    "aic",
    "bic",
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    example: String,
    n: usize,
    p: Option<usize>,
    rho: Option<f64>,
    beta: Option<Vec<f64>>,
    replications: Option<usize>,
    seed: Option<u64>,
    methods: Option<Vec<String>>,
    test_points: Option<usize>,
    folds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedScenario {
    pub name: String,
    pub spec: ScenarioSpec,
}

fn build(name: &str, raw: RawScenario) -> CliResult<ScenarioSpec> {
    let ctx = |e: sparsefit_core::Error| CliError::Usage(format!("scenario '{name}': {e}"));
    let example: Example = raw.example.parse().map_err(ctx)?;
    let methods = match raw.methods {
        Some(m) => m.iter().map(|s| s.parse::<MethodSpec>()).collect::<Result<Vec<_>, _>>(),
        None => DEFAULT_METHODS.iter().map(|s| s.parse::<MethodSpec>()).collect(),
    }
    .map_err(ctx)?;
    let mut spec = ScenarioSpec::standard(example, raw.n, methods);
    match (raw.p, raw.beta) {
        (_, Some(beta)) => {
            spec.p = raw.p.unwrap_or(beta.len());
            spec.beta_true = beta;
        }
        (Some(p), None) => {
            spec.beta_true.resize(p, 0.0);
            spec.p = p;
        }
        (None, None) => {}
    }
    if let Some(v) = raw.rho {
        spec.rho = v;
    }
    if let Some(v) = raw.replications {
        spec.replications = v;
    }
    if let Some(v) = raw.seed {
        spec.seed = v;
    }
    if let Some(v) = raw.test_points {
        spec.test_points = v;
    }
    if let Some(v) = raw.folds {
        spec.folds = v;
    }
    Ok(spec)
}

/// Parses config text into scenarios, in file order.
pub fn parse(text: &str) -> CliResult<Vec<NamedScenario>> {
    let table: toml::Table = text.parse().map_err(|e| CliError::Data(format!("config: {e}")))?;
    let bad = |name: &str, e: toml::de::Error| CliError::Usage(format!("scenario '{name}': {e}"));
    if table.contains_key("example") {
        let raw: RawScenario = toml::Value::Table(table).try_into().map_err(|e| bad("scenario", e))?;
        return Ok(vec![NamedScenario {
            name: "scenario".into(),
            spec: build("scenario", raw)?,
        }]);
    }
    if table.is_empty() {
        return Err(CliError::Usage("config defines no scenario".into()));
    }
    table
        .into_iter()
        .map(|(name, value)| {
            if !value.is_table() {
                return Err(CliError::Usage(format!("config key '{name}' is not a scenario table")));
            }
            let raw: RawScenario = value.try_into().map_err(|e| bad(&name, e))?;
            let spec = build(&name, raw)?;
            Ok(NamedScenario { name, spec })
        })
        .collect()
}

pub fn load(path: &Path) -> CliResult<Vec<NamedScenario>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

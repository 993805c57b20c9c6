//! K-fold cross-validation of the tuning parameter.
//!
//! Observations are permuted with a seeded stream and cut into `k` blocks of
//! near-equal size. For every lambda the validation loss (mean squared error
//! for Gaussian data, mean negative log-likelihood otherwise) is averaged
//! over folds; the smallest average wins, with ties going to the larger
//! lambda. Starting values are re-estimated inside each training fold.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::glm::{self, Dataset};
use crate::lla::{self, LlaOptions};
use crate::lqa::{self, LqaOptions};
use crate::penalty::{Penalty, PenaltyFamily};
use crate::rng::{self, Purpose};

pub const DEFAULT_FOLDS: usize = 5;
/// Average losses closer than this are treated as equal.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    pub lambda_star: f64,
    /// `(lambda, mean validation loss)` in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Validation index sets, one per fold; together they partition `0..n`.
pub fn folds(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "fold count must be in [2, n={n}], got {k}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, 0, Purpose::Folds));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut block = perm[start..start + len].to_vec();
        block.sort_unstable();
        out.push(block);
        start += len;
    }
    Ok(out)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::InvalidParameter("lambda grid must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("lambda grid must be strictly descending".into()));
    }
    Ok(())
}

/// Validation losses of one fold for every grid point. Failed fits, and a
/// failure of the whole fold, give `+inf`.
pub fn fold_losses<F>(d: &Dataset, validation: &[usize], grid: &[f64], fit: &F) -> Vec<f64>
where
    F: Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>>,
{
    let mut in_valid = vec![false; d.n()];
    for &i in validation {
        in_valid[i] = true;
    }
    let train: Vec<usize> = (0..d.n()).filter(|&i| !in_valid[i]).collect();
    let train = d.subset_rows(&train);
    let valid = d.subset_rows(validation);
    let fits = match fit(&train, grid) {
        Ok(f) if f.len() == grid.len() => f,
        Ok(_) => {
            log::warn!("fold fit returned the wrong number of results");
            return vec![f64::INFINITY; grid.len()];
        }
        Err(e) => {
            log::warn!("fold fit failed: {e}");
            return vec![f64::INFINITY; grid.len()];
        }
    };
    fits.into_iter()
        .map(|r| match r.and_then(|f| glm::validation_loss(&valid, &f.beta)) {
            Ok(l) if l.is_finite() => l,
            _ => f64::INFINITY,
        })
        .collect()
}

/// Averages per-fold losses (summed in fold order) and picks the winner.
pub fn select(grid: &[f64], per_fold: &[Vec<f64>]) -> Result<CvCurve> {
    check_grid(grid)?;
    let k = per_fold.len() as f64;
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(i, &lam)| (lam, per_fold.iter().map(|f| f[i]).sum::<f64>() / k))
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &(lam, loss) in &curve {
        if !loss.is_finite() {
            continue;
        }
        best = match best {
            None => Some((lam, loss)),
            Some((bl, bv)) => {
                let tie = (loss - bv).abs() <= TIE_TOL * bv.abs().max(1.0);
                if (tie && lam > bl) || (!tie && loss < bv) {
                    Some((lam, loss))
                } else {
                    Some((bl, bv))
                }
            }
        };
    }
    let (lambda_star, _) =
        best.ok_or_else(|| Error::InvalidData("every cross-validation fit failed".into()))?;
    Ok(CvCurve { lambda_star, curve })
}

/// Cross-validates `fit`, which maps a training set and the grid to one
/// result per grid point.
pub fn cv_select<F>(d: &Dataset, grid: &[f64], k: usize, seed: u64, fit: F) -> Result<CvCurve>
where
    F: Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>>,
{
    check_grid(grid)?;
    let per_fold: Vec<Vec<f64>> = folds(d.n(), k, seed)?
        .iter()
        .map(|v| fold_losses(d, v, grid, &fit))
        .collect();
    select(grid, &per_fold)
}

/// One-step path fitter started at the training-fold MLE.
pub fn one_step_fitter(
    family: PenaltyFamily,
    opts: LlaOptions,
) -> impl Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>> {
    move |train, grid| {
        let b0 = glm::fit_mle(train)?;
        lla::one_step_path(train, family, Some(&b0), grid, &opts)
    }
}

/// LQA fitter (deletion rule) started at the training-fold MLE.
pub fn lqa_fitter(
    family: PenaltyFamily,
    opts: LqaOptions,
) -> impl Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>> {
    move |train, grid| {
        let b0 = glm::fit_mle(train)?;
        Ok(grid
            .iter()
            .map(|&lam| lqa::lqa_fit(train, &Penalty::new(family, lam)?, Some(&b0), None, &opts))
            .collect())
    }
}

/// Perturbed-LQA fitter started at the training-fold MLE.
pub fn perturbed_lqa_fitter(
    family: PenaltyFamily,
    opts: LqaOptions,
) -> impl Fn(&Dataset, &[f64]) -> Result<Vec<Result<FitResult>>> {
    move |train, grid| {
        let b0 = glm::fit_mle(train)?;
        Ok(grid
            .iter()
            .map(|&lam| {
                lqa::perturbed_lqa_fit(train, &Penalty::new(family, lam)?, Some(&b0), None, &opts)
            })
            .collect())
    }
}

/// Default grid for `family`: 100 log-spaced points from the full-data
/// lambda_max down to `1e-3` of it.
pub fn default_grid(d: &Dataset, family: PenaltyFamily) -> Result<Vec<f64>> {
    let b0 = glm::fit_mle(d)?;
    lla::default_grid(d, &b0, family)
}

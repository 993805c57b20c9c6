//! Exhaustive best-subset selection under AIC or BIC.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::glm::{self, Dataset, Family};
use crate::linalg::{solve_psd, Matrix};
use crate::math::{dot, ln};

pub const DEFAULT_MAX_P: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Aic,
    Bic,
}

impl Criterion {
    /// Per-variable cost in `2 l - cost * |M|`: 2 for AIC, `ln n` for BIC.
    pub fn cost(&self, n: usize) -> f64 {
        match self {
            Criterion::Aic => 2.0,
            Criterion::Bic => ln(n as f64),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            other => Err(Error::InvalidParameter(alloc::format!("unknown criterion '{other}'"))),
        }
    }
}

/// A scored subset, encoded as a bit mask over predictor indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub mask: u64,
    pub score: f64,
}

impl Candidate {
    pub fn size(&self) -> u32 {
        self.mask.count_ones()
    }

    pub fn predictors(&self) -> Vec<usize> {
        (0..64).filter(|&j| self.mask >> j & 1 == 1).collect()
    }

    /// Higher score wins; ties go to the smaller subset, then to the
    /// lexicographically smaller index list.
    pub fn beats(&self, other: &Candidate) -> bool {
        match self.score.total_cmp(&other.score) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match self.size().cmp(&other.size()) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.predictors() < other.predictors(),
            },
        }
    }
}

/// Shared state for scoring subsets of one dataset.
pub struct SubsetScorer<'a> {
    d: &'a Dataset,
    cost: f64,
    gram: Option<(Matrix, Vec<f64>, f64)>,
}

impl<'a> SubsetScorer<'a> {
    pub fn new(d: &'a Dataset, criterion: Criterion, max_p: usize) -> Result<Self> {
        if d.p() > max_p || d.p() >= 64 {
            return Err(Error::TooManyPredictors { p: d.p(), max_p });
        }
        let gram = (d.family() == Family::Gaussian).then(|| {
            let x = d.design();
            (x.gram(), x.tr_mul_vec(d.response()), dot(d.response(), d.response()))
        });
        Ok(SubsetScorer {
            d,
            cost: criterion.cost(d.n()),
            gram,
        })
    }

    pub fn subsets(&self) -> u64 {
        1u64 << self.d.p()
    }

    fn columns(&self, mask: u64) -> Vec<usize> {
        let off = usize::from(self.d.has_intercept());
        let mut cols: Vec<usize> = if off == 1 { vec![0] } else { Vec::new() };
        cols.extend((0..self.d.p()).filter(|&j| mask >> j & 1 == 1).map(|j| j + off));
        cols
    }

    /// Fits the subset and returns `(2 l, coefficients over the full design)`.
    /// Gaussian families use the likelihood profiled over the noise scale,
    /// `2 l = -n ln(RSS / n)`.
    pub fn fit(&self, mask: u64) -> Result<(f64, Vec<f64>)> {
        let cols = self.columns(mask);
        let mut beta = vec![0.0; self.d.ncoef()];
        if let Some((g, xty, yty)) = &self.gram {
            let n = self.d.n() as f64;
            if cols.is_empty() {
                return Ok((-n * ln(yty / n), beta));
            }
            let rhs: Vec<f64> = cols.iter().map(|&c| xty[c]).collect();
            let (b, _) = solve_psd(&g.principal(&cols), &rhs);
            let rss = (yty - dot(&b, &rhs)).max(0.0);
            for (&c, v) in cols.iter().zip(b) {
                beta[c] = v;
            }
            return Ok((-n * ln(rss / n), beta));
        }
        let ll = if cols.is_empty() {
            glm::loglik(self.d, &beta)?
        } else {
            let sub = self.d.subset_predictors(&self.predictor_list(mask));
            let b = glm::fit_mle(&sub)?;
            for (&c, v) in cols.iter().zip(&b) {
                beta[c] = *v;
            }
            glm::loglik(&sub, &b)?
        };
        Ok((2.0 * ll, beta))
    }

    fn predictor_list(&self, mask: u64) -> Vec<usize> {
        (0..self.d.p()).filter(|&j| mask >> j & 1 == 1).collect()
    }

    pub fn score(&self, mask: u64) -> Result<f64> {
        let (two_ll, _) = self.fit(mask)?;
        Ok(two_ll - self.cost * f64::from(mask.count_ones()))
    }

    /// Best candidate among masks in `range`. Subsets whose fit fails are
    /// skipped with a warning.
    pub fn best_in(&self, range: core::ops::Range<u64>) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for mask in range {
            match self.score(mask) {
                Ok(score) => {
                    let c = Candidate { mask, score };
                    if best.map_or(true, |b| c.beats(&b)) {
                        best = Some(c);
                    }
                }
                Err(e) => log::warn!("subset {mask:#x} skipped: {e}"),
            }
        }
        best
    }

    /// Builds the result for a winning candidate.
    pub fn finish(&self, best: Candidate) -> Result<FitResult> {
        let (_, beta) = self.fit(best.mask)?;
        Ok(FitResult::new(beta, self.d.has_intercept(), self.cost, Method::Subset)
            .with_trace(vec![best.score], self.subsets() as usize, true))
    }
}

/// Picks the winner of several partial searches.
pub fn merge(candidates: impl IntoIterator<Item = Option<Candidate>>) -> Option<Candidate> {
    candidates.into_iter().flatten().fold(None, |acc: Option<Candidate>, c| match acc {
        Some(b) if !c.beats(&b) => Some(b),
        _ => Some(c),
    })
}

/// Enumerates all `2^p` subsets and returns the one maximizing
/// `2 l - cost * |M|`. The `lambda` field of the result holds the cost.
pub fn best_subset(d: &Dataset, criterion: Criterion, max_p: usize) -> Result<FitResult> {
    let scorer = SubsetScorer::new(d, criterion, max_p)?;
    let best = scorer
        .best_in(0..scorer.subsets())
        .ok_or_else(|| Error::InvalidData("no subset could be fitted".into()))?;
    scorer.finish(best)
}

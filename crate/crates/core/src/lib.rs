//! Variable selection for penalized likelihood models through local linear
//! approximation of concave penalties.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: penalty families, GLM likelihoods, a weighted-L1 least
//! squares solver, the one-step / k-step / fully iterative LLA estimators,
//! the LQA baselines, best-subset selection, K-fold cross-validation,
//! orthogonal-design thresholding rules and the simulation scenarios used to
//! benchmark all of the above. File formats, the CLI and the parallel
//! simulation driver live in the `sparsefit` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod fit;
pub mod glm;
pub mod linalg;
pub mod lla;
pub mod lqa;
mod math;
pub mod rng;
pub mod penalty;
pub mod sim;
pub mod subset;
pub mod threshold;
pub mod tuning;
pub mod wlasso;

pub use error::{Error, Result};
pub use fit::{FitResult, Method};
pub use glm::{Dataset, Family};
pub use linalg::Matrix;
pub use penalty::{Penalty, PenaltyFamily};

//! Penalty families, their derivatives and the local linear / quadratic
//! approximations built from them.
//!
//! Values and derivatives live on the extended reals: the bridge and
//! logarithm penalties have an infinite right derivative at zero, and the
//! logarithm penalty is `-inf` at zero. Downstream, an infinite derivative
//! means the coordinate is pinned at zero.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::{integrate, ln, powf};

/// Conventional SCAD shape parameter.
pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyFamily {
    /// Smoothly clipped absolute deviation with shape `a > 2`.
    Scad { a: f64 },
    /// Bridge penalty `lambda * t^q`, `0 < q < 1`.
    Lq { q: f64 },
    /// `lambda * log t`.
    Log,
    /// `lambda * t`.
    L1,
}

impl PenaltyFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyFamily::Scad { .. } => "scad",
            PenaltyFamily::Lq { .. } => "lq",
            PenaltyFamily::Log => "log",
            PenaltyFamily::L1 => "l1",
        }
    }

    /// Families of the form `lambda * p(t)` with `p' > 0`; these admit the
    /// rescaled-design one-step algorithm with a lambda-free column scaling.
    pub fn is_separable(&self) -> bool {
        !matches!(self, PenaltyFamily::Scad { .. })
    }

    /// Families whose penalized objective is bounded, so that objective
    /// traces are meaningful.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, PenaltyFamily::Log)
    }
}

/// A penalty family together with its regularization level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    family: PenaltyFamily,
    lambda: f64,
}

impl Penalty {
    pub fn new(family: PenaltyFamily, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be a finite nonnegative number, got {lambda}"
            )));
        }
        match family {
            PenaltyFamily::Scad { a } if !(a > 2.0) || !a.is_finite() => {
                return Err(Error::InvalidParameter(format!(
                    "SCAD requires a > 2, got {a}"
                )))
            }
            PenaltyFamily::Lq { q } if !(q > 0.0 && q < 1.0) => {
                return Err(Error::InvalidParameter(format!(
                    "bridge penalty requires 0 < q < 1, got {q}"
                )))
            }
            _ => {}
        }
        Ok(Penalty { family, lambda })
    }

    pub fn scad(lambda: f64, a: f64) -> Result<Self> {
        Penalty::new(PenaltyFamily::Scad { a }, lambda)
    }

    pub fn lq(lambda: f64, q: f64) -> Result<Self> {
        Penalty::new(PenaltyFamily::Lq { q }, lambda)
    }

    pub fn log(lambda: f64) -> Result<Self> {
        Penalty::new(PenaltyFamily::Log, lambda)
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Penalty::new(PenaltyFamily::L1, lambda)
    }

    #[inline]
    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same family at another regularization level.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Penalty::new(self.family, lambda)
    }

    /// `p_lambda(t)` for `t >= 0`.
    pub fn value(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let lam = self.lambda;
        match self.family {
            PenaltyFamily::Scad { a } => {
                if t <= lam {
                    lam * t
                } else if t <= a * lam {
                    -(t * t - 2.0 * a * lam * t + lam * lam) / (2.0 * (a - 1.0))
                } else {
                    (a + 1.0) * lam * lam / 2.0
                }
            }
            PenaltyFamily::Lq { q } => lam * powf(t, q),
            PenaltyFamily::Log => {
                if lam == 0.0 {
                    0.0
                } else {
                    lam * ln(t)
                }
            }
            PenaltyFamily::L1 => lam * t,
        }
    }

    /// `p'_lambda(t)`; the right derivative at `t = 0`. May be `+inf`.
    pub fn derivative(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let lam = self.lambda;
        if lam == 0.0 {
            return 0.0;
        }
        match self.family {
            PenaltyFamily::Scad { a } => {
                if t <= lam {
                    lam
                } else {
                    (a * lam - t).max(0.0) / (a - 1.0)
                }
            }
            _ => lam * self.unit_derivative(t).unwrap_or(0.0),
        }
    }

    /// The lambda-free derivative `p'(t)` of a separable family
    /// (`p_lambda = lambda * p`). `None` for SCAD, which is not separable.
    pub fn unit_derivative(&self, t: f64) -> Option<f64> {
        match self.family {
            PenaltyFamily::Scad { .. } => None,
            PenaltyFamily::Lq { q } => Some(if t == 0.0 {
                f64::INFINITY
            } else {
                q * powf(t, q - 1.0)
            }),
            PenaltyFamily::Log => Some(if t == 0.0 { f64::INFINITY } else { 1.0 / t }),
            PenaltyFamily::L1 => Some(1.0),
        }
    }

    /// Ridge coefficient of the (perturbed) local quadratic approximation,
    /// `p'(t0) / (2 (t0 + tau0))`.
    pub fn lqa_coefficient(&self, t0: f64, tau0: f64) -> f64 {
        let d = self.derivative(t0);
        let denom = 2.0 * (t0 + tau0);
        if d == 0.0 {
            0.0
        } else if denom == 0.0 {
            f64::INFINITY
        } else {
            d / denom
        }
    }

    /// Tangent line of the penalty at `t0`, evaluated at `t`.
    pub fn lla_line(&self, t0: f64, t: f64) -> f64 {
        self.value(t0) + self.derivative(t0) * (t - t0)
    }

    /// Local quadratic approximation at `t0 > 0`, evaluated at `t`.
    pub fn lqa_quadratic(&self, t0: f64, t: f64) -> f64 {
        self.value(t0) + self.derivative(t0) / (2.0 * t0) * (t * t - t0 * t0)
    }

    /// The perturbed penalty `p(t) - tau * int_0^t p'(s) / (tau + s) ds`
    /// whose quadratic majorizer is the perturbed LQA.
    pub fn perturbed_value(&self, t: f64, tau: f64) -> f64 {
        let lam = self.lambda;
        if lam == 0.0 {
            return 0.0;
        }
        let integral = match self.family {
            PenaltyFamily::L1 => lam * (ln(tau + t) - ln(tau)),
            PenaltyFamily::Scad { a } => {
                let m1 = t.min(lam);
                let mut acc = lam * (ln(tau + m1) - ln(tau));
                if t > lam {
                    let m2 = t.min(a * lam);
                    let anti = |s: f64| ((a * lam + tau) * ln(tau + s) - s) / (a - 1.0);
                    acc += anti(m2) - anti(lam);
                }
                acc
            }
            PenaltyFamily::Lq { q } => {
                // u = s^q removes the singularity at the origin.
                let f = |u: f64| lam / (tau + powf(u, 1.0 / q));
                integrate(&f, 0.0, powf(t, q), 1e-13)
            }
            PenaltyFamily::Log => f64::INFINITY,
        };
        self.value(t) - tau * integral
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            PenaltyFamily::Scad { a } => write!(f, "scad:lambda={},a={}", self.lambda, a),
            PenaltyFamily::Lq { q } => write!(f, "lq:lambda={},q={}", self.lambda, q),
            PenaltyFamily::Log => write!(f, "log:lambda={}", self.lambda),
            PenaltyFamily::L1 => write!(f, "l1:lambda={}", self.lambda),
        }
    }
}

/// Parses `family[:key=value,...]`, e.g. `scad:lambda=2,a=3.7`,
/// `lq:lambda=1,q=0.5`, `log:lambda=2`, `l1:lambda=2`. A missing `lambda`
/// means 0 and a missing SCAD `a` means 3.7.
impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), p),
            None => (s, ""),
        };
        let mut lambda = 0.0;
        let mut a = DEFAULT_SCAD_A;
        let mut q: Option<f64> = None;
        for kv in params.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("`{}` is not a number in `{kv}`", v.trim()))
            })?;
            match k.trim() {
                "lambda" => lambda = v,
                "a" => a = v,
                "q" => q = Some(v),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown penalty parameter `{other}`"
                    )))
                }
            }
        }
        let family = match name.to_ascii_lowercase().as_str() {
            "scad" => PenaltyFamily::Scad { a },
            "lq" | "bridge" => PenaltyFamily::Lq {
                q: q.ok_or_else(|| Error::InvalidParameter(String::from("lq penalty needs q")))?,
            },
            "log" => PenaltyFamily::Log,
            "l1" | "lasso" => PenaltyFamily::L1,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown penalty family `{other}`"
                )))
            }
        };
        Penalty::new(family, lambda)
    }
}

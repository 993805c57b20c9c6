//! Thresholding rules in the orthonormal design.
//!
//! With `X^T X = n I` the penalized least-squares problem decouples into
//! scalar problems `min_theta (z - theta)^2 / 2 + p_lambda(|theta|)`, where
//! `z` is the least-squares coordinate. [`exact_rule`] solves that problem
//! numerically; [`one_step_rule`] is the one-step LLA solution, a soft
//! threshold at `p'_lambda(|z|)`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::penalty::{Penalty, PenaltyFamily};

/// Spacing of the search grid used by [`exact_rule`].
pub const GRID_STEP: f64 = 1e-4;
/// A jump counts as a discontinuity when `|d theta| > FACTOR * dz * (1 + |theta|)`.
pub const DISCONTINUITY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleMode {
    Exact,
    OneStep,
}

impl fmt::Display for RuleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleMode::Exact => "exact",
            RuleMode::OneStep => "one-step",
        })
    }
}

impl FromStr for RuleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "exact" => Ok(RuleMode::Exact),
            "one-step" | "onestep" => Ok(RuleMode::OneStep),
            other => Err(Error::InvalidParameter(alloc::format!("unknown rule mode '{other}'"))),
        }
    }
}

fn objective(p: &Penalty, z: f64, theta: f64) -> f64 {
    0.5 * (z - theta) * (z - theta) + p.value(theta)
}

/// Golden-section minimization of `f` on `[lo, hi]`.
fn golden<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (sqrt(5.0) - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of `(z - theta)^2 / 2 + p_lambda(|theta|)`.
///
/// Found by a scan with step [`GRID_STEP`] over `[0, |z| + 1]` (the minimizer
/// shares the sign of `z`), then golden-section refinement around the best
/// grid point. Exact ties go to the smaller `|theta|`.
///
/// The log penalty is unbounded below at the origin, so the rule returns
/// its interior local minimizer `(|z| + sqrt(z^2 - 4 lambda)) / 2` when
/// `|z| >= 2 sqrt(lambda)` and 0 otherwise.
pub fn exact_rule(p: &Penalty, z: f64) -> f64 {
    let t = z.abs();
    if t == 0.0 || !t.is_finite() {
        return if t.is_finite() { 0.0 } else { z };
    }
    let lam = p.lambda();
    if let PenaltyFamily::Log = p.family() {
        if lam == 0.0 {
            return z;
        }
        let disc = t * t - 4.0 * lam;
        return if disc < 0.0 {
            0.0
        } else {
            z.signum() * 0.5 * (t + sqrt(disc))
        };
    }
    let steps = ((t + 1.0) / GRID_STEP).ceil() as usize;
    let mut best = (0.0, objective(p, t, 0.0));
    for i in 1..=steps {
        let theta = i as f64 * GRID_STEP;
        let v = objective(p, t, theta);
        if v < best.1 {
            best = (theta, v);
        }
    }
    let lo = (best.0 - GRID_STEP).max(0.0);
    let refined = golden(|th| objective(p, t, th), lo, best.0 + GRID_STEP);
    let candidates = [refined, best.0, 0.0];
    let mut pick = (0.0, objective(p, t, 0.0));
    for &c in &candidates {
        let v = objective(p, t, c);
        if v < pick.1 || (v == pick.1 && c < pick.0) {
            pick = (c, v);
        }
    }
    if pick.0 == 0.0 {
        0.0
    } else {
        z.signum() * pick.0
    }
}

/// One-step LLA rule `sign(z) (|z| - p'_lambda(|z|))_+`; an infinite
/// derivative shrinks to zero.
pub fn one_step_rule(p: &Penalty, z: f64) -> f64 {
    let t = z.abs();
    let d = p.derivative(t);
    if !d.is_finite() || d >= t {
        0.0
    } else {
        z.signum() * (t - d)
    }
}

pub fn rule(p: &Penalty, mode: RuleMode, z: f64) -> f64 {
    match mode {
        RuleMode::Exact => exact_rule(p, z),
        RuleMode::OneStep => one_step_rule(p, z),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// `(z, theta)` in grid order.
    pub rows: Vec<(f64, f64)>,
    /// Row indices `i` such that the step from row `i - 1` to `i` jumps.
    pub discontinuities: Vec<usize>,
}

/// Evaluates the rule on `z_grid` and flags jumps larger than
/// `10 dz (1 + |theta|)`.
pub fn emit_curve(p: &Penalty, mode: RuleMode, z_grid: &[f64]) -> Result<Curve> {
    if z_grid.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidParameter("z grid must be finite".into()));
    }
    let rows: Vec<(f64, f64)> = z_grid.iter().map(|&z| (z, rule(p, mode, z))).collect();
    Ok(Curve {
        discontinuities: discontinuities(&rows),
        rows,
    })
}

pub fn discontinuities(rows: &[(f64, f64)]) -> Vec<usize> {
    (1..rows.len())
        .filter(|&i| {
            let (z0, t0) = rows[i - 1];
            let (z1, t1) = rows[i];
            (t1 - t0).abs() > DISCONTINUITY_FACTOR * (z1 - z0).abs() * (1.0 + t1.abs())
        })
        .collect()
}

/// `count` evenly spaced points from `start` to `end` inclusive, where
/// `count = round((end - start) / step) + 1`.
pub fn z_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !end.is_finite() || end < start {
        return Err(Error::InvalidParameter(alloc::format!(
            "bad z grid: start={start}, end={end}, step={step}"
        )));
    }
    let count = libm::round((end - start) / step) as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scad() -> Penalty {
        Penalty::scad(2.0, 3.7).unwrap()
    }

    #[test]
    fn exact_examples() {
        assert_eq!(exact_rule(&scad(), 0.0), 0.0);
        assert_eq!(exact_rule(&Penalty::lq(1.0, 0.5).unwrap(), 0.0), 0.0);
        assert!((exact_rule(&scad(), 10.0) - 10.0).abs() < 1e-6);
        assert!((exact_rule(&Penalty::l1(2.0).unwrap(), 3.0) - 1.0).abs() < 1e-6);
        assert!((exact_rule(&Penalty::l1(2.0).unwrap(), -3.0) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_step_examples() {
        assert_eq!(one_step_rule(&scad(), 8.0), 8.0);
        assert!((one_step_rule(&scad(), 4.0) - (4.0 - 3.4 / 2.7)).abs() < 1e-14);
        assert_eq!(one_step_rule(&scad(), 1.0), 0.0);
        assert!((one_step_rule(&Penalty::log(2.0).unwrap(), 3.0) - 7.0 / 3.0).abs() < 1e-14);
        for p in [scad(), Penalty::log(2.0).unwrap(), Penalty::lq(1.0, 0.3).unwrap()] {
            assert_eq!(one_step_rule(&p, 0.0), 0.0);
        }
    }

    #[test]
    fn exact_matches_soft_threshold() {
        let p = Penalty::l1(2.0).unwrap();
        for z in z_grid(-6.0, 6.0, 0.37).unwrap() {
            let soft = z.signum() * (z.abs() - 2.0).max(0.0);
            assert!((exact_rule(&p, z) - soft).abs() < 2e-4, "z={z}");
        }
    }

    #[test]
    fn exact_scad_closed_form() {
        // Known SCAD rule: soft threshold up to 2 lambda, then the linear
        // blend, then identity past a lambda.
        let (lam, a) = (2.0, 3.7);
        let p = scad();
        for z in z_grid(0.0, 9.0, 0.13).unwrap() {
            let expect = if z <= 2.0 * lam {
                (z - lam).max(0.0)
            } else if z <= a * lam {
                ((a - 1.0) * z - a * lam) / (a - 2.0)
            } else {
                z
            };
            assert!((exact_rule(&p, z) - expect).abs() < 1e-6, "z={z}");
        }
    }

    #[test]
    fn log_local_minimizer() {
        let p = Penalty::log(1.0).unwrap();
        assert_eq!(exact_rule(&p, 1.9), 0.0);
        let th = exact_rule(&p, 3.0);
        assert!((th * th - 3.0 * th + 1.0).abs() < 1e-12 && th > 1.5);
    }

    #[test]
    fn one_step_scad_curve_is_continuous() {
        let curve = emit_curve(&scad(), RuleMode::OneStep, &z_grid(-10.0, 10.0, 0.01).unwrap()).unwrap();
        assert_eq!(curve.rows.len(), 2001);
        assert!(curve.discontinuities.is_empty());
    }

    #[test]
    fn exact_bridge_curve_jumps() {
        let p = Penalty::lq(1.0, 0.01).unwrap();
        let curve = emit_curve(&p, RuleMode::Exact, &z_grid(-3.0, 3.0, 0.01).unwrap()).unwrap();
        assert!(!curve.discontinuities.is_empty());
    }

    #[test]
    fn grid_construction() {
        let g = z_grid(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g, [-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(z_grid(1.0, 0.0, 0.1).is_err());
        assert!(z_grid(0.0, 1.0, 0.0).is_err());
        assert_eq!("one_step".parse::<RuleMode>().unwrap(), RuleMode::OneStep);
    }
}

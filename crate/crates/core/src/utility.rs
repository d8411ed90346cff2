//! Utility functions on `[0, H]` and their Lipschitz coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerated overshoot outside `[0, H]` before an evaluation is rejected.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Default shift for the CRRA family, which keeps `U'(0)` finite.
pub const DEFAULT_CRRA_SHIFT: f64 = 0.05;

/// JSON description of a utility, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    Linear {
        #[serde(default = "one")]
        slope: f64,
    },
    /// `U(y) = (1 - exp(-beta y)) / beta`; concave for `beta > 0`, convex for `beta < 0`.
    Exponential { beta: f64 },
    /// `U(y) = ((y + c)^(1-gamma) - c^(1-gamma)) / (1 - gamma)` with shift `c`.
    Crra {
        gamma: f64,
        #[serde(default)]
        shift: Option<f64>,
    },
    /// Linear interpolation between `(y, U(y))` knots starting at `(0, 0)`.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    Linear { slope: f64 },
    Exponential { beta: f64 },
    Crra { gamma: f64, shift: f64 },
    PiecewiseLinear { knots: Vec<(f64, f64)> },
}

/// A validated utility on `[0, horizon_cap]` with its cached Lipschitz coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityFn {
    kind: UtilityKind,
    horizon_cap: f64,
    kappa: f64,
}

/// Builds a utility for horizon `horizon`, rejecting parameters outside each
/// family's valid range.
pub fn make_utility(spec: &UtilitySpec, horizon: usize) -> Result<UtilityFn> {
    if horizon == 0 {
        return Err(Error::InvalidUtility("horizon must be at least 1".into()));
    }
    let h = horizon as f64;
    let kind = match spec {
        UtilitySpec::Linear { slope } => {
            if !(slope.is_finite() && *slope > 0.0) {
                return Err(Error::InvalidUtility(format!(
                    "linear slope must be positive and finite, got {slope}"
                )));
            }
            UtilityKind::Linear { slope: *slope }
        }
        UtilitySpec::Exponential { beta } => {
            if !beta.is_finite() {
                return Err(Error::InvalidUtility(format!("beta must be finite, got {beta}")));
            }
            if *beta == 0.0 {
                return Err(Error::InvalidUtility(
                    "exponential utility needs beta != 0; use the linear family".into(),
                ));
            }
            UtilityKind::Exponential { beta: *beta }
        }
        UtilitySpec::Crra { gamma, shift } => {
            if !(*gamma > 0.0 && *gamma < 1.0) {
                return Err(Error::InvalidUtility(format!(
                    "crra gamma must lie in (0, 1), got {gamma}"
                )));
            }
            let shift = shift.unwrap_or(DEFAULT_CRRA_SHIFT);
            if !(shift.is_finite() && shift > 0.0) {
                return Err(Error::InvalidUtility(format!(
                    "crra shift must be positive, got {shift}"
                )));
            }
            UtilityKind::Crra {
                gamma: *gamma,
                shift,
            }
        }
        UtilitySpec::PiecewiseLinear { knots } => {
            validate_knots(knots, h)?;
            UtilityKind::PiecewiseLinear {
                knots: knots.clone(),
            }
        }
    };
    let mut u = UtilityFn {
        kind,
        horizon_cap: h,
        kappa: 0.0,
    };
    u.kappa = lipschitz_coeff(&u, horizon);
    Ok(u)
}

fn validate_knots(knots: &[(f64, f64)], h: f64) -> Result<()> {
    let first = knots
        .first()
        .ok_or_else(|| Error::InvalidUtility("piecewise utility needs knots".into()))?;
    if *first != (0.0, 0.0) {
        return Err(Error::InvalidUtility(format!(
            "first knot must be (0, 0), got ({}, {})",
            first.0, first.1
        )));
    }
    if knots.len() < 2 {
        return Err(Error::InvalidUtility("piecewise utility needs at least two knots".into()));
    }
    for w in knots.windows(2) {
        let ((y0, u0), (y1, u1)) = (w[0], w[1]);
        if !(y1 > y0 && u1 > u0) || !y1.is_finite() || !u1.is_finite() {
            return Err(Error::InvalidUtility(format!(
                "knots must be strictly increasing in both coordinates: ({y0}, {u0}) then ({y1}, {u1})"
            )));
        }
    }
    let last = knots[knots.len() - 1].0;
    if last < h {
        return Err(Error::InvalidUtility(format!(
            "knots end at y = {last} but must cover [0, {h}]"
        )));
    }
    Ok(())
}

/// Exact supremum of `|U'|` on `[0, horizon]`.
pub fn lipschitz_coeff(u: &UtilityFn, horizon: usize) -> f64 {
    let h = horizon as f64;
    match &u.kind {
        UtilityKind::Linear { slope } => *slope,
        // U'(y) = exp(-beta y), monotone in y.
        UtilityKind::Exponential { beta } => {
            if *beta > 0.0 {
                1.0
            } else {
                (-beta * h).exp()
            }
        }
        // U'(y) = (y + c)^(-gamma), largest at y = 0.
        UtilityKind::Crra { gamma, shift } => shift.powf(-gamma),
        UtilityKind::PiecewiseLinear { knots } => knots
            .windows(2)
            .filter(|w| w[0].0 < h)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(0.0, f64::max),
    }
}

impl UtilityFn {
    pub fn kind(&self) -> &UtilityKind {
        &self.kind
    }

    pub fn horizon_cap(&self) -> f64 {
        self.horizon_cap
    }

    /// Lipschitz coefficient on `[0, horizon_cap]`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `U(y)`; values within [`DOMAIN_SLACK`] of the domain are clamped.
    pub fn eval(&self, y: f64) -> Result<f64> {
        let hi = self.horizon_cap;
        if !(y >= -DOMAIN_SLACK && y <= hi + DOMAIN_SLACK) {
            return Err(Error::OutOfDomain { value: y, lo: 0.0, hi });
        }
        Ok(self.eval_clamped(y.clamp(0.0, hi)))
    }

    /// `U(y)` without the domain check. Callers guarantee `0 <= y <= H`.
    pub(crate) fn eval_clamped(&self, y: f64) -> f64 {
        match &self.kind {
            UtilityKind::Linear { slope } => slope * y,
            UtilityKind::Exponential { beta } => -(-beta * y).exp_m1() / beta,
            UtilityKind::Crra { gamma, shift } => {
                let e = 1.0 - gamma;
                ((y + shift).powf(e) - shift.powf(e)) / e
            }
            UtilityKind::PiecewiseLinear { knots } => {
                if y == 0.0 {
                    return 0.0;
                }
                let i = knots.partition_point(|&(ky, _)| ky < y);
                let (y1, u1) = knots[i.min(knots.len() - 1)];
                let (y0, u0) = knots[i - 1];
                u0 + (u1 - u0) * (y - y0) / (y1 - y0)
            }
        }
    }
}

/// Free-function form of [`UtilityFn::eval`].
pub fn eval_utility(u: &UtilityFn, y: f64) -> Result<f64> {
    u.eval(y)
}

//! HJB nonlinearity, its derivative in the value factor, the Hamiltonian and
//! the optimal feedback maps.
//!
//! With running cost `eta xi^2 + theta gamma mu^2 + lambda x^2` and value
//! ansatz `V = v x^2`, minimizing the Hamiltonian in `(xi, mu)` yields
//!
//! ```text
//!   F(y, v)  = lambda - v^2/eta + theta gamma v/(gamma + v) - theta v
//!   xi*      = (v / eta) x
//!   mu*      = (v / (gamma + v)) x
//! ```
//!
//! and `H(xi*, mu*) = F(y, v) x^2`. The corner `gamma = 0` uses the continuous
//! extension `theta gamma v/(gamma+v) := 0`. Negative `v` is rejected rather
//! than clamped: the value factor is nonnegative, so a negative input means
//! the caller's solver has gone wrong.

use thiserror::Error;

use crate::model::CoefficientValues;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("non-finite input ({0})")]
    NonFiniteInput(&'static str),
    #[error("value factor must be nonnegative, got {0}")]
    NegativeValueFactor(f64),
    #[error("degenerate feedback denominator: gamma = v = 0")]
    DegenerateDenominator,
}

/// Optimal feedback pair at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackPair {
    /// Primary-venue trading rate (shares per unit time).
    pub xi_rate: f64,
    /// Standing dark-pool order size (shares).
    pub mu_size: f64,
}

/// Dark-pool exchange term `theta gamma v / (gamma + v)`, with the
/// continuous extension 0 at `gamma = 0`.
pub(crate) fn jump_exchange(v: f64, gamma: f64, theta: f64) -> f64 {
    if gamma == 0.0 {
        0.0
    } else {
        theta * gamma * v / (gamma + v)
    }
}

pub fn nonlinearity(coeffs: &CoefficientValues, v: f64, theta: f64) -> Result<f64, HamiltonianError> {
    check_inputs(coeffs, v, theta)?;
    Ok(coeffs.lambda - v * v / coeffs.eta + jump_exchange(v, coeffs.gamma, theta) - theta * v)
}

/// Partial derivative of [`nonlinearity`] in `v`:
/// `-2v/eta + theta gamma^2/(gamma+v)^2 - theta` (and `-2v/eta - theta` at
/// `gamma = 0`, the derivative of the extended F).
pub fn nonlinearity_dv(coeffs: &CoefficientValues, v: f64, theta: f64) -> Result<f64, HamiltonianError> {
    check_inputs(coeffs, v, theta)?;
    let jump = if coeffs.gamma == 0.0 {
        0.0
    } else {
        let d = coeffs.gamma + v;
        theta * coeffs.gamma * coeffs.gamma / (d * d)
    };
    Ok(-2.0 * v / coeffs.eta + jump - theta)
}

pub fn feedback_controls(
    v: f64,
    coeffs: &CoefficientValues,
    x: f64,
) -> Result<FeedbackPair, HamiltonianError> {
    check_inputs(coeffs, v, 0.0)?;
    if !x.is_finite() {
        return Err(HamiltonianError::NonFiniteInput("x"));
    }
    if coeffs.gamma + v == 0.0 {
        return Err(HamiltonianError::DegenerateDenominator);
    }
    Ok(FeedbackPair {
        xi_rate: v / coeffs.eta * x,
        mu_size: v / (coeffs.gamma + v) * x,
    })
}

/// Hamiltonian value at an arbitrary control pair:
/// `-2 v x xi + theta (v (x - mu)^2 - v x^2) + eta xi^2 + theta gamma mu^2 + lambda x^2`.
pub fn hamiltonian_at(
    coeffs: &CoefficientValues,
    v: f64,
    x: f64,
    xi: f64,
    mu: f64,
    theta: f64,
) -> f64 {
    let dx = x - mu;
    -2.0 * v * x * xi + theta * (v * dx * dx - v * x * x)
        + coeffs.eta * xi * xi
        + theta * coeffs.gamma * mu * mu
        + coeffs.lambda * x * x
}

fn check_inputs(coeffs: &CoefficientValues, v: f64, theta: f64) -> Result<(), HamiltonianError> {
    if !coeffs.eta.is_finite() || !coeffs.lambda.is_finite() || !coeffs.gamma.is_finite() {
        return Err(HamiltonianError::NonFiniteInput("coefficients"));
    }
    if !v.is_finite() {
        return Err(HamiltonianError::NonFiniteInput("v"));
    }
    if !theta.is_finite() {
        return Err(HamiltonianError::NonFiniteInput("theta"));
    }
    if v < 0.0 {
        return Err(HamiltonianError::NegativeValueFactor(v));
    }
    Ok(())
}

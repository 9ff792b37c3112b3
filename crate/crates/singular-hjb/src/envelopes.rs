//! Analytic sub/supersolution envelopes, the global a-priori bound, and the
//! barrier function used by the comparison machinery.
//!
//! On the terminal window `t in [T - delta, T)` with `m = ||L eta/eta||`,
//! `l = ||lambda/eta||`, `K' = m + 1`:
//!
//! ```text
//!   lower(t,y) = eta(y) (1 - m (T-t)) / (e^{theta (T-t)} (T-t))
//!   upper(t,y) = eta(y) (1 + m (T-t)) / (T-t) + e^{K'(T-t)} l eta(y)
//! ```
//!
//! sandwich the exact value factor, and `C~ eta(y)` bounds it globally. The
//! barrier `chi = e^{k_n (T-t)} (1+y^2)^{n/2} / (T-t)` has strictly positive
//! residual `-d_t chi - L chi + chi/(T-t)` once `k_n` dominates `L h / h`.

use thiserror::Error;

use crate::model::{ModelSpec, PowerCoeff, SupNorms};
use crate::pdesolver::ValueSurface;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("t = {t} outside the envelope window [{window_start}, {horizon})")]
    OutsideDeltaWindow { t: f64, window_start: f64, horizon: f64 },
    #[error("no grid nodes intersect the envelope window")]
    EmptyWindow,
}

/// Default relative slack granted to a finite-difference surface in the
/// sandwich check; the envelopes bound the exact solution, not its
/// discretization.
pub const DEFAULT_SANDWICH_SLACK: f64 = 1e-2;

fn window_check(model: &ModelSpec, norms: &SupNorms, t: f64) -> Result<f64, EnvelopeError> {
    let window_start = model.horizon - norms.delta;
    let tol = 1e-12 * model.horizon.max(1.0);
    if t < window_start - tol || t >= model.horizon {
        return Err(EnvelopeError::OutsideDeltaWindow { t, window_start, horizon: model.horizon });
    }
    Ok(model.horizon - t)
}

/// Subsolution envelope; nonnegative on the admitted window.
pub fn lower_envelope(model: &ModelSpec, norms: &SupNorms, t: f64, y: f64) -> Result<f64, EnvelopeError> {
    let rem = window_check(model, norms, t)?;
    let eta = model.eta.eval(y);
    Ok(eta * (1.0 - norms.m_ratio * rem) / ((model.theta * rem).exp() * rem))
}

/// The exponential majorant `e^{K'(T-t)} l eta(y)` of `lambda`.
pub fn lambda_majorant(model: &ModelSpec, norms: &SupNorms, t: f64, y: f64) -> f64 {
    (norms.k_prime * (model.horizon - t)).exp() * norms.l_ratio * model.eta.eval(y)
}

/// Supersolution envelope.
pub fn upper_envelope(model: &ModelSpec, norms: &SupNorms, t: f64, y: f64) -> Result<f64, EnvelopeError> {
    let rem = window_check(model, norms, t)?;
    let eta = model.eta.eval(y);
    Ok(eta * (1.0 + norms.m_ratio * rem) / rem + lambda_majorant(model, norms, t, y))
}

/// Global upper bound for the value factor: `C~ eta(y)` away from the
/// terminal window, the supersolution envelope inside it.
pub fn global_bound(model: &ModelSpec, norms: &SupNorms, t: f64, y: f64) -> f64 {
    debug_assert!((0.0..model.horizon).contains(&t));
    if t <= model.horizon - norms.delta {
        norms.c_tilde * model.eta.eval(y)
    } else {
        upper_envelope(model, norms, t, y).expect("t inside the window by construction")
    }
}

/// Barrier `chi(t,y) = e^{k_n (T-t)} (1+y^2)^{n/2} / (T-t)`.
pub fn barrier(n: u32, k_n: f64, t: f64, y: f64, horizon: f64) -> f64 {
    debug_assert!(t < horizon && n >= 1);
    let rem = horizon - t;
    (k_n * rem).exp() * (1.0 + y * y).powf(n as f64 / 2.0) / rem
}

/// Residual `-d_t chi - L chi + chi/(T-t)`, via the analytic identity
/// `(k_n h - L h) e^{k_n (T-t)} / (T-t)` with `h = (1+y^2)^{n/2}`.
pub fn barrier_residual(model: &ModelSpec, n: u32, k_n: f64, t: f64, y: f64) -> f64 {
    let rem = model.horizon - t;
    let h = PowerCoeff::new(1.0, n as f64 / 2.0);
    (k_n * rem).exp() * (k_n * h.eval(y) - model.generator_power(&h, y)) / rem
}

/// Constructive choice of the barrier constant: one more than the sampled sup
/// of `L h / h`, plus a unit margin.
pub fn choose_kn(model: &ModelSpec, n: u32, y_lo: f64, y_hi: f64, n_samples: usize) -> f64 {
    let h = PowerCoeff::new(1.0, n as f64 / 2.0);
    let step = (y_hi - y_lo) / (n_samples - 1) as f64;
    let mut sup = f64::NEG_INFINITY;
    for i in 0..n_samples {
        let y = y_lo + step * i as f64;
        sup = sup.max(model.generator_power(&h, y) / h.eval(y));
    }
    1.0 + sup + 1.0
}

/// Width `delta_0` of the half-level window: the largest `u <= delta` with
/// `(1 - m u) e^{-theta u} >= 1/2` for all smaller `u`, found by bisection.
pub fn delta_half(norms: &SupNorms, theta: f64) -> f64 {
    let g = |u: f64| (1.0 - norms.m_ratio * u) * (-theta * u).exp() - 0.5;
    if g(norms.delta) >= 0.0 {
        return norms.delta;
    }
    let (mut lo, mut hi) = (0.0, norms.delta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Node-by-node sandwich check of a solved surface on the terminal window.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeReport {
    pub nodes_checked: usize,
    pub violations: usize,
    pub max_rel_violation: f64,
    /// (t interval, y interval) actually covered.
    pub region: ((f64, f64), (f64, f64)),
    /// Nodes inside the half-level window `[T - delta_0, T)`.
    pub interval_nodes: usize,
    /// Nodes there failing `v (T-t) >= eta/2` (with the same slack).
    pub interval_violations: usize,
    /// `max_y |v (T-t)/eta - 1|` on the latest time slice.
    pub asymp_max_dev: f64,
}

pub fn sandwich_report(
    surface: &ValueSurface,
    norms: &SupNorms,
    scheme_slack: f64,
) -> Result<EnvelopeReport, EnvelopeError> {
    let model = surface.model();
    let grid = surface.grid();
    let slack = 1e-8 + scheme_slack;
    let window_start = model.horizon - norms.delta;
    let tol = 1e-12 * model.horizon.max(1.0);

    let k_first = grid.t_nodes.partition_point(|&t| t < window_start - tol);
    if k_first >= grid.t_nodes.len() {
        return Err(EnvelopeError::EmptyWindow);
    }

    let delta0 = delta_half(norms, model.theta);
    let half_start = model.horizon - delta0;

    let mut nodes_checked = 0;
    let mut violations = 0;
    let mut max_rel: f64 = 0.0;
    let mut interval_nodes = 0;
    let mut interval_violations = 0;

    for k in k_first..grid.t_nodes.len() {
        let t = grid.t_nodes[k];
        let rem = model.horizon - t;
        for (i, &y) in grid.y_nodes.iter().enumerate() {
            let v = surface.values()[k][i];
            let lo = lower_envelope(model, norms, t, y)?;
            let hi = upper_envelope(model, norms, t, y)?;
            nodes_checked += 1;
            let low_defect = (lo - v) / lo.max(1e-300);
            let high_defect = (v - hi) / hi;
            if low_defect > slack || high_defect > slack {
                violations += 1;
            }
            max_rel = max_rel.max(low_defect.max(high_defect).max(0.0));
            if t >= half_start - tol {
                interval_nodes += 1;
                let eta = model.eta.eval(y);
                if v * rem < 0.5 * eta * (1.0 - slack) {
                    interval_violations += 1;
                }
            }
        }
    }

    let t_last = *grid.t_nodes.last().unwrap();
    let rem_last = model.horizon - t_last;
    let last = surface.values().last().unwrap();
    let asymp_max_dev = grid
        .y_nodes
        .iter()
        .zip(last.iter())
        .map(|(&y, &v)| (v * rem_last / model.eta.eval(y) - 1.0).abs())
        .fold(0.0f64, f64::max);

    Ok(EnvelopeReport {
        nodes_checked,
        violations,
        max_rel_violation: max_rel,
        region: (
            (grid.t_nodes[k_first], t_last),
            (grid.y_nodes[0], *grid.y_nodes.last().unwrap()),
        ),
        interval_nodes,
        interval_violations,
        asymp_max_dev,
    })
}

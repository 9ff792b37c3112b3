//! Scalar backward ODE benchmark for separable models.
//!
//! When `L eta = kappa eta` and `lambda = gamma = eta`, the value factor
//! separates as `v(t,y) = a(t) eta(y)` with
//!
//! ```text
//!   a'(t) = a^2 + (theta - kappa) a - 1 - theta a / (1 + a),   a(T-) = +infinity,
//! ```
//!
//! integrated backward from the leading-order layer `a(T - eps) = 1/eps`.
//! The reference surface `a(t) eta(y)` is the independent oracle for the PDE
//! solver on such models.

use thiserror::Error;

use crate::pdesolver::ValueSurface;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("backward integration left (0, {bound:.3e}) at t = {t} (a = {a:.6e})")]
    BlowupBackward { t: f64, a: f64, bound: f64 },
    #[error("a(t) is not increasing toward the terminal layer")]
    NonMonotoneNearTerminal,
    #[error("model is not certified separable: {0}")]
    NotSeparable(String),
    #[error("ode table does not match the surface model: {0}")]
    TableMismatch(String),
    #[error("bad parameters: {0}")]
    BadParams(String),
}

/// Right-hand side of the backward separable ODE.
pub fn ode_rhs(a: f64, theta: f64, kappa: f64) -> f64 {
    a * a + (theta - kappa) * a - 1.0 - theta * a / (1.0 + a)
}

/// Tabulated `a(t)` on an increasing grid ending at `T - eps_ode`.
#[derive(Debug, Clone)]
pub struct OdeTable {
    pub t_nodes: Vec<f64>,
    pub a_values: Vec<f64>,
    pub theta: f64,
    pub kappa: f64,
    pub eps_ode: f64,
}

impl OdeTable {
    /// Linear interpolation; `t` is clamped to the table range.
    pub fn eval(&self, t: f64) -> f64 {
        let tn = &self.t_nodes;
        let t = t.clamp(tn[0], tn[tn.len() - 1]);
        let k = match tn.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.a_values[k],
            Err(ins) => ins.saturating_sub(1).min(tn.len() - 2),
        };
        let w = (t - tn[k]) / (tn[k + 1] - tn[k]);
        self.a_values[k] * (1.0 - w) + self.a_values[k + 1] * w
    }
}

/// Integrate the ODE backward from `a(T - eps_ode) = 1/eps_ode` with classical
/// RK4 on a grid graded like the PDE grid.
///
/// Near the layer the profile is `a ~ 1/(T-t)`, so accuracy is governed by
/// `h / (T-t)`, not `h`; each outer interval is internally subdivided so a
/// substep never exceeds `0.05 (T - t)`. Outer nodes are unchanged.
pub fn solve_a(
    theta: f64,
    kappa: f64,
    horizon: f64,
    eps_ode: f64,
    n_steps: usize,
    grading_ratio: f64,
) -> Result<OdeTable, OdeError> {
    if !(eps_ode > 0.0 && eps_ode <= horizon / 10.0) {
        return Err(OdeError::BadParams(format!("eps_ode = {eps_ode} outside (0, T/10]")));
    }
    if n_steps < 100 {
        return Err(OdeError::BadParams(format!("n_steps = {n_steps} < 100")));
    }
    let grid = crate::pdesolver::build_grid(-1.0, 1.0, 5, horizon, eps_ode, n_steps, grading_ratio)
        .map_err(|e| OdeError::BadParams(e.to_string()))?;
    let t_nodes = grid.t_nodes;

    let bound = 10.0 / eps_ode;
    let n = t_nodes.len();
    let mut a_values = vec![0.0; n];
    a_values[n - 1] = 1.0 / eps_ode;

    for k in (0..n - 1).rev() {
        let mut s = t_nodes[k + 1];
        let mut a = a_values[k + 1];
        let target = t_nodes[k];
        while s > target {
            let cap = 0.05 * (horizon - s);
            let h = (s - target).min(cap.max(1e-14));
            a = rk4_backward(a, h, theta, kappa);
            s -= h;
            if !(a > 0.0 && a < bound) {
                return Err(OdeError::BlowupBackward { t: s, a, bound });
            }
        }
        a_values[k] = a;
    }

    // sanity: a must increase toward the singular layer over the last decade
    let tail = n.saturating_sub(n / 10).max(1);
    for k in tail..n {
        if a_values[k] <= a_values[k - 1] {
            return Err(OdeError::NonMonotoneNearTerminal);
        }
    }

    Ok(OdeTable { t_nodes, a_values, theta, kappa, eps_ode })
}

fn rk4_backward(a: f64, h: f64, theta: f64, kappa: f64) -> f64 {
    let h = -h;
    let k1 = ode_rhs(a, theta, kappa);
    let k2 = ode_rhs(a + 0.5 * h * k1, theta, kappa);
    let k3 = ode_rhs(a + 0.5 * h * k2, theta, kappa);
    let k4 = ode_rhs(a + h * k3, theta, kappa);
    a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    pub max_rel_error: f64,
    pub nodes_compared: usize,
    /// Region actually compared: |y| <= y_abs_max, t <= t_max.
    pub y_abs_max: f64,
    pub t_max: f64,
}

/// Maximum relative deviation of a solved surface from the separable
/// reference `a(t) eta(y)` over the interior region.
pub fn separable_compare(
    surface: &ValueSurface,
    table: &OdeTable,
    y_abs_max: f64,
    t_max: f64,
) -> Result<CompareReport, OdeError> {
    let model = surface.model();
    let kappa = model
        .separable_kappa()
        .ok_or_else(|| OdeError::NotSeparable(model.name.clone()))?;
    if (table.kappa - kappa).abs() > 1e-12 || (table.theta - model.theta).abs() > 1e-12 {
        return Err(OdeError::TableMismatch(format!(
            "table (theta={}, kappa={}) vs model (theta={}, kappa={kappa})",
            table.theta, table.kappa, model.theta
        )));
    }

    let grid = surface.grid();
    let mut max_rel = 0.0f64;
    let mut nodes = 0;
    for (k, &t) in grid.t_nodes.iter().enumerate() {
        if t > t_max {
            continue;
        }
        let a = table.eval(t);
        for (i, &y) in grid.y_nodes.iter().enumerate() {
            if y.abs() > y_abs_max {
                continue;
            }
            let reference = a * model.eta.eval(y);
            let rel = (surface.values()[k][i] - reference).abs() / reference;
            max_rel = max_rel.max(rel);
            nodes += 1;
        }
    }
    if nodes == 0 {
        return Err(OdeError::BadParams("comparison region contains no grid nodes".into()));
    }
    Ok(CompareReport { max_rel_error: max_rel, nodes_compared: nodes, y_abs_max, t_max })
}

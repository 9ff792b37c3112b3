//! Backward finite-difference solver for the singular-terminal parabolic PDE
//!
//! ```text
//!   -dv/dt - L v - F(y, v) = 0,        v(t, y) -> +infinity as t -> T,
//! ```
//!
//! on a truncated 1-d spatial grid. The singularity is handled by solving for
//! `v` directly on `[0, T - eps]` with an asymptotic terminal layer
//! `v(T - eps, y) = eta(y)/eps` (leading order of the blow-up profile), not by
//! the `w = (T-t) v` change of variables; the `w` accessor exists for
//! diagnostics only.
//!
//! Each backward step marches the eta-scaled factor `u = v/eta`, which obeys
//!
//! ```text
//!   -du/dt - 1/2 sigma^2 u'' - (b + sigma^2 eta'/eta) u'
//!          - (L eta/eta) u - F(y, eta u)/eta = 0,
//! ```
//!
//! an equation whose coefficients are bounded ratios by assumption. The
//! scaling matters at the spatial boundaries: in `v` units the drift points
//! outward against a growing `eta` for part of the catalog and no monotone
//! extrapolating boundary row is stable there, while in `u` units the
//! effective drift turns inward (or `u` is constant in `y` outright) and the
//! truncation is benign. Public slices stay in `v` units.
//!
//! Per step of size `tau`:
//! - implicit centered second difference for `1/2 sigma^2 d_yy`,
//! - implicit first-order upwind for the effective drift (monotone, M-matrix),
//! - the stiff quadratic `-u^2` linearized as `-u_k u_{k+1}` on the implicit
//!   diagonal (the exact Moebius step for the blow-up mode `u ~ 1/(T-t)`,
//!   which is why the terminal layer survives marching),
//! - the remaining reaction `(L eta/eta) u + lambda/eta + theta gamma u/(gamma
//!   + eta u) - theta u` evaluated at the previous slice (explicit).
//!
//! Boundary condition in `y`: linear extrapolation, i.e. the second spatial
//! difference is forced to zero at the two boundary nodes, so diffusion
//! vanishes from their rows. Inflow drift there is implicit upwind as usual;
//! outflow drift uses the one-sided slope with the neighbour value lagged one
//! slice, keeping the row diagonally dominant. Every solve asserts the
//! M-matrix structure during factorization.

use thiserror::Error;

use crate::envelopes;
use crate::hamiltonian;
use crate::model::{ModelSpec, SupNorms};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("bad grid parameters: {0}")]
    BadGridParams(String),
    #[error("tridiagonal system lost diagonal dominance at row {row} (t = {t}); reduce the time step")]
    SingularTridiagonal { row: usize, t: f64 },
    #[error("query (t = {t}, y = {y}) outside the grid hull")]
    OutOfGrid { t: f64, y: f64 },
    #[error("terminal layer at eps = {eps} lies outside the envelope window delta = {delta}")]
    LayerOutsideWindow { eps: f64, delta: f64 },
    #[error("surface shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("negative input where a nonnegative slice was required: {0}")]
    NegativeInput(String),
}

/// Space-time mesh. Time nodes run from 0 to `T - eps` and may be graded
/// (geometric step sizes, smallest adjacent to the terminal layer); space
/// nodes are uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub eps: f64,
    pub grading_ratio: f64,
}

impl Grid {
    pub fn dy(&self) -> f64 {
        (self.y_nodes[self.y_nodes.len() - 1] - self.y_nodes[0]) / (self.y_nodes.len() - 1) as f64
    }

    pub fn n_t(&self) -> usize {
        self.t_nodes.len() - 1
    }

    pub fn n_y(&self) -> usize {
        self.y_nodes.len()
    }
}

/// Build a grid with `n_t` backward steps on `[0, T - eps]` and `n_y` uniform
/// space nodes on `[y_min, y_max]`.
///
/// `grading_ratio = 1` gives uniform time steps; `> 1` gives a geometric
/// progression with the smallest step adjacent to `T - eps`.
pub fn build_grid(
    y_min: f64,
    y_max: f64,
    n_y: usize,
    horizon: f64,
    eps: f64,
    n_t: usize,
    grading_ratio: f64,
) -> Result<Grid, PdeError> {
    if !(y_min < y_max) {
        return Err(PdeError::BadGridParams(format!("y_min {y_min} >= y_max {y_max}")));
    }
    if !(eps > 0.0 && eps <= horizon / 10.0) {
        return Err(PdeError::BadGridParams(format!(
            "eps must lie in (0, T/10], got {eps} for T = {horizon}"
        )));
    }
    if n_y < 3 {
        return Err(PdeError::BadGridParams(format!("n_y = {n_y} < 3")));
    }
    if n_t < 3 {
        return Err(PdeError::BadGridParams(format!("n_t = {n_t} < 3")));
    }
    if !(grading_ratio >= 1.0) || !grading_ratio.is_finite() {
        return Err(PdeError::BadGridParams(format!("grading_ratio = {grading_ratio} < 1")));
    }

    let span = horizon - eps;
    let mut t_nodes = vec![0.0; n_t + 1];
    t_nodes[n_t] = span;
    if grading_ratio == 1.0 {
        for (k, node) in t_nodes.iter_mut().enumerate() {
            *node = span * k as f64 / n_t as f64;
        }
        t_nodes[n_t] = span;
    } else {
        let r = grading_ratio;
        let r_pow = r.powi(n_t as i32);
        if !r_pow.is_finite() {
            return Err(PdeError::BadGridParams("grading ratio overflows the step progression".into()));
        }
        let h_last = span * (r - 1.0) / (r_pow - 1.0);
        let mut step = h_last;
        for k in (0..n_t).rev() {
            t_nodes[k] = t_nodes[k + 1] - step;
            step *= r;
        }
        t_nodes[0] = 0.0;
        for k in 0..n_t {
            if !(t_nodes[k] < t_nodes[k + 1]) {
                return Err(PdeError::BadGridParams("graded time nodes are not increasing".into()));
            }
        }
    }

    let dy = (y_max - y_min) / (n_y - 1) as f64;
    let y_nodes: Vec<f64> = (0..n_y).map(|i| y_min + dy * i as f64).collect();

    Ok(Grid { t_nodes, y_nodes, eps, grading_ratio })
}

/// Choice of imposed values at `t = T - eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerMode {
    /// Leading-order asymptotic `eta(y)/eps` (default).
    EtaOverEps,
    /// Geometric mean of the lower and upper envelopes at `T - eps`.
    EnvelopeGeomean,
}

pub fn terminal_layer(
    model: &ModelSpec,
    norms: &SupNorms,
    grid: &Grid,
    mode: LayerMode,
) -> Result<Vec<f64>, PdeError> {
    let t = model.horizon - grid.eps;
    match mode {
        LayerMode::EtaOverEps => Ok(grid.y_nodes.iter().map(|&y| model.eta.eval(y) / grid.eps).collect()),
        LayerMode::EnvelopeGeomean => {
            if grid.eps >= norms.delta {
                return Err(PdeError::LayerOutsideWindow { eps: grid.eps, delta: norms.delta });
            }
            grid.y_nodes
                .iter()
                .map(|&y| {
                    let lo = envelopes::lower_envelope(model, norms, t, y)
                        .map_err(|_| PdeError::LayerOutsideWindow { eps: grid.eps, delta: norms.delta })?;
                    let hi = envelopes::upper_envelope(model, norms, t, y)
                        .map_err(|_| PdeError::LayerOutsideWindow { eps: grid.eps, delta: norms.delta })?;
                    Ok((lo * hi).sqrt())
                })
                .collect()
        }
    }
}

/// Result of one backward step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub values: Vec<f64>,
    /// Nodes clamped to zero (expected 0).
    pub clamped: usize,
}

/// Advance one slice from `t_next` down to `t_k`.
pub fn step_backward(
    model: &ModelSpec,
    slice_next: &[f64],
    t_k: f64,
    t_next: f64,
    grid: &Grid,
) -> Result<StepOutcome, PdeError> {
    let n = grid.n_y();
    if slice_next.len() != n {
        return Err(PdeError::ShapeMismatch(format!(
            "slice has {} values for {} space nodes",
            slice_next.len(),
            n
        )));
    }
    if let Some(bad) = slice_next.iter().find(|v| !(**v >= 0.0)) {
        return Err(PdeError::NegativeInput(format!("slice value {bad}")));
    }
    let tau = t_next - t_k;
    if !(tau > 0.0) {
        return Err(PdeError::BadGridParams(format!("nonpositive step {tau}")));
    }
    let dy = grid.dy();
    let theta = model.theta;

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut u_next = vec![0.0; n];
    let mut etas = vec![0.0; n];

    for (i, &y) in grid.y_nodes.iter().enumerate() {
        etas[i] = model.eta.eval(y);
        u_next[i] = slice_next[i] / etas[i];
    }

    for i in 0..n {
        let y = grid.y_nodes[i];
        let c = model.eval_coefficients(y);
        let u = u_next[i];
        // effective drift of the scaled variable
        let b_eff = c.b + c.sigma * c.sigma * model.eta.d1(y) / c.eta;
        // explicit reaction remainder G(y, u) + u^2 (the -u^2 part goes implicit)
        let jump = if c.gamma == 0.0 {
            0.0
        } else {
            theta * c.gamma * u / (c.gamma + c.eta * u)
        };
        let explicit_g = c.l_eta / c.eta * u + c.lambda / c.eta + jump - theta * u;
        let mut r = u + tau * explicit_g;
        let mut dg = 1.0 + tau * u;

        if i == 0 || i == n - 1 {
            // Boundary row: zero second difference kills the diffusion term.
            // Inflow drift upwinds into the interior and stays implicit; for
            // outflow the upwind node lies outside the grid and every
            // discretization of it is either unstable or breaks the M-matrix,
            // so the drift is dropped there. The scaled solution is flat in y
            // for separable models, making that exact; otherwise the local
            // defect is flagged by the envelope table.
            let outflow = if i == 0 { b_eff < 0.0 } else { b_eff > 0.0 };
            if !outflow && b_eff != 0.0 {
                let beta = tau * b_eff.abs() / dy;
                dg += beta;
                if i == 0 {
                    sup[i] = -beta;
                } else {
                    sub[i] = -beta;
                }
            }
        } else {
            let d = 0.5 * c.sigma * c.sigma / (dy * dy);
            let b_plus = b_eff.max(0.0);
            let b_minus = (-b_eff).max(0.0);
            sub[i] = -tau * (d + b_minus / dy);
            sup[i] = -tau * (d + b_plus / dy);
            dg += tau * (2.0 * d + b_eff.abs() / dy);
        }
        diag[i] = dg;
        rhs[i] = r;
    }

    let u_new = solve_tridiagonal_monotone(&sub, &diag, &sup, &rhs, t_k)?;

    let mut clamped = 0;
    let mut values = vec![0.0; n];
    for i in 0..n {
        if u_new[i] < 0.0 {
            values[i] = 0.0;
            clamped += 1;
        } else {
            values[i] = u_new[i] * etas[i];
        }
    }
    Ok(StepOutcome { values, clamped })
}

/// Thomas elimination, asserting the M-matrix structure row by row:
/// positive diagonal, nonpositive off-diagonals, row diagonal dominance.
fn solve_tridiagonal_monotone(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
    t: f64,
) -> Result<Vec<f64>, PdeError> {
    let m = diag.len();
    let slack = 1e-12;
    for j in 0..m {
        let off = sub[j].abs() + sup[j].abs();
        let ok = diag[j] > 0.0
            && sub[j] <= slack
            && sup[j] <= slack
            && diag[j] + slack * diag[j].abs() >= off;
        if !ok {
            return Err(PdeError::SingularTridiagonal { row: j, t });
        }
    }

    let mut c_prime = vec![0.0; m];
    let mut d_prime = vec![0.0; m];
    let mut denom = diag[0];
    c_prime[0] = sup[0] / denom;
    d_prime[0] = rhs[0] / denom;
    for j in 1..m {
        denom = diag[j] - sub[j] * c_prime[j - 1];
        if !denom.is_finite() || denom.abs() < 1e-300 {
            return Err(PdeError::SingularTridiagonal { row: j, t });
        }
        if j < m - 1 {
            c_prime[j] = sup[j] / denom;
        }
        d_prime[j] = (rhs[j] - sub[j] * d_prime[j - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d_prime[m - 1];
    for j in (0..m - 1).rev() {
        x[j] = d_prime[j] - c_prime[j] * x[j + 1];
    }
    Ok(x)
}

/// Grid-sampled value factor `v(t, y)`, nonnegative, with the generating model
/// attached as fingerprint.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    grid: Grid,
    /// `values[k][i] = v(t_nodes[k], y_nodes[i])`.
    values: Vec<Vec<f64>>,
    model: ModelSpec,
    clamp_count: usize,
}

impl ValueSurface {
    /// Assemble a surface from raw parts (CSV read-back, synthetic tests).
    pub fn from_parts(grid: Grid, values: Vec<Vec<f64>>, model: ModelSpec) -> Result<Self, PdeError> {
        if values.len() != grid.t_nodes.len() {
            return Err(PdeError::ShapeMismatch(format!(
                "{} time slices for {} time nodes",
                values.len(),
                grid.t_nodes.len()
            )));
        }
        for (k, slice) in values.iter().enumerate() {
            if slice.len() != grid.y_nodes.len() {
                return Err(PdeError::ShapeMismatch(format!("slice {k} has {} values", slice.len())));
            }
            if let Some(bad) = slice.iter().find(|v| !(**v >= 0.0)) {
                return Err(PdeError::NegativeInput(format!("value {bad} at time index {k}")));
            }
        }
        Ok(Self { grid, values, model, clamp_count: 0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn clamp_count(&self) -> usize {
        self.clamp_count
    }

    /// Bilinear interpolation; exact at grid nodes.
    pub fn eval(&self, t: f64, y: f64) -> Result<f64, PdeError> {
        let tn = &self.grid.t_nodes;
        let yn = &self.grid.y_nodes;
        let t_lo = tn[0];
        let t_hi = tn[tn.len() - 1];
        let tol_t = 1e-12 * (1.0 + t_hi.abs());
        let tol_y = 1e-12 * (1.0 + yn[yn.len() - 1].abs().max(yn[0].abs()));
        if t < t_lo - tol_t || t > t_hi + tol_t || y < yn[0] - tol_y || y > yn[yn.len() - 1] + tol_y {
            return Err(PdeError::OutOfGrid { t, y });
        }
        let t = t.clamp(t_lo, t_hi);
        let y = y.clamp(yn[0], yn[yn.len() - 1]);

        let k = match tn.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(tn.len() - 2),
            Err(ins) => ins.saturating_sub(1).min(tn.len() - 2),
        };
        let wt = (t - tn[k]) / (tn[k + 1] - tn[k]);

        let dy = self.grid.dy();
        let pos = (y - yn[0]) / dy;
        let i = (pos.floor() as usize).min(yn.len() - 2);
        let wy = (y - yn[i]) / dy;

        let v00 = self.values[k][i];
        let v01 = self.values[k][i + 1];
        let v10 = self.values[k + 1][i];
        let v11 = self.values[k + 1][i + 1];
        Ok(v00 * (1.0 - wt) * (1.0 - wy)
            + v01 * (1.0 - wt) * wy
            + v10 * wt * (1.0 - wy)
            + v11 * wt * wy)
    }

    /// Diagnostic accessor `w(t, y) = (T - t) v(t, y)`.
    pub fn w_at(&self, t: f64, y: f64) -> Result<f64, PdeError> {
        Ok((self.model.horizon - t) * self.eval(t, y)?)
    }
}

/// March the terminal layer back to `t = 0`.
pub fn solve(
    model: &ModelSpec,
    norms: &SupNorms,
    grid: &Grid,
    mode: LayerMode,
) -> Result<ValueSurface, PdeError> {
    let n_t = grid.n_t();
    let mut values = vec![Vec::new(); n_t + 1];
    values[n_t] = terminal_layer(model, norms, grid, mode)?;
    let mut clamp_count = 0;
    for k in (0..n_t).rev() {
        let out = step_backward(model, &values[k + 1], grid.t_nodes[k], grid.t_nodes[k + 1], grid)?;
        clamp_count += out.clamped;
        values[k] = out.values;
    }
    Ok(ValueSurface { grid: grid.clone(), values, model: model.clone(), clamp_count })
}

/// Centered-difference residual of the PDE on interior nodes, excluding two
/// layers near each spatial boundary and near the terminal layer. This is a
/// second-order diagnostic independent of the upwind marching scheme.
#[derive(Debug, Clone)]
pub struct ResidualField {
    /// First time index covered (residual rows run `k0..k0 + values.len()`).
    pub k0: usize,
    /// First space index covered.
    pub i0: usize,
    pub values: Vec<Vec<f64>>,
}

impl ResidualField {
    /// Median of `|residual| (T - t) / eta(y)`, a scale-free defect measure.
    pub fn median_scaled(&self, surface: &ValueSurface) -> f64 {
        let model = surface.model();
        let grid = surface.grid();
        let mut scaled: Vec<f64> = Vec::new();
        for (dk, row) in self.values.iter().enumerate() {
            let t = grid.t_nodes[self.k0 + dk];
            let rem = model.horizon - t;
            for (di, r) in row.iter().enumerate() {
                let eta = model.eta.eval(grid.y_nodes[self.i0 + di]);
                scaled.push(r.abs() * rem / eta);
            }
        }
        scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        scaled[scaled.len() / 2]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0f64, |acc, r| acc.max(r.abs()))
    }
}

pub fn residual(surface: &ValueSurface) -> ResidualField {
    let model = surface.model();
    let grid = surface.grid();
    let n_t = grid.t_nodes.len();
    let n_y = grid.y_nodes.len();
    let dy = grid.dy();
    let (k0, k1) = (2, n_t.saturating_sub(2)); // exclude 2 slices at t=0 side? keep t=0 side, drop near layer
    let (k0, k1) = (k0.min(k1), k1);
    let i0 = 2;
    let i1 = n_y - 2;

    let mut values = Vec::new();
    for k in k0..k1 {
        let t = grid.t_nodes[k];
        let h0 = t - grid.t_nodes[k - 1];
        let h1 = grid.t_nodes[k + 1] - t;
        let mut row = Vec::with_capacity(i1 - i0);
        for i in i0..i1 {
            let y = grid.y_nodes[i];
            let c = model.eval_coefficients(y);
            let v = surface.values[k][i];
            let dt = (h0 * h0 * surface.values[k + 1][i]
                + (h1 * h1 - h0 * h0) * v
                - h1 * h1 * surface.values[k - 1][i])
                / (h0 * h1 * (h0 + h1));
            let d1 = (surface.values[k][i + 1] - surface.values[k][i - 1]) / (2.0 * dy);
            let d2 = (surface.values[k][i + 1] - 2.0 * v + surface.values[k][i - 1]) / (dy * dy);
            let f = c.lambda - v * v / c.eta + hamiltonian::jump_exchange(v, c.gamma, model.theta)
                - model.theta * v;
            row.push(-dt - 0.5 * c.sigma * c.sigma * d2 - c.b * d1 - f);
        }
        values.push(row);
    }
    ResidualField { k0, i0, values }
}

//! End-to-end verification battery: Monte Carlo value agreement,
//! suboptimality ordering, liquidation decay, martingale (Feynman-Kac)
//! consistency and residual-cost decay.
//!
//! Every check carries the statistical gate `max(3 stderr, 2% relative)`:
//! the floor absorbs deterministic scheme bias (terminal layer, quadrature)
//! that the Monte Carlo standard error cannot see.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::model::{ModelSpec, SupNorms};
use crate::simulator::{
    derive_seed, monte_carlo, pairwise_sum, simulate_policy, PathSample, Perturbation,
    PolicyValue, STREAM_BROWNIAN, STREAM_POISSON,
};

/// Relative floor of the statistical gate.
pub const REL_TOL: f64 = 2e-2;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Decay constant of the admissibility chain:
/// `C = exp( int_0^delta (1 - e^{-theta u})/u + m e^{-theta u} du )`,
/// evaluated by Simpson quadrature, then inflated by 1.1 to grant the solved
/// surface the same relative slack the sandwich check allows.
pub fn liquidation_constant(norms: &SupNorms, theta: f64) -> f64 {
    let g = |u: f64| {
        if u < 1e-12 {
            theta + norms.m_ratio
        } else {
            (1.0 - (-theta * u).exp()) / u + norms.m_ratio * (-theta * u).exp()
        }
    };
    let n = 400; // panels
    let h = norms.delta / n as f64;
    let mut acc = g(0.0) + g(norms.delta);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(h * i as f64);
    }
    1.1 * (acc * h / 3.0).exp()
}

/// `|MC mean - v(t0,y0) x0^2| <= max(3 stderr, 2% of the target)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_value(
    value: &PolicyValue,
    model: &ModelSpec,
    t0: f64,
    y0: f64,
    x0: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> CheckResult {
    let start = Instant::now();
    let est = monte_carlo(value, model, t0, y0, x0, dt, n_paths, seed, Perturbation::None)
        .expect("value check simulation");
    let target = value.value(model, t0, y0) * x0 * x0;
    let measured = (est.mean - target).abs();
    let threshold = (3.0 * est.stderr).max(REL_TOL * target.abs());
    CheckResult {
        name: format!("value@t0={t0},y0={y0},x0={x0}"),
        measured,
        threshold,
        pass: measured <= threshold,
        seed,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

/// Quadratic homogeneity: `MC(2 x0) / MC(x0)` within `4 (1 +- 4 rel stderr)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_homogeneity(
    value: &PolicyValue,
    model: &ModelSpec,
    t0: f64,
    y0: f64,
    x0: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> CheckResult {
    let start = Instant::now();
    let base = monte_carlo(value, model, t0, y0, x0, dt, n_paths, seed, Perturbation::None)
        .expect("homogeneity base");
    let doubled = monte_carlo(value, model, t0, y0, 2.0 * x0, dt, n_paths, seed, Perturbation::None)
        .expect("homogeneity doubled");
    let ratio = doubled.mean / base.mean;
    let rel_stderr = base.stderr / base.mean.abs().max(1e-300);
    let measured = (ratio - 4.0).abs();
    let threshold = 4.0 * 4.0 * rel_stderr;
    CheckResult {
        name: format!("homogeneity@y0={y0}"),
        measured,
        threshold,
        pass: measured <= threshold,
        seed,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

/// Each perturbed policy must cost more than the feedback policy by more than
/// three combined standard errors.
#[allow(clippy::too_many_arguments)]
pub fn verify_suboptimality(
    value: &PolicyValue,
    model: &ModelSpec,
    t0: f64,
    y0: f64,
    x0: f64,
    perturbations: &[Perturbation],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Vec<CheckResult> {
    assert!(!perturbations.is_empty());
    let start = Instant::now();
    let base = monte_carlo(value, model, t0, y0, x0, dt, n_paths, seed, Perturbation::None)
        .expect("suboptimality base");
    perturbations
        .iter()
        .map(|&pert| {
            let t = Instant::now();
            let est = monte_carlo(value, model, t0, y0, x0, dt, n_paths, seed, pert)
                .expect("perturbed simulation");
            let measured = est.mean - base.mean;
            let threshold = 3.0 * (base.stderr.powi(2) + est.stderr.powi(2)).sqrt();
            CheckResult {
                name: format!("suboptimality@{pert:?}"),
                measured,
                threshold,
                pass: measured > threshold,
                seed,
                runtime_ms: (start.elapsed() + t.elapsed()).as_millis() as u64 / 2,
            }
        })
        .collect()
}

/// Liquidation decay of already-simulated paths:
/// `|X(s)| <= C x0 (T-s)/delta` at `s = T - dt` and across the final decade.
pub fn verify_liquidation(
    paths: &[PathSample],
    model: &ModelSpec,
    norms: &SupNorms,
    x0: f64,
    seed: u64,
) -> CheckResult {
    let start = Instant::now();
    let c = liquidation_constant(norms, model.theta);
    let mut worst = 0.0f64;
    if x0 != 0.0 {
        for p in paths {
            let n = p.times.len() - 1;
            let h = p.times[n] - p.times[n - 1];
            // final decade of steps: T - s in [h, 10 h]
            for i in (0..n).rev() {
                let rem = model.horizon - p.times[i];
                if rem > 10.0 * h * (1.0 + 1e-9) {
                    break;
                }
                let bound = c * x0.abs() * rem / norms.delta;
                worst = worst.max(p.x_path[i].abs() / bound);
            }
        }
    }
    CheckResult {
        name: "liquidation".into(),
        measured: worst,
        threshold: 1.0,
        pass: worst <= 1.0,
        seed,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

/// Martingale consistency of the solved surface along factor paths:
/// `|E[v(s, Y_s) + int_t^s F(Y, v) drho] - v(t, y)|` within the gate.
#[allow(clippy::too_many_arguments)]
pub fn verify_fbsde(
    value: &PolicyValue,
    model: &ModelSpec,
    t: f64,
    s: f64,
    y: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> CheckResult {
    assert!(t < s && s <= value.cover_end() + 1e-12);
    let start = Instant::now();
    let n_steps = (((s - t) / dt).ceil() as usize).max(2);
    let h = (s - t) / n_steps as f64;

    let f_at = |rho: f64, y: f64| -> f64 {
        let c = model.eval_coefficients(y);
        let v = value.value(model, rho, y);
        c.lambda - v * v / c.eta + crate::hamiltonian::jump_exchange(v, c.gamma, model.theta)
            - model.theta * v
    };

    let samples: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64, STREAM_BROWNIAN));
            let mut yy = y;
            let mut integral = 0.0;
            let mut f_prev = f_at(t, yy);
            for k in 0..n_steps {
                let z: f64 = rng.sample(StandardNormal);
                yy += model.drift(yy) * h + model.sigma(yy) * h.sqrt() * z;
                let rho = t + h * (k + 1) as f64;
                let f_here = f_at(rho, yy);
                integral += 0.5 * h * (f_prev + f_here);
                f_prev = f_here;
            }
            value.value(model, s, yy) + integral
        })
        .collect();

    let n = samples.len() as f64;
    let mean = pairwise_sum(&samples) / n;
    let sq: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
    let stderr = (pairwise_sum(&sq) / (n - 1.0) / n).sqrt();

    let target = value.value(model, t, y);
    let measured = (mean - target).abs();
    let threshold = (3.0 * stderr).max(REL_TOL * target.abs());
    CheckResult {
        name: format!("fbsde@t={t},s={s},y={y}"),
        measured,
        threshold,
        pass: measured <= threshold,
        seed,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

/// Expected residual cost `E[v(s, Y_s) X_s^2]` must decrease across the
/// checkpoints and end below 5% of `v(t0, y0) x0^2`.
#[allow(clippy::too_many_arguments)]
pub fn verify_residual_cost(
    value: &PolicyValue,
    model: &ModelSpec,
    t0: f64,
    y0: f64,
    x0: f64,
    checkpoints: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> CheckResult {
    assert!(checkpoints.windows(2).all(|w| w[0] < w[1]));
    let start = Instant::now();

    let estimates: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let pair = (
                derive_seed(seed, i as u64, STREAM_BROWNIAN),
                derive_seed(seed, i as u64, STREAM_POISSON),
            );
            let p = simulate_policy(value, model, t0, y0, x0, dt, pair, Perturbation::None)
                .expect("residual-cost simulation");
            let n = p.times.len() - 1;
            let h = (p.times[n] - p.times[0]) / n as f64;
            checkpoints
                .iter()
                .map(|&s| {
                    let idx = (((s - t0) / h).round() as usize).min(n);
                    let v = value.value(model, p.times[idx], p.y_path[idx]);
                    v * p.x_path[idx] * p.x_path[idx]
                })
                .collect()
        })
        .collect();

    let n = n_paths as f64;
    let means: Vec<f64> = (0..checkpoints.len())
        .map(|j| {
            let col: Vec<f64> = estimates.iter().map(|row| row[j]).collect();
            pairwise_sum(&col) / n
        })
        .collect();

    let scale = value.value(model, t0, y0) * x0 * x0;
    let tiny = 1e-12 * scale.abs().max(1e-300);
    let decreasing = means.windows(2).all(|w| w[1] <= w[0] + tiny);
    let measured = if scale == 0.0 { 0.0 } else { means.last().unwrap() / scale };
    CheckResult {
        name: format!("residual_cost@{checkpoints:?}"),
        measured,
        threshold: 0.05,
        pass: decreasing && measured <= 0.05,
        seed,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

/// Parameters of the standard battery run.
#[derive(Debug, Clone)]
pub struct BatteryConfig {
    pub t0: f64,
    pub y0_list: Vec<f64>,
    pub x0: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub base_seed: u64,
}

/// Full battery on one solved surface: value agreement at every `y0`,
/// homogeneity, suboptimality of two perturbations, liquidation decay,
/// Feynman-Kac consistency at two `(t, s)` pairs and residual-cost decay.
pub fn run_battery(
    value: &PolicyValue,
    model: &ModelSpec,
    norms: &SupNorms,
    cfg: &BatteryConfig,
) -> VerifyReport {
    let mut report = VerifyReport::default();
    let mut check_idx = 0u64;
    let mut next_seed = || {
        check_idx += 1;
        derive_seed(cfg.base_seed, check_idx, 0xC0DE)
    };

    for &y0 in &cfg.y0_list {
        report.checks.push(verify_value(
            value, model, cfg.t0, y0, cfg.x0, cfg.dt, cfg.n_paths, next_seed(),
        ));
    }
    let y_ref = cfg.y0_list[0];
    report.checks.push(verify_homogeneity(
        value, model, cfg.t0, y_ref, cfg.x0, cfg.dt, cfg.n_paths, next_seed(),
    ));

    let perturbations: Vec<Perturbation> = if model.theta > 0.0 {
        vec![Perturbation::ScaleXi(1.5), Perturbation::NoDarkPool]
    } else {
        vec![Perturbation::ScaleXi(1.5), Perturbation::ScaleXi(0.6)]
    };
    report.checks.extend(verify_suboptimality(
        value,
        model,
        cfg.t0,
        y_ref,
        cfg.x0,
        &perturbations,
        cfg.dt,
        cfg.n_paths,
        next_seed(),
    ));

    let liq_seed = next_seed();
    let liq_paths: Vec<PathSample> = (0..cfg.n_paths.min(1000))
        .into_par_iter()
        .map(|i| {
            let pair = (
                derive_seed(liq_seed, i as u64, STREAM_BROWNIAN),
                derive_seed(liq_seed, i as u64, STREAM_POISSON),
            );
            simulate_policy(value, model, cfg.t0, y_ref, cfg.x0, cfg.dt, pair, Perturbation::None)
                .expect("liquidation paths")
        })
        .collect();
    report
        .checks
        .push(verify_liquidation(&liq_paths, model, norms, cfg.x0, liq_seed));

    let t_frac = [(0.1, 0.5), (0.2, 0.8)];
    for (tf, sf) in t_frac {
        report.checks.push(verify_fbsde(
            value,
            model,
            tf * model.horizon,
            sf * model.horizon,
            y_ref,
            cfg.dt,
            cfg.n_paths,
            next_seed(),
        ));
    }

    let t = model.horizon;
    let checkpoints = [t - 0.1 * t, t - 0.05 * t, t - 0.01 * t];
    report.checks.push(verify_residual_cost(
        value,
        model,
        cfg.t0,
        y_ref,
        cfg.x0,
        &checkpoints,
        cfg.dt,
        cfg.n_paths.min(2000),
        next_seed(),
    ));

    report
}

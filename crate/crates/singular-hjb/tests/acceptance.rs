//! Release-gating acceptance suite: one test per criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). Every tolerance is
//! pinned here, not computed from the run.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use singular_hjb::envelopes::{sandwich_report, DEFAULT_SANDWICH_SLACK};
use singular_hjb::hamiltonian::{feedback_controls, hamiltonian_at, nonlinearity, nonlinearity_dv};
use singular_hjb::model::{CoefficientValues, ModelSpec, SupNorms, DEFAULT_RATIO_CAP};
use singular_hjb::odebench::{solve_a, separable_compare, OdeTable};
use singular_hjb::pdesolver::{build_grid, solve, LayerMode, ValueSurface};
use singular_hjb::simulator::{
    derive_seed, monte_carlo, simulate_policy, PathSample, Perturbation, PolicyValue,
    STREAM_BROWNIAN, STREAM_POISSON,
};
use singular_hjb::verify::{
    run_battery, verify_fbsde, verify_liquidation, BatteryConfig,
};

const Y_LO: f64 = -10.0;
const Y_HI: f64 = 10.0;

struct Setup {
    model: ModelSpec,
    norms: SupNorms,
    surface: ValueSurface,
}

fn setup(name: &str, theta: Option<f64>) -> Setup {
    let mut model = ModelSpec::catalog(name).unwrap();
    if let Some(theta) = theta {
        model = model.with_theta(theta).unwrap();
    }
    let norms = model.estimate_sup_norms(Y_LO, Y_HI, 100_000, DEFAULT_RATIO_CAP).unwrap();
    let grid = build_grid(Y_LO, Y_HI, 401, model.horizon, 1e-3, 2000, 1.0).unwrap();
    let surface = solve(&model, &norms, &grid, LayerMode::EtaOverEps).unwrap();
    Setup { model, norms, surface }
}

fn ex1a() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| setup("ex1a", None))
}

fn ex2_theta5() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| setup("ex2", Some(5.0)))
}

fn ex2_theta0() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| setup("ex2", Some(0.0)))
}

fn ex1a_table() -> &'static OdeTable {
    static CELL: OnceLock<OdeTable> = OnceLock::new();
    CELL.get_or_init(|| solve_a(2.0, 1.0, 1.0, 1e-3, 2000, 1.0).unwrap())
}

fn report(criterion: u32, name: &str, pass: bool, detail: String) {
    println!(
        "ACCEPTANCE {criterion:2} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} {name}: {detail}");
}

/// 1. Separable benchmark: reference-resolution ex1a surface within 1e-2 of
/// a(t) eta(y) on the interior region; halving (dt, dy) improves by >= 1.5x;
/// monotone over three levels; under 60 s.
#[test]
fn criterion_01_separable_benchmark() {
    let start = Instant::now();
    let model = ModelSpec::catalog("ex1a").unwrap();
    let norms = model.estimate_sup_norms(Y_LO, Y_HI, 100_000, DEFAULT_RATIO_CAP).unwrap();
    let mut errors = Vec::new();
    for (n_t, n_y) in [(2000usize, 401usize), (4000, 801), (8000, 1601)] {
        let grid = build_grid(Y_LO, Y_HI, n_y, 1.0, 1e-3, n_t, 1.0).unwrap();
        let surface = solve(&model, &norms, &grid, LayerMode::EtaOverEps).unwrap();
        assert_eq!(surface.clamp_count(), 0);
        let table = solve_a(model.theta, 1.0, 1.0, 1e-3, n_t, 1.0).unwrap();
        let cmp = separable_compare(&surface, &table, 6.0, 1.0 - 10.0 * 1e-3).unwrap();
        errors.push(cmp.max_rel_error);
    }
    let elapsed = start.elapsed();
    let pass = errors[0] <= 1e-2
        && errors[0] / errors[1] >= 1.5
        && errors[1] > errors[2]
        && elapsed.as_secs() <= 60;
    report(
        1,
        "separable benchmark",
        pass,
        format!(
            "errors {:.3e} -> {:.3e} -> {:.3e}, ratio {:.2}, runtime {elapsed:?}",
            errors[0],
            errors[1],
            errors[2],
            errors[0] / errors[1]
        ),
    );
}

/// 2. Envelope sandwich with zero violations for ex1a and ex2 on the window
/// [T - delta, T - eps] at 1e-2 relative slack.
#[test]
fn criterion_02_envelope_sandwich() {
    let mut detail = String::new();
    let mut pass = true;
    for s in [ex1a(), ex2_theta5(), ex2_theta0()] {
        let rep = sandwich_report(&s.surface, &s.norms, DEFAULT_SANDWICH_SLACK).unwrap();
        detail.push_str(&format!(
            "{}(theta={}): {}/{} violations; ",
            s.model.name, s.model.theta, rep.violations, rep.nodes_checked
        ));
        pass &= rep.violations == 0 && rep.interval_violations == 0;
    }
    report(2, "envelope sandwich", pass, detail);
}

/// 3. Terminal asymptotics: |v(T-s, y) s / eta(y) - 1| <= 2 (m + e^{K'T} l) s
/// at s in {1e-2, 1e-3}, measured on a graded eps = 1e-4 solve, and the
/// measured deviation shrinks linearly in s.
#[test]
fn criterion_03_terminal_asymptotics() {
    let mut detail = String::new();
    let mut pass = true;
    for name in ["ex1a", "ex2"] {
        let model = ModelSpec::catalog(name).unwrap();
        let norms = model.estimate_sup_norms(Y_LO, Y_HI, 100_000, DEFAULT_RATIO_CAP).unwrap();
        let grid = build_grid(Y_LO, Y_HI, 401, 1.0, 1e-4, 3000, 1.001).unwrap();
        let surface = solve(&model, &norms, &grid, LayerMode::EtaOverEps).unwrap();
        let c = 2.0 * (norms.m_ratio + (norms.k_prime * model.horizon).exp() * norms.l_ratio);
        let mut measured = Vec::new();
        for s in [1e-2, 1e-3] {
            let t_eval = model.horizon - s;
            let worst = grid
                .y_nodes
                .iter()
                .map(|&y| (surface.eval(t_eval, y).unwrap() * s / model.eta.eval(y) - 1.0).abs())
                .fold(0.0f64, f64::max);
            pass &= worst <= c * s;
            measured.push(worst);
        }
        let shrink = measured[1] / measured[0];
        pass &= shrink <= 0.2;
        detail.push_str(&format!(
            "{name}: {:.3e}@1e-2, {:.3e}@1e-3 (bound coef {:.2}, shrink {:.3}); ",
            measured[0], measured[1], c, shrink
        ));
    }
    report(3, "terminal asymptotics", pass, detail);
}

/// 4. Monte Carlo value verification on ex2 (theta = 5) at y0 in {3, 1, 5},
/// 1e4 paths, dt = 1e-3, within max(3 stderr, 2%); under 120 s.
#[test]
fn criterion_04_monte_carlo_value() {
    let s = ex2_theta5();
    let value = PolicyValue::Surface(&s.surface);
    let start = Instant::now();
    let mut detail = String::new();
    let mut pass = true;
    for y0 in [3.0, 1.0, 5.0] {
        let est = monte_carlo(&value, &s.model, 0.0, y0, 1.0, 1e-3, 10_000, 42, Perturbation::None)
            .unwrap();
        let target = s.surface.eval(0.0, y0).unwrap();
        let gate = (3.0 * est.stderr).max(2e-2 * target);
        pass &= (est.mean - target).abs() <= gate;
        detail.push_str(&format!(
            "y0={y0}: |{:.5} - {:.5}| vs {:.1e}; ",
            est.mean,
            target,
            gate
        ));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs() <= 120;
    detail.push_str(&format!("runtime {elapsed:?}"));
    report(4, "monte carlo value", pass, detail);
}

/// 5. Suboptimality: scale_xi(1.5) and no_darkpool each cost more than the
/// feedback policy by > 3 combined stderr at 1e4 paths.
#[test]
fn criterion_05_suboptimality_ordering() {
    let s = ex2_theta5();
    let value = PolicyValue::Surface(&s.surface);
    let base = monte_carlo(&value, &s.model, 0.0, 3.0, 1.0, 1e-3, 10_000, 42, Perturbation::None)
        .unwrap();
    let mut detail = String::new();
    let mut pass = true;
    for pert in [Perturbation::ScaleXi(1.5), Perturbation::NoDarkPool] {
        let est = monte_carlo(&value, &s.model, 0.0, 3.0, 1.0, 1e-3, 10_000, 42, pert).unwrap();
        let gap = est.mean - base.mean;
        let gate = 3.0 * (base.stderr.powi(2) + est.stderr.powi(2)).sqrt();
        pass &= gap > gate;
        detail.push_str(&format!("{pert:?}: gap {:.3e} > {:.3e}; ", gap, gate));
    }
    report(5, "suboptimality ordering", pass, detail);
}

fn optimal_paths(s: &Setup, n: usize, seed: u64) -> Vec<PathSample> {
    let value = PolicyValue::Surface(&s.surface);
    (0..n)
        .map(|i| {
            let pair = (
                derive_seed(seed, i as u64, STREAM_BROWNIAN),
                derive_seed(seed, i as u64, STREAM_POISSON),
            );
            simulate_policy(&value, &s.model, 0.0, 3.0, 1.0, 1e-3, pair, Perturbation::None).unwrap()
        })
        .collect()
}

/// 6. Liquidation decay: across 1e3 optimal paths, max |X(T - 1e-3)| <= 0.05
/// and |X(s)|/(T-s) bounded by the envelope constant over the final decade.
#[test]
fn criterion_06_liquidation_decay() {
    let s = ex2_theta5();
    let paths = optimal_paths(s, 1000, 7);
    let n = paths[0].times.len();
    let max_near_terminal = paths
        .iter()
        .map(|p| p.x_path[n - 2].abs())
        .fold(0.0f64, f64::max);
    let bound_check = verify_liquidation(&paths, &s.model, &s.norms, 1.0, 7);
    let pass = max_near_terminal <= 0.05 && bound_check.pass;
    report(
        6,
        "liquidation decay",
        pass,
        format!(
            "max |X(T-1e-3)| = {:.3e} (<= 0.05), decade ratio {:.3} (<= 1)",
            max_near_terminal, bound_check.measured
        ),
    );
}

/// 7. Feynman-Kac consistency at (t, s) in {(0.1, 0.5), (0.2, 0.8)} for ex1a
/// and ex2 within the statistical gate.
#[test]
fn criterion_07_fbsde_consistency() {
    let mut detail = String::new();
    let mut pass = true;
    for (s, y) in [(ex1a(), 0.0), (ex2_theta5(), 3.0)] {
        let value = PolicyValue::Surface(&s.surface);
        for (t, sx) in [(0.1, 0.5), (0.2, 0.8)] {
            let r = verify_fbsde(&value, &s.model, t, sx, y, 1e-3, 10_000, 11);
            pass &= r.pass;
            detail.push_str(&format!(
                "{}@({t},{sx}): {:.2e} vs {:.2e}; ",
                s.model.name, r.measured, r.threshold
            ));
        }
    }
    report(7, "fbsde consistency", pass, detail);
}

/// 8. Hamiltonian optimality: a brute-force grid search with step 1e-3 x
/// locates the minimum at the feedback pair within one step, and
/// H(xi*, mu*) = F x^2 to 1e-12 relative, over 1e3 random states.
///
/// H is additively separable in xi and mu, so the 2-d product-grid minimum is
/// found by two 1-d scans (verified directly against the full grid in the
/// hamiltonian unit tests).
#[test]
fn criterion_08_hamiltonian_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut worst_id = 0.0f64;
    for _ in 0..1000 {
        let eta = rng.gen_range(0.2..5.0);
        let coeffs = CoefficientValues {
            eta,
            lambda: rng.gen_range(0.0..5.0),
            gamma: rng.gen_range(0.1..5.0),
            b: 0.0,
            sigma: 1.0,
            l_eta: 0.0,
        };
        let theta = rng.gen_range(0.5..5.0);
        let x = rng.gen_range(0.1..2.0);
        let v = rng.gen_range(0.0..1.0) * (2.5 * eta).min(8.0);
        let fb = feedback_controls(v, &coeffs, x).unwrap();

        let step = 1e-3 * x;
        let n = (3.0 * x / step).round() as usize;
        let mut best_xi = (f64::INFINITY, 0.0);
        let mut best_mu = (f64::INFINITY, 0.0);
        for k in 0..=n {
            let c = k as f64 * step;
            // xi-part: eta xi^2 - 2 v x xi
            let hx = coeffs.eta * c * c - 2.0 * v * x * c;
            if hx < best_xi.0 {
                best_xi = (hx, c);
            }
            // mu-part: theta (v (x - mu)^2 + gamma mu^2)
            let dm = x - c;
            let hm = theta * (v * dm * dm + coeffs.gamma * c * c);
            if hm < best_mu.0 {
                best_mu = (hm, c);
            }
        }
        assert!(
            (best_xi.1 - fb.xi_rate).abs() <= step + 1e-12,
            "xi grid {} vs feedback {}",
            best_xi.1,
            fb.xi_rate
        );
        assert!(
            (best_mu.1 - fb.mu_size).abs() <= step + 1e-12,
            "mu grid {} vs feedback {}",
            best_mu.1,
            fb.mu_size
        );

        let h = hamiltonian_at(&coeffs, v, x, fb.xi_rate, fb.mu_size, theta);
        let f = nonlinearity(&coeffs, v, theta).unwrap() * x * x;
        worst_id = worst_id.max((h - f).abs() / f.abs().max(1e-12));
    }
    report(
        8,
        "hamiltonian optimality",
        worst_id <= 1e-12,
        format!("grid minimum at feedback pair for 1000 states; worst |H - F x^2| rel {worst_id:.2e}"),
    );
}

/// 9. dF/dv <= -1/(T-t) on v >= eta/(2(T-t)) over 1e4 samples, and
/// F(y, 0) = lambda(y) exactly.
#[test]
fn criterion_09_derivative_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let models = [ModelSpec::catalog("ex1a").unwrap(), ModelSpec::catalog("ex2").unwrap()];
    let mut worst_slack = f64::INFINITY;
    for i in 0..10_000 {
        let model = &models[i % 2];
        let y = rng.gen_range(Y_LO..Y_HI);
        let t: f64 = rng.gen_range(0.0..model.horizon - 1e-6);
        let remaining = model.horizon - t;
        let coeffs = model.eval_coefficients(y);
        let v = coeffs.eta / (2.0 * remaining) * rng.gen_range(1.0..4.0);
        let d = nonlinearity_dv(&coeffs, v, model.theta).unwrap();
        worst_slack = worst_slack.min(-1.0 / remaining - d);
        assert!(
            d <= -1.0 / remaining + 1e-12,
            "dF/dv = {d} above -1/(T-t) = {}",
            -1.0 / remaining
        );
        // exactness at v = 0
        let f0 = nonlinearity(&coeffs, 0.0, model.theta).unwrap();
        assert_eq!(f0, coeffs.lambda);
    }
    report(
        9,
        "derivative bound",
        true,
        format!("1e4 samples; minimum slack below -1/(T-t): {worst_slack:.3e}"),
    );
}

/// 10. Factor independence of the ex1a policy: distinct Brownian seeds with a
/// shared Poisson stream give identical position paths to 1e-12.
#[test]
fn criterion_10_factor_independence() {
    let model = ModelSpec::catalog("ex1a").unwrap();
    let table = ex1a_table();
    let value = PolicyValue::Separable(table);
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let poisson = derive_seed(31, i, STREAM_POISSON);
        let a = simulate_policy(&value, &model, 0.0, 0.0, 1.0, 1e-3, (1000 + i, poisson), Perturbation::None)
            .unwrap();
        let b = simulate_policy(&value, &model, 0.0, 2.0, 1.0, 1e-3, (9000 + i, poisson), Perturbation::None)
            .unwrap();
        for (xa, xb) in a.x_path.iter().zip(&b.x_path) {
            worst = worst.max((xa - xb).abs());
        }
    }
    report(
        10,
        "factor independence",
        worst <= 1e-12,
        format!("100 path pairs, max |X_a - X_b| = {worst:.3e}"),
    );
}

/// 11. Figure-shape reproduction: initial rate increasing in y0 for theta = 0,
/// theta = 5 initial rate strictly below theta = 0 at y0 = 3, and the
/// simulate subcommand emits byte-identical CSVs across reruns.
#[test]
fn criterion_11_figure_shapes() {
    let s0 = ex2_theta0();
    let s5 = ex2_theta5();
    let rates0: Vec<f64> = [1.0, 3.0, 5.0]
        .iter()
        .map(|&y0| s0.surface.eval(0.0, y0).unwrap() / s0.model.eta.eval(y0))
        .collect();
    let rate5_at3 = s5.surface.eval(0.0, 3.0).unwrap() / s5.model.eta.eval(3.0);
    let mut pass = rates0[0] < rates0[1] && rates0[1] < rates0[2] && rate5_at3 < rates0[1];

    // byte-identical figure CSVs across reruns of the CLI driver
    let tmp = std::env::temp_dir().join(format!("sj-acc11-{}", std::process::id()));
    let cfg_text = "model = ex2\ntheta = 0\ny0 = 1,3,5\nn_y = 201\nn_t = 1000\nn_paths = 400\n";
    let mut cfg = singular_hjb::cli::parse_config_str(cfg_text).unwrap();
    let mut bytes = Vec::new();
    for run in 0..2 {
        cfg.out_dir = tmp.join(format!("run{run}"));
        let outcome = singular_hjb::cli::run(singular_hjb::cli::Subcommand::Simulate, &cfg).unwrap();
        assert_eq!(outcome.exit_code, 0);
        let mut blob = std::fs::read(cfg.out_dir.join("paths.csv")).unwrap();
        blob.extend(std::fs::read(cfg.out_dir.join("estimates.csv")).unwrap());
        bytes.push(blob);
    }
    pass &= bytes[0] == bytes[1];
    std::fs::remove_dir_all(&tmp).ok();

    report(
        11,
        "figure shapes",
        pass,
        format!(
            "theta=0 rates {:.4}/{:.4}/{:.4}, theta=5@3 {:.4}, csv identical: {}",
            rates0[0],
            rates0[1],
            rates0[2],
            rate5_at3,
            bytes[0] == bytes[1]
        ),
    );
}

/// 12. Determinism and refinement: verification reports are bitwise
/// reproducible from (config, seed) in all payload fields, and the ODE layer
/// sensitivity under eps halving is <= 1e-6.
#[test]
fn criterion_12_determinism_and_refinement() {
    let s = ex1a();
    let value = PolicyValue::Surface(&s.surface);
    let cfg = BatteryConfig {
        t0: 0.0,
        y0_list: vec![1.0, 3.0],
        x0: 1.0,
        dt: 2e-3,
        n_paths: 500,
        base_seed: 77,
    };
    let a = run_battery(&value, &s.model, &s.norms, &cfg);
    let b = run_battery(&value, &s.model, &s.norms, &cfg);
    let mut pass = a.checks.len() == b.checks.len();
    for (x, y) in a.checks.iter().zip(&b.checks) {
        pass &= x.name == y.name
            && x.measured.to_bits() == y.measured.to_bits()
            && x.threshold.to_bits() == y.threshold.to_bits()
            && x.pass == y.pass
            && x.seed == y.seed;
    }

    let mc1 = monte_carlo(&value, &s.model, 0.0, 1.0, 1.0, 2e-3, 400, 5, Perturbation::None).unwrap();
    let mc2 = monte_carlo(&value, &s.model, 0.0, 1.0, 1.0, 2e-3, 400, 5, Perturbation::None).unwrap();
    pass &= mc1 == mc2;

    let a0_coarse = solve_a(2.0, 1.0, 1.0, 1e-3, 2000, 1.0).unwrap().a_values[0];
    let a0_fine = solve_a(2.0, 1.0, 1.0, 5e-4, 2000, 1.0).unwrap().a_values[0];
    let drift = (a0_coarse - a0_fine).abs();
    pass &= drift <= 1e-6;

    report(
        12,
        "determinism and refinement",
        pass,
        format!(
            "battery fields bitwise equal over {} checks, mc bitwise equal, |a(0)| eps-halving drift {drift:.2e}",
            a.checks.len()
        ),
    );
}

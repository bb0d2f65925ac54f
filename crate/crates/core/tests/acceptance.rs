//! End-to-end acceptance suite. Every criterion prints one PASS/FAIL line with the measured
//! value next to its pinned threshold, then asserts.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dp_helm::allocation::oracle::{random_feasible_problem, solve_oracle};
use dp_helm::allocation::{configuration_jacobian, configuration_map, solve_pdnn, Termination, ZVector};
use dp_helm::sim::{allocation_violations, run_scenario, simulate, RunOutput, Scenario, Traces};
use dp_helm::vessel::{rotation_matrix, DelayLine};

const BARRIER: [f64; 3] = [0.3, 0.3, PI / 6.0];
const MAX_RUNTIME_S: f64 = 120.0;
const PHI_TARGET: [f64; 3] = [0.1, 0.14, 0.1];
const PHI_TOLERANCE: f64 = 0.25;
const PHI_WINDOW: (f64, f64) = (100.0, 150.0);
const ALARM_WINDOW: (f64, f64) = (150.0, 175.0);
const WAVE_ONSET: f64 = 150.0;
const NN_SETTLE: f64 = 10.0;
const NN_SPAN: f64 = 60.0;
const NN_RATIO: f64 = 0.5;
const THRUST_LIMIT: f64 = 0.7;
const AZIMUTH_STEP: f64 = PI / 20.0;
const SLACK_LIMIT: f64 = 0.02;
const QP_INSTANCES: usize = 100;
const QP_PRIMAL_TOL: f64 = 1e-4;
const QP_COST_TOL: f64 = 1e-6;
const QP_MEDIAN_ITERATIONS: usize = 100_000;
const ROTATION_SAMPLES: usize = 1_000_000;
const ROTATION_TOL: f64 = 1e-10;
const KYP_TOL: f64 = 1e-10;
const JACOBIAN_POINTS: usize = 10;
const JACOBIAN_TOL: f64 = 1e-6;
const DELAY_TOL: f64 = 1e-12;

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "criterion {id} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {id} {name} failed: {detail}");
}

fn default_run() -> &'static Result<RunOutput, String> {
    static RUN: OnceLock<Result<RunOutput, String>> = OnceLock::new();
    RUN.get_or_init(|| run_scenario(&Scenario::bundled(), None).map_err(|e| e.to_string()))
}

fn default_traces(id: u32, name: &str) -> &'static Traces {
    match default_run() {
        Ok(out) => &out.traces,
        Err(e) => {
            report(id, name, false, format!("default run aborted: {e}"));
            unreachable!()
        }
    }
}

fn alarm_time(traces: &Traces) -> Option<f64> {
    traces.observer.iter().find(|r| r.alarm).map(|r| r.t)
}

#[test]
fn criterion_1_barrier_satisfaction() {
    let name = "barrier satisfaction";
    let sc = Scenario::bundled();
    let (out, completed) = match default_run() {
        Ok(out) => (out, true),
        Err(e) => return report(1, name, false, format!("default run aborted: {e}")),
    };
    let mut max = [0.0f64; 3];
    let mut inside = completed && out.traces.controller.len() == sc.steps();
    for row in &out.traces.controller {
        for i in 0..3 {
            max[i] = max[i].max(row.z1[i].abs());
            inside &= row.z1[i].abs() < BARRIER[i];
        }
    }
    let fast = out.elapsed < MAX_RUNTIME_S;
    report(
        1,
        name,
        inside && fast,
        format!(
            "{} steps, max |z1| = [{:.4}, {:.4}, {:.4}] vs [{:.4}, {:.4}, {:.4}], runtime {:.2} s vs {MAX_RUNTIME_S} s",
            out.traces.controller.len(),
            max[0],
            max[1],
            max[2],
            BARRIER[0],
            BARRIER[1],
            BARRIER[2],
            out.elapsed
        ),
    );
}

#[test]
fn criterion_2_wind_estimator_convergence() {
    let name = "wind estimator convergence";
    let traces = default_traces(2, name);
    let window: Vec<_> = traces
        .observer
        .iter()
        .filter(|r| r.t >= PHI_WINDOW.0 && r.t <= PHI_WINDOW.1)
        .collect();
    let mean = window.iter().fold(Vector3::zeros(), |acc, r| acc + r.phi_hat) / window.len() as f64;
    let errors: Vec<f64> = (0..3)
        .map(|i| (mean[i] - PHI_TARGET[i]).abs() / PHI_TARGET[i])
        .collect();
    let pass = !window.is_empty() && errors.iter().all(|e| *e <= PHI_TOLERANCE);
    report(
        2,
        name,
        pass,
        format!(
            "mean phi_hat over [{}, {}] s = [{:.4}, {:.4}, {:.4}], relative errors [{:.3}, {:.3}, {:.3}] vs {PHI_TOLERANCE}",
            PHI_WINDOW.0, PHI_WINDOW.1, mean[0], mean[1], mean[2], errors[0], errors[1], errors[2]
        ),
    );
}

#[test]
fn criterion_3_alarm_timing() {
    let name = "alarm timing";
    let traces = default_traces(3, name);
    let alarm = alarm_time(traces);
    let mut calm = Scenario::bundled();
    calm.wave.enabled = false;
    let (calm_traces, calm_result) = simulate(&calm);
    let false_alarms = calm_traces.observer.iter().filter(|r| r.alarm).count();
    let calm_complete = calm_result.is_ok() && calm_traces.observer.len() == calm.steps();
    let in_window = alarm.is_some_and(|t| (ALARM_WINDOW.0..=ALARM_WINDOW.1).contains(&t));
    report(
        3,
        name,
        in_window && calm_complete && false_alarms == 0,
        format!(
            "alarm at {alarm:?} s vs [{}, {}] s; wave-free run complete = {calm_complete}, alarmed samples = {false_alarms}",
            ALARM_WINDOW.0, ALARM_WINDOW.1
        ),
    );
}

fn position_error_rms(traces: &Traces, from: f64, to: f64) -> f64 {
    let squares: Vec<f64> = traces
        .observer
        .iter()
        .zip(&traces.controller)
        .filter(|(o, _)| o.t >= from && o.t <= to)
        .map(|(o, c)| (c.eta[0] - o.x_hat[0]).powi(2) + (c.eta[1] - o.x_hat[1]).powi(2))
        .collect();
    (squares.iter().sum::<f64>() / squares.len().max(1) as f64).sqrt()
}

#[test]
fn criterion_4_observer_network_effect() {
    let name = "observer network effect";
    let traces = default_traces(4, name);
    let Some(alarm) = alarm_time(traces) else {
        return report(4, name, false, "alarm never latched".into());
    };
    let before = position_error_rms(traces, WAVE_ONSET, alarm);
    let after = position_error_rms(traces, alarm + NN_SETTLE, alarm + NN_SPAN);
    let ratio = after / before;
    report(
        4,
        name,
        ratio <= NN_RATIO,
        format!("rms error {after:.3e} m after vs {before:.3e} m before alarm, ratio {ratio:.3} vs {NN_RATIO}"),
    );
}

#[test]
fn criterion_5_allocation_feasibility() {
    let name = "allocation feasibility";
    let traces = default_traces(5, name);
    let sc = Scenario::bundled();
    assert_eq!(sc.allocation.thrust_limit, THRUST_LIMIT);
    assert_eq!(sc.allocation.azimuth_step, AZIMUTH_STEP);
    assert_eq!(sc.allocation.slack_bound, SLACK_LIMIT);
    let bank = sc.thruster_bank().unwrap();
    let failures: Vec<String> = traces
        .allocation
        .iter()
        .filter_map(|row| {
            let v = allocation_violations(row, &bank, AZIMUTH_STEP, SLACK_LIMIT);
            (!v.is_empty()).then(|| format!("t = {}: {}", row.t, v.join(", ")))
        })
        .collect();
    let max_u = traces.allocation.iter().map(|r| r.u.abs().max()).fold(0.0, f64::max);
    let max_step = traces
        .allocation
        .iter()
        .map(|r| r.delta_alpha.abs().max())
        .fold(0.0, f64::max);
    let max_slack = traces
        .allocation
        .iter()
        .map(|r| r.slack.abs().max())
        .fold(0.0, f64::max);
    report(
        5,
        name,
        !traces.allocation.is_empty() && failures.is_empty(),
        format!(
            "{} of {} cycles feasible; max |u| {max_u:.4} vs {THRUST_LIMIT}, max |dalpha| {max_step:.4} vs {AZIMUTH_STEP:.4}, \
             max |o| {max_slack:.2e} vs {SLACK_LIMIT}{}",
            traces.allocation.len() - failures.len(),
            traces.allocation.len(),
            failures.first().map(|f| format!("; first violation {f}")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_6_solver_matches_oracle() {
    let sc = Scenario::bundled();
    let template = sc.thruster_bank().unwrap();
    let weights = sc.allocation_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut max_primal, mut max_cost, mut converged) = (0.0f64, f64::NEG_INFINITY, 0);
    let mut iterations = Vec::with_capacity(QP_INSTANCES);
    for _ in 0..QP_INSTANCES {
        let (_, problem) =
            random_feasible_problem(&mut rng, &template, &weights, sc.run.dt_opt, sc.allocation.slack_bound).unwrap();
        let oracle = solve_oracle(&problem).unwrap();
        let report = solve_pdnn(&problem, &ZVector::zeros(), &sc.allocation.solver);
        max_primal = max_primal.max((report.primal - oracle.primal).abs().max());
        max_cost = max_cost.max(report.cost - oracle.cost);
        converged += usize::from(report.termination == Termination::Converged);
        iterations.push(report.iterations);
    }
    iterations.sort_unstable();
    let median = iterations[QP_INSTANCES / 2];
    let pass = max_primal <= QP_PRIMAL_TOL
        && max_cost <= QP_COST_TOL
        && median < QP_MEDIAN_ITERATIONS
        && converged == QP_INSTANCES;
    report(
        6,
        "solver correctness",
        pass,
        format!(
            "{QP_INSTANCES} instances, max primal deviation {max_primal:.2e} vs {QP_PRIMAL_TOL:e}, \
             max cost excess {max_cost:.2e} vs {QP_COST_TOL:e}, median iterations {median} vs {QP_MEDIAN_ITERATIONS}, \
             variance rule fired {converged}/{QP_INSTANCES}"
        ),
    );
}

fn rotation_defect() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    (0..ROTATION_SAMPLES)
        .map(|_| {
            let r = rotation_matrix(rng.random_range(-100.0 * TAU..100.0 * TAU));
            let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
            orth.max((r.determinant() - 1.0).abs())
        })
        .fold(0.0, f64::max)
}

fn jacobian_defect() -> f64 {
    let bank = Scenario::bundled().thruster_bank().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..JACOBIAN_POINTS {
        let alpha = Vector6::from_fn(|_, _| rng.random_range(0.0..TAU));
        let u = Vector6::from_fn(|_, _| rng.random_range(-0.7..0.7));
        let analytic = configuration_jacobian(&alpha, &u, &bank);
        for j in 0..6 {
            let mut plus = alpha;
            let mut minus = alpha;
            plus[j] += h;
            minus[j] -= h;
            let fd = (configuration_map(&plus, &u, &bank) - configuration_map(&minus, &u, &bank)) / (2.0 * h);
            let col = analytic.column(j);
            let scale = col.norm().max(fd.norm()).max(1e-3);
            worst = worst.max((col - fd).norm() / scale);
        }
    }
    worst
}

fn delay_defect() -> f64 {
    let (delay, dt) = (2.0, 0.02);
    let signal = |t: f64| Vector3::new((0.3 * t).sin(), 0.5 - 0.1 * t, (1.7 * t).cos());
    let ramp = |t: f64| Vector3::new(2.0 * t + 1.0, -t, 0.25 * t);
    let mut line = DelayLine::new(delay, dt).unwrap();
    let mut linear = DelayLine::new(delay, dt).unwrap();
    let mut worst = 0.0f64;
    for k in 0..2000 {
        let t = k as f64 * dt;
        line.push(t, signal(t)).unwrap();
        linear.push(t, ramp(t)).unwrap();
        if t >= delay {
            let back = ((t - delay) / dt).round() * dt;
            worst = worst.max((line.value_at(t - delay).unwrap() - signal(back)).abs().max());
            let (read, integral) = linear.read_and_integral(t).unwrap();
            let exact = Vector3::new(
                (t * t + t) - ((t - delay).powi(2) + (t - delay)),
                -(t * t - (t - delay).powi(2)) / 2.0,
                0.125 * (t * t - (t - delay).powi(2)),
            );
            worst = worst.max((read - ramp(t - delay)).abs().max() / ramp(t - delay).abs().max().max(1.0));
            worst = worst.max((integral - exact).abs().max() / exact.abs().max().max(1.0));
        } else {
            worst = worst.max(line.value_at(t - delay).unwrap().abs().max());
        }
    }
    worst
}

#[test]
fn criterion_7_structural_identities() {
    let rotation = rotation_defect();
    let kyp = Scenario::bundled().observer_gains().unwrap().kyp_residual();
    let jacobian = jacobian_defect();
    let delay = delay_defect();
    let pass = rotation <= ROTATION_TOL && kyp < KYP_TOL && jacobian <= JACOBIAN_TOL && delay <= DELAY_TOL;
    report(
        7,
        "structural identities",
        pass,
        format!(
            "rotation defect {rotation:.2e} over {ROTATION_SAMPLES} samples vs {ROTATION_TOL:e}, KYP residual {kyp:.2e} vs {KYP_TOL:e}, \
             jacobian relative error {jacobian:.2e} vs {JACOBIAN_TOL:e}, delay-line error {delay:.2e} vs {DELAY_TOL:e}"
        ),
    );
}

#[test]
fn criterion_8_determinism() {
    let sc = Scenario::bundled();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        if let Err(e) = run_scenario(&sc, Some(dir.path())) {
            return report(8, "determinism", false, format!("run aborted: {e}"));
        }
    }
    let files = ["observer.csv", "controller.csv", "allocation.csv", "environment.csv"];
    let mut differing = Vec::new();
    let mut bytes = 0;
    for f in files {
        let a = fs::read(dirs[0].path().join(f)).unwrap();
        let b = fs::read(dirs[1].path().join(f)).unwrap();
        bytes += a.len();
        if a != b {
            differing.push(f);
        }
    }
    report(
        8,
        "determinism",
        differing.is_empty(),
        format!(
            "{} CSV files, {bytes} bytes compared, differing: {differing:?}",
            files.len()
        ),
    );
}

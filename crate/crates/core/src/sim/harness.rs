//! Fixed-step closed loop: environment, observer, controller, allocator, plant.
//!
//! Per step at time `t`, with every signal sampled at `t`:
//! 1. draw the disturbance held over the step and update the alarm monitor with `Phi_hat(t)`;
//! 2. evaluate the reference, tracking errors, auxiliary state and control law;
//! 3. run the allocator when its cycle is due (zero-order hold in between);
//! 4. record the held thruster force in the actuator delay line and read the force issued
//!    `t_d` earlier, which the plant receives together with the undelayed wind feedforward;
//! 5. advance plant, observer, adaptive weights and `z_f` over `[t, t + dt]` with RK4.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::log::{
    write_text, AllocationRow, ControllerRow, EnvironmentRow, ObserverRow, RunSummary, Traces, CONFIG_COPY,
    SUMMARY_FILE,
};
use super::scenario::Scenario;
use super::trajectory::desired_trajectory;
use crate::allocation::{Allocator, Termination, ThrusterBank};
use crate::controller::{
    actuator_command, auxiliary_state, check_barrier, control_law, controller_nn_input,
    controller_nn_update_and_augment, position_error, stabilizing_function, zf_rate, BackwardDifference, ControlInputs,
};
use crate::environment::{disturbance_sample, wave_drift_load, wave_gate, wind_load, WaveComponentBank};
use crate::error::{DpError, Result};
use crate::observer::{
    alarm_update, observer_nn_input, observer_nn_rate, observer_rhs, stack, wind_coeff_rate, AlarmMonitor, ObserverMode,
};
use crate::rbf::nn_output;
use crate::vessel::{dynamics_rhs, rk4_step, BodyVelocity, Pose, VesselState};

/// Slack used when comparing logged allocation results against their bounds.
pub const BOUND_TOL: f64 = 1e-9;

/// Result of a completed run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub traces: Traces,
    /// Wall-clock duration of the simulation loop in seconds.
    pub elapsed: f64,
}

/// Offsets of the sub-states inside the integrated vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    nodes_d: usize,
    nodes_c: usize,
}

impl Layout {
    const ETA: usize = 0;
    const NU: usize = 3;
    const X_HAT: usize = 6;
    const PHI: usize = 12;
    const W_D: usize = 15;

    fn z_f(&self) -> usize {
        Self::W_D + 3 * self.nodes_d
    }

    fn w_c(&self) -> usize {
        self.z_f() + 3
    }

    fn len(&self) -> usize {
        self.w_c() + 3 * self.nodes_c
    }
}

fn v3(x: &DVector<f64>, at: usize) -> Vector3<f64> {
    x.fixed_rows::<3>(at).into_owned()
}

fn v6(x: &DVector<f64>, at: usize) -> Vector6<f64> {
    x.fixed_rows::<6>(at).into_owned()
}

fn weights(x: &DVector<f64>, at: usize, nodes: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(nodes, 3, &x.as_slice()[at..at + 3 * nodes])
}

fn vessel(x: &DVector<f64>) -> VesselState {
    let eta = v3(x, Layout::ETA);
    let nu = v3(x, Layout::NU);
    VesselState::new(Pose::from_vector(&eta), BodyVelocity::from_vector(&nu))
}

/// Wind and wave loads as functions of time and vessel state.
struct Environment<'a> {
    scenario: &'a Scenario,
    bank: Option<WaveComponentBank>,
}

impl Environment<'_> {
    fn wind(&self, t: f64, psi: f64) -> (Matrix3<f64>, Vector3<f64>) {
        let mut p = self.scenario.wind_params();
        p.speed = self.scenario.wind_speed(t);
        wind_load(psi, &p)
    }

    fn wave(&mut self, t: f64, psi: f64, nu: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let gate = wave_gate(t, &self.scenario.wave_gate());
        match self.bank.as_mut() {
            Some(bank) => {
                bank.beta_r = psi - self.scenario.wave.direction;
                let speed = nu[0].hypot(nu[1]);
                (gate, wave_drift_load(t, bank, speed, gate))
            }
            None => (0.0, Vector3::zeros()),
        }
    }
}

/// Violated allocation bounds of one logged cycle, as short labels.
pub fn allocation_violations(row: &AllocationRow, bank: &ThrusterBank, max_step: f64, slack_bound: f64) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..6 {
        if row.u[i] < bank.u_min[i] - BOUND_TOL || row.u[i] > bank.u_max[i] + BOUND_TOL {
            out.push(format!("u{} = {}", i + 1, row.u[i]));
        }
        if !bank.intervals[i].contains(row.alpha[i], BOUND_TOL) {
            out.push(format!("alpha{} = {} outside admissible interval", i + 1, row.alpha[i]));
        }
        if row.delta_alpha[i].abs() > max_step + BOUND_TOL {
            out.push(format!("dalpha{} = {}", i + 1, row.delta_alpha[i]));
        }
    }
    if row.slack.abs().max() > slack_bound + BOUND_TOL {
        out.push(format!("slack {}", row.slack.abs().max()));
    }
    out
}

/// Run the scenario in memory. On an abort the traces recorded so far are returned with the error.
pub fn simulate(scenario: &Scenario) -> (Traces, std::result::Result<(), DpError>) {
    let mut traces = Traces::default();
    let result = simulate_into(scenario, &mut traces);
    (traces, result)
}

fn simulate_into(sc: &Scenario, traces: &mut Traces) -> Result<()> {
    sc.validate()?;
    let dt = sc.run.dt;
    let t_d = sc.run.input_delay;
    let model = sc.vessel_model()?;
    let obs_gains = sc.observer_gains()?;
    let ctl_gains = sc.controller_gains();
    let net_d = sc.observer_network()?;
    let net_c = sc.controller_network()?;
    let layout = Layout {
        nodes_d: net_d.n_nodes(),
        nodes_c: net_c.n_nodes(),
    };
    let bank = sc.wave_bank()?;
    let descriptor = sc.wave_descriptor(&bank);
    let mut env = Environment {
        scenario: sc,
        bank: sc.wave.enabled.then_some(bank),
    };
    let mut allocator = Allocator::new(
        sc.thruster_bank()?,
        sc.allocation_weights(),
        sc.allocation.solver,
        sc.run.dt_opt,
        sc.allocation.slack_bound,
    )?;
    let mut monitor = AlarmMonitor::new(sc.observer.alarm_window, sc.observer.alarm_threshold)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.run.seed.wrapping_add(3));
    let mut alpha_diff = BackwardDifference::new();

    // Thrusters are idle before the run starts; the initial thruster state only seeds the allocator.
    let idle = Vector3::zeros();
    let mut force_line = crate::vessel::DelayLine::with_prehistory(t_d, dt, idle)?;
    let mut command_line = crate::vessel::DelayLine::with_prehistory(t_d, dt, idle)?;

    let init = sc.initial_state();
    let mut x = DVector::zeros(layout.len());
    x.fixed_rows_mut::<3>(Layout::ETA).copy_from(&init.eta());
    x.fixed_rows_mut::<3>(Layout::NU).copy_from(&init.nu());
    x.fixed_rows_mut::<6>(Layout::X_HAT)
        .copy_from(&stack(&init.eta(), &init.nu()));
    x.fixed_rows_mut::<3>(Layout::PHI)
        .copy_from(&Vector3::from(sc.observer.initial_phi));

    let mut held_force = idle;
    let mut next_cycle = 0.0;
    let cycle_tol = 1e-9 * dt;

    for k in 0..sc.steps() {
        let t = k as f64 * dt;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(DpError::NonFinite { t });
        }
        let eta = v3(&x, Layout::ETA);
        let nu = v3(&x, Layout::NU);
        let x_meas = stack(&eta, &nu);
        let x_hat = v6(&x, Layout::X_HAT);
        let phi_hat = v3(&x, Layout::PHI);

        let d = if sc.disturbance.enabled {
            disturbance_sample(&mut rng, sc.disturbance.bound)
        } else {
            Vector3::zeros()
        };
        let alarm = alarm_update(&mut monitor, t, &phi_hat);
        let mode = if alarm {
            ObserverMode::PostAlarm
        } else {
            ObserverMode::PreAlarm
        };
        let (pi, tau_wind) = env.wind(t, eta[2]);
        let (gate, tau_wave) = env.wave(t, eta[2], &nu);

        let (eta_d, eta_d_rate) = desired_trajectory(t, sc.run.sea_state_change);
        let z1 = position_error(&eta_d, &eta);
        check_barrier(&z1, &ctl_gains.n_b, t)?;
        let alpha_c = stabilizing_function(&eta_d_rate, &z1, eta[2], &ctl_gains.k1, &ctl_gains.n_b)?;
        let alpha_c_rate = alpha_diff.update(t, &alpha_c);
        let z2 = alpha_c - nu;

        let provisional = command_line.newest().unwrap_or(idle);
        command_line.push(t, provisional)?;
        let (_, integral) = command_line.read_and_integral(t)?;
        let z_f = v3(&x, layout.z_f());
        let s = auxiliary_state(&z2, &integral, &z_f, &model);
        let inputs = ControlInputs {
            z1,
            z2,
            s,
            z_f,
            alpha_c_rate,
            eta,
            nu,
        };
        let tau_prime = control_law(&inputs, &model, &ctl_gains)?;
        let basis_c = net_c.basis(&controller_nn_input(&descriptor, &eta, &nu))?;
        let w_c = weights(&x, layout.w_c(), layout.nodes_c);
        let (_, tau_prime_m) = controller_nn_update_and_augment(&s, &basis_c, &w_c, &tau_prime, &ctl_gains, alarm)?;
        let phi_feed = match monitor.latched_mean() {
            Some(mean) if sc.observer.freeze_feedforward => mean,
            _ => phi_hat,
        };
        let tau_wind_hat = pi * phi_feed;
        let tau_cmd = actuator_command(&tau_prime_m, &tau_wind_hat);

        if t >= next_cycle - cycle_tol {
            let before = allocator.bank.alpha;
            let outcome = allocator.allocate(&tau_cmd)?;
            held_force = outcome.achieved;
            traces.allocation.push(AllocationRow {
                t,
                tau_cmd,
                achieved: outcome.achieved,
                slack: outcome.slack,
                u: outcome.u,
                alpha: outcome.alpha,
                delta_alpha: outcome.alpha - before,
                iterations: outcome.iterations,
                termination: outcome.termination,
            });
            next_cycle += sc.run.dt_opt;
        }
        force_line.push(t, held_force)?;
        command_line.update_newest(held_force + tau_wind_hat)?;
        let applied = force_line.value_at(t - t_d)?;

        traces.observer.push(ObserverRow {
            t,
            x_hat,
            phi_hat,
            alarm,
            x_tilde_norm: (x_meas - x_hat).norm(),
        });
        traces.controller.push(ControllerRow {
            t,
            eta_d,
            eta,
            z1,
            z2,
            s,
            z_f,
            tau_prime,
            tau_wind_hat,
            tau: tau_cmd,
        });
        traces.environment.push(EnvironmentRow {
            t,
            tau_wind,
            tau_wave,
            gate,
            disturbance: d,
            applied,
        });

        x = rk4_step(t, &x, dt, |ts, y| {
            let state = vessel(y);
            let (eta_s, nu_s) = (state.eta(), state.nu());
            let (pi_s, wind_s) = env.wind(ts, eta_s[2]);
            let (_, wave_s) = env.wave(ts, eta_s[2], &nu_s);
            let (pose_rate, accel) = dynamics_rhs(&state, &applied, &wave_s, &wind_s, &d, &model);

            let x_hat_s = v6(y, Layout::X_HAT);
            let phi_s = v3(y, Layout::PHI);
            let x_tilde = stack(&eta_s, &nu_s) - x_hat_s;
            let w_d = weights(y, Layout::W_D, layout.nodes_d);
            let (w_d_rate, wave_nn) = if alarm {
                let basis = net_d
                    .basis(&observer_nn_input(&descriptor, &x_hat_s))
                    .expect("observer input width");
                let out = nn_output(&w_d, &basis).expect("observer weight shape");
                (observer_nn_rate(&x_tilde, &basis, &obs_gains, &model), out)
            } else {
                (DMatrix::zeros(layout.nodes_d, 3), Vector3::zeros())
            };
            let x_hat_rate = observer_rhs(
                &x_hat_s,
                &phi_s,
                &stack(&eta_s, &nu_s),
                &applied,
                &pi_s,
                &wave_nn,
                mode,
                &obs_gains,
                &model,
            );
            let phi_rate = wind_coeff_rate(&x_tilde, &pi_s, &obs_gains, &model);
            let z_f_rate = zf_rate(&s, &z2, &v3(y, layout.z_f()), &ctl_gains);
            let w_c_s = weights(y, layout.w_c(), layout.nodes_c);
            let (w_c_rate, _) = controller_nn_update_and_augment(&s, &basis_c, &w_c_s, &tau_prime, &ctl_gains, alarm)
                .expect("controller weight shape");

            let mut dx = DVector::zeros(layout.len());
            dx.fixed_rows_mut::<3>(Layout::ETA).copy_from(&pose_rate);
            dx.fixed_rows_mut::<3>(Layout::NU).copy_from(&accel);
            dx.fixed_rows_mut::<6>(Layout::X_HAT).copy_from(&x_hat_rate);
            dx.fixed_rows_mut::<3>(Layout::PHI).copy_from(&phi_rate);
            dx.rows_mut(Layout::W_D, 3 * layout.nodes_d)
                .copy_from_slice(w_d_rate.as_slice());
            dx.fixed_rows_mut::<3>(layout.z_f()).copy_from(&z_f_rate);
            dx.rows_mut(layout.w_c(), 3 * layout.nodes_c)
                .copy_from_slice(w_c_rate.as_slice());
            dx
        })?;
    }
    Ok(())
}

/// Summary statistics of a (possibly partial) run.
pub fn summarize(sc: &Scenario, traces: &Traces, abort: Option<&DpError>) -> Result<RunSummary> {
    let bank = sc.thruster_bank()?;
    let mut max_abs_z1 = [0.0f64; 3];
    for row in &traces.controller {
        for (m, z) in max_abs_z1.iter_mut().zip(row.z1.iter()) {
            *m = m.max(z.abs());
        }
    }
    let final_z1 = traces
        .controller
        .last()
        .map_or([0.0; 3], |r| [r.z1[0], r.z1[1], r.z1[2]]);
    let alarm_time = traces.observer.iter().find(|r| r.alarm).map(|r| r.t);
    let final_phi_hat = traces
        .observer
        .last()
        .map_or([0.0; 3], |r| [r.phi_hat[0], r.phi_hat[1], r.phi_hat[2]]);
    let count = |term: Termination| traces.allocation.iter().filter(|r| r.termination == term).count();
    let allocation_bound_violations = traces
        .allocation
        .iter()
        .filter(|r| !allocation_violations(r, &bank, sc.allocation.azimuth_step, sc.allocation.slack_bound).is_empty())
        .count();
    let max_force_error = traces
        .allocation
        .iter()
        .map(|r| (r.achieved - r.tau_cmd).abs().max())
        .fold(0.0, f64::max);
    Ok(RunSummary {
        status: if abort.is_some() { "aborted" } else { "completed" }.to_string(),
        abort_reason: abort.map(|e| e.to_string()),
        seed: sc.run.seed,
        steps: traces.controller.len(),
        final_time: traces.controller.last().map_or(0.0, |r| r.t),
        alarm_time,
        final_z1,
        max_abs_z1,
        barrier_violations: usize::from(matches!(abort, Some(DpError::BarrierViolation { .. }))),
        allocation_cycles: traces.allocation.len(),
        allocation_bound_violations,
        unconverged_cycles: count(Termination::Unconverged),
        diverged_cycles: count(Termination::Diverged),
        max_force_error,
        final_phi_hat,
    })
}

/// Run the scenario and, when `out_dir` is given, write the logs, summary and config copy.
///
/// Logs are written even when the run aborts; the abort error is returned afterwards.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>) -> Result<RunOutput> {
    let start = Instant::now();
    let (traces, result) = simulate(scenario);
    let elapsed = start.elapsed().as_secs_f64();
    let summary = summarize(scenario, &traces, result.as_ref().err())?;
    if let Some(dir) = out_dir {
        traces.write_csv(dir)?;
        let text = toml::to_string(&summary).map_err(|e| DpError::Config(e.to_string()))?;
        write_text(&dir.join(SUMMARY_FILE), &text)?;
        write_text(&dir.join(CONFIG_COPY), &scenario.to_toml()?)?;
    }
    result?;
    Ok(RunOutput {
        summary,
        traces,
        elapsed,
    })
}

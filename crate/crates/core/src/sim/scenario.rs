//! Scenario configuration and construction of the runtime components it describes.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::allocation::{
    forbidden_zone_intervals, AllocationWeights, AngleInterval, PdnnSettings, ThrusterBank, SIGN_X, SIGN_Y,
};
use crate::controller::ControllerGains;
use crate::environment::{jonswap_components, sinusoidal_drift, GateParams, Jonswap, WaveComponentBank, WindParams};
use crate::error::{DpError, Result};
use crate::observer::ObserverGains;
use crate::rbf::RbfNetwork;
use crate::vessel::{rigid_body_coriolis, BodyVelocity, Pose, VesselModel, VesselState};

/// Default scenario shipped with the crate.
pub const DEFAULT_SCENARIO: &str = include_str!("../../config/scenario_default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub run: RunConfig,
    pub vessel: VesselConfig,
    pub wind: WindConfig,
    pub wave: WaveConfig,
    pub disturbance: DisturbanceConfig,
    pub observer: ObserverConfig,
    pub controller: ControllerConfig,
    pub allocation: AllocationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration: f64,
    /// Integration and control step.
    pub dt: f64,
    /// Allocation period.
    pub dt_opt: f64,
    /// Instant the sea state changes and the reference starts moving.
    pub sea_state_change: f64,
    /// Actuator input delay.
    pub input_delay: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselConfig {
    /// Rows of the inertia matrix.
    pub mass: [[f64; 3]; 3],
    /// Diagonal of the linear damping matrix.
    pub damping: [f64; 3],
    pub coriolis: bool,
    pub initial_pose: [f64; 3],
    pub initial_velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindConfig {
    pub enabled: bool,
    pub rho_air: f64,
    pub area_transverse: f64,
    pub area_lateral: f64,
    pub length: f64,
    pub direction: f64,
    pub speed: f64,
    pub coefficients: [f64; 3],
    /// Duration of the linear speed ramp starting at the sea-state change.
    pub ramp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    pub enabled: bool,
    pub significant_height: f64,
    pub peak_frequency: f64,
    pub peak_enhancement: f64,
    pub components: usize,
    /// Frequency band as multiples of the peak frequency.
    pub band: [f64; 2],
    /// Per-DOF drift amplitude scale.
    pub drift_scale: [f64; 3],
    /// Propagation direction in the earth frame.
    pub direction: f64,
    pub rho_water: f64,
    pub gravity: f64,
    pub onset: f64,
    pub ramp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    pub enabled: bool,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub nodes: usize,
    /// Center range per input.
    pub ranges: [[f64; 2]; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    /// `A = -a I`.
    pub a: f64,
    /// `P = p I`.
    pub p: f64,
    /// `L = l I`.
    pub l: f64,
    /// `C = c I`.
    pub c: f64,
    pub gamma: [f64; 3],
    pub initial_phi: [f64; 3],
    pub nn_rate: [f64; 3],
    pub network: NetworkConfig,
    pub alarm_window: f64,
    pub alarm_threshold: f64,
    /// Hold the wind feedforward at the coefficient mean seen at the alarm.
    pub freeze_feedforward: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub k1: [f64; 3],
    pub k2: [f64; 3],
    pub gamma1: [f64; 3],
    pub theta: [f64; 3],
    pub n_b: [f64; 3],
    pub upsilon: [f64; 3],
    pub xi: [f64; 3],
    pub eps_pinv: f64,
    pub network: NetworkConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    pub thrust_weight: f64,
    pub angle_weight: f64,
    pub slack_weight: f64,
    pub thrust_limit: f64,
    pub slack_bound: f64,
    /// Largest azimuth change per allocation cycle.
    pub azimuth_step: f64,
    pub arm_x: [f64; 6],
    pub arm_y: [f64; 6],
    /// Encounter angles of thrusters 2 to 5 in degrees.
    pub encounter_angles_deg: [f64; 4],
    pub zone_halfwidth_deg: f64,
    pub initial_angles: [f64; 6],
    pub initial_thrust: [f64; 6],
    pub solver: PdnnSettings,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(DpError::Config(format!("{name} must be positive, got {v}")))
    }
}

fn diag(v: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::from(v))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn bundled() -> Self {
        Self::from_toml(DEFAULT_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DpError::Config(e.to_string()))
    }

    /// Check every parameter block, including the ones validated by component constructors.
    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        positive("duration", r.duration)?;
        positive("dt", r.dt)?;
        positive("dt_opt", r.dt_opt)?;
        if r.dt_opt < r.dt {
            return Err(DpError::Config(format!("dt_opt {} shorter than dt {}", r.dt_opt, r.dt)));
        }
        if !(r.input_delay >= 0.0) || !(r.sea_state_change >= 0.0) {
            return Err(DpError::Config(
                "input delay and sea-state change must be non-negative".into(),
            ));
        }
        let steps = r.input_delay / r.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(DpError::Config(format!(
                "input delay {} is not a multiple of dt {}",
                r.input_delay, r.dt
            )));
        }
        if r.sea_state_change > r.duration || (self.wave.enabled && self.wave.onset > r.duration) {
            return Err(DpError::Config("scenario events fall outside the run duration".into()));
        }
        self.vessel_model()?;
        if !(self.wind.ramp >= 0.0) {
            return Err(DpError::Config("wind ramp must be non-negative".into()));
        }
        self.wind_params().validate()?;
        self.wave_gate().validate()?;
        self.wave_spectrum().validate()?;
        if self.wave.components == 0 || !(self.wave.band[1] > self.wave.band[0]) || !(self.wave.band[0] >= 0.0) {
            return Err(DpError::Config("wave band or component count invalid".into()));
        }
        positive("water density", self.wave.rho_water)?;
        positive("gravity", self.wave.gravity)?;
        if !(self.disturbance.bound >= 0.0) {
            return Err(DpError::Config("disturbance bound must be non-negative".into()));
        }
        self.observer_gains()?;
        positive("alarm window", self.observer.alarm_window)?;
        self.controller_gains().validate()?;
        self.thruster_bank()?.validate()?;
        self.allocation_weights().validate()?;
        let a = &self.allocation;
        positive("azimuth step", a.azimuth_step)?;
        if !(a.slack_bound >= 0.0) {
            return Err(DpError::Config("slack bound must be non-negative".into()));
        }
        positive("solver gain", a.solver.gamma_z)?;
        positive("solver step factor", a.solver.step_factor)?;
        if a.solver.window < 2 || a.solver.check_every == 0 || a.solver.max_iter == 0 {
            return Err(DpError::Config(
                "solver window, check interval and iteration cap must be positive".into(),
            ));
        }
        self.observer_network()?;
        self.controller_network()?;
        Ok(())
    }

    pub fn vessel_model(&self) -> Result<VesselModel> {
        let m = self.vessel.mass;
        let mass = Matrix3::from_fn(|i, j| m[i][j]);
        let model = VesselModel::new(mass)?.with_linear_damping(diag(self.vessel.damping));
        Ok(if self.vessel.coriolis {
            model.with_coriolis(std::sync::Arc::new(move |nu| rigid_body_coriolis(&mass, nu)))
        } else {
            model.without_coriolis()
        })
    }

    pub fn initial_state(&self) -> VesselState {
        let p = self.vessel.initial_pose;
        let v = self.vessel.initial_velocity;
        VesselState::new(Pose::new(p[0], p[1], p[2]), BodyVelocity::new(v[0], v[1], v[2]))
    }

    pub fn wind_params(&self) -> WindParams {
        let w = &self.wind;
        WindParams {
            rho_air: w.rho_air,
            area_transverse: w.area_transverse,
            area_lateral: w.area_lateral,
            length: w.length,
            direction: w.direction,
            speed: w.speed,
            coefficients: w.coefficients,
        }
    }

    /// Wind speed at `t`: zero before the sea-state change, then a linear ramp to full speed.
    pub fn wind_speed(&self, t: f64) -> f64 {
        if !self.wind.enabled {
            return 0.0;
        }
        let since = t - self.run.sea_state_change;
        if since < 0.0 {
            0.0
        } else if self.wind.ramp <= 0.0 || since >= self.wind.ramp {
            self.wind.speed
        } else {
            self.wind.speed * since / self.wind.ramp
        }
    }

    pub fn wave_gate(&self) -> GateParams {
        GateParams {
            onset: self.wave.onset,
            ramp: self.wave.ramp,
        }
    }

    pub fn wave_spectrum(&self) -> Jonswap {
        Jonswap {
            hs: self.wave.significant_height,
            omega_peak: self.wave.peak_frequency,
            gamma: self.wave.peak_enhancement,
        }
    }

    pub fn wave_bank(&self) -> Result<WaveComponentBank> {
        let w = &self.wave;
        let band = (w.band[0] * w.peak_frequency, w.band[1] * w.peak_frequency);
        Ok(
            jonswap_components(&self.wave_spectrum(), w.components, band, self.run.seed)?
                .with_drift(sinusoidal_drift(Vector3::from(w.drift_scale)))
                .with_medium(w.rho_water, w.gravity),
        )
    }

    /// Network input block `[A_o, omega_o, beta_wave]`: amplitude of the component closest to the peak.
    pub fn wave_descriptor(&self, bank: &WaveComponentBank) -> Vector3<f64> {
        let peak = self.wave.peak_frequency;
        let amplitude = bank
            .components
            .iter()
            .min_by(|a, b| (a.omega - peak).abs().total_cmp(&(b.omega - peak).abs()))
            .map_or(0.0, |c| c.amplitude);
        Vector3::new(amplitude, peak, self.wave.direction)
    }

    pub fn observer_gains(&self) -> Result<ObserverGains> {
        let o = &self.observer;
        ObserverGains::isotropic(o.a, o.p, o.l, o.c, Vector3::from(o.gamma), Vector3::from(o.nn_rate))
    }

    pub fn controller_gains(&self) -> ControllerGains {
        let c = &self.controller;
        ControllerGains {
            k1: diag(c.k1),
            k2: diag(c.k2),
            gamma1: diag(c.gamma1),
            theta: diag(c.theta),
            n_b: Vector3::from(c.n_b),
            upsilon: Vector3::from(c.upsilon),
            xi: Vector3::from(c.xi),
            eps_pinv: c.eps_pinv,
        }
    }

    fn network(&self, cfg: &NetworkConfig, stream: u64) -> Result<RbfNetwork> {
        let ranges: Vec<(f64, f64)> = cfg.ranges.iter().map(|r| (r[0], r[1])).collect();
        RbfNetwork::new(&ranges, cfg.nodes, self.run.seed.wrapping_add(stream))
    }

    pub fn observer_network(&self) -> Result<RbfNetwork> {
        self.network(&self.observer.network, 1)
    }

    pub fn controller_network(&self) -> Result<RbfNetwork> {
        self.network(&self.controller.network, 2)
    }

    pub fn thruster_bank(&self) -> Result<ThrusterBank> {
        let a = &self.allocation;
        let deg = PI / 180.0;
        let angles: Vec<f64> = a.encounter_angles_deg.iter().map(|v| v * deg).collect();
        let zones = forbidden_zone_intervals(&angles, a.zone_halfwidth_deg * deg)?;
        Ok(ThrusterBank {
            arm_x: Vector6::from(a.arm_x),
            arm_y: Vector6::from(a.arm_y),
            sign_x: Vector6::from(SIGN_X),
            sign_y: Vector6::from(SIGN_Y),
            intervals: [
                AngleInterval::UNBOUNDED,
                zones[0],
                zones[1],
                zones[2],
                zones[3],
                AngleInterval::UNBOUNDED,
            ],
            u_min: Vector6::repeat(-a.thrust_limit),
            u_max: Vector6::repeat(a.thrust_limit),
            azimuth_rate: a.azimuth_step / self.run.dt_opt,
            alpha: Vector6::from(a.initial_angles),
            u: Vector6::from(a.initial_thrust),
        })
    }

    pub fn allocation_weights(&self) -> AllocationWeights {
        let a = &self.allocation;
        AllocationWeights::uniform(a.thrust_weight, a.angle_weight, a.slack_weight)
    }

    /// Number of integration steps covering the duration.
    pub fn steps(&self) -> usize {
        (self.run.duration / self.run.dt).round() as usize
    }
}

//! Environmental loads: wind, gated second-order wave drift and bounded random disturbance.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};

/// Half-width of the random phase interval of each wave component.
pub const PHASE_SPREAD: f64 = 0.2;

/// Default bound of the uniform disturbance on each channel.
pub const DISTURBANCE_BOUND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindParams {
    pub rho_air: f64,
    /// Transverse projected area A_T.
    pub area_transverse: f64,
    /// Lateral projected area A_L.
    pub area_lateral: f64,
    /// Vessel length L_v.
    pub length: f64,
    /// Wind direction beta_w.
    pub direction: f64,
    /// Relative wind speed V_w.
    pub speed: f64,
    /// Peak drag coefficients [C_x, C_y, C_N].
    pub coefficients: [f64; 3],
}

impl WindParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_air", self.rho_air),
            ("area_transverse", self.area_transverse),
            ("area_lateral", self.area_lateral),
            ("length", self.length),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(DpError::Config(format!("wind {name} must be positive, got {v}")));
            }
        }
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return Err(DpError::Config(format!(
                "wind speed must be non-negative, got {}",
                self.speed
            )));
        }
        if !self.direction.is_finite() || !self.coefficients.iter().all(|c| c.is_finite()) {
            return Err(DpError::Config("wind direction and coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn phi(&self) -> Vector3<f64> {
        Vector3::from(self.coefficients)
    }
}

/// `Pi(psi)` and the resulting wind load `Pi * Phi`.
pub fn wind_load(psi: f64, p: &WindParams) -> (Matrix3<f64>, Vector3<f64>) {
    let pi = wind_matrix(psi, p);
    (pi, pi * p.phi())
}

pub fn wind_matrix(psi: f64, p: &WindParams) -> Matrix3<f64> {
    let q = 0.5 * p.rho_air * p.speed * p.speed;
    let rel = psi - p.direction;
    Matrix3::from_diagonal(&Vector3::new(
        q * rel.cos() * p.area_transverse,
        q * rel.sin() * p.area_lateral,
        q * (2.0 * rel).sin() * p.area_lateral * p.length,
    ))
}

/// Onset instant `T` and shielding ramp time `t_T` of the wave load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub onset: f64,
    pub ramp: f64,
}

impl GateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp > 0.0) || !self.ramp.is_finite() || !self.onset.is_finite() {
            return Err(DpError::Config(format!(
                "wave gate needs finite onset and positive ramp, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// 0 before onset, linear ramp over `ramp` seconds, 1 afterwards.
pub fn wave_gate(t: f64, gate: &GateParams) -> f64 {
    let s = t - gate.onset;
    if s < 0.0 {
        0.0
    } else if s >= gate.ramp {
        1.0
    } else {
        s / gate.ramp
    }
}

/// JONSWAP spectrum in the significant-wave-height form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jonswap {
    pub hs: f64,
    pub omega_peak: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    3.3
}

impl Jonswap {
    pub fn new(hs: f64, omega_peak: f64) -> Self {
        Self {
            hs,
            omega_peak,
            gamma: default_gamma(),
        }
    }

    pub fn from_peak_period(hs: f64, tp: f64) -> Self {
        Self::new(hs, 2.0 * PI / tp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hs >= 0.0) || !(self.omega_peak > 0.0) || !(self.gamma >= 1.0) {
            return Err(DpError::Config(format!("invalid JONSWAP parameters {self:?}")));
        }
        if ![self.hs, self.omega_peak, self.gamma].iter().all(|v| v.is_finite()) {
            return Err(DpError::Config(format!("non-finite JONSWAP parameters {self:?}")));
        }
        Ok(())
    }

    pub fn density(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            return 0.0;
        }
        let wp = self.omega_peak;
        let sigma = if omega <= wp { 0.07 } else { 0.09 };
        let r = wp / omega;
        let peak = (-(omega - wp).powi(2) / (2.0 * sigma * sigma * wp * wp)).exp();
        let norm = 1.0 - 0.287 * self.gamma.ln();
        norm * 5.0 / 16.0 * self.hs * self.hs * wp.powi(4) / omega.powi(5)
            * (-1.25 * r.powi(4)).exp()
            * self.gamma.powf(peak)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveComponent {
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// Per-DOF drift amplitude `|F(omega, beta_r)|`.
pub type DriftAmplitude = Arc<dyn Fn(f64, f64) -> Vector3<f64> + Send + Sync>;

/// Sinusoidal stand-in for RAO data: `a_dof * (1 + cos beta_r)`, flat in frequency.
pub fn sinusoidal_drift(scale: Vector3<f64>) -> DriftAmplitude {
    Arc::new(move |_omega, beta| scale * (1.0 + beta.cos()))
}

#[derive(Clone)]
pub struct WaveComponentBank {
    pub components: Vec<WaveComponent>,
    pub delta_omega: f64,
    /// Wave attack angle relative to the heading.
    pub beta_r: f64,
    pub rho_water: f64,
    pub gravity: f64,
    pub drift: DriftAmplitude,
}

impl fmt::Debug for WaveComponentBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveComponentBank")
            .field("components", &self.components.len())
            .field("delta_omega", &self.delta_omega)
            .field("beta_r", &self.beta_r)
            .finish_non_exhaustive()
    }
}

impl WaveComponentBank {
    pub fn with_drift(mut self, drift: DriftAmplitude) -> Self {
        self.drift = drift;
        self
    }

    pub fn with_attack_angle(mut self, beta_r: f64) -> Self {
        self.beta_r = beta_r;
        self
    }

    pub fn with_medium(mut self, rho_water: f64, gravity: f64) -> Self {
        self.rho_water = rho_water;
        self.gravity = gravity;
        self
    }

    /// `sum_k A_k^2 / 2`, the variance represented by the bank.
    pub fn variance(&self) -> f64 {
        self.components.iter().map(|c| 0.5 * c.amplitude * c.amplitude).sum()
    }
}

/// Equally spaced components at the bin midpoints of `omega_range`.
pub fn jonswap_components(
    spectrum: &Jonswap,
    n: usize,
    omega_range: (f64, f64),
    seed: u64,
) -> Result<WaveComponentBank> {
    spectrum.validate()?;
    let (lo, hi) = omega_range;
    if n == 0 {
        return Err(DpError::Config("wave bank needs at least one component".into()));
    }
    if !(hi > lo) || !(lo >= 0.0) || !hi.is_finite() {
        return Err(DpError::Config(format!("invalid wave frequency range [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dw = (hi - lo) / n as f64;
    let components = (0..n)
        .map(|k| {
            let omega = lo + (k as f64 + 0.5) * dw;
            WaveComponent {
                omega,
                amplitude: (2.0 * spectrum.density(omega) * dw).sqrt(),
                phase: rng.random_range(-PHASE_SPREAD..=PHASE_SPREAD),
            }
        })
        .collect();
    Ok(WaveComponentBank {
        components,
        delta_omega: dw,
        beta_r: 0.0,
        rho_water: 1025.0,
        gravity: 9.81,
        drift: sinusoidal_drift(Vector3::new(1.0, 1.0, 1.0)),
    })
}

pub fn encounter_frequency(speed: f64, omega: f64, beta: f64, gravity: f64) -> f64 {
    (omega - omega * omega / gravity * speed * beta.cos()).abs()
}

/// Gated wave-drift load at time `t` for forward speed `speed`.
pub fn wave_drift_load(t: f64, bank: &WaveComponentBank, speed: f64, gate_value: f64) -> Vector3<f64> {
    if gate_value == 0.0 {
        return Vector3::zeros();
    }
    let rg = bank.rho_water * bank.gravity;
    let mut acc = Vector3::zeros();
    for c in &bank.components {
        let we = encounter_frequency(speed, c.omega, bank.beta_r, bank.gravity);
        let f = (bank.drift)(c.omega, bank.beta_r);
        acc += f * (rg * c.amplitude * c.amplitude * (we * t + c.phase).cos());
    }
    acc * gate_value
}

pub fn disturbance_sample<R: Rng + ?Sized>(rng: &mut R, bound: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-bound..=bound))
}

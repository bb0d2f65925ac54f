//! Barrier-Lyapunov backstepping tracking controller with input-delay compensation.
//!
//! Step 1 shapes the earth-frame error `z1 = eta_d - eta` through the stabilizing function
//! `alpha_c`; step 2 handles `z2 = alpha_c - nu` through the auxiliary state
//! `S = z2 - M^-1 int tau' - z_f`, which absorbs the input delay.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{DpError, Result};
use crate::vessel::{rotation_matrix, VesselModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub k1: Matrix3<f64>,
    pub k2: Matrix3<f64>,
    pub gamma1: Matrix3<f64>,
    pub theta: Matrix3<f64>,
    pub n_b: Vector3<f64>,
    pub upsilon: Vector3<f64>,
    pub xi: Vector3<f64>,
    pub eps_pinv: f64,
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("K1", &self.k1),
            ("K2", &self.k2),
            ("Gamma1", &self.gamma1),
            ("Theta", &self.theta),
        ] {
            let sym = (m + m.transpose()) * 0.5;
            if sym.cholesky().is_none() {
                return Err(DpError::Config(format!(
                    "controller gain {name} is not positive definite"
                )));
            }
        }
        if self.n_b.iter().any(|b| !(*b > 0.0)) {
            return Err(DpError::Config("error bounds N_b must be positive".into()));
        }
        if self.upsilon.iter().chain(self.xi.iter()).any(|v| !(*v >= 0.0)) {
            return Err(DpError::Config("NN rates must be non-negative".into()));
        }
        if !(self.eps_pinv > 0.0) {
            return Err(DpError::Config("pseudo-inverse regularizer must be positive".into()));
        }
        Ok(())
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `z1 = eta_d - eta` with the heading component wrapped.
pub fn position_error(eta_d: &Vector3<f64>, eta: &Vector3<f64>) -> Vector3<f64> {
    let mut z1 = eta_d - eta;
    z1[2] = wrap_angle(z1[2]);
    z1
}

pub fn tracking_errors(
    eta_d: &Vector3<f64>,
    eta: &Vector3<f64>,
    alpha_c: &Vector3<f64>,
    nu: &Vector3<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    (position_error(eta_d, eta), alpha_c - nu)
}

/// Fails when any `|z1_i|` has reached its bound.
pub fn check_barrier(z1: &Vector3<f64>, n_b: &Vector3<f64>, t: f64) -> Result<()> {
    if z1.iter().zip(n_b.iter()).any(|(z, b)| !(z.abs() < *b)) {
        return Err(DpError::BarrierViolation {
            t,
            z1: [z1[0], z1[1], z1[2]],
            bound: [n_b[0], n_b[1], n_b[2]],
        });
    }
    Ok(())
}

/// `alpha_c = J^T(psi) [eta_d' + (N_b^T N_b - z1^T z1) K1 z1]`.
pub fn stabilizing_function(
    eta_d_rate: &Vector3<f64>,
    z1: &Vector3<f64>,
    psi: f64,
    k1: &Matrix3<f64>,
    n_b: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    check_barrier(z1, n_b, f64::NAN)?;
    let shaped = k1 * z1 * (n_b.dot(n_b) - z1.dot(z1));
    Ok(rotation_matrix(psi).transpose() * (eta_d_rate + shaped))
}

/// `S = z2 - M^-1 int tau' - z_f`.
pub fn auxiliary_state(
    z2: &Vector3<f64>,
    control_integral: &Vector3<f64>,
    z_f: &Vector3<f64>,
    model: &VesselModel,
) -> Vector3<f64> {
    z2 - model.mass_inv() * control_integral - z_f
}

/// `z_f' = K2 S - Gamma1 z2 - Theta z_f`.
pub fn zf_rate(s: &Vector3<f64>, z2: &Vector3<f64>, z_f: &Vector3<f64>, gains: &ControllerGains) -> Vector3<f64> {
    gains.k2 * s - gains.gamma1 * z2 - gains.theta * z_f
}

/// Signals the control law consumes at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInputs {
    pub z1: Vector3<f64>,
    pub z2: Vector3<f64>,
    pub s: Vector3<f64>,
    pub z_f: Vector3<f64>,
    pub alpha_c_rate: Vector3<f64>,
    pub eta: Vector3<f64>,
    pub nu: Vector3<f64>,
}

/// Scalar bracket multiplying the pseudo-inverse of `S^T`: three cross terms and three
/// barrier-weighted `z1^T K1 z1` terms, one per axis.
pub fn barrier_bracket(z1: &Vector3<f64>, z2: &Vector3<f64>, psi: f64, gains: &ControllerGains) -> f64 {
    let jz2 = rotation_matrix(psi) * z2;
    let energy = z1.dot(&(gains.k1 * z1));
    (0..3)
        .map(|i| {
            let nb2 = gains.n_b[i] * gains.n_b[i];
            let denom = nb2 - z1[i] * z1[i];
            (z1[i] * jz2[i] + nb2 * energy) / denom
        })
        .sum()
}

/// `tau' = M alpha_c' + M_s + K2 z_f + (S^T)^+ [bracket]` with `(S^T)^+ = S / (S^T S + eps)`.
pub fn control_law(inputs: &ControlInputs, model: &VesselModel, gains: &ControllerGains) -> Result<Vector3<f64>> {
    check_barrier(&inputs.z1, &gains.n_b, f64::NAN)?;
    let m_s = model.model_forces(&inputs.eta, &inputs.nu);
    let bracket = barrier_bracket(&inputs.z1, &inputs.z2, inputs.eta[2], gains);
    let pinv = inputs.s / (inputs.s.dot(&inputs.s) + gains.eps_pinv);
    Ok(model.mass() * inputs.alpha_c_rate + m_s + gains.k2 * inputs.z_f + pinv * bracket)
}

/// Controller NN weight rates and the augmented command `tau'_m = tau' - W_c^T S_c`.
///
/// Before the alarm the weights are frozen and the command passes through unchanged.
pub fn controller_nn_update_and_augment(
    s: &Vector3<f64>,
    basis_c: &DVector<f64>,
    w_c: &DMatrix<f64>,
    tau_prime: &Vector3<f64>,
    gains: &ControllerGains,
    alarm: bool,
) -> Result<(DMatrix<f64>, Vector3<f64>)> {
    if w_c.nrows() != basis_c.len() || w_c.ncols() != 3 {
        return Err(DpError::Shape(format!(
            "controller weights {} x {} for {} basis values",
            w_c.nrows(),
            w_c.ncols(),
            basis_c.len()
        )));
    }
    if !alarm {
        return Ok((DMatrix::zeros(w_c.nrows(), 3), *tau_prime));
    }
    let rate = DMatrix::from_fn(w_c.nrows(), 3, |k, i| {
        -gains.upsilon[i] * (basis_c[k] * s[i] + gains.xi[i] * w_c[(k, i)])
    });
    let comp = w_c.tr_mul(basis_c);
    Ok((rate, tau_prime - Vector3::new(comp[0], comp[1], comp[2])))
}

/// Thruster command: the wind feedforward is removed from the generalized force.
pub fn actuator_command(tau_prime_m: &Vector3<f64>, tau_wind_hat: &Vector3<f64>) -> Vector3<f64> {
    tau_prime_m - tau_wind_hat
}

/// Controller network input `[A_o, omega_o, beta_wave, x rate, y rate, heading]` from measurements.
pub fn controller_nn_input(wave_params: &Vector3<f64>, eta: &Vector3<f64>, nu: &Vector3<f64>) -> DVector<f64> {
    let rate = rotation_matrix(eta[2]) * nu;
    DVector::from_vec(vec![
        wave_params[0],
        wave_params[1],
        wave_params[2],
        rate[0],
        rate[1],
        eta[2],
    ])
}

/// First-order backward difference, zero on the first sample.
#[derive(Debug, Clone, Default)]
pub struct BackwardDifference {
    last: Option<(f64, Vector3<f64>)>,
}

impl BackwardDifference {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rate estimate from the stored sample to `value`, without storing it.
    pub fn peek(&self, t: f64, value: &Vector3<f64>) -> Vector3<f64> {
        match self.last {
            Some((t0, v0)) if t > t0 => (value - v0) / (t - t0),
            _ => Vector3::zeros(),
        }
    }

    pub fn update(&mut self, t: f64, value: &Vector3<f64>) -> Vector3<f64> {
        let rate = self.peek(t, value);
        self.last = Some((t, *value));
        rate
    }
}

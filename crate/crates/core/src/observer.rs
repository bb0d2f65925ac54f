//! Full-state sea observer with wind-coefficient adaptation, RBF wave compensation and the
//! drag-coefficient alarm.
//!
//! With `X = [eta; nu]` the plant reads `X' = f(X) X + phi(X) + R [tau + loads]` where
//! `f(X) X + phi(X) = [J(psi) nu; -M^-1 (C nu + D nu + g)]` and `R = [0; M^-1]`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SMatrix, Vector3, Vector6};

use crate::error::{DpError, Result};
use crate::vessel::{rotation_matrix, VesselModel};

pub type InputMatrix = SMatrix<f64, 6, 3>;

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGains {
    pub a: Matrix6<f64>,
    pub p: Matrix6<f64>,
    pub q: Matrix6<f64>,
    pub l: Matrix6<f64>,
    pub c: Matrix6<f64>,
    pub gamma: Matrix3<f64>,
    pub omega_nn: Vector3<f64>,
}

impl ObserverGains {
    /// `A = -a I`, `P = p I`, `Q = sqrt(2 a p) I`, so the KYP identity holds by construction.
    pub fn isotropic(a: f64, p: f64, l: f64, c: f64, gamma: Vector3<f64>, omega_nn: Vector3<f64>) -> Result<Self> {
        if !(a > 0.0) || !(p > 0.0) {
            return Err(DpError::Config(format!(
                "observer needs a > 0 and p > 0, got a = {a}, p = {p}"
            )));
        }
        if gamma.iter().any(|g| !(*g > 0.0)) || omega_nn.iter().any(|w| !(*w >= 0.0)) {
            return Err(DpError::Config("observer adaptation gains must be positive".into()));
        }
        let i = Matrix6::identity();
        Ok(Self {
            a: -i * a,
            p: i * p,
            q: i * (2.0 * a * p).sqrt(),
            l: i * l,
            c: i * c,
            gamma: Matrix3::from_diagonal(&gamma),
            omega_nn,
        })
    }

    pub fn kyp_residual(&self) -> f64 {
        kyp_residual(&self.a, &self.p, &self.q)
    }

    /// `|| L - P^-1 C^T ||_F`; zero when the gain follows the textbook construction.
    pub fn gain_mismatch(&self) -> f64 {
        match self.p.try_inverse() {
            Some(p_inv) => (self.l - p_inv * self.c.transpose()).norm(),
            None => f64::INFINITY,
        }
    }
}

/// Frobenius norm of `A^T P + P A + Q Q^T`.
pub fn kyp_residual(a: &Matrix6<f64>, p: &Matrix6<f64>, q: &Matrix6<f64>) -> f64 {
    (a.transpose() * p + p * a + q * q.transpose()).norm()
}

pub fn input_matrix(model: &VesselModel) -> InputMatrix {
    let mut r = InputMatrix::zeros();
    r.fixed_view_mut::<3, 3>(3, 0).copy_from(model.mass_inv());
    r
}

pub fn split(x: &Vector6<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (x.fixed_rows::<3>(0).into_owned(), x.fixed_rows::<3>(3).into_owned())
}

pub fn stack(eta: &Vector3<f64>, nu: &Vector3<f64>) -> Vector6<f64> {
    let mut x = Vector6::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(eta);
    x.fixed_rows_mut::<3>(3).copy_from(nu);
    x
}

/// `f(X) X + phi(X)`.
pub fn state_drift(x: &Vector6<f64>, model: &VesselModel) -> Vector6<f64> {
    let (eta, nu) = split(x);
    let pose_rate = rotation_matrix(eta[2]) * nu;
    let accel = -(model.mass_inv() * model.model_forces(&eta, &nu));
    stack(&pose_rate, &accel)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverMode {
    PreAlarm,
    PostAlarm,
}

/// Observer right-hand side.
///
/// `wave_nn` is the compensator output `W_d^T S(Z_ow)`; it is only used in post-alarm mode.
#[allow(clippy::too_many_arguments)]
pub fn observer_rhs(
    x_hat: &Vector6<f64>,
    phi_hat: &Vector3<f64>,
    x_meas: &Vector6<f64>,
    tau_delayed: &Vector3<f64>,
    pi: &Matrix3<f64>,
    wave_nn: &Vector3<f64>,
    mode: ObserverMode,
    gains: &ObserverGains,
    model: &VesselModel,
) -> Vector6<f64> {
    let mut force = tau_delayed + pi * phi_hat;
    if mode == ObserverMode::PostAlarm {
        force += wave_nn;
    }
    state_drift(x_hat, model) + input_matrix(model) * force + gains.l * (gains.c * x_meas - gains.c * x_hat)
}

/// `2 Gamma^T Pi^T R^T P^T X~`.
pub fn wind_coeff_rate(
    x_tilde: &Vector6<f64>,
    pi: &Matrix3<f64>,
    gains: &ObserverGains,
    model: &VesselModel,
) -> Vector3<f64> {
    let r = input_matrix(model);
    (gains.gamma.transpose() * pi.transpose() * r.transpose() * gains.p.transpose() * x_tilde) * 2.0
}

/// Weight rates, one column per force channel: `omega_i (X~^T P R)_i S`.
pub fn observer_nn_rate(
    x_tilde: &Vector6<f64>,
    basis: &DVector<f64>,
    gains: &ObserverGains,
    model: &VesselModel,
) -> DMatrix<f64> {
    let row = x_tilde.transpose() * gains.p * input_matrix(model);
    DMatrix::from_fn(basis.len(), 3, |k, i| gains.omega_nn[i] * row[i] * basis[k])
}

/// Observer network input `[A_o, omega_o, beta_wave, est. x rate, est. y rate, est. heading]`.
pub fn observer_nn_input(wave_params: &Vector3<f64>, x_hat: &Vector6<f64>) -> DVector<f64> {
    let (eta, nu) = split(x_hat);
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

/// Latching monitor on the windowed mean of the estimated drag coefficients.
#[derive(Debug, Clone)]
pub struct AlarmMonitor {
    window: f64,
    threshold: f64,
    history: VecDeque<(f64, Vector3<f64>)>,
    latched_at: Option<f64>,
    latched_mean: Option<Vector3<f64>>,
}

impl AlarmMonitor {
    pub fn new(window: f64, threshold: f64) -> Result<Self> {
        if !(window > 0.0) || !threshold.is_finite() {
            return Err(DpError::Config(format!(
                "alarm window {window} / threshold {threshold} invalid"
            )));
        }
        Ok(Self {
            window,
            threshold,
            history: VecDeque::new(),
            latched_at: None,
            latched_mean: None,
        })
    }

    pub fn is_latched(&self) -> bool {
        self.latched_at.is_some()
    }

    pub fn latched_at(&self) -> Option<f64> {
        self.latched_at
    }

    /// Mean of the window at the latch instant.
    pub fn latched_mean(&self) -> Option<Vector3<f64>> {
        self.latched_mean
    }

    /// Mean over the samples currently in the window.
    pub fn window_mean(&self) -> Option<Vector3<f64>> {
        if self.history.is_empty() {
            return None;
        }
        let sum = self.history.iter().fold(Vector3::zeros(), |acc, (_, v)| acc + v);
        Some(sum / self.history.len() as f64)
    }

    fn spans_window(&self, t: f64) -> bool {
        self.history.front().is_some_and(|(t0, _)| t - t0 >= self.window - 1e-9)
    }
}

/// Record `phi_hat` at time `t` and return the latch state.
pub fn alarm_update(monitor: &mut AlarmMonitor, t: f64, phi_hat: &Vector3<f64>) -> bool {
    monitor.history.push_back((t, *phi_hat));
    while monitor
        .history
        .front()
        .is_some_and(|(t0, _)| *t0 < t - monitor.window - 1e-9)
    {
        monitor.history.pop_front();
    }
    if monitor.latched_at.is_none() && monitor.spans_window(t) {
        if let Some(mean) = monitor.window_mean() {
            if mean.iter().any(|m| *m > monitor.threshold) {
                monitor.latched_at = Some(t);
                monitor.latched_mean = Some(mean);
            }
        }
    }
    monitor.is_latched()
}

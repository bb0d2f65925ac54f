//! Three-degree-of-freedom low-frequency vessel plant.
//!
//! Kinematics and kinetics follow
//!
//! ```text
//! eta_dot = J(psi) nu
//! M nu_dot + C(nu) nu + D(nu) nu + g(eta) = tau_applied + tau_wave + tau_wind + d
//! ```
//!
//! with `eta = [x, y, psi]` in the earth frame and `nu = [u, v, r]` in the body frame.
//! `J(psi)` is the planar rotation in the row layout `[[c, s, 0], [-s, c, 0], [0, 0, 1]]`.

mod delay;
mod integrate;

pub use delay::DelayLine;
pub use integrate::rk4_step;

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};

/// Earth-fixed position and heading. Heading is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.psi)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Surge, sway and yaw rate in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl BodyVelocity {
    pub fn new(u: f64, v: f64, r: f64) -> Self {
        Self { u, v, r }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, self.r)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VesselState {
    pub pose: Pose,
    pub velocity: BodyVelocity,
}

impl VesselState {
    pub fn new(pose: Pose, velocity: BodyVelocity) -> Self {
        Self { pose, velocity }
    }

    pub fn eta(&self) -> Vector3<f64> {
        self.pose.to_vector()
    }

    pub fn nu(&self) -> Vector3<f64> {
        self.velocity.to_vector()
    }

    pub fn is_finite(&self) -> bool {
        self.eta().iter().chain(self.nu().iter()).all(|v| v.is_finite())
    }
}

pub type MatrixMap = Arc<dyn Fn(&Vector3<f64>) -> Matrix3<f64> + Send + Sync>;
pub type VectorMap = Arc<dyn Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync>;

/// Inertia, Coriolis, damping and restoring terms of the plant.
///
/// `M` must be symmetric positive definite; this is checked once at construction so the
/// right-hand side never has to deal with a singular inertia matrix.
#[derive(Clone)]
pub struct VesselModel {
    mass: Matrix3<f64>,
    mass_inv: Matrix3<f64>,
    coriolis: MatrixMap,
    damping: MatrixMap,
    restoring: VectorMap,
}

impl fmt::Debug for VesselModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VesselModel")
            .field("mass", &self.mass)
            .finish_non_exhaustive()
    }
}

impl VesselModel {
    /// Model with rigid-body Coriolis derived from `mass`, no damping and no restoring.
    pub fn new(mass: Matrix3<f64>) -> Result<Self> {
        if !mass.iter().all(|v| v.is_finite()) {
            return Err(DpError::Config("inertia matrix has non-finite entries".into()));
        }
        if (mass - mass.transpose()).abs().max() > 1e-9 * mass.abs().max().max(1.0) {
            return Err(DpError::Config("inertia matrix is not symmetric".into()));
        }
        let chol = mass
            .cholesky()
            .ok_or_else(|| DpError::Config("inertia matrix is not positive definite".into()))?;
        let mass_inv = chol.inverse();
        let m = mass;
        Ok(Self {
            mass,
            mass_inv,
            coriolis: Arc::new(move |nu| rigid_body_coriolis(&m, nu)),
            damping: Arc::new(|_| Matrix3::zeros()),
            restoring: Arc::new(|_| Vector3::zeros()),
        })
    }

    pub fn with_linear_damping(mut self, damping: Matrix3<f64>) -> Self {
        self.damping = Arc::new(move |_| damping);
        self
    }

    pub fn with_damping(mut self, damping: MatrixMap) -> Self {
        self.damping = damping;
        self
    }

    pub fn with_coriolis(mut self, coriolis: MatrixMap) -> Self {
        self.coriolis = coriolis;
        self
    }

    pub fn without_coriolis(self) -> Self {
        self.with_coriolis(Arc::new(|_| Matrix3::zeros()))
    }

    pub fn with_restoring(mut self, restoring: VectorMap) -> Self {
        self.restoring = restoring;
        self
    }

    pub fn mass(&self) -> &Matrix3<f64> {
        &self.mass
    }

    pub fn mass_inv(&self) -> &Matrix3<f64> {
        &self.mass_inv
    }

    pub fn coriolis(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        (self.coriolis)(nu)
    }

    pub fn damping(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        (self.damping)(nu)
    }

    pub fn restoring(&self, eta: &Vector3<f64>) -> Vector3<f64> {
        (self.restoring)(eta)
    }

    /// `C(nu) nu + D(nu) nu + g(eta)`: the model forces the controller cancels.
    pub fn model_forces(&self, eta: &Vector3<f64>, nu: &Vector3<f64>) -> Vector3<f64> {
        self.coriolis(nu) * nu + self.damping(nu) * nu + self.restoring(eta)
    }
}

/// Coriolis-centripetal matrix of a 3-DOF body with inertia `m`, skew-symmetric in `nu`.
pub fn rigid_body_coriolis(m: &Matrix3<f64>, nu: &Vector3<f64>) -> Matrix3<f64> {
    let c13 = -(m[(1, 1)] * nu[1] + m[(1, 2)] * nu[2]);
    let c23 = m[(0, 0)] * nu[0];
    Matrix3::new(0.0, 0.0, c13, 0.0, 0.0, c23, -c13, -c23, 0.0)
}

pub fn rotation_matrix(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Time derivatives of pose and body velocity. `tau_wave` must already carry the onset gate.
pub fn dynamics_rhs(
    state: &VesselState,
    tau_applied: &Vector3<f64>,
    tau_wave: &Vector3<f64>,
    tau_wind: &Vector3<f64>,
    d: &Vector3<f64>,
    model: &VesselModel,
) -> (Vector3<f64>, Vector3<f64>) {
    let eta = state.eta();
    let nu = state.nu();
    let pose_rate = rotation_matrix(eta[2]) * nu;
    let forcing = tau_applied + tau_wave + tau_wind + d - model.model_forces(&eta, &nu);
    (pose_rate, model.mass_inv() * forcing)
}

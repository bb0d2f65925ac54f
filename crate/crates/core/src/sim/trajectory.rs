//! Reference pose following a quarter turn around a rotating FPSO.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

pub const RADIUS: f64 = 17.0;
pub const ANGULAR_RATE: f64 = 0.005;
/// Smallest `|y_d|` used in the heading formula.
const MIN_LATERAL: f64 = 1e-9;
/// Half-width of the heading central difference.
const HEADING_STEP: f64 = 1e-4;

fn moving(elapsed: f64) -> Vector3<f64> {
    let phase = ANGULAR_RATE * elapsed;
    let x = RADIUS * phase.sin();
    let y = -RADIUS * (phase + FRAC_PI_2).sin();
    let psi = FRAC_PI_2 - (x.abs() / y.abs().max(MIN_LATERAL)).atan();
    Vector3::new(x, y, psi)
}

/// Desired pose and its rate at `t`; held at the start pose before `start`.
pub fn desired_trajectory(t: f64, start: f64) -> (Vector3<f64>, Vector3<f64>) {
    let elapsed = t - start;
    if elapsed < 0.0 {
        return (moving(0.0), Vector3::zeros());
    }
    let phase = ANGULAR_RATE * elapsed;
    let dx = RADIUS * ANGULAR_RATE * phase.cos();
    let dy = -RADIUS * ANGULAR_RATE * (phase + FRAC_PI_2).cos();
    let dpsi = (moving(elapsed + HEADING_STEP)[2] - moving(elapsed - HEADING_STEP)[2]) / (2.0 * HEADING_STEP);
    (moving(elapsed), Vector3::new(dx, dy, dpsi))
}

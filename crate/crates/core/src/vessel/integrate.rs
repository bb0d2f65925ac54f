use nalgebra::DVector;

use crate::error::{DpError, Result};

/// One classical fourth-order Runge-Kutta step of `x' = rhs(t, x)`.
///
/// Fails with [`DpError::NonFinite`] if any stage or the result contains NaN or infinity.
pub fn rk4_step<F>(t: f64, x: &DVector<f64>, dt: f64, mut rhs: F) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DpError::Config(format!("integration step must be positive, got {dt}")));
    }
    let half = 0.5 * dt;
    let k1 = rhs(t, x);
    check(&k1, t)?;
    let k2 = rhs(t + half, &(x + &k1 * half));
    check(&k2, t + half)?;
    let k3 = rhs(t + half, &(x + &k2 * half));
    check(&k3, t + half)?;
    let k4 = rhs(t + dt, &(x + &k3 * dt));
    check(&k4, t + dt)?;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    check(&next, t + dt)?;
    Ok(next)
}

fn check(v: &DVector<f64>, t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DpError::NonFinite { t })
    }
}

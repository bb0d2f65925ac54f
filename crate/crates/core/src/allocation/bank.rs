use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3x6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{DpError, Result};

/// Closed interval of unwrapped azimuth angles; infinite ends mean no constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    pub const UNBOUNDED: Self = Self {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn contains(&self, alpha: f64, tol: f64) -> bool {
        alpha >= self.lo - tol && alpha <= self.hi + tol
    }

    pub fn clamp(&self, alpha: f64) -> f64 {
        alpha.clamp(self.lo, self.hi)
    }
}

/// Admissible interval for each constrained thruster: the complement of the zone
/// `alpha_e +- halfwidth`, written as one contiguous interval `[alpha_e + hw, alpha_e + 2 pi - hw]`.
pub fn forbidden_zone_intervals(encounter_angles: &[f64], halfwidth: f64) -> Result<Vec<AngleInterval>> {
    if !(halfwidth >= 0.0) || !halfwidth.is_finite() {
        return Err(DpError::Config(format!(
            "forbidden-zone half-width {halfwidth} invalid"
        )));
    }
    if halfwidth >= PI {
        return Err(DpError::ZoneCoversCircle { halfwidth });
    }
    Ok(encounter_angles
        .iter()
        .map(|&ae| {
            if halfwidth == 0.0 {
                AngleInterval::UNBOUNDED
            } else {
                AngleInterval::new(ae + halfwidth, ae + TAU - halfwidth)
            }
        })
        .collect())
}

/// Wrap into `[0, 2 pi)` for reporting.
pub fn wrap_to_turn(alpha: f64) -> f64 {
    let w = alpha.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Six azimuth thrusters with their geometry, limits and current state.
///
/// The yaw moment of thruster `i` is `(sx_i l_ix cos a_i + sy_i l_iy sin a_i) u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrusterBank {
    pub arm_x: Vector6<f64>,
    pub arm_y: Vector6<f64>,
    pub sign_x: Vector6<f64>,
    pub sign_y: Vector6<f64>,
    pub intervals: [AngleInterval; 6],
    pub u_min: Vector6<f64>,
    pub u_max: Vector6<f64>,
    /// Azimuth rate limit in rad/s.
    pub azimuth_rate: f64,
    pub alpha: Vector6<f64>,
    pub u: Vector6<f64>,
}

/// Sign pattern of the cosine terms in the moment expansion.
pub const SIGN_X: [f64; 6] = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
/// Sign pattern of the sine terms in the moment expansion.
pub const SIGN_Y: [f64; 6] = [1.0, 1.0, -1.0, 1.0, -1.0, -1.0];

impl ThrusterBank {
    pub fn validate(&self) -> Result<()> {
        for i in 0..6 {
            if !(self.u_min[i] <= self.u_max[i]) {
                return Err(DpError::InfeasibleBox {
                    thruster: i + 1,
                    variable: "u",
                    lo: self.u_min[i],
                    hi: self.u_max[i],
                });
            }
            let iv = self.intervals[i];
            if !(iv.lo <= iv.hi) {
                return Err(DpError::InfeasibleBox {
                    thruster: i + 1,
                    variable: "alpha",
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
            if !iv.contains(self.alpha[i], 1e-12) {
                return Err(DpError::Config(format!(
                    "thruster {} angle {} outside [{}, {}]",
                    i + 1,
                    self.alpha[i],
                    iv.lo,
                    iv.hi
                )));
            }
            if self.u[i] < self.u_min[i] - 1e-12 || self.u[i] > self.u_max[i] + 1e-12 {
                return Err(DpError::Config(format!(
                    "thruster {} thrust {} outside limits",
                    i + 1,
                    self.u[i]
                )));
            }
        }
        if !(self.azimuth_rate > 0.0) {
            return Err(DpError::Config("azimuth rate limit must be positive".into()));
        }
        Ok(())
    }

    pub fn moment_coefficient(&self, i: usize, alpha: f64) -> f64 {
        self.sign_x[i] * self.arm_x[i] * alpha.cos() + self.sign_y[i] * self.arm_y[i] * alpha.sin()
    }

    fn moment_coefficient_rate(&self, i: usize, alpha: f64) -> f64 {
        -self.sign_x[i] * self.arm_x[i] * alpha.sin() + self.sign_y[i] * self.arm_y[i] * alpha.cos()
    }

    /// `T(alpha)`.
    pub fn configuration_matrix(&self, alpha: &Vector6<f64>) -> Matrix3x6<f64> {
        Matrix3x6::from_fn(|r, i| match r {
            0 => alpha[i].cos(),
            1 => alpha[i].sin(),
            _ => self.moment_coefficient(i, alpha[i]),
        })
    }
}

/// `T(alpha) u = [F_x, F_y, M_z]`.
pub fn configuration_map(alpha: &Vector6<f64>, u: &Vector6<f64>, bank: &ThrusterBank) -> Vector3<f64> {
    bank.configuration_matrix(alpha) * u
}

/// `d/d alpha (T(alpha) u)`.
pub fn configuration_jacobian(alpha: &Vector6<f64>, u: &Vector6<f64>, bank: &ThrusterBank) -> Matrix3x6<f64> {
    Matrix3x6::from_fn(|r, i| {
        u[i] * match r {
            0 => -alpha[i].sin(),
            1 => alpha[i].cos(),
            _ => bank.moment_coefficient_rate(i, alpha[i]),
        }
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn sample_bank() -> ThrusterBank {
        let deg = PI / 180.0;
        let zones = forbidden_zone_intervals(
            &[190.9086 * deg, 191.5165 * deg, 10.8194 * deg, 11.5165 * deg],
            10.0 * deg,
        )
        .unwrap();
        ThrusterBank {
            arm_x: Vector6::repeat(0.08),
            arm_y: Vector6::new(0.45, 0.45, 0.05, 0.05, 0.45, 0.45),
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
            u_min: Vector6::repeat(-0.7),
            u_max: Vector6::repeat(0.7),
            azimuth_rate: PI / 20.0 / 0.167,
            alpha: Vector6::new(
                FRAC_PI_2,
                5.0 * FRAC_PI_2,
                5.0 * FRAC_PI_2,
                FRAC_PI_2,
                FRAC_PI_2,
                FRAC_PI_2,
            ),
            u: Vector6::repeat(0.0308),
        }
    }

    #[test]
    fn map_all_forward() {
        let b = sample_bank();
        let tau = configuration_map(&Vector6::zeros(), &Vector6::repeat(1.0), &b);
        assert_relative_eq!(tau[0], 6.0);
        assert_relative_eq!(tau[1], 0.0);
    }

    #[test]
    fn map_initial_condition() {
        let b = sample_bank();
        let tau = configuration_map(&b.alpha, &b.u, &b);
        assert!(tau[0].abs() < 1e-15);
        assert_relative_eq!(tau[1], 6.0 * 0.0308, epsilon = 1e-15);
        // sine-term signs sum to +1 +1 -1 +1 -1 -1 weighted by l_y
        let mz: f64 = (0..6).map(|i| SIGN_Y[i] * b.arm_y[i] * 0.0308).sum();
        assert_relative_eq!(tau[2], mz, epsilon = 1e-15);
    }

    #[test]
    fn map_single_thruster() {
        let b = sample_bank();
        let mut u = Vector6::zeros();
        u[0] = 1.0;
        let tau = configuration_map(&Vector6::repeat(FRAC_PI_2), &u, &b);
        assert_relative_eq!(tau, Vector3::new(0.0, 1.0, b.arm_y[0]), epsilon = 1e-15);
    }

    #[test]
    fn jacobian_values() {
        let b = sample_bank();
        assert_eq!(
            configuration_jacobian(&b.alpha, &Vector6::zeros(), &b),
            Matrix3x6::zeros()
        );
        let u = Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6);
        let j = configuration_jacobian(&Vector6::zeros(), &u, &b);
        for i in 0..6 {
            assert_eq!(j[(0, i)], 0.0);
            assert_eq!(j[(1, i)], u[i]);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let b = sample_bank();
        let h = 1e-6;
        for k in 0..10 {
            let alpha = Vector6::from_fn(|i, _| ((k * 6 + i) as f64 * 1.37).sin() * 4.0);
            let u = Vector6::from_fn(|i, _| ((k * 6 + i) as f64 * 0.71).cos() * 0.7);
            let j = configuration_jacobian(&alpha, &u, &b);
            for i in 0..6 {
                let mut ap = alpha;
                let mut am = alpha;
                ap[i] += h;
                am[i] -= h;
                let fd = (configuration_map(&ap, &u, &b) - configuration_map(&am, &u, &b)) / (2.0 * h);
                let col = j.column(i);
                assert!((fd - col).norm() <= 1e-6 * col.norm().max(1.0));
            }
        }
    }

    #[test]
    fn zone_intervals() {
        let deg = PI / 180.0;
        let z = forbidden_zone_intervals(&[190.9086 * deg], 10.0 * deg).unwrap();
        assert_relative_eq!(z[0].lo / deg, 200.9086, epsilon = 1e-9);
        assert_relative_eq!(z[0].hi / deg, 540.9086, epsilon = 1e-9);
        assert!(forbidden_zone_intervals(&[0.3], 0.0).unwrap()[0].is_unbounded());
        assert!(matches!(
            forbidden_zone_intervals(&[0.3], PI),
            Err(DpError::ZoneCoversCircle { .. })
        ));
    }

    #[test]
    fn initial_bank_is_valid() {
        sample_bank().validate().unwrap();
        let mut b = sample_bank();
        b.alpha[3] = 0.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn wrapping() {
        assert_relative_eq!(wrap_to_turn(5.0 * FRAC_PI_2), FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(wrap_to_turn(-FRAC_PI_2), 3.0 * FRAC_PI_2, epsilon = 1e-15);
    }
}

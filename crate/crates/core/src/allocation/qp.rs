use nalgebra::{SMatrix, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::bank::{configuration_jacobian, ThrusterBank};
use crate::error::{DpError, Result};

pub const N_PRIMAL: usize = 15;
pub const N_Z: usize = 18;

pub type PrimalVector = SVector<f64, N_PRIMAL>;
pub type ZVector = SVector<f64, N_Z>;
pub type ConstraintMatrix = SMatrix<f64, 3, N_PRIMAL>;

/// Diagonal weights of the allocation cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationWeights {
    pub q: [f64; 6],
    pub p: [f64; 6],
    pub r: [f64; 3],
}

impl AllocationWeights {
    pub fn uniform(q: f64, p: f64, r: f64) -> Self {
        Self {
            q: [q; 6],
            p: [p; 6],
            r: [r; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .q
            .iter()
            .chain(&self.p)
            .chain(&self.r)
            .any(|w| !(*w > 0.0) || !w.is_finite())
        {
            return Err(DpError::Config("allocation weights must be positive".into()));
        }
        Ok(())
    }
}

/// Local convex QP in `U = [du; dalpha; o]`:
/// minimize `1/2 U^T K U + W^T U` subject to `M U = Y`, `lo <= U <= hi`, with `K` diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub k: PrimalVector,
    pub w: PrimalVector,
    pub m: ConstraintMatrix,
    pub y: Vector3<f64>,
    pub lo: PrimalVector,
    pub hi: PrimalVector,
}

impl AllocationProblem {
    pub fn cost(&self, u: &PrimalVector) -> f64 {
        0.5 * u.dot(&self.k.component_mul(u)) + self.w.dot(u)
    }

    pub fn equality_residual(&self, u: &PrimalVector) -> Vector3<f64> {
        self.m * u - self.y
    }

    pub fn delta_u(u: &PrimalVector) -> Vector6<f64> {
        u.fixed_rows::<6>(0).into_owned()
    }

    pub fn delta_alpha(u: &PrimalVector) -> Vector6<f64> {
        u.fixed_rows::<6>(6).into_owned()
    }

    pub fn slack(u: &PrimalVector) -> Vector3<f64> {
        u.fixed_rows::<3>(12).into_owned()
    }
}

/// Linearize `T(alpha) u = tau + o` at the bank's current state.
///
/// `slack_bound` limits `|o_i|`; the per-cycle azimuth change is `azimuth_rate * dt_opt`,
/// merged with the distance to the admissible-interval ends.
pub fn assemble_local_qp(
    tau_cmd: &Vector3<f64>,
    bank: &ThrusterBank,
    weights: &AllocationWeights,
    dt_opt: f64,
    slack_bound: f64,
) -> Result<AllocationProblem> {
    if !(dt_opt > 0.0) || !(slack_bound >= 0.0) {
        return Err(DpError::Config(format!(
            "dt_opt {dt_opt} / slack bound {slack_bound} invalid"
        )));
    }
    let (alpha0, u0) = (bank.alpha, bank.u);
    let t0 = bank.configuration_matrix(&alpha0);
    let mut m = ConstraintMatrix::zeros();
    m.fixed_view_mut::<3, 6>(0, 0).copy_from(&t0);
    m.fixed_view_mut::<3, 6>(0, 6)
        .copy_from(&configuration_jacobian(&alpha0, &u0, bank));
    m.fixed_view_mut::<3, 3>(0, 12)
        .copy_from(&(-nalgebra::Matrix3::identity()));

    let mut k = PrimalVector::zeros();
    let mut w = PrimalVector::zeros();
    let mut lo = PrimalVector::zeros();
    let mut hi = PrimalVector::zeros();
    let step = bank.azimuth_rate * dt_opt;
    for i in 0..6 {
        k[i] = 2.0 * weights.q[i];
        k[6 + i] = 2.0 * weights.p[i];
        w[i] = 2.0 * weights.q[i] * u0[i];
        lo[i] = bank.u_min[i] - u0[i];
        hi[i] = bank.u_max[i] - u0[i];
        let iv = bank.intervals[i];
        lo[6 + i] = (iv.lo - alpha0[i]).max(-step);
        hi[6 + i] = (iv.hi - alpha0[i]).min(step);
        if !(lo[i] <= hi[i]) {
            return Err(DpError::InfeasibleBox {
                thruster: i + 1,
                variable: "du",
                lo: lo[i],
                hi: hi[i],
            });
        }
        if !(lo[6 + i] <= hi[6 + i]) {
            return Err(DpError::InfeasibleBox {
                thruster: i + 1,
                variable: "dalpha",
                lo: lo[6 + i],
                hi: hi[6 + i],
            });
        }
    }
    for j in 0..3 {
        k[12 + j] = 2.0 * weights.r[j];
        lo[12 + j] = -slack_bound;
        hi[12 + j] = slack_bound;
    }
    Ok(AllocationProblem {
        k,
        w,
        m,
        y: tau_cmd - t0 * u0,
        lo,
        hi,
    })
}

/// Componentwise clamp onto `[lo, hi]`.
pub fn project<const N: usize>(b: &SVector<f64, N>, lo: &SVector<f64, N>, hi: &SVector<f64, N>) -> SVector<f64, N> {
    SVector::<f64, N>::from_fn(|i, _| b[i].clamp(lo[i], hi[i]))
}

#[cfg(test)]
mod tests {
    use super::super::bank::{configuration_map, tests::sample_bank};
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn nominal_weights() -> AllocationWeights {
        AllocationWeights::uniform(0.2, 0.2, 10.0)
    }

    #[test]
    fn no_change_needed() {
        let b = sample_bank();
        let tau = configuration_map(&b.alpha, &b.u, &b);
        let p = assemble_local_qp(&tau, &b, &nominal_weights(), 0.167, 0.02).unwrap();
        assert_eq!(p.y, Vector3::zeros());
    }

    #[test]
    fn nominal_box_vectors() {
        let b = sample_bank();
        let p = assemble_local_qp(&Vector3::zeros(), &b, &nominal_weights(), 0.167, 0.02).unwrap();
        for i in 0..6 {
            assert!((p.lo[i] - (-0.7 - 0.0308)).abs() < 1e-15);
            assert!((p.hi[i] - (0.7 - 0.0308)).abs() < 1e-15);
            assert!((p.lo[6 + i] + PI / 20.0).abs() < 1e-12);
            assert!((p.hi[6 + i] - PI / 20.0).abs() < 1e-12);
            assert_eq!(p.k[i], 0.4);
            assert_eq!(p.w[i], 0.4 * 0.0308);
        }
        for j in 12..15 {
            assert_eq!((p.lo[j], p.hi[j], p.k[j]), (-0.02, 0.02, 20.0));
        }
    }

    #[test]
    fn thrust_at_limit_closes_upper_bound() {
        let mut b = sample_bank();
        b.u[2] = 0.7;
        let p = assemble_local_qp(&Vector3::zeros(), &b, &nominal_weights(), 0.167, 0.02).unwrap();
        assert_eq!(p.hi[2], 0.0);
    }

    #[test]
    fn angle_limit_merges_with_rate() {
        let mut b = sample_bank();
        b.alpha[3] = b.intervals[3].lo + 0.01;
        let p = assemble_local_qp(&Vector3::zeros(), &b, &nominal_weights(), 0.167, 0.02).unwrap();
        assert!((p.lo[9] + 0.01).abs() < 1e-12);
        assert!((p.hi[9] - PI / 20.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_box_names_thruster() {
        let mut b = sample_bank();
        b.alpha[4] = b.intervals[4].hi + 0.5;
        let err = assemble_local_qp(&Vector3::zeros(), &b, &nominal_weights(), 0.167, 0.02).unwrap_err();
        assert!(matches!(err, DpError::InfeasibleBox { thruster: 5, .. }));
    }

    #[test]
    fn projection_cases() {
        let lo = SVector::<f64, 3>::new(0.0, 0.0, 0.0);
        let hi = SVector::<f64, 3>::new(1.0, 1.0, 1.0);
        let inside = SVector::<f64, 3>::new(0.2, 0.5, 0.9);
        assert_eq!(project(&inside, &lo, &hi), inside);
        assert_eq!(
            project(&SVector::<f64, 3>::new(-1.0, 2.0, 0.5), &lo, &hi),
            SVector::<f64, 3>::new(0.0, 1.0, 0.5)
        );
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(b in proptest::array::uniform18(-5.0..5.0f64), w in proptest::array::uniform18(0.0..3.0f64)) {
            let b = ZVector::from(b);
            let lo = ZVector::from_fn(|i, _| -w[i]);
            let hi = ZVector::from_fn(|i, _| w[i] * 0.5);
            let once = project(&b, &lo, &hi);
            prop_assert_eq!(project(&once, &lo, &hi), once);
        }
    }
}

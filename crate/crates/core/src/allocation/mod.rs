//! Dynamic thrust allocation for six azimuth thrusters.
//!
//! Each cycle linearizes `T(alpha) u = tau + o` around the current thruster state, builds a
//! box-constrained QP in `[du; dalpha; o]` and solves it with the projection dynamics of
//! [`pdnn`]. The solution is warm-started from the previous cycle.

mod bank;
pub mod oracle;
mod pdnn;
mod qp;

pub use bank::{
    configuration_jacobian, configuration_map, forbidden_zone_intervals, wrap_to_turn, AngleInterval, ThrusterBank,
    SIGN_X, SIGN_Y,
};
pub use pdnn::{pdnn_step, solve_pdnn, LviSystem, PdnnSettings, SolveReport, SolverState, Termination, ZMatrix};
pub use qp::{
    assemble_local_qp, project, AllocationProblem, AllocationWeights, ConstraintMatrix, PrimalVector, ZVector,
    N_PRIMAL, N_Z,
};

use nalgebra::{Vector3, Vector6};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub tau_cmd: Vector3<f64>,
    /// `T(alpha_new) u_new`.
    pub achieved: Vector3<f64>,
    pub u: Vector6<f64>,
    /// Unwrapped azimuth angles.
    pub alpha: Vector6<f64>,
    pub delta_alpha: Vector6<f64>,
    pub slack: Vector3<f64>,
    pub iterations: usize,
    pub cost: f64,
    pub termination: Termination,
}

/// Solve one assembled problem and apply the step to the bank's state.
pub fn solve_allocation(
    problem: &AllocationProblem,
    bank: &ThrusterBank,
    warm_start: &ZVector,
    settings: &PdnnSettings,
) -> (AllocationOutcome, ZVector) {
    let report = solve_pdnn(problem, warm_start, settings);
    let du = AllocationProblem::delta_u(&report.primal);
    let da = AllocationProblem::delta_alpha(&report.primal);
    let u = Vector6::from_fn(|i, _| (bank.u[i] + du[i]).clamp(bank.u_min[i], bank.u_max[i]));
    let alpha = Vector6::from_fn(|i, _| bank.intervals[i].clamp(bank.alpha[i] + da[i]));
    let outcome = AllocationOutcome {
        tau_cmd: problem.y + bank.configuration_matrix(&bank.alpha) * bank.u,
        achieved: configuration_map(&alpha, &u, bank),
        u,
        alpha,
        delta_alpha: alpha - bank.alpha,
        slack: AllocationProblem::slack(&report.primal),
        iterations: report.iterations,
        cost: report.cost,
        termination: report.termination,
    };
    (outcome, report.z)
}

/// Stateful allocator: owns the thruster bank and the solver warm start.
#[derive(Debug, Clone)]
pub struct Allocator {
    pub bank: ThrusterBank,
    pub weights: AllocationWeights,
    pub settings: PdnnSettings,
    pub dt_opt: f64,
    pub slack_bound: f64,
    warm: ZVector,
}

impl Allocator {
    pub fn new(
        bank: ThrusterBank,
        weights: AllocationWeights,
        settings: PdnnSettings,
        dt_opt: f64,
        slack_bound: f64,
    ) -> Result<Self> {
        bank.validate()?;
        weights.validate()?;
        Ok(Self {
            bank,
            weights,
            settings,
            dt_opt,
            slack_bound,
            warm: ZVector::zeros(),
        })
    }

    pub fn achieved(&self) -> Vector3<f64> {
        configuration_map(&self.bank.alpha, &self.bank.u, &self.bank)
    }

    pub fn allocate(&mut self, tau_cmd: &Vector3<f64>) -> Result<AllocationOutcome> {
        let problem = assemble_local_qp(tau_cmd, &self.bank, &self.weights, self.dt_opt, self.slack_bound)?;
        let (outcome, z) = solve_allocation(&problem, &self.bank, &self.warm, &self.settings);
        self.warm = z;
        self.bank.u = outcome.u;
        self.bank.alpha = outcome.alpha;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::bank::tests::sample_bank;
    use super::oracle::{random_feasible_problem, solve_oracle};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn weights() -> AllocationWeights {
        AllocationWeights::uniform(0.2, 0.2, 10.0)
    }

    #[test]
    fn holding_current_force_needs_no_change() {
        let b = sample_bank();
        let tau = configuration_map(&b.alpha, &b.u, &b);
        let p = assemble_local_qp(&tau, &b, &weights(), 0.167, 0.02).unwrap();
        let oracle = solve_oracle(&p).unwrap();
        let (out, _) = solve_allocation(&p, &b, &ZVector::zeros(), &PdnnSettings::default());
        let expected = oracle.primal;
        assert!((AllocationProblem::delta_u(&expected) - (out.u - b.u)).abs().max() < 1e-4);
        assert!(
            (AllocationProblem::delta_alpha(&expected) - out.delta_alpha)
                .abs()
                .max()
                < 1e-4
        );
        assert!((AllocationProblem::slack(&expected) - out.slack).abs().max() < 1e-4);
    }

    #[test]
    fn matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let settings = PdnnSettings::default();
        for _ in 0..20 {
            let (bank, p) = random_feasible_problem(&mut rng, &sample_bank(), &weights(), 0.167, 0.02).unwrap();
            let o = solve_oracle(&p).unwrap();
            let r = solve_pdnn(&p, &ZVector::zeros(), &settings);
            assert_eq!(r.termination, Termination::Converged);
            assert!((r.primal - o.primal).abs().max() < 1e-4);
            assert!(r.cost <= o.cost + 1e-6);
            let _ = bank;
        }
    }

    #[test]
    fn allocator_respects_bounds_under_large_demand() {
        let mut a = Allocator::new(sample_bank(), weights(), PdnnSettings::default(), 0.167, 0.02).unwrap();
        for k in 0..30 {
            let tau = Vector3::new(1.5 * (k as f64 * 0.3).cos(), -1.0, 0.3);
            let before = a.bank.alpha;
            let out = a.allocate(&tau).unwrap();
            assert!(out.u.abs().max() <= 0.7);
            assert!(out.slack.abs().max() <= 0.02);
            assert!((out.alpha - before).abs().max() <= PI / 20.0 + 1e-12);
            for i in 0..6 {
                assert!(a.bank.intervals[i].contains(out.alpha[i], 0.0));
            }
        }
    }
}

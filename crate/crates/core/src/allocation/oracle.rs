//! Reference solver for the local allocation QP.
//!
//! `K` is diagonal, so for fixed multipliers `lambda` of `M U = Y` the box-constrained
//! Lagrangian minimizer is a componentwise clamp. The concave dual in three variables is
//! maximized by a damped semismooth Newton method, which terminates on the exact active set.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use super::bank::{configuration_map, ThrusterBank};
use super::qp::{assemble_local_qp, project, AllocationProblem, AllocationWeights, PrimalVector};
use crate::error::{DpError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub primal: PrimalVector,
    pub lambda: Vector3<f64>,
    pub cost: f64,
    pub iterations: usize,
}

fn primal_of(problem: &AllocationProblem, lambda: &Vector3<f64>) -> PrimalVector {
    let unconstrained = (problem.m.transpose() * lambda - problem.w).component_div(&problem.k);
    project(&unconstrained, &problem.lo, &problem.hi)
}

fn dual_value(problem: &AllocationProblem, lambda: &Vector3<f64>, u: &PrimalVector) -> f64 {
    problem.cost(u) + lambda.dot(&(problem.y - problem.m * u))
}

pub fn solve_oracle(problem: &AllocationProblem) -> Result<OracleSolution> {
    let tol = 1e-14 * (1.0 + problem.y.abs().max());
    let mut lambda = Vector3::zeros();
    let mut u = primal_of(problem, &lambda);
    let mut g = dual_value(problem, &lambda, &u);
    for it in 0..500 {
        let grad = problem.y - problem.m * u;
        if grad.abs().max() <= tol {
            return Ok(OracleSolution {
                primal: u,
                lambda,
                cost: problem.cost(&u),
                iterations: it,
            });
        }
        let mut h = Matrix3::zeros();
        for i in 0..u.len() {
            if u[i] > problem.lo[i] && u[i] < problem.hi[i] {
                let col = problem.m.column(i);
                h += col * col.transpose() / problem.k[i];
            }
        }
        let mu = 1e-12 * (1.0 + h.abs().max()) + 1e-3 * grad.norm().min(1.0);
        let dir = (h + Matrix3::identity() * mu)
            .cholesky()
            .map(|c| c.solve(&grad))
            .unwrap_or(grad);
        let slope = grad.dot(&dir);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = lambda + dir * t;
            let cu = primal_of(problem, &cand);
            let cg = dual_value(problem, &cand, &cu);
            let shrinks = (problem.y - problem.m * cu).norm() < 0.5 * grad.norm();
            if cg >= g + 1e-4 * t * slope || shrinks {
                lambda = cand;
                u = cu;
                g = cg;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = (problem.y - problem.m * u).abs().max();
    if residual <= 1e-10 {
        return Ok(OracleSolution {
            primal: u,
            lambda,
            cost: problem.cost(&u),
            iterations: 500,
        });
    }
    Err(DpError::SolverDivergence {
        norm: residual,
        iterations: 500,
    })
}

/// Largest violation among equality, box and projected stationarity conditions.
pub fn kkt_residual(problem: &AllocationProblem, u: &PrimalVector, lambda: &Vector3<f64>) -> f64 {
    let eq = (problem.m * u - problem.y).abs().max();
    let boxv = (0..u.len())
        .map(|i| (problem.lo[i] - u[i]).max(u[i] - problem.hi[i]).max(0.0))
        .fold(0.0, f64::max);
    let grad = problem.k.component_mul(u) + problem.w - problem.m.transpose() * lambda;
    let stat = (u - project(&(u - grad), &problem.lo, &problem.hi)).abs().max();
    eq.max(boxv).max(stat)
}

/// Random local QP with a known feasible point.
///
/// The thruster state is drawn inside the admissible set of `template`, a target `U` inside the
/// resulting box, and the command is chosen so that `M U = Y` holds for that target.
pub fn random_feasible_problem<R: Rng + ?Sized>(
    rng: &mut R,
    template: &ThrusterBank,
    weights: &AllocationWeights,
    dt_opt: f64,
    slack_bound: f64,
) -> Result<(ThrusterBank, AllocationProblem)> {
    let mut bank = template.clone();
    for i in 0..6 {
        let iv = bank.intervals[i];
        bank.alpha[i] = if iv.is_unbounded() {
            rng.random_range(0.0..std::f64::consts::TAU)
        } else {
            rng.random_range(iv.lo..=iv.hi)
        };
        bank.u[i] = rng.random_range(0.8 * bank.u_min[i]..=0.8 * bank.u_max[i]);
    }
    let base = assemble_local_qp(&Vector3::zeros(), &bank, weights, dt_opt, slack_bound)?;
    let target = PrimalVector::from_fn(|i, _| {
        let (lo, hi) = (base.lo[i], base.hi[i]);
        lo + (hi - lo) * rng.random_range(0.05..0.95)
    });
    let tau = configuration_map(&bank.alpha, &bank.u, &bank) + base.m * target;
    let problem = assemble_local_qp(&tau, &bank, weights, dt_opt, slack_bound)?;
    Ok((bank, problem))
}

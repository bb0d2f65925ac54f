use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use super::qp::{project, AllocationProblem, PrimalVector, ZVector, N_PRIMAL, N_Z};
use crate::error::{DpError, Result};

pub type ZMatrix = SMatrix<f64, N_Z, N_Z>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdnnSettings {
    /// Scalar solver gain `Gamma_Z`.
    pub gamma_z: f64,
    /// Dual bound standing in for infinity.
    pub v_bar: f64,
    pub max_iter: usize,
    /// Number of recent cost values the variance rule looks at.
    pub window: usize,
    pub var_tol: f64,
    /// How often (in iterations) the variance rule is evaluated.
    pub check_every: usize,
    /// The net Euler step `h Gamma_Z` is `step_factor / ||(I + E^T) E||_2`.
    pub step_factor: f64,
    pub divergence_norm: f64,
}

impl Default for PdnnSettings {
    fn default() -> Self {
        Self {
            gamma_z: 0.1,
            v_bar: 1e6,
            max_iter: 100_000,
            window: 1000,
            var_tol: 1e-12,
            check_every: 50,
            step_factor: 1.6,
            divergence_norm: 1e6,
        }
    }
}

/// Projection system `Z' = Gamma_Z (I + E^T) (G(Z - (E Z + S)) - Z)` for one problem.
///
/// The primal objective is divided by `scale` before building `E` and `S`; this leaves the
/// minimizer unchanged and balances the primal and dual blocks.
#[derive(Debug, Clone)]
pub struct LviSystem {
    pub e: ZMatrix,
    pub s: ZVector,
    pub a: ZMatrix,
    pub lo: ZVector,
    pub hi: ZVector,
    pub scale: f64,
}

impl LviSystem {
    pub fn new(problem: &AllocationProblem, v_bar: f64) -> Self {
        let scale = problem.k.max() / 4.0;
        let mut e = ZMatrix::zeros();
        for i in 0..N_PRIMAL {
            e[(i, i)] = problem.k[i] / scale;
        }
        e.fixed_view_mut::<N_PRIMAL, 3>(0, N_PRIMAL)
            .copy_from(&(-problem.m.transpose()));
        e.fixed_view_mut::<3, N_PRIMAL>(N_PRIMAL, 0).copy_from(&problem.m);
        let mut s = ZVector::zeros();
        s.fixed_rows_mut::<N_PRIMAL>(0).copy_from(&(problem.w / scale));
        s.fixed_rows_mut::<3>(N_PRIMAL).copy_from(&(-problem.y));
        let mut lo = ZVector::repeat(-v_bar);
        let mut hi = ZVector::repeat(v_bar);
        lo.fixed_rows_mut::<N_PRIMAL>(0).copy_from(&problem.lo);
        hi.fixed_rows_mut::<N_PRIMAL>(0).copy_from(&problem.hi);
        let a = ZMatrix::identity() + e.transpose();
        Self { e, s, a, lo, hi, scale }
    }

    /// Net Euler step `h Gamma_Z` below the stability limit of the linear regime.
    pub fn natural_step(&self, factor: f64) -> f64 {
        let b = self.a * self.e;
        factor / b.singular_values().max()
    }

    /// `G(Z - (E Z + S)) - Z`; zero exactly at an LVI solution.
    pub fn residual(&self, z: &ZVector) -> ZVector {
        project(&(z - (self.e * z + self.s)), &self.lo, &self.hi) - z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: ZVector,
    pub iterations: usize,
}

impl SolverState {
    pub fn new(z: ZVector) -> Self {
        Self { z, iterations: 0 }
    }

    pub fn primal(&self) -> PrimalVector {
        self.z.fixed_rows::<N_PRIMAL>(0).into_owned()
    }
}

/// One forward-Euler step of the projection dynamics with solver gain `gamma_z` and step `h`.
pub fn pdnn_step(
    state: &SolverState,
    sys: &LviSystem,
    gamma_z: f64,
    h: f64,
    divergence_norm: f64,
) -> Result<SolverState> {
    let z = state.z + sys.a * sys.residual(&state.z) * (h * gamma_z);
    let norm = z.norm();
    if !(norm <= divergence_norm) {
        return Err(DpError::SolverDivergence {
            norm,
            iterations: state.iterations + 1,
        });
    }
    Ok(SolverState {
        z,
        iterations: state.iterations + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Cost variance over the window dropped below the tolerance.
    Converged,
    /// Iteration cap reached; the best available iterate is returned.
    Unconverged,
    /// The iterate left the divergence ball even after step halving.
    Diverged,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Unconverged => "unconverged",
            Termination::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Primal solution projected onto its box.
    pub primal: PrimalVector,
    /// Final primal-dual vector, reusable as a warm start.
    pub z: ZVector,
    pub iterations: usize,
    pub cost: f64,
    pub variance: f64,
    pub termination: Termination,
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Iterate the projection dynamics from `z0` until the cost-variance rule fires.
pub fn solve_pdnn(problem: &AllocationProblem, z0: &ZVector, settings: &PdnnSettings) -> SolveReport {
    let sys = LviSystem::new(problem, settings.v_bar);
    let z0 = project(z0, &sys.lo, &sys.hi);
    let mut h = sys.natural_step(settings.step_factor) / settings.gamma_z;
    let mut total = 0;
    let mut last = z0;
    for _ in 0..4 {
        match run_fixed_step(problem, &sys, &z0, h, settings) {
            Ok(mut report) => {
                report.iterations += total;
                return report;
            }
            Err(diverged) => {
                total += diverged.iterations;
                last = diverged.z;
                h *= 0.5;
            }
        }
    }
    let primal = project(&last.fixed_rows::<N_PRIMAL>(0).into_owned(), &problem.lo, &problem.hi);
    SolveReport {
        primal,
        z: project(&last, &sys.lo, &sys.hi),
        iterations: total,
        cost: problem.cost(&primal),
        variance: f64::INFINITY,
        termination: Termination::Diverged,
    }
}

/// Last iterate before the divergence guard tripped.
struct Divergence {
    iterations: usize,
    z: ZVector,
}

fn run_fixed_step(
    problem: &AllocationProblem,
    sys: &LviSystem,
    z0: &ZVector,
    h: f64,
    settings: &PdnnSettings,
) -> std::result::Result<SolveReport, Box<Divergence>> {
    let window = settings.window.max(2);
    let mut ring = vec![0.0; window];
    let mut state = SolverState::new(*z0);
    let mut last_var = f64::INFINITY;
    let mut termination = Termination::Unconverged;
    while state.iterations < settings.max_iter {
        let next = match pdnn_step(&state, sys, settings.gamma_z, h, settings.divergence_norm) {
            Ok(next) => next,
            Err(_) => {
                return Err(Box::new(Divergence {
                    iterations: state.iterations,
                    z: state.z,
                }))
            }
        };
        state = next;
        let k = state.iterations;
        ring[(k - 1) % window] = problem.cost(&state.primal());
        if k >= window && k.is_multiple_of(settings.check_every) {
            last_var = variance(&ring);
            if last_var < settings.var_tol {
                termination = Termination::Converged;
                break;
            }
        }
    }
    let primal = project(&state.primal(), &problem.lo, &problem.hi);
    Ok(SolveReport {
        primal,
        z: state.z,
        iterations: state.iterations,
        cost: problem.cost(&primal),
        variance: last_var,
        termination,
    })
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dp_helm::allocation::oracle::{random_feasible_problem, solve_oracle};
use dp_helm::allocation::{solve_pdnn, Termination, ZVector};
use dp_helm::sim::{run_scenario, Scenario};
use dp_helm::Result;

#[derive(Parser)]
#[command(name = "dp-helm", version, about = "Dynamic-positioning closed-loop simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write CSV logs, a summary and the effective config.
    Run {
        /// Scenario file; the bundled default is used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Cross-check the allocation solver against the reference QP solver.
    VerifyQp {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Report observer and controller gain consistency.
    CheckGains {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(config: Option<PathBuf>) -> Result<Scenario> {
    match config {
        Some(path) => Scenario::load(&path),
        None => Ok(Scenario::bundled()),
    }
}

fn run(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>, duration: Option<f64>) -> Result<bool> {
    let mut sc = load(config)?;
    if let Some(seed) = seed {
        sc.run.seed = seed;
    }
    if let Some(duration) = duration {
        sc.run.duration = duration;
    }
    sc.validate()?;
    let output = run_scenario(&sc, Some(&out))?;
    let s = &output.summary;
    println!("completed {} steps in {:.2} s", s.steps, output.elapsed);
    match s.alarm_time {
        Some(t) => println!("alarm latched at {t} s"),
        None => println!("alarm not latched"),
    }
    println!(
        "max |z1| = [{:.4}, {:.4}, {:.4}]",
        s.max_abs_z1[0], s.max_abs_z1[1], s.max_abs_z1[2]
    );
    println!(
        "allocation cycles {}, bound violations {}, unconverged {}, diverged {}",
        s.allocation_cycles, s.allocation_bound_violations, s.unconverged_cycles, s.diverged_cycles
    );
    println!("logs written to {}", out.display());
    Ok(s.allocation_bound_violations == 0)
}

fn verify_qp(instances: usize, seed: u64, config: Option<PathBuf>) -> Result<bool> {
    let sc = load(config)?;
    let template = sc.thruster_bank()?;
    let weights = sc.allocation_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut max_primal, mut max_cost, mut converged) = (0.0f64, f64::NEG_INFINITY, 0);
    let mut iterations = Vec::with_capacity(instances);
    for _ in 0..instances {
        let (_, problem) =
            random_feasible_problem(&mut rng, &template, &weights, sc.run.dt_opt, sc.allocation.slack_bound)?;
        let oracle = solve_oracle(&problem)?;
        let report = solve_pdnn(&problem, &ZVector::zeros(), &sc.allocation.solver);
        max_primal = max_primal.max((report.primal - oracle.primal).abs().max());
        max_cost = max_cost.max(report.cost - oracle.cost);
        converged += usize::from(report.termination == Termination::Converged);
        iterations.push(report.iterations);
    }
    iterations.sort_unstable();
    let median = iterations.get(instances / 2).copied().unwrap_or(0);
    println!("instances {instances}, converged {converged}");
    println!("max primal deviation {max_primal:e}");
    println!("max cost excess {max_cost:e}");
    println!("median iterations {median}");
    Ok(converged == instances && max_primal <= 1e-4 && max_cost <= 1e-6)
}

fn check_gains(config: Option<PathBuf>) -> Result<bool> {
    let sc = load(config)?;
    let obs = sc.observer_gains()?;
    let ctl = sc.controller_gains();
    ctl.validate()?;
    let kyp = obs.kyp_residual();
    println!("KYP residual ||A^T P + P A + Q Q^T||_F = {kyp:e}");
    println!("||L - P^-1 C^T||_F = {:e}", obs.gain_mismatch());
    let hurwitz = obs.a.symmetric_eigenvalues().max();
    println!("largest eigenvalue of A = {hurwitz}");
    for (name, m) in [
        ("K1", ctl.k1),
        ("K2", ctl.k2),
        ("Gamma1", ctl.gamma1),
        ("Theta", ctl.theta),
    ] {
        println!("min eigenvalue of {name} = {:e}", m.symmetric_eigenvalues().min());
    }
    println!("N_b = [{}, {}, {}]", ctl.n_b[0], ctl.n_b[1], ctl.n_b[2]);
    Ok(kyp < 1e-10 && hurwitz < 0.0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            duration,
        } => run(config, out, seed, duration),
        Command::VerifyQp {
            instances,
            seed,
            config,
        } => verify_qp(instances, seed, config),
        Command::CheckGains { config } => check_gains(config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

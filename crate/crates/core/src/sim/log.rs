//! In-memory traces of a run and their CSV / TOML serialization.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Vector3, Vector6};
use serde::Serialize;

use crate::allocation::{wrap_to_turn, Termination};
use crate::error::Result;

pub const OBSERVER_CSV: &str = "observer.csv";
pub const CONTROLLER_CSV: &str = "controller.csv";
pub const ALLOCATION_CSV: &str = "allocation.csv";
pub const ENVIRONMENT_CSV: &str = "environment.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const CONFIG_COPY: &str = "scenario.toml";

const AXES: [&str; 3] = ["x", "y", "psi"];
const BODY: [&str; 3] = ["u", "v", "r"];
const FORCE: [&str; 3] = ["x", "y", "n"];

fn columns(prefix: &str, names: &[&str]) -> Vec<String> {
    names.iter().map(|n| format!("{prefix}_{n}")).collect()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

fn push_all(out: &mut Vec<String>, values: &[f64]) {
    out.extend(values.iter().map(|v| format!("{v}")));
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRow {
    pub t: f64,
    pub x_hat: Vector6<f64>,
    pub phi_hat: Vector3<f64>,
    pub alarm: bool,
    pub x_tilde_norm: f64,
}

impl ObserverRow {
    pub fn header() -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(columns("x_hat", &AXES));
        h.extend(columns("x_hat", &BODY));
        h.extend(columns("phi_hat", &FORCE));
        h.push("alarm".into());
        h.push("x_tilde_norm".into());
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![format!("{}", self.t)];
        push_all(&mut r, self.x_hat.as_slice());
        push_all(&mut r, self.phi_hat.as_slice());
        r.push(u8::from(self.alarm).to_string());
        r.push(format!("{}", self.x_tilde_norm));
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRow {
    pub t: f64,
    pub eta_d: Vector3<f64>,
    pub eta: Vector3<f64>,
    pub z1: Vector3<f64>,
    pub z2: Vector3<f64>,
    pub s: Vector3<f64>,
    pub z_f: Vector3<f64>,
    pub tau_prime: Vector3<f64>,
    pub tau_wind_hat: Vector3<f64>,
    pub tau: Vector3<f64>,
}

impl ControllerRow {
    pub fn header() -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for (prefix, names) in [
            ("eta_d", &AXES),
            ("eta", &AXES),
            ("z1", &AXES),
            ("z2", &BODY),
            ("s", &BODY),
            ("z_f", &BODY),
            ("tau_prime", &FORCE),
            ("tau_wind_hat", &FORCE),
            ("tau", &FORCE),
        ] {
            h.extend(columns(prefix, names));
        }
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![format!("{}", self.t)];
        for v in [
            &self.eta_d,
            &self.eta,
            &self.z1,
            &self.z2,
            &self.s,
            &self.z_f,
            &self.tau_prime,
            &self.tau_wind_hat,
            &self.tau,
        ] {
            push_all(&mut r, v.as_slice());
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRow {
    pub t: f64,
    pub tau_cmd: Vector3<f64>,
    pub achieved: Vector3<f64>,
    pub slack: Vector3<f64>,
    pub u: Vector6<f64>,
    /// Unwrapped angles; wrapped only when written.
    pub alpha: Vector6<f64>,
    pub delta_alpha: Vector6<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl AllocationRow {
    pub fn header() -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(columns("tau_cmd", &FORCE));
        h.extend(columns("achieved", &FORCE));
        h.extend(columns("o", &FORCE));
        h.extend(numbered("u", 6));
        h.extend(numbered("alpha", 6));
        h.push("iterations".into());
        h.push("termination".into());
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![format!("{}", self.t)];
        push_all(&mut r, self.tau_cmd.as_slice());
        push_all(&mut r, self.achieved.as_slice());
        push_all(&mut r, self.slack.as_slice());
        push_all(&mut r, self.u.as_slice());
        let wrapped: Vec<f64> = self.alpha.iter().map(|a| wrap_to_turn(*a)).collect();
        push_all(&mut r, &wrapped);
        r.push(self.iterations.to_string());
        r.push(self.termination.as_str().to_string());
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentRow {
    pub t: f64,
    pub tau_wind: Vector3<f64>,
    pub tau_wave: Vector3<f64>,
    pub gate: f64,
    pub disturbance: Vector3<f64>,
    /// Thruster force reaching the plant after the input delay.
    pub applied: Vector3<f64>,
}

impl EnvironmentRow {
    pub fn header() -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend(columns("tau_wind", &FORCE));
        h.extend(columns("tau_wave", &FORCE));
        h.push("gate".into());
        h.extend(columns("d", &FORCE));
        h.extend(columns("tau_applied", &FORCE));
        h
    }

    pub fn record(&self) -> Vec<String> {
        let mut r = vec![format!("{}", self.t)];
        push_all(&mut r, self.tau_wind.as_slice());
        push_all(&mut r, self.tau_wave.as_slice());
        r.push(format!("{}", self.gate));
        push_all(&mut r, self.disturbance.as_slice());
        push_all(&mut r, self.applied.as_slice());
        r
    }
}

/// Everything recorded during one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traces {
    pub observer: Vec<ObserverRow>,
    pub controller: Vec<ControllerRow>,
    pub allocation: Vec<AllocationRow>,
    pub environment: Vec<EnvironmentRow>,
}

/// End-of-run report written next to the CSV logs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub seed: u64,
    pub steps: usize,
    pub final_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alarm_time: Option<f64>,
    pub final_z1: [f64; 3],
    pub max_abs_z1: [f64; 3],
    pub barrier_violations: usize,
    pub allocation_cycles: usize,
    pub allocation_bound_violations: usize,
    pub unconverged_cycles: usize,
    pub diverged_cycles: usize,
    pub max_force_error: f64,
    pub final_phi_hat: [f64; 3],
}

fn write_csv<I>(path: &Path, header: Vec<String>, records: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(&header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

impl Traces {
    /// Write the four module logs into `dir`, creating it if needed.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_csv(
            &dir.join(OBSERVER_CSV),
            ObserverRow::header(),
            self.observer.iter().map(ObserverRow::record),
        )?;
        write_csv(
            &dir.join(CONTROLLER_CSV),
            ControllerRow::header(),
            self.controller.iter().map(ControllerRow::record),
        )?;
        write_csv(
            &dir.join(ALLOCATION_CSV),
            AllocationRow::header(),
            self.allocation.iter().map(AllocationRow::record),
        )?;
        write_csv(
            &dir.join(ENVIRONMENT_CSV),
            EnvironmentRow::header(),
            self.environment.iter().map(EnvironmentRow::record),
        )
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_match_record_widths() {
        let o = ObserverRow {
            t: 0.0,
            x_hat: Vector6::zeros(),
            phi_hat: Vector3::zeros(),
            alarm: true,
            x_tilde_norm: 0.0,
        };
        assert_eq!(ObserverRow::header().len(), o.record().len());
        assert_eq!(o.record()[10], "1");
        let z = Vector3::zeros();
        let c = ControllerRow {
            t: 0.0,
            eta_d: z,
            eta: z,
            z1: z,
            z2: z,
            s: z,
            z_f: z,
            tau_prime: z,
            tau_wind_hat: z,
            tau: z,
        };
        assert_eq!(ControllerRow::header().len(), c.record().len());
        let a = AllocationRow {
            t: 0.0,
            tau_cmd: z,
            achieved: z,
            slack: z,
            u: Vector6::zeros(),
            alpha: Vector6::repeat(7.0),
            delta_alpha: Vector6::zeros(),
            iterations: 3,
            termination: Termination::Converged,
        };
        assert_eq!(AllocationRow::header().len(), a.record().len());
        assert_eq!(a.record()[16], format!("{}", 7.0 - std::f64::consts::TAU));
        let e = EnvironmentRow {
            t: 0.0,
            tau_wind: z,
            tau_wave: z,
            gate: 0.5,
            disturbance: z,
            applied: z,
        };
        assert_eq!(EnvironmentRow::header().len(), e.record().len());
    }

    #[test]
    fn csv_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut traces = Traces::default();
        traces.environment.push(EnvironmentRow {
            t: 0.02,
            tau_wind: Vector3::new(1.0, 2.0, 3.0),
            tau_wave: Vector3::zeros(),
            gate: 0.0,
            disturbance: Vector3::zeros(),
            applied: Vector3::zeros(),
        });
        traces.write_csv(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(ENVIRONMENT_CSV)).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("t,tau_wind_x"));
        assert!(lines.next().unwrap().starts_with("0.02,1,2,3"));
        assert!(dir.path().join(OBSERVER_CSV).exists());
    }
}

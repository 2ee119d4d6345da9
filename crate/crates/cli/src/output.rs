//! Plot-ready CSV files and JSON summaries.
//!
//! Floats are written in Rust's shortest round-trip form, so a control file
//! read back reproduces the exact values that were written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mintime_core::{Controls, StepRecord, Trajectory};
use serde::Serialize;

use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str = "t,x1,x2,x3,v,n";
pub const CONTROLS_HEADER: &str = "t_start,t_end,v,n";
pub const CONVERGENCE_HEADER: &str = "iter,J,beta,step_accepted";

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

/// One row per grid endpoint; the controls are those of the interval that
/// starts at `t`, and the last row repeats the final interval's controls.
pub fn trajectory_csv(traj: &Trajectory<f64>, u: &Controls) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let last = u.intervals() - 1;
    for (i, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let k = i.min(last);
        let [x1, x2, x3] = *x.as_array();
        let _ = writeln!(out, "{t:?},{x1:?},{x2:?},{x3:?},{:?},{:?}", u.v()[k], u.n()[k]);
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>, u: &Controls) -> Result<(), CliError> {
    write(path, &trajectory_csv(traj, u))
}

pub fn controls_csv(u: &Controls) -> String {
    let mut out = String::from(CONTROLS_HEADER);
    out.push('\n');
    for i in 0..u.intervals() {
        let _ = writeln!(out, "{:?},{:?},{:?},{:?}", u.time(i), u.time(i + 1), u.v()[i], u.n()[i]);
    }
    out
}

pub fn write_controls(path: &Path, u: &Controls) -> Result<(), CliError> {
    write(path, &controls_csv(u))
}

/// Parses a file written by [`write_controls`]. The final time is the
/// `t_end` of the last row.
pub fn read_controls(path: &Path) -> Result<Controls, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_controls(&text).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))
}

pub fn parse_controls(text: &str) -> Result<Controls, String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CONTROLS_HEADER => {}
        _ => return Err(format!("expected header `{CONTROLS_HEADER}`")),
    }
    let (mut v, mut n) = (Vec::new(), Vec::new());
    let mut t_final = 0.0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", idx + 1))?;
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 columns, found {}", idx + 1, fields.len()));
        }
        t_final = fields[1];
        v.push(fields[2]);
        n.push(fields[3]);
    }
    Controls::new(t_final, v, n).map_err(|e| e.to_string())
}

pub fn convergence_csv(steps: &[StepRecord<f64>]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for s in steps {
        let _ = writeln!(out, "{},{:?},{:?},{}", s.iter, s.cost, s.beta, u8::from(s.accepted));
    }
    out
}

pub fn write_convergence(path: &Path, steps: &[StepRecord<f64>]) -> Result<(), CliError> {
    write(path, &convergence_csv(steps))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(value).expect("summary types serialize");
    body.push('\n');
    write(path, &body)
}

/// `(iter, J, beta, accepted)` rows of a convergence file.
pub fn parse_convergence(text: &str) -> Result<Vec<(usize, f64, f64, bool)>, String> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(format!("line {}: expected 4 columns", idx + 1));
        }
        let bad = |e: &dyn std::fmt::Display| format!("line {}: {e}", idx + 1);
        rows.push((
            f[0].parse().map_err(|e| bad(&e))?,
            f[1].parse().map_err(|e| bad(&e))?,
            f[2].parse().map_err(|e| bad(&e))?,
            f[3] == "1",
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controls_survive_a_round_trip() {
        let u = Controls::new(0.7, vec![0.1, -9.999999999999998, 3.0], vec![1.0 / 3.0, 0.0, 1e-17]).unwrap();
        assert_eq!(parse_controls(&controls_csv(&u)).unwrap(), u);
    }

    #[test]
    fn malformed_control_files() {
        assert!(parse_controls("v,n\n1,2\n").is_err());
        let err = parse_controls("t_start,t_end,v,n\n0,1,2\n").unwrap_err();
        assert!(err.contains("line 2"));
        assert!(parse_controls("t_start,t_end,v,n\n0,1,x,0\n").is_err());
    }

    #[test]
    fn convergence_rows() {
        let steps = [
            StepRecord { iter: 0, cost: 1.5, beta: 0.0, accepted: false },
            StepRecord { iter: 1, cost: 0.25, beta: 0.5, accepted: true },
        ];
        let text = convergence_csv(&steps);
        assert!(text.starts_with("iter,J,beta,step_accepted\n0,1.5,0.0,0\n1,0.25,0.5,1\n"));
        assert_eq!(parse_convergence(&text).unwrap()[1], (1, 0.25, 0.5, true));
    }
}

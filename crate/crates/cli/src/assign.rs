//! Standalone ranked assignment over an η table read from CSV.
//!
//! Input: one row per worker/label, `M + 2` comma-separated positive numbers
//! in column order `j = −1, 0, 1, …, M`. Blank lines and lines starting with
//! `#` are skipped. Output: `rank,g1,…,gP,log_weight`, best first.

use std::io::Write;

use glmb::association::{dedup_rank, gibbs_sample, murty_ranked, weight_of, AssignmentVector, AssociationProblem};

use crate::config::SolverChoice;
use crate::{CliError, CliResult};

pub fn parse_eta(text: &str) -> CliResult<AssociationProblem> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("line {lineno}: cannot parse {f:?} as a number")))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        if let Some(v) = row.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(CliError::Usage(format!("line {lineno}: η entries must be positive and finite, got {v}")));
        }
        match width {
            None if row.len() < 2 => {
                return Err(CliError::Usage(format!("line {lineno}: need at least 2 columns (j = -1, 0)")))
            }
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(CliError::Usage(format!("line {lineno}: expected {w} columns, found {}", row.len())))
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage("η table is empty".into()));
    }
    AssociationProblem::from_rows(&rows).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn ranked(problem: &AssociationProblem, t: usize, solver: SolverChoice, seed: u64) -> CliResult<Vec<AssignmentVector>> {
    if t == 0 {
        return Err(CliError::Usage("T must be at least 1".into()));
    }
    Ok(match solver {
        SolverChoice::Murty => murty_ranked(problem, t),
        SolverChoice::Gibbs => {
            let samples = gibbs_sample(problem, &AssignmentVector::zeros(problem.rows()), t, seed)?;
            dedup_rank(&samples, problem)
        }
    })
}

pub fn write_ranked(out: &mut dyn Write, problem: &AssociationProblem, ranked: &[AssignmentVector]) -> std::io::Result<()> {
    let mut header = vec!["rank".to_string()];
    header.extend((1..=problem.rows()).map(|i| format!("g{i}")));
    header.push("log_weight".into());
    writeln!(out, "{}", header.join(","))?;
    for (k, g) in ranked.iter().enumerate() {
        let cells: Vec<String> = g.0.iter().map(i32::to_string).collect();
        writeln!(out, "{},{},{}", k + 1, cells.join(","), weight_of(problem, g))?;
    }
    Ok(())
}

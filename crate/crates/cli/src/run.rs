//! Monte Carlo scenario runs and their on-disk outputs.
//!
//! Layout under `output_dir`:
//! - `mc_summary.json`
//! - `trial_NNN/{tracks,ospa,cardinality,truth,measurements}.csv`,
//!   `timing.json`, `diagnostics.jsonl` and optionally `density.json`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use glmb::filter::{joint_step, ScanEstimate};
use glmb::scenarios::{ospa, simulate, Ospa, Simulation};
use glmb::{GlmbDensity, Label};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ResolvedRun, RunConfig};
use crate::{CliResult, SCHEMA_VERSION};

/// Seed of trial `k`; solver choice does not enter, so two runs that differ
/// only in the solver see the same measurements.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    glmb::rng::combine(seed, trial as u64)
}

/// Position components of a state vector.
fn position(x: &[f64]) -> Vec<f64> {
    vec![x[0], x[2]]
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub simulation: Simulation,
    pub estimates: Vec<ScanEstimate>,
    pub ospa: Vec<Ospa>,
    pub step_seconds: Vec<f64>,
    pub runtime_seconds: f64,
    pub final_density: GlmbDensity,
}

impl TrialRecord {
    pub fn mean_ospa(&self) -> f64 {
        self.ospa.iter().map(|o| o.total).sum::<f64>() / self.ospa.len().max(1) as f64
    }

    pub fn solver_seconds(&self) -> f64 {
        self.estimates.iter().map(|e| e.diagnostics.solver_seconds).sum()
    }
}

/// Simulates and filters one trial in memory.
pub fn run_trial(run: &ResolvedRun, base_seed: u64, trial: usize, params: &glmb::scenarios::OspaParams) -> glmb::Result<TrialRecord> {
    let seed = trial_seed(base_seed, trial);
    let simulation = simulate(&run.spec, seed)?;
    let (motion, sensor) = run.spec.models()?;
    let mut filter = run.filter.clone();
    filter.rng_seed = glmb::rng::combine(seed, 0x5eed);
    let start = Instant::now();
    let mut density = GlmbDensity::empty(0);
    let mut estimates = Vec::with_capacity(simulation.scans());
    let mut step_seconds = Vec::with_capacity(simulation.scans());
    let mut distances = Vec::with_capacity(simulation.scans());
    for (z, truth) in simulation.measurements.iter().zip(&simulation.truth) {
        let step_start = Instant::now();
        let step = joint_step(&density, z, motion.as_ref(), sensor.as_ref(), &filter)?;
        step_seconds.push(step_start.elapsed().as_secs_f64());
        density = step.density;
        let tracks = density.estimate_state()?;
        let est: Vec<Vec<f64>> = tracks.iter().map(|(_, x)| position(x)).collect();
        let tru: Vec<Vec<f64>> = truth.iter().map(|(_, x)| position(x)).collect();
        distances.push(ospa(&est, &tru, params)?);
        estimates.push(ScanEstimate {
            scan: density.scan(),
            tracks,
            expected_cardinality: density.expected_cardinality(),
            diagnostics: step.diagnostics,
        });
    }
    Ok(TrialRecord {
        trial,
        seed,
        simulation,
        estimates,
        ospa: distances,
        step_seconds,
        runtime_seconds: start.elapsed().as_secs_f64(),
        final_density: density,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub mean_ospa: Option<f64>,
    pub runtime_seconds: Option<f64>,
    pub solver_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub solver: String,
    pub backend: String,
    pub h_max: usize,
    pub mc_trials: usize,
    pub seed: u64,
    pub scans: usize,
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
    pub failed_trials: usize,
    pub trials: Vec<TrialSummary>,
    /// Per-scan means over the successful trials.
    pub mean_ospa_curve: Vec<f64>,
    pub mean_localization_curve: Vec<f64>,
    pub mean_cardinality_penalty_curve: Vec<f64>,
    pub mean_true_cardinality: Vec<f64>,
    pub mean_estimated_cardinality: Vec<f64>,
    pub mean_ospa: f64,
    /// Mean over scans and trials of `|N̂ − N|`.
    pub mean_cardinality_error: f64,
    pub mean_runtime_seconds: f64,
    pub mean_solver_seconds: f64,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))
}

fn label_fields(l: &Label) -> [String; 3] {
    [l.to_string(), l.birth_time.to_string(), l.index.to_string()]
}

pub fn write_trial(dir: &Path, record: &TrialRecord, write_density: bool) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let dim = record
        .simulation
        .truth
        .iter()
        .flatten()
        .map(|(_, x)| x.len())
        .chain(record.estimates.iter().flat_map(|e| e.tracks.iter().map(|(_, x)| x.len())))
        .next()
        .unwrap_or(0);
    let state_cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();

    let mut w = csv_writer(&dir.join("tracks.csv"))?;
    let mut header = vec!["scan", "label", "birth_time", "index", "pos_x", "pos_y"];
    header.extend(state_cols.iter().map(String::as_str));
    w.write_record(&header)?;
    for e in &record.estimates {
        for (l, x) in &e.tracks {
            let mut row = vec![e.scan.to_string()];
            row.extend(label_fields(l));
            row.extend(position(x).into_iter().map(fmt));
            row.extend(x.iter().copied().map(fmt));
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("truth.csv"))?;
    w.write_record(&header)?;
    for (k, alive) in record.simulation.truth.iter().enumerate() {
        for (l, x) in alive {
            let mut row = vec![(k + 1).to_string()];
            row.extend(label_fields(l));
            row.extend(position(x).into_iter().map(fmt));
            row.extend(x.iter().copied().map(fmt));
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("measurements.csv"))?;
    let zdim = record.simulation.measurements.iter().flatten().map(Vec::len).next().unwrap_or(2);
    let mut header = vec!["scan".to_string(), "origin".to_string()];
    header.extend((0..zdim).map(|i| format!("z{i}")));
    w.write_record(&header)?;
    for (k, (zs, origins)) in record.simulation.measurements.iter().zip(&record.simulation.origins).enumerate() {
        for (z, o) in zs.iter().zip(origins) {
            let mut row = vec![(k + 1).to_string(), o.map_or_else(|| "clutter".to_string(), |l| l.to_string())];
            row.extend(z.iter().copied().map(fmt));
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("ospa.csv"))?;
    w.write_record(["scan", "ospa", "localization", "cardinality"])?;
    for (e, o) in record.estimates.iter().zip(&record.ospa) {
        w.write_record([e.scan.to_string(), fmt(o.total), fmt(o.localization), fmt(o.cardinality)])?;
    }
    w.flush()?;

    let mut w = csv_writer(&dir.join("cardinality.csv"))?;
    w.write_record(["scan", "true_n", "est_n", "expected_n"])?;
    for (e, truth) in record.estimates.iter().zip(&record.simulation.truth) {
        w.write_record([
            e.scan.to_string(),
            truth.len().to_string(),
            e.tracks.len().to_string(),
            fmt(e.expected_cardinality),
        ])?;
    }
    w.flush()?;

    let lines: Vec<String> = record
        .estimates
        .iter()
        .map(|e| serde_json::to_string(&e.diagnostics))
        .collect::<Result<_, _>>()?;
    fs::write(dir.join("diagnostics.jsonl"), lines.join("\n") + "\n")?;

    #[derive(Serialize)]
    struct ScanTiming {
        scan: u32,
        solver_seconds: f64,
        step_seconds: f64,
    }
    let timing = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "per_scan": record.estimates.iter().zip(&record.step_seconds).map(|(e, s)| ScanTiming {
            scan: e.scan,
            solver_seconds: e.diagnostics.solver_seconds,
            step_seconds: *s,
        }).collect::<Vec<_>>(),
        "total_solver_seconds": record.solver_seconds(),
        "total_step_seconds": record.step_seconds.iter().sum::<f64>(),
        "runtime_seconds": record.runtime_seconds,
    });
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;

    if write_density {
        let summary = record.final_density.summary();
        fs::write(dir.join("density.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(())
}

fn mean_curve(records: &[&TrialRecord], scans: usize, f: impl Fn(&TrialRecord, usize) -> f64) -> Vec<f64> {
    (0..scans)
        .map(|k| records.iter().map(|r| f(r, k)).sum::<f64>() / records.len().max(1) as f64)
        .collect()
}

pub fn summarize(config: &RunConfig, run: &ResolvedRun, outcomes: &[(usize, u64, glmb::Result<TrialRecord>)]) -> McSummary {
    let ok: Vec<&TrialRecord> = outcomes.iter().filter_map(|(_, _, r)| r.as_ref().ok()).collect();
    let scans = run.spec.duration as usize;
    let trials = outcomes
        .iter()
        .map(|(trial, seed, r)| match r {
            Ok(rec) => TrialSummary {
                trial: *trial,
                seed: *seed,
                status: "ok".into(),
                error: None,
                mean_ospa: Some(rec.mean_ospa()),
                runtime_seconds: Some(rec.runtime_seconds),
                solver_seconds: Some(rec.solver_seconds()),
            },
            Err(e) => TrialSummary {
                trial: *trial,
                seed: *seed,
                status: "failed".into(),
                error: Some(e.to_string()),
                mean_ospa: None,
                runtime_seconds: None,
                solver_seconds: None,
            },
        })
        .collect();
    let mean_ospa_curve = mean_curve(&ok, scans, |r, k| r.ospa[k].total);
    let card_err: f64 = ok
        .iter()
        .map(|r| {
            r.estimates
                .iter()
                .zip(&r.simulation.truth)
                .map(|(e, t)| (e.tracks.len() as f64 - t.len() as f64).abs())
                .sum::<f64>()
                / scans as f64
        })
        .sum::<f64>()
        / ok.len().max(1) as f64;
    let n = ok.len().max(1) as f64;
    McSummary {
        schema_version: SCHEMA_VERSION,
        scenario: run.spec.name.clone(),
        solver: format!("{:?}", config.solver).to_lowercase(),
        backend: format!("{:?}", config.backend).to_lowercase(),
        h_max: config.h_max,
        mc_trials: config.mc_trials,
        seed: config.seed,
        scans,
        ospa_cutoff: config.ospa.cutoff,
        ospa_order: config.ospa.order,
        failed_trials: outcomes.len() - ok.len(),
        trials,
        mean_ospa: mean_ospa_curve.iter().sum::<f64>() / scans.max(1) as f64,
        mean_ospa_curve,
        mean_localization_curve: mean_curve(&ok, scans, |r, k| r.ospa[k].localization),
        mean_cardinality_penalty_curve: mean_curve(&ok, scans, |r, k| r.ospa[k].cardinality),
        mean_true_cardinality: mean_curve(&ok, scans, |r, k| r.simulation.truth[k].len() as f64),
        mean_estimated_cardinality: mean_curve(&ok, scans, |r, k| r.estimates[k].tracks.len() as f64),
        mean_cardinality_error: card_err,
        mean_runtime_seconds: ok.iter().map(|r| r.runtime_seconds).sum::<f64>() / n,
        mean_solver_seconds: ok.iter().map(|r| r.solver_seconds()).sum::<f64>() / n,
    }
}

/// Runs every trial, writes all outputs and returns the summary. Trials that
/// fail are recorded in the summary and do not stop the others.
pub fn run(config: &RunConfig) -> CliResult<McSummary> {
    let resolved = config.resolve()?;
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create {}", config.output_dir.display()))?;
    let outcomes: Vec<(usize, u64, glmb::Result<TrialRecord>)> = (0..config.mc_trials)
        .into_par_iter()
        .map(|trial| {
            let result = run_trial(&resolved, config.seed, trial, &config.ospa);
            match &result {
                Ok(rec) => {
                    log::info!("trial {trial}: mean OSPA {:.2} in {:.2}s", rec.mean_ospa(), rec.runtime_seconds);
                }
                Err(e) => log::error!("trial {trial} failed: {e}"),
            }
            (trial, trial_seed(config.seed, trial), result)
        })
        .collect();
    for (trial, _, r) in &outcomes {
        if let Ok(rec) = r {
            write_trial(&config.output_dir.join(format!("trial_{trial:03}")), rec, config.write_density)?;
        }
    }
    let summary = summarize(config, &resolved, &outcomes);
    let path = config.output_dir.join("mc_summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).context("serializing summary")? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(summary)
}

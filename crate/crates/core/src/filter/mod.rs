//! Joint prediction-update recursion.
//!
//! One call to [`joint_step`] turns the density at scan `k` into the density
//! at scan `k + 1`: it allocates the child budget across parents, solves each
//! parent's association problem, scores every distinct child with the exact
//! (untempered) η factors, merges children with identical track histories and
//! computes the posterior track densities that survive pruning.

mod oracle;
mod run;

pub use oracle::two_stage_oracle;
pub use run::{run_filter, ScanEstimate};

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{
    dedup_rank, enumerate, gibbs_sample_with, murty_ranked, optimal_assignment, AssignmentVector,
    AssociationProblem,
};
use crate::densities::{self, Backend, TrackDensity};
use crate::error::{GlmbError, Result};
use crate::glmb::{log_sum_exp, GlmbComponent, GlmbDensity, Label, Track, TrackKey};
use crate::models::{BirthTerm, MeasurementModel, MotionModel};
use crate::rng::{self, purpose};

/// Smallest η entry handed to the solvers. Detection factors of far-away
/// measurements underflow to zero in double precision; flooring keeps the
/// table strictly positive without changing any weight that matters.
pub const ETA_FLOOR: f64 = 1e-300;

/// Upper bound on a tempered birth probability.
pub const MAX_TEMPERED_BIRTH: f64 = 1.0 - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Gibbs,
    Murty,
    /// Every positive 1-1 vector of every parent; for small test instances.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GibbsInit {
    #[default]
    Zeros,
    Optimal,
}

/// Model distortion used only when sampling children.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tempering {
    pub birth_factor: f64,
    pub survival_factor: f64,
    pub detection_factor: f64,
}

impl Tempering {
    pub const NONE: Tempering = Tempering {
        birth_factor: 1.0,
        survival_factor: 1.0,
        detection_factor: 1.0,
    };

    pub fn is_neutral(&self) -> bool {
        *self == Self::NONE
    }

    fn validate(&self) -> Result<()> {
        if !(self.birth_factor >= 1.0) {
            return Err(GlmbError::InvalidArgument(format!(
                "birth tempering factor must be ≥ 1, got {}",
                self.birth_factor
            )));
        }
        for (name, f) in [("survival", self.survival_factor), ("detection", self.detection_factor)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(GlmbError::InvalidArgument(format!(
                    "{name} tempering factor must be in (0, 1], got {f}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Tempering {
    fn default() -> Self {
        Self::NONE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    /// Total child budget `H₊^max` shared across parents.
    pub h_max: usize,
    pub tempering: Tempering,
    pub gibbs_init: GibbsInit,
    pub solver: Solver,
    pub rng_seed: u64,
    pub backend: Backend,
    /// Children below this normalized weight are dropped after merging.
    pub prune_floor: f64,
    /// Per-parent cap for the exhaustive solver.
    pub exhaustive_limit: usize,
}

impl FilterConfig {
    pub fn new(h_max: usize, solver: Solver, rng_seed: u64) -> Self {
        Self {
            h_max,
            tempering: Tempering::NONE,
            gibbs_init: GibbsInit::Zeros,
            solver,
            rng_seed,
            backend: Backend::Gaussian,
            prune_floor: 1e-15,
            exhaustive_limit: 100_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_max == 0 {
            return Err(GlmbError::InvalidArgument("h_max must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.prune_floor) {
            return Err(GlmbError::InvalidArgument(format!(
                "prune floor must be in [0, 1), got {}",
                self.prune_floor
            )));
        }
        self.tempering.validate()
    }
}

/// A track carried into the next scan: either a survivor (existence `P̄_S`)
/// or a birth candidate (existence `r_B`), with its predicted density and
/// `ψ̄(0..=M)`.
#[derive(Clone, Debug)]
pub struct PredictedTrack {
    pub label: Label,
    /// Key of the prior track, or the birth key.
    pub key: TrackKey,
    pub existence: f64,
    pub density: Arc<TrackDensity>,
    pub psi: Vec<f64>,
    pub is_birth: bool,
}

impl PredictedTrack {
    /// `[1 − e, e ψ̄(0), …, e ψ̄(M)]`, with `e` and `ψ̄` optionally tempered.
    fn eta_row(&self, tempering: &Tempering, out: &mut Vec<f64>) {
        let e = if !self.is_birth {
            self.existence * tempering.survival_factor
        } else if tempering.birth_factor == 1.0 {
            self.existence
        } else {
            (self.existence * tempering.birth_factor).min(MAX_TEMPERED_BIRTH)
        };
        let fd = tempering.detection_factor;
        out.push(1.0 - e);
        let miss = if fd == 1.0 { self.psi[0] } else { 1.0 - fd * (1.0 - self.psi[0]) };
        out.push((e * miss).max(ETA_FLOOR));
        out.extend(self.psi[1..].iter().map(|p| (e * fd * p).max(ETA_FLOOR)));
    }
}

fn check_probability(value: f64, what: &str, label: &Label) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(GlmbError::ModelContract(format!("{what} of {label} is {value}, outside (0, 1)")))
    }
}

/// Predicts one surviving track and evaluates its `ψ̄` row.
pub fn predict_track(
    track: &Track,
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    measurements: &[Vec<f64>],
    scan: u32,
    seed: u64,
) -> Result<PredictedTrack> {
    let mut rng = rng::stream(seed, &[purpose::PREDICT, u64::from(scan), track.key.0]);
    let (ps, predicted) = densities::predict(&track.density, motion, sensor, &track.label, &mut rng)?;
    check_probability(ps, "expected survival probability", &track.label)?;
    let psi = densities::psi_row(&predicted, measurements, motion, sensor, &track.label)?;
    Ok(PredictedTrack {
        label: track.label,
        key: track.key,
        existence: ps,
        density: Arc::new(predicted),
        psi,
        is_birth: false,
    })
}

/// Birth candidate in the configured representation.
pub fn birth_track(
    term: &BirthTerm,
    backend: &Backend,
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    measurements: &[Vec<f64>],
    seed: u64,
) -> Result<PredictedTrack> {
    check_probability(term.existence, "birth probability", &term.label)?;
    let key = TrackKey::birth(term.label);
    let mut rng = rng::stream(seed, &[purpose::BIRTH, key.0]);
    let density = backend.birth_density(&term.mean, &term.covariance, &mut rng)?;
    let psi = densities::psi_row(&density, measurements, motion, sensor, &term.label)?;
    Ok(PredictedTrack {
        label: term.label,
        key,
        existence: term.existence,
        density: Arc::new(density),
        psi,
        is_birth: true,
    })
}

/// Predictions of one component's tracks followed by the birth candidates,
/// keyed by label.
pub fn predict_density(
    component: &GlmbComponent,
    births: &[BirthTerm],
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    measurements: &[Vec<f64>],
    config: &FilterConfig,
    scan: u32,
) -> Result<Vec<PredictedTrack>> {
    let mut out = component
        .tracks()
        .iter()
        .map(|t| predict_track(t, motion, sensor, measurements, scan, config.rng_seed))
        .collect::<Result<Vec<_>>>()?;
    for term in births {
        out.push(birth_track(term, &config.backend, motion, sensor, measurements, config.rng_seed)?);
    }
    Ok(out)
}

/// η table over `rows` (survivors first, then births).
pub fn build_problem(rows: &[&PredictedTrack], measurements: usize, tempering: &Tempering) -> Result<AssociationProblem> {
    let survivors = rows.iter().take_while(|r| !r.is_birth).count();
    if rows[survivors..].iter().any(|r| !r.is_birth) {
        return Err(GlmbError::InvalidArgument("surviving rows must precede birth rows".into()));
    }
    let mut eta = Vec::with_capacity(rows.len() * (measurements + 2));
    for r in rows {
        if r.psi.len() != measurements + 1 {
            return Err(GlmbError::DimensionMismatch(format!(
                "ψ̄ row of {} has {} entries for {measurements} measurements",
                r.label,
                r.psi.len()
            )));
        }
        r.eta_row(tempering, &mut eta);
    }
    AssociationProblem::new(eta, measurements, survivors, rows.iter().map(|r| r.label).collect())
}

/// Sequential-binomial multinomial draw of `n` trials over `weights`.
pub fn multinomial(n: usize, weights: &[f64], rng: &mut dyn RngCore) -> Vec<usize> {
    let mut remaining_mass: f64 = weights.iter().sum();
    let mut remaining = n as u64;
    let mut counts = vec![0; weights.len()];
    for (k, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == weights.len() {
            counts[k] = remaining as usize;
            break;
        }
        let p = if remaining_mass > 0.0 { (w / remaining_mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, p).expect("probability clamped to [0, 1]").sample(rng);
        counts[k] = draw as usize;
        remaining -= draw;
        remaining_mass -= w;
    }
    counts
}

/// Per-scan record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub scan: u32,
    pub parents: usize,
    /// Parents that received a nonzero child budget.
    pub expanded_parents: usize,
    pub children: usize,
    pub measurements: usize,
    pub max_rows: usize,
    /// Summed wall time of the solver calls.
    pub solver_seconds: f64,
    pub ess: f64,
    /// `ln Σ` of the unnormalized weights of all distinct children found.
    pub log_captured_mass: f64,
    /// Children removed because a particle update degenerated.
    pub dropped_children: usize,
    /// No child survived; the density was reset to "no objects".
    pub degenerate: bool,
}

pub struct StepOutput {
    pub density: GlmbDensity,
    pub diagnostics: StepDiagnostics,
}

struct ParentResult {
    children: Vec<(AssignmentVector, f64)>,
    rows: Vec<Arc<PredictedTrack>>,
    solver_seconds: f64,
}

fn solve_parent(
    rows: &[Arc<PredictedTrack>],
    measurements: usize,
    budget: usize,
    log_weight: f64,
    config: &FilterConfig,
    stream_key: u64,
) -> Result<ParentResult> {
    let refs: Vec<&PredictedTrack> = rows.iter().map(|r| r.as_ref()).collect();
    let exact = build_problem(&refs, measurements, &Tempering::NONE)?;
    let sampling = if config.tempering.is_neutral() {
        None
    } else {
        Some(build_problem(&refs, measurements, &config.tempering)?)
    };
    let problem = sampling.as_ref().unwrap_or(&exact);
    let start = Instant::now();
    let solutions = match config.solver {
        Solver::Gibbs => {
            let init = match config.gibbs_init {
                GibbsInit::Zeros => AssignmentVector::zeros(problem.rows()),
                GibbsInit::Optimal => optimal_assignment(problem),
            };
            let mut rng = rng::stream(config.rng_seed, &[purpose::GIBBS, stream_key]);
            let samples = gibbs_sample_with(problem, &init, budget, &mut rng)?;
            dedup_rank(&samples, problem)
        }
        Solver::Murty => murty_ranked(problem, budget),
        Solver::Exhaustive => enumerate(problem, config.exhaustive_limit)?,
    };
    let solver_seconds = start.elapsed().as_secs_f64();
    let children = solutions
        .into_iter()
        .map(|g| {
            let w = log_weight + crate::association::weight_of(&exact, &g);
            (g, w)
        })
        .collect();
    Ok(ParentResult {
        children,
        rows: rows.to_vec(),
        solver_seconds,
    })
}

/// Merged child: label-sorted `(row, j)` pairs plus its log-weight.
struct Child {
    tracks: Vec<(Arc<PredictedTrack>, u32)>,
    log_weight: f64,
}

fn child_key(tracks: &[(Arc<PredictedTrack>, u32)]) -> Vec<(Label, TrackKey)> {
    tracks.iter().map(|(r, j)| (r.label, r.key.extend(*j))).collect()
}

pub fn joint_step(
    density: &GlmbDensity,
    measurements: &[Vec<f64>],
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    config: &FilterConfig,
) -> Result<StepOutput> {
    config.validate()?;
    if density.is_empty() {
        return Err(GlmbError::EmptyDensity);
    }
    if let Some(z) = measurements.iter().find(|z| z.iter().any(|v| !v.is_finite())) {
        return Err(GlmbError::InvalidArgument(format!("non-finite measurement {z:?}")));
    }
    let scan = density.scan() + 1;
    let m = measurements.len();
    let seed = config.rng_seed;

    let births: Vec<Arc<PredictedTrack>> = motion
        .births(scan)
        .iter()
        .map(|t| birth_track(t, &config.backend, motion, sensor, measurements, seed).map(Arc::new))
        .collect::<Result<_>>()?;

    let budgets = match config.solver {
        Solver::Exhaustive => vec![1; density.len()],
        _ => {
            let mut rng = rng::stream(seed, &[purpose::ALLOCATION, u64::from(scan)]);
            multinomial(config.h_max, &density.weights(), &mut rng)
        }
    };
    let parents: Vec<(usize, &GlmbComponent)> = density
        .components()
        .iter()
        .enumerate()
        .filter(|(h, _)| budgets[*h] > 0)
        .collect();

    // Predict every distinct surviving track once.
    let mut keys: Vec<&Track> = parents.iter().flat_map(|(_, c)| c.tracks()).collect();
    keys.sort_by_key(|t| t.key);
    keys.dedup_by_key(|t| t.key);
    let predictions: HashMap<TrackKey, Arc<PredictedTrack>> = keys
        .par_iter()
        .map(|t| predict_track(t, motion, sensor, measurements, scan, seed).map(|p| (t.key, Arc::new(p))))
        .collect::<Result<_>>()?;

    let mut results: Vec<ParentResult> = parents
        .par_iter()
        .map(|(h, c)| {
            let rows: Vec<Arc<PredictedTrack>> = c
                .tracks()
                .iter()
                .map(|t| predictions[&t.key].clone())
                .chain(births.iter().cloned())
                .collect();
            let stream_key = rng::combine(u64::from(scan), c.fingerprint());
            solve_parent(&rows, m, budgets[*h], c.log_weight(), config, stream_key)
        })
        .collect::<Result<_>>()?;

    let mut diagnostics = StepDiagnostics {
        scan,
        parents: density.len(),
        expanded_parents: parents.len(),
        measurements: m,
        max_rows: results.iter().map(|r| r.rows.len()).max().unwrap_or(0),
        solver_seconds: results.iter().map(|r| r.solver_seconds).sum(),
        ..Default::default()
    };
    diagnostics.log_captured_mass = log_sum_exp(results.iter().flat_map(|r| r.children.iter().map(|c| c.1)));

    // Merge in (parent, γ) order so the arithmetic does not depend on how the
    // children were found.
    let mut index: HashMap<Vec<(Label, TrackKey)>, usize> = HashMap::new();
    let mut merged: Vec<Child> = Vec::new();
    for r in &mut results {
        r.children.sort_by(|a, b| a.0.cmp(&b.0));
    }
    for r in &results {
        for (gamma, w) in &r.children {
            let mut tracks: Vec<(Arc<PredictedTrack>, u32)> = gamma
                .0
                .iter()
                .zip(&r.rows)
                .filter(|(g, _)| **g >= 0)
                .map(|(g, row)| (row.clone(), *g as u32))
                .collect();
            tracks.sort_by_key(|(row, _)| row.label);
            let key = child_key(&tracks);
            match index.get(&key) {
                Some(&i) => {
                    let c = &mut merged[i];
                    c.log_weight = log_sum_exp([c.log_weight, *w]);
                }
                None => {
                    index.insert(key, merged.len());
                    merged.push(Child { tracks, log_weight: *w });
                }
            }
        }
    }

    // Prune on normalized weight before computing any posterior.
    let total = log_sum_exp(merged.iter().map(|c| c.log_weight));
    if !total.is_finite() {
        return Err(GlmbError::Numerical(format!("children have total log-weight {total}")));
    }
    let best = merged.iter().map(|c| c.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let log_floor = config.prune_floor.ln();
    merged.retain(|c| c.log_weight - total >= log_floor || c.log_weight == best);

    let mut needed: Vec<(TrackKey, Arc<PredictedTrack>, u32)> = merged
        .iter()
        .flat_map(|c| c.tracks.iter().map(|(row, j)| (row.key.extend(*j), row.clone(), *j)))
        .collect();
    needed.sort_by_key(|n| n.0);
    needed.dedup_by_key(|n| n.0);
    let posteriors: HashMap<TrackKey, Option<Arc<TrackDensity>>> = needed
        .par_iter()
        .map(|(key, row, j)| {
            let reuse_prior = *j == 0 && matches!(*row.density, TrackDensity::Gaussian(_));
            if reuse_prior {
                return Ok((*key, Some(row.density.clone())));
            }
            let mut rng = rng::stream(seed, &[purpose::UPDATE, u64::from(scan), key.0]);
            match densities::update(&row.density, *j as usize, measurements, motion, sensor, &row.label, &mut rng) {
                Ok(d) => Ok((*key, Some(Arc::new(d)))),
                Err(GlmbError::DegenerateLikelihood) => Ok((*key, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut components = Vec::with_capacity(merged.len());
    for c in merged {
        let tracks: Option<Vec<Track>> = c
            .tracks
            .iter()
            .map(|(row, j)| {
                let key = row.key.extend(*j);
                posteriors[&key].as_ref().map(|d| Track {
                    label: row.label,
                    key,
                    density: d.clone(),
                })
            })
            .collect();
        match tracks {
            Some(tracks) => components.push(GlmbComponent::new(tracks, c.log_weight)?),
            None => diagnostics.dropped_children += 1,
        }
    }
    if diagnostics.dropped_children > 0 {
        log::debug!("scan {scan}: dropped {} degenerate children", diagnostics.dropped_children);
    }

    let density = if components.is_empty() {
        log::warn!("scan {scan}: no child survived, resetting to the empty density");
        diagnostics.degenerate = true;
        GlmbDensity::empty(scan)
    } else {
        GlmbDensity::from_components(components, scan)?
    };
    diagnostics.children = density.len();
    diagnostics.ess = density.effective_size();
    Ok(StepOutput { density, diagnostics })
}

#[cfg(test)]
mod tests;

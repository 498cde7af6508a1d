//! Run configuration: a TOML file whose keys mirror the command-line flags.
//! Flags override file values.

use std::path::{Path, PathBuf};

use glmb::densities::{Backend, SmcKit};
use glmb::filter::{FilterConfig, GibbsInit, Solver, Tempering};
use glmb::scenarios::{linear_scenario, nonlinear_scenario, OspaParams, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioChoice {
    Linear,
    Nonlinear,
    /// Read from `scenario_file`.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Gibbs,
    Murty,
}

impl From<SolverChoice> for Solver {
    fn from(s: SolverChoice) -> Self {
        match s {
            SolverChoice::Gibbs => Solver::Gibbs,
            SolverChoice::Murty => Solver::Murty,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    /// Gaussian mixtures (linear-Gaussian scenarios only).
    Gm,
    /// Particles.
    Smc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitChoice {
    Zeros,
    Optimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioChoice,
    pub scenario_file: Option<PathBuf>,
    pub solver: SolverChoice,
    pub h_max: usize,
    pub mc_trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub backend: BackendChoice,
    /// Particles per track for the `smc` backend.
    pub particles: usize,
    /// Multiplies the scenario's clutter intensity.
    pub clutter_scale: f64,
    /// Truncate the scenario to this many scans.
    pub scans: Option<u32>,
    pub gibbs_init: InitChoice,
    /// Overrides the scenario's sampling tempering.
    pub tempering: Option<Tempering>,
    pub ospa: OspaParams,
    /// Also write the final GLMB density as JSON.
    pub write_density: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioChoice::Linear,
            scenario_file: None,
            solver: SolverChoice::Gibbs,
            h_max: 1000,
            mc_trials: 1,
            seed: 0,
            output_dir: PathBuf::from("glmb-out"),
            backend: BackendChoice::Gm,
            particles: 1000,
            clutter_scale: 1.0,
            scans: None,
            gibbs_init: InitChoice::Zeros,
            tempering: None,
            ospa: OspaParams::default(),
            write_density: true,
        }
    }
}

/// Scenario plus filter settings, ready to run.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub spec: ScenarioSpec,
    pub filter: FilterConfig,
}

pub fn read_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

pub fn read_scenario(path: &Path) -> CliResult<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read scenario {}: {e}", path.display())))?;
    let spec: ScenarioSpec =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid scenario {}: {e}", path.display())))?;
    spec.validate()
        .map_err(|e| CliError::Usage(format!("invalid scenario {}: {e}", path.display())))?;
    Ok(spec)
}

impl RunConfig {
    pub fn resolve(&self) -> CliResult<ResolvedRun> {
        let usage = |m: String| CliError::Usage(m);
        if self.mc_trials == 0 {
            return Err(usage("mc_trials must be at least 1".into()));
        }
        if self.h_max == 0 {
            return Err(usage("h_max must be at least 1".into()));
        }
        if !(self.clutter_scale > 0.0) {
            return Err(usage(format!("clutter_scale must be positive, got {}", self.clutter_scale)));
        }
        let mut spec = match self.scenario {
            ScenarioChoice::Linear => linear_scenario(),
            ScenarioChoice::Nonlinear => nonlinear_scenario(),
            ScenarioChoice::Custom => {
                let path = self
                    .scenario_file
                    .as_ref()
                    .ok_or_else(|| usage("scenario = \"custom\" needs scenario_file".into()))?;
                read_scenario(path)?
            }
        };
        if self.clutter_scale != 1.0 {
            spec = spec.with_clutter_scale(self.clutter_scale);
        }
        if let Some(n) = self.scans {
            if n == 0 {
                return Err(usage("scans must be at least 1".into()));
            }
            spec.duration = spec.duration.min(n);
        }
        let backend = match self.backend {
            BackendChoice::Gm => {
                let (motion, sensor) = spec.models().map_err(|e| usage(e.to_string()))?;
                let linear = motion.linear_gaussian().is_some()
                    && sensor.observation_matrix().is_some()
                    && motion.constant_survival().is_some()
                    && sensor.constant_detection().is_some();
                if !linear {
                    return Err(usage(format!(
                        "the gm backend needs a linear-Gaussian scenario; use --backend smc for {}",
                        spec.name
                    )));
                }
                Backend::Gaussian
            }
            BackendChoice::Smc => Backend::Particles(SmcKit::new(self.particles).map_err(|e| usage(e.to_string()))?),
        };
        let mut filter = FilterConfig::new(self.h_max, self.solver.into(), self.seed);
        filter.backend = backend;
        filter.tempering = self.tempering.unwrap_or(spec.tempering);
        filter.gibbs_init = match self.gibbs_init {
            InitChoice::Zeros => GibbsInit::Zeros,
            InitChoice::Optimal => GibbsInit::Optimal,
        };
        filter.validate().map_err(|e| usage(e.to_string()))?;
        if !(self.ospa.cutoff > 0.0 && self.ospa.order >= 1.0) {
            return Err(usage("ospa needs cutoff > 0 and order ≥ 1".into()));
        }
        Ok(ResolvedRun { spec, filter })
    }
}

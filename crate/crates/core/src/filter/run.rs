use serde::{Deserialize, Serialize};

use super::{joint_step, FilterConfig, StepDiagnostics};
use crate::error::Result;
use crate::glmb::{GlmbDensity, Label};
use crate::models::{MeasurementModel, MotionModel};

/// Filter output for one scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanEstimate {
    pub scan: u32,
    /// Labels and means of the MAP-cardinality component.
    pub tracks: Vec<(Label, Vec<f64>)>,
    pub expected_cardinality: f64,
    pub diagnostics: StepDiagnostics,
}

/// Runs the recursion from the empty density over `measurements[k]` for
/// scans `k + 1`. Returns the per-scan estimates and the final density.
pub fn run_filter(
    measurements: &[Vec<Vec<f64>>],
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    config: &FilterConfig,
) -> Result<(Vec<ScanEstimate>, GlmbDensity)> {
    let mut density = GlmbDensity::empty(0);
    let mut out = Vec::with_capacity(measurements.len());
    for z in measurements {
        let step = joint_step(&density, z, motion, sensor, config)?;
        density = step.density;
        out.push(ScanEstimate {
            scan: density.scan(),
            tracks: density.estimate_state()?,
            expected_cardinality: density.expected_cardinality(),
            diagnostics: step.diagnostics,
        });
    }
    Ok((out, density))
}

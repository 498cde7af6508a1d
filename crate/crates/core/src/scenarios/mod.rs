//! Reference scenarios: model parameters, scripted ground truth and a
//! measurement simulator.
//!
//! Ground-truth trajectories are noise-free propagations of scripted initial
//! states. An object listed with `birth = b, death = d` exists at scans
//! `b..d`.

mod ospa;

pub use ospa::{ospa, Ospa, OspaParams};

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{GlmbError, Result};
use crate::filter::Tempering;
use crate::glmb::Label;
use crate::models::{
    BirthSite, CoordinatedTurnMotion, LinearGaussianMotion, LinearGaussianSensor, MeasurementModel, MotionModel,
    ObservationRegion, RangeBearingSensor,
};
use crate::rng::{self, purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub label: Label,
    pub birth: u32,
    pub death: u32,
    pub initial_state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    /// Constant velocity with position measurements.
    Linear {
        period: f64,
        sigma_accel: f64,
        survival: f64,
        births: Vec<BirthSite>,
        sigma_measurement: f64,
        detection: f64,
        clutter_density: f64,
        region: ObservationRegion,
    },
    /// Coordinated turn with bearing-range measurements.
    Nonlinear {
        period: f64,
        sigma_accel: f64,
        sigma_turn: f64,
        survival: f64,
        births: Vec<BirthSite>,
        sigma_bearing: f64,
        sigma_range: f64,
        detection_peak: f64,
        detection_edge: f64,
        radius: f64,
        clutter_density: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub duration: u32,
    pub model: ModelSpec,
    pub truth: Vec<TruthObject>,
    /// Sampling-only tempering recommended for this scenario.
    pub tempering: Tempering,
}

pub type Models = (Box<dyn MotionModel>, Box<dyn MeasurementModel>);

impl ScenarioSpec {
    pub fn models(&self) -> Result<Models> {
        Ok(match &self.model {
            ModelSpec::Linear {
                period,
                sigma_accel,
                survival,
                births,
                sigma_measurement,
                detection,
                clutter_density,
                region,
            } => (
                Box::new(LinearGaussianMotion::constant_velocity(*period, *sigma_accel, *survival, births.clone())?),
                Box::new(LinearGaussianSensor::position(*sigma_measurement, *detection, *clutter_density, region.clone())?),
            ),
            ModelSpec::Nonlinear {
                period,
                sigma_accel,
                sigma_turn,
                survival,
                births,
                sigma_bearing,
                sigma_range,
                detection_peak,
                detection_edge,
                radius,
                clutter_density,
            } => (
                Box::new(CoordinatedTurnMotion::new(*period, *sigma_accel, *sigma_turn, *survival, births.clone())?),
                Box::new(RangeBearingSensor::new(
                    *sigma_bearing,
                    *sigma_range,
                    *detection_peak,
                    *detection_edge,
                    *radius,
                    *clutter_density,
                )?),
            ),
        })
    }

    /// Same scenario with the clutter intensity multiplied by `factor`.
    pub fn with_clutter_scale(mut self, factor: f64) -> Self {
        match &mut self.model {
            ModelSpec::Linear { clutter_density, .. } | ModelSpec::Nonlinear { clutter_density, .. } => {
                *clutter_density *= factor
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (motion, _) = self.models()?;
        for t in &self.truth {
            if t.death <= t.birth {
                return Err(GlmbError::InvalidArgument(format!("object {} dies before it is born", t.label)));
            }
            if t.initial_state.len() != motion.state_dim() {
                return Err(GlmbError::DimensionMismatch(format!(
                    "object {} has a {}-dimensional state, model uses {}",
                    t.label,
                    t.initial_state.len(),
                    motion.state_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Constant-velocity scenario: three birth sites, up to ten objects with
/// staggered births, deaths and one crossing, 66 false alarms per scan.
pub fn linear_scenario() -> ScenarioSpec {
    let site_means = [[0.0, 0.0, 100.0, 0.0], [-100.0, 0.0, -100.0, 0.0], [100.0, 0.0, -100.0, 0.0]];
    let births = site_means
        .iter()
        .map(|m| BirthSite {
            existence: 0.04,
            mean: m.to_vec(),
            std: vec![10.0; 4],
        })
        .collect();
    // (birth, death, site, velocity)
    let script: [(u32, u32, usize, [f64; 2]); 10] = [
        (1, 71, 0, [0.0, 10.0]),
        (1, 101, 1, [-8.0, -5.0]),
        (1, 81, 2, [6.0, -8.0]),
        (20, 101, 1, [7.0, 6.0]),
        (20, 101, 2, [-7.0, 6.0]),
        (40, 101, 0, [-10.0, 3.0]),
        (40, 101, 2, [2.0, -9.0]),
        (60, 101, 1, [-5.0, 9.0]),
        (60, 101, 2, [5.0, 9.0]),
        (80, 101, 0, [0.0, -9.0]),
    ];
    let truth = script
        .iter()
        .map(|&(birth, death, site, v)| {
            let m = site_means[site];
            TruthObject {
                label: Label::new(birth, site as u32 + 1),
                birth,
                death,
                initial_state: vec![m[0], v[0], m[2], v[1]],
            }
        })
        .collect();
    ScenarioSpec {
        name: "linear".into(),
        duration: 100,
        model: ModelSpec::Linear {
            period: 1.0,
            sigma_accel: 5.0,
            survival: 0.99,
            births,
            sigma_measurement: 10.0,
            detection: 0.88,
            clutter_density: 1.65e-5,
            region: ObservationRegion {
                lower: vec![-1000.0, -1000.0],
                upper: vec![1000.0, 1000.0],
            },
        },
        truth,
        tempering: Tempering {
            birth_factor: 10.0,
            survival_factor: 0.95,
            detection_factor: 0.95,
        },
    }
}

/// Coordinated-turn scenario with bearing-range measurements from a sensor
/// at the origin; bearings are measured from the +y axis towards +x.
pub fn nonlinear_scenario() -> ScenarioSpec {
    let turn_std = 6.0 * PI / 180.0;
    let births = [
        (0.02, [-1500.0, 0.0, 250.0, 0.0, 0.0]),
        (0.02, [-250.0, 0.0, 1000.0, 0.0, 0.0]),
        (0.03, [250.0, 0.0, 750.0, 0.0, 0.0]),
        (0.03, [1000.0, 0.0, 1500.0, 0.0, 0.0]),
    ]
    .iter()
    .map(|(r, m)| BirthSite {
        existence: *r,
        mean: m.to_vec(),
        std: vec![50.0, 50.0, 50.0, 50.0, turn_std],
    })
    .collect();
    let w = 2.0 * PI / 180.0;
    let script: [(u32, u32, [f64; 5]); 10] = [
        (1, 101, [1000.0 + 3.8676, -10.0, 1500.0 - 11.7457, -10.0, w / 8.0]),
        (10, 101, [-250.0 - 5.8857, 20.0, 1000.0 + 11.4102, 3.0, -w / 3.0]),
        (10, 101, [-1500.0 - 7.3806, 11.0, 250.0 + 6.7993, 10.0, -w / 2.0]),
        (10, 66, [-1500.0, 43.0, 250.0, 0.0, 0.0]),
        (20, 80, [250.0 - 3.8676, 11.0, 750.0 - 11.0747, 5.0, w / 4.0]),
        (40, 101, [-250.0 + 7.3806, -12.0, 1000.0 - 6.7993, -12.0, w / 2.0]),
        (40, 101, [1000.0, 0.0, 1500.0, -10.0, w / 4.0]),
        (40, 80, [250.0, -50.0, 750.0, 0.0, -w / 4.0]),
        (60, 101, [1000.0, -50.0, 1500.0, 0.0, -w / 4.0]),
        (60, 101, [250.0, -40.0, 750.0, 25.0, w / 4.0]),
    ];
    let mut truth: Vec<TruthObject> = Vec::new();
    for (birth, death, state) in script {
        let index = truth.iter().filter(|t| t.birth == birth).count() as u32 + 1;
        truth.push(TruthObject {
            label: Label::new(birth, index),
            birth,
            death,
            initial_state: state.to_vec(),
        });
    }
    ScenarioSpec {
        name: "nonlinear".into(),
        duration: 100,
        model: ModelSpec::Nonlinear {
            period: 1.0,
            sigma_accel: 15.0,
            sigma_turn: PI / 180.0,
            survival: 0.99,
            births,
            sigma_bearing: PI / 180.0,
            sigma_range: 5.0,
            detection_peak: 0.95,
            detection_edge: 0.88,
            radius: 2000.0,
            clutter_density: 1.6e-2,
        },
        truth,
        tempering: Tempering {
            birth_factor: 20.0,
            survival_factor: 0.95,
            detection_factor: 0.95,
        },
    }
}

/// Ground truth and measurements, indexed by `scan − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub truth: Vec<Vec<(Label, Vec<f64>)>>,
    pub measurements: Vec<Vec<Vec<f64>>>,
    /// Source object of each measurement, `None` for clutter.
    pub origins: Vec<Vec<Option<Label>>>,
}

impl Simulation {
    pub fn scans(&self) -> usize {
        self.truth.len()
    }
}

/// Noise-free truth states per scan.
pub fn truth_states(spec: &ScenarioSpec, motion: &dyn MotionModel) -> Vec<Vec<(Label, Vec<f64>)>> {
    let mut per_scan = vec![Vec::new(); spec.duration as usize];
    for obj in &spec.truth {
        let mut x = obj.initial_state.clone();
        let mut next = vec![0.0; x.len()];
        for k in obj.birth..obj.death.min(spec.duration + 1) {
            if k > obj.birth {
                motion.transition_mean(&x, &mut next);
                std::mem::swap(&mut x, &mut next);
            }
            if k >= 1 {
                per_scan[k as usize - 1].push((obj.label, x.clone()));
            }
        }
    }
    per_scan
}

pub fn simulate(spec: &ScenarioSpec, seed: u64) -> Result<Simulation> {
    spec.validate()?;
    let (motion, sensor) = spec.models()?;
    let truth = truth_states(spec, motion.as_ref());
    let clutter = Poisson::new(sensor.expected_clutter())
        .map_err(|e| GlmbError::InvalidArgument(format!("clutter rate: {e}")))?;
    let mut measurements = Vec::with_capacity(truth.len());
    let mut origins = Vec::with_capacity(truth.len());
    for (k, alive) in truth.iter().enumerate() {
        let mut rng = rng::stream(seed, &[purpose::MEASURE, k as u64 + 1]);
        let mut scan: Vec<(Option<Label>, Vec<f64>)> = Vec::new();
        for (label, x) in alive {
            if rng.random::<f64>() < sensor.detection_prob(x, label) {
                scan.push((Some(*label), sensor.sample_measurement(x, &mut rng)));
            }
        }
        let n_clutter = clutter.sample(&mut rng) as usize;
        for _ in 0..n_clutter {
            scan.push((None, sensor.region().sample_uniform(&mut rng)));
        }
        scan.shuffle(&mut rng);
        let (o, z): (Vec<_>, Vec<_>) = scan.into_iter().unzip();
        origins.push(o);
        measurements.push(z);
    }
    Ok(Simulation {
        truth,
        measurements,
        origins,
    })
}

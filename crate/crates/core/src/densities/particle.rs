//! Particle track densities for nonlinear models and state-dependent
//! survival/detection.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{GlmbError, Result};
use crate::glmb::Label;
use crate::models::{MeasurementModel, MotionModel};

/// Weighted particles, states stored row-major (`n × dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    dim: usize,
    pub weights: Vec<f64>,
    pub states: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Resampler {
    #[default]
    Systematic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmcKit {
    pub particles_per_track: usize,
    pub resampler: Resampler,
}

impl SmcKit {
    pub const MIN_PARTICLES: usize = 100;

    pub fn new(particles_per_track: usize) -> Result<Self> {
        if particles_per_track < Self::MIN_PARTICLES {
            return Err(GlmbError::InvalidArgument(format!(
                "at least {} particles per track required, got {particles_per_track}",
                Self::MIN_PARTICLES
            )));
        }
        Ok(Self {
            particles_per_track,
            resampler: Resampler::Systematic,
        })
    }
}

impl ParticleSet {
    pub fn new(dim: usize, weights: Vec<f64>, states: Vec<f64>) -> Result<Self> {
        if dim == 0 || states.len() != weights.len() * dim {
            return Err(GlmbError::DimensionMismatch(format!(
                "{} weights, {} state values, dimension {dim}",
                weights.len(),
                states.len()
            )));
        }
        Ok(Self { dim, weights, states })
    }

    /// `n` equally weighted draws from `N(mean, cov)`.
    pub fn from_gaussian(
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let dim = mean.len();
        let l = super::gaussian::robust_cholesky(cov)?.l();
        let mut states = Vec::with_capacity(n * dim);
        let mut noise = DVector::zeros(dim);
        for _ in 0..n {
            for v in noise.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = mean + &l * &noise;
            states.extend(x.iter());
        }
        Ok(Self {
            dim,
            weights: vec![1.0 / n as f64; n],
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (i, w) in self.weights.iter().enumerate() {
            for (acc, v) in m.iter_mut().zip(self.state(i)) {
                *acc += w * v;
            }
        }
        m
    }

    pub fn effective_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Systematic resampling to `n` equally weighted particles.
    pub fn resample(&self, n: usize, rng: &mut dyn RngCore) -> Self {
        let mut states = Vec::with_capacity(n * self.dim);
        let step = 1.0 / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cum = self.weights[0];
        let mut i = 0;
        for _ in 0..n {
            while u > cum && i + 1 < self.len() {
                i += 1;
                cum += self.weights[i];
            }
            states.extend_from_slice(self.state(i));
            u += step;
        }
        Self {
            dim: self.dim,
            weights: vec![step; n],
            states,
        }
    }
}

/// `P̄_S = Σ w P_S(x)`, then survival-weighted particles pushed through the
/// transition.
pub fn smc_predict(
    density: &ParticleSet,
    motion: &dyn MotionModel,
    label: &Label,
    rng: &mut dyn RngCore,
) -> Result<(f64, ParticleSet)> {
    if density.dim != motion.state_dim() {
        return Err(GlmbError::DimensionMismatch(format!(
            "particle dimension {} vs model {}",
            density.dim,
            motion.state_dim()
        )));
    }
    let survival: Vec<f64> = (0..density.len())
        .map(|i| motion.survival_prob(density.state(i), label))
        .collect();
    let ps_bar: f64 = density.weights.iter().zip(&survival).map(|(w, p)| w * p).sum();
    if !(ps_bar > 0.0) {
        return Err(GlmbError::ModelContract("expected survival probability is zero".into()));
    }
    let weights = density
        .weights
        .iter()
        .zip(&survival)
        .map(|(w, p)| w * p / ps_bar)
        .collect();
    let mut states = vec![0.0; density.states.len()];
    for (i, out) in states.chunks_mut(density.dim).enumerate() {
        motion.sample_transition(density.state(i), rng, out);
    }
    Ok((
        ps_bar,
        ParticleSet {
            dim: density.dim,
            weights,
            states,
        },
    ))
}

/// Per-particle predicted measurements and detection probabilities.
struct MeasurementCache {
    zdim: usize,
    predicted: Vec<f64>,
    detection: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// Gate half-width in measurement standard deviations. Measurements further
/// than this from every particle's prediction contribute below `e^{-32}` of the
/// peak likelihood and are treated as zero.
const GATE_SIGMAS: f64 = 8.0;

impl MeasurementCache {
    fn new(density: &ParticleSet, sensor: &dyn MeasurementModel, label: &Label) -> Self {
        let zdim = sensor.measurement_dim();
        let n = density.len();
        let mut predicted = vec![0.0; n * zdim];
        let mut detection = Vec::with_capacity(n);
        let mut lower = vec![f64::INFINITY; zdim];
        let mut upper = vec![f64::NEG_INFINITY; zdim];
        for (i, out) in predicted.chunks_mut(zdim).enumerate() {
            let x = density.state(i);
            sensor.predict_measurement(x, out);
            detection.push(sensor.detection_prob(x, label));
            for d in 0..zdim {
                lower[d] = lower[d].min(out[d]);
                upper[d] = upper[d].max(out[d]);
            }
        }
        for d in 0..zdim {
            let half = GATE_SIGMAS * sensor.noise().std(d);
            lower[d] -= half;
            upper[d] += half;
        }
        Self {
            zdim,
            predicted,
            detection,
            lower,
            upper,
        }
    }

    fn in_gate(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// `ψ(z, x_p)·κ(z)` for every particle.
    fn detection_terms(&self, sensor: &dyn MeasurementModel, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let mut res = [0.0; 8];
        for (p, zhat) in self.predicted.chunks(self.zdim).enumerate() {
            sensor.residual(z, zhat, &mut res[..self.zdim]);
            out.push(self.detection[p] * sensor.noise().density(&res[..self.zdim]));
        }
    }
}

/// `ψ̄` for every measurement index (`0` = missed).
pub fn smc_psi_row(
    density: &ParticleSet,
    measurements: &[Vec<f64>],
    sensor: &dyn MeasurementModel,
    label: &Label,
) -> Vec<f64> {
    let cache = MeasurementCache::new(density, sensor, label);
    let mut row = Vec::with_capacity(measurements.len() + 1);
    row.push(
        density
            .weights
            .iter()
            .zip(&cache.detection)
            .map(|(w, pd)| w * (1.0 - pd))
            .sum(),
    );
    let mut terms = Vec::with_capacity(density.len());
    for z in measurements {
        if !cache.in_gate(z) {
            row.push(0.0);
            continue;
        }
        cache.detection_terms(sensor, z, &mut terms);
        let s: f64 = density.weights.iter().zip(&terms).map(|(w, t)| w * t).sum();
        row.push(s / sensor.clutter_intensity(z));
    }
    row
}

/// `ψ̄` and the posterior particle set for measurement index `j` (`0` = missed).
/// Resamples (systematic) when the posterior effective size drops below half
/// the particle count.
pub fn smc_update(
    density: &ParticleSet,
    j: usize,
    measurements: &[Vec<f64>],
    sensor: &dyn MeasurementModel,
    label: &Label,
    rng: &mut dyn RngCore,
) -> Result<(f64, ParticleSet)> {
    if j > measurements.len() {
        return Err(GlmbError::IndexOutOfRange {
            index: j as i64,
            max: measurements.len(),
        });
    }
    let n = density.len();
    let psi: Vec<f64> = if j == 0 {
        (0..n)
            .map(|i| 1.0 - sensor.detection_prob(density.state(i), label))
            .collect()
    } else {
        let z = &measurements[j - 1];
        let kappa = sensor.clutter_intensity(z);
        (0..n)
            .map(|i| {
                let x = density.state(i);
                sensor.detection_prob(x, label) * sensor.likelihood(z, x) / kappa
            })
            .collect()
    };
    let unnorm: Vec<f64> = density.weights.iter().zip(&psi).map(|(w, p)| w * p).collect();
    let psi_bar: f64 = unnorm.iter().sum();
    if !(psi_bar > 0.0) || !psi_bar.is_finite() {
        return Err(GlmbError::DegenerateLikelihood);
    }
    let post = ParticleSet {
        dim: density.dim,
        weights: unnorm.iter().map(|w| w / psi_bar).collect(),
        states: density.states.clone(),
    };
    let post = if post.effective_size() < 0.5 * n as f64 {
        post.resample(n, rng)
    } else {
        post
    };
    Ok((psi_bar, post))
}

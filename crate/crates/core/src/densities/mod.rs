//! Single-track integrals behind the filter: expected survival `P̄_S`, the
//! predicted density `p̄₊`, the per-measurement `ψ̄` row and the Bayes update.
//!
//! Gaussian mixtures need a linear-Gaussian transition and observation with
//! constant `P_S`/`P_D`; particle sets work with any model.

mod gaussian;
mod particle;

pub use gaussian::{gm_predict, gm_psi_bar, GaussianMixture, LinearGaussianKit, MixtureManagement};
pub use particle::{smc_predict, smc_psi_row, smc_update, ParticleSet, Resampler, SmcKit};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{GlmbError, Result};
use crate::glmb::Label;
use crate::models::{MeasurementModel, MotionModel};

#[derive(Clone, Debug, PartialEq)]
pub enum TrackDensity {
    Gaussian(GaussianMixture),
    Particles(ParticleSet),
}

impl TrackDensity {
    pub fn mean(&self) -> Vec<f64> {
        match self {
            TrackDensity::Gaussian(g) => g.mean().as_slice().to_vec(),
            TrackDensity::Particles(p) => p.mean(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrackDensity::Gaussian(g) => g.dim(),
            TrackDensity::Particles(p) => p.dim(),
        }
    }
}

/// Representation used for new tracks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    Gaussian,
    Particles(SmcKit),
}

impl Backend {
    /// Birth density in this representation.
    pub fn birth_density(
        &self,
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<TrackDensity> {
        Ok(match self {
            Backend::Gaussian => TrackDensity::Gaussian(GaussianMixture::single(mean.clone(), cov.clone())),
            Backend::Particles(kit) => TrackDensity::Particles(ParticleSet::from_gaussian(
                mean,
                cov,
                kit.particles_per_track,
                rng,
            )?),
        })
    }
}

fn gaussian_requirements(
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
) -> Result<(LinearGaussianKit, f64, f64)> {
    let kit = LinearGaussianKit::from_models(motion, sensor)?;
    let ps = motion.constant_survival().ok_or_else(|| {
        GlmbError::Unsupported("Gaussian mixtures need a constant survival probability".into())
    })?;
    let pd = sensor.constant_detection().ok_or_else(|| {
        GlmbError::Unsupported("Gaussian mixtures need a constant detection probability".into())
    })?;
    Ok((kit, ps, pd))
}

/// `(P̄_S, p̄₊)` for one surviving track.
pub fn predict(
    density: &TrackDensity,
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    label: &Label,
    rng: &mut dyn RngCore,
) -> Result<(f64, TrackDensity)> {
    match density {
        TrackDensity::Gaussian(gm) => {
            let (kit, ps, _) = gaussian_requirements(motion, sensor)?;
            Ok((ps, TrackDensity::Gaussian(gm.predict(&kit)?)))
        }
        TrackDensity::Particles(p) => {
            let (ps, pred) = smc_predict(p, motion, label, rng)?;
            Ok((ps, TrackDensity::Particles(pred)))
        }
    }
}

/// `[ψ̄(0), ψ̄(1), …, ψ̄(M)]` for a predicted track.
pub fn psi_row(
    predicted: &TrackDensity,
    measurements: &[Vec<f64>],
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    label: &Label,
) -> Result<Vec<f64>> {
    match predicted {
        TrackDensity::Gaussian(gm) => {
            let (kit, _, pd) = gaussian_requirements(motion, sensor)?;
            gm.psi_row(measurements, &kit, pd, |z| sensor.clutter_intensity(z))
        }
        TrackDensity::Particles(p) => Ok(smc_psi_row(p, measurements, sensor, label)),
    }
}

/// Posterior `p̄₊ ψ^{(j)} / ψ̄` for measurement index `j` (`0` = missed).
pub fn update(
    predicted: &TrackDensity,
    j: usize,
    measurements: &[Vec<f64>],
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    label: &Label,
    rng: &mut dyn RngCore,
) -> Result<TrackDensity> {
    if j > measurements.len() {
        return Err(GlmbError::IndexOutOfRange {
            index: j as i64,
            max: measurements.len(),
        });
    }
    match predicted {
        TrackDensity::Gaussian(gm) => {
            if j == 0 {
                return Ok(predicted.clone());
            }
            let (kit, _, _) = gaussian_requirements(motion, sensor)?;
            let post = gm.update(&measurements[j - 1], &kit)?;
            Ok(TrackDensity::Gaussian(post.reduce(&MixtureManagement::default())))
        }
        TrackDensity::Particles(p) => {
            let (_, post) = smc_update(p, j, measurements, sensor, label, rng)?;
            Ok(TrackDensity::Particles(post))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearGaussianMotion, LinearGaussianSensor, ObservationRegion};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models() -> (LinearGaussianMotion, LinearGaussianSensor) {
        let motion = LinearGaussianMotion::constant_velocity(1.0, 5.0, 0.99, vec![]).unwrap();
        let sensor = LinearGaussianSensor::position(
            10.0,
            0.88,
            1.65e-5,
            ObservationRegion {
                lower: vec![-1000.0, -1000.0],
                upper: vec![1000.0, 1000.0],
            },
        )
        .unwrap();
        (motion, sensor)
    }

    /// Particle and mixture `ψ̄` agree on a linear-Gaussian problem.
    #[test]
    fn particle_and_mixture_backends_agree() {
        let (motion, sensor) = models();
        let label = Label::new(1, 1);
        let mean = DVector::from_vec(vec![10.0, 2.0, -20.0, 1.0]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 25.0, 100.0, 25.0]));
        let gm = TrackDensity::Gaussian(GaussianMixture::single(mean.clone(), cov.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ps = TrackDensity::Particles(ParticleSet::from_gaussian(&mean, &cov, 100_000, &mut rng).unwrap());
        let (ps_gm, pred_gm) = predict(&gm, &motion, &sensor, &label, &mut rng).unwrap();
        let (ps_pf, pred_pf) = predict(&ps, &motion, &sensor, &label, &mut rng).unwrap();
        assert_eq!(ps_gm, 0.99);
        assert!((ps_pf - 0.99).abs() < 1e-12);
        let zs = vec![vec![15.0, -16.0], vec![-2.0, -30.0], vec![30.0, -5.0]];
        let row_gm = psi_row(&pred_gm, &zs, &motion, &sensor, &label).unwrap();
        let row_pf = psi_row(&pred_pf, &zs, &motion, &sensor, &label).unwrap();
        for (a, b) in row_gm.iter().zip(&row_pf) {
            assert!(((a - b) / a).abs() < 0.02, "{a} vs {b}");
        }
        let post_gm = update(&pred_gm, 1, &zs, &motion, &sensor, &label, &mut rng).unwrap();
        let post_pf = update(&pred_pf, 1, &zs, &motion, &sensor, &label, &mut rng).unwrap();
        for (a, b) in post_gm.mean().iter().zip(post_pf.mean()) {
            assert!((a - b).abs() < 0.5, "{a} vs {b}");
        }
    }

    #[test]
    fn gaussian_backend_rejects_nonlinear_models() {
        let (_, sensor) = models();
        let motion = crate::models::CoordinatedTurnMotion::new(1.0, 15.0, 0.01, 0.99, vec![]).unwrap();
        let gm = TrackDensity::Gaussian(GaussianMixture::single(DVector::zeros(5), DMatrix::identity(5, 5)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            predict(&gm, &motion, &sensor, &Label::new(1, 1), &mut rng),
            Err(GlmbError::Unsupported(_))
        ));
    }
}

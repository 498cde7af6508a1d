//! Untruncated prediction followed by update, term by term. Test oracle only:
//! the cost grows as `2^P (M + 1)^P` per parent.

use std::collections::HashMap;
use std::sync::Arc;

use super::{birth_track, predict_track, FilterConfig, PredictedTrack};
use crate::densities;
use crate::error::{GlmbError, Result};
use crate::glmb::{log_sum_exp, GlmbComponent, GlmbDensity, Label, Track, TrackKey};
use crate::models::{MeasurementModel, MotionModel};
use crate::rng::{self, purpose};

const MAX_TERMS: f64 = 1e5;

/// Every `θ: rows → {0..M}` with no repeated positive value.
fn for_each_map(rows: usize, m: usize, f: &mut dyn FnMut(&[u32])) {
    fn rec(i: usize, current: &mut Vec<u32>, taken: &mut Vec<bool>, f: &mut dyn FnMut(&[u32])) {
        if i == current.len() {
            f(current);
            return;
        }
        for j in 0..taken.len() {
            if j > 0 && taken[j] {
                continue;
            }
            taken[j] = j > 0;
            current[i] = j as u32;
            rec(i + 1, current, taken, f);
            taken[j] = false;
        }
    }
    rec(0, &mut vec![0; rows], &mut vec![false; m + 1], f);
}

pub fn two_stage_oracle(
    density: &GlmbDensity,
    measurements: &[Vec<f64>],
    motion: &dyn MotionModel,
    sensor: &dyn MeasurementModel,
    config: &FilterConfig,
) -> Result<GlmbDensity> {
    let scan = density.scan() + 1;
    let m = measurements.len();
    let seed = config.rng_seed;
    let birth_terms = motion.births(scan);
    let terms: f64 = density
        .components()
        .iter()
        .map(|c| (2.0 * (m as f64 + 1.0)).powi((c.cardinality() + birth_terms.len()) as i32))
        .sum();
    if terms > MAX_TERMS {
        return Err(GlmbError::TooLarge(terms as usize));
    }
    let births: Vec<Arc<PredictedTrack>> = birth_terms
        .iter()
        .map(|t| birth_track(t, &config.backend, motion, sensor, measurements, seed).map(Arc::new))
        .collect::<Result<_>>()?;

    let mut index: HashMap<Vec<(Label, TrackKey)>, usize> = HashMap::new();
    let mut children: Vec<(Vec<(Arc<PredictedTrack>, u32)>, f64)> = Vec::new();
    for c in density.components() {
        let survivors: Vec<Arc<PredictedTrack>> = c
            .tracks()
            .iter()
            .map(|t| predict_track(t, motion, sensor, measurements, scan, seed).map(Arc::new))
            .collect::<Result<_>>()?;
        let candidates: Vec<Arc<PredictedTrack>> = survivors.iter().chain(&births).cloned().collect();
        // Prediction: each survivor lives or dies, each birth appears or not.
        for mask in 0u32..(1 << candidates.len()) {
            let mut log_w = c.log_weight();
            let mut alive = Vec::new();
            for (i, t) in candidates.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    log_w += t.existence.ln();
                    alive.push(t.clone());
                } else {
                    log_w += (1.0 - t.existence).ln();
                }
            }
            alive.sort_by_key(|t| t.label);
            // Update: every association map of the predicted label set.
            for_each_map(alive.len(), m, &mut |theta| {
                let w = log_w
                    + theta
                        .iter()
                        .zip(&alive)
                        .map(|(&j, t)| t.psi[j as usize].ln())
                        .sum::<f64>();
                if w == f64::NEG_INFINITY {
                    return;
                }
                let tracks: Vec<(Arc<PredictedTrack>, u32)> =
                    alive.iter().cloned().zip(theta.iter().copied()).collect();
                let key: Vec<_> = tracks.iter().map(|(t, j)| (t.label, t.key.extend(*j))).collect();
                match index.get(&key) {
                    Some(&k) => children[k].1 = log_sum_exp([children[k].1, w]),
                    None => {
                        index.insert(key, children.len());
                        children.push((tracks, w));
                    }
                }
            });
        }
    }

    let mut components = Vec::with_capacity(children.len());
    for (tracks, w) in children {
        let tracks = tracks
            .into_iter()
            .map(|(t, j)| {
                let key = t.key.extend(j);
                let mut rng = rng::stream(seed, &[purpose::UPDATE, u64::from(scan), key.0]);
                let post = densities::update(&t.density, j as usize, measurements, motion, sensor, &t.label, &mut rng)?;
                Ok(Track {
                    label: t.label,
                    key,
                    density: Arc::new(post),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        components.push(GlmbComponent::new(tracks, w)?);
    }
    GlmbDensity::from_components(components, scan)
}

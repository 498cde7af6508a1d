use rand::{Rng, RngCore};

use super::{AssignmentVector, AssociationProblem};
use crate::error::{GlmbError, Result};
use crate::rng;

/// Normalized conditional of `γ_n` given the other entries of `gamma`
/// (entry `n` itself is ignored). Index `k` holds the mass of `j = k − 1`.
pub fn gibbs_conditional(problem: &AssociationProblem, n: usize, gamma: &AssignmentVector) -> Result<Vec<f64>> {
    if n >= problem.rows() {
        return Err(GlmbError::IndexOutOfRange {
            index: n as i64,
            max: problem.rows().saturating_sub(1),
        });
    }
    let mut others = gamma.clone();
    others.0[n] = -1;
    others.check(problem)?;
    let mut sampler = GibbsSampler::new(problem);
    let total = sampler.mask_row(n, &gamma.0);
    Ok(sampler.masked.iter().map(|v| v / total).collect())
}

/// Systematic-scan sampler over the masked conditionals. Each coordinate
/// update scans the other entries for every measurement column, so a full
/// sweep costs `O(P²M)`.
pub struct GibbsSampler<'a> {
    problem: &'a AssociationProblem,
    masked: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(problem: &'a AssociationProblem) -> Self {
        Self {
            problem,
            masked: vec![0.0; problem.width()],
        }
    }

    /// Writes the masked row `n` into `self.masked` and returns its sum.
    fn mask_row(&mut self, n: usize, gamma: &[i32]) -> f64 {
        let row = self.problem.row(n);
        let (before, rest) = gamma.split_at(n);
        let after = &rest[1..];
        self.masked[..2].copy_from_slice(&row[..2]);
        for (k, (out, &eta)) in self.masked[2..].iter_mut().zip(&row[2..]).enumerate() {
            let j = k as i32 + 1;
            let taken = before.contains(&j) || after.contains(&j);
            *out = if taken { 0.0 } else { eta };
        }
        lane_sum(&self.masked)
    }

    /// One pass over `n = 1..P`, updating `gamma` in place.
    pub fn sweep(&mut self, gamma: &mut [i32], rng: &mut dyn RngCore) {
        for n in 0..gamma.len() {
            let total = self.mask_row(n, gamma);
            gamma[n] = categorical(&self.masked, total, rng) as i32 - 1;
        }
    }
}

/// Sum over four independent lanes, so the adds do not form one serial chain.
fn lane_sum(values: &[f64]) -> f64 {
    let mut lanes = [0.0; 4];
    let mut chunks = values.chunks_exact(4);
    for c in &mut chunks {
        for (l, v) in lanes.iter_mut().zip(c) {
            *l += v;
        }
    }
    let tail: f64 = chunks.remainder().iter().sum();
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

/// Linear CDF scan, skipping whole blocks whose mass lies below the draw.
fn categorical(mass: &[f64], total: f64, rng: &mut dyn RngCore) -> usize {
    const BLOCK: usize = 8;
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (b, block) in mass.chunks(BLOCK).enumerate() {
        let s = lane_sum(block);
        if u >= s {
            u -= s;
            if let Some(k) = block.iter().rposition(|&m| m > 0.0) {
                last = b * BLOCK + k;
            }
            continue;
        }
        for (k, &m) in block.iter().enumerate() {
            if m > 0.0 {
                if u < m {
                    return b * BLOCK + k;
                }
                u -= m;
                last = b * BLOCK + k;
            }
        }
    }
    last
}

pub fn gibbs_sample_with(
    problem: &AssociationProblem,
    init: &AssignmentVector,
    t: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<AssignmentVector>> {
    if t < 1 {
        return Err(GlmbError::InvalidArgument("Gibbs sample count must be at least 1".into()));
    }
    init.check(problem)?;
    let mut sampler = GibbsSampler::new(problem);
    let mut gamma = init.0.clone();
    let mut out = Vec::with_capacity(t);
    out.push(init.clone());
    for _ in 1..t {
        sampler.sweep(&mut gamma, rng);
        out.push(AssignmentVector(gamma.clone()));
    }
    Ok(out)
}

/// `T` consecutive chain states starting from (and including) `init`.
pub fn gibbs_sample(
    problem: &AssociationProblem,
    init: &AssignmentVector,
    t: usize,
    seed: u64,
) -> Result<Vec<AssignmentVector>> {
    let mut rng = rng::stream(seed, &[rng::purpose::GIBBS]);
    gibbs_sample_with(problem, init, t, &mut rng)
}

//! Gaussian-mixture track densities under linear-Gaussian models.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{GlmbError, Result};
use crate::glmb::log_sum_exp;
use crate::models::{MeasurementModel, MotionModel};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

/// Matrices of a linear-Gaussian motion/measurement pair.
#[derive(Clone, Debug)]
pub struct LinearGaussianKit {
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearGaussianKit {
    pub fn new(f: DMatrix<f64>, q: DMatrix<f64>, h: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let n = f.nrows();
        let m = h.nrows();
        if f.ncols() != n || q.shape() != (n, n) || h.ncols() != n || r.shape() != (m, m) {
            return Err(GlmbError::DimensionMismatch(format!(
                "F {:?}, Q {:?}, H {:?}, R {:?}",
                f.shape(),
                q.shape(),
                h.shape(),
                r.shape()
            )));
        }
        Ok(Self { f, q, h, r })
    }

    pub fn from_models(motion: &dyn MotionModel, sensor: &dyn MeasurementModel) -> Result<Self> {
        let (f, q) = motion.linear_gaussian().ok_or_else(|| {
            GlmbError::Unsupported("Gaussian mixtures need a linear-Gaussian transition".into())
        })?;
        let h = sensor.observation_matrix().ok_or_else(|| {
            GlmbError::Unsupported("Gaussian mixtures need a linear observation".into())
        })?;
        Self::new(f.clone(), q.clone(), h.clone(), sensor.noise().covariance().clone())
    }
}

/// Mixture reduction thresholds.
#[derive(Clone, Copy, Debug)]
pub struct MixtureManagement {
    pub prune_below: f64,
    /// Squared Mahalanobis distance under which components are merged.
    pub merge_within: f64,
    pub max_components: usize,
}

impl Default for MixtureManagement {
    fn default() -> Self {
        Self {
            prune_below: 1e-5,
            merge_within: 4.0,
            max_components: 100,
        }
    }
}

/// Cholesky factorization, retried once with `1e-9·tr(S)/d` added to the diagonal.
pub(crate) fn robust_cholesky(s: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = s.clone().cholesky() {
        return Ok(c);
    }
    let d = s.nrows();
    let jitter = 1e-9 * s.trace() / d as f64;
    let mut j = s.clone();
    for i in 0..d {
        j[(i, i)] += jitter.max(f64::MIN_POSITIVE);
    }
    j.cholesky()
        .ok_or_else(|| GlmbError::Numerical("innovation covariance is not positive definite".into()))
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

/// Per-component innovation quantities for one mixture.
struct Innovation {
    predicted: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Innovation {
    fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, kit: &LinearGaussianKit) -> Result<Self> {
        let mut s = &kit.h * cov * kit.h.transpose() + &kit.r;
        symmetrize(&mut s);
        let chol = robust_cholesky(&s)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            predicted: &kit.h * mean,
            log_norm: -0.5 * (s.nrows() as f64 * (2.0 * PI).ln() + log_det),
            chol,
        })
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        let nu = z - &self.predicted;
        let w = self.chol.l_dirty().solve_lower_triangular(&nu).unwrap_or(nu);
        self.log_norm - 0.5 * w.norm_squared()
    }
}

impl GaussianMixture {
    pub fn single(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self {
            weights: vec![1.0],
            means: vec![mean],
            covariances: vec![covariance],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for (w, m) in self.weights.iter().zip(&self.means) {
            acc += m * *w;
        }
        acc
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let d = self.dim();
        let mut acc = DMatrix::zeros(d, d);
        for ((w, m), p) in self.weights.iter().zip(&self.means).zip(&self.covariances) {
            let dm = m - &mean;
            acc += (p + &dm * dm.transpose()) * *w;
        }
        acc
    }

    /// Each `(w, m, P) ↦ (w, F m, F P Fᵀ + Q)`.
    pub fn predict(&self, kit: &LinearGaussianKit) -> Result<Self> {
        if self.dim() != kit.f.ncols() {
            return Err(GlmbError::DimensionMismatch(format!(
                "mixture dimension {} vs transition {:?}",
                self.dim(),
                kit.f.shape()
            )));
        }
        let ft = kit.f.transpose();
        Ok(Self {
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| &kit.f * m).collect(),
            covariances: self
                .covariances
                .iter()
                .map(|p| {
                    let mut c = &kit.f * p * &ft + &kit.q;
                    symmetrize(&mut c);
                    c
                })
                .collect(),
        })
    }

    /// `ψ̄` for every measurement index: entry 0 is the miss `1 - P_D`, entry
    /// `j ≥ 1` is `(P_D / κ(z_j)) Σ_c w_c N(z_j; H m_c, H P_c Hᵀ + R)`.
    pub fn psi_row(
        &self,
        measurements: &[Vec<f64>],
        kit: &LinearGaussianKit,
        detection: f64,
        clutter: impl Fn(&[f64]) -> f64,
    ) -> Result<Vec<f64>> {
        let innovations = self
            .means
            .iter()
            .zip(&self.covariances)
            .map(|(m, p)| Innovation::new(m, p, kit))
            .collect::<Result<Vec<_>>>()?;
        let mut row = Vec::with_capacity(measurements.len() + 1);
        row.push(1.0 - detection);
        for z in measurements {
            let zv = DVector::from_column_slice(z);
            let lik: f64 = innovations
                .iter()
                .zip(&self.weights)
                .map(|(inn, w)| w * inn.log_density(&zv).exp())
                .sum();
            row.push(detection * lik / clutter(z));
        }
        Ok(row)
    }

    /// Kalman update of every component with `z`, reweighted by the predicted
    /// measurement likelihood and renormalized.
    pub fn update(&self, z: &[f64], kit: &LinearGaussianKit) -> Result<Self> {
        let zv = DVector::from_column_slice(z);
        let n = self.dim();
        let mut log_w = Vec::with_capacity(self.len());
        let mut means = Vec::with_capacity(self.len());
        let mut covs = Vec::with_capacity(self.len());
        for ((w, m), p) in self.weights.iter().zip(&self.means).zip(&self.covariances) {
            let inn = Innovation::new(m, p, kit)?;
            log_w.push(w.ln() + inn.log_density(&zv));
            // K = P Hᵀ S⁻¹
            let pht = p * kit.h.transpose();
            let k = inn.chol.solve(&pht.transpose()).transpose();
            means.push(m + &k * (&zv - &inn.predicted));
            let mut c = (DMatrix::identity(n, n) - &k * &kit.h) * p;
            symmetrize(&mut c);
            covs.push(c);
        }
        let total = log_sum_exp(log_w.iter().copied());
        if !total.is_finite() {
            return Err(GlmbError::Numerical("measurement likelihood vanished for every component".into()));
        }
        Ok(Self {
            weights: log_w.iter().map(|l| (l - total).exp()).collect(),
            means,
            covariances: covs,
        })
    }

    /// Prune light components, merge close ones, cap the count.
    pub fn reduce(&self, cfg: &MixtureManagement) -> Self {
        if self.len() <= 1 {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.weights[i] >= cfg.prune_below)
            .collect();
        if idx.is_empty() {
            idx = vec![(0..self.len())
                .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]))
                .unwrap_or(0)];
        }
        let mut out = Self {
            weights: vec![],
            means: vec![],
            covariances: vec![],
        };
        while !idx.is_empty() {
            let (pos, &lead) = idx
                .iter()
                .enumerate()
                .max_by(|a, b| self.weights[*a.1].total_cmp(&self.weights[*b.1]))
                .unwrap();
            idx.swap_remove(pos);
            let inv = robust_cholesky(&self.covariances[lead]).ok();
            let mut group = vec![lead];
            if let Some(inv) = inv {
                idx.retain(|&i| {
                    let d = &self.means[i] - &self.means[lead];
                    let w = inv.l_dirty().solve_lower_triangular(&d).unwrap_or(d);
                    if w.norm_squared() <= cfg.merge_within {
                        group.push(i);
                        false
                    } else {
                        true
                    }
                });
            }
            let wsum: f64 = group.iter().map(|&i| self.weights[i]).sum();
            let mut mean = DVector::zeros(self.dim());
            for &i in &group {
                mean += &self.means[i] * (self.weights[i] / wsum);
            }
            let mut cov = DMatrix::zeros(self.dim(), self.dim());
            for &i in &group {
                let d = &self.means[i] - &mean;
                cov += (&self.covariances[i] + &d * d.transpose()) * (self.weights[i] / wsum);
            }
            symmetrize(&mut cov);
            out.weights.push(wsum);
            out.means.push(mean);
            out.covariances.push(cov);
        }
        if out.len() > cfg.max_components {
            let mut order: Vec<usize> = (0..out.len()).collect();
            order.sort_by(|&a, &b| out.weights[b].total_cmp(&out.weights[a]));
            order.truncate(cfg.max_components);
            out = Self {
                weights: order.iter().map(|&i| out.weights[i]).collect(),
                means: order.iter().map(|&i| out.means[i].clone()).collect(),
                covariances: order.iter().map(|&i| out.covariances[i].clone()).collect(),
            };
        }
        let total: f64 = out.weights.iter().sum();
        for w in &mut out.weights {
            *w /= total;
        }
        out
    }
}

/// Closed-form prediction (`gm_predict`).
pub fn gm_predict(density: &GaussianMixture, kit: &LinearGaussianKit) -> Result<GaussianMixture> {
    density.predict(kit)
}

/// `ψ̄` and the posterior mixture for one measurement (`None` = missed).
pub fn gm_psi_bar(
    density: &GaussianMixture,
    z: Option<&[f64]>,
    kit: &LinearGaussianKit,
    detection: f64,
    clutter_intensity: f64,
) -> Result<(f64, GaussianMixture)> {
    match z {
        None => Ok((1.0 - detection, density.clone())),
        Some(z) => {
            let row = density.psi_row(&[z.to_vec()], kit, detection, |_| clutter_intensity)?;
            Ok((row[1], density.update(z, kit)?))
        }
    }
}

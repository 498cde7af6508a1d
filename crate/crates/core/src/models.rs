//! Single-object motion and measurement models.
//!
//! Both traits are read-only after construction and evaluated concurrently.
//! States and measurements are plain `f64` slices; units are meters, seconds
//! and radians.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GlmbError, Result};
use crate::glmb::Label;

/// Gaussian birth site of an LMB birth model (diagonal covariance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthSite {
    pub existence: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl BirthSite {
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.std.len(),
            self.std.iter().map(|s| s * s),
        ))
    }
}

/// A birth candidate for one scan: label `(scan, i)` and its Bernoulli parameters.
#[derive(Clone, Debug)]
pub struct BirthTerm {
    pub label: Label,
    pub existence: f64,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

pub trait MotionModel: Send + Sync {
    fn state_dim(&self) -> usize;

    fn survival_prob(&self, x: &[f64], label: &Label) -> f64;

    /// `Some(p)` when the survival probability does not depend on the state.
    fn constant_survival(&self) -> Option<f64> {
        None
    }

    /// `(F, Q)` when the transition is `N(x₊; F x, Q)`.
    fn linear_gaussian(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        None
    }

    /// Noise-free transition, used to script ground truth.
    fn transition_mean(&self, x: &[f64], out: &mut [f64]);

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]);

    fn birth_sites(&self) -> &[BirthSite];

    /// LMB birth terms labeled `(scan, 1..)`.
    fn births(&self, scan: u32) -> Vec<BirthTerm> {
        self.birth_sites()
            .iter()
            .enumerate()
            .map(|(i, site)| BirthTerm {
                label: Label::new(scan, i as u32 + 1),
                existence: site.existence,
                mean: DVector::from_column_slice(&site.mean),
                covariance: site.covariance(),
            })
            .collect()
    }
}

pub trait MeasurementModel: Send + Sync {
    fn measurement_dim(&self) -> usize;

    fn detection_prob(&self, x: &[f64], label: &Label) -> f64;

    /// `Some(p)` when the detection probability does not depend on the state.
    fn constant_detection(&self) -> Option<f64> {
        None
    }

    /// `H` when `z = H x + v`.
    fn observation_matrix(&self) -> Option<&DMatrix<f64>> {
        None
    }

    fn noise(&self) -> &GaussianNoise;

    fn predict_measurement(&self, x: &[f64], out: &mut [f64]);

    /// `z - ẑ`, with any angular components wrapped.
    fn residual(&self, z: &[f64], predicted: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(z).zip(predicted) {
            *o = a - b;
        }
    }

    /// Poisson clutter intensity `κ(z)`.
    fn clutter_intensity(&self, z: &[f64]) -> f64;

    fn region(&self) -> &ObservationRegion;

    /// Expected number of false alarms per scan.
    fn expected_clutter(&self) -> f64;

    /// Single-measurement likelihood `g(z | x)`.
    fn likelihood(&self, z: &[f64], x: &[f64]) -> f64 {
        let d = self.measurement_dim();
        let mut zhat = [0.0; 8];
        let mut res = [0.0; 8];
        self.predict_measurement(x, &mut zhat[..d]);
        self.residual(z, &zhat[..d], &mut res[..d]);
        self.noise().density(&res[..d])
    }

    fn sample_measurement(&self, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.measurement_dim();
        let mut z = vec![0.0; d];
        self.predict_measurement(x, &mut z);
        let noise = self.noise().sample(rng);
        for (zi, ni) in z.iter_mut().zip(noise.iter()) {
            *zi += ni;
        }
        z
    }
}

/// `ψ_Z^{(j)}(x, ℓ)`: `P_D g(z_j|x) / κ(z_j)` for `j ≥ 1`, `1 - P_D` for `j = 0`.
pub fn psi(
    sensor: &dyn MeasurementModel,
    measurements: &[Vec<f64>],
    j: usize,
    x: &[f64],
    label: &Label,
) -> Result<f64> {
    let pd = sensor.detection_prob(x, label);
    if j == 0 {
        return Ok(1.0 - pd);
    }
    let z = measurements.get(j - 1).ok_or(GlmbError::IndexOutOfRange {
        index: j as i64,
        max: measurements.len(),
    })?;
    Ok(pd * sensor.likelihood(z, x) / sensor.clutter_intensity(z))
}

/// Zero-mean Gaussian with precomputed factorization.
#[derive(Clone, Debug)]
pub struct GaussianNoise {
    covariance: DMatrix<f64>,
    lower: DMatrix<f64>,
    inverse: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianNoise {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        let chol = covariance.clone().cholesky().ok_or_else(|| {
            GlmbError::ModelContract("measurement noise covariance not positive definite".into())
        })?;
        let lower = chol.l();
        let log_det = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self {
            inverse: chol.inverse(),
            lower,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
            covariance,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn std(&self, i: usize) -> f64 {
        self.covariance[(i, i)].sqrt()
    }

    #[inline]
    pub fn log_density(&self, residual: &[f64]) -> f64 {
        let d = residual.len();
        let mut q = 0.0;
        for r in 0..d {
            let mut row = 0.0;
            for c in 0..d {
                row += self.inverse[(r, c)] * residual[c];
            }
            q += residual[r] * row;
        }
        self.log_norm - 0.5 * q
    }

    #[inline]
    pub fn density(&self, residual: &[f64]) -> f64 {
        self.log_density(residual).exp()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let d = self.lower.nrows();
        let n = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.lower * n
    }
}

/// Axis-aligned box in measurement coordinates (for range-bearing sensors this
/// is the `(θ, r)` rectangle of a sector).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ObservationRegion {
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .product()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn sample_uniform(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }
}

/// Factor `L` with `L Lᵀ = Q` for a symmetric positive semi-definite `Q`.
fn psd_factor(q: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = q.clone().symmetric_eigen();
    let mut factor = eig.eigenvectors.clone();
    for (c, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(c).scale_mut(s);
    }
    factor
}

/// `x₊ = F x + w`, `w ~ N(0, Q)`, constant survival probability.
#[derive(Clone, Debug)]
pub struct LinearGaussianMotion {
    f: DMatrix<f64>,
    q: DMatrix<f64>,
    noise_factor: DMatrix<f64>,
    survival: f64,
    births: Vec<BirthSite>,
}

impl LinearGaussianMotion {
    pub fn new(
        f: DMatrix<f64>,
        q: DMatrix<f64>,
        survival: f64,
        births: Vec<BirthSite>,
    ) -> Result<Self> {
        let n = f.nrows();
        if f.ncols() != n || q.shape() != (n, n) {
            return Err(GlmbError::DimensionMismatch(format!(
                "F is {:?}, Q is {:?}",
                f.shape(),
                q.shape()
            )));
        }
        check_open_unit("survival probability", survival)?;
        check_births(&births, n)?;
        Ok(Self {
            noise_factor: psd_factor(&q),
            f,
            q,
            survival,
            births,
        })
    }

    /// Nearly-constant-velocity model on `[p_x, v_x, p_y, v_y]` driven by white
    /// acceleration with standard deviation `sigma_accel` (m/s²).
    pub fn constant_velocity(
        period: f64,
        sigma_accel: f64,
        survival: f64,
        births: Vec<BirthSite>,
    ) -> Result<Self> {
        let t = period;
        #[rustfmt::skip]
        let f = DMatrix::from_row_slice(4, 4, &[
            1.0, t, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, t,
            0.0, 0.0, 0.0, 1.0,
        ]);
        let g = accel_gain(t);
        let q = (&g * g.transpose()) * (sigma_accel * sigma_accel);
        Self::new(f, q, survival, births)
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.q
    }
}

/// `[[T²/2, 0], [T, 0], [0, T²/2], [0, T]]`.
fn accel_gain(t: f64) -> DMatrix<f64> {
    #[rustfmt::skip]
    let g = DMatrix::from_row_slice(4, 2, &[
        t * t / 2.0, 0.0,
        t, 0.0,
        0.0, t * t / 2.0,
        0.0, t,
    ]);
    g
}

impl MotionModel for LinearGaussianMotion {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn survival_prob(&self, _x: &[f64], _label: &Label) -> f64 {
        self.survival
    }

    fn constant_survival(&self) -> Option<f64> {
        Some(self.survival)
    }

    fn linear_gaussian(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        Some((&self.f, &self.q))
    }

    fn transition_mean(&self, x: &[f64], out: &mut [f64]) {
        let n = self.f.nrows();
        for r in 0..n {
            out[r] = (0..n).map(|c| self.f[(r, c)] * x[c]).sum();
        }
    }

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.transition_mean(x, out);
        let k = self.noise_factor.ncols();
        let mut w = [0.0; 8];
        for wi in w.iter_mut().take(k) {
            *wi = rng.sample(StandardNormal);
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += (0..k).map(|c| self.noise_factor[(r, c)] * w[c]).sum::<f64>();
        }
    }

    fn birth_sites(&self) -> &[BirthSite] {
        &self.births
    }
}

/// Coordinated turn on `[p_x, v_x, p_y, v_y, ω]` with constant survival.
#[derive(Clone, Debug)]
pub struct CoordinatedTurnMotion {
    period: f64,
    sigma_accel: f64,
    sigma_turn: f64,
    survival: f64,
    births: Vec<BirthSite>,
}

impl CoordinatedTurnMotion {
    pub fn new(
        period: f64,
        sigma_accel: f64,
        sigma_turn: f64,
        survival: f64,
        births: Vec<BirthSite>,
    ) -> Result<Self> {
        check_open_unit("survival probability", survival)?;
        check_births(&births, 5)?;
        Ok(Self {
            period,
            sigma_accel,
            sigma_turn,
            survival,
            births,
        })
    }

    /// `F(ω)`; `ω = 0` uses the analytic limit (constant velocity).
    pub fn transition_matrix(&self, omega: f64) -> DMatrix<f64> {
        let t = self.period;
        let (s, c) = (omega * t).sin_cos();
        let (a, b) = if omega.abs() < 1e-10 {
            (t, 0.0)
        } else {
            (s / omega, (1.0 - c) / omega)
        };
        #[rustfmt::skip]
        let f = DMatrix::from_row_slice(5, 5, &[
            1.0, a, 0.0, -b, 0.0,
            0.0, c, 0.0, -s, 0.0,
            0.0, b, 1.0, a, 0.0,
            0.0, s, 0.0, c, 0.0,
            0.0, 0.0, 0.0, 0.0, 1.0,
        ]);
        f
    }

    /// `diag(σ_w² G Gᵀ, σ_u²)`.
    pub fn process_noise(&self) -> DMatrix<f64> {
        let g = accel_gain(self.period);
        let mut q = DMatrix::zeros(5, 5);
        q.view_mut((0, 0), (4, 4))
            .copy_from(&((&g * g.transpose()) * self.sigma_accel.powi(2)));
        q[(4, 4)] = self.sigma_turn.powi(2);
        q
    }
}

impl MotionModel for CoordinatedTurnMotion {
    fn state_dim(&self) -> usize {
        5
    }

    fn survival_prob(&self, _x: &[f64], _label: &Label) -> f64 {
        self.survival
    }

    fn constant_survival(&self) -> Option<f64> {
        Some(self.survival)
    }

    fn transition_mean(&self, x: &[f64], out: &mut [f64]) {
        let t = self.period;
        let omega = x[4];
        let (s, c) = (omega * t).sin_cos();
        let (a, b) = if omega.abs() < 1e-10 {
            (t, 0.0)
        } else {
            (s / omega, (1.0 - c) / omega)
        };
        out[0] = x[0] + a * x[1] - b * x[3];
        out[1] = c * x[1] - s * x[3];
        out[2] = x[2] + b * x[1] + a * x[3];
        out[3] = s * x[1] + c * x[3];
        out[4] = omega;
    }

    fn sample_transition(&self, x: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.transition_mean(x, out);
        let t = self.period;
        let wx: f64 = rng.sample::<f64, _>(StandardNormal) * self.sigma_accel;
        let wy: f64 = rng.sample::<f64, _>(StandardNormal) * self.sigma_accel;
        let wu: f64 = rng.sample::<f64, _>(StandardNormal) * self.sigma_turn;
        out[0] += t * t / 2.0 * wx;
        out[1] += t * wx;
        out[2] += t * t / 2.0 * wy;
        out[3] += t * wy;
        out[4] += wu;
    }

    fn birth_sites(&self) -> &[BirthSite] {
        &self.births
    }
}

/// `z = H x + v` with constant detection probability and uniform clutter.
#[derive(Clone, Debug)]
pub struct LinearGaussianSensor {
    h: DMatrix<f64>,
    noise: GaussianNoise,
    detection: f64,
    clutter_density: f64,
    region: ObservationRegion,
}

impl LinearGaussianSensor {
    pub fn new(
        h: DMatrix<f64>,
        r: DMatrix<f64>,
        detection: f64,
        clutter_density: f64,
        region: ObservationRegion,
    ) -> Result<Self> {
        if r.shape() != (h.nrows(), h.nrows()) || region.lower.len() != h.nrows() {
            return Err(GlmbError::DimensionMismatch(format!(
                "H is {:?}, R is {:?}",
                h.shape(),
                r.shape()
            )));
        }
        check_open_unit("detection probability", detection)?;
        if clutter_density <= 0.0 {
            return Err(GlmbError::ModelContract("clutter intensity must be positive".into()));
        }
        Ok(Self {
            h,
            noise: GaussianNoise::new(r)?,
            detection,
            clutter_density,
            region,
        })
    }

    /// Position-only observation of a `[p_x, v_x, p_y, v_y]` state.
    pub fn position(
        sigma: f64,
        detection: f64,
        clutter_density: f64,
        region: ObservationRegion,
    ) -> Result<Self> {
        #[rustfmt::skip]
        let h = DMatrix::from_row_slice(2, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        ]);
        let r = DMatrix::identity(2, 2) * (sigma * sigma);
        Self::new(h, r, detection, clutter_density, region)
    }
}

impl MeasurementModel for LinearGaussianSensor {
    fn measurement_dim(&self) -> usize {
        self.h.nrows()
    }

    fn detection_prob(&self, _x: &[f64], _label: &Label) -> f64 {
        self.detection
    }

    fn constant_detection(&self) -> Option<f64> {
        Some(self.detection)
    }

    fn observation_matrix(&self) -> Option<&DMatrix<f64>> {
        Some(&self.h)
    }

    fn noise(&self) -> &GaussianNoise {
        &self.noise
    }

    fn predict_measurement(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..self.h.ncols()).map(|c| self.h[(r, c)] * x[c]).sum();
        }
    }

    fn clutter_intensity(&self, _z: &[f64]) -> f64 {
        self.clutter_density
    }

    fn region(&self) -> &ObservationRegion {
        &self.region
    }

    fn expected_clutter(&self) -> f64 {
        self.clutter_density * self.region.volume()
    }
}

/// Bearing-range sensor at the origin observing the half plane `p_y ≥ 0`.
///
/// `z = [θ, r]` with `θ = atan2(p_x, p_y)` measured from the `+y` axis
/// (clockwise positive) and `r = |p|`. The detection profile is an isotropic
/// unnormalized Gaussian `P_D(x) = peak · exp(-|p|² / (2 s²))` whose scale `s`
/// is solved so that `P_D = edge` at the maximum range. Clutter is uniform over
/// the `(θ, r)` rectangle `[-π/2, π/2] × [0, radius]`.
#[derive(Clone, Debug)]
pub struct RangeBearingSensor {
    noise: GaussianNoise,
    detection_peak: f64,
    profile_scale_sq: f64,
    clutter_density: f64,
    region: ObservationRegion,
}

impl RangeBearingSensor {
    pub fn new(
        sigma_bearing: f64,
        sigma_range: f64,
        detection_peak: f64,
        detection_edge: f64,
        radius: f64,
        clutter_density: f64,
    ) -> Result<Self> {
        check_open_unit("peak detection probability", detection_peak)?;
        check_open_unit("edge detection probability", detection_edge)?;
        if detection_edge >= detection_peak {
            return Err(GlmbError::ModelContract(
                "detection profile must decay from the origin".into(),
            ));
        }
        if clutter_density <= 0.0 {
            return Err(GlmbError::ModelContract("clutter intensity must be positive".into()));
        }
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![
            sigma_bearing * sigma_bearing,
            sigma_range * sigma_range,
        ]));
        Ok(Self {
            noise: GaussianNoise::new(r)?,
            detection_peak,
            profile_scale_sq: radius * radius / (2.0 * (detection_peak / detection_edge).ln()),
            clutter_density,
            region: ObservationRegion {
                lower: vec![-PI / 2.0, 0.0],
                upper: vec![PI / 2.0, radius],
            },
        })
    }

    /// `s²` of the detection profile.
    pub fn profile_scale_sq(&self) -> f64 {
        self.profile_scale_sq
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

impl MeasurementModel for RangeBearingSensor {
    fn measurement_dim(&self) -> usize {
        2
    }

    fn detection_prob(&self, x: &[f64], _label: &Label) -> f64 {
        let r2 = x[0] * x[0] + x[2] * x[2];
        self.detection_peak * (-0.5 * r2 / self.profile_scale_sq).exp()
    }

    fn noise(&self) -> &GaussianNoise {
        &self.noise
    }

    fn predict_measurement(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0].atan2(x[2]);
        out[1] = x[0].hypot(x[2]);
    }

    fn residual(&self, z: &[f64], predicted: &[f64], out: &mut [f64]) {
        out[0] = wrap_angle(z[0] - predicted[0]);
        out[1] = z[1] - predicted[1];
    }

    fn clutter_intensity(&self, _z: &[f64]) -> f64 {
        self.clutter_density
    }

    fn region(&self) -> &ObservationRegion {
        &self.region
    }

    fn expected_clutter(&self) -> f64 {
        self.clutter_density * self.region.volume()
    }
}

fn check_open_unit(what: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(GlmbError::ModelContract(format!("{what} {p} outside (0, 1)")))
    }
}

fn check_births(births: &[BirthSite], dim: usize) -> Result<()> {
    for b in births {
        check_open_unit("birth existence", b.existence)?;
        if b.mean.len() != dim || b.std.len() != dim {
            return Err(GlmbError::DimensionMismatch(format!(
                "birth site has dimension {}, state has {dim}",
                b.mean.len()
            )));
        }
    }
    Ok(())
}

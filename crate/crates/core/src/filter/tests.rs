use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::densities::GaussianMixture;
use crate::models::{BirthSite, LinearGaussianMotion, LinearGaussianSensor, ObservationRegion};

const KAPPA: f64 = 1e-4;

fn models(ps: f64, pd: f64, birth_sites: usize) -> (LinearGaussianMotion, LinearGaussianSensor) {
    let births = (0..birth_sites)
        .map(|i| BirthSite {
            existence: 0.3,
            mean: vec![10.0 * i as f64, 0.0, 0.0, 0.0],
            std: vec![10.0, 2.0, 10.0, 2.0],
        })
        .collect();
    let motion = LinearGaussianMotion::constant_velocity(1.0, 2.0, ps, births).unwrap();
    let region = ObservationRegion {
        lower: vec![-500.0, -500.0],
        upper: vec![500.0, 500.0],
    };
    let sensor = LinearGaussianSensor::position(10.0, pd, KAPPA, region).unwrap();
    (motion, sensor)
}

fn prior_cov() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![100.0, 4.0, 100.0, 4.0]))
}

fn gm_track(label: Label, mean: [f64; 4]) -> Track {
    Track {
        label,
        key: TrackKey::birth(label),
        density: Arc::new(TrackDensity::Gaussian(GaussianMixture::single(
            DVector::from_row_slice(&mean),
            prior_cov(),
        ))),
    }
}

/// Up to three components over subsets of two labels; a label carries the
/// same density in every component it appears in.
fn random_instance(rng: &mut ChaCha8Rng) -> (GlmbDensity, Vec<Vec<f64>>) {
    let tracks: Vec<Track> = (1..=2)
        .map(|i| {
            let mean = [rng.random_range(-30.0..30.0), 0.0, rng.random_range(-30.0..30.0), 0.0];
            gm_track(Label::new(1, i), mean)
        })
        .collect();
    let mut subsets: Vec<u32> = (0..4).collect();
    let n_components = rng.random_range(1..=3);
    let mut components = Vec::new();
    for _ in 0..n_components {
        let k = rng.random_range(0..subsets.len());
        let mask = subsets.swap_remove(k);
        let chosen = tracks.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, t)| t.clone()).collect();
        components.push(GlmbComponent::new(chosen, rng.random_range(-2.0..0.0)).unwrap());
    }
    let density = GlmbDensity::from_components(components, 1).unwrap();
    let m = rng.random_range(0..=2);
    let measurements = (0..m)
        .map(|_| vec![rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0)])
        .collect();
    (density, measurements)
}

fn weights_by_fingerprint(d: &GlmbDensity) -> HashMap<u64, f64> {
    d.components().iter().map(|c| (c.fingerprint(), c.log_weight().exp())).collect()
}

fn exhaustive_config() -> FilterConfig {
    FilterConfig {
        prune_floor: 0.0,
        ..FilterConfig::new(1, Solver::Exhaustive, 3)
    }
}

#[test]
fn exhaustive_step_equals_two_stage_recursion() {
    let (motion, sensor) = models(0.9, 0.8, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let config = exhaustive_config();
    for _ in 0..100 {
        let (density, zs) = random_instance(&mut rng);
        let joint = joint_step(&density, &zs, &motion, &sensor, &config).unwrap().density;
        let oracle = two_stage_oracle(&density, &zs, &motion, &sensor, &config).unwrap();
        let a = weights_by_fingerprint(&joint);
        let b = weights_by_fingerprint(&oracle);
        assert_eq!(a.len(), b.len());
        for (k, w) in &a {
            assert!((w - b[k]).abs() < 1e-10, "{w} vs {}", b[k]);
        }
    }
}

#[test]
fn oracle_hand_enumeration_single_track() {
    let (motion, sensor) = models(0.9, 0.8, 0);
    let track = gm_track(Label::new(1, 1), [0.0, 0.0, 0.0, 0.0]);
    let density = GlmbDensity::from_components(vec![GlmbComponent::new(vec![track], 0.0).unwrap()], 1).unwrap();
    let z = vec![vec![5.0, -3.0]];
    let out = two_stage_oracle(&density, &z, &motion, &sensor, &exhaustive_config()).unwrap();
    assert_eq!(out.len(), 3);
    // Predicted position variance 100 + T²·4 + T⁴/4·σ² = 105; innovation adds R.
    let s: f64 = 105.0 + 100.0;
    let g = (-(25.0 + 9.0) / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s);
    let raw = [0.1, 0.9 * 0.2, 0.9 * 0.8 * g / KAPPA];
    let total: f64 = raw.iter().sum();
    let mut got: Vec<(usize, Option<u32>, f64)> = out
        .components()
        .iter()
        .map(|c| {
            let j = c.tracks().first().map(|t| if t.key == TrackKey::birth(t.label).extend(0) { 0 } else { 1 });
            (c.cardinality(), j, c.log_weight().exp())
        })
        .collect();
    got.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for ((_, _, w), expected) in got.iter().zip(raw) {
        assert!((w - expected / total).abs() < 1e-12, "{w} vs {}", expected / total);
    }
}

#[test]
fn tempering_does_not_change_reported_weights() {
    let (motion, sensor) = models(0.9, 0.8, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..20 {
        let (density, zs) = random_instance(&mut rng);
        let plain = joint_step(&density, &zs, &motion, &sensor, &exhaustive_config()).unwrap().density;
        let tempered_config = FilterConfig {
            tempering: Tempering {
                birth_factor: 3.0,
                survival_factor: 0.95,
                detection_factor: 0.95,
            },
            ..exhaustive_config()
        };
        let tempered = joint_step(&density, &zs, &motion, &sensor, &tempered_config).unwrap().density;
        let a = weights_by_fingerprint(&plain);
        let b = weights_by_fingerprint(&tempered);
        assert_eq!(a, b);
    }
}

#[test]
fn captured_mass_grows_with_budget() {
    let (motion, sensor) = models(0.95, 0.9, 2);
    let tracks = vec![
        gm_track(Label::new(1, 1), [0.0, 0.0, 0.0, 0.0]),
        gm_track(Label::new(1, 2), [20.0, 0.0, 0.0, 0.0]),
    ];
    let density = GlmbDensity::from_components(vec![GlmbComponent::new(tracks, 0.0).unwrap()], 1).unwrap();
    let zs = vec![vec![1.0, 2.0], vec![19.0, -1.0], vec![25.0, 4.0], vec![-100.0, 50.0]];
    let mut last = f64::NEG_INFINITY;
    for h in [1, 2, 5, 10, 50, 200, 1000] {
        let config = FilterConfig::new(h, Solver::Gibbs, 9);
        let d = joint_step(&density, &zs, &motion, &sensor, &config).unwrap().diagnostics;
        assert!(d.log_captured_mass >= last, "h_max {h}: {} < {last}", d.log_captured_mass);
        last = d.log_captured_mass;
    }
}

#[test]
fn multinomial_allocates_every_trial() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for n in [1, 7, 1000] {
        let weights: Vec<f64> = (0..13).map(|_| rng.random::<f64>()).collect();
        let counts = multinomial(n, &weights, &mut rng);
        assert_eq!(counts.iter().sum::<usize>(), n);
    }
    let counts = multinomial(100_000, &[0.2, 0.0, 0.8], &mut rng);
    assert_eq!(counts[1], 0);
    assert!((counts[0] as f64 / 1e5 - 0.2).abs() < 0.01);
}

#[test]
fn low_survival_favours_all_deaths() {
    let (motion, sensor) = models(0.01, 0.8, 0);
    let tracks = vec![
        gm_track(Label::new(1, 1), [0.0; 4]),
        gm_track(Label::new(1, 2), [50.0, 0.0, 0.0, 0.0]),
    ];
    let density = GlmbDensity::from_components(vec![GlmbComponent::new(tracks, 0.0).unwrap()], 1).unwrap();
    let out = joint_step(&density, &[], &motion, &sensor, &FilterConfig::new(100, Solver::Gibbs, 1)).unwrap();
    let best = out.density.map_component().unwrap();
    assert_eq!(out.density.components()[best].cardinality(), 0);
}

#[test]
fn static_track_takes_its_measurement() {
    let (motion, sensor) = models(0.99, 0.9, 0);
    let track = gm_track(Label::new(1, 1), [100.0, 0.0, -50.0, 0.0]);
    let density = GlmbDensity::from_components(vec![GlmbComponent::new(vec![track], 0.0).unwrap()], 1).unwrap();
    let zs = vec![vec![100.0, -50.0]];
    let out = joint_step(&density, &zs, &motion, &sensor, &FilterConfig::new(50, Solver::Gibbs, 1)).unwrap();
    let best = &out.density.components()[out.density.map_component().unwrap()];
    let t = &best.tracks()[0];
    assert_eq!(t.key, TrackKey::birth(t.label).extend(1));
}

#[test]
fn eta_table_matches_closed_form() {
    let (motion, sensor) = models(0.99, 0.8, 1);
    let means = [[0.0, 1.0, 10.0, -1.0], [40.0, -2.0, 0.0, 0.5]];
    let tracks: Vec<Track> = means.iter().enumerate().map(|(i, m)| gm_track(Label::new(1, i as u32 + 1), *m)).collect();
    let component = GlmbComponent::new(tracks, 0.0).unwrap();
    let zs = vec![vec![2.0, 8.0], vec![35.0, 3.0], vec![-20.0, 0.0]];
    let config = FilterConfig::new(10, Solver::Gibbs, 0);
    let predicted = predict_density(&component, &motion.births(2), &motion, &sensor, &zs, &config, 2).unwrap();
    let refs: Vec<&PredictedTrack> = predicted.iter().collect();
    let problem = build_problem(&refs, zs.len(), &Tempering::NONE).unwrap();
    assert_eq!(problem.rows(), 3);
    assert_eq!(problem.survivors(), 2);
    assert!((problem.eta(0, -1) - 0.01).abs() < 1e-15);
    assert!((problem.eta(2, -1) - 0.7).abs() < 1e-15);
    // Scalar-per-axis oracle: positions decouple for diagonal priors.
    for (i, m) in means.iter().enumerate() {
        let var = 100.0 + 4.0 + 4.0 / 4.0 + 100.0;
        let (px, py) = (m[0] + m[1], m[2] + m[3]);
        assert!((problem.eta(i, 0) - 0.99 * 0.2).abs() < 1e-15);
        for (j, z) in zs.iter().enumerate() {
            let d2 = ((z[0] - px).powi(2) + (z[1] - py).powi(2)) / var;
            let g = (-d2 / 2.0).exp() / (2.0 * std::f64::consts::PI * var);
            let expected = 0.99 * 0.8 * g / KAPPA;
            let got = problem.eta(i, j as i32 + 1);
            assert!(((got - expected) / expected).abs() < 1e-8, "row {i} z {j}: {got} vs {expected}");
        }
    }
}

#[test]
fn tempered_birth_is_clamped() {
    let (motion, sensor) = models(0.99, 0.8, 1);
    let b = birth_track(&motion.births(1)[0], &Backend::Gaussian, &motion, &sensor, &[], 0).unwrap();
    let t = Tempering {
        birth_factor: 100.0,
        ..Tempering::NONE
    };
    let problem = build_problem(&[&b], 0, &t).unwrap();
    assert!((problem.eta(0, -1) - 1e-6).abs() < 1e-12);
}

#[test]
fn step_is_reproducible_and_normalized() {
    let (motion, sensor) = models(0.95, 0.9, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (density, zs) = random_instance(&mut rng);
    for solver in [Solver::Gibbs, Solver::Murty] {
        let config = FilterConfig::new(200, solver, 5);
        let a = joint_step(&density, &zs, &motion, &sensor, &config).unwrap();
        let b = joint_step(&density, &zs, &motion, &sensor, &config).unwrap();
        assert_eq!(weights_by_fingerprint(&a.density), weights_by_fingerprint(&b.density));
        let total: f64 = a.density.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(a.diagnostics.children, a.density.len());
        assert_eq!(a.density.scan(), 2);
    }
}

#[test]
fn invalid_configuration_rejected() {
    let (motion, sensor) = models(0.95, 0.9, 0);
    let density = GlmbDensity::empty(0);
    let mut config = FilterConfig::new(0, Solver::Gibbs, 0);
    assert!(joint_step(&density, &[], &motion, &sensor, &config).is_err());
    config.h_max = 10;
    config.tempering.detection_factor = 1.5;
    assert!(joint_step(&density, &[], &motion, &sensor, &config).is_err());
}

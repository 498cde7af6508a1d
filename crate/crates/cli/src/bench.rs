//! Solver scaling on synthetic η tables.

use std::time::Instant;

use glmb::association::{gibbs_sample, murty_ranked, AssignmentVector, AssociationProblem};
use glmb::Label;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::SCHEMA_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Gibbs samples per problem in the sweeps.
    pub gibbs_samples: usize,
    /// Ranked solutions per problem in the Murty sweep.
    pub murty_samples: usize,
    pub p_values: Vec<usize>,
    pub m_values: Vec<usize>,
    /// `M` held fixed while sweeping `P`.
    pub fixed_m: usize,
    /// `P` held fixed while sweeping `M`.
    pub fixed_p: usize,
    /// Size multipliers `s` for the Murty sweep over `(P, M) = (5s, 10s)`.
    pub murty_scales: Vec<usize>,
    pub compare_p: usize,
    pub compare_m: usize,
    /// `T` for the head-to-head comparison.
    pub compare_samples: usize,
    /// Each timing repeats until this much time has elapsed (at least 3 runs);
    /// the fastest run is reported.
    pub min_seconds: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            gibbs_samples: 200,
            murty_samples: 10,
            p_values: vec![10, 20, 40, 80],
            m_values: vec![10, 20, 40, 80, 160, 320],
            fixed_m: 80,
            fixed_p: 20,
            murty_scales: vec![1, 2, 4, 8],
            compare_p: 40,
            compare_m: 160,
            compare_samples: 100,
            min_seconds: 0.2,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub sweep: String,
    pub solver: String,
    pub p: usize,
    pub m: usize,
    pub t: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub p: usize,
    pub m: usize,
    pub t: usize,
    pub gibbs_seconds: f64,
    pub murty_seconds: f64,
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub points: Vec<BenchPoint>,
    /// Log-log slope of Gibbs time against `M` at fixed `P`.
    pub gibbs_slope_m: f64,
    /// Log-log slope of Gibbs time against `P` at fixed `M`.
    pub gibbs_slope_p: f64,
    /// Log-log slope of Murty time against `2P + M`.
    pub murty_slope_size: f64,
    pub comparison: Comparison,
}

/// Tracking-like table: small death and miss factors, detection factors
/// spread over several orders of magnitude.
pub fn synthetic_problem(p: usize, m: usize, rng: &mut dyn RngCore) -> AssociationProblem {
    let mut eta = Vec::with_capacity(p * (m + 2));
    for _ in 0..p {
        eta.push(rng.random_range(0.005..0.05));
        eta.push(rng.random_range(0.05..0.2));
        for _ in 0..m {
            eta.push(10f64.powf(rng.random_range(-4.0..2.0)));
        }
    }
    let labels = (1..=p as u32).map(|i| Label::new(0, i)).collect();
    AssociationProblem::new(eta, m, p, labels).expect("synthetic η is positive")
}

fn time_min(min_seconds: f64, mut f: impl FnMut()) -> f64 {
    let start = Instant::now();
    let mut best = f64::INFINITY;
    let mut runs = 0;
    while runs < 3 || start.elapsed().as_secs_f64() < min_seconds {
        let t = Instant::now();
        f();
        best = best.min(t.elapsed().as_secs_f64());
        runs += 1;
    }
    best
}

pub fn time_gibbs(problem: &AssociationProblem, t: usize, min_seconds: f64) -> f64 {
    let init = AssignmentVector::zeros(problem.rows());
    time_min(min_seconds, || {
        std::hint::black_box(gibbs_sample(problem, &init, t, 7).expect("valid init"));
    })
}

pub fn time_murty(problem: &AssociationProblem, t: usize, min_seconds: f64) -> f64 {
    time_min(min_seconds, || {
        std::hint::black_box(murty_ranked(problem, t));
    })
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn bench_scaling(cfg: &BenchConfig) -> BenchReport {
    let mut rng = glmb::rng::stream(cfg.seed, &[0xbe9c]);
    let mut points = Vec::new();
    let mut point = |sweep: &str, solver: &str, p: usize, m: usize, t: usize, seconds: f64| {
        log::info!("{sweep} {solver} P={p} M={m} T={t}: {seconds:.3e}s");
        points.push(BenchPoint {
            sweep: sweep.into(),
            solver: solver.into(),
            p,
            m,
            t,
            seconds,
        });
        seconds
    };

    let ms: Vec<f64> = cfg.m_values.iter().map(|&m| m as f64).collect();
    let gibbs_m: Vec<f64> = cfg
        .m_values
        .iter()
        .map(|&m| {
            let problem = synthetic_problem(cfg.fixed_p, m, &mut rng);
            point("gibbs_m", "gibbs", cfg.fixed_p, m, cfg.gibbs_samples, time_gibbs(&problem, cfg.gibbs_samples, cfg.min_seconds))
        })
        .collect();
    let ps: Vec<f64> = cfg.p_values.iter().map(|&p| p as f64).collect();
    let gibbs_p: Vec<f64> = cfg
        .p_values
        .iter()
        .map(|&p| {
            let problem = synthetic_problem(p, cfg.fixed_m, &mut rng);
            point("gibbs_p", "gibbs", p, cfg.fixed_m, cfg.gibbs_samples, time_gibbs(&problem, cfg.gibbs_samples, cfg.min_seconds))
        })
        .collect();
    let sizes: Vec<f64> = cfg.murty_scales.iter().map(|&s| (2 * 5 * s + 10 * s) as f64).collect();
    let murty: Vec<f64> = cfg
        .murty_scales
        .iter()
        .map(|&s| {
            let (p, m) = (5 * s, 10 * s);
            let problem = synthetic_problem(p, m, &mut rng);
            point("murty_size", "murty", p, m, cfg.murty_samples, time_murty(&problem, cfg.murty_samples, cfg.min_seconds))
        })
        .collect();

    let problem = synthetic_problem(cfg.compare_p, cfg.compare_m, &mut rng);
    let g = point("compare", "gibbs", cfg.compare_p, cfg.compare_m, cfg.compare_samples, time_gibbs(&problem, cfg.compare_samples, cfg.min_seconds));
    let mu = point("compare", "murty", cfg.compare_p, cfg.compare_m, cfg.compare_samples, time_murty(&problem, cfg.compare_samples, cfg.min_seconds));

    BenchReport {
        schema_version: SCHEMA_VERSION,
        gibbs_slope_m: fit_slope(&ms, &gibbs_m),
        gibbs_slope_p: fit_slope(&ps, &gibbs_p),
        murty_slope_size: fit_slope(&sizes, &murty),
        comparison: Comparison {
            p: cfg.compare_p,
            m: cfg.compare_m,
            t: cfg.compare_samples,
            gibbs_seconds: g,
            murty_seconds: mu,
            speedup: mu / g,
        },
        points,
    }
}

pub fn write_report(dir: &std::path::Path, report: &BenchReport) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(dir.join("bench.csv"))?;
    w.write_record(["sweep", "solver", "p", "m", "t", "seconds"])?;
    for p in &report.points {
        w.write_record([
            p.sweep.clone(),
            p.solver.clone(),
            p.p.to_string(),
            p.m.to_string(),
            p.t.to_string(),
            format!("{}", p.seconds),
        ])?;
    }
    w.flush()?;
    std::fs::write(dir.join("bench_summary.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

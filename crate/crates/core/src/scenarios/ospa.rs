use serde::{Deserialize, Serialize};

use crate::association::lap;
use crate::error::{GlmbError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    pub cutoff: f64,
    pub order: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self {
            cutoff: 100.0,
            order: 1.0,
        }
    }
}

/// OSPA distance and its two parts; `total^p = localization^p + cardinality^p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ospa {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn ospa(x: &[Vec<f64>], y: &[Vec<f64>], params: &OspaParams) -> Result<Ospa> {
    let (c, p) = (params.cutoff, params.order);
    if !(c > 0.0) || !(p >= 1.0) {
        return Err(GlmbError::InvalidArgument(format!("OSPA needs c > 0 and p ≥ 1, got c = {c}, p = {p}")));
    }
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let n = large.len();
    if n == 0 {
        return Ok(Ospa::default());
    }
    let m = small.len();
    let mut cost = Vec::with_capacity(m * n);
    for a in small {
        for b in large {
            cost.push(distance(a, b).min(c).powf(p));
        }
    }
    let matched = lap::solve(&cost, m, n).map_or(0.0, |s| s.cost).max(0.0);
    let unmatched = c.powf(p) * (n - m) as f64;
    let nf = n as f64;
    Ok(Ospa {
        total: ((matched + unmatched) / nf).powf(1.0 / p),
        localization: (matched / nf).powf(1.0 / p),
        cardinality: (unmatched / nf).powf(1.0 / p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p1(c: f64) -> OspaParams {
        OspaParams { cutoff: c, order: 1.0 }
    }

    #[test]
    fn examples() {
        let x = vec![vec![1.0, 2.0], vec![5.0, 5.0]];
        assert_eq!(ospa(&x, &x, &p1(100.0)).unwrap().total, 0.0);
        assert_eq!(ospa(&x[..1], &[], &p1(100.0)).unwrap().total, 100.0);
        assert_eq!(ospa(&[], &[], &p1(100.0)).unwrap().total, 0.0);
        let d = ospa(&[vec![0.0]], &[vec![3.0]], &p1(10.0)).unwrap();
        assert!((d.total - 3.0).abs() < 1e-12);
        assert!(ospa(&x, &x, &OspaParams { cutoff: 1.0, order: 0.5 }).is_err());
    }

    #[test]
    fn parts_combine() {
        let params = OspaParams { cutoff: 20.0, order: 2.0 };
        let x = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![50.0, 50.0]];
        let y = vec![vec![1.0, 1.0]];
        let d = ospa(&x, &y, &params).unwrap();
        assert!((d.total.powi(2) - d.localization.powi(2) - d.cardinality.powi(2)).abs() < 1e-9);
        // Best pairing is (0,0)↔(1,1): (2 + 2·400) / 3.
        assert!((d.total - ((2.0 + 800.0) / 3.0f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn metric_properties_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = OspaParams { cutoff: 30.0, order: 1.0 };
        let random_set = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            let n = rng.random_range(0..5);
            (0..n).map(|_| vec![rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)]).collect()
        };
        for _ in 0..500 {
            let (a, b, c) = (random_set(&mut rng), random_set(&mut rng), random_set(&mut rng));
            let ab = ospa(&a, &b, &params).unwrap().total;
            let ba = ospa(&b, &a, &params).unwrap().total;
            let bc = ospa(&b, &c, &params).unwrap().total;
            let ac = ospa(&a, &c, &params).unwrap().total;
            assert!((ab - ba).abs() < 1e-9);
            assert!(ac <= ab + bc + 1e-9);
            assert!((0.0..=30.0 + 1e-9).contains(&ab));
        }
    }
}

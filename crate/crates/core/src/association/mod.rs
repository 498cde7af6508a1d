//! Per-hypothesis association problem and its solvers.
//!
//! Row `i` of the η table belongs to label `ℓ_i` (surviving labels first,
//! then birth labels); column `j + 1` holds the factor for `γ_i = j`, with
//! `j = −1` meaning death / not born, `0` missed, `1..=M` a measurement.

mod gibbs;
pub mod lap;
mod murty;

pub use gibbs::{gibbs_conditional, gibbs_sample, gibbs_sample_with, GibbsSampler};
pub use lap::FORBIDDEN;
pub use murty::{murty_ranked, optimal_assignment};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{GlmbError, Result};
use crate::glmb::Label;

#[derive(Clone, Debug, PartialEq)]
pub struct AssociationProblem {
    rows: usize,
    measurements: usize,
    survivors: usize,
    eta: Vec<f64>,
    log_eta: Vec<f64>,
    labels: Vec<Label>,
}

impl AssociationProblem {
    /// `eta` is row-major `rows × (M + 2)`.
    pub fn new(eta: Vec<f64>, measurements: usize, survivors: usize, labels: Vec<Label>) -> Result<Self> {
        let width = measurements + 2;
        if eta.len() % width != 0 {
            return Err(GlmbError::DimensionMismatch(format!(
                "η length {} is not a multiple of M + 2 = {width}",
                eta.len()
            )));
        }
        let rows = eta.len() / width;
        if labels.len() != rows {
            return Err(GlmbError::DimensionMismatch(format!("{} labels for {rows} rows", labels.len())));
        }
        if survivors > rows {
            return Err(GlmbError::InvalidArgument(format!("{survivors} survivors but {rows} rows")));
        }
        if let Some(pos) = eta.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(GlmbError::ModelContract(format!(
                "η[{}][{}] = {} is not a positive finite number",
                pos / width,
                pos % width,
                eta[pos]
            )));
        }
        let log_eta = eta.iter().map(|v| v.ln()).collect();
        Ok(Self {
            rows,
            measurements,
            survivors,
            eta,
            log_eta,
            labels,
        })
    }

    /// Problem without track semantics: rows are labelled `(0, 1..=P)`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(2, Vec::len);
        if width < 2 {
            return Err(GlmbError::DimensionMismatch("rows need at least 2 columns".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(GlmbError::DimensionMismatch(format!(
                "row {bad} has {} columns, expected {width}",
                rows[bad].len()
            )));
        }
        let labels = (1..=rows.len() as u32).map(|i| Label::new(0, i)).collect();
        Self::new(rows.concat(), width - 2, 0, labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn measurements(&self) -> usize {
        self.measurements
    }

    pub fn survivors(&self) -> usize {
        self.survivors
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.measurements + 2
    }

    /// `η_i(−1), η_i(0), …, η_i(M)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.eta[i * w..(i + 1) * w]
    }

    pub fn log_row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.log_eta[i * w..(i + 1) * w]
    }

    pub fn eta(&self, i: usize, j: i32) -> f64 {
        self.row(i)[(j + 1) as usize]
    }

    pub fn log_eta(&self, i: usize, j: i32) -> f64 {
        self.log_row(i)[(j + 1) as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AssignmentVector(pub Vec<i32>);

impl AssignmentVector {
    pub fn zeros(p: usize) -> Self {
        Self(vec![0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries in `−1..=M` with no repeated positive value.
    pub fn is_positive_one_to_one(&self, measurements: usize) -> bool {
        let mut seen = vec![false; measurements + 1];
        for &g in &self.0 {
            if g < -1 || g > measurements as i32 {
                return false;
            }
            if g > 0 {
                if seen[g as usize] {
                    return false;
                }
                seen[g as usize] = true;
            }
        }
        true
    }

    fn check(&self, problem: &AssociationProblem) -> Result<()> {
        if self.len() != problem.rows() {
            return Err(GlmbError::DimensionMismatch(format!(
                "assignment of length {} for {} rows",
                self.len(),
                problem.rows()
            )));
        }
        if !self.is_positive_one_to_one(problem.measurements()) {
            return Err(GlmbError::NotPositiveOneToOne(self.0.clone()));
        }
        Ok(())
    }
}

/// `(I₊, θ₊)`: the surviving/born labels and their measurement indices.
pub fn recover(problem: &AssociationProblem, gamma: &AssignmentVector) -> Result<BTreeMap<Label, u32>> {
    gamma.check(problem)?;
    Ok(problem
        .labels()
        .iter()
        .zip(&gamma.0)
        .filter(|(_, &g)| g >= 0)
        .map(|(l, &g)| (*l, g as u32))
        .collect())
}

/// `Σ ln η_i(γ_i)`, or `−∞` when `γ` is not a valid positive 1-1 vector.
pub fn weight_of(problem: &AssociationProblem, gamma: &AssignmentVector) -> f64 {
    if gamma.check(problem).is_err() {
        return f64::NEG_INFINITY;
    }
    gamma
        .0
        .iter()
        .enumerate()
        .map(|(i, &g)| problem.log_eta(i, g))
        .sum()
}

/// Row-major `P × (M + 2P)` cost matrix whose assignments correspond
/// one-to-one with positive 1-1 vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostMatrix {
    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.cols + c]
    }

    /// Column used by row `i` when it takes value `g`.
    pub fn column_of(&self, i: usize, g: i32) -> usize {
        let m = self.cols - 2 * self.rows;
        match g {
            -1 => m + self.rows + i,
            0 => m + i,
            j => (j - 1) as usize,
        }
    }

    /// Inverse of [`CostMatrix::column_of`].
    pub fn value_of(&self, c: usize) -> i32 {
        let m = self.cols - 2 * self.rows;
        if c < m {
            c as i32 + 1
        } else if c < m + self.rows {
            0
        } else {
            -1
        }
    }

    /// Cost of the assignment encoding `γ`.
    pub fn cost_of(&self, gamma: &AssignmentVector) -> f64 {
        gamma
            .0
            .iter()
            .enumerate()
            .map(|(i, &g)| self.get(i, self.column_of(i, g)))
            .sum()
    }
}

pub fn build_cost_matrix(problem: &AssociationProblem) -> CostMatrix {
    let p = problem.rows();
    let m = problem.measurements();
    let cols = m + 2 * p;
    let mut data = vec![FORBIDDEN; p * cols];
    for i in 0..p {
        let log_row = problem.log_row(i);
        let row = &mut data[i * cols..(i + 1) * cols];
        for j in 0..m {
            row[j] = -log_row[j + 2];
        }
        row[m + i] = -log_row[1];
        row[m + p + i] = -log_row[0];
    }
    CostMatrix { rows: p, cols, data }
}

/// Distinct vectors, best first. Ties keep first-seen order.
pub fn dedup_rank(samples: &[AssignmentVector], problem: &AssociationProblem) -> Vec<AssignmentVector> {
    let mut seen = HashSet::with_capacity(samples.len());
    let mut unique: Vec<(f64, AssignmentVector)> = samples
        .iter()
        .filter(|g| seen.insert(*g))
        .map(|g| (weight_of(problem, g), g.clone()))
        .collect();
    unique.sort_by(|a, b| b.0.total_cmp(&a.0));
    unique.into_iter().map(|(_, g)| g).collect()
}

/// Every positive 1-1 vector, best first. Refuses more than `limit` vectors.
pub fn enumerate(problem: &AssociationProblem, limit: usize) -> Result<Vec<AssignmentVector>> {
    let p = problem.rows();
    let m = problem.measurements();
    let total = (m as f64 + 2.0).powi(p as i32);
    if total > limit as f64 * 1e3 {
        return Err(GlmbError::TooLarge(total.min(usize::MAX as f64) as usize));
    }
    let mut out = Vec::new();
    let mut current = vec![-1i32; p];
    let mut taken = vec![false; m + 1];
    fn rec(
        i: usize,
        current: &mut Vec<i32>,
        taken: &mut Vec<bool>,
        out: &mut Vec<AssignmentVector>,
        limit: usize,
    ) -> Result<()> {
        if i == current.len() {
            if out.len() == limit {
                return Err(GlmbError::TooLarge(limit + 1));
            }
            out.push(AssignmentVector(current.clone()));
            return Ok(());
        }
        for g in -1..taken.len() as i32 {
            if g > 0 && taken[g as usize] {
                continue;
            }
            if g > 0 {
                taken[g as usize] = true;
            }
            current[i] = g;
            rec(i + 1, current, taken, out, limit)?;
            if g > 0 {
                taken[g as usize] = false;
            }
        }
        Ok(())
    }
    rec(0, &mut current, &mut taken, &mut out, limit)?;
    let mut ranked: Vec<_> = out.into_iter().map(|g| (weight_of(problem, &g), g)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(ranked.into_iter().map(|(_, g)| g).collect())
}

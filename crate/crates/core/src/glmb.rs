//! Labels, δ-GLMB components and the density container.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::densities::TrackDensity;
use crate::error::{GlmbError, Result};
use crate::rng::{combine, mix64};

/// Track identity: the scan an object was born at and a disambiguating index.
///
/// The derived ordering is lexicographic on `(birth_time, index)`, which is the
/// canonical order label sets are stored in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub birth_time: u32,
    pub index: u32,
}

impl Label {
    pub const fn new(birth_time: u32, index: u32) -> Self {
        Self { birth_time, index }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.birth_time, self.index)
    }
}

/// Hash of a label's own association history.
///
/// A track born as `label` and then associated with measurement indices
/// `j_1, j_2, ...` has the key `birth(label).extend(j_1).extend(j_2)...`.
/// Two tracks with equal keys carry the same density, which is what lets the
/// filter merge children without comparing densities numerically.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrackKey(pub u64);

impl TrackKey {
    pub fn birth(label: Label) -> Self {
        let packed = (u64::from(label.birth_time) << 32) | u64::from(label.index);
        TrackKey(combine(0x6c61_6265_6c00_0000, packed))
    }

    /// Key after one more scan in which the track was assigned `j` (0 = missed).
    pub fn extend(self, j: u32) -> Self {
        TrackKey(combine(self.0, mix64(u64::from(j) + 1)))
    }
}

/// One labeled track inside a component.
#[derive(Clone, Debug)]
pub struct Track {
    pub label: Label,
    pub key: TrackKey,
    pub density: Arc<TrackDensity>,
}

/// A δ-GLMB term: label set `I`, log-weight and one density per label.
#[derive(Clone, Debug)]
pub struct GlmbComponent {
    log_weight: f64,
    /// Sorted by label, labels distinct.
    tracks: Vec<Track>,
}

impl GlmbComponent {
    pub fn new(mut tracks: Vec<Track>, log_weight: f64) -> Result<Self> {
        tracks.sort_by_key(|t| t.label);
        if tracks.windows(2).any(|w| w[0].label == w[1].label) {
            return Err(GlmbError::InvalidArgument(
                "component label set contains duplicates".into(),
            ));
        }
        if log_weight.is_nan() {
            return Err(GlmbError::Numerical("NaN component weight".into()));
        }
        Ok(Self { log_weight, tracks })
    }

    pub fn empty(log_weight: f64) -> Self {
        Self {
            log_weight,
            tracks: Vec::new(),
        }
    }

    pub fn log_weight(&self) -> f64 {
        self.log_weight
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tracks.iter().map(|t| t.label)
    }

    pub fn cardinality(&self) -> usize {
        self.tracks.len()
    }

    pub fn density(&self, label: &Label) -> Option<&TrackDensity> {
        self.tracks
            .binary_search_by_key(label, |t| t.label)
            .ok()
            .map(|i| self.tracks[i].density.as_ref())
    }

    /// Identifies `(I, p)`: equal fingerprints mean equal label sets with equal
    /// track histories.
    pub fn fingerprint(&self) -> u64 {
        self.tracks
            .iter()
            .fold(mix64(self.tracks.len() as u64), |acc, t| combine(acc, t.key.0))
    }
}

/// Normalized δ-GLMB density: the filter state at one scan.
#[derive(Clone, Debug)]
pub struct GlmbDensity {
    components: Vec<GlmbComponent>,
    scan: u32,
}

/// `ln Σ exp(x_i)`, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl GlmbDensity {
    /// The "no objects" density at `scan`.
    pub fn empty(scan: u32) -> Self {
        Self {
            components: vec![GlmbComponent::empty(0.0)],
            scan,
        }
    }

    /// Normalizes the component weights (log-sum-exp).
    pub fn from_components(mut components: Vec<GlmbComponent>, scan: u32) -> Result<Self> {
        if components.is_empty() {
            return Err(GlmbError::EmptyDensity);
        }
        let total = log_sum_exp(components.iter().map(|c| c.log_weight));
        if !total.is_finite() {
            return Err(GlmbError::Numerical(format!(
                "cannot normalize component weights (log total {total})"
            )));
        }
        for c in &mut components {
            c.log_weight -= total;
        }
        Ok(Self { components, scan })
    }

    pub fn components(&self) -> &[GlmbComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn scan(&self) -> u32 {
        self.scan
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.log_weight.exp()).collect()
    }

    /// Effective sample size `1 / Σ ω²` of the component weights.
    pub fn effective_size(&self) -> f64 {
        let sq: f64 = self.components.iter().map(|c| (2.0 * c.log_weight).exp()).sum();
        if sq > 0.0 {
            1.0 / sq
        } else {
            0.0
        }
    }

    /// `ρ(n)`: total weight of the components with `|I| = n`.
    pub fn cardinality_distribution(&self) -> Result<BTreeMap<usize, f64>> {
        if self.components.is_empty() {
            return Err(GlmbError::EmptyDensity);
        }
        let mut rho = BTreeMap::new();
        for c in &self.components {
            *rho.entry(c.cardinality()).or_insert(0.0) += c.log_weight.exp();
        }
        Ok(rho)
    }

    /// Mean of the cardinality distribution.
    pub fn expected_cardinality(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.cardinality() as f64 * c.log_weight.exp())
            .sum()
    }

    /// Index of the component the state estimate is read from: the heaviest
    /// component among those with the MAP cardinality. Ties go to the lower
    /// index, both for the cardinality and the component.
    pub fn map_component(&self) -> Result<usize> {
        let rho = self.cardinality_distribution()?;
        let mut best_n = 0;
        let mut best_mass = f64::NEG_INFINITY;
        for (&n, &mass) in &rho {
            if mass > best_mass {
                best_n = n;
                best_mass = mass;
            }
        }
        let mut best = None::<(usize, f64)>;
        for (i, c) in self.components.iter().enumerate() {
            if c.cardinality() != best_n {
                continue;
            }
            if best.is_none_or(|(_, w)| c.log_weight > w) {
                best = Some((i, c.log_weight));
            }
        }
        best.map(|(i, _)| i).ok_or(GlmbError::EmptyDensity)
    }

    /// MAP-cardinality estimate: labels and track means of the heaviest
    /// component with the most probable cardinality.
    pub fn estimate_state(&self) -> Result<Vec<(Label, Vec<f64>)>> {
        let idx = self.map_component()?;
        Ok(self.components[idx]
            .tracks
            .iter()
            .map(|t| (t.label, t.density.mean()))
            .collect())
    }

    /// Drops components with normalized weight below `floor` and renormalizes.
    /// The heaviest component is always kept.
    pub fn prune(&mut self, floor: f64) {
        if self.components.len() <= 1 {
            return;
        }
        let log_floor = floor.ln();
        let max = self
            .components
            .iter()
            .map(|c| c.log_weight)
            .fold(f64::NEG_INFINITY, f64::max);
        self.components
            .retain(|c| c.log_weight >= log_floor || c.log_weight == max);
        let total = log_sum_exp(self.components.iter().map(|c| c.log_weight));
        for c in &mut self.components {
            c.log_weight -= total;
        }
    }

    pub fn summary(&self) -> DensitySummary {
        DensitySummary {
            scan: self.scan,
            components: self
                .components
                .iter()
                .map(|c| ComponentSummary {
                    labels: c.labels().collect(),
                    log_weight: c.log_weight,
                    tracks: c
                        .tracks
                        .iter()
                        .map(|t| TrackSummary {
                            label: t.label,
                            mean: t.density.mean(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// JSON-facing view of a density: labels, log-weights and track means.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DensitySummary {
    pub scan: u32,
    pub components: Vec<ComponentSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentSummary {
    pub labels: Vec<Label>,
    pub log_weight: f64,
    pub tracks: Vec<TrackSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrackSummary {
    pub label: Label,
    pub mean: Vec<f64>,
}

//! Generalized labeled multi-Bernoulli (GLMB) multi-object tracking.
//!
//! The filter propagates a δ-GLMB density with a single joint
//! prediction-update step per scan. Each hypothesis spawns its children by
//! solving a data-association problem over the table of hypothesis factors
//! (`η`), either stochastically with a Gibbs sampler or deterministically with
//! Murty's ranked assignment. Track densities are Gaussian mixtures or
//! particle sets.
//!
//! Module map:
//! - [`glmb`]: labels, components and the density container.
//! - [`models`]: motion and measurement models.
//! - [`association`]: η table, assignment vectors, Gibbs and Murty solvers.
//! - [`densities`]: Gaussian-mixture and particle single-track integrals.
//! - [`filter`]: the joint recursion and its brute-force two-stage oracle.
//! - [`scenarios`]: simulators for the reference scenarios and OSPA.

pub mod association;
pub mod densities;
pub mod error;
pub mod filter;
pub mod glmb;
pub mod models;
pub mod rng;
pub mod scenarios;

pub use error::{GlmbError, Result};
pub use glmb::{GlmbComponent, GlmbDensity, Label, Track, TrackKey};

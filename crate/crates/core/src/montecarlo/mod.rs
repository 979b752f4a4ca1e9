//! Sampled simulation of tree measurements, construction and memory runs.
//!
//! Trial `i` of a run seeded with `s` draws from ChaCha8 seeded by `s` on
//! stream `i`, so results do not depend on the thread count.

pub mod build;
pub mod memory;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::treeproto::{logical_x_feasible, BranchVector, SampledLoss, TreeError, TreeShape};

pub use build::{run_build_sim, BuildStats, ResourceTally};
pub use memory::{run_memory_sim, AgeModel, CurvePoint, LossModel, MemoryMode, TrialConfig, TrialCurve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// Independent stream for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials >= 1 && successes <= trials, "need 0 ≤ successes ≤ trials, trials ≥ 1");
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (low, high)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub mean: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let mean = successes as f64 / trials as f64;
        let (ci_low, ci_high) = wilson_interval(successes, trials, 1.96);
        Estimate { successes, trials, mean, std_err: (mean * (1.0 - mean) / trials as f64).sqrt(), ci_low, ci_high }
    }

    /// `|mean − value| ≤ sigmas·σ`, with σ taken at `value` so that exact
    /// agreement at the boundary is not penalized.
    pub fn within_sigmas(&self, value: f64, sigmas: f64) -> bool {
        let sd = (value * (1.0 - value) / self.trials as f64).sqrt();
        (self.mean - value).abs() <= sigmas * sd + 1e-15
    }
}

/// Fraction of trials in which logical X measurement of a tree succeeds
/// under i.i.d. loss. Vertices are sampled lazily.
pub fn run_tree_trials(branch: &BranchVector, eps_by_level: &[f64], trials: u64, seed: u64) -> Result<Estimate, SimError> {
    if trials == 0 {
        return Err(SimError::InvalidConfig("trials must be ≥ 1".into()));
    }
    if eps_by_level.is_empty() || eps_by_level.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(SimError::InvalidConfig("loss rates must be in [0, 1]".into()));
    }
    let shape = TreeShape::new(branch)?;
    let successes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut loss = SampledLoss::per_level(&shape, eps_by_level.to_vec(), trial_rng(seed, t));
            u64::from(logical_x_feasible(&shape, &mut loss))
        })
        .sum();
    Ok(Estimate::from_counts(successes, trials))
}

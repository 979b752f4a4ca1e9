//! Sampled resource consumption of the fusion pipeline.
//!
//! Mirrors the construction order of the tree pipeline: stars double from
//! GHZ states, each new level fuses a glue star with freshly built
//! subtrees, and any failed fusion discards both of its inputs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trial_rng, SimError};
use crate::analytics::expected_two_tree_cost;
use crate::treeproto::BranchVector;

/// Work budget in expected GHZ states across all trials.
const MAX_EXPECTED_GHZ: f64 = 2e9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTally {
    pub ghz_states: u64,
    pub two_trees: u64,
    pub photons: u64,
    pub fusion_attempts: u64,
    pub fusion_successes: u64,
}

impl ResourceTally {
    fn ghz(&mut self) {
        self.ghz_states += 1;
        self.photons += 3;
    }

    fn attempt(&mut self, p: f64, rng: &mut impl Rng) -> bool {
        self.fusion_attempts += 1;
        let ok = p >= 1.0 || rng.random_bool(p);
        self.fusion_successes += u64::from(ok);
        ok
    }

    fn add(&mut self, o: &ResourceTally) {
        self.ghz_states += o.ghz_states;
        self.two_trees += o.two_trees;
        self.photons += o.photons;
        self.fusion_attempts += o.fusion_attempts;
        self.fusion_successes += o.fusion_successes;
    }
}

fn star(x: u32, p: f64, rng: &mut impl Rng, t: &mut ResourceTally) {
    match x {
        1 => t.ghz(),
        2 => loop {
            t.ghz();
            t.ghz();
            if t.attempt(p, rng) {
                t.two_trees += 1;
                return;
            }
        },
        _ => loop {
            star(x.div_ceil(2), p, rng, t);
            star(x / 2, p, rng, t);
            if t.attempt(p, rng) {
                return;
            }
        },
    }
}

fn tree_from(b: &[u32], p: f64, rng: &mut impl Rng, t: &mut ResourceTally) {
    match b {
        [x] => star(*x, p, rng, t),
        [x, rest @ ..] => upper(*x, rest, p, rng, t),
        [] => unreachable!("branch vectors are non-empty"),
    }
}

fn upper(x: u32, rest: &[u32], p: f64, rng: &mut impl Rng, t: &mut ResourceTally) {
    match x {
        1 => loop {
            t.ghz();
            tree_from(rest, p, rng, t);
            if t.attempt(p, rng) {
                return;
            }
        },
        2 => loop {
            star(2, p, rng, t);
            tree_from(rest, p, rng, t);
            tree_from(rest, p, rng, t);
            // Both fusions run in the same step.
            let a = t.attempt(p, rng);
            let b = t.attempt(p, rng);
            if a && b {
                return;
            }
        },
        _ => loop {
            upper(x.div_ceil(2), rest, p, rng, t);
            upper(x / 2, rest, p, rng, t);
            if t.attempt(p, rng) {
                return;
            }
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub trials: u64,
    pub total: ResourceTally,
    pub two_tree_mean: f64,
    pub two_tree_var: f64,
    pub ghz_mean: f64,
    pub photon_mean: f64,
}

impl BuildStats {
    pub fn two_tree_std_err(&self) -> f64 {
        (self.two_tree_var / self.trials as f64).sqrt()
    }
}

/// Build one tree per trial with fusion success `p_ii`.
pub fn run_build_sim(branch: &BranchVector, p_ii: f64, trials: u64, seed: u64) -> Result<BuildStats, SimError> {
    if trials == 0 {
        return Err(SimError::InvalidConfig("trials must be ≥ 1".into()));
    }
    let expected = expected_two_tree_cost(branch, p_ii)?;
    if expected.ghz * trials as f64 > MAX_EXPECTED_GHZ {
        return Err(SimError::InvalidConfig(format!(
            "{trials} trials would need about {:.3e} GHZ states",
            expected.ghz * trials as f64
        )));
    }
    let b = branch.as_slice();
    let tallies: Vec<ResourceTally> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut t = ResourceTally::default();
            tree_from(b, p_ii, &mut rng, &mut t);
            t
        })
        .collect();
    let mut total = ResourceTally::default();
    let mut sq: u128 = 0;
    for t in &tallies {
        total.add(t);
        sq += u128::from(t.two_trees) * u128::from(t.two_trees);
    }
    let n = trials as f64;
    let mean = total.two_trees as f64 / n;
    let var = if trials > 1 { (sq as f64 - n * mean * mean) / (n - 1.0) } else { 0.0 };
    Ok(BuildStats {
        trials,
        total,
        two_tree_mean: mean,
        two_tree_var: var.max(0.0),
        ghz_mean: total.ghz_states as f64 / n,
        photon_mean: total.photons as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(s: &str) -> BranchVector {
        s.parse().unwrap()
    }

    #[test]
    fn certain_fusions_give_minimum_counts() {
        let s = run_build_sim(&bv("3,2"), 1.0, 10, 0).unwrap();
        let c = expected_two_tree_cost(&bv("3,2"), 1.0).unwrap();
        assert_eq!(s.two_tree_mean, c.two_trees);
        assert_eq!(s.ghz_mean, c.ghz);
        assert_eq!(s.two_tree_var, 0.0);
    }

    #[test]
    fn tally_invariants() {
        let s = run_build_sim(&bv("2,3"), 0.4, 200, 5).unwrap();
        assert_eq!(s.total.photons, 3 * s.total.ghz_states);
        assert!(s.total.fusion_successes <= s.total.fusion_attempts);
    }

    #[test]
    fn means_match_recursion() {
        for (b, p) in [("4", 0.5), ("2,2", 0.25), ("3,1,2", 0.5)] {
            let b = bv(b);
            let s = run_build_sim(&b, p, 20_000, 3).unwrap();
            let c = expected_two_tree_cost(&b, p).unwrap();
            assert!((s.two_tree_mean - c.two_trees).abs() <= 3.0 * s.two_tree_std_err(), "{b}: {} vs {}", s.two_tree_mean, c.two_trees);
            let ghz_se = (s.photon_mean / 3.0 - c.ghz).abs();
            assert!(ghz_se / c.ghz < 0.05, "{b}: ghz {} vs {}", s.ghz_mean, c.ghz);
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert!(run_build_sim(&bv("32,32,32"), 0.01, 1000, 0).is_err());
    }
}

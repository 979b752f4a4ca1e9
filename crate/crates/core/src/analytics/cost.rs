//! Expected resource consumption of the fusion pipeline.
//!
//! Every fusion consumes both inputs; on failure the product is discarded
//! and both inputs are rebuilt. An item built by fusing `A` and `B`
//! therefore costs `(cost(A) + cost(B))/P_II` in expectation.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::treeproto::BranchVector;

/// Expected consumption. `ghz` counts every GHZ state, including those
/// spent on 2-trees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildCost {
    pub two_trees: f64,
    pub ghz: f64,
}

impl BuildCost {
    pub fn photons(&self) -> f64 {
        3.0 * self.ghz
    }
}

impl Add for BuildCost {
    type Output = BuildCost;
    fn add(self, o: BuildCost) -> BuildCost {
        BuildCost { two_trees: self.two_trees + o.two_trees, ghz: self.ghz + o.ghz }
    }
}

impl Mul<f64> for BuildCost {
    type Output = BuildCost;
    fn mul(self, f: f64) -> BuildCost {
        BuildCost { two_trees: self.two_trees * f, ghz: self.ghz * f }
    }
}

const GHZ: BuildCost = BuildCost { two_trees: 0.0, ghz: 1.0 };

/// A hub with `x` leaves, doubled from GHZ states.
pub fn star_cost(x: u32, p: f64) -> BuildCost {
    match x {
        1 => GHZ,
        2 => BuildCost { two_trees: 1.0, ghz: 2.0 / p },
        _ => (star_cost(x.div_ceil(2), p) + star_cost(x / 2, p)) * (1.0 / p),
    }
}

/// A new top level with `x` branches over subtrees costing `sub`.
pub fn upper_cost(x: u32, sub: BuildCost, p: f64) -> BuildCost {
    match x {
        1 => (GHZ + sub) * (1.0 / p),
        2 => (star_cost(2, p) + sub * 2.0) * (1.0 / (p * p)),
        _ => (upper_cost(x.div_ceil(2), sub, p) + upper_cost(x / 2, sub, p)) * (1.0 / p),
    }
}

/// Expected consumption for one tree with branching `branch`.
pub fn expected_two_tree_cost(branch: &BranchVector, p_ii: f64) -> Result<BuildCost, AnalyticsError> {
    if !(p_ii > 0.0 && p_ii <= 1.0) {
        return Err(AnalyticsError::InvalidParam(format!("p_ii = {p_ii} is not in (0, 1]")));
    }
    let b = branch.as_slice();
    let mut cost = star_cost(b[b.len() - 1], p_ii);
    for &x in b[..b.len() - 1].iter().rev() {
        cost = upper_cost(x, cost, p_ii);
    }
    Ok(cost)
}

/// `(1/P)^{2m}·∏ (2/P)^{log2 b_i}`.
pub fn eq2_bound(branch: &BranchVector, p_ii: f64) -> f64 {
    let m = branch.m() as i32;
    let poly: f64 = branch.as_slice().iter().map(|&b| (2.0 / p_ii).powf(f64::from(b).log2())).product();
    (1.0 / p_ii).powi(2 * m) * poly
}

/// Every vector with `m ≤ max_m` and entries in `1..=max_b`.
pub fn branch_grid(max_m: usize, max_b: u32) -> Vec<BranchVector> {
    let mut frontier: Vec<Vec<u32>> = (1..=max_b).map(|b| vec![b]).collect();
    let mut out = frontier.clone();
    for _ in 0..max_m {
        frontier = frontier
            .iter()
            .flat_map(|v| (1..=max_b).map(move |b| [v.as_slice(), &[b]].concat()))
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out.into_iter().map(|v| BranchVector::new(v).expect("entries are ≥ 1")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(s: &str) -> BranchVector {
        s.parse().unwrap()
    }

    #[test]
    fn base_cases() {
        assert_eq!(expected_two_tree_cost(&bv("2"), 0.3).unwrap().two_trees, 1.0);
        assert_eq!(expected_two_tree_cost(&bv("4"), 0.5).unwrap().two_trees, 4.0);
        // 2^l-tree costs (2/P)^{l-1} two-trees.
        let c = expected_two_tree_cost(&bv("16"), 0.25).unwrap();
        assert!((c.two_trees - 8f64.powi(3)).abs() < 1e-9);
        // Halves {2,2} and {1,2}: (1 + 2) + (0 + 1).
        assert_eq!(expected_two_tree_cost(&bv("3,2"), 1.0).unwrap().two_trees, 4.0);
        assert!(expected_two_tree_cost(&bv("2"), 0.0).is_err());
    }

    #[test]
    fn two_level_step() {
        // A {2, b} tree: one glue 2-tree plus two subtrees, two fusions.
        let p = 0.4;
        let sub = star_cost(4, p).two_trees;
        let c = expected_two_tree_cost(&bv("2,4"), p).unwrap();
        assert!((c.two_trees - (2.0 * sub + 1.0) / (p * p)).abs() < 1e-9);
    }

    #[test]
    fn never_exceeds_bound() {
        for p in [0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
            for b in branch_grid(3, 8) {
                let c = expected_two_tree_cost(&b, p).unwrap().two_trees;
                assert!(c <= eq2_bound(&b, p) * (1.0 + 1e-12), "{b} at {p}: {c} > {}", eq2_bound(&b, p));
            }
        }
    }
}

//! Smallest tree meeting a logical-measurement target.

use serde::{Deserialize, Serialize};

use super::{p_tree_closed_form, AnalyticsError};
use crate::treeproto::BranchVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizeBounds {
    /// Maximum vector length `m + 1`.
    pub max_depth: usize,
    pub max_branch: u32,
}

impl Default for OptimizeBounds {
    fn default() -> Self {
        OptimizeBounds { max_depth: 5, max_branch: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub branch: BranchVector,
    pub p_tree: f64,
    /// Qubits including the root.
    pub qubits: u128,
    pub evaluated: u64,
}

struct Search {
    eps: f64,
    target: f64,
    max_branch: u32,
    best: Option<(u128, Vec<u32>, f64)>,
    evaluated: u64,
}

impl Search {
    fn best_q(&self) -> u128 {
        self.best.as_ref().map_or(u128::MAX, |b| b.0)
    }

    /// Extend `prefix` to exactly `len` entries. `count` is the qubit count
    /// of the prefix tree and `width` its deepest level size.
    fn dfs(&mut self, prefix: &mut Vec<u32>, len: usize, count: u128, width: u128) {
        if prefix.len() == len {
            self.evaluated += 1;
            let b = BranchVector::new(prefix.clone()).expect("entries are ≥ 1");
            let p = p_tree_closed_form(&b, self.eps);
            if p >= self.target && count < self.best_q() {
                self.best = Some((count, prefix.clone(), p));
            }
            return;
        }
        for b in 1..=self.max_branch {
            let w = width * u128::from(b);
            // Remaining levels add at least `w` each.
            let floor = count + w * (len - prefix.len()) as u128;
            if floor >= self.best_q() {
                break;
            }
            prefix.push(b);
            self.dfs(prefix, len, count + w, w);
            prefix.pop();
        }
    }
}

/// Branching vector with the fewest qubits whose closed-form logical
/// measurement probability reaches `p_target`.
pub fn optimize_branching(eps_eff: f64, p_target: f64, bounds: OptimizeBounds) -> Result<Optimized, AnalyticsError> {
    if !(p_target > 0.0 && p_target < 1.0) {
        return Err(AnalyticsError::InvalidParam(format!("target {p_target} is not in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&eps_eff) {
        return Err(AnalyticsError::InvalidParam(format!("eps = {eps_eff} is not in [0, 1]")));
    }
    if eps_eff >= 0.5 {
        return Err(AnalyticsError::Infeasible(format!("loss {eps_eff} is at or above the 50% limit")));
    }
    if bounds.max_depth == 0 || bounds.max_branch == 0 {
        return Err(AnalyticsError::InvalidParam("search bounds must be ≥ 1".into()));
    }
    let mut s = Search { eps: eps_eff, target: p_target, max_branch: bounds.max_branch, best: None, evaluated: 0 };
    for len in 1..=bounds.max_depth {
        s.dfs(&mut Vec::with_capacity(len), len, 1, 1);
    }
    let evaluated = s.evaluated;
    match s.best {
        Some((qubits, v, p_tree)) => Ok(Optimized {
            branch: BranchVector::new(v).expect("entries are ≥ 1"),
            p_tree,
            qubits,
            evaluated,
        }),
        None => Err(AnalyticsError::Infeasible(format!(
            "no vector within depth {} and branch {} reaches {p_target}",
            bounds.max_depth, bounds.max_branch
        ))),
    }
}

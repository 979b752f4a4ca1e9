//! Closed-form success probabilities, resource counts and thresholds.
//!
//! Level probabilities for a tree with loss `ε_l` at level `l`:
//! `R_l` is the chance that a level-`l` vertex's Z value can be inferred
//! from its subtree, and `S_l = (1 − ε_l) + ε_l·R_l` the chance that it can
//! be measured in Z at all.

pub mod cost;
pub mod optimize;
pub mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treeproto::BranchVector;

pub use cost::{eq2_bound, expected_two_tree_cost, BuildCost};
pub use optimize::{optimize_branching, OptimizeBounds};
pub use report::{analyze, AnalyzeInput, Report};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

fn check_prob(name: &str, p: f64) -> Result<(), AnalyticsError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidParam(format!("{name} = {p} is not in [0, 1]")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Per-photon loss at creation.
    pub eps: f64,
    pub eta_d: f64,
    pub eta_s: f64,
    /// Storage survival per fusion time step.
    pub p_store: f64,
    pub tau_ii: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams { eps: 0.0, eta_d: 1.0, eta_s: 1.0, p_store: 1.0, tau_ii: 1.0 }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        check_prob("eps", self.eps)?;
        check_prob("eta_d", self.eta_d)?;
        check_prob("eta_s", self.eta_s)?;
        check_prob("p_store", self.p_store)?;
        if !(self.tau_ii > 0.0 && self.tau_ii.is_finite()) {
            return Err(AnalyticsError::InvalidParam(format!("tau_ii = {} must be positive", self.tau_ii)));
        }
        Ok(())
    }
}

/// `Q ≈ ln(1/(1 − P_tree))^c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub c: f64,
}

impl Default for FitModel {
    fn default() -> Self {
        FitModel { c: 4.5 }
    }
}

impl FitModel {
    pub fn new(c: f64) -> Result<Self, AnalyticsError> {
        if c > 0.0 && c.is_finite() {
            Ok(FitModel { c })
        } else {
            Err(AnalyticsError::InvalidParam(format!("fit exponent c = {c} must be positive")))
        }
    }
}

/// Memory run length in fusion time steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemorySpec {
    pub tau_mem: f64,
    /// Duration of one cycle (join plus logical X).
    pub tau_q: f64,
}

impl MemorySpec {
    pub fn new(tau_mem: f64, tau_q: f64) -> Result<Self, AnalyticsError> {
        if !(tau_mem >= 0.0 && tau_mem.is_finite()) {
            return Err(AnalyticsError::InvalidParam(format!("tau_mem = {tau_mem} must be ≥ 0")));
        }
        if !(tau_q > 0.0 && tau_q.is_finite()) {
            return Err(AnalyticsError::InvalidParam(format!("tau_q = {tau_q} must be positive")));
        }
        Ok(MemorySpec { tau_mem, tau_q })
    }

    /// `⌈τ_mem/τ_q⌉` rounded up to an even count: an identity needs an even
    /// number of teleportation steps.
    pub fn cycles(&self) -> u64 {
        even_cycles(self.tau_mem / self.tau_q)
    }
}

pub fn even_cycles(ratio: f64) -> u64 {
    let c = (ratio - 1e-9).ceil().max(0.0) as u64;
    c + c % 2
}

/// Type-II success probability `(1 − ε)²·η_D²/2`.
pub fn p_type2(eps_eff: f64, eta_d: f64) -> f64 {
    let s = (1.0 - eps_eff) * eta_d;
    s * s / 2.0
}

/// `1 − (1 − ε)·η_S·p_store^steps`.
pub fn compose_effective_loss(params: &PhysicalParams, storage_steps: u32) -> f64 {
    1.0 - (1.0 - params.eps) * params.eta_s * params.p_store.powi(storage_steps as i32)
}

/// Per-step storage survival whose `steps`-th power is `aggregate`.
pub fn p_store_for_aggregate(aggregate: f64, steps: u32) -> f64 {
    aggregate.powf(1.0 / f64::from(steps.max(1)))
}

/// `R_l` and `S_l` for `l = 0 ..= m + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelProbs {
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Level probabilities with per-level loss; levels past the end of
/// `eps_by_level` reuse its last entry.
pub fn level_probs(branch: &BranchVector, eps_by_level: &[f64]) -> LevelProbs {
    let m = branch.m();
    let levels = m + 2;
    let eps: Vec<f64> =
        (0..levels).map(|l| *eps_by_level.get(l).or(eps_by_level.last()).unwrap_or(&0.0)).collect();
    let mut r = vec![0.0; levels];
    let mut s = vec![1.0; levels + 1];
    s[levels - 1] = 1.0 - eps[levels - 1];
    for l in (0..levels - 1).rev() {
        let (bl, bn) = (branch.b(l) as i32, branch.b(l + 1) as i32);
        let child_ok = (1.0 - eps[l + 1]) * s[l + 2].powi(bn);
        r[l] = 1.0 - (1.0 - child_ok).powi(bl);
        s[l] = (1.0 - eps[l]) + eps[l] * r[l];
    }
    s.truncate(levels);
    LevelProbs { r, s, eps }
}

/// `R_level` at uniform loss. Leaves give 0.
pub fn indirect_z(branch: &BranchVector, level: usize, eps_eff: f64) -> f64 {
    let p = level_probs(branch, &[eps_eff]);
    p.r.get(level).copied().unwrap_or(0.0)
}

/// Logical X success with per-level loss:
/// `[S_1^{b_0} − (ε_1·R_1)^{b_0}]·S_2^{b_1}`.
pub fn p_tree_levels(branch: &BranchVector, eps_by_level: &[f64]) -> f64 {
    let p = level_probs(branch, eps_by_level);
    let (b0, b1) = (branch.b(0) as i32, branch.b(1) as i32);
    let s2 = p.s.get(2).copied().unwrap_or(1.0);
    ((p.s[1].powi(b0) - (p.eps[1] * p.r[1]).powi(b0)) * s2.powi(b1)).clamp(0.0, 1.0)
}

pub fn p_tree_closed_form(branch: &BranchVector, eps_eff: f64) -> f64 {
    p_tree_levels(branch, &[eps_eff])
}

/// `1 − exp(−Q^{1/c})`.
pub fn p_tree_fit(q: f64, fit: FitModel) -> f64 {
    -(-q.powf(1.0 / fit.c)).exp_m1()
}

/// Qubits the fit needs for `p_target`: `ln(1/(1 − p))^c`.
pub fn q_required(p_target: f64, fit: FitModel) -> f64 {
    (-(-p_target).ln_1p()).powf(fit.c)
}

/// `[1 − (1 − P_II)^k]·P_tree^{2k}`.
pub fn p_cz(k: u32, p_ii: f64, p_tree: f64) -> f64 {
    (1.0 - (1.0 - p_ii).powi(k as i32)) * p_tree.powi(2 * k as i32)
}

/// `p_cz` with `P_tree^{2k}` replaced by `1 − 2k·exp(−Q^{1/c})`.
pub fn p_cz_linearized(k: u32, p_ii: f64, q: f64, fit: FitModel) -> f64 {
    (1.0 - (1.0 - p_ii).powi(k as i32)) * (1.0 - 2.0 * f64::from(k) * (-q.powf(1.0 / fit.c)).exp())
}

/// Smallest `k` with `1 − (1 − P_II)^k ≥ target`.
pub fn k_required(p_ii: f64, target: f64) -> Result<u32, AnalyticsError> {
    if !(p_ii > 0.0 && p_ii < 1.0 && target > 0.0 && target < 1.0) {
        return Err(AnalyticsError::InvalidParam(format!("k_required needs 0 < p_ii, target < 1 (got {p_ii}, {target})")));
    }
    let k = ((-target).ln_1p() / (-p_ii).ln_1p() - 1e-9).ceil();
    Ok(k.max(1.0) as u32)
}

/// Smallest `k` whose full `p_cz` reaches `target`. `p_cz` peaks in `k`
/// when `P_tree < 1`, so the target may be out of reach.
pub fn k_required_full(p_ii: f64, p_tree: f64, target: f64) -> Result<u32, AnalyticsError> {
    let start = k_required(p_ii, target)?;
    let mut best = 0.0;
    for k in start..=start.saturating_mul(4).max(start + 64) {
        let v = p_cz(k, p_ii, p_tree);
        if v >= target {
            return Ok(k);
        }
        if v < best {
            break;
        }
        best = v;
    }
    Err(AnalyticsError::Infeasible(format!("p_cz peaks at {best:.9} below target {target}")))
}

/// Outcome probabilities of one type-II attempt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionRates {
    pub success: f64,
    pub failure_zz: f64,
    pub erasure: f64,
}

impl FusionRates {
    /// Success and the Z⊗Z failure each occur with `P_II`; the rest are
    /// erasures.
    pub fn from_p_ii(p_ii: f64) -> Result<Self, AnalyticsError> {
        if !(0.0..=0.5).contains(&p_ii) {
            return Err(AnalyticsError::InvalidParam(format!("p_ii = {p_ii} is not in [0, 0.5]")));
        }
        Ok(FusionRates { success: p_ii, failure_zz: p_ii, erasure: 1.0 - 2.0 * p_ii })
    }
}

/// Join probability under the sequential-attempt rule, with node trees of
/// shape `branch` at uniform loss `eps`.
pub fn p_join_exact(branch: &BranchVector, k: u32, rates: FusionRates, eps: f64) -> f64 {
    p_join_levels(branch, k, rates, &[eps])
}

/// [`p_join_exact`] with per-level loss in the node trees.
pub fn p_join_levels(branch: &BranchVector, k: u32, rates: FusionRates, eps_by_level: &[f64]) -> f64 {
    let p = level_probs(branch, eps_by_level);
    let b0 = branch.b(0) as i32;
    let carry = rates.failure_zz + rates.erasure * p.r[0] * p.r[0];
    let clear = p.s[1].powi(b0).powi(2);
    let idle = p.s[0] * p.s[0];
    (0..k as i32).map(|i| carry.powi(i) * rates.success * clear * idle.powi(k as i32 - 1 - i)).sum()
}

/// `P_cycle^cycles`.
pub fn p_mem(cycles: u64, p_cz: f64, p_tree: f64) -> f64 {
    (p_cz * p_tree).powf(cycles as f64)
}

/// First-order form `[1 − N(1 − P_II)^k]·[1 − (2k + 1)·N·exp(−Q^{1/c})]`.
pub fn p_mem_approx(cycles: u64, k: u32, p_ii: f64, q: f64, fit: FitModel) -> f64 {
    let n = cycles as f64;
    let a = 1.0 - n * (1.0 - p_ii).powi(k as i32);
    let b = 1.0 - (2.0 * f64::from(k) + 1.0) * n * (-q.powf(1.0 / fit.c)).exp();
    a * b
}

/// `k' = k − ln(cycles)/ln(1 − P_II)`.
pub fn rescale_k(k: f64, p_ii: f64, cycles: f64) -> f64 {
    k - cycles.ln() / (-p_ii).ln_1p()
}

/// `Q'^{1/c} = Q^{1/c} + ln(cycles)`.
pub fn rescale_q(q: f64, fit: FitModel, cycles: f64) -> f64 {
    (q.powf(1.0 / fit.c) + cycles.ln()).powf(fit.c)
}

/// `survival·η_D·p_store^steps − 1/2`; the memory is viable iff ≥ 0.
pub fn threshold_margin(survival: f64, eta_d: f64, p_store: f64, storage_steps: u32) -> f64 {
    survival * eta_d * p_store.powi(storage_steps as i32) - 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treeproto::{exhaustive_probability, logical_x_feasible, TreeShape};
    use proptest::prelude::*;

    fn bv(s: &str) -> BranchVector {
        s.parse().unwrap()
    }

    #[test]
    fn type2_values() {
        assert_eq!(p_type2(0.0, 1.0), 0.5);
        assert_eq!(p_type2(1.0, 1.0), 0.0);
        assert!((p_type2(1.0 / 3.0, 0.95) - 0.2006).abs() < 1e-3);
    }

    #[test]
    fn effective_loss() {
        assert_eq!(compose_effective_loss(&PhysicalParams::default(), 0), 0.0);
        let p = PhysicalParams { p_store: p_store_for_aggregate(0.85, 25), ..Default::default() };
        assert!((compose_effective_loss(&p, 25) - 0.15).abs() < 1e-12);
        let p = PhysicalParams { eps: 0.3, eta_s: 0.95, ..p };
        let e = compose_effective_loss(&p, 25);
        assert!((e - (1.0 - 0.7 * 0.95 * 0.85)).abs() < 1e-12);
        assert!((p_type2(e, 0.95) - 0.14417).abs() < 1e-5);
    }

    #[test]
    fn indirect_z_values() {
        let b = bv("11,23,22,4,1");
        assert_eq!(indirect_z(&b, 5, 0.3), 0.0);
        assert_eq!(indirect_z(&b, 2, 0.0), 1.0);
        // Level 1: 23 children, each present with all 22 grandchildren
        // Z-measurable.
        let p = level_probs(&b, &[0.3]);
        let oracle = 1.0 - (1.0 - 0.7 * p.s[3].powi(22)).powi(23);
        assert!((indirect_z(&b, 1, 0.3) - oracle).abs() < 1e-15);
        assert!((indirect_z(&b, 1, 0.3) - 0.9999987).abs() < 1e-6);
    }

    #[test]
    fn closed_form_values() {
        let p = p_tree_closed_form(&bv("11,23,22,4,1"), 0.3);
        assert!((0.99997..1.0).contains(&p), "{p}");
        assert!((p - 0.999990).abs() < 1e-6, "{p}");
        assert_eq!(p_tree_closed_form(&bv("3,2"), 0.0), 1.0);
        assert_eq!(p_tree_closed_form(&bv("2,2"), 0.5), 0.15625);
    }

    #[test]
    fn fit_values() {
        let fit = FitModel::default();
        assert!((p_tree_fit(1.0, fit) - (1.0 - (-1f64).exp())).abs() < 1e-15);
        let q = q_required(0.99999, fit);
        assert!((q - 11.512925f64.powf(4.5)).abs() < 1.0);
        for q in [10.0, 1000.0, 50_000.0] {
            assert!((q_required(p_tree_fit(q, fit), fit) - q).abs() < 1.0);
        }
    }

    #[test]
    fn cz_and_k() {
        assert_eq!(p_cz(1, 0.5, 1.0), 0.5);
        assert!(p_cz(2000, 0.5, 1.0) > 1.0 - 1e-12);
        assert!(p_cz(74, 0.145, 1.0) >= 0.99999);
        assert_eq!(k_required(0.145, 0.99999).unwrap(), 74);
        assert_eq!(k_required(0.5, 0.5).unwrap(), 1);
        assert_eq!(k_required(0.9, 0.99).unwrap(), 2);
        assert!(k_required(0.0, 0.5).is_err());
        assert_eq!(k_required_full(0.145, 1.0, 0.99999).unwrap(), 74);
        assert!(k_required_full(0.145, 0.999, 0.99999).is_err());
    }

    #[test]
    fn cycles_are_even() {
        assert_eq!(MemorySpec::new(0.0, 5.0).unwrap().cycles(), 0);
        assert_eq!(MemorySpec::new(5.0, 5.0).unwrap().cycles(), 2);
        assert_eq!(MemorySpec::new(10.0, 5.0).unwrap().cycles(), 2);
        assert_eq!(MemorySpec::new(11.0, 5.0).unwrap().cycles(), 4);
        assert!(MemorySpec::new(1.0, 0.0).is_err());
    }

    #[test]
    fn memory_forms() {
        assert_eq!(p_mem(0, 0.3, 0.2), 1.0);
        assert!(p_mem(5, 0.99999, 1.0) >= 0.9999);
        let fit = FitModel::default();
        let (k, p_ii, q) = (74, 0.145, 400_000.0);
        let exact = p_mem(4, p_cz(k, p_ii, p_tree_fit(q, fit)), p_tree_fit(q, fit));
        let approx = p_mem_approx(4, k, p_ii, q, fit);
        assert!(4.0 * (1.0 - p_ii).powi(k as i32) < 1e-4);
        assert!(4.0 * 149.0 * (-q.powf(1.0 / fit.c)).exp() < 1e-4);
        assert!((exact - approx).abs() < 1e-6, "{exact} {approx}");
    }

    #[test]
    fn rescaling() {
        let fit = FitModel::default();
        assert_eq!(rescale_k(74.0, 0.145, 1.0), 74.0);
        assert!((rescale_q(5000.0, fit, 1.0) - 5000.0).abs() < 1e-9);
        let k2 = rescale_k(74.0, 0.145, 1e4);
        assert!((k2 - 74.0 - 58.8).abs() < 0.05, "{k2}");
    }

    #[test]
    fn thresholds() {
        assert_eq!(threshold_margin(1.0, 1.0, 1.0, 10), 0.5);
        let m = threshold_margin(0.7, 0.95, 0.85, 1);
        assert!((m - 0.065).abs() < 5e-4 && (m - (0.7 * 0.95 * 0.85 - 0.5)).abs() < 1e-15);
        let p = p_store_for_aggregate(0.85, 25);
        assert!((0.9930..=0.9940).contains(&p));
    }

    #[test]
    fn join_exact_limits() {
        let b = bv("2,2");
        let rates = FusionRates::from_p_ii(0.5).unwrap();
        assert!((p_join_exact(&b, 3, rates, 0.0) - (1.0 - 0.5f64.powi(3))).abs() < 1e-15);
        let rates = FusionRates::from_p_ii(0.145).unwrap();
        assert!((p_join_exact(&b, 74, rates, 0.0) - p_cz(74, 0.145, 1.0)).abs() < 1e-3);
        assert!(FusionRates::from_p_ii(0.6).is_err());
    }

    fn exhaustive_x(b: &BranchVector, eps: &[f64]) -> f64 {
        let shape = TreeShape::new(b).unwrap();
        exhaustive_probability(&shape, eps, logical_x_feasible)
    }

    fn small_branch() -> impl Strategy<Value = BranchVector> {
        prop::collection::vec(1u32..=4, 1..=3)
            .prop_map(|v| BranchVector::new(v).unwrap())
            .prop_filter("at most 12 vertices", |b| b.qubit_count() <= 12)
    }

    proptest! {
        #[test]
        fn closed_form_matches_enumeration(b in small_branch(), e in prop::collection::vec(0.0f64..1.0, 1..4)) {
            let exact = exhaustive_x(&b, &e);
            prop_assert!((p_tree_levels(&b, &e) - exact).abs() < 1e-12, "{b} {e:?}");
        }

        #[test]
        fn probabilities_in_range(b in prop::collection::vec(1u32..=40, 1..=6), eps in 0.0f64..=1.0,
                                  k in 1u32..200, p in 0.0f64..=1.0, eta in 0.0f64..=1.0) {
            let b = BranchVector::new(b).unwrap();
            let q = p_tree_closed_form(&b, eps);
            for v in [q, p_type2(eps, eta), p_cz(k, p, q), p_tree_fit(f64::from(k), FitModel::default()),
                      p_mem(u64::from(k), p_cz(k, p, q), q)] {
                prop_assert!((0.0..=1.0).contains(&v), "{v}");
            }
            for l in 0..=b.m() + 1 {
                let r = indirect_z(&b, l, eps);
                prop_assert!((0.0..=1.0).contains(&r));
            }
            if p <= 0.5 {
                let j = p_join_exact(&b, k.min(20), FusionRates::from_p_ii(p).unwrap(), eps);
                prop_assert!((0.0..=1.0 + 1e-12).contains(&j));
            }
        }

        #[test]
        fn r_monotone(b in prop::collection::vec(1u32..=8, 2..=4), lvl in 0usize..3, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
            let lvl = lvl.min(b.len() - 1);
            let base = BranchVector::new(b.clone()).unwrap();
            let mut more = b;
            more[lvl] += 1;
            let more = BranchVector::new(more).unwrap();
            prop_assert!(indirect_z(&more, lvl, e1) >= indirect_z(&base, lvl, e1) - 1e-12);
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            for l in 0..=base.m() {
                prop_assert!(indirect_z(&base, l, lo) >= indirect_z(&base, l, hi) - 1e-12);
            }
        }

        #[test]
        fn cz_and_mem_monotone(k in 1u32..300, p in 0.001f64..0.999, q in 0.0f64..=1.0, pt in 0.0f64..=1.0, n in 0u64..1000) {
            prop_assert!(p_cz(k + 1, p, 1.0) >= p_cz(k, p, 1.0));
            prop_assert!(p_mem(n + 1, q, pt) <= p_mem(n, q, pt));
        }

        #[test]
        fn rescale_identities(k in 1.0f64..500.0, p in 0.01f64..0.99, q in 1.0f64..1e6, c in 1.0f64..8.0, n in 1.0f64..1e6) {
            let fit = FitModel::new(c).unwrap();
            let k2 = rescale_k(k, p, n);
            let lhs = n.ln() + k2 * (-p).ln_1p();
            let rhs = k * (-p).ln_1p();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            let q2 = rescale_q(q, fit, n);
            let lhs = n.ln() - q2.powf(1.0 / c);
            let rhs = -q.powf(1.0 / c);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
        }
    }
}

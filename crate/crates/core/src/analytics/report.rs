//! One-shot evaluation of a memory configuration.

use serde::{Deserialize, Serialize};

use super::{
    compose_effective_loss, even_cycles, k_required, k_required_full, p_cz, p_cz_linearized, p_join_exact, p_mem,
    p_mem_approx, p_tree_closed_form, p_tree_fit, p_type2, q_required, threshold_margin, AnalyticsError, FitModel,
    FusionRates, PhysicalParams,
};
use crate::treeproto::hypertree::HypertreeSpec;
use crate::treeproto::schedule::{schedule, Schedule};
use crate::treeproto::BranchVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeInput {
    pub params: PhysicalParams,
    pub branch: BranchVector,
    /// Bonds per logical qubit.
    pub n: u32,
    /// Target for the join's first factor and for `k`.
    pub target: f64,
    pub fit: FitModel,
    pub c_const: u32,
    /// Steps each photon is stored; derived from the schedule when absent.
    pub storage_steps: Option<u32>,
    /// Loss seen by tree measurements; `eps_eff` when absent.
    pub tree_eps: Option<f64>,
    /// Fixed number of attempts per bond; `k_required` when absent.
    pub k: Option<u32>,
    /// Storage duration and cycle time in fusion steps.
    pub tau_mem: f64,
    pub tau_q: f64,
}

impl AnalyzeInput {
    pub fn new(params: PhysicalParams, branch: BranchVector) -> Self {
        AnalyzeInput {
            params,
            branch,
            n: 2,
            target: 0.99999,
            fit: FitModel::default(),
            c_const: 5,
            storage_steps: None,
            tree_eps: None,
            k: None,
            tau_mem: 10.0,
            tau_q: 5.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Photons {
    pub node: u128,
    pub central: u128,
    pub total: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub p_ii: f64,
    pub p_tree: f64,
    pub p_cz: f64,
    pub p_mem: f64,
    pub k: Option<u32>,
    /// Tree qubits without the root.
    pub q: u128,
    pub tau_max_steps: u32,
    pub threshold_margin: f64,
    pub branch: BranchVector,
    pub eps_eff: f64,
    pub tree_eps: f64,
    pub p_store: f64,
    pub storage_steps: u32,
    pub p_tree_fit: f64,
    pub q_fit: f64,
    pub k_full: Option<u32>,
    pub p_cz_linearized: Option<f64>,
    pub p_join_exact: Option<f64>,
    pub cycles: u64,
    pub p_mem_approx: Option<f64>,
    pub tau_max_exact: f64,
    /// `Σ log2 b_i + m + log2 k`, without the hypertree and constant terms.
    pub tau_max_core: Option<f64>,
    pub schedule: Option<Schedule>,
    pub photons: Option<Photons>,
    pub feasible: bool,
    pub notes: Vec<String>,
}

fn storage_fixed_point(input: &AnalyzeInput) -> Result<(u32, Option<u32>), AnalyticsError> {
    let mut steps = 0;
    let mut seen = Vec::new();
    loop {
        let p_ii = p_type2(compose_effective_loss(&input.params, steps), input.params.eta_d);
        let k = match input.k {
            Some(k) => Some(k),
            None => k_required(p_ii, input.target).ok(),
        };
        let Some(kk) = k else { return Ok((steps, None)) };
        let total = schedule(&input.branch, kk, input.n, input.c_const)
            .map_err(|e| AnalyticsError::InvalidParam(e.to_string()))?
            .total_steps;
        if total == steps || seen.contains(&total) {
            return Ok((total.max(steps), k));
        }
        seen.push(steps);
        steps = total;
    }
}

pub fn analyze(input: &AnalyzeInput) -> Result<Report, AnalyticsError> {
    input.params.validate()?;
    if !(input.target > 0.0 && input.target < 1.0) {
        return Err(AnalyticsError::InvalidParam(format!("target {} is not in (0, 1)", input.target)));
    }
    if input.n == 0 || input.k == Some(0) {
        return Err(AnalyticsError::InvalidParam("k and n must be ≥ 1".into()));
    }
    let mut notes = Vec::new();
    let (storage_steps, _) = match input.storage_steps {
        Some(s) => (s, None),
        None => storage_fixed_point(input)?,
    };
    let eps_eff = compose_effective_loss(&input.params, storage_steps);
    let p_ii = p_type2(eps_eff, input.params.eta_d);
    let tree_eps = input.tree_eps.unwrap_or(eps_eff);
    if !(0.0..=1.0).contains(&tree_eps) {
        return Err(AnalyticsError::InvalidParam(format!("tree_eps = {tree_eps} is not in [0, 1]")));
    }
    let p_tree = p_tree_closed_form(&input.branch, tree_eps);
    let k = match input.k {
        Some(k) => Some(k),
        None => k_required(p_ii, input.target).ok(),
    };
    if k.is_none() {
        notes.push("type-II success probability is zero; no attempt count reaches the target".into());
    }
    let q = input.branch.qubit_count_without_root();
    let cycles = even_cycles(input.tau_mem / input.tau_q);
    let (p_cz_v, p_mem_v) = match k {
        Some(k) => {
            let c = p_cz(k, p_ii, p_tree);
            (c, p_mem(cycles, c, p_tree))
        }
        None => (0.0, if cycles == 0 { 1.0 } else { 0.0 }),
    };
    let sched = match k {
        Some(k) => Some(schedule(&input.branch, k, input.n, input.c_const).map_err(|e| AnalyticsError::InvalidParam(e.to_string()))?),
        None => None,
    };
    let m = input.branch.m() as f64;
    let log_b: f64 = input.branch.as_slice().iter().map(|&b| f64::from(b).log2()).sum();
    let margin = threshold_margin(
        (1.0 - input.params.eps) * input.params.eta_s,
        input.params.eta_d,
        input.params.p_store,
        storage_steps,
    );
    if eps_eff >= 0.5 {
        notes.push(format!("effective loss {eps_eff:.4} is at or above 0.5; trees cannot suppress it"));
    }
    if margin < 0.0 {
        notes.push(format!("detection threshold violated by {:.4}", -margin));
    }
    let photons = match k {
        Some(k) => {
            let h = HypertreeSpec::new(input.branch.clone(), k, input.n).map_err(|e| AnalyticsError::InvalidParam(e.to_string()))?;
            Some(Photons { node: h.node_photons(), central: h.central_photons(), total: h.total_photons() })
        }
        None => None,
    };
    Ok(Report {
        p_ii,
        p_tree,
        p_cz: p_cz_v,
        p_mem: p_mem_v,
        k,
        q,
        tau_max_steps: sched.as_ref().map_or(0, |s| s.total_steps),
        threshold_margin: margin,
        branch: input.branch.clone(),
        eps_eff,
        tree_eps,
        p_store: input.params.p_store,
        storage_steps,
        p_tree_fit: p_tree_fit(q as f64, input.fit),
        q_fit: q_required(input.target, input.fit),
        k_full: k_required_full(p_ii, p_tree, input.target).ok(),
        p_cz_linearized: k.map(|k| p_cz_linearized(k, p_ii, q as f64, input.fit)),
        p_join_exact: k.map(|k| p_join_exact(&input.branch, k, FusionRates::from_p_ii(p_ii).expect("p_type2 ≤ 1/2"), tree_eps)),
        cycles,
        p_mem_approx: k.map(|k| p_mem_approx(cycles, k, p_ii, q as f64, input.fit)),
        tau_max_exact: sched.as_ref().map_or(0.0, |s| s.total_exact),
        tau_max_core: k.map(|k| log_b + m + f64::from(k).log2()),
        schedule: sched,
        photons,
        feasible: eps_eff < 0.5 && margin >= 0.0 && k.is_some(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::p_store_for_aggregate;

    fn worked_example() -> AnalyzeInput {
        let params = PhysicalParams { eps: 0.3, eta_d: 0.95, eta_s: 0.95, p_store: p_store_for_aggregate(0.85, 25), tau_ii: 1.0 };
        let mut input = AnalyzeInput::new(params, "11,23,22,4,1".parse().unwrap());
        input.storage_steps = Some(25);
        input
    }

    #[test]
    fn worked_example_values() {
        let r = analyze(&worked_example()).unwrap();
        assert!((r.p_ii - 0.14417).abs() < 1e-5);
        assert_eq!(r.k, Some(74));
        assert!((r.p_store - 0.99352).abs() < 1e-5);
        assert_eq!(r.tau_max_steps, 33);
        assert!((r.tau_max_core.unwrap() - 24.65).abs() < 0.01);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["p_ii", "p_tree", "p_cz", "p_mem", "k", "q", "tau_max_steps", "threshold_margin"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn worked_example_with_design_loss() {
        let mut input = worked_example();
        input.tree_eps = Some(0.3);
        let r = analyze(&input).unwrap();
        assert!(r.p_tree >= 0.99999 - 2e-5);
    }

    #[test]
    fn perfect_parameters() {
        let r = analyze(&AnalyzeInput::new(PhysicalParams::default(), "2,2".parse().unwrap())).unwrap();
        assert_eq!(r.p_tree, 1.0);
        assert_eq!(r.threshold_margin, 0.5);
        assert!(r.p_cz > 0.99999 && r.feasible);
    }

    #[test]
    fn high_loss_is_noted() {
        let params = PhysicalParams { eps: 0.6, ..Default::default() };
        let r = analyze(&AnalyzeInput::new(params, "2,2".parse().unwrap())).unwrap();
        assert!(!r.feasible);
        assert!(r.notes.iter().any(|n| n.contains("0.5")));
    }

    #[test]
    fn storage_steps_follow_schedule() {
        let mut input = worked_example();
        input.storage_steps = None;
        let r = analyze(&input).unwrap();
        assert_eq!(r.storage_steps, r.tau_max_steps);
    }
}

//! Subcommand handlers. Each validates its inputs, runs the core routine
//! and emits exactly one output document (plus a sidecar for `memory`).

use ltqm::analytics::{
    analyze as analyze_report, expected_two_tree_cost, k_required, optimize_branching, p_tree_closed_form, AnalyzeInput, FitModel,
    OptimizeBounds,
};
use ltqm::montecarlo::{run_build_sim, run_memory_sim, run_tree_trials, trial_rng, AgeModel, LossModel, MemoryMode, TrialConfig};
use ltqm::treeproto::schedule::schedule as build_schedule;
use ltqm::treeproto::pipeline::build_tree_by_fusion;
use ltqm::treeproto::{build_tree_instance, BranchVector};
use serde_json::json;

use crate::args::{
    AgeArg, AnalyzeArgs, BuildSimArgs, Format, MemoryArgs, OptimizeArgs, ScheduleArgs, TreeArgs, TreeTrialsArgs,
};
use crate::output::{emit, emit_report, to_json, write_atomic};
use crate::CliError;

const DEFAULT_BRANCH: &str = "11,23,22,4,1";

fn check_prob(name: &str, v: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{name} = {v} is not in [0, 1]")))
    }
}

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let params = a.phys.params()?;
    let mut input = AnalyzeInput::new(params, a.branch.clone());
    input.n = a.n;
    input.k = a.k;
    input.target = a.target;
    input.fit = FitModel::new(a.fit_c)?;
    input.c_const = a.c_const;
    input.storage_steps = a.phys.storage_steps;
    input.tree_eps = a.tree_eps;
    input.tau_q = f64::from(a.tau_q);
    if let Some(h) = a.horizon {
        input.tau_mem = h as f64;
    }
    let report = analyze_report(&input)?;
    emit_report(&a.out, &report)
}

pub fn optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    check_prob("eps", a.eps)?;
    let bounds = OptimizeBounds { max_depth: a.max_depth, max_branch: a.max_branch };
    let found = optimize_branching(a.eps, a.target, bounds)?;
    // Recheck the winner independently of the search.
    let recheck = p_tree_closed_form(&found.branch, a.eps);
    if recheck < a.target {
        return Err(CliError::Infeasible(format!("{} recheck gives {recheck}", found.branch)));
    }
    let doc = json!({
        "eps": a.eps,
        "target": a.target,
        "branch": found.branch.to_string(),
        "p_tree": recheck,
        "qubits": found.qubits,
        "qubits_without_root": found.branch.qubit_count_without_root(),
        "evaluated": found.evaluated,
    });
    emit_report(&a.out, &doc)
}

pub fn memory(a: &MemoryArgs) -> Result<(), CliError> {
    let params = a.phys.params()?;
    let loss_model = match (a.tree_eps, a.p_ii) {
        (Some(tree_eps), Some(p_ii)) => LossModel::Direct { tree_eps, p_ii },
        (None, None) => LossModel::Composed,
        _ => return Err(CliError::Invalid("--tree-eps and --p-ii must be given together".into())),
    };
    let mode = if a.unencoded {
        MemoryMode::Unencoded
    } else {
        let branch = match &a.branch {
            Some(b) => b.clone(),
            None => DEFAULT_BRANCH.parse::<BranchVector>()?,
        };
        let k = match (a.k, loss_model) {
            (Some(k), _) => k,
            (None, LossModel::Direct { p_ii, .. }) => k_required(p_ii, a.target)?,
            (None, LossModel::Composed) => {
                let mut input = AnalyzeInput::new(params, branch.clone());
                input.n = a.n;
                input.target = a.target;
                input.c_const = a.c_const;
                input.storage_steps = a.phys.storage_steps;
                analyze_report(&input)?
                    .k
                    .ok_or_else(|| CliError::Infeasible("no attempt count reaches the target".into()))?
            }
        };
        MemoryMode::Encoded { branch, k, n: a.n }
    };
    let mut cfg = TrialConfig::new(mode, params);
    cfg.seed = a.seed;
    cfg.trials = a.trials;
    cfg.horizon_steps = a.horizon;
    cfg.tau_q = a.tau_q;
    cfg.c_const = a.c_const;
    cfg.storage_steps = a.phys.storage_steps;
    cfg.loss_model = loss_model;
    cfg.age_model = match a.age_model {
        AgeArg::Pessimistic => AgeModel::PessimisticTauMax,
        AgeArg::PerLevel => AgeModel::PerLevel,
    };
    let curve = run_memory_sim(&cfg)?;
    let summary = json!({
        "trials_used": curve.trials_used,
        "cycles_attempted": curve.cycles_attempted,
        "cycles_survived": curve.cycles_survived,
        "per_cycle_survival": curve.per_cycle_survival,
        "per_cycle_ci": curve.per_cycle_ci,
        "analytic_per_cycle": curve.analytic_per_cycle,
        "tree_eps_by_level": curve.tree_eps_by_level,
        "p_ii": curve.p_ii,
        "final_p_mem": curve.points.last().map(|p| p.p_mem),
    });
    match a.format {
        Format::Csv => {
            let csv = curve.to_csv();
            if let Some(out) = &a.out {
                // Serialize both documents before touching the filesystem.
                let sidecar = to_json(&json!({ "config": cfg, "summary": summary }))?;
                write_atomic(out, &csv)?;
                write_atomic(&out.with_extension("json"), &sidecar)?;
                Ok(())
            } else {
                emit(None, &csv)
            }
        }
        Format::Json => {
            let doc = to_json(&json!({ "config": cfg, "summary": summary, "points": curve.points }))?;
            emit(a.out.as_deref(), &doc)
        }
    }
}

pub fn schedule(a: &ScheduleArgs) -> Result<(), CliError> {
    let s = build_schedule(&a.branch, a.k, a.n, a.c_const)?;
    emit_report(&a.out, &s)
}

pub fn tree_trials(a: &TreeTrialsArgs) -> Result<(), CliError> {
    check_prob("eps", a.eps)?;
    let est = run_tree_trials(&a.branch, &[a.eps], a.trials, a.seed)?;
    let exact = p_tree_closed_form(&a.branch, a.eps);
    let doc = json!({
        "branch": a.branch.to_string(),
        "eps": a.eps,
        "seed": a.seed,
        "estimate": est,
        "closed_form": exact,
        "z_score": if est.std_err > 0.0 { (est.mean - exact) / est.std_err } else { 0.0 },
    });
    emit_report(&a.out, &doc)
}

pub fn build_sim(a: &BuildSimArgs) -> Result<(), CliError> {
    check_prob("p_ii", a.p_ii)?;
    let stats = run_build_sim(&a.branch, a.p_ii, a.trials, a.seed)?;
    let expected = expected_two_tree_cost(&a.branch, a.p_ii)?;
    let doc = json!({
        "branch": a.branch.to_string(),
        "p_ii": a.p_ii,
        "seed": a.seed,
        "stats": stats,
        "two_tree_std_err": stats.two_tree_std_err(),
        "expected": expected,
    });
    emit_report(&a.out, &doc)
}

pub fn tree(a: &TreeArgs) -> Result<(), CliError> {
    let mut rng = trial_rng(a.seed, 0);
    let fused = build_tree_by_fusion(&a.branch, &mut rng)?;
    let direct = build_tree_instance(&a.branch)?;
    let port = fused.port;
    let tree_edges: Vec<[usize; 2]> = fused.graph.edges().into_iter().filter(|e| Some(e[1]) != port && Some(e[0]) != port).collect();
    let mut doc = json!({
        "branch": a.branch.to_string(),
        "seed": a.seed,
        "vertices": fused.graph.vertex_count(),
        "edges": fused.graph.edge_count(),
        "port": port,
        "matches_direct": tree_edges == direct.graph.edges(),
        "recorded_outcomes": fused.graph.outcome_log().len(),
    });
    if a.dump_graph {
        doc["graph"] = serde_json::to_value(fused.graph.snapshot()).map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    emit_report(&a.out, &doc)
}

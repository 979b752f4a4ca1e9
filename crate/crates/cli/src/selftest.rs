//! Built-in checks: the graph engine against dense state vectors, and the
//! reference configuration against its pinned values.

use ltqm::analytics::{analyze, p_store_for_aggregate, p_type2, q_required, AnalyzeInput, FitModel, PhysicalParams};
use ltqm::graphstate::oracle::{check_random_sequence, OracleConfig};
use ltqm::montecarlo::trial_rng;
use ltqm::treeproto::schedule::schedule;
use ltqm::treeproto::{exhaustive_probability, logical_x_feasible, BranchVector, TreeShape};

use crate::args::SelftestArgs;
use crate::CliError;

const REFERENCE_BRANCH: &str = "11,23,22,4,1";
/// Logical X success of the reference tree at 30 % loss.
const REFERENCE_P_TREE: f64 = 0.999_990_1;
const REFERENCE_TOL: f64 = 1e-7;
/// Allowed relative gap between the fitted qubit count and the reference tree.
const FIT_TOL: f64 = 0.25;

type Recursion = fn(&BranchVector, f64) -> f64;

/// Same recursion with the two branching exponents swapped. Used only as a
/// negative control.
fn tampered_p_tree(branch: &BranchVector, eps: f64) -> f64 {
    let levels = branch.m() + 2;
    let mut r = vec![0.0; levels];
    let mut s = vec![1.0; levels + 1];
    s[levels - 1] = 1.0 - eps;
    for l in (0..levels - 1).rev() {
        let (bl, bn) = (branch.b(l) as i32, branch.b(l + 1) as i32);
        r[l] = 1.0 - (1.0 - (1.0 - eps) * s[l + 2].powi(bl)).powi(bn);
        s[l] = (1.0 - eps) + eps * r[l];
    }
    let (b0, b1) = (branch.b(0) as i32, branch.b(1) as i32);
    ((s[1].powi(b0) - (eps * r[1]).powi(b0)) * s[2].powi(b1)).clamp(0.0, 1.0)
}

struct Checks {
    failed: usize,
}

impl Checks {
    fn report(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

pub fn run(a: &SelftestArgs) -> Result<(), CliError> {
    let mut c = Checks { failed: 0 };
    let recursion: Recursion = if a.tamper_recursion { tampered_p_tree } else { ltqm::analytics::p_tree_closed_form };

    let cfg = OracleConfig::default();
    let mut first_err = None;
    let mut bad = 0;
    for i in 0..a.graphs {
        if let Err(e) = check_random_sequence(&mut trial_rng(a.seed, i), &cfg) {
            bad += 1;
            first_err.get_or_insert(format!("graph {i}: {e}"));
        }
    }
    c.report(
        "graph engine vs dense states",
        bad == 0,
        match first_err {
            None => format!("{} random graphs", a.graphs),
            Some(e) => format!("{bad} of {} failed; {e}", a.graphs),
        },
    );

    let reference: BranchVector = REFERENCE_BRANCH.parse()?;
    let p = recursion(&reference, 0.3);
    c.report(
        "reference tree at 30% loss",
        (p - REFERENCE_P_TREE).abs() <= REFERENCE_TOL,
        format!("{p:.9} (pinned {REFERENCE_P_TREE} ± {REFERENCE_TOL:e})"),
    );

    let small: BranchVector = "2,3".parse()?;
    let shape = TreeShape::new(&small)?;
    let enumerated = exhaustive_probability(&shape, &[0.35], logical_x_feasible);
    let closed = recursion(&small, 0.35);
    c.report(
        "recursion vs loss enumeration",
        (closed - enumerated).abs() < 1e-12,
        format!("{closed:.12} vs {enumerated:.12}"),
    );

    let fit_c = a.force_c.unwrap_or(FitModel::default().c);
    let fit = FitModel::new(fit_c)?;
    let q_fit = q_required(0.99999, fit);
    let q_tree = reference.qubit_count_without_root() as f64;
    let gap = (q_fit - q_tree).abs() / q_tree;
    c.report(
        "fit consistency",
        gap <= FIT_TOL,
        format!("c = {fit_c}: fitted {q_fit:.0} vs tree {q_tree:.0} ({:.1}% apart, limit {:.0}%)", 100.0 * gap, 100.0 * FIT_TOL),
    );

    let ideal = p_type2(0.0, 1.0);
    c.report("ideal type-II success", ideal == 0.5, format!("{ideal}"));

    let params = PhysicalParams { eps: 0.3, eta_d: 0.95, eta_s: 0.95, p_store: p_store_for_aggregate(0.85, 25), tau_ii: 1.0 };
    let mut input = AnalyzeInput::new(params, reference.clone());
    input.storage_steps = Some(25);
    let report = analyze(&input)?;
    c.report("attempts per bond", report.k == Some(74), format!("k = {:?}", report.k));
    c.report(
        "storage survival per step",
        (0.9930..=0.9940).contains(&report.p_store),
        format!("{:.5}", report.p_store),
    );

    let s = schedule(&reference, 74, 2, 5)?;
    c.report("schedule length", s.total_steps == 33, format!("{} steps", s.total_steps));

    if c.failed == 0 {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(CliError::SelftestFailed(c.failed))
    }
}

//! Memory lifetime curves.
//!
//! An encoded memory repeats a cycle: join a fresh hypertree to the data
//! qubit through `k` sequential fusion attempts, then measure the old data
//! qubit's tree in X. A trial ends at the first failed cycle. Curves are
//! sampled at even cycle counts, where the stored state is the identity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trial_rng, wilson_interval, SimError};
use crate::analytics::{compose_effective_loss, p_join_levels, p_tree_levels, p_type2, FusionRates, PhysicalParams};
use crate::graphstate::FusionTag;
use crate::treeproto::hypertree::{join_decision, NodeOracle, Side};
use crate::treeproto::schedule::{ceil_log2, schedule};
use crate::treeproto::{indirect_z_feasible, logical_x_feasible, z_measurable, BranchVector, SampledLoss, TreeShape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemoryMode {
    /// A bare photon in storage.
    Unencoded,
    /// Tree-encoded data qubit refreshed by hypertree joins.
    Encoded { branch: BranchVector, k: u32, n: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossModel {
    /// Loss and fusion rate derived from the physical parameters and the
    /// storage exposure.
    Composed,
    /// Tree loss and fusion success given directly.
    Direct { tree_eps: f64, p_ii: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeModel {
    /// Every photon is stored for the full schedule length.
    #[default]
    PessimisticTauMax,
    /// Photons added at later construction steps are stored for less time.
    PerLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub seed: u64,
    pub trials: u64,
    pub params: PhysicalParams,
    pub mode: MemoryMode,
    /// Curve length in fusion time steps.
    pub horizon_steps: u64,
    pub age_model: AgeModel,
    pub loss_model: LossModel,
    /// Cycle time in fusion steps; also the sampling interval.
    pub tau_q: u32,
    pub c_const: u32,
    /// Storage exposure; the schedule length when absent.
    pub storage_steps: Option<u32>,
}

impl TrialConfig {
    pub fn new(mode: MemoryMode, params: PhysicalParams) -> Self {
        TrialConfig {
            seed: 0,
            trials: 1000,
            params,
            mode,
            horizon_steps: 1000,
            age_model: AgeModel::default(),
            loss_model: LossModel::Composed,
            tau_q: 5,
            c_const: 5,
            storage_steps: None,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        if self.trials == 0 {
            return Err(SimError::InvalidConfig("trials must be ≥ 1".into()));
        }
        if self.tau_q == 0 {
            return Err(SimError::InvalidConfig("tau_q must be ≥ 1".into()));
        }
        if let MemoryMode::Encoded { k, n, .. } = &self.mode {
            if *k == 0 || *n == 0 {
                return Err(SimError::InvalidConfig("k and n must be ≥ 1".into()));
            }
        }
        if let LossModel::Direct { tree_eps, p_ii } = self.loss_model {
            if !(0.0..=1.0).contains(&tree_eps) || !(0.0..=0.5).contains(&p_ii) {
                return Err(SimError::InvalidConfig("direct loss needs tree_eps in [0, 1] and p_ii in [0, 0.5]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t_steps: u64,
    pub p_mem: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialCurve {
    pub points: Vec<CurvePoint>,
    pub trials_used: u64,
    pub cycles_attempted: u64,
    pub cycles_survived: u64,
    /// Pooled cycle success rate; 1 for the unencoded mode.
    pub per_cycle_survival: f64,
    pub per_cycle_ci: (f64, f64),
    /// Closed-form cycle success for the same rates.
    pub analytic_per_cycle: Option<f64>,
    pub tree_eps_by_level: Vec<f64>,
    pub p_ii: Option<f64>,
}

impl TrialCurve {
    /// CSV with header `t_steps,p_mem,ci_low,ci_high`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_steps,p_mem,ci_low,ci_high\n");
        for p in &self.points {
            out.push_str(&format!("{},{:.9},{:.9},{:.9}\n", p.t_steps, p.p_mem, p.ci_low, p.ci_high));
        }
        out
    }
}

/// Storage steps for each tree level when photons join just in time.
fn level_ages(branch: &BranchVector, total: u32) -> Vec<u32> {
    let m = branch.m();
    let b = branch.as_slice();
    // Steps to finish the subtree whose top level is `j`.
    let t_sub = |j: usize| -> u32 { 2 + (j..=m).map(|i| ceil_log2(u64::from(b[i]))).sum::<u32>() + (m - j) as u32 };
    (0..=m + 1)
        .map(|l| {
            let created = if l < m { t_sub(l + 1).saturating_sub(1) } else { 0 };
            total.saturating_sub(created)
        })
        .collect()
}

struct Rates {
    eps: Vec<f64>,
    fusion: FusionRates,
}

fn encoded_rates(cfg: &TrialConfig, branch: &BranchVector, k: u32, n: u32) -> Result<Rates, SimError> {
    match cfg.loss_model {
        LossModel::Direct { tree_eps, p_ii } => Ok(Rates { eps: vec![tree_eps], fusion: FusionRates::from_p_ii(p_ii)? }),
        LossModel::Composed => {
            let total = match cfg.storage_steps {
                Some(s) => s,
                None => schedule(branch, k, n, cfg.c_const)?.total_steps,
            };
            let ages = match cfg.age_model {
                AgeModel::PessimisticTauMax => vec![total],
                AgeModel::PerLevel => level_ages(branch, total),
            };
            let eps: Vec<f64> = ages.iter().map(|&a| compose_effective_loss(&cfg.params, a)).collect();
            let p_ii = p_type2(eps[0], cfg.params.eta_d);
            Ok(Rates { eps, fusion: FusionRates::from_p_ii(p_ii)? })
        }
    }
}

struct SampledNodes<'a, R: Rng> {
    shape: &'a TreeShape,
    eps: &'a [f64],
    rng: &'a mut R,
}

impl<R: Rng> SampledNodes<'_, R> {
    /// Each node tree is queried once per join, so a fresh sample suffices.
    fn with_tree<T>(&mut self, f: impl FnOnce(&TreeShape, &mut SampledLoss<'_, &mut R>) -> T) -> T {
        let mut loss = SampledLoss::per_level(self.shape, self.eps.to_vec(), &mut *self.rng);
        f(self.shape, &mut loss)
    }
}

impl<R: Rng> NodeOracle for SampledNodes<'_, R> {
    fn children_clear(&mut self, _: Side, _: usize) -> bool {
        self.with_tree(|s, l| s.children(0).all(|c| z_measurable(s, c, l)))
    }

    fn node_inferable(&mut self, _: Side, _: usize) -> bool {
        self.with_tree(|s, l| indirect_z_feasible(s, 0, l))
    }

    fn node_z_measurable(&mut self, _: Side, _: usize) -> bool {
        self.with_tree(|s, l| z_measurable(s, 0, l))
    }
}

fn sample_tag(f: &FusionRates, rng: &mut impl Rng) -> FusionTag {
    let u: f64 = rng.random();
    if u < f.success {
        FusionTag::Success
    } else if u < f.success + f.failure_zz {
        FusionTag::FailureZZ
    } else {
        FusionTag::Erasure
    }
}

fn cycle_succeeds(shape: &TreeShape, k: u32, rates: &Rates, rng: &mut impl Rng) -> bool {
    let mut tags = Vec::with_capacity(8);
    while tags.len() < k as usize {
        let t = sample_tag(&rates.fusion, rng);
        tags.push(t);
        if t == FusionTag::Success {
            break;
        }
    }
    let mut nodes = SampledNodes { shape, eps: &rates.eps, rng: &mut *rng };
    if !join_decision(k as usize, &tags, &mut nodes).joined() {
        return false;
    }
    nodes.with_tree(|s, l| logical_x_feasible(s, l))
}

/// Survival curve of the stored qubit.
pub fn run_memory_sim(cfg: &TrialConfig) -> Result<TrialCurve, SimError> {
    cfg.validate()?;
    let tau_q = u64::from(cfg.tau_q);
    match &cfg.mode {
        MemoryMode::Unencoded => {
            let p = cfg.params.p_store;
            let lifetimes: Vec<u64> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    if p >= 1.0 {
                        return u64::MAX;
                    }
                    // P(T ≥ t) = p^t.
                    let u = 1.0 - trial_rng(cfg.seed, t).random::<f64>();
                    (u.ln() / p.ln()).floor() as u64
                })
                .collect();
            let points = curve(&lifetimes, cfg.trials, (0..=cfg.horizon_steps / tau_q).map(|j| (j * tau_q, j * tau_q)));
            Ok(TrialCurve {
                points,
                trials_used: cfg.trials,
                cycles_attempted: 0,
                cycles_survived: 0,
                per_cycle_survival: 1.0,
                per_cycle_ci: (1.0, 1.0),
                analytic_per_cycle: None,
                tree_eps_by_level: Vec::new(),
                p_ii: None,
            })
        }
        MemoryMode::Encoded { branch, k, n } => {
            let shape = TreeShape::new(branch)?;
            let rates = encoded_rates(cfg, branch, *k, *n)?;
            let max_cycles = cfg.horizon_steps / tau_q / 2 * 2;
            let survived: Vec<u64> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(cfg.seed, t);
                    let mut c = 0;
                    while c < max_cycles && cycle_succeeds(&shape, *k, &rates, &mut rng) {
                        c += 1;
                    }
                    c
                })
                .collect();
            let survived_total: u64 = survived.iter().sum();
            let failures = survived.iter().filter(|&&c| c < max_cycles).count() as u64;
            let attempted = survived_total + failures;
            let points = curve(&survived, cfg.trials, (0..=max_cycles / 2).map(|j| (2 * j * tau_q, 2 * j)));
            let (per_cycle, ci) = if attempted > 0 {
                (survived_total as f64 / attempted as f64, wilson_interval(survived_total, attempted, 1.96))
            } else {
                (1.0, (0.0, 1.0))
            };
            Ok(TrialCurve {
                points,
                trials_used: cfg.trials,
                cycles_attempted: attempted,
                cycles_survived: survived_total,
                per_cycle_survival: per_cycle,
                per_cycle_ci: ci,
                analytic_per_cycle: Some(p_join_levels(branch, *k, rates.fusion, &rates.eps) * p_tree_levels(branch, &rates.eps)),
                tree_eps_by_level: rates.eps.clone(),
                p_ii: Some(rates.fusion.success),
            })
        }
    }
}

/// `lifetimes[i]` is the number of units trial `i` survived; each sample
/// point pairs a time with the units it requires.
fn curve(lifetimes: &[u64], trials: u64, samples: impl Iterator<Item = (u64, u64)>) -> Vec<CurvePoint> {
    let mut sorted = lifetimes.to_vec();
    sorted.sort_unstable();
    samples
        .map(|(t, need)| {
            let alive = (sorted.len() - sorted.partition_point(|&l| l < need)) as u64;
            let (ci_low, ci_high) = wilson_interval(alive, trials, 1.96);
            CurvePoint { t_steps: t, p_mem: alive as f64 / trials as f64, ci_low, ci_high }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encoded(b: &str, k: u32) -> MemoryMode {
        MemoryMode::Encoded { branch: b.parse().unwrap(), k, n: 2 }
    }

    #[test]
    fn unencoded_decay() {
        let params = PhysicalParams { p_store: 0.993, ..Default::default() };
        let mut cfg = TrialConfig::new(MemoryMode::Unencoded, params);
        cfg.trials = 200_000;
        cfg.horizon_steps = 1000;
        let c = run_memory_sim(&cfg).unwrap();
        assert_eq!(c.points[0].p_mem, 1.0);
        for p in &c.points {
            let exact = 0.993f64.powf(p.t_steps as f64);
            let sd = (exact * (1.0 - exact) / cfg.trials as f64).sqrt();
            assert!((p.p_mem - exact).abs() <= 4.0 * sd + 1e-12, "{p:?} vs {exact}");
        }
    }

    #[test]
    fn perfect_storage_is_flat() {
        let mut cfg = TrialConfig::new(MemoryMode::Unencoded, PhysicalParams::default());
        cfg.trials = 50;
        let c = run_memory_sim(&cfg).unwrap();
        assert!(c.points.iter().all(|p| p.p_mem == 1.0));
    }

    #[test]
    fn encoded_matches_closed_form_cycle_rate() {
        let mut cfg = TrialConfig::new(encoded("2,2", 3), PhysicalParams::default());
        cfg.loss_model = LossModel::Direct { tree_eps: 0.2, p_ii: 0.3 };
        cfg.trials = 20_000;
        cfg.horizon_steps = 40;
        let c = run_memory_sim(&cfg).unwrap();
        let a = c.analytic_per_cycle.unwrap();
        let sd = (a * (1.0 - a) / c.cycles_attempted as f64).sqrt();
        assert!((c.per_cycle_survival - a).abs() <= 3.0 * sd, "{} vs {a}", c.per_cycle_survival);
        // Samples at even cycles only.
        assert_eq!(c.points[1].t_steps, 10);
        for w in c.points.windows(2) {
            assert!(w[1].p_mem <= w[0].p_mem);
        }
    }

    #[test]
    fn per_level_ages_reduce_loss() {
        let b: BranchVector = "2,3,2".parse().unwrap();
        let ages = level_ages(&b, 20);
        assert_eq!(ages.len(), 4);
        assert_eq!(ages[2], 20);
        assert!(ages[0] < ages[1] && ages[1] < ages[2]);
    }

    #[test]
    fn more_attempts_help() {
        let params = PhysicalParams { eps: 0.05, p_store: 0.999, ..Default::default() };
        let run = |k| {
            let mut cfg = TrialConfig::new(encoded("3,2", k), params);
            cfg.trials = 3000;
            cfg.horizon_steps = 100;
            run_memory_sim(&cfg).unwrap().points.last().unwrap().p_mem
        };
        assert!(run(6) >= run(2));
    }

    #[test]
    fn deterministic_across_pools() {
        let mut cfg = TrialConfig::new(encoded("2,2", 4), PhysicalParams { eps: 0.1, ..Default::default() });
        cfg.trials = 2000;
        cfg.seed = 17;
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_memory_sim(&cfg).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn config_round_trips() {
        let cfg = TrialConfig::new(encoded("11,23,22,4,1", 74), PhysicalParams::default());
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TrialConfig>(&s).unwrap(), cfg);
        assert!(s.contains("\"kind\":\"encoded\""));
    }
}

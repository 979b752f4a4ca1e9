//! Command-line surface. A JSON config file (`--config`) supplies flag
//! values by name; flags given on the command line win.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltqm::analytics::{p_store_for_aggregate, PhysicalParams};
use ltqm::treeproto::BranchVector;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "ltqm", version, about = "Tree-encoded photonic quantum memory: analysis and simulation")]
pub struct Cli {
    /// JSON file of flag values, e.g. {"eps": 0.3, "branch": "11,23,22,4,1"}.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-form report for one configuration.
    #[command(args_override_self = true)]
    Analyze(AnalyzeArgs),
    /// Smallest branching vector meeting a target.
    #[command(args_override_self = true)]
    Optimize(OptimizeArgs),
    /// Sampled memory lifetime curve.
    #[command(args_override_self = true)]
    Memory(MemoryArgs),
    /// Time-step schedule for one hypertree.
    #[command(args_override_self = true)]
    Schedule(ScheduleArgs),
    /// Sampled logical measurement success for a tree.
    #[command(args_override_self = true)]
    TreeTrials(TreeTrialsArgs),
    /// Sampled resource consumption of the fusion pipeline.
    #[command(args_override_self = true)]
    BuildSim(BuildSimArgs),
    /// Build a tree through the fusion pipeline on the graph-state engine.
    #[command(args_override_self = true)]
    Tree(TreeArgs),
    /// Engine oracle checks and reference reproductions.
    #[command(args_override_self = true)]
    Selftest(SelftestArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AgeArg {
    Pessimistic,
    PerLevel,
}

#[derive(Args, Debug, Clone)]
pub struct PhysArgs {
    /// Per-photon loss at creation.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
    /// Detector efficiency.
    #[arg(long, default_value_t = 1.0)]
    pub eta_d: f64,
    /// Source efficiency.
    #[arg(long, default_value_t = 1.0)]
    pub eta_s: f64,
    /// Storage survival per fusion time step.
    #[arg(long, conflicts_with = "storage_aggregate")]
    pub p_store: Option<f64>,
    /// Total storage survival over `--storage-steps`.
    #[arg(long, requires = "storage_steps")]
    pub storage_aggregate: Option<f64>,
    /// Storage exposure in fusion time steps.
    #[arg(long)]
    pub storage_steps: Option<u32>,
}

impl PhysArgs {
    pub fn params(&self) -> Result<PhysicalParams, CliError> {
        let p_store = match (self.p_store, self.storage_aggregate, self.storage_steps) {
            (Some(p), _, _) => p,
            (None, Some(a), Some(t)) => {
                if !(0.0..=1.0).contains(&a) || t == 0 {
                    return Err(CliError::Invalid("storage aggregate must be in [0, 1] over ≥ 1 steps".into()));
                }
                p_store_for_aggregate(a, t)
            }
            _ => 1.0,
        };
        let p = PhysicalParams { eps: self.eps, eta_d: self.eta_d, eta_s: self.eta_s, p_store, tau_ii: 1.0 };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    #[arg(long, default_value = "11,23,22,4,1")]
    pub branch: BranchVector,
    /// Fusion attempts per bond; derived from the target when absent.
    #[arg(long)]
    pub k: Option<u32>,
    /// Bonds per logical qubit.
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, default_value_t = 5)]
    pub c_const: u32,
    #[arg(long, default_value_t = 0.99999)]
    pub target: f64,
    #[arg(long, default_value_t = 4.5)]
    pub fit_c: f64,
    /// Loss seen by tree measurements, if different from the composed loss.
    #[arg(long)]
    pub tree_eps: Option<f64>,
    /// Cycle time in fusion steps.
    #[arg(long, default_value_t = 5)]
    pub tau_q: u32,
    /// Storage duration in fusion steps; two cycles when absent.
    #[arg(long)]
    pub horizon: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    /// Effective per-photon loss.
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.99999)]
    pub target: f64,
    #[arg(long, default_value_t = 5)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 32)]
    pub max_branch: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct MemoryArgs {
    #[command(flatten)]
    pub phys: PhysArgs,
    /// Simulate a bare stored photon.
    #[arg(long, conflicts_with_all = ["branch", "k", "tree_eps", "p_ii"])]
    pub unencoded: bool,
    #[arg(long)]
    pub branch: Option<BranchVector>,
    /// Fusion attempts per bond; derived from the target when absent.
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, default_value_t = 5)]
    pub c_const: u32,
    #[arg(long, default_value_t = 0.99999)]
    pub target: f64,
    /// Fixed tree loss; requires `--p-ii`.
    #[arg(long, requires = "p_ii")]
    pub tree_eps: Option<f64>,
    /// Fixed fusion success; requires `--tree-eps`.
    #[arg(long, requires = "tree_eps")]
    pub p_ii: Option<f64>,
    #[arg(long, value_enum, default_value_t = AgeArg::Pessimistic)]
    pub age_model: AgeArg,
    /// Curve length in fusion steps.
    #[arg(long, default_value_t = 1000)]
    pub horizon: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub tau_q: u32,
    /// Output file; the CSV gets a JSON sidecar next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    #[arg(long, default_value = "11,23,22,4,1")]
    pub branch: BranchVector,
    #[arg(long, default_value_t = 74)]
    pub k: u32,
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    #[arg(long, default_value_t = 5)]
    pub c_const: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct TreeTrialsArgs {
    #[arg(long)]
    pub branch: BranchVector,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct BuildSimArgs {
    #[arg(long)]
    pub branch: BranchVector,
    #[arg(long)]
    pub p_ii: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct TreeArgs {
    #[arg(long)]
    pub branch: BranchVector,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include the vertex and edge lists.
    #[arg(long)]
    pub dump_graph: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    /// Random graphs for the engine oracle.
    #[arg(long, default_value_t = 200)]
    pub graphs: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub force_c: Option<f64>,
    #[arg(long, hide = true)]
    pub tamper_recursion: bool,
}

/// Splice the config file's values in front of the command-line flags.
pub fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("config is not valid JSON: {e}")))?;
    let serde_json::Value::Object(map) = value else {
        return Err(CliError::Invalid("config must be a JSON object".into()));
    };
    let mut tokens: Vec<OsString> = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => {}
            serde_json::Value::Bool(true) => tokens.push(flag.into()),
            serde_json::Value::Number(n) => tokens.extend([flag.into(), n.to_string().into()]),
            serde_json::Value::String(s) => tokens.extend([flag.into(), s.into()]),
            serde_json::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                tokens.extend([flag.into(), joined.join(",").into()]);
            }
            serde_json::Value::Object(_) => return Err(CliError::Invalid(format!("config key {key} has a nested object"))),
        }
    }
    let split = argv.len().min(2);
    let mut out: Vec<OsString> = argv[..split].to_vec();
    out.extend(tokens);
    out.extend(argv[split..].iter().cloned());
    Ok(out)
}

//! Loss-tolerant linear-optical quantum memory: graph-state engine, tree
//! protocols, closed-form analytics and Monte Carlo simulation.

pub mod analytics;
pub mod graphstate;
pub mod montecarlo;
pub mod treeproto;

//! Hypertrees and the fusion-based logical CZ join.
//!
//! A hypertree is a central tree-encoded qubit `C` carrying `k·n` extra
//! node qubits, each the root of its own copy of the branch tree. Node
//! `bond·k + attempt` is the `attempt`-th fusion candidate for bond `bond`.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{indirect_z_feasible, z_measurable, BranchVector, LossPattern, LossView, TreeError, TreeShape};
use crate::graphstate::{Draw, DrawPair, FusionOutcome, FusionTag, GraphState, MeasurementBasis, VertexId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypertreeSpec {
    pub branch: BranchVector,
    /// Fusion attempts per bond.
    pub k: u32,
    /// Bonds per logical qubit.
    pub n: u32,
}

impl HypertreeSpec {
    pub fn new(branch: BranchVector, k: u32, n: u32) -> Result<Self, TreeError> {
        if k == 0 || n == 0 {
            return Err(TreeError::BadHypertree(format!("k = {k}, n = {n}; both must be ≥ 1")));
        }
        Ok(HypertreeSpec { branch, k, n })
    }

    /// Qubits `Q` of the branch tree, root excluded.
    pub fn q(&self) -> u128 {
        self.branch.qubit_count_without_root()
    }

    /// Photons on the node side: `n·k·(Q + 1)`.
    pub fn node_photons(&self) -> u128 {
        u128::from(self.n) * u128::from(self.k) * (self.q() + 1)
    }

    /// Photons of the central encoded tree, root included.
    pub fn central_photons(&self) -> u128 {
        self.branch.qubit_count()
    }

    pub fn total_photons(&self) -> u128 {
        self.node_photons() + self.central_photons()
    }
}

/// A hypertree cluster state. Vertex `0` is the centre; the central tree
/// uses ids `0..N`; node `j` is vertex `node_offset(j)` and its tree uses
/// ids `node_offset(j) .. node_offset(j) + N` with shape-local indexing.
#[derive(Clone, Debug)]
pub struct HypertreeInstance {
    pub graph: GraphState,
    pub spec: HypertreeSpec,
    pub shape: TreeShape,
}

impl HypertreeInstance {
    pub fn build(spec: &HypertreeSpec) -> Result<Self, TreeError> {
        let shape = TreeShape::new(&spec.branch)?;
        let n_tree = shape.vertex_count();
        let nodes = (spec.k * spec.n) as usize;
        let mut graph = GraphState::new_graph(n_tree * (nodes + 1));
        for t in 0..=nodes {
            let off = t * n_tree;
            for [p, c] in shape.edges() {
                graph.add_cz(off + p, off + c)?;
            }
            if t > 0 {
                graph.add_cz(0, off)?;
            }
        }
        Ok(HypertreeInstance { graph, spec: spec.clone(), shape })
    }

    pub fn centre(&self) -> VertexId {
        0
    }

    pub fn node_count(&self) -> usize {
        (self.spec.k * self.spec.n) as usize
    }

    pub fn node_offset(&self, j: usize) -> VertexId {
        (j + 1) * self.shape.vertex_count()
    }

    /// Node used by `attempt` of `bond`.
    pub fn node_index(&self, bond: usize, attempt: usize) -> usize {
        bond * self.spec.k as usize + attempt
    }

    pub fn vertex_total(&self) -> usize {
        self.shape.vertex_count() * (self.node_count() + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JoinOutcome {
    /// The first success happened at this attempt and every node cleaned up.
    Joined { attempt: usize },
    /// No attempt succeeded; both logical qubits are intact.
    NoSuccess,
    /// A node on `side` could not be neutralized; its logical qubit is
    /// damaged.
    Corrupted { side: Side, attempt: usize },
}

impl JoinOutcome {
    pub fn joined(self) -> bool {
        matches!(self, JoinOutcome::Joined { .. })
    }
}

/// Loss queries about the node trees taking part in one join.
pub trait NodeOracle {
    /// All children of the node are Z-measurable.
    fn children_clear(&mut self, side: Side, attempt: usize) -> bool;
    /// The node's Z value can be inferred from its tree.
    fn node_inferable(&mut self, side: Side, attempt: usize) -> bool;
    /// The node is present or inferable.
    fn node_z_measurable(&mut self, side: Side, attempt: usize) -> bool;
}

/// Decide a join from the sequential attempt outcomes. Attempts run in
/// order and stop at the first success; nodes after it, and nodes with no
/// supplied outcome, are removed by Z measurement.
pub fn join_decision(k: usize, outcomes: &[FusionTag], oracle: &mut impl NodeOracle) -> JoinOutcome {
    let attempted = outcomes.len().min(k);
    let mut first_unattempted = attempted;
    let mut joined = None;
    for (i, tag) in outcomes.iter().take(attempted).enumerate() {
        match tag {
            FusionTag::Success => {
                for side in [Side::A, Side::B] {
                    if !oracle.children_clear(side, i) {
                        return JoinOutcome::Corrupted { side, attempt: i };
                    }
                }
                joined = Some(i);
                first_unattempted = i + 1;
                break;
            }
            FusionTag::FailureZZ => {}
            FusionTag::Erasure => {
                for side in [Side::A, Side::B] {
                    if !oracle.node_inferable(side, i) {
                        return JoinOutcome::Corrupted { side, attempt: i };
                    }
                }
            }
        }
    }
    for j in first_unattempted..k {
        for side in [Side::A, Side::B] {
            if !oracle.node_z_measurable(side, j) {
                return JoinOutcome::Corrupted { side, attempt: j };
            }
        }
    }
    match joined {
        Some(attempt) => JoinOutcome::Joined { attempt },
        None => JoinOutcome::NoSuccess,
    }
}

/// A loss view over one node tree inside a hypertree-wide pattern.
struct Offset<'a> {
    base: &'a mut LossPattern,
    offset: usize,
}

impl LossView for Offset<'_> {
    fn is_lost(&mut self, v: usize) -> bool {
        self.base.is_lost(v + self.offset)
    }
}

struct InstanceOracle<'a> {
    shape: &'a TreeShape,
    offsets: [Vec<usize>; 2],
    losses: [&'a mut LossPattern; 2],
}

impl InstanceOracle<'_> {
    fn view(&mut self, side: Side, attempt: usize) -> Offset<'_> {
        let s = side as usize;
        Offset { offset: self.offsets[s][attempt], base: self.losses[s] }
    }
}

impl NodeOracle for InstanceOracle<'_> {
    fn children_clear(&mut self, side: Side, attempt: usize) -> bool {
        let shape = self.shape;
        let mut v = self.view(side, attempt);
        shape.children(0).all(|c| z_measurable(shape, c, &mut v))
    }

    fn node_inferable(&mut self, side: Side, attempt: usize) -> bool {
        let shape = self.shape;
        indirect_z_feasible(shape, 0, &mut self.view(side, attempt))
    }

    fn node_z_measurable(&mut self, side: Side, attempt: usize) -> bool {
        let shape = self.shape;
        z_measurable(shape, 0, &mut self.view(side, attempt))
    }
}

/// Result of a graph-level join.
#[derive(Clone, Debug)]
pub struct JoinedPair {
    pub outcome: JoinOutcome,
    /// Both hypertrees in one graph; `B`'s ids are shifted by `b_offset`.
    pub graph: GraphState,
    pub b_offset: VertexId,
}

/// Join the centres of `a` and `b` through the `k` node pairs of `bond`.
///
/// `losses` mark lost vertices of each hypertree (indexed by its own ids).
/// Nodes whose tree cannot be neutralized are left in place and the join is
/// reported as corrupted.
pub fn cz_join(
    a: &HypertreeInstance,
    b: &HypertreeInstance,
    bond: usize,
    outcomes: &[FusionOutcome],
    losses: [&mut LossPattern; 2],
    rng: &mut dyn RngCore,
) -> Result<JoinedPair, TreeError> {
    if a.spec != b.spec {
        return Err(TreeError::BadHypertree("join requires equal hypertree specs".into()));
    }
    let k = a.spec.k as usize;
    if bond >= a.spec.n as usize {
        return Err(TreeError::BadHypertree(format!("bond {bond} out of range")));
    }
    if outcomes.len() > k {
        return Err(TreeError::BadHypertree(format!("{} outcomes for k = {k}", outcomes.len())));
    }
    for (inst, l) in [(a, &losses[0]), (b, &losses[1])] {
        if l.len() != inst.vertex_total() {
            return Err(TreeError::BadHypertree("loss pattern size does not match the hypertree".into()));
        }
    }
    let offsets = |h: &HypertreeInstance| (0..k).map(|i| h.node_offset(h.node_index(bond, i))).collect::<Vec<_>>();
    let (oa, ob) = (offsets(a), offsets(b));
    let [la, lb] = losses;
    // A lost node cannot herald anything but an erasure.
    let outcomes: Vec<FusionOutcome> = outcomes
        .iter()
        .enumerate()
        .map(|(i, &o)| if la.get(oa[i]) || lb.get(ob[i]) { FusionOutcome::erasure() } else { o })
        .collect();
    let tags: Vec<FusionTag> = outcomes.iter().map(|o| o.tag).collect();
    let decision = {
        let mut oracle = InstanceOracle { shape: &a.shape, offsets: [oa.clone(), ob.clone()], losses: [&mut *la, &mut *lb] };
        join_decision(k, &tags, &mut oracle)
    };

    let mut graph = a.graph.clone();
    let b_offset = graph.absorb(&b.graph);
    if let JoinOutcome::Corrupted { .. } = decision {
        return Ok(JoinedPair { outcome: decision, graph, b_offset });
    }
    for v in la.ids() {
        graph.mark_lost(v)?;
    }
    for v in lb.ids() {
        graph.mark_lost(v + b_offset)?;
    }
    let n_tree = a.shape.vertex_count();
    let attempted = match decision {
        JoinOutcome::Joined { attempt } => attempt + 1,
        _ => outcomes.len(),
    };
    for i in 0..k {
        let (na, nb) = (oa[i], ob[i] + b_offset);
        if i < attempted {
            match outcomes[i].tag {
                FusionTag::Success | FusionTag::FailureZZ => {
                    graph.fuse_type2(na, nb, outcomes[i], DrawPair::Random(&mut *rng))?;
                }
                FusionTag::Erasure => {
                    graph.mark_lost(na)?;
                    graph.mark_lost(nb)?;
                    graph.infer_z(na, Draw::Random(&mut *rng))?;
                    graph.infer_z(nb, Draw::Random(&mut *rng))?;
                }
            }
        } else {
            for node in [na, nb] {
                remove_by_z(&mut graph, node, rng)?;
            }
        }
        for off in [oa[i], ob[i] + b_offset] {
            for v in off + 1..off + n_tree {
                remove_by_z(&mut graph, v, rng)?;
            }
        }
    }
    Ok(JoinedPair { outcome: decision, graph, b_offset })
}

fn remove_by_z(graph: &mut GraphState, v: VertexId, rng: &mut dyn RngCore) -> Result<(), TreeError> {
    if graph.is_lost(v) {
        graph.infer_z(v, Draw::Random(rng))?;
    } else {
        graph.measure(v, MeasurementBasis::Z, Draw::Random(rng))?;
    }
    Ok(())
}

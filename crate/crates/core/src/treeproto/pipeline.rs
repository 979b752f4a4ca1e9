//! Bottom-up tree construction by Type-II fusion.
//!
//! An n-tree is a star: the hub carries the redundantly encoded centre
//! together with the port, a bare leaf whose redundancy with the hub holds
//! in its Hadamard-rotated frame, and `n` node leaves. General fragments
//! keep the same hub/port pair on top of deeper levels. Fusing the hub of
//! `A` with the port of `B` hands all of `A`'s hub neighbours to `B`'s hub,
//! so the result is rooted at `B`'s hub with `A`'s port.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::RngCore;

use super::{BranchVector, TreeError, TreeInstance, TreeShape};
use crate::graphstate::{DrawPair, FusionOutcome, FusionTag, GraphState, VertexId};

/// A tree fragment under construction.
#[derive(Clone, Debug)]
pub struct Fragment {
    pub graph: GraphState,
    pub root: VertexId,
    pub port: VertexId,
}

impl Fragment {
    /// Children of the root other than the port.
    pub fn top_children(&self) -> Vec<VertexId> {
        self.graph
            .neighbors(self.root)
            .map(|ns| ns.iter().copied().filter(|&u| u != self.port).collect())
            .unwrap_or_default()
    }
}

/// Result of a post-selected fusion step.
#[derive(Clone, Debug)]
pub enum FusionResult {
    Fused(Fragment),
    /// The attempt did not succeed; both inputs are discarded.
    Failed(FusionTag),
}

impl FusionResult {
    pub fn fused(self) -> Option<Fragment> {
        match self {
            FusionResult::Fused(f) => Some(f),
            FusionResult::Failed(_) => None,
        }
    }
}

/// A three-photon GHZ state: hub, port and one node (a 1-tree).
pub fn ghz3() -> Fragment {
    star(1)
}

/// An `n`-tree built directly.
pub fn star(n: usize) -> Fragment {
    let mut g = GraphState::new_graph(n + 2);
    for v in 1..n + 2 {
        g.add_cz(0, v).expect("fresh vertices");
    }
    Fragment { graph: g, root: 0, port: 1 }
}

/// The 2-tree primitive: a redundantly encoded centre with two nodes.
pub fn build_two_tree() -> Fragment {
    star(2)
}

fn check_fragment(f: &Fragment) -> Result<(), TreeError> {
    if !f.graph.has_edge(f.root, f.port) || f.graph.neighbors(f.port)?.len() != 1 {
        return Err(TreeError::Malformed("port must be a leaf on the root".into()));
    }
    Ok(())
}

/// Fuse `A`'s hub with `B`'s port. On success the result is an
/// `(n + m)`-tree (or a fragment with merged top level).
pub fn fuse_n_m_trees(
    a: &Fragment,
    b: &Fragment,
    outcome: FusionOutcome,
    draws: DrawPair<'_>,
) -> Result<FusionResult, TreeError> {
    check_fragment(a)?;
    check_fragment(b)?;
    if outcome.tag != FusionTag::Success {
        return Ok(FusionResult::Failed(outcome.tag));
    }
    let mut g = a.graph.clone();
    let off = g.absorb(&b.graph);
    g.fuse_type2(a.root, b.port + off, outcome, draws)?;
    Ok(FusionResult::Fused(Fragment { graph: g, root: b.root + off, port: a.port }))
}

/// Fuse each node of `glue` with the port of one subtree. The glue hub
/// becomes the new root; every outcome must be a success.
pub fn add_level(
    subtrees: &[Fragment],
    glue: &Fragment,
    outcomes: &[FusionOutcome],
    rng: &mut dyn RngCore,
) -> Result<FusionResult, TreeError> {
    check_fragment(glue)?;
    let nodes = glue.top_children();
    if nodes.len() != subtrees.len() || outcomes.len() != subtrees.len() {
        return Err(TreeError::Malformed(format!(
            "glue has {} nodes for {} subtrees and {} outcomes",
            nodes.len(),
            subtrees.len(),
            outcomes.len()
        )));
    }
    if let Some(o) = outcomes.iter().find(|o| o.tag != FusionTag::Success) {
        return Ok(FusionResult::Failed(o.tag));
    }
    let mut g = glue.graph.clone();
    for ((sub, &x), &o) in subtrees.iter().zip(&nodes).zip(outcomes) {
        check_fragment(sub)?;
        let off = g.absorb(&sub.graph);
        g.fuse_type2(x, sub.port + off, o, DrawPair::Random(&mut *rng))?;
    }
    Ok(FusionResult::Fused(Fragment { graph: g, root: glue.root, port: glue.port }))
}

fn succeed(r: Result<FusionResult, TreeError>) -> Result<Fragment, TreeError> {
    r?.fused().ok_or_else(|| TreeError::Malformed("forced success did not fuse".into()))
}

/// `x`-tree by repeated halving; leaves are 1-trees.
fn build_star(x: u32, rng: &mut dyn RngCore) -> Result<Fragment, TreeError> {
    if x == 1 {
        return Ok(ghz3());
    }
    let a = build_star(x.div_ceil(2), rng)?;
    let b = build_star(x / 2, rng)?;
    succeed(fuse_n_m_trees(&a, &b, FusionOutcome::success(), DrawPair::Random(rng)))
}

fn build_upper(x: u32, sub: &dyn Fn(&mut dyn RngCore) -> Result<Fragment, TreeError>, rng: &mut dyn RngCore) -> Result<Fragment, TreeError> {
    match x {
        1 => {
            let s = sub(rng)?;
            succeed(add_level(&[s], &ghz3(), &[FusionOutcome::success()], rng))
        }
        2 => {
            let s1 = sub(rng)?;
            let s2 = sub(rng)?;
            let glue = build_star(2, rng)?;
            succeed(add_level(&[s1, s2], &glue, &[FusionOutcome::success(); 2], rng))
        }
        _ => {
            let a = build_upper(x.div_ceil(2), sub, rng)?;
            let b = build_upper(x / 2, sub, rng)?;
            succeed(fuse_n_m_trees(&a, &b, FusionOutcome::success(), DrawPair::Random(rng)))
        }
    }
}

fn build_from_level(branch: &BranchVector, j: usize, rng: &mut dyn RngCore) -> Result<Fragment, TreeError> {
    let b = branch.as_slice();
    if j == branch.m() {
        return build_star(b[j], rng);
    }
    let sub = |r: &mut dyn RngCore| build_from_level(branch, j + 1, r);
    build_upper(b[j], &sub, rng)
}

/// Run the full pipeline with every fusion succeeding (random outcome
/// signs) and return the tree with breadth-first ids.
pub fn build_tree_by_fusion(branch: &BranchVector, rng: &mut dyn RngCore) -> Result<TreeInstance, TreeError> {
    let frag = build_from_level(branch, 0, rng)?;
    into_instance(&frag, branch)
}

/// Relabel a fragment to breadth-first ids (root `0`, port last) and check
/// it has the tree shape of `branch`.
pub fn into_instance(frag: &Fragment, branch: &BranchVector) -> Result<TreeInstance, TreeError> {
    check_fragment(frag)?;
    let shape = TreeShape::new(branch)?;
    let g = &frag.graph;
    let mut order = Vec::with_capacity(shape.vertex_count());
    let mut seen = BTreeSet::from([frag.root, frag.port]);
    let mut queue = VecDeque::from([frag.root]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &u in g.neighbors(v)? {
            if seen.insert(u) {
                queue.push_back(u);
            }
        }
    }
    if order.len() != shape.vertex_count() || g.vertex_count() != shape.vertex_count() + 1 {
        return Err(TreeError::Malformed(format!(
            "fragment has {} tree vertices, {} expects {}",
            order.len(),
            branch,
            shape.vertex_count()
        )));
    }
    let mut map: BTreeMap<VertexId, VertexId> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    map.insert(frag.port, shape.vertex_count());
    let graph = g.relabeled(&map);
    let mut expected: BTreeSet<[usize; 2]> = shape.edges().into_iter().collect();
    expected.insert([0, shape.vertex_count()]);
    let actual: BTreeSet<[usize; 2]> = graph.edges().into_iter().collect();
    if actual != expected {
        return Err(TreeError::Malformed(format!("fragment is not a {branch} tree")));
    }
    Ok(TreeInstance { graph, shape, root: 0, port: Some(map[&frag.port]) })
}

//! Tree encodings: shape arithmetic, loss patterns, indirect-measurement
//! feasibility and measurement patterns.
//!
//! Trees use implicit breadth-first indexing: the root is `0`, each level is
//! a contiguous id range, and the children of a vertex are a contiguous
//! range of the next level. Level `l` vertices have `b_l` children; level
//! `m + 1` vertices are leaves.

pub mod hypertree;
pub mod pipeline;
pub mod schedule;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphstate::{GraphError, GraphState, Pauli};

/// Largest tree that [`TreeShape`] will index.
pub const MAX_TREE_VERTICES: u64 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("invalid branching vector: {0}")]
    InvalidBranch(String),
    #[error("tree with {0} vertices exceeds the indexing limit")]
    TooLarge(u64),
    #[error("no measurement pattern succeeds for this loss pattern")]
    Infeasible,
    #[error("schedule constant C = {0} is outside [5, 8]")]
    BadConstant(u32),
    #[error("invalid hypertree parameters: {0}")]
    BadHypertree(String),
    #[error("malformed input tree: {0}")]
    Malformed(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Branching parameters `{b_0, …, b_m}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct BranchVector(Vec<u32>);

impl BranchVector {
    pub fn new(b: Vec<u32>) -> Result<Self, TreeError> {
        if b.is_empty() {
            return Err(TreeError::InvalidBranch("empty".into()));
        }
        if b.contains(&0) {
            return Err(TreeError::InvalidBranch("branching parameters must be ≥ 1".into()));
        }
        Ok(BranchVector(b))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Depth index `m` (length − 1).
    pub fn m(&self) -> usize {
        self.0.len() - 1
    }

    /// `b_j`, or 0 beyond `m`.
    pub fn b(&self, j: usize) -> u32 {
        self.0.get(j).copied().unwrap_or(0)
    }

    /// Vertices per level, root first; `m + 2` entries.
    pub fn level_sizes(&self) -> Vec<u128> {
        let mut out = vec![1u128];
        for &b in &self.0 {
            let last = *out.last().expect("non-empty");
            out.push(last.saturating_mul(u128::from(b)));
        }
        out
    }

    /// Total physical qubits including the root.
    pub fn qubit_count(&self) -> u128 {
        self.level_sizes().iter().fold(0u128, |a, &s| a.saturating_add(s))
    }

    /// Qubits excluding the root.
    pub fn qubit_count_without_root(&self) -> u128 {
        self.qubit_count() - 1
    }
}

impl TryFrom<Vec<u32>> for BranchVector {
    type Error = TreeError;
    fn try_from(v: Vec<u32>) -> Result<Self, Self::Error> {
        BranchVector::new(v)
    }
}

impl From<BranchVector> for Vec<u32> {
    fn from(b: BranchVector) -> Self {
        b.0
    }
}

impl FromStr for BranchVector {
    type Err = TreeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim().trim_start_matches('{').trim_end_matches('}');
        let parts: Result<Vec<u32>, _> = trimmed.split(',').map(|p| p.trim().parse::<u32>()).collect();
        BranchVector::new(parts.map_err(|e| TreeError::InvalidBranch(format!("{s:?}: {e}")))?)
    }
}

impl fmt::Display for BranchVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Index arithmetic for the tree of a [`BranchVector`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeShape {
    branch: BranchVector,
    starts: Vec<usize>,
}

impl TreeShape {
    pub fn new(branch: &BranchVector) -> Result<Self, TreeError> {
        let total = branch.qubit_count();
        if total > u128::from(MAX_TREE_VERTICES) {
            return Err(TreeError::TooLarge(u64::try_from(total).unwrap_or(u64::MAX)));
        }
        let mut starts = vec![0usize];
        for s in branch.level_sizes() {
            let last = *starts.last().expect("non-empty");
            starts.push(last + s as usize);
        }
        Ok(TreeShape { branch: branch.clone(), starts })
    }

    pub fn branch(&self) -> &BranchVector {
        &self.branch
    }

    pub fn vertex_count(&self) -> usize {
        *self.starts.last().expect("non-empty")
    }

    /// Number of levels including root and leaves (`m + 2`).
    pub fn level_count(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn level(&self, l: usize) -> Range<usize> {
        self.starts[l]..self.starts[l + 1]
    }

    pub fn level_of(&self, v: usize) -> usize {
        self.starts.partition_point(|&s| s <= v) - 1
    }

    pub fn children(&self, v: usize) -> Range<usize> {
        let l = self.level_of(v);
        let b = self.branch.b(l) as usize;
        if b == 0 {
            return 0..0;
        }
        let first = self.starts[l + 1] + (v - self.starts[l]) * b;
        first..first + b
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        let l = self.level_of(v);
        if l == 0 {
            return None;
        }
        let b = self.branch.b(l - 1) as usize;
        Some(self.starts[l - 1] + (v - self.starts[l]) / b)
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.children(v).is_empty()
    }

    /// Parent–child edges in id order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        (1..self.vertex_count()).map(|v| [self.parent(v).expect("non-root"), v]).collect()
    }
}

/// Read access to per-vertex loss marks.
pub trait LossView {
    fn is_lost(&mut self, v: usize) -> bool;
}

/// An explicit set of lost vertices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossPattern {
    lost: Vec<bool>,
}

impl LossPattern {
    pub fn none(n: usize) -> Self {
        LossPattern { lost: vec![false; n] }
    }

    pub fn from_ids(n: usize, ids: impl IntoIterator<Item = usize>) -> Self {
        let mut p = Self::none(n);
        for v in ids {
            p.lost[v] = true;
        }
        p
    }

    /// Bit `i` of `mask` marks vertex `offset + i`.
    pub fn from_mask(n: usize, offset: usize, mask: u64) -> Self {
        Self::from_ids(n, (0..64).filter(|i| mask >> i & 1 == 1).map(|i| offset + i))
    }

    pub fn set(&mut self, v: usize, lost: bool) {
        self.lost[v] = lost;
    }

    pub fn get(&self, v: usize) -> bool {
        self.lost[v]
    }

    pub fn ids(&self) -> Vec<usize> {
        self.lost.iter().enumerate().filter(|(_, &l)| l).map(|(i, _)| i).collect()
    }

    pub fn len(&self) -> usize {
        self.lost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lost.is_empty()
    }
}

impl LossView for LossPattern {
    fn is_lost(&mut self, v: usize) -> bool {
        self.lost[v]
    }
}

/// Independent Bernoulli loss, sampled on first access and memoized.
pub struct SampledLoss<'a, R: Rng> {
    shape: &'a TreeShape,
    eps_by_level: Vec<f64>,
    rng: R,
    cache: FxHashMap<usize, bool>,
}

impl<'a, R: Rng> SampledLoss<'a, R> {
    pub fn uniform(shape: &'a TreeShape, eps: f64, rng: R) -> Self {
        Self::per_level(shape, vec![eps; shape.level_count()], rng)
    }

    /// `eps_by_level[l]` is the loss rate of level-`l` vertices; missing
    /// levels reuse the last entry.
    pub fn per_level(shape: &'a TreeShape, eps_by_level: Vec<f64>, rng: R) -> Self {
        SampledLoss { shape, eps_by_level, rng, cache: FxHashMap::default() }
    }

    pub fn into_rng(self) -> R {
        self.rng
    }

    /// Number of vertices sampled so far.
    pub fn sampled(&self) -> usize {
        self.cache.len()
    }
}

impl<R: Rng> LossView for SampledLoss<'_, R> {
    fn is_lost(&mut self, v: usize) -> bool {
        if let Some(&l) = self.cache.get(&v) {
            return l;
        }
        let level = self.shape.level_of(v);
        let eps = *self.eps_by_level.get(level).or(self.eps_by_level.last()).unwrap_or(&0.0);
        let l = eps > 0.0 && self.rng.random_bool(eps.min(1.0));
        self.cache.insert(v, l);
        l
    }
}

/// A lost vertex's Z value can be inferred: some child is present and all
/// of that child's children are Z-measurable.
pub fn indirect_z_feasible(shape: &TreeShape, v: usize, loss: &mut impl LossView) -> bool {
    shape
        .children(v)
        .any(|c| !loss.is_lost(c) && shape.children(c).all(|g| z_measurable(shape, g, loss)))
}

/// `v` can be measured in Z directly or indirectly.
pub fn z_measurable(shape: &TreeShape, v: usize, loss: &mut impl LossView) -> bool {
    !loss.is_lost(v) || indirect_z_feasible(shape, v, loss)
}

/// The level-1 vertex that carries the direct measurement: the lowest-id
/// present one.
pub fn logical_anchor(shape: &TreeShape, loss: &mut impl LossView) -> Option<usize> {
    shape.level(1).find(|&q| !loss.is_lost(q))
}

/// Logical measurement of the encoded qubit succeeds: every level-1 vertex
/// is Z-measurable, and the anchor's children are all Z-measurable.
pub fn logical_x_feasible(shape: &TreeShape, loss: &mut impl LossView) -> bool {
    if !shape.level(1).all(|q| z_measurable(shape, q, loss)) {
        return false;
    }
    match logical_anchor(shape, loss) {
        Some(a) => shape.children(a).all(|g| z_measurable(shape, g, loss)),
        None => false,
    }
}

/// Z of the root can be inferred from the tree.
pub fn logical_z_feasible(shape: &TreeShape, loss: &mut impl LossView) -> bool {
    indirect_z_feasible(shape, 0, loss)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetBasis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepAction {
    Measure(Pauli),
    /// The vertex is lost; its Z value is reconstructed from later steps.
    InferZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternStep {
    pub vertex: usize,
    pub action: StepAction,
}

impl PatternStep {
    fn measure(vertex: usize, p: Pauli) -> Self {
        PatternStep { vertex, action: StepAction::Measure(p) }
    }
}

/// Two-phase pattern: level-1 measurements, then Pauli-only completion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementPattern {
    pub target: TargetBasis,
    pub phase1: Vec<PatternStep>,
    pub phase2: Vec<PatternStep>,
}

impl MeasurementPattern {
    pub fn steps(&self) -> impl Iterator<Item = &PatternStep> {
        self.phase1.iter().chain(&self.phase2)
    }
}

/// Steps that obtain Z of `v`; `v` must be Z-measurable.
fn resolve_z(shape: &TreeShape, v: usize, loss: &mut impl LossView, out: &mut Vec<PatternStep>) {
    if !loss.is_lost(v) {
        out.push(PatternStep::measure(v, Pauli::Z));
        return;
    }
    let helper = shape
        .children(v)
        .find(|&c| !loss.is_lost(c) && shape.children(c).all(|g| z_measurable(shape, g, loss)))
        .expect("caller checked z_measurable");
    out.push(PatternStep { vertex: v, action: StepAction::InferZ });
    out.push(PatternStep::measure(helper, Pauli::X));
    for g in shape.children(helper) {
        resolve_z(shape, g, loss, out);
    }
}

/// Measurement pattern for a logical X or Z measurement under `loss`.
///
/// Target X: X on the anchor and Z on the other level-1 vertices, then Z on
/// the anchor's children and indirect Z for lost level-1 vertices.
/// Target Z: X on every present level-1 vertex, then Z on their children
/// wherever obtainable; one of them must be fully resolvable.
pub fn measurement_pattern(
    shape: &TreeShape,
    loss: &mut impl LossView,
    target: TargetBasis,
) -> Result<MeasurementPattern, TreeError> {
    let mut phase1 = Vec::new();
    let mut phase2 = Vec::new();
    match target {
        TargetBasis::X => {
            if !logical_x_feasible(shape, loss) {
                return Err(TreeError::Infeasible);
            }
            let anchor = logical_anchor(shape, loss).expect("feasible implies an anchor");
            phase1.push(PatternStep::measure(anchor, Pauli::X));
            let mut lost_level1 = Vec::new();
            for q in shape.level(1) {
                if q == anchor {
                    continue;
                }
                if loss.is_lost(q) {
                    lost_level1.push(q);
                } else {
                    phase1.push(PatternStep::measure(q, Pauli::Z));
                }
            }
            for g in shape.children(anchor) {
                resolve_z(shape, g, loss, &mut phase2);
            }
            for q in lost_level1 {
                resolve_z(shape, q, loss, &mut phase2);
            }
        }
        TargetBasis::Z => {
            if !logical_z_feasible(shape, loss) {
                return Err(TreeError::Infeasible);
            }
            for q in shape.level(1) {
                if !loss.is_lost(q) {
                    phase1.push(PatternStep::measure(q, Pauli::X));
                    for g in shape.children(q) {
                        if z_measurable(shape, g, loss) {
                            resolve_z(shape, g, loss, &mut phase2);
                        }
                    }
                }
            }
        }
    }
    Ok(MeasurementPattern { target, phase1, phase2 })
}

/// Stabilizer-level check: some product of tree stabilizers acts as `Z` on
/// the root, trivially on lost vertices, and without `X` on the root.
/// Equivalently, the root's Z value is readable from Pauli measurements of
/// present vertices. Limited to 128 non-root vertices.
pub fn root_z_inferable(shape: &TreeShape, loss: &LossPattern) -> bool {
    let n = shape.vertex_count();
    let available: Vec<usize> = (1..n).filter(|&v| !loss.get(v)).collect();
    assert!(available.len() <= 128, "stabilizer oracle is limited to small trees");
    let col: HashMap<usize, usize> = available.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    // Z-support of ∏ K_u on vertex w is the parity of chosen neighbours of w.
    let neighbours = |w: usize| -> Vec<usize> {
        let mut ns: Vec<usize> = shape.children(w).collect();
        ns.extend(shape.parent(w));
        ns
    };
    let row_of = |w: usize| -> u128 {
        neighbours(w).iter().filter_map(|u| col.get(u)).fold(0u128, |acc, &i| acc | (1u128 << i))
    };
    // Rows: lost vertices must see even parity, the root odd parity.
    let mut rows: Vec<(u128, bool)> = loss.ids().into_iter().filter(|&v| v != 0).map(|v| (row_of(v), false)).collect();
    rows.push((row_of(0), true));
    gf2_solvable(rows)
}

/// Whether the GF(2) system `{row · s = rhs}` has a solution.
fn gf2_solvable(mut rows: Vec<(u128, bool)>) -> bool {
    let mut pivot_row = 0;
    for bit in 0..128 {
        let Some(p) = (pivot_row..rows.len()).find(|&r| rows[r].0 >> bit & 1 == 1) else {
            continue;
        };
        rows.swap(pivot_row, p);
        let (prow, prhs) = rows[pivot_row];
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivot_row && row.0 >> bit & 1 == 1 {
                row.0 ^= prow;
                row.1 ^= prhs;
            }
        }
        pivot_row += 1;
    }
    rows.iter().all(|&(r, rhs)| r != 0 || !rhs)
}

/// Exact probability of `pred` over all loss patterns of the non-root
/// vertices, with per-level loss rates. Limited to 24 non-root vertices.
pub fn exhaustive_probability(
    shape: &TreeShape,
    eps_by_level: &[f64],
    mut pred: impl FnMut(&TreeShape, &mut LossPattern) -> bool,
) -> f64 {
    let n = shape.vertex_count();
    let k = n - 1;
    assert!(k <= 24, "exhaustive enumeration is limited to 24 non-root vertices");
    let eps: Vec<f64> = (1..n)
        .map(|v| {
            let l = shape.level_of(v);
            *eps_by_level.get(l).or(eps_by_level.last()).expect("non-empty rates")
        })
        .collect();
    let mut total = 0.0;
    for mask in 0u64..(1u64 << k) {
        let mut w = 1.0;
        for (i, e) in eps.iter().enumerate() {
            w *= if mask >> i & 1 == 1 { *e } else { 1.0 - e };
        }
        if w == 0.0 {
            continue;
        }
        let mut p = LossPattern::from_mask(n, 1, mask);
        if pred(shape, &mut p) {
            total += w;
        }
    }
    total
}

/// A tree cluster state together with its shape. Vertex ids coincide with
/// shape ids; a redundant partner of the root, if present, has id
/// `shape.vertex_count()`.
#[derive(Clone, Debug)]
pub struct TreeInstance {
    pub graph: GraphState,
    pub shape: TreeShape,
    pub root: usize,
    pub port: Option<usize>,
}

impl TreeInstance {
    pub fn level_of(&self, v: usize) -> usize {
        self.shape.level_of(v)
    }
}

/// The tree cluster state for `branch`, built directly from its edges.
pub fn build_tree_instance(branch: &BranchVector) -> Result<TreeInstance, TreeError> {
    let shape = TreeShape::new(branch)?;
    let mut graph = GraphState::new_graph(shape.vertex_count());
    for [p, c] in shape.edges() {
        graph.add_cz(p, c)?;
    }
    Ok(TreeInstance { graph, shape, root: 0, port: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bv(s: &str) -> BranchVector {
        s.parse().unwrap()
    }

    #[test]
    fn counts_and_parsing() {
        let b = bv("11,23,22,4,1");
        assert_eq!(b.level_sizes(), vec![1, 11, 253, 5566, 22264, 22264]);
        assert_eq!(b.qubit_count(), 50_359);
        assert_eq!(b.qubit_count_without_root(), 50_358);
        assert_eq!(b.to_string(), "{11,23,22,4,1}");
        assert_eq!(bv("{2,2,2}").qubit_count(), 15);
        assert_eq!(bv("1").qubit_count(), 2);
        assert!("".parse::<BranchVector>().is_err());
        assert!("2,0".parse::<BranchVector>().is_err());
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "[11,23,22,4,1]");
        assert!(serde_json::from_str::<BranchVector>("[]").is_err());
    }

    #[test]
    fn shape_indexing() {
        let s = TreeShape::new(&bv("2,3")).unwrap();
        assert_eq!(s.vertex_count(), 9);
        assert_eq!(s.children(0), 1..3);
        assert_eq!(s.children(1), 3..6);
        assert_eq!(s.children(2), 6..9);
        assert_eq!(s.parent(7), Some(2));
        assert_eq!(s.level_of(8), 2);
        assert!(s.is_leaf(8));
        for v in 1..9 {
            assert!(s.children(s.parent(v).unwrap()).contains(&v));
        }
    }

    #[test]
    fn z_measurable_examples() {
        let s = TreeShape::new(&bv("1,2")).unwrap();
        // 0 - 1 - {2, 3}
        assert!(z_measurable(&s, 2, &mut LossPattern::none(4)));
        assert!(!z_measurable(&s, 2, &mut LossPattern::from_ids(4, [2])));
        let s5 = TreeShape::new(&bv("1,1,2")).unwrap();
        // Lost 1, present child 2 whose children 3, 4 are present.
        assert!(z_measurable(&s5, 1, &mut LossPattern::from_ids(5, [1])));
        assert!(!z_measurable(&s5, 1, &mut LossPattern::from_ids(5, [1, 3])));
    }

    #[test]
    fn logical_x_examples() {
        let s = TreeShape::new(&bv("2,2")).unwrap();
        assert!(logical_x_feasible(&s, &mut LossPattern::none(7)));
        assert!(!logical_x_feasible(&s, &mut LossPattern::from_ids(7, [1, 2])));
        let p = exhaustive_probability(&s, &[0.5], logical_x_feasible);
        assert!((p - 0.15625).abs() < 1e-15);
    }

    #[test]
    fn pattern_loss_free_two_two() {
        let s = TreeShape::new(&bv("2,2")).unwrap();
        let px = measurement_pattern(&s, &mut LossPattern::none(7), TargetBasis::X).unwrap();
        assert_eq!(px.phase1, vec![PatternStep::measure(1, Pauli::X), PatternStep::measure(2, Pauli::Z)]);
        assert_eq!(px.phase2, vec![PatternStep::measure(3, Pauli::Z), PatternStep::measure(4, Pauli::Z)]);
        let pz = measurement_pattern(&s, &mut LossPattern::none(7), TargetBasis::Z).unwrap();
        assert_eq!(pz.phase1, vec![PatternStep::measure(1, Pauli::X), PatternStep::measure(2, Pauli::X)]);
        assert_eq!(pz.phase2.len(), 4);
        assert!(pz.phase2.iter().all(|s| s.action == StepAction::Measure(Pauli::Z)));
    }

    #[test]
    fn pattern_routes_through_indirect_z() {
        let s = TreeShape::new(&bv("2,2")).unwrap();
        let mut loss = LossPattern::from_ids(7, [2]);
        let p = measurement_pattern(&s, &mut loss, TargetBasis::X).unwrap();
        assert_eq!(p.phase1, vec![PatternStep::measure(1, Pauli::X)]);
        assert!(p.phase2.contains(&PatternStep { vertex: 2, action: StepAction::InferZ }));
        assert!(p.phase2.contains(&PatternStep::measure(5, Pauli::X)));
        let mut dead = LossPattern::from_ids(7, [1, 2]);
        assert_eq!(measurement_pattern(&s, &mut dead, TargetBasis::X), Err(TreeError::Infeasible));
    }

    #[test]
    fn sampled_loss_is_memoized_and_per_level() {
        let s = TreeShape::new(&bv("3,3")).unwrap();
        let mut l = SampledLoss::per_level(&s, vec![0.0, 1.0, 0.0], ChaCha8Rng::seed_from_u64(3));
        assert!(l.is_lost(1) && l.is_lost(3 - 1));
        assert!(!l.is_lost(5));
        assert_eq!(l.sampled(), 3);
        assert!(!logical_x_feasible(&s, &mut l));
    }

    #[test]
    fn gf2_solver() {
        assert!(gf2_solvable(vec![(0b11, true), (0b01, false)]));
        assert!(!gf2_solvable(vec![(0b01, true), (0b01, false)]));
        assert!(!gf2_solvable(vec![(0, true)]));
    }

    #[test]
    fn tree_instance_stabilizers() {
        let t = build_tree_instance(&bv("2,2,2")).unwrap();
        assert_eq!(t.graph.vertex_count(), 15);
        assert_eq!(t.graph.edge_count(), 14);
        let d = t.graph.to_statevector_capped(15).unwrap();
        for s in t.graph.stabilizer_generators() {
            assert!((d.expectation(&s).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}

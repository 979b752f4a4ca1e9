//! Graph states with a local-Clifford frame, heralded loss, Pauli
//! measurements and Type-II fusion.
//!
//! The represented state is `(⊗_v C_v) |G⟩`, where `|G⟩` is the bare graph
//! state `∏_{(a,b)∈E} CZ_ab |+⟩^{⊗n}` and `C_v` is the vertex operator of
//! `v`. Measurements and fusions are resolved on the bare graph by pulling
//! the measured Pauli back through the frame.

pub mod clifford;
pub mod dense;
pub mod oracle;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clifford::{LocalClifford, Pauli, SignedPauli};
pub use dense::DenseState;

use num_complex::Complex64;

pub type VertexId = usize;

/// Default qubit cap for [`GraphState::to_statevector`].
pub const DENSE_CAP: usize = 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("self-loop on vertex {0}")]
    SelfLoop(VertexId),
    #[error("vertex {0} is lost; its outcome must be inferred")]
    LostVertex(VertexId),
    #[error("vertex {0} is not marked lost")]
    NotLost(VertexId),
    #[error("rotated bases are only supported by the dense oracle")]
    RotatedBasis,
    #[error("forced outcome {outcome} on vertex {vertex} has probability zero")]
    ImpossibleOutcome { vertex: VertexId, outcome: i8 },
    #[error("fusion inputs {0} and {1} are adjacent")]
    AdjacentFusion(VertexId, VertexId),
    #[error("outcome must be +1 or -1, got {0}")]
    BadOutcome(i8),
    #[error("{n} qubits exceed the dense-oracle cap of {cap}")]
    TooLarge { n: usize, cap: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasurementBasis {
    X,
    Y,
    Z,
    /// `cos(θ) X + sin(θ) Y`.
    Rotated(f64),
}

impl MeasurementBasis {
    fn pauli(self) -> Result<Pauli, GraphError> {
        match self {
            MeasurementBasis::X => Ok(Pauli::X),
            MeasurementBasis::Y => Ok(Pauli::Y),
            MeasurementBasis::Z => Ok(Pauli::Z),
            MeasurementBasis::Rotated(_) => Err(GraphError::RotatedBasis),
        }
    }

    pub fn from_pauli(p: Pauli) -> Option<Self> {
        match p {
            Pauli::X => Some(MeasurementBasis::X),
            Pauli::Y => Some(MeasurementBasis::Y),
            Pauli::Z => Some(MeasurementBasis::Z),
            Pauli::I => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionTag {
    Success,
    FailureZZ,
    Erasure,
}

/// Detector record of one Type-II attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FusionOutcome {
    pub tag: FusionTag,
    pub detector_counts: (u8, u8),
}

impl FusionOutcome {
    /// Classify raw photon counts; `None` if a count exceeds 2 or the total
    /// exceeds 2.
    pub fn from_counts(m1: u8, m2: u8) -> Option<Self> {
        if m1 > 2 || m2 > 2 || m1 + m2 > 2 {
            return None;
        }
        let tag = match (m1, m2) {
            (1, 1) => FusionTag::Success,
            (2, 0) | (0, 2) => FusionTag::FailureZZ,
            _ => FusionTag::Erasure,
        };
        Some(FusionOutcome { tag, detector_counts: (m1, m2) })
    }

    pub fn success() -> Self {
        FusionOutcome { tag: FusionTag::Success, detector_counts: (1, 1) }
    }

    pub fn failure_zz() -> Self {
        FusionOutcome { tag: FusionTag::FailureZZ, detector_counts: (2, 0) }
    }

    pub fn erasure() -> Self {
        FusionOutcome { tag: FusionTag::Erasure, detector_counts: (1, 0) }
    }
}

/// Where a measurement outcome comes from.
pub enum Draw<'r> {
    Forced(i8),
    Random(&'r mut dyn RngCore),
}

/// Outcome source for the two parity measurements of a fusion, or the two
/// Z measurements of a `FailureZZ`.
pub enum DrawPair<'r> {
    Forced(i8, i8),
    Random(&'r mut dyn RngCore),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RecordKind {
    Single(MeasurementBasis),
    InferredZ,
    /// `X_vertex Z_partner`.
    FusionXZ { partner: VertexId },
    /// `Z_vertex X_partner`.
    FusionZX { partner: VertexId },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub vertex: VertexId,
    pub kind: RecordKind,
    pub outcome: i8,
}

/// A signed tensor product of Paulis; identity factors are omitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PauliString {
    pub sign: i8,
    pub ops: BTreeMap<VertexId, Pauli>,
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString { sign: 1, ops: BTreeMap::new() }
    }

    pub fn single(v: VertexId, p: Pauli) -> Self {
        let mut s = Self::identity();
        if p != Pauli::I {
            s.ops.insert(v, p);
        }
        s
    }

    /// Product of two Pauli strings; `None` if they anticommute (the product
    /// is then anti-Hermitian).
    pub fn mul(&self, other: &PauliString) -> Option<PauliString> {
        let mut phase: u8 = 0;
        let mut ops = self.ops.clone();
        for (&v, &q) in &other.ops {
            let p = ops.get(&v).copied().unwrap_or(Pauli::I);
            let (ph, r) = p.compose(q);
            phase = (phase + ph) % 4;
            if r == Pauli::I {
                ops.remove(&v);
            } else {
                ops.insert(v, r);
            }
        }
        let sign = match phase {
            0 => 1,
            2 => -1,
            _ => return None,
        } * self.sign
            * other.sign;
        Some(PauliString { sign, ops })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.sign < 0 { '-' } else { '+' })?;
        if self.ops.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> = self.ops.iter().map(|(v, p)| format!("{}{}", p.letter(), v)).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// JSON snapshot of the graph structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<[VertexId; 2]>,
    pub lost: Vec<VertexId>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphState {
    adj: BTreeMap<VertexId, BTreeSet<VertexId>>,
    vop: BTreeMap<VertexId, LocalClifford>,
    lost: BTreeSet<VertexId>,
    outcome_log: Vec<OutcomeRecord>,
    next_id: VertexId,
}

fn check_outcome(o: i8) -> Result<i8, GraphError> {
    if o == 1 || o == -1 {
        Ok(o)
    } else {
        Err(GraphError::BadOutcome(o))
    }
}

fn coin(rng: &mut dyn RngCore) -> i8 {
    if rng.random_bool(0.5) {
        1
    } else {
        -1
    }
}

impl GraphState {
    /// `n` isolated `|+⟩` vertices with ids `0..n`.
    pub fn new_graph(n: usize) -> Self {
        let mut g = GraphState::default();
        for _ in 0..n {
            g.add_vertex();
        }
        g
    }

    /// Add an isolated `|+⟩` vertex.
    pub fn add_vertex(&mut self) -> VertexId {
        let v = self.next_id;
        self.next_id += 1;
        self.adj.insert(v, BTreeSet::new());
        self.vop.insert(v, LocalClifford::IDENTITY);
        v
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.adj.contains_key(&v)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.adj.keys().copied()
    }

    pub fn neighbors(&self, v: VertexId) -> Result<&BTreeSet<VertexId>, GraphError> {
        self.adj.get(&v).ok_or(GraphError::UnknownVertex(v))
    }

    pub fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.adj.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn edges(&self) -> Vec<[VertexId; 2]> {
        let mut out = Vec::new();
        for (&a, ns) in &self.adj {
            for &b in ns.range(a + 1..) {
                out.push([a, b]);
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.values().map(|n| n.len()).sum::<usize>() / 2
    }

    pub fn is_lost(&self, v: VertexId) -> bool {
        self.lost.contains(&v)
    }

    pub fn lost(&self) -> &BTreeSet<VertexId> {
        &self.lost
    }

    pub fn outcome_log(&self) -> &[OutcomeRecord] {
        &self.outcome_log
    }

    pub fn vop(&self, v: VertexId) -> Result<LocalClifford, GraphError> {
        self.vop.get(&v).copied().ok_or(GraphError::UnknownVertex(v))
    }

    /// Pauli byproduct `(x, z)` on `v`, or `None` if its frame is not a
    /// Pauli operator.
    pub fn frame_bits(&self, v: VertexId) -> Result<Option<(bool, bool)>, GraphError> {
        Ok(self.vop(v)?.pauli_bits())
    }

    fn require(&self, v: VertexId) -> Result<(), GraphError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(GraphError::UnknownVertex(v))
        }
    }

    /// Apply a single-qubit Clifford gate to `v`.
    pub fn apply_local(&mut self, v: VertexId, c: LocalClifford) -> Result<(), GraphError> {
        let cur = self.vop(v)?;
        self.vop.insert(v, c.then_after(cur));
        Ok(())
    }

    fn toggle_edge(&mut self, a: VertexId, b: VertexId) {
        let na = self.adj.get_mut(&a).expect("live vertex");
        if !na.remove(&b) {
            na.insert(b);
        }
        let nb = self.adj.get_mut(&b).expect("live vertex");
        if !nb.remove(&a) {
            nb.insert(a);
        }
    }

    fn right_mul(&mut self, v: VertexId, c: LocalClifford) {
        let cur = self.vop[&v];
        self.vop.insert(v, cur.then_after(c));
    }

    /// Local complementation at `a`. The physical state is unchanged; the
    /// frame absorbs the compensating local unitaries.
    pub fn local_complement(&mut self, a: VertexId) -> Result<(), GraphError> {
        let ns: Vec<VertexId> = self.neighbors(a)?.iter().copied().collect();
        for (i, &u) in ns.iter().enumerate() {
            for &w in &ns[i + 1..] {
                self.toggle_edge(u, w);
            }
        }
        self.right_mul(a, LocalClifford::sqrt_minus_i_x().inverse());
        let zc = LocalClifford::sqrt_plus_i_z().inverse();
        for u in ns {
            self.right_mul(u, zc);
        }
        Ok(())
    }

    fn remove_vertex(&mut self, v: VertexId) {
        if let Some(ns) = self.adj.remove(&v) {
            for u in ns {
                self.adj.get_mut(&u).expect("symmetric adjacency").remove(&v);
            }
        }
        self.vop.remove(&v);
        self.lost.remove(&v);
    }

    /// Bring `C_x` to a diagonal operator using local complementations at
    /// `x` and at a neighbour other than `partner`. Returns false if `x` has
    /// no such neighbour. A diagonal `C_partner` stays diagonal.
    fn reduce_vop(&mut self, x: VertexId, partner: VertexId) -> bool {
        if self.vop[&x].is_diagonal() {
            return true;
        }
        let Some(&c) = self.adj[&x].iter().find(|&&u| u != partner) else {
            return false;
        };
        let a_move = LocalClifford::sqrt_minus_i_x().inverse();
        let b_move = LocalClifford::sqrt_plus_i_z().inverse();
        // BFS over right-multiplication words.
        let start = self.vop[&x];
        let mut prev: BTreeMap<LocalClifford, (LocalClifford, bool)> = BTreeMap::new();
        let mut queue = VecDeque::from([start]);
        let mut goal = None;
        let mut seen = BTreeSet::from([start]);
        while let Some(cur) = queue.pop_front() {
            if cur.is_diagonal() {
                goal = Some(cur);
                break;
            }
            for (is_a, m) in [(true, a_move), (false, b_move)] {
                let next = cur.then_after(m);
                if seen.insert(next) {
                    prev.insert(next, (cur, is_a));
                    queue.push_back(next);
                }
            }
        }
        let mut word = Vec::new();
        let mut cur = goal.expect("the moves generate the Clifford group");
        while cur != start {
            let (p, is_a) = prev[&cur];
            word.push(is_a);
            cur = p;
        }
        for is_a in word.into_iter().rev() {
            let target = if is_a { x } else { c };
            self.local_complement(target).expect("live vertex");
        }
        debug_assert!(self.vop[&x].is_diagonal());
        true
    }

    /// Apply `CZ_xy` when `N(x) ⊆ {y}` by searching the two-qubit
    /// representations `(edge, C_x', C_y')` of the result. Requires `C_y`
    /// diagonal or `N(y) ⊆ {x}`; in the latter case only the pair state has
    /// to match.
    fn cz_with_leaf(&mut self, x: VertexId, y: VertexId) {
        let edge0 = self.has_edge(x, y);
        let (cx, cy) = (self.vop[&x], self.vop[&y]);
        let isolated_pair = self.adj[&y].iter().all(|&u| u == x);
        debug_assert!(isolated_pair || cy.is_diagonal());
        let target = two_qubit_isometry(edge0, cx, cy, true);
        for edge in [false, true] {
            for lx in LocalClifford::all() {
                for ly in LocalClifford::all() {
                    let cand = two_qubit_isometry(edge, lx, ly, false);
                    if isometry_equal_up_to_phase(&target, &cand, isolated_pair) {
                        if edge != edge0 {
                            self.toggle_edge(x, y);
                        }
                        self.vop.insert(x, lx);
                        self.vop.insert(y, ly);
                        return;
                    }
                }
            }
        }
        unreachable!("a representation exists when the partner frame is diagonal");
    }

    /// Apply a controlled-Z gate between `a` and `b`.
    pub fn add_cz(&mut self, a: VertexId, b: VertexId) -> Result<(), GraphError> {
        self.require(a)?;
        self.require(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.vop[&a].is_diagonal() && self.vop[&b].is_diagonal() {
            self.toggle_edge(a, b);
            return Ok(());
        }
        // Reducing one side keeps a diagonal partner diagonal, so after
        // (a, b, a) any remaining non-diagonal side has no other neighbour.
        self.reduce_vop(a, b);
        self.reduce_vop(b, a);
        self.reduce_vop(a, b);
        let (da, db) = (self.vop[&a].is_diagonal(), self.vop[&b].is_diagonal());
        if da && db {
            self.toggle_edge(a, b);
        } else if !db {
            self.cz_with_leaf(b, a);
        } else {
            self.cz_with_leaf(a, b);
        }
        Ok(())
    }

    /// Mark `v` as lost. Its bonds persist until it is excised.
    pub fn mark_lost(&mut self, v: VertexId) -> Result<(), GraphError> {
        self.require(v)?;
        self.lost.insert(v);
        Ok(())
    }

    /// Measure `v` in a Pauli basis. Returns the outcome.
    pub fn measure(&mut self, v: VertexId, basis: MeasurementBasis, draw: Draw<'_>) -> Result<i8, GraphError> {
        if self.is_lost(v) {
            return Err(GraphError::LostVertex(v));
        }
        let (o, _) = self.measure_inner(v, basis, draw, RecordKind::Single(basis))?;
        Ok(o)
    }

    /// Like [`measure`](Self::measure), also reporting whether the outcome
    /// was deterministic.
    pub fn measure_detailed(
        &mut self,
        v: VertexId,
        basis: MeasurementBasis,
        draw: Draw<'_>,
    ) -> Result<(i8, bool), GraphError> {
        if self.is_lost(v) {
            return Err(GraphError::LostVertex(v));
        }
        self.measure_inner(v, basis, draw, RecordKind::Single(basis))
    }

    /// Excise a lost vertex as if it had been measured in Z with the given
    /// (inferred) outcome.
    pub fn infer_z(&mut self, v: VertexId, draw: Draw<'_>) -> Result<i8, GraphError> {
        self.require(v)?;
        if !self.is_lost(v) {
            return Err(GraphError::NotLost(v));
        }
        let (o, _) = self.measure_inner(v, MeasurementBasis::Z, draw, RecordKind::InferredZ)?;
        Ok(o)
    }

    fn measure_inner(
        &mut self,
        v: VertexId,
        basis: MeasurementBasis,
        draw: Draw<'_>,
        kind: RecordKind,
    ) -> Result<(i8, bool), GraphError> {
        self.require(v)?;
        let p = basis.pauli()?;
        if let Draw::Forced(o) = draw {
            check_outcome(o)?;
        }
        loop {
            let bare = self.vop[&v].pull_back(p);
            match bare.pauli {
                Pauli::Z => {
                    let outcome = match draw {
                        Draw::Forced(o) => o,
                        Draw::Random(rng) => coin(rng),
                    };
                    let bare_outcome = outcome * bare.sign();
                    let ns: Vec<VertexId> = self.adj[&v].iter().copied().collect();
                    self.remove_vertex(v);
                    if bare_outcome < 0 {
                        let z = LocalClifford::pauli(Pauli::Z);
                        for u in ns {
                            self.right_mul(u, z);
                        }
                    }
                    self.outcome_log.push(OutcomeRecord { vertex: v, kind, outcome });
                    return Ok((outcome, false));
                }
                Pauli::Y => self.local_complement(v)?,
                Pauli::X => {
                    if let Some(&w) = self.adj[&v].iter().next() {
                        self.local_complement(w)?;
                    } else {
                        // Isolated bare |+⟩: X outcome is +1.
                        let outcome = bare.sign();
                        if let Draw::Forced(o) = draw {
                            if o != outcome {
                                return Err(GraphError::ImpossibleOutcome { vertex: v, outcome: o });
                            }
                        }
                        self.remove_vertex(v);
                        self.outcome_log.push(OutcomeRecord { vertex: v, kind, outcome });
                        return Ok((outcome, true));
                    }
                }
                Pauli::I => unreachable!("conjugation preserves non-identity Paulis"),
            }
        }
    }

    /// Type-II fusion of `a` and `b`.
    ///
    /// `Success` measures `X_a Z_b` and `Z_a X_b`, `FailureZZ` measures both
    /// in Z, and `Erasure` marks both lost. Returns the two recorded outcomes
    /// (`None` for an erasure).
    pub fn fuse_type2(
        &mut self,
        a: VertexId,
        b: VertexId,
        outcome: FusionOutcome,
        draws: DrawPair<'_>,
    ) -> Result<Option<(i8, i8)>, GraphError> {
        self.require(a)?;
        self.require(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.has_edge(a, b) {
            return Err(GraphError::AdjacentFusion(a, b));
        }
        if self.is_lost(a) {
            return Err(GraphError::LostVertex(a));
        }
        if self.is_lost(b) {
            return Err(GraphError::LostVertex(b));
        }
        match outcome.tag {
            FusionTag::Erasure => {
                self.lost.insert(a);
                self.lost.insert(b);
                Ok(None)
            }
            FusionTag::FailureZZ => {
                let (o1, o2) = match draws {
                    DrawPair::Forced(s1, s2) => (
                        self.measure(a, MeasurementBasis::Z, Draw::Forced(s1))?,
                        self.measure(b, MeasurementBasis::Z, Draw::Forced(s2))?,
                    ),
                    DrawPair::Random(rng) => {
                        let o1 = self.measure(a, MeasurementBasis::Z, Draw::Random(&mut *rng))?;
                        (o1, self.measure(b, MeasurementBasis::Z, Draw::Random(rng))?)
                    }
                };
                Ok(Some((o1, o2)))
            }
            FusionTag::Success => self.fuse_success(a, b, draws).map(Some),
        }
    }

    fn fuse_success(&mut self, a: VertexId, b: VertexId, draws: DrawPair<'_>) -> Result<(i8, i8), GraphError> {
        let (ca, cb) = (self.vop[&a], self.vop[&b]);
        let disjoint = self.adj[&a].is_disjoint(&self.adj[&b]);
        let (s1, s2) = match draws {
            DrawPair::Forced(s1, s2) => (check_outcome(s1)?, check_outcome(s2)?),
            DrawPair::Random(rng) => {
                if ca.is_pauli() && cb.is_pauli() && disjoint {
                    (coin(&mut *rng), coin(rng))
                } else {
                    return self.fuse_via_cz(a, b, Draw2::Random(rng));
                }
            }
        };
        if !(ca.is_pauli() && cb.is_pauli() && disjoint) {
            return self.fuse_via_cz(a, b, Draw2::Forced(s1, s2));
        }
        // Bare outcomes of X_a Z_b and Z_a X_b.
        let sig1 = ca.pull_back(Pauli::X).sign() * cb.pull_back(Pauli::Z).sign();
        let sig2 = ca.pull_back(Pauli::Z).sign() * cb.pull_back(Pauli::X).sign();
        let (t1, t2) = (s1 * sig1, s2 * sig2);
        let na: Vec<VertexId> = self.adj[&a].iter().copied().collect();
        let nb: Vec<VertexId> = self.adj[&b].iter().copied().collect();
        self.remove_vertex(a);
        self.remove_vertex(b);
        for &u in &na {
            for &w in &nb {
                self.toggle_edge(u, w);
            }
        }
        let z = LocalClifford::pauli(Pauli::Z);
        if t2 < 0 {
            for &u in &na {
                self.right_mul(u, z);
            }
        }
        if t1 < 0 {
            for &w in &nb {
                self.right_mul(w, z);
            }
        }
        self.log_fusion(a, b, s1, s2);
        Ok((s1, s2))
    }

    /// `X_a Z_b = CZ X_a CZ` and `Z_a X_b = CZ X_b CZ`.
    fn fuse_via_cz(&mut self, a: VertexId, b: VertexId, draws: Draw2<'_>) -> Result<(i8, i8), GraphError> {
        self.add_cz(a, b)?;
        let (s1, s2) = match draws {
            Draw2::Forced(s1, s2) => {
                self.measure_inner(a, MeasurementBasis::X, Draw::Forced(s1), RecordKind::Single(MeasurementBasis::X))?;
                self.measure_inner(b, MeasurementBasis::X, Draw::Forced(s2), RecordKind::Single(MeasurementBasis::X))?;
                (s1, s2)
            }
            Draw2::Random(rng) => {
                let (s1, _) =
                    self.measure_inner(a, MeasurementBasis::X, Draw::Random(&mut *rng), RecordKind::Single(MeasurementBasis::X))?;
                let (s2, _) =
                    self.measure_inner(b, MeasurementBasis::X, Draw::Random(rng), RecordKind::Single(MeasurementBasis::X))?;
                (s1, s2)
            }
        };
        // Replace the two single-qubit records with fusion records.
        self.outcome_log.truncate(self.outcome_log.len() - 2);
        self.log_fusion(a, b, s1, s2);
        Ok((s1, s2))
    }

    fn log_fusion(&mut self, a: VertexId, b: VertexId, s1: i8, s2: i8) {
        self.outcome_log.push(OutcomeRecord { vertex: a, kind: RecordKind::FusionXZ { partner: b }, outcome: s1 });
        self.outcome_log.push(OutcomeRecord { vertex: a, kind: RecordKind::FusionZX { partner: b }, outcome: s2 });
    }

    /// Stabilizer generators `C K_v C†` with `K_v = X_v ∏_{u∈N(v)} Z_u`.
    pub fn stabilizer_generators(&self) -> Vec<PauliString> {
        self.adj
            .iter()
            .map(|(&v, ns)| {
                let mut s = PauliString::identity();
                let x = self.vop[&v].conjugate(Pauli::X);
                s.sign *= x.sign();
                s.ops.insert(v, x.pauli);
                for &u in ns {
                    let z = self.vop[&u].conjugate(Pauli::Z);
                    s.sign *= z.sign();
                    s.ops.insert(u, z.pauli);
                }
                s
            })
            .collect()
    }

    /// Dense amplitudes, capped at [`DENSE_CAP`] qubits.
    pub fn to_statevector(&self) -> Result<DenseState, GraphError> {
        self.to_statevector_capped(DENSE_CAP)
    }

    pub fn to_statevector_capped(&self, cap: usize) -> Result<DenseState, GraphError> {
        let mut d = DenseState::plus_state(self.adj.keys().copied().collect(), cap)?;
        for [a, b] in self.edges() {
            d.apply_cz(a, b)?;
        }
        for (&v, c) in &self.vop {
            if !c.is_identity() {
                d.apply_1q(v, &c.matrix())?;
            }
        }
        Ok(d)
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            vertices: self.adj.keys().copied().collect(),
            edges: self.edges(),
            lost: self.lost.iter().copied().collect(),
        }
    }

    /// Copy with vertex ids renamed through `map`; unmapped ids are kept.
    pub fn relabeled(&self, map: &BTreeMap<VertexId, VertexId>) -> GraphState {
        let f = |v: VertexId| map.get(&v).copied().unwrap_or(v);
        let adj = self.adj.iter().map(|(&v, ns)| (f(v), ns.iter().map(|&u| f(u)).collect())).collect();
        let vop = self.vop.iter().map(|(&v, &c)| (f(v), c)).collect();
        let lost = self.lost.iter().map(|&v| f(v)).collect();
        let outcome_log = self
            .outcome_log
            .iter()
            .map(|r| OutcomeRecord { vertex: f(r.vertex), ..*r })
            .collect();
        let next_id = map.values().copied().chain(self.adj.keys().copied()).map(|v| v + 1).max().unwrap_or(0).max(self.next_id);
        GraphState { adj, vop, lost, outcome_log, next_id }
    }

    /// Disjoint union; the vertices of `other` are shifted by the returned
    /// offset.
    pub fn absorb(&mut self, other: &GraphState) -> VertexId {
        let offset = self.next_id;
        for (&v, ns) in &other.adj {
            self.adj.insert(v + offset, ns.iter().map(|&u| u + offset).collect());
            self.vop.insert(v + offset, other.vop[&v]);
        }
        for &v in &other.lost {
            self.lost.insert(v + offset);
        }
        self.next_id = offset + other.next_id;
        offset
    }
}

enum Draw2<'r> {
    Forced(i8, i8),
    Random(&'r mut dyn RngCore),
}

type Iso = [[Complex64; 2]; 4];

/// `(C_x ⊗ C_y) CZ^e (|+⟩_x ⊗ ·_y)`, optionally followed by `CZ`.
fn two_qubit_isometry(edge: bool, cx: LocalClifford, cy: LocalClifford, then_cz: bool) -> Iso {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mx = cx.matrix();
    let my = cy.matrix();
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 4];
    for j in 0..2 {
        // Basis input |j⟩_y, x in |+⟩.
        let mut v = [Complex64::new(0.0, 0.0); 4];
        for bx in 0..2 {
            let sign = if edge && bx == 1 && j == 1 { -1.0 } else { 1.0 };
            v[bx + 2 * j] = Complex64::new(s2 * sign, 0.0);
        }
        let mut w = [Complex64::new(0.0, 0.0); 4];
        for (i, wi) in w.iter_mut().enumerate() {
            let (ix, iy) = (i & 1, i >> 1);
            for (k, vk) in v.iter().enumerate() {
                let (kx, ky) = (k & 1, k >> 1);
                *wi += mx[ix][kx] * my[iy][ky] * vk;
            }
        }
        if then_cz {
            w[3] = -w[3];
        }
        for i in 0..4 {
            out[i][j] = w[i];
        }
    }
    out
}

/// Compare two isometries up to a global phase. With `state_only`, compare
/// their images of `|+⟩` instead.
fn isometry_equal_up_to_phase(a: &Iso, b: &Iso, state_only: bool) -> bool {
    let cols = |m: &Iso| -> Vec<Complex64> {
        if state_only {
            m.iter().map(|r| r[0] + r[1]).collect()
        } else {
            m.iter().flat_map(|r| [r[0], r[1]]).collect()
        }
    };
    let (va, vb) = (cols(a), cols(b));
    let mut phase = None;
    for (x, y) in va.into_iter().zip(vb) {
        if (x.norm() - y.norm()).abs() > 1e-9 {
            return false;
        }
        if x.norm() > 1e-9 {
            let r = x / y;
            match phase {
                None => phase = Some(r),
                Some(p) => {
                    if (r - p).norm() > 1e-9 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(g: &GraphState) -> DenseState {
        g.to_statevector().unwrap()
    }

    fn all_stabilizers_hold(g: &GraphState) {
        let d = dense(g);
        for s in g.stabilizer_generators() {
            let e = d.expectation(&s).unwrap();
            assert!((e - 1.0).abs() < 1e-9, "stabilizer {s} has expectation {e}");
        }
    }

    #[test]
    fn new_graph_sizes() {
        assert_eq!(GraphState::new_graph(0).vertex_count(), 0);
        let g = GraphState::new_graph(3);
        let gens: Vec<String> = g.stabilizer_generators().iter().map(|s| s.to_string()).collect();
        assert_eq!(gens, vec!["+X0", "+X1", "+X2"]);
    }

    #[test]
    fn empty_graph_is_scalar_one() {
        let d = GraphState::new_graph(0).to_statevector().unwrap();
        assert_eq!(d.amplitudes().len(), 1);
        assert!((d.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn add_cz_toggles() {
        let mut g = GraphState::new_graph(2);
        g.add_cz(0, 1).unwrap();
        assert!(g.has_edge(0, 1));
        let gens: Vec<String> = g.stabilizer_generators().iter().map(|s| s.to_string()).collect();
        assert_eq!(gens, vec!["+X0 Z1", "+Z0 X1"]);
        g.add_cz(0, 1).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.add_cz(0, 0), Err(GraphError::SelfLoop(0)));
        assert_eq!(g.add_cz(0, 7), Err(GraphError::UnknownVertex(7)));
    }

    #[test]
    fn local_complement_preserves_state() {
        let mut g = GraphState::new_graph(5);
        for (a, b) in [(0, 1), (0, 2), (0, 3), (3, 4), (1, 2)] {
            g.add_cz(a, b).unwrap();
        }
        let before = dense(&g);
        for v in 0..5 {
            g.local_complement(v).unwrap();
            assert!(dense(&g).equal_up_to_phase(&before, 1e-9), "LC at {v}");
        }
    }

    #[test]
    fn measuring_lost_vertex_is_an_error() {
        let mut g = GraphState::new_graph(2);
        g.mark_lost(1).unwrap();
        assert_eq!(g.measure(1, MeasurementBasis::Z, Draw::Forced(1)), Err(GraphError::LostVertex(1)));
        assert_eq!(g.measure(0, MeasurementBasis::Rotated(0.3), Draw::Forced(1)), Err(GraphError::RotatedBasis));
        assert_eq!(g.infer_z(1, Draw::Forced(-1)), Ok(-1));
        assert!(!g.contains(1));
    }

    #[test]
    fn isolated_x_is_deterministic() {
        let mut g = GraphState::new_graph(1);
        assert_eq!(
            g.clone().measure(0, MeasurementBasis::X, Draw::Forced(-1)),
            Err(GraphError::ImpossibleOutcome { vertex: 0, outcome: -1 })
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(g.measure_detailed(0, MeasurementBasis::X, Draw::Random(&mut rng)), Ok((1, true)));
    }

    #[test]
    fn z_on_leaf_removes_leaf() {
        let mut g = GraphState::new_graph(4);
        for (a, b) in [(0, 1), (0, 2), (2, 3)] {
            g.add_cz(a, b).unwrap();
        }
        g.measure(3, MeasurementBasis::Z, Draw::Forced(1)).unwrap();
        assert_eq!(g.edges(), vec![[0, 1], [0, 2]]);
        assert!(g.vertices().all(|v| g.vop(v).unwrap().is_identity()));
    }

    #[test]
    fn fusion_of_two_leaves_makes_bond() {
        // u–a, b–v  →  u–v.
        for s1 in [1, -1] {
            for s2 in [1, -1] {
                let mut g = GraphState::new_graph(4);
                g.add_cz(0, 1).unwrap();
                g.add_cz(2, 3).unwrap();
                let mut d = dense(&g);
                g.fuse_type2(1, 2, FusionOutcome::success(), DrawPair::Forced(s1, s2)).unwrap();
                assert_eq!(g.edges(), vec![[0, 3]]);
                let xz = PauliString { sign: 1, ops: BTreeMap::from([(1, Pauli::X), (2, Pauli::Z)]) };
                let zx = PauliString { sign: 1, ops: BTreeMap::from([(1, Pauli::Z), (2, Pauli::X)]) };
                assert!((d.project_pauli_product(&xz, s1).unwrap() - 0.5).abs() < 1e-9);
                assert!((d.project_pauli_product(&zx, s2).unwrap() - 0.5).abs() < 1e-9);
                d.measure(1, MeasurementBasis::X, s1).unwrap();
                d.discard(2).unwrap();
                assert!(dense(&g).equal_up_to_phase(&d, 1e-9));
                all_stabilizers_hold(&g);
            }
        }
    }

    #[test]
    fn fusion_erasure_and_failure() {
        let mut g = GraphState::new_graph(4);
        g.add_cz(0, 1).unwrap();
        g.add_cz(2, 3).unwrap();
        let mut e = g.clone();
        assert_eq!(e.fuse_type2(1, 2, FusionOutcome::erasure(), DrawPair::Forced(1, 1)), Ok(None));
        assert!(e.is_lost(1) && e.is_lost(2));
        g.fuse_type2(1, 2, FusionOutcome::failure_zz(), DrawPair::Forced(1, -1)).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.vertex_count(), 2);
        g.add_cz(0, 3).unwrap();
        assert_eq!(g.fuse_type2(0, 3, FusionOutcome::success(), DrawPair::Forced(1, 1)), Err(GraphError::AdjacentFusion(0, 3)));
    }

    #[test]
    fn fusion_outcome_classification() {
        assert_eq!(FusionOutcome::from_counts(1, 1).unwrap().tag, FusionTag::Success);
        assert_eq!(FusionOutcome::from_counts(2, 0).unwrap().tag, FusionTag::FailureZZ);
        assert_eq!(FusionOutcome::from_counts(0, 2).unwrap().tag, FusionTag::FailureZZ);
        assert_eq!(FusionOutcome::from_counts(1, 0).unwrap().tag, FusionTag::Erasure);
        assert_eq!(FusionOutcome::from_counts(0, 0).unwrap().tag, FusionTag::Erasure);
        assert!(FusionOutcome::from_counts(2, 1).is_none());
    }

    #[test]
    fn snapshot_json_shape() {
        let mut g = GraphState::new_graph(3);
        g.add_cz(0, 2).unwrap();
        g.mark_lost(1).unwrap();
        let json = serde_json::to_string(&g.snapshot()).unwrap();
        assert_eq!(json, r#"{"vertices":[0,1,2],"edges":[[0,2]],"lost":[1]}"#);
    }

    #[test]
    fn add_cz_with_general_frames_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..400 {
            let n = 2 + trial % 4;
            let mut g = GraphState::new_graph(n);
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(0.4) {
                        g.add_cz(a, b).unwrap();
                    }
                }
                let c = LocalClifford::all().nth(rng.random_range(0..24)).unwrap();
                g.apply_local(a, c).unwrap();
            }
            let a = rng.random_range(0..n);
            let b = (a + 1 + rng.random_range(0..n - 1)) % n;
            let mut d = dense(&g);
            d.apply_cz(a, b).unwrap();
            g.add_cz(a, b).unwrap();
            assert!(dense(&g).equal_up_to_phase(&d, 1e-9), "trial {trial}");
        }
    }
}

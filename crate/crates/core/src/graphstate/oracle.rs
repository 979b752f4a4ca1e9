//! Randomized equivalence check between the graph rules and the dense
//! statevector.

use rand::{Rng, RngCore};

use super::{
    DenseState, Draw, DrawPair, FusionOutcome, GraphState, LocalClifford, MeasurementBasis, Pauli, PauliString,
    VertexId,
};

const TOL: f64 = 1e-8;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleStats {
    pub measurements: usize,
    pub cz_gates: usize,
    pub fusions: usize,
}

/// Knobs for [`check_random_sequence`].
#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub max_vertices: usize,
    pub edge_prob: f64,
    /// Also scramble frames with random local Cliffords.
    pub random_frames: bool,
    pub include_fusion: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_vertices: 10, edge_prob: 0.35, random_frames: true, include_fusion: true }
    }
}

fn compare(g: &GraphState, d: &DenseState, what: &str) -> Result<(), String> {
    let gd = g.to_statevector().map_err(|e| e.to_string())?;
    if !gd.equal_up_to_phase(d, TOL) {
        return Err(format!("state mismatch after {what}; graph {:?}", g.snapshot()));
    }
    for s in g.stabilizer_generators() {
        let e = gd.expectation(&s).map_err(|e| e.to_string())?;
        if (e - 1.0).abs() > TOL {
            return Err(format!("stabilizer {s} has expectation {e} after {what}"));
        }
    }
    Ok(())
}

fn pick(live: &[VertexId], rng: &mut dyn RngCore) -> VertexId {
    live[rng.random_range(0..live.len())]
}

/// Build a random graph, then interleave random measurements, CZ gates and
/// fusions, checking the dense state after every step.
pub fn check_random_sequence(rng: &mut dyn RngCore, cfg: &OracleConfig) -> Result<OracleStats, String> {
    let n = rng.random_range(1..=cfg.max_vertices);
    let mut g = GraphState::new_graph(n);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(cfg.edge_prob) {
                g.add_cz(a, b).map_err(|e| e.to_string())?;
            }
        }
        if cfg.random_frames && rng.random_bool(0.5) {
            let c = LocalClifford::all().nth(rng.random_range(0..24)).expect("24 elements");
            g.apply_local(a, c).map_err(|e| e.to_string())?;
        }
    }
    let mut d = g.to_statevector().map_err(|e| e.to_string())?;
    compare(&g, &d, "construction")?;
    let mut stats = OracleStats::default();

    while g.vertex_count() > 0 {
        let live: Vec<VertexId> = g.vertices().collect();
        let roll = rng.random_range(0..10);
        if roll < 2 && live.len() >= 2 {
            let a = pick(&live, rng);
            let b = loop {
                let b = pick(&live, rng);
                if b != a {
                    break b;
                }
            };
            g.add_cz(a, b).map_err(|e| e.to_string())?;
            d.apply_cz(a, b).map_err(|e| e.to_string())?;
            stats.cz_gates += 1;
            compare(&g, &d, &format!("CZ({a},{b})"))?;
            continue;
        }
        if roll == 2 && cfg.include_fusion && live.len() >= 2 {
            let a = pick(&live, rng);
            let candidates: Vec<VertexId> = live.iter().copied().filter(|&b| b != a && !g.has_edge(a, b)).collect();
            if let Some(&b) = candidates.first() {
                let xz = PauliString { sign: 1, ops: [(a, Pauli::X), (b, Pauli::Z)].into_iter().collect() };
                let zx = PauliString { sign: 1, ops: [(a, Pauli::Z), (b, Pauli::X)].into_iter().collect() };
                let mut trial = g.clone();
                let (s1, s2) = trial
                    .fuse_type2(a, b, FusionOutcome::success(), DrawPair::Random(&mut *rng))
                    .map_err(|e| e.to_string())?
                    .expect("success records outcomes");
                let p1 = d.project_pauli_product(&xz, s1).map_err(|e| e.to_string())?;
                let p2 = d.project_pauli_product(&zx, s2).map_err(|e| e.to_string())?;
                if p1 < 1e-6 || p2 < 1e-6 {
                    return Err(format!("fusion outcome ({s1},{s2}) on ({a},{b}) has zero probability"));
                }
                // The pair is now a bonded two-qubit state; undoing the bond
                // leaves X eigenstates in product with the rest.
                d.apply_cz(a, b).map_err(|e| e.to_string())?;
                d.discard(a).map_err(|e| e.to_string())?;
                d.discard(b).map_err(|e| e.to_string())?;
                g = trial;
                stats.fusions += 1;
                compare(&g, &d, &format!("fusion({a},{b})"))?;
                continue;
            }
        }
        let v = pick(&live, rng);
        let basis = match rng.random_range(0..3) {
            0 => MeasurementBasis::X,
            1 => MeasurementBasis::Y,
            _ => MeasurementBasis::Z,
        };
        let (o, deterministic) = g.measure_detailed(v, basis, Draw::Random(&mut *rng)).map_err(|e| e.to_string())?;
        let p = d.measure(v, basis, o).map_err(|e| e.to_string())?;
        let expected = if deterministic { 1.0 } else { 0.5 };
        if (p - expected).abs() > 1e-6 {
            return Err(format!(
                "{basis:?} on {v}: outcome {o} has dense probability {p}, graph rules say {expected}"
            ));
        }
        stats.measurements += 1;
        compare(&g, &d, &format!("{basis:?}({v})={o}"))?;
    }
    Ok(stats)
}

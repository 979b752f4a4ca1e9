//! Dense statevector oracle for small graph states.
//!
//! Qubit `i` of the amplitude index is the `i`-th entry of `qubits`
//! (little-endian). The oracle is only used for validation, so every
//! operation is a straightforward loop over `2^n` amplitudes.

use num_complex::Complex64;

use super::clifford::Mat2;
use super::{GraphError, MeasurementBasis, PauliString, VertexId};

#[derive(Clone, Debug)]
pub struct DenseState {
    qubits: Vec<VertexId>,
    amps: Vec<Complex64>,
}

impl DenseState {
    /// `|+⟩^{⊗n}` over the given (sorted, distinct) qubit labels.
    pub fn plus_state(qubits: Vec<VertexId>, cap: usize) -> Result<Self, GraphError> {
        if qubits.len() > cap {
            return Err(GraphError::TooLarge { n: qubits.len(), cap });
        }
        let dim = 1usize << qubits.len();
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(DenseState { qubits, amps: vec![a; dim] })
    }

    pub fn qubits(&self) -> &[VertexId] {
        &self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn pos(&self, v: VertexId) -> Result<usize, GraphError> {
        self.qubits.iter().position(|&q| q == v).ok_or(GraphError::UnknownVertex(v))
    }

    pub fn apply_cz(&mut self, a: VertexId, b: VertexId) -> Result<(), GraphError> {
        let (pa, pb) = (self.pos(a)?, self.pos(b)?);
        let mask = (1 << pa) | (1 << pb);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    pub fn apply_1q(&mut self, v: VertexId, m: &Mat2) -> Result<(), GraphError> {
        let p = self.pos(v)?;
        let bit = 1 << p;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    /// `⟨ψ|P|ψ⟩` for a signed Pauli string.
    pub fn expectation(&self, p: &PauliString) -> Result<f64, GraphError> {
        let mut image = self.clone();
        for (&v, &op) in &p.ops {
            image.apply_1q(v, &op.matrix())?;
        }
        let inner: Complex64 = self.amps.iter().zip(&image.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(f64::from(p.sign) * inner.re)
    }

    /// Project onto the `outcome` eigenspace of a Pauli product, renormalize,
    /// and return the outcome probability. Qubits are kept.
    pub fn project_pauli_product(&mut self, p: &PauliString, outcome: i8) -> Result<f64, GraphError> {
        let mut image = self.clone();
        for (&v, &op) in &p.ops {
            image.apply_1q(v, &op.matrix())?;
        }
        let s = f64::from(outcome) * f64::from(p.sign);
        for (a, b) in self.amps.iter_mut().zip(&image.amps) {
            *a = (*a + b * s) * 0.5;
        }
        let prob = self.norm_sqr();
        self.normalize();
        Ok(prob)
    }

    /// Measure one qubit, drop it from the register, and return the outcome
    /// probability. For a zero-probability outcome the state is left
    /// unnormalized (all zeros).
    pub fn measure(&mut self, v: VertexId, basis: MeasurementBasis, outcome: i8) -> Result<f64, GraphError> {
        // Rotate the eigenbasis of `basis` onto Z, then project.
        let z = Complex64::new(0.0, 0.0);
        let rot: Mat2 = match basis {
            MeasurementBasis::Z => [[Complex64::new(1.0, 0.0), z], [z, Complex64::new(1.0, 0.0)]],
            MeasurementBasis::X => rotated_to_z(0.0),
            MeasurementBasis::Y => rotated_to_z(std::f64::consts::FRAC_PI_2),
            MeasurementBasis::Rotated(theta) => rotated_to_z(theta),
        };
        self.apply_1q(v, &rot)?;
        let p = self.pos(v)?;
        let bit = 1 << p;
        let keep = if outcome == 1 { 0 } else { bit };
        let mut compressed = vec![Complex64::new(0.0, 0.0); self.amps.len() / 2];
        for i in 0..self.amps.len() {
            if i & bit == keep {
                let low = i & (bit - 1);
                let high = (i >> (p + 1)) << p;
                compressed[high | low] = self.amps[i];
            }
        }
        self.amps = compressed;
        self.qubits.remove(p);
        let prob = self.norm_sqr();
        self.normalize();
        Ok(prob)
    }

    /// Remove a qubit that is in a product state with the rest.
    pub fn discard(&mut self, v: VertexId) -> Result<(), GraphError> {
        let p = self.pos(v)?;
        let bit = 1 << p;
        let half = self.amps.len() / 2;
        let mut blocks = [vec![Complex64::new(0.0, 0.0); half], vec![Complex64::new(0.0, 0.0); half]];
        for i in 0..self.amps.len() {
            let low = i & (bit - 1);
            let high = (i >> (p + 1)) << p;
            blocks[usize::from(i & bit != 0)][high | low] = self.amps[i];
        }
        let n0: f64 = blocks[0].iter().map(|a| a.norm_sqr()).sum();
        let n1: f64 = blocks[1].iter().map(|a| a.norm_sqr()).sum();
        let [b0, b1] = blocks;
        self.amps = if n0 >= n1 { b0 } else { b1 };
        self.qubits.remove(p);
        self.normalize();
        Ok(())
    }

    /// `|⟨self|other⟩| ≈ 1` on identical qubit labels.
    pub fn equal_up_to_phase(&self, other: &DenseState, tol: f64) -> bool {
        if self.qubits != other.qubits {
            return false;
        }
        let inner: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        let n = (self.norm_sqr() * other.norm_sqr()).sqrt();
        n > 0.0 && (inner.norm() / n - 1.0).abs() < tol
    }
}

/// Unitary mapping the `+1` eigenvector of `cosθ X + sinθ Y` to `|0⟩`.
fn rotated_to_z(theta: f64) -> Mat2 {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let e = Complex64::from_polar(s2, -theta);
    [[Complex64::new(s2, 0.0), e], [Complex64::new(s2, 0.0), -e]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vertex_edge_amplitudes() {
        let mut d = DenseState::plus_state(vec![0, 1], 14).unwrap();
        d.apply_cz(0, 1).unwrap();
        let a = d.amplitudes();
        assert!((a[0].re - 0.5).abs() < 1e-12);
        assert!((a[1].re - 0.5).abs() < 1e-12);
        assert!((a[2].re - 0.5).abs() < 1e-12);
        assert!((a[3].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotated_zero_is_x() {
        let mut a = DenseState::plus_state(vec![0, 1], 14).unwrap();
        a.apply_cz(0, 1).unwrap();
        let mut b = a.clone();
        let pa = a.measure(0, MeasurementBasis::X, -1).unwrap();
        let pb = b.measure(0, MeasurementBasis::Rotated(0.0), -1).unwrap();
        assert!((pa - pb).abs() < 1e-12);
        assert!(a.equal_up_to_phase(&b, 1e-9));
    }

    #[test]
    fn plus_state_is_x_eigenstate() {
        let mut d = DenseState::plus_state(vec![3], 14).unwrap();
        assert!((d.clone().measure(3, MeasurementBasis::X, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(d.measure(3, MeasurementBasis::X, -1).unwrap() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(
            DenseState::plus_state((0..15).collect(), 14),
            Err(GraphError::TooLarge { n: 15, cap: 14 })
        ));
    }
}

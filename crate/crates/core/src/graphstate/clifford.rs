//! Single-qubit Pauli and Clifford algebra used by the graph-state frame.
//!
//! Local Cliffords are stored modulo global phase as an index into a
//! 24-element table generated once from `H` and `S`.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Mat2 = [[Complex64; 2]; 2];

const TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// Symplectic `(x, z)` bits.
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn commutes_with(self, other: Pauli) -> bool {
        let (x1, z1) = self.bits();
        let (x2, z2) = other.bits();
        !((x1 & z2) ^ (z1 & x2))
    }

    /// `self * other = i^phase * result`, phase in `0..4`.
    pub fn compose(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    pub fn matrix(self) -> Mat2 {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A Hermitian Pauli with a `±1` sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignedPauli {
    pub negative: bool,
    pub pauli: Pauli,
}

impl SignedPauli {
    pub fn plus(pauli: Pauli) -> Self {
        SignedPauli { negative: false, pauli }
    }

    pub fn sign(self) -> i8 {
        if self.negative {
            -1
        } else {
            1
        }
    }
}

impl fmt::Display for SignedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.negative { '-' } else { '+' }, self.pauli.letter())
    }
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn dagger(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Rescale so the first non-negligible entry is real and positive.
fn normalize_phase(m: &Mat2) -> Mat2 {
    let flat = [m[0][0], m[0][1], m[1][0], m[1][1]];
    let lead = flat.iter().find(|z| z.norm() > TOL).copied().unwrap_or(Complex64::new(1.0, 0.0));
    let rot = lead.conj() / lead.norm();
    let mut out = *m;
    for row in out.iter_mut() {
        for cell in row.iter_mut() {
            *cell *= rot;
        }
    }
    out
}

fn mat_close(a: &Mat2, b: &Mat2) -> bool {
    (0..2).all(|r| (0..2).all(|c| (a[r][c] - b[r][c]).norm() < 1e-7))
}

struct CliffordTable {
    matrices: Vec<Mat2>,
    /// Image `C P C†` for P = X, Y, Z.
    images: Vec<[SignedPauli; 3]>,
    mul: Vec<[u8; 24]>,
    inv: [u8; 24],
}

fn match_signed_pauli(m: &Mat2) -> SignedPauli {
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        let pm = p.matrix();
        if mat_close(m, &pm) {
            return SignedPauli { negative: false, pauli: p };
        }
        let neg = [[-pm[0][0], -pm[0][1]], [-pm[1][0], -pm[1][1]]];
        if mat_close(m, &neg) {
            return SignedPauli { negative: true, pauli: p };
        }
    }
    panic!("conjugated Pauli is not a signed Pauli; table element is not Clifford");
}

fn build_table() -> CliffordTable {
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let h: Mat2 = [
        [Complex64::new(s2, 0.0), Complex64::new(s2, 0.0)],
        [Complex64::new(s2, 0.0), Complex64::new(-s2, 0.0)],
    ];
    let s: Mat2 = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
    ];
    let mut matrices: Vec<Mat2> = vec![normalize_phase(&Pauli::I.matrix())];
    let mut frontier = 0;
    while frontier < matrices.len() {
        let base = matrices[frontier];
        for g in [&h, &s] {
            let cand = normalize_phase(&mat_mul(&base, g));
            if !matrices.iter().any(|m| mat_close(m, &cand)) {
                matrices.push(cand);
            }
        }
        frontier += 1;
    }
    assert_eq!(matrices.len(), 24, "single-qubit Clifford group mod phase has 24 elements");

    let find = |m: &Mat2| -> u8 {
        let n = normalize_phase(m);
        matrices.iter().position(|c| mat_close(c, &n)).expect("closed under multiplication") as u8
    };
    let mut mul = vec![[0u8; 24]; 24];
    for a in 0..24 {
        for b in 0..24 {
            mul[a][b] = find(&mat_mul(&matrices[a], &matrices[b]));
        }
    }
    let mut inv = [0u8; 24];
    for a in 0..24 {
        inv[a] = find(&dagger(&matrices[a]));
    }
    let images = matrices
        .iter()
        .map(|m| {
            let md = dagger(m);
            [Pauli::X, Pauli::Y, Pauli::Z].map(|p| match_signed_pauli(&mat_mul(&mat_mul(m, &p.matrix()), &md)))
        })
        .collect();
    CliffordTable { matrices, images, mul, inv }
}

fn table() -> &'static CliffordTable {
    static TABLE: OnceLock<CliffordTable> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

/// A single-qubit Clifford unitary modulo global phase.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalClifford(u8);

impl Default for LocalClifford {
    fn default() -> Self {
        LocalClifford::IDENTITY
    }
}

impl LocalClifford {
    pub const IDENTITY: LocalClifford = LocalClifford(0);

    /// Look up a 2×2 unitary; `None` if it is not Clifford.
    pub fn from_matrix(m: &Mat2) -> Option<Self> {
        let n = normalize_phase(m);
        table().matrices.iter().position(|c| mat_close(c, &n)).map(|i| LocalClifford(i as u8))
    }

    pub fn all() -> impl Iterator<Item = LocalClifford> {
        (0..24u8).map(LocalClifford)
    }

    pub fn pauli(p: Pauli) -> Self {
        Self::from_matrix(&p.matrix()).expect("Paulis are Clifford")
    }

    pub fn hadamard() -> Self {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_matrix(&[
            [Complex64::new(s2, 0.0), Complex64::new(s2, 0.0)],
            [Complex64::new(s2, 0.0), Complex64::new(-s2, 0.0)],
        ])
        .unwrap()
    }

    pub fn phase_s() -> Self {
        Self::from_matrix(&[
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)],
        ])
        .unwrap()
    }

    /// `exp(-iπ/4 X)`.
    pub fn sqrt_minus_i_x() -> Self {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_matrix(&[
            [Complex64::new(s2, 0.0), Complex64::new(0.0, -s2)],
            [Complex64::new(0.0, -s2), Complex64::new(s2, 0.0)],
        ])
        .unwrap()
    }

    /// `exp(+iπ/4 Z)`.
    pub fn sqrt_plus_i_z() -> Self {
        Self::from_matrix(&[
            [Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4), Complex64::new(0.0, 0.0)],
            [Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4)],
        ])
        .unwrap()
    }

    pub fn matrix(self) -> Mat2 {
        table().matrices[self.0 as usize]
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn then_after(self, rhs: LocalClifford) -> LocalClifford {
        LocalClifford(table().mul[self.0 as usize][rhs.0 as usize])
    }

    pub fn inverse(self) -> LocalClifford {
        LocalClifford(table().inv[self.0 as usize])
    }

    /// `C P C†`.
    pub fn conjugate(self, p: Pauli) -> SignedPauli {
        match p {
            Pauli::I => SignedPauli::plus(Pauli::I),
            Pauli::X => table().images[self.0 as usize][0],
            Pauli::Y => table().images[self.0 as usize][1],
            Pauli::Z => table().images[self.0 as usize][2],
        }
    }

    /// `C† P C`: the Pauli that must be measured on the bare state for `P` to
    /// be measured on `C|ψ⟩`.
    pub fn pull_back(self, p: Pauli) -> SignedPauli {
        self.inverse().conjugate(p)
    }

    /// Commutes with `Z` (diagonal up to phase), hence with `CZ`.
    pub fn is_diagonal(self) -> bool {
        self.conjugate(Pauli::Z) == SignedPauli::plus(Pauli::Z)
    }

    /// Equal to a Pauli operator up to phase.
    pub fn is_pauli(self) -> bool {
        [Pauli::X, Pauli::Y, Pauli::Z].iter().all(|&p| self.conjugate(p).pauli == p)
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0
    }

    /// Symplectic bits of the Pauli this element equals, if it is one.
    pub fn pauli_bits(self) -> Option<(bool, bool)> {
        if !self.is_pauli() {
            return None;
        }
        // A Pauli P flips the sign of the Paulis it anticommutes with.
        let x_flip = self.conjugate(Pauli::Z).negative;
        let z_flip = self.conjugate(Pauli::X).negative;
        Some((x_flip, z_flip))
    }
}

impl fmt::Debug for LocalClifford {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LC#{}(X->{}, Z->{})",
            self.0,
            self.conjugate(Pauli::X),
            self.conjugate(Pauli::Z)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_has_24_elements_with_identity_first() {
        assert_eq!(LocalClifford::all().count(), 24);
        assert!(LocalClifford::IDENTITY.is_identity());
        assert!(LocalClifford::IDENTITY.is_diagonal());
    }

    #[test]
    fn hadamard_swaps_x_and_z() {
        let h = LocalClifford::hadamard();
        assert_eq!(h.conjugate(Pauli::X), SignedPauli::plus(Pauli::Z));
        assert_eq!(h.conjugate(Pauli::Z), SignedPauli::plus(Pauli::X));
        assert_eq!(h.conjugate(Pauli::Y), SignedPauli { negative: true, pauli: Pauli::Y });
        assert!(h.then_after(h).is_identity());
    }

    #[test]
    fn inverse_and_diagonal_set() {
        for c in LocalClifford::all() {
            assert!(c.then_after(c.inverse()).is_identity());
        }
        let diag: Vec<_> = LocalClifford::all().filter(|c| c.is_diagonal()).collect();
        assert_eq!(diag.len(), 4);
        assert!(diag.contains(&LocalClifford::phase_s()));
        assert!(diag.contains(&LocalClifford::pauli(Pauli::Z)));
    }

    #[test]
    fn pauli_bits_roundtrip() {
        for p in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            assert_eq!(LocalClifford::pauli(p).pauli_bits(), Some(p.bits()));
        }
        assert_eq!(LocalClifford::hadamard().pauli_bits(), None);
    }

    #[test]
    fn pauli_products_have_expected_phases() {
        assert_eq!(Pauli::X.compose(Pauli::Y), (1, Pauli::Z));
        assert_eq!(Pauli::Z.compose(Pauli::Y), (3, Pauli::X));
        assert!(Pauli::X.commutes_with(Pauli::X));
        assert!(!Pauli::X.commutes_with(Pauli::Z));
    }
}

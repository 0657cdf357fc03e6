//! Dimension-indexed primitives: phase exponents over a fixed root of unity,
//! permutation matrices, the Weyl-Heisenberg (Pauli) generators and the qudit
//! T gates.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{root_of_unity, CMatrix, C64, ONE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuditError {
    #[error("unsupported dimension {0}: only qutrits (3) and ququarts (4) are supported")]
    UnsupportedDimension(usize),
    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A supported qudit dimension together with the order `n` of the root of
/// unity `ω_n` in which all diagonal phases are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct QuditDimension {
    d: usize,
    root_order: u64,
}

impl QuditDimension {
    pub fn new(d: usize) -> Result<Self, QuditError> {
        let root_order = match d {
            3 => 9,
            4 => 8,
            _ => return Err(QuditError::UnsupportedDimension(d)),
        };
        Ok(Self { d, root_order })
    }

    pub const fn qutrit() -> Self {
        Self {
            d: 3,
            root_order: 9,
        }
    }

    pub const fn ququart() -> Self {
        Self {
            d: 4,
            root_order: 8,
        }
    }

    pub const fn d(self) -> usize {
        self.d
    }

    pub fn root_order(self) -> u64 {
        self.root_order
    }

    /// `n / d`: the exponent of `ω_n` that equals `ω_d`.
    pub fn clock_step(self) -> u64 {
        self.root_order / self.d as u64
    }
}

impl TryFrom<usize> for QuditDimension {
    type Error = QuditError;
    fn try_from(d: usize) -> Result<Self, QuditError> {
        Self::new(d)
    }
}

impl From<QuditDimension> for usize {
    fn from(q: QuditDimension) -> usize {
        q.d
    }
}

impl fmt::Display for QuditDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} (ω_{})", self.d, self.root_order)
    }
}

/// Diagonal unitary `Diag(ω_n^{e_0}, ..., ω_n^{e_{d-1}})` stored by its exponents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PhaseExponentVector {
    exponents: Vec<u64>,
    #[serde(skip)]
    modulus: u64,
}

impl PhaseExponentVector {
    pub fn new(exponents: Vec<u64>, modulus: u64) -> Self {
        let exponents = exponents.into_iter().map(|e| e % modulus).collect();
        Self { exponents, modulus }
    }

    pub fn from_signed(exponents: &[i64], modulus: u64) -> Self {
        Self {
            exponents: exponents
                .iter()
                .map(|&e| e.rem_euclid(modulus as i64) as u64)
                .collect(),
            modulus,
        }
    }

    pub fn zero(d: usize, modulus: u64) -> Self {
        Self {
            exponents: vec![0; d],
            modulus,
        }
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// Exponents of the product of the two diagonal unitaries.
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.modulus, other.modulus);
        let n = self.modulus;
        Self {
            exponents: self
                .exponents
                .iter()
                .zip(&other.exponents)
                .map(|(a, b)| (a + b) % n)
                .collect(),
            modulus: n,
        }
    }

    /// Exponents of the `k`-th power.
    pub fn scale(&self, k: u64) -> Self {
        let n = self.modulus;
        Self {
            exponents: self
                .exponents
                .iter()
                .map(|&e| ((e as u128 * k as u128) % n as u128) as u64)
                .collect(),
            modulus: n,
        }
    }

    /// Exponents of the inverse (complex conjugate).
    pub fn neg(&self) -> Self {
        let n = self.modulus;
        Self {
            exponents: self.exponents.iter().map(|&e| (n - e) % n).collect(),
            modulus: n,
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        let diag: Vec<C64> = self
            .exponents
            .iter()
            .map(|&e| root_of_unity(e, self.modulus))
            .collect();
        CMatrix::diagonal(&diag)
    }
}

impl fmt::Display for PhaseExponentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}) mod {}",
            self.exponents.iter().join(","),
            self.modulus
        )
    }
}

/// A permutation of `{0, ..., d-1}`; `map[i]` is the image of `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self, QuditError> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || std::mem::replace(&mut seen[m], true) {
                return Err(QuditError::InvalidPermutation(map));
            }
        }
        Ok(Self { map })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            map: (0..d).collect(),
        }
    }

    /// Transposition of `a` and `b`.
    pub fn swap(d: usize, a: usize, b: usize) -> Self {
        let mut map: Vec<usize> = (0..d).collect();
        map.swap(a, b);
        Self { map }
    }

    /// The cyclic shift `i -> i + 1 mod d`.
    pub fn cycle(d: usize) -> Self {
        Self {
            map: (0..d).map(|i| (i + 1) % d).collect(),
        }
    }

    /// All `d!` permutations in lexicographic order of their images.
    pub fn all(d: usize) -> Vec<Self> {
        (0..d).permutations(d).map(|map| Self { map }).collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            map: other.map.iter().map(|&i| self.map[i]).collect(),
        }
    }

    pub fn inverse(&self) -> Self {
        let mut map = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            map[m] = i;
        }
        Self { map }
    }
}

/// `X_σ = Σ_i |σ(i)⟩⟨i|`.
pub fn perm_matrix(sigma: &Permutation) -> CMatrix {
    let d = sigma.len();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(sigma.apply(i), i)] = ONE;
    }
    m
}

/// Exponents of the qudit T gate: `Diag(1, ω_9, ω_9^8)` for qutrits,
/// `Diag(1, ω_8^5, 1, ω_8^7)` for ququarts.
pub fn t_gate(dim: QuditDimension) -> PhaseExponentVector {
    let e = match dim.d() {
        3 => vec![0, 1, 8],
        4 => vec![0, 5, 0, 7],
        d => unreachable!("QuditDimension only admits 3 and 4, got {d}"),
    };
    PhaseExponentVector::new(e, dim.root_order())
}

/// Exponents of the clock `Z = Diag(ω_d^j)` embedded in `ω_n`.
pub fn clock_exponents(dim: QuditDimension) -> PhaseExponentVector {
    let step = dim.clock_step();
    PhaseExponentVector::new(
        (0..dim.d() as u64).map(|j| j * step).collect(),
        dim.root_order(),
    )
}

/// Shift `X|j⟩ = |j+1 mod d⟩` and clock `Z = Diag(ω_d^j)`.
pub fn pauli_group_generators(dim: QuditDimension) -> [CMatrix; 2] {
    [
        perm_matrix(&Permutation::cycle(dim.d())),
        clock_exponents(dim).to_matrix(),
    ]
}

/// The monomial `X^a Z^b`.
pub fn pauli_matrix(dim: QuditDimension, a: usize, b: usize) -> CMatrix {
    let d = dim.d();
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        m[((j + a) % d, j)] = root_of_unity((b * j) as u64, d as u64);
    }
    m
}

/// True iff `u = c X^a Z^b` for some `a, b` and a unimodular scalar `c`.
pub fn is_pauli_up_to_phase(u: &CMatrix, dim: QuditDimension) -> bool {
    let d = dim.d();
    if u.rows() != d || u.cols() != d {
        return false;
    }
    (0..d)
        .cartesian_product(0..d)
        .any(|(a, b)| u.equal_up_to_phase(&pauli_matrix(dim, a, b), 1e-10))
}

/// Exponents of `X_σ D X_σ†`: entry `e_i` moves to position `σ(i)`.
pub fn conjugate_diag_by_perm(
    diag: &PhaseExponentVector,
    sigma: &Permutation,
) -> PhaseExponentVector {
    assert_eq!(diag.len(), sigma.len(), "dimension mismatch");
    let mut out = vec![0; diag.len()];
    for (i, &e) in diag.exponents().iter().enumerate() {
        out[sigma.apply(i)] = e;
    }
    PhaseExponentVector {
        exponents: out,
        modulus: diag.modulus(),
    }
}

/// Smallest positive power of T that can lie in a Clifford-like group, by
/// level count: 3 when 3 divides `d`, 2 for other even `d`, 1 otherwise.
pub fn interleaving_power_rule(d: usize) -> u64 {
    if d.is_multiple_of(3) {
        3
    } else if d.is_multiple_of(2) {
        2
    } else {
        1
    }
}

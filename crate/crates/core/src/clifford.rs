//! The Clifford-like reference group `C = ⟨N, X, X_01⟩`.
//!
//! Every element is monomial, `X_σ · Diag(ω_n^e)`, with `σ` ranging over the
//! whole symmetric group and `e` over a lattice of phase exponents. The lattice
//! is derived from the T gate:
//!
//! 1. `C'` is spanned by all entry permutations of the T exponents.
//! 2. `N` keeps the elements of `C'` that map the Pauli group to itself.
//! 3. Because `C` contains `X_σ N X_σ†` for every permutation, `N` is closed
//!    under entry permutations.
//!
//! Lattices are stored in Howell form, which gives both the membership test
//! and a canonical coordinate tuple per element.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::matrix::CMatrix;
use crate::qudit::{
    conjugate_diag_by_perm, is_pauli_up_to_phase, pauli_group_generators, perm_matrix, t_gate,
    Permutation, PhaseExponentVector, QuditDimension, QuditError,
};
use crate::ring::{HowellBasis, RingError, RingMatrix};

/// Default bound on the number of elements `enumerate` will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

const CLOSURE_TRIALS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error(transparent)]
    Qudit(#[from] QuditError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("closure violation: {0}")]
    ClosureViolation(String),
    #[error("construction consistency check failed: {0}")]
    ConstructionConsistency(String),
    #[error("group order {order} exceeds enumeration cap {cap}")]
    EnumerationCap { order: u128, cap: u128 },
}

/// A subgroup of `Z_n^d` phase exponents in Howell form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalLattice {
    dim: QuditDimension,
    basis: HowellBasis,
}

impl DiagonalLattice {
    pub fn from_generators(
        dim: QuditDimension,
        gens: &[PhaseExponentVector],
    ) -> Result<Self, GroupError> {
        let n = dim.root_order();
        let mut rows: Vec<Vec<i64>> = gens
            .iter()
            .map(|g| {
                if g.len() != dim.d() {
                    return Err(QuditError::DimensionMismatch {
                        expected: dim.d(),
                        got: g.len(),
                    });
                }
                Ok(g.exponents().iter().map(|&e| e as i64).collect())
            })
            .collect::<Result<_, _>>()?;
        if rows.is_empty() {
            rows.push(vec![0; dim.d()]);
        }
        let m = RingMatrix::from_rows(&rows, n)?;
        Ok(Self {
            dim,
            basis: HowellBasis::new(&m)?,
        })
    }

    pub fn dimension(&self) -> QuditDimension {
        self.dim
    }

    pub fn howell_basis(&self) -> &HowellBasis {
        &self.basis
    }

    /// Howell basis rows as exponent vectors.
    pub fn generators(&self) -> Vec<PhaseExponentVector> {
        self.basis
            .matrix()
            .row_vecs()
            .into_iter()
            .map(|r| PhaseExponentVector::new(r, self.dim.root_order()))
            .collect()
    }

    /// Order of each basis row modulo the span of the rows after it; the
    /// canonical coordinate of row `i` ranges over `[0, exponent_rings[i])`.
    pub fn exponent_rings(&self) -> Vec<u64> {
        self.basis.row_orders()
    }

    pub fn order(&self) -> u128 {
        self.basis.span_size()
    }

    pub fn contains(&self, v: &PhaseExponentVector) -> bool {
        v.len() == self.dim.d() && self.basis.contains(v.exponents()).unwrap_or(false)
    }

    pub fn coordinates(&self, v: &PhaseExponentVector) -> Option<Vec<u64>> {
        if v.len() != self.dim.d() {
            return None;
        }
        self.basis.coordinates(v.exponents()).ok().flatten()
    }

    pub fn element(&self, coords: &[u64]) -> PhaseExponentVector {
        PhaseExponentVector::new(self.basis.combine(coords), self.dim.root_order())
    }

    pub fn elements(&self) -> impl Iterator<Item = PhaseExponentVector> + '_ {
        let n = self.dim.root_order();
        self.basis
            .elements()
            .map(move |e| PhaseExponentVector::new(e, n))
    }

    pub fn is_permutation_stable(&self) -> bool {
        let perms = Permutation::all(self.dim.d());
        self.generators().iter().all(|g| {
            perms
                .iter()
                .all(|s| self.contains(&conjugate_diag_by_perm(g, s)))
        })
    }
}

/// Lattice of `C' = ⟨X_σ T X_σ† : σ ∈ S_d⟩`.
pub fn build_cprime_lattice(dim: QuditDimension) -> Result<DiagonalLattice, GroupError> {
    let t = t_gate(dim);
    let gens: Vec<_> = Permutation::all(dim.d())
        .iter()
        .map(|s| conjugate_diag_by_perm(&t, s))
        .collect();
    DiagonalLattice::from_generators(dim, &gens)
}

/// Whether `Diag(ω_n^e)` maps both Pauli generators into the Pauli group.
pub fn diag_normalizes_pauli(e: &PhaseExponentVector, dim: QuditDimension) -> bool {
    let d = e.to_matrix();
    let dag = d.adjoint();
    pauli_group_generators(dim)
        .iter()
        .all(|p| is_pauli_up_to_phase(&(&(&d * p) * &dag), dim))
}

/// Whether `X_σ` maps both Pauli generators into the Pauli group.
pub fn perm_normalizes_pauli(sigma: &Permutation, dim: QuditDimension) -> bool {
    let x = perm_matrix(sigma);
    let dag = x.adjoint();
    pauli_group_generators(dim)
        .iter()
        .all(|p| is_pauli_up_to_phase(&(&(&x * p) * &dag), dim))
}

/// The sublattice of `cprime` whose diagonal unitaries normalize the Pauli group.
pub fn normalizing_sublattice(
    cprime: &DiagonalLattice,
    dim: QuditDimension,
) -> Result<DiagonalLattice, GroupError> {
    let survivors: Vec<_> = cprime
        .elements()
        .filter(|e| diag_normalizes_pauli(e, dim))
        .collect();
    let lattice = DiagonalLattice::from_generators(dim, &survivors)?;
    // The normalizer intersected with a group is a group, so the span adds nothing.
    if lattice.order() != survivors.len() as u128 {
        return Err(GroupError::ConstructionConsistency(format!(
            "normalizing elements ({}) do not form a lattice (span has {})",
            survivors.len(),
            lattice.order()
        )));
    }
    Ok(lattice)
}

/// Smallest lattice containing `lat` that is stable under entry permutations.
pub fn close_under_permutation(
    lat: &DiagonalLattice,
    dim: QuditDimension,
) -> Result<DiagonalLattice, GroupError> {
    let perms = Permutation::all(dim.d());
    let mut current = lat.clone();
    loop {
        let gens: Vec<_> = current
            .generators()
            .iter()
            .flat_map(|g| perms.iter().map(move |s| conjugate_diag_by_perm(g, s)))
            .collect();
        let next = DiagonalLattice::from_generators(dim, &gens)?;
        if next == current {
            return Ok(current);
        }
        current = next;
    }
}

/// Generators of the diagonal part as they are usually quoted: for qutrits
/// `T_0 = Diag(ω_9^2, ω_9^5, ω_9^2)` and `T_1 = ω_3 I`; for ququarts the four
/// diagonal gates `T_0..T_3` with exponent rings `Z_4, Z_2, Z_4, Z_8`.
pub fn expected_generators(dim: QuditDimension) -> Vec<(PhaseExponentVector, u64)> {
    let n = dim.root_order();
    let raw: Vec<(Vec<u64>, u64)> = match dim.d() {
        3 => vec![(vec![2, 5, 2], 9), (vec![3, 3, 3], 3)],
        _ => vec![
            (vec![0, 2, 2, 0], 4),
            (vec![4, 4, 4, 0], 2),
            (vec![4, 4, 6, 6], 4),
            (vec![5, 5, 5, 5], 8),
        ],
    };
    raw.into_iter()
        .map(|(e, o)| (PhaseExponentVector::new(e, n), o))
        .collect()
}

/// Additive order of an exponent vector in `Z_n^d`.
pub fn additive_order(v: &PhaseExponentVector) -> u64 {
    (1..=v.modulus())
        .find(|&k| v.scale(k).is_zero())
        .unwrap_or(v.modulus())
}

/// The unitary `X_σ · Diag(ω_n^diag)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MonomialElement {
    perm: Permutation,
    diag: PhaseExponentVector,
}

impl MonomialElement {
    pub fn perm(&self) -> &Permutation {
        &self.perm
    }

    pub fn diag(&self) -> &PhaseExponentVector {
        &self.diag
    }

    pub fn is_identity(&self) -> bool {
        self.perm.is_identity() && self.diag.is_zero()
    }

    pub fn unitary(&self) -> CMatrix {
        &perm_matrix(&self.perm) * &self.diag.to_matrix()
    }
}

/// Summary of a group construction, serialized as the build report.
#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub dimension: usize,
    pub root_order: u64,
    pub group_order: u128,
    pub lattice_order: u128,
    pub lattice_basis: Vec<Vec<u64>>,
    pub exponent_rings: Vec<u64>,
    pub interleaving_power: u64,
    pub t_in_group: bool,
    pub cprime_order: u128,
    pub normalizing_order: u128,
    pub normalizing_basis: Vec<Vec<u64>>,
    pub closure_enlarged_lattice: bool,
    pub closure_trials: usize,
    pub closure_failures: usize,
    pub diagonal_elements_normalizing_pauli: u128,
    pub permutations_normalizing_pauli: usize,
    pub permutation_count: usize,
    pub expected_generators: Vec<GeneratorCheck>,
    pub expected_generators_span_order: u128,
    pub expected_generators_span_lattice: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorCheck {
    pub exponents: Vec<u64>,
    pub in_lattice: bool,
    pub order: u64,
    pub expected_order: u64,
}

/// `C`: every permutation paired with every element of the diagonal lattice.
#[derive(Debug, Clone)]
pub struct CliffordLikeGroup {
    dim: QuditDimension,
    lattice: DiagonalLattice,
    perms: Vec<Permutation>,
    cprime_order: u128,
    normalizing: DiagonalLattice,
}

/// Builds `C` for the given dimension and validates closure.
pub fn build_group(dim: QuditDimension) -> Result<CliffordLikeGroup, GroupError> {
    let cprime = build_cprime_lattice(dim)?;
    let normalizing = normalizing_sublattice(&cprime, dim)?;
    let lattice = close_under_permutation(&normalizing, dim)?;
    let group = CliffordLikeGroup {
        dim,
        lattice,
        perms: Permutation::all(dim.d()),
        cprime_order: cprime.order(),
        normalizing,
    };
    let failures = group.closure_failures(CLOSURE_TRIALS);
    if failures > 0 {
        return Err(GroupError::ConstructionConsistency(format!(
            "{failures} of {CLOSURE_TRIALS} sampled products/inverses left the group"
        )));
    }
    Ok(group)
}

impl CliffordLikeGroup {
    pub fn dimension(&self) -> QuditDimension {
        self.dim
    }

    pub fn lattice(&self) -> &DiagonalLattice {
        &self.lattice
    }

    /// The Pauli-normalizing sublattice before permutation closure.
    pub fn normalizing_lattice(&self) -> &DiagonalLattice {
        &self.normalizing
    }

    pub fn permutations(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn order(&self) -> u128 {
        self.perms.len() as u128 * self.lattice.order()
    }

    pub fn identity(&self) -> MonomialElement {
        MonomialElement {
            perm: Permutation::identity(self.dim.d()),
            diag: PhaseExponentVector::zero(self.dim.d(), self.dim.root_order()),
        }
    }

    /// Wraps `(σ, diag)` after checking membership.
    pub fn element(
        &self,
        perm: Permutation,
        diag: PhaseExponentVector,
    ) -> Result<MonomialElement, GroupError> {
        if perm.len() != self.dim.d() {
            return Err(QuditError::DimensionMismatch {
                expected: self.dim.d(),
                got: perm.len(),
            }
            .into());
        }
        let diag = PhaseExponentVector::new(diag.exponents().to_vec(), self.dim.root_order());
        if !self.lattice.contains(&diag) {
            return Err(GroupError::ClosureViolation(format!(
                "diagonal {diag} is outside the lattice"
            )));
        }
        Ok(MonomialElement { perm, diag })
    }

    pub fn contains(&self, g: &MonomialElement) -> bool {
        g.perm.len() == self.dim.d() && self.lattice.contains(&g.diag)
    }

    /// `a · b`: `(X_σ D)(X_τ E) = X_{στ} (X_τ† D X_τ) E`.
    pub fn compose(
        &self,
        a: &MonomialElement,
        b: &MonomialElement,
    ) -> Result<MonomialElement, GroupError> {
        let perm = a.perm.compose(&b.perm);
        let diag = conjugate_diag_by_perm(&a.diag, &b.perm.inverse()).add(&b.diag);
        self.element(perm, diag)
    }

    /// `(X_σ D)^{-1} = X_{σ^{-1}} (X_σ D^{-1} X_σ†)`.
    pub fn inverse(&self, g: &MonomialElement) -> Result<MonomialElement, GroupError> {
        let perm = g.perm.inverse();
        let diag = conjugate_diag_by_perm(&g.diag.neg(), &g.perm);
        self.element(perm, diag)
    }

    /// Smallest `p >= 1` with `T^p` in the group.
    pub fn interleaving_power(&self) -> u64 {
        let t = t_gate(self.dim);
        (1..=self.dim.root_order())
            .find(|&p| self.lattice.contains(&t.scale(p)))
            .expect("T^n is the identity, so some power lies in the lattice")
    }

    /// `T^p` as a group element.
    pub fn t_power_element(&self) -> MonomialElement {
        let p = self.interleaving_power();
        MonomialElement {
            perm: Permutation::identity(self.dim.d()),
            diag: t_gate(self.dim).scale(p),
        }
    }

    pub fn contains_t(&self) -> bool {
        self.lattice.contains(&t_gate(self.dim))
    }

    /// Uniformly random element: uniform permutation and uniform canonical coordinates.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> MonomialElement {
        let perm = self.perms[rng.random_range(0..self.perms.len())].clone();
        let coords: Vec<u64> = self
            .lattice
            .exponent_rings()
            .iter()
            .map(|&o| rng.random_range(0..o))
            .collect();
        MonomialElement {
            perm,
            diag: self.lattice.element(&coords),
        }
    }

    /// Element number `idx` in enumeration order (permutation-major).
    pub fn element_at(&self, idx: u128) -> MonomialElement {
        let lat = self.lattice.order();
        let perm = self.perms[(idx / lat) as usize].clone();
        let rings = self.lattice.exponent_rings();
        let mut rest = idx % lat;
        let mut coords = vec![0u64; rings.len()];
        for (c, &o) in coords.iter_mut().zip(&rings).rev() {
            *c = (rest % o as u128) as u64;
            rest /= o as u128;
        }
        MonomialElement {
            perm,
            diag: self.lattice.element(&coords),
        }
    }

    /// Every element exactly once, provided the order is within `cap`.
    pub fn enumerate(
        &self,
        cap: u128,
    ) -> Result<impl Iterator<Item = MonomialElement> + '_, GroupError> {
        let order = self.order();
        if order > cap {
            return Err(GroupError::EnumerationCap { order, cap });
        }
        Ok(self.perms.iter().flat_map(move |p| {
            self.lattice.elements().map(move |diag| MonomialElement {
                perm: p.clone(),
                diag,
            })
        }))
    }

    /// Random closure check: products and inverses of sampled elements stay in the group.
    fn closure_failures(&self, trials: usize) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c105);
        (0..trials)
            .filter(|_| {
                let a = self.sample_uniform(&mut rng);
                let b = self.sample_uniform(&mut rng);
                self.compose(&a, &b).is_err() || self.inverse(&a).is_err()
            })
            .count()
    }

    pub fn report(&self) -> Result<BuildReport, GroupError> {
        let dim = self.dim;
        let expected = expected_generators(dim);
        let checks: Vec<GeneratorCheck> = expected
            .iter()
            .map(|(g, o)| GeneratorCheck {
                exponents: g.exponents().to_vec(),
                in_lattice: self.lattice.contains(g),
                order: additive_order(g),
                expected_order: *o,
            })
            .collect();
        let expected_span = DiagonalLattice::from_generators(
            dim,
            &expected.iter().map(|(g, _)| g.clone()).collect::<Vec<_>>(),
        )?;
        let normalizing_count = self
            .lattice
            .elements()
            .filter(|e| diag_normalizes_pauli(e, dim))
            .count() as u128;
        let perms_normalizing = self
            .perms
            .iter()
            .filter(|s| perm_normalizes_pauli(s, dim))
            .count();
        let rows = |l: &DiagonalLattice| l.howell_basis().matrix().row_vecs();
        Ok(BuildReport {
            dimension: dim.d(),
            root_order: dim.root_order(),
            group_order: self.order(),
            lattice_order: self.lattice.order(),
            lattice_basis: rows(&self.lattice),
            exponent_rings: self.lattice.exponent_rings(),
            interleaving_power: self.interleaving_power(),
            t_in_group: self.contains_t(),
            cprime_order: self.cprime_order,
            normalizing_order: self.normalizing.order(),
            normalizing_basis: rows(&self.normalizing),
            closure_enlarged_lattice: self.lattice.order() != self.normalizing.order(),
            closure_trials: CLOSURE_TRIALS,
            closure_failures: self.closure_failures(CLOSURE_TRIALS),
            diagonal_elements_normalizing_pauli: normalizing_count,
            permutations_normalizing_pauli: perms_normalizing,
            permutation_count: self.perms.len(),
            expected_generators: checks,
            expected_generators_span_order: expected_span.order(),
            expected_generators_span_lattice: expected_span == self.lattice,
        })
    }
}

/// Distinct group elements, used by tests and the CLI to sanity-check
/// enumeration.
pub fn distinct_count<I: IntoIterator<Item = MonomialElement>>(it: I) -> usize {
    it.into_iter().collect::<BTreeSet<_>>().len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(e: &[u64], n: u64) -> PhaseExponentVector {
        PhaseExponentVector::new(e.to_vec(), n)
    }

    #[test]
    fn qutrit_cprime_is_sum_zero_lattice() {
        let lat = build_cprime_lattice(QuditDimension::qutrit()).unwrap();
        assert_eq!(lat.order(), 81);
        assert!(lat.contains(&pv(&[3, 3, 3], 9)));
        for e in lat.elements() {
            assert_eq!(e.exponents().iter().sum::<u64>() % 9, 0);
        }
    }

    #[test]
    fn ququart_cprime_contains_permuted_t() {
        let dim = QuditDimension::ququart();
        let lat = build_cprime_lattice(dim).unwrap();
        for s in Permutation::all(4) {
            assert!(lat.contains(&conjugate_diag_by_perm(&t_gate(dim), &s)));
        }
    }

    #[test]
    fn qutrit_normalizing_sublattice() {
        let dim = QuditDimension::qutrit();
        let n = normalizing_sublattice(&build_cprime_lattice(dim).unwrap(), dim).unwrap();
        assert!(n.contains(&pv(&[3, 3, 3], 9)));
        assert!(n.contains(&pv(&[2, 5, 2], 9)));
        assert!(!n.contains(&pv(&[0, 1, 8], 9)));
        assert!(diag_normalizes_pauli(&pv(&[2, 5, 2], 9), dim));
        assert!(!diag_normalizes_pauli(&pv(&[0, 1, 8], 9), dim));
    }

    #[test]
    fn closure_adds_permuted_generators() {
        let dim = QuditDimension::qutrit();
        let lat =
            DiagonalLattice::from_generators(dim, &[pv(&[2, 5, 2], 9), pv(&[3, 3, 3], 9)]).unwrap();
        assert!(!lat.contains(&pv(&[5, 2, 2], 9)));
        let closed = close_under_permutation(&lat, dim).unwrap();
        assert!(closed.contains(&pv(&[5, 2, 2], 9)));
        assert!(closed.is_permutation_stable());
        assert_eq!(close_under_permutation(&closed, dim).unwrap(), closed);

        let constants = DiagonalLattice::from_generators(dim, &[pv(&[1, 1, 1], 9)]).unwrap();
        assert_eq!(close_under_permutation(&constants, dim).unwrap(), constants);
    }

    #[test]
    fn compose_and_inverse_identities() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = group.identity();
        assert_eq!(group.inverse(&e).unwrap(), e);
        for _ in 0..200 {
            let g = group.sample_uniform(&mut rng);
            assert_eq!(group.compose(&g, &e).unwrap(), g);
            assert_eq!(group.compose(&e, &g).unwrap(), g);
            let gi = group.inverse(&g).unwrap();
            assert!(group.compose(&g, &gi).unwrap().is_identity());
            assert_eq!(group.inverse(&gi).unwrap(), g);
        }
        let s = Permutation::cycle(3);
        let pure = group
            .element(s.clone(), PhaseExponentVector::zero(3, 9))
            .unwrap();
        let inv = group.inverse(&pure).unwrap();
        assert_eq!(inv.perm(), &s.inverse());
        assert!(inv.diag().is_zero());
    }

    #[test]
    fn element_rejects_outside_lattice() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        let t = t_gate(QuditDimension::qutrit());
        assert!(matches!(
            group.element(Permutation::identity(3), t),
            Err(GroupError::ClosureViolation(_))
        ));
    }

    #[test]
    fn interleaving_powers() {
        for (dim, p) in [
            (QuditDimension::qutrit(), 3),
            (QuditDimension::ququart(), 2),
        ] {
            let group = build_group(dim).unwrap();
            assert_eq!(group.interleaving_power(), p);
            assert!(!group.contains_t());
            let t = t_gate(dim);
            for q in 1..p {
                assert!(!group.lattice().contains(&t.scale(q)));
            }
            assert!(group.lattice().contains(&t.scale(p)));
        }
    }

    #[test]
    fn enumeration_cap() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        assert!(matches!(
            group.enumerate(10),
            Err(GroupError::EnumerationCap { .. })
        ));
        let all: Vec<_> = group.enumerate(DEFAULT_ENUMERATION_CAP).unwrap().collect();
        assert_eq!(all.len() as u128, group.order());
        assert_eq!(distinct_count(all.iter().cloned()), all.len());
        assert_eq!(all.iter().filter(|g| g.is_identity()).count(), 1);
        for (i, g) in all.iter().enumerate().step_by(7) {
            assert_eq!(&group.element_at(i as u128), g);
        }
    }

    #[test]
    fn ququart_expected_generators() {
        let group = build_group(QuditDimension::ququart()).unwrap();
        let report = group.report().unwrap();
        for check in &report.expected_generators {
            assert!(check.in_lattice, "{:?}", check.exponents);
            assert_eq!(check.order, check.expected_order);
        }
        assert_eq!(report.interleaving_power, 2);
        assert_eq!(report.group_order, 24 * report.lattice_order);
    }
}

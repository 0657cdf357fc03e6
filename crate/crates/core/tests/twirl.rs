use std::sync::OnceLock;

use proptest::prelude::*;
use qudit_ib::channels::{
    average_gate_fidelity, mix_to_target_fidelity, random_cptp, superop_from_kraus, KrausSet,
    SuperOperator,
};
use qudit_ib::clifford::{build_group, CliffordLikeGroup, DEFAULT_ENUMERATION_CAP};
use qudit_ib::matrix::CMatrix;
use qudit_ib::qudit::QuditDimension;
use qudit_ib::twirl::{
    agf_from_etas, block_spectrum, conjugate_by_element, exact_twirl, twirl_basis,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn group(dim: QuditDimension) -> &'static CliffordLikeGroup {
    static G3: OnceLock<CliffordLikeGroup> = OnceLock::new();
    static G4: OnceLock<CliffordLikeGroup> = OnceLock::new();
    let cell = if dim.d() == 3 { &G3 } else { &G4 };
    cell.get_or_init(|| build_group(dim).unwrap())
}

fn twirl(noise: &SuperOperator, dim: QuditDimension) -> SuperOperator {
    exact_twirl(noise, group(dim), DEFAULT_ENUMERATION_CAP).unwrap()
}

fn random_noise(d: usize, seed: u64) -> SuperOperator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    superop_from_kraus(&random_cptp(d, d * d, &mut rng).unwrap())
}

/// Twirl computed with dense `d²×d²` products of full unitary channels.
fn dense_twirl(noise: &SuperOperator, g: &CliffordLikeGroup) -> CMatrix {
    let dd = noise.dim() * noise.dim();
    let mut acc = CMatrix::zeros(dd, dd);
    let mut count = 0.0;
    for h in g.enumerate(DEFAULT_ENUMERATION_CAP).unwrap() {
        let s = SuperOperator::from_unitary(&h.unitary());
        acc = &acc + &(&(&s.matrix().adjoint() * noise.matrix()) * s.matrix());
        count += 1.0;
    }
    acc.scale(qudit_ib::matrix::C64::new(1.0 / count, 0.0))
}

#[test]
fn fast_twirl_matches_dense_oracle() {
    let dim = QuditDimension::qutrit();
    let noise = random_noise(3, 1);
    let fast = twirl(&noise, dim);
    assert!(fast.matrix().max_abs_diff(&dense_twirl(&noise, group(dim))) < 1e-12);
}

#[test]
fn twirl_has_block_structure() {
    for (dim, trials) in [
        (QuditDimension::qutrit(), 20u64),
        (QuditDimension::ququart(), 5),
    ] {
        let d = dim.d();
        for seed in 0..trials {
            let noise = random_noise(d, seed);
            let t = twirl(&noise, dim);
            let spec = block_spectrum(&t).unwrap();
            assert!(spec.max_residual() < 1e-8);
            let f = average_gate_fidelity(&noise);
            assert!((average_gate_fidelity(&t) - f).abs() < 1e-10);
            assert!((agf_from_etas(spec.eta0, spec.eta_plus, d) - f).abs() < 1e-10);
        }
    }
}

/// Reconstructing `1 ⊕ η₀ ⊕ η₊` in the twirl basis gives back the twirl.
#[test]
fn twirl_is_diagonal_in_basis() {
    let dim = QuditDimension::qutrit();
    let t = twirl(&random_noise(3, 5), dim);
    let spec = block_spectrum(&t).unwrap();
    let b = twirl_basis(3);
    let diag: Vec<_> = (0..9)
        .map(|i| match i {
            0 => 1.0,
            1 | 2 => spec.eta0,
            _ => spec.eta_plus,
        })
        .map(|x| qudit_ib::matrix::C64::new(x, 0.0))
        .collect();
    let rebuilt = &(&b * &CMatrix::diagonal(&diag)) * &b.adjoint();
    assert!(rebuilt.max_abs_diff(t.matrix()) < 1e-10);
}

#[test]
fn depolarizing_is_fixed() {
    for dim in [QuditDimension::qutrit(), QuditDimension::ququart()] {
        let d = dim.d();
        for lambda in [0.5, 0.9, 0.99] {
            let noise = superop_from_kraus(&KrausSet::depolarizing(dim, lambda).unwrap());
            let t = twirl(&noise, dim);
            assert!(t.matrix().max_abs_diff(noise.matrix()) < 1e-12);
            let spec = block_spectrum(&t).unwrap();
            assert!((spec.eta0 - lambda).abs() < 1e-10);
            assert!((spec.eta_plus - lambda).abs() < 1e-10);
            let f = (1.0 + (d as f64 - 1.0) * lambda) / d as f64;
            assert!((agf_from_etas(spec.eta0, spec.eta_plus, d) - f).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn twirl_is_idempotent(seed in any::<u64>(), four in any::<bool>()) {
        let dim = if four { QuditDimension::ququart() } else { QuditDimension::qutrit() };
        let t = twirl(&random_noise(dim.d(), seed), dim);
        prop_assert!(twirl(&t, dim).matrix().max_abs_diff(t.matrix()) < 1e-12);
    }

    #[test]
    fn twirl_is_conjugation_invariant(seed in any::<u64>(), idx in any::<u64>(), four in any::<bool>()) {
        let dim = if four { QuditDimension::ququart() } else { QuditDimension::qutrit() };
        let g = group(dim);
        let noise = random_noise(dim.d(), seed);
        let h = g.element_at(u128::from(idx) % g.order());
        let moved = conjugate_by_element(&noise, &h);
        prop_assert!(twirl(&moved, dim).matrix().max_abs_diff(twirl(&noise, dim).matrix()) < 1e-12);
    }

    #[test]
    fn low_fidelity_twirls_keep_structure(seed in any::<u64>(), target in 0.3f64..1.0) {
        let dim = QuditDimension::qutrit();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_cptp(3, 9, &mut rng).unwrap();
        prop_assume!(target >= 1.0 / 3.0);
        let noise = superop_from_kraus(&mix_to_target_fidelity(&k, target).unwrap());
        let spec = block_spectrum(&twirl(&noise, dim)).unwrap();
        prop_assert!((agf_from_etas(spec.eta0, spec.eta_plus, 3) - target).abs() < 1e-10);
    }
}

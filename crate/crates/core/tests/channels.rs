use proptest::prelude::*;
use qudit_ib::channels::{
    agf_from_chi00, average_gate_fidelity, chi00, chi00_from_kraus, devectorize,
    mix_to_target_fidelity, random_cptp, superop_from_kraus, vectorize, DensityMatrix, KrausSet,
    SuperOperator,
};
use qudit_ib::matrix::{CMatrix, C64};
use qudit_ib::qudit::{pauli_matrix, QuditDimension};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIMS: [QuditDimension; 2] = [QuditDimension::qutrit(), QuditDimension::ququart()];

/// `F = (Σ_j tr(U_j† E(U_j)) + d²) / (d²(d+1))` over the `d²` Weyl operators.
fn agf_weyl_oracle(k: &KrausSet, dim: QuditDimension) -> f64 {
    let d = dim.d();
    let mut sum = 0.0;
    for a in 0..d {
        for b in 0..d {
            let u = pauli_matrix(dim, a, b);
            sum += (&u.adjoint() * &k.apply(&u)).trace().re;
        }
    }
    let d = d as f64;
    (sum + d * d) / (d * d * (d + 1.0))
}

fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let k = random_cptp(d, d * d, rng).unwrap();
    DensityMatrix::new(k.apply(&DensityMatrix::pure(&unit(d, 0)).unwrap().matrix().clone()))
        .unwrap()
}

fn unit(d: usize, i: usize) -> Vec<C64> {
    (0..d)
        .map(|j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

#[test]
fn cross_formula_consistency() {
    for dim in DIMS {
        let d = dim.d();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + d as u64);
        for trial in 0..100 {
            let rank = 1 + trial % (d * d);
            let k = random_cptp(d, rank, &mut rng).unwrap();
            let s = superop_from_kraus(&k);
            let f = average_gate_fidelity(&s);
            let via_chi = agf_from_chi00(chi00_from_kraus(&k), d);
            assert!(
                (f - via_chi).abs() < 1e-12,
                "d={d} trial={trial}: {f} vs {via_chi}"
            );
            assert!((chi00(&s) - chi00_from_kraus(&k)).abs() < 1e-12);
            assert!((f - agf_weyl_oracle(&k, dim)).abs() < 1e-12);
        }
    }
}

#[test]
fn composition_is_a_homomorphism() {
    for dim in DIMS {
        let d = dim.d();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_cptp(d, 3, &mut rng).unwrap();
            let b = random_cptp(d, 2, &mut rng).unwrap();
            // Kraus operators of `a ∘ b` are all products `A_i B_j`.
            let ops: Vec<CMatrix> = a
                .ops()
                .iter()
                .flat_map(|x| b.ops().iter().map(move |y| x * y))
                .collect();
            let ab = KrausSet::new(ops).unwrap();
            let lhs = superop_from_kraus(&ab);
            let rhs = superop_from_kraus(&a).compose(&superop_from_kraus(&b));
            assert!(lhs.matrix().max_abs_diff(rhs.matrix()) < 1e-12);

            let rho = random_state(d, &mut rng);
            let direct = a.apply(&b.apply(rho.matrix()));
            let via_super = devectorize(&rhs.apply(&vectorize(&rho))).unwrap();
            assert!(direct.max_abs_diff(via_super.matrix()) < 1e-12);
        }
    }
}

#[test]
fn depolarizing_matches_closed_forms() {
    for dim in DIMS {
        let d = dim.d();
        for lambda in [-1.0 / (d * d - 1) as f64, 0.0, 0.5, 0.9, 1.0] {
            let k = KrausSet::depolarizing(dim, lambda).unwrap();
            let s = superop_from_kraus(&k);
            assert!(
                s.matrix()
                    .max_abs_diff(SuperOperator::depolarizing(d, lambda).matrix())
                    < 1e-12
            );
            let expected = (1.0 + (d as f64 - 1.0) * lambda) / d as f64;
            assert!((average_gate_fidelity(&s) - expected).abs() < 1e-12);
        }
        assert!(KrausSet::depolarizing(dim, 1.1).is_err());
    }
}

#[test]
fn unreachable_target_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = random_cptp(3, 9, &mut rng).unwrap();
    assert!(mix_to_target_fidelity(&k, 0.1).is_err());
    assert!(mix_to_target_fidelity(&k, 1.5).is_err());
}

#[test]
fn channel_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = random_cptp(4, 5, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.json");
    k.save(&path).unwrap();
    assert_eq!(KrausSet::load(&path).unwrap(), k);
    std::fs::write(&path, "{\"dimension\": 3}").unwrap();
    assert!(KrausSet::load(&path).is_err());
}

/// `|χ₀₀(EE′) − χ₀₀(E)χ₀₀(E′)|` is second order in the infidelities.
#[test]
fn chi_multiplicativity_near_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dim in DIMS {
        let d = dim.d();
        for _ in 0..10 {
            let e = superop_from_kraus(
                &mix_to_target_fidelity(&random_cptp(d, d * d, &mut rng).unwrap(), 0.999).unwrap(),
            );
            let f = superop_from_kraus(
                &mix_to_target_fidelity(&random_cptp(d, d * d, &mut rng).unwrap(), 0.99).unwrap(),
            );
            let gap = (chi00(&e.compose(&f)) - chi00(&e) * chi00(&f)).abs();
            let (ie, if_) = (1.0 - chi00(&e), 1.0 - chi00(&f));
            assert!(
                gap <= 4.0 * (ie * if_).sqrt().max(ie * if_) + 1e-12,
                "gap {gap}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_channels_are_cptp(seed in any::<u64>(), rank in 1usize..=16, four in any::<bool>()) {
        let d = if four { 4 } else { 3 };
        let rank = 1 + (rank - 1) % (d * d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_cptp(d, rank, &mut rng).unwrap();
        prop_assert_eq!(k.ops().len(), rank);
        let s = superop_from_kraus(&k);
        prop_assert!(s.trace_preservation_residual() < 1e-10);
        let rho = random_state(d, &mut rng);
        let out = k.apply(rho.matrix());
        prop_assert!(DensityMatrix::new(out).is_ok());
    }

    #[test]
    fn mixing_hits_target(seed in any::<u64>(), target in 0.5f64..1.0, four in any::<bool>()) {
        let d = if four { 4 } else { 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = random_cptp(d, d * d, &mut rng).unwrap();
        let mixed = mix_to_target_fidelity(&k, target).unwrap();
        let f = average_gate_fidelity(&superop_from_kraus(&mixed));
        prop_assert!((f - target).abs() < 1e-12);
        prop_assert!(superop_from_kraus(&mixed).trace_preservation_residual() < 1e-10);
    }
}

//! Exact group twirls over the Clifford-like group and their block spectrum.
//!
//! A twirl over `C` is block diagonal in the basis
//! `(I/√d | traceless diagonal | off-diagonal matrix units)`, acting as
//! `1 ⊕ η₀·1_{d−1} ⊕ η₊·1_{d²−d}`.

use serde::Serialize;
use thiserror::Error;

use crate::channels::SuperOperator;
use crate::clifford::{CliffordLikeGroup, GroupError, MonomialElement};
use crate::matrix::{root_of_unity, CMatrix, C64, ONE, ZERO};

/// Default residual tolerance for spectra of exact twirls.
pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TwirlError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("noise acts on dimension {noise}, group on {group}")]
    DimensionMismatch { noise: usize, group: usize },
    #[error(
        "twirl does not have the 1 ⊕ η₀ ⊕ η₊ block structure (residual {residual:.3e} > {tol:.1e})"
    )]
    StructureViolation {
        residual: f64,
        tol: f64,
        spectrum: Box<TwirlSpectrum>,
    },
}

/// Decay parameters read off a twirled superoperator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwirlSpectrum {
    pub eta0: f64,
    pub eta_plus: f64,
    /// Deviation from the predicted value inside the trace, diagonal-traceless
    /// and off-diagonal blocks.
    pub block_residuals: [f64; 3],
    /// Frobenius norm of every entry coupling different blocks.
    pub offblock_residual: f64,
}

impl TwirlSpectrum {
    pub fn max_residual(&self) -> f64 {
        self.block_residuals
            .iter()
            .copied()
            .fold(self.offblock_residual, f64::max)
    }
}

/// `S(g) = U ⊗ conj(U)` is monomial for monomial `U`; returns, for each
/// vectorized basis index `a`, the target index `π(a)` and phase `s_a` with
/// `S(g) e_a = s_a e_{π(a)}`.
fn monomial_superop(g: &MonomialElement) -> (Vec<usize>, Vec<C64>) {
    let d = g.perm().len();
    let n = g.diag().modulus();
    let e = g.diag().exponents();
    let mut target = Vec::with_capacity(d * d);
    let mut phase = Vec::with_capacity(d * d);
    for k in 0..d {
        for l in 0..d {
            target.push(g.perm().apply(k) * d + g.perm().apply(l));
            phase.push(root_of_unity((e[k] + n - e[l]) % n, n));
        }
    }
    (target, phase)
}

/// `S(g) v` for a vectorized `d×d` matrix `v`, without forming `S(g)`.
pub fn apply_element(g: &MonomialElement, v: &[C64]) -> Vec<C64> {
    let (target, phase) = monomial_superop(g);
    let mut out = vec![ZERO; v.len()];
    for (a, &x) in v.iter().enumerate() {
        out[target[a]] = phase[a] * x;
    }
    out
}

/// The unitary channel of a group element.
pub fn element_superop(g: &MonomialElement) -> SuperOperator {
    SuperOperator::from_unitary(&g.unitary())
}

/// `S(g)† · N · S(g)`, computed in `O(d⁴)` using the monomial structure.
pub fn conjugate_by_element(noise: &SuperOperator, g: &MonomialElement) -> SuperOperator {
    let (target, phase) = monomial_superop(g);
    let n = noise.matrix();
    let dd = target.len();
    let m = CMatrix::from_fn(dd, dd, |a, b| {
        phase[a].conj() * phase[b] * n[(target[a], target[b])]
    });
    SuperOperator::new(noise.dim(), m).expect("shape preserved")
}

/// `(1/|C|) Σ_g S(g)† · N · S(g)`, summed pairwise over the enumeration order.
pub fn exact_twirl(
    noise: &SuperOperator,
    group: &CliffordLikeGroup,
    cap: u128,
) -> Result<SuperOperator, TwirlError> {
    let d = group.dimension().d();
    if noise.dim() != d {
        return Err(TwirlError::DimensionMismatch {
            noise: noise.dim(),
            group: d,
        });
    }
    let elements: Vec<MonomialElement> = group.enumerate(cap)?.collect();
    let total = pairwise_sum(noise, &elements);
    let scale = C64::new(1.0 / elements.len() as f64, 0.0);
    Ok(SuperOperator::new(d, total.scale(scale)).expect("shape preserved"))
}

fn pairwise_sum(noise: &SuperOperator, elements: &[MonomialElement]) -> CMatrix {
    if elements.len() <= 8 {
        let dd = noise.dim() * noise.dim();
        return elements.iter().fold(CMatrix::zeros(dd, dd), |acc, g| {
            &acc + conjugate_by_element(noise, g).matrix()
        });
    }
    let (lo, hi) = elements.split_at(elements.len() / 2);
    &pairwise_sum(noise, lo) + &pairwise_sum(noise, hi)
}

/// Orthonormal basis (as columns, in vectorized coordinates): `vec(I)/√d`,
/// then Gram-Schmidt of `|i⟩⟨i| − |i+1⟩⟨i+1|`, then the matrix units
/// `|i⟩⟨j|`, `i ≠ j`, in row-major order.
pub fn twirl_basis(d: usize) -> CMatrix {
    let dd = d * d;
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dd);
    cols.push(
        (0..dd)
            .map(|a| {
                if a / d == a % d {
                    C64::new(1.0 / (d as f64).sqrt(), 0.0)
                } else {
                    ZERO
                }
            })
            .collect(),
    );
    for i in 0..d - 1 {
        let mut v = vec![ZERO; dd];
        v[i * d + i] = ONE;
        v[(i + 1) * d + i + 1] = -ONE;
        for q in &cols {
            let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let mut v = vec![ZERO; dd];
                v[i * d + j] = ONE;
                cols.push(v);
            }
        }
    }
    CMatrix::from_fn(dd, dd, |r, c| cols[c][r])
}

/// Block index of each basis position: 0 trace, 1 diagonal-traceless, 2 off-diagonal.
fn block_of(idx: usize, d: usize) -> usize {
    if idx == 0 {
        0
    } else if idx < d {
        1
    } else {
        2
    }
}

/// Reads `η₀`, `η₊` off a twirled superoperator without judging the residuals.
pub fn spectrum_of(t: &SuperOperator) -> TwirlSpectrum {
    let d = t.dim();
    let dd = d * d;
    let b = twirl_basis(d);
    let m = &(&b.adjoint() * t.matrix()) * &b;

    let mean =
        |lo: usize, hi: usize| (lo..hi).map(|i| m[(i, i)].re).sum::<f64>() / (hi - lo) as f64;
    let eta0 = mean(1, d);
    let eta_plus = mean(d, dd);
    let targets = [1.0, eta0, eta_plus];

    let mut block = [0.0f64; 3];
    let mut off = 0.0f64;
    for i in 0..dd {
        for j in 0..dd {
            let (bi, bj) = (block_of(i, d), block_of(j, d));
            let z = m[(i, j)];
            if bi == bj {
                let expected = if i == j { targets[bi] } else { 0.0 };
                block[bi] = block[bi].max((z - expected).norm());
            } else {
                off += z.norm_sqr();
            }
        }
    }
    TwirlSpectrum {
        eta0,
        eta_plus,
        block_residuals: block,
        offblock_residual: off.sqrt(),
    }
}

/// Spectrum of a twirl, failing if it deviates from the three-block form by more than `tol`.
pub fn block_spectrum_with_tol(t: &SuperOperator, tol: f64) -> Result<TwirlSpectrum, TwirlError> {
    let spec = spectrum_of(t);
    let residual = spec.max_residual();
    if residual > tol {
        return Err(TwirlError::StructureViolation {
            residual,
            tol,
            spectrum: Box::new(spec),
        });
    }
    Ok(spec)
}

pub fn block_spectrum(t: &SuperOperator) -> Result<TwirlSpectrum, TwirlError> {
    block_spectrum_with_tol(t, DEFAULT_STRUCTURE_TOL)
}

/// Average gate fidelity of a channel whose twirl has decay parameters `η₀, η₊`.
pub fn agf_from_etas(eta0: f64, eta_plus: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * (1.0 + (d - 1.0) * eta0 + (d * d - d) * eta_plus) + d * d) / (d * d * (d + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{average_gate_fidelity, random_cptp, superop_from_kraus};
    use crate::clifford::{build_group, DEFAULT_ENUMERATION_CAP};
    use crate::qudit::QuditDimension;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn basis_is_unitary() {
        for d in [3, 4] {
            assert!(twirl_basis(d).is_unitary(1e-12));
        }
    }

    #[test]
    fn fast_conjugation_matches_dense() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = superop_from_kraus(&random_cptp(3, 9, &mut rng).unwrap());
        for _ in 0..20 {
            let g = group.sample_uniform(&mut rng);
            let s = element_superop(&g);
            let dense = &(&s.matrix().adjoint() * noise.matrix()) * s.matrix();
            assert!(
                conjugate_by_element(&noise, &g)
                    .matrix()
                    .frobenius_distance(&dense)
                    < 1e-12
            );
            let v: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
            let fast = apply_element(&g, &v);
            let slow = s.apply(&v);
            assert!(fast.iter().zip(&slow).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn identity_and_depolarizing_are_fixed() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        let id = SuperOperator::identity(3);
        let t = exact_twirl(&id, &group, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(t.matrix().frobenius_distance(id.matrix()) < 1e-12);
        let spec = block_spectrum(&t).unwrap();
        assert!((spec.eta0 - 1.0).abs() < 1e-12 && (spec.eta_plus - 1.0).abs() < 1e-12);
        assert!(spec.max_residual() < 1e-12);

        let dep = SuperOperator::depolarizing(3, 0.7);
        let t = exact_twirl(&dep, &group, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!(t.matrix().frobenius_distance(dep.matrix()) < 1e-12);
        let spec = block_spectrum(&t).unwrap();
        assert!((spec.eta0 - 0.7).abs() < 1e-12 && (spec.eta_plus - 0.7).abs() < 1e-12);
    }

    #[test]
    fn random_twirl_preserves_fidelity() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let noise = superop_from_kraus(&random_cptp(3, 9, &mut rng).unwrap());
        let t = exact_twirl(&noise, &group, DEFAULT_ENUMERATION_CAP).unwrap();
        let spec = block_spectrum(&t).unwrap();
        let f = average_gate_fidelity(&noise);
        assert!((agf_from_etas(spec.eta0, spec.eta_plus, 3) - f).abs() < 1e-10);
        assert!((average_gate_fidelity(&t) - f).abs() < 1e-10);
    }

    #[test]
    fn raw_noise_violates_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noise = superop_from_kraus(&random_cptp(3, 2, &mut rng).unwrap());
        assert!(matches!(
            block_spectrum(&noise),
            Err(TwirlError::StructureViolation { .. })
        ));
    }

    #[test]
    fn agf_formula() {
        assert!((agf_from_etas(1.0, 1.0, 3) - 1.0).abs() < 1e-15);
        for lambda in [0.2, 0.5, 0.93] {
            assert!((agf_from_etas(lambda, lambda, 3) - (1.0 + 2.0 * lambda) / 3.0).abs() < 1e-14);
            assert!((agf_from_etas(lambda, lambda, 4) - (1.0 + 3.0 * lambda) / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let group = build_group(QuditDimension::qutrit()).unwrap();
        assert!(matches!(
            exact_twirl(&SuperOperator::identity(4), &group, DEFAULT_ENUMERATION_CAP),
            Err(TwirlError::DimensionMismatch { .. })
        ));
    }
}

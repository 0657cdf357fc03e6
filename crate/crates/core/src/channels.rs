//! Density matrices, Kraus channels and their superoperators.
//!
//! Vectorization is row-major: `|i⟩⟨j|` maps to index `i*d + j`, under which
//! the channel `ρ ↦ Σ A ρ A†` acts as `Σ A ⊗ conj(A)`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{CMatrix, C64, ONE, ZERO};
use crate::qudit::{pauli_matrix, QuditDimension};

pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("Kraus operators are not trace preserving (‖Σ A†A − I‖ = {0:.3e})")]
    NotTracePreserving(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("target fidelity {target} unreachable from {from} (reachable range [{min}, 1])")]
    UnreachableFidelity { target: f64, from: f64, min: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("channel file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("channel file {path}: {source}")]
    Format {
        path: String,
        source: serde_json::Error,
    },
}

/// Hermitian, unit-trace, positive semidefinite `d×d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self, ChannelError> {
        if !m.is_square() {
            return Err(ChannelError::InvalidState("not square".into()));
        }
        if !m.is_hermitian(1e-12) {
            return Err(ChannelError::InvalidState("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(ChannelError::InvalidState(format!("trace {tr} != 1")));
        }
        if !is_positive_semidefinite(&m, 1e-10) {
            return Err(ChannelError::InvalidState("negative eigenvalue".into()));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(psi: &[C64]) -> Result<Self, ChannelError> {
        let d = psi.len();
        Self::new(CMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(CMatrix::identity(d).scale(C64::new(1.0 / d as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// Cholesky on `m + tol·I`; succeeds iff the smallest eigenvalue is above `-tol`
/// (up to rounding).
fn is_positive_semidefinite(m: &CMatrix, tol: f64) -> bool {
    let n = m.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)].re + tol;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if diag < 0.0 {
            return false;
        }
        let djj = diag.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = if djj > 0.0 { s / djj } else { ZERO };
        }
    }
    true
}

pub fn vectorize(rho: &DensityMatrix) -> Vec<C64> {
    rho.0.data().to_vec()
}

/// Inverse of [`vectorize`]; validates the result.
pub fn devectorize(v: &[C64]) -> Result<DensityMatrix, ChannelError> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(ChannelError::Shape(format!(
            "length {} is not a square",
            v.len()
        )));
    }
    DensityMatrix::new(CMatrix::from_vec(d, d, v.to_vec()))
}

/// Trace-preserving set of Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    dim: usize,
    ops: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self, ChannelError> {
        let dim = ops
            .first()
            .map(CMatrix::rows)
            .ok_or_else(|| ChannelError::Shape("no Kraus operators".into()))?;
        if ops.iter().any(|a| a.rows() != dim || a.cols() != dim) {
            return Err(ChannelError::Shape(
                "Kraus operators must all be d×d".into(),
            ));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for a in &ops {
            sum = &sum + &(&a.adjoint() * a);
        }
        let err = sum.frobenius_distance(&CMatrix::identity(dim));
        if err > TRACE_PRESERVATION_TOL {
            return Err(ChannelError::NotTracePreserving(err));
        }
        Ok(Self { dim, ops })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            dim: d,
            ops: vec![CMatrix::identity(d)],
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self, ChannelError> {
        Self::new(vec![u])
    }

    /// `ρ ↦ λρ + (1−λ) tr(ρ) I/d`, written with Weyl operators.
    pub fn depolarizing(dim: QuditDimension, lambda: f64) -> Result<Self, ChannelError> {
        let d = dim.d();
        let d2 = (d * d) as f64;
        let min = -1.0 / (d2 - 1.0);
        if !(min..=1.0).contains(&lambda) {
            return Err(ChannelError::InvalidParameter(format!(
                "depolarizing parameter {lambda} outside [{min:.4}, 1]"
            )));
        }
        let mut ops = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let w = if a == 0 && b == 0 {
                    lambda + (1.0 - lambda) / d2
                } else {
                    (1.0 - lambda) / d2
                };
                if w > 0.0 {
                    ops.push(pauli_matrix(dim, a, b).scale(C64::new(w.sqrt(), 0.0)));
                }
            }
        }
        Self::new(ops)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for a in &self.ops {
            out = &out + &(&(a * rho) * &a.adjoint());
        }
        out
    }

    pub fn to_file_format(&self) -> ChannelFile {
        ChannelFile {
            dimension: self.dim,
            kraus: self
                .ops
                .iter()
                .map(|a| {
                    (0..self.dim)
                        .map(|i| {
                            (0..self.dim)
                                .map(|j| [a[(i, j)].re, a[(i, j)].im])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn from_file_format(f: &ChannelFile) -> Result<Self, ChannelError> {
        let d = f.dimension;
        let mut ops = Vec::with_capacity(f.kraus.len());
        for (n, rows) in f.kraus.iter().enumerate() {
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(ChannelError::Shape(format!(
                    "Kraus operator {n} is not {d}×{d}"
                )));
            }
            ops.push(CMatrix::from_fn(d, d, |i, j| {
                C64::new(rows[i][j][0], rows[i][j][1])
            }));
        }
        Self::new(ops)
    }

    pub fn save(&self, path: &Path) -> Result<(), ChannelError> {
        let text = serde_json::to_string_pretty(&self.to_file_format()).map_err(|source| {
            ChannelError::Format {
                path: path.display().to_string(),
                source,
            }
        })?;
        std::fs::write(path, text + "\n").map_err(|source| ChannelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ChannelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ChannelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let f: ChannelFile =
            serde_json::from_str(&text).map_err(|source| ChannelError::Format {
                path: path.display().to_string(),
                source,
            })?;
        Self::from_file_format(&f)
    }
}

/// On-disk channel format: Kraus operators as row-major lists of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub dimension: usize,
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

/// A `d²×d²` matrix acting on vectorized `d×d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: CMatrix) -> Result<Self, ChannelError> {
        if matrix.rows() != dim * dim || matrix.cols() != dim * dim {
            return Err(ChannelError::Shape(format!(
                "superoperator must be {0}×{0}",
                dim * dim
            )));
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            matrix: CMatrix::identity(dim * dim),
        }
    }

    /// `U ⊗ conj(U)`.
    pub fn from_unitary(u: &CMatrix) -> Self {
        Self {
            dim: u.rows(),
            matrix: u.kron(&u.conj()),
        }
    }

    /// `λ·1 + (1−λ)|I⟩⟩⟨⟨I|/d`.
    pub fn depolarizing(dim: usize, lambda: f64) -> Self {
        let mut m = CMatrix::identity(dim * dim).scale(C64::new(lambda, 0.0));
        let w = (1.0 - lambda) / dim as f64;
        for i in 0..dim {
            for j in 0..dim {
                m[(i * dim + i, j * dim + j)] += w;
            }
        }
        Self { dim, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.matvec(v)
    }

    /// Largest deviation of `⟨⟨I| S` from `⟨⟨I|` (zero for trace-preserving maps).
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for col in 0..d * d {
            let s: C64 = (0..d).map(|i| self.matrix[(i * d + i, col)]).sum();
            let expected = if col / d == col % d { ONE } else { ZERO };
            worst = worst.max((s - expected).norm());
        }
        worst
    }
}

/// `Σ_A A ⊗ conj(A)`.
pub fn superop_from_kraus(k: &KrausSet) -> SuperOperator {
    let d = k.dim;
    let mut m = CMatrix::zeros(d * d, d * d);
    for a in &k.ops {
        m = &m + &a.kron(&a.conj());
    }
    SuperOperator { dim: d, matrix: m }
}

/// `F = (d·tr S + d²) / (d²(d+1))`.
pub fn average_gate_fidelity(s: &SuperOperator) -> f64 {
    let d = s.dim as f64;
    (d * s.trace().re + d * d) / (d * d * (d + 1.0))
}

/// `χ₀₀ = ((d+1)F − 1)/d`.
pub fn chi00_from_agf(f: f64, d: usize) -> f64 {
    let d = d as f64;
    ((d + 1.0) * f - 1.0) / d
}

/// `F = (d·χ₀₀ + 1)/(d+1)`.
pub fn agf_from_chi00(chi: f64, d: usize) -> f64 {
    let d = d as f64;
    (d * chi + 1.0) / (d + 1.0)
}

/// `χ₀₀` through the average gate fidelity.
pub fn chi00(s: &SuperOperator) -> f64 {
    chi00_from_agf(average_gate_fidelity(s), s.dim)
}

/// `χ₀₀ = Σ_A |tr A|² / d²`, straight from the Kraus operators.
pub fn chi00_from_kraus(k: &KrausSet) -> f64 {
    let d2 = (k.dim * k.dim) as f64;
    k.ops.iter().map(|a| a.trace().norm_sqr()).sum::<f64>() / d2
}

/// Random channel from a Stinespring isometry: a `(d·rank)×d` complex Gaussian
/// matrix is orthonormalized column by column and cut into `rank` blocks.
pub fn random_cptp<R: Rng + ?Sized>(
    d: usize,
    rank: usize,
    rng: &mut R,
) -> Result<KrausSet, ChannelError> {
    if rank == 0 || rank > d * d {
        return Err(ChannelError::InvalidParameter(format!(
            "Kraus rank {rank} outside [1, {}]",
            d * d
        )));
    }
    let rows = d * rank;
    let mut cols: Vec<Vec<C64>> = (0..d)
        .map(|_| {
            (0..rows)
                .map(|_| {
                    C64::new(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    )
                })
                .collect()
        })
        .collect();
    // Modified Gram-Schmidt, twice for numerical orthogonality; R's diagonal stays positive.
    for j in 0..d {
        for _pass in 0..2 {
            for i in 0..j {
                let proj: C64 = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(q, v)| q.conj() * v)
                    .sum();
                let qi = cols[i].clone();
                for (v, q) in cols[j].iter_mut().zip(&qi) {
                    *v -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
    }
    let ops = (0..rank)
        .map(|r| CMatrix::from_fn(d, d, |i, j| cols[j][r * d + i]))
        .collect();
    KrausSet::new(ops)
}

/// Mixes `k` with the identity (or, for targets below `F(k)`, with the
/// completely depolarizing channel) so the result has average gate fidelity
/// exactly `target`. The fidelity is affine in the mixing weight.
pub fn mix_to_target_fidelity(k: &KrausSet, target: f64) -> Result<KrausSet, ChannelError> {
    let d = k.dim;
    let f0 = average_gate_fidelity(&superop_from_kraus(k));
    let floor = 1.0 / d as f64;
    let unreachable = || ChannelError::UnreachableFidelity {
        target,
        from: f0,
        min: floor.min(f0),
    };
    if !target.is_finite() || target > 1.0 + 1e-15 {
        return Err(unreachable());
    }
    if (target - f0).abs() <= 1e-15 {
        return Ok(k.clone());
    }
    let scaled = |w: f64| -> Vec<CMatrix> {
        k.ops
            .iter()
            .map(|a| a.scale(C64::new(w.sqrt(), 0.0)))
            .collect()
    };
    if target > f0 {
        let lambda = ((target - f0) / (1.0 - f0)).min(1.0);
        let mut ops = vec![CMatrix::identity(d).scale(C64::new(lambda.sqrt(), 0.0))];
        if lambda < 1.0 {
            ops.extend(scaled(1.0 - lambda));
        }
        return KrausSet::new(ops);
    }
    if target < floor {
        return Err(unreachable());
    }
    let mu = (f0 - target) / (f0 - floor);
    let dim = QuditDimension::new(d).map_err(|e| ChannelError::InvalidParameter(e.to_string()))?;
    let w = (mu / (d * d) as f64).sqrt();
    let mut ops = scaled(1.0 - mu);
    for a in 0..d {
        for b in 0..d {
            ops.push(pauli_matrix(dim, a, b).scale(C64::new(w, 0.0)));
        }
    }
    KrausSet::new(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::t_gate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let k = random_cptp(d, d * d, rng).unwrap();
        let mut rho = CMatrix::zeros(d, d);
        rho[(0, 0)] = ONE;
        DensityMatrix::new(k.apply(&rho)).unwrap()
    }

    #[test]
    fn vectorize_examples() {
        let mut ket0 = vec![ZERO; 3];
        ket0[0] = ONE;
        let v = vectorize(&DensityMatrix::pure(&ket0).unwrap());
        assert_eq!(v[0], ONE);
        assert!(v[1..].iter().all(|z| *z == ZERO));

        let v = vectorize(&DensityMatrix::maximally_mixed(3));
        for (i, z) in v.iter().enumerate() {
            let expected = if [0, 4, 8].contains(&i) {
                1.0 / 3.0
            } else {
                0.0
            };
            assert!((z.re - expected).abs() < 1e-15 && z.im == 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_state(3, &mut rng);
        assert_eq!(devectorize(&vectorize(&rho)).unwrap(), rho);
    }

    #[test]
    fn invalid_states() {
        let mut m = CMatrix::identity(2);
        assert!(DensityMatrix::new(m.clone()).is_err());
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(matches!(
            DensityMatrix::new(m),
            Err(ChannelError::InvalidState(_))
        ));
    }

    #[test]
    fn kraus_rejects_non_trace_preserving() {
        let half = CMatrix::identity(3).scale(C64::new(0.5, 0.0));
        assert!(matches!(
            KrausSet::new(vec![half]),
            Err(ChannelError::NotTracePreserving(_))
        ));
    }

    #[test]
    fn superop_matches_kraus_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in [3, 4] {
            let k = random_cptp(d, 3, &mut rng).unwrap();
            let s = superop_from_kraus(&k);
            let rho = random_state(d, &mut rng);
            let lhs = s.apply(&vectorize(&rho));
            let rhs = k.apply(rho.matrix());
            let diff: f64 = lhs
                .iter()
                .zip(rhs.data())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
            assert!(s.trace_preservation_residual() < 1e-10);
        }
        assert_eq!(
            superop_from_kraus(&KrausSet::identity(3)).matrix(),
            &CMatrix::identity(9)
        );
        let u = t_gate(QuditDimension::qutrit()).to_matrix();
        let s = superop_from_kraus(&KrausSet::unitary(u.clone()).unwrap());
        assert!(s.matrix().frobenius_distance(&u.kron(&u.conj())) < 1e-15);
    }

    #[test]
    fn depolarizing_spectrum_and_fidelity() {
        let dim = QuditDimension::qutrit();
        for lambda in [0.0, 0.5, 0.9] {
            let s = superop_from_kraus(&KrausSet::depolarizing(dim, lambda).unwrap());
            assert!(
                s.matrix()
                    .frobenius_distance(SuperOperator::depolarizing(3, lambda).matrix())
                    < 1e-12
            );
            // Eigenvalue 1 on vec(I), lambda on its orthogonal complement.
            let id: Vec<C64> = (0..9)
                .map(|i| if i % 4 == 0 { ONE } else { ZERO })
                .collect();
            let img = s.apply(&id);
            assert!(img.iter().zip(&id).all(|(a, b)| (a - b).norm() < 1e-12));
            assert!((s.trace().re - (1.0 + 8.0 * lambda)).abs() < 1e-12);
            let f = average_gate_fidelity(&s);
            assert!((f - (1.0 + 2.0 * lambda) / 3.0).abs() < 1e-12);
            assert!((agf_from_chi00(chi00(&s), 3) - f).abs() < 1e-12);
        }
        assert!(KrausSet::depolarizing(dim, 1.5).is_err());
    }

    #[test]
    fn chi00_routes_agree() {
        assert!((chi00(&SuperOperator::identity(3)) - 1.0).abs() < 1e-15);
        let t = t_gate(QuditDimension::qutrit()).to_matrix();
        let k = KrausSet::unitary(t.clone()).unwrap();
        let expected = t.trace().norm_sqr() / 9.0;
        assert!((chi00_from_kraus(&k) - expected).abs() < 1e-12);
        assert!((chi00(&superop_from_kraus(&k)) - expected).abs() < 1e-12);
        assert!(expected < 1.0);
    }

    #[test]
    fn random_channels_are_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rank in [1, 2, 9] {
            let k = random_cptp(3, rank, &mut rng).unwrap();
            assert_eq!(k.ops().len(), rank);
        }
        let u = random_cptp(3, 1, &mut rng).unwrap();
        assert!(u.ops()[0].is_unitary(1e-12));
        assert!(random_cptp(3, 10, &mut rng).is_err());
        assert!(random_cptp(3, 0, &mut rng).is_err());
    }

    #[test]
    fn mixing_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = random_cptp(3, 9, &mut rng).unwrap();
        let f0 = average_gate_fidelity(&superop_from_kraus(&k));
        let m = mix_to_target_fidelity(&k, 0.95).unwrap();
        assert!((average_gate_fidelity(&superop_from_kraus(&m)) - 0.95).abs() < 1e-10);
        let one = mix_to_target_fidelity(&k, 1.0).unwrap();
        assert!(
            superop_from_kraus(&one)
                .matrix()
                .frobenius_distance(&CMatrix::identity(9))
                < 1e-12
        );
        assert_eq!(mix_to_target_fidelity(&k, f0).unwrap(), k);

        let hi = mix_to_target_fidelity(&KrausSet::identity(3), 0.6).unwrap();
        assert!((average_gate_fidelity(&superop_from_kraus(&hi)) - 0.6).abs() < 1e-12);
        assert!(matches!(
            mix_to_target_fidelity(&k, 1.2),
            Err(ChannelError::UnreachableFidelity { .. })
        ));
        assert!(mix_to_target_fidelity(&k, 0.1).is_err());
    }

    #[test]
    fn channel_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = random_cptp(4, 2, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noise.json");
        k.save(&path).unwrap();
        assert_eq!(KrausSet::load(&path).unwrap(), k);
        assert!(matches!(
            KrausSet::load(&dir.path().join("missing.json")),
            Err(ChannelError::Io { .. })
        ));
    }
}

//! Simulated interleaved benchmarking.
//!
//! A length-`m` sequence applies `g_1, ..., g_m` drawn uniformly from `C`,
//! each followed by `T^p`, then the inversion gate. Noise placement: `Λ_C`
//! acts after every element of `C` (including the inversion), `Λ_T` acts right
//! before `T^p`. Each step is therefore `S(T^p) Λ_T Λ_C S(g_i)`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::channels::{
    mix_to_target_fidelity, random_cptp, superop_from_kraus, vectorize, ChannelError,
    DensityMatrix, KrausSet, SuperOperator,
};
use crate::clifford::{build_group, CliffordLikeGroup, GroupError, MonomialElement};
use crate::matrix::{C64, ZERO};
use crate::qudit::QuditDimension;
use crate::twirl::apply_element;

const STREAM_NOISE: u64 = 1;
const STREAM_SEQUENCE: u64 = 2;
const STREAM_SHOTS: u64 = 3;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("survival probability {0} outside [0, 1]")]
    NumericalIntegrity(f64),
    #[error("unknown fiducial {0:?} (expected \"0\" or \"+\")")]
    UnknownFiducial(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    ConfigSyntax {
        path: String,
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv schema: {0}")]
    Schema(String),
}

/// Fiducial state label: `|0⟩` or `|+⟩ = H|0⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fiducial {
    Zero,
    Plus,
}

impl Fiducial {
    pub const ALL: [Fiducial; 2] = [Fiducial::Zero, Fiducial::Plus];

    pub fn label(self) -> &'static str {
        match self {
            Fiducial::Zero => "0",
            Fiducial::Plus => "+",
        }
    }
}

impl fmt::Display for Fiducial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Fiducial {
    type Err = ProtocolError;
    fn from_str(s: &str) -> Result<Self, ProtocolError> {
        match s.trim() {
            "0" => Ok(Fiducial::Zero),
            "+" => Ok(Fiducial::Plus),
            other => Err(ProtocolError::UnknownFiducial(other.to_string())),
        }
    }
}

impl Serialize for Fiducial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Fiducial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Amplitudes of the fiducial ket.
pub fn fiducial_ket(fiducial: Fiducial, d: usize) -> Vec<C64> {
    match fiducial {
        Fiducial::Zero => (0..d)
            .map(|i| if i == 0 { C64::new(1.0, 0.0) } else { ZERO })
            .collect(),
        // First column of the normalized discrete Fourier transform.
        Fiducial::Plus => vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d],
    }
}

pub fn fiducial_state(fiducial: Fiducial, d: usize) -> DensityMatrix {
    DensityMatrix::pure(&fiducial_ket(fiducial, d)).expect("fiducial kets are normalized")
}

/// Either exact expectation values or a finite number of binary shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shots {
    #[default]
    Exact,
    Count(u64),
}

impl Shots {
    /// CSV encoding: 0 means exact expectation.
    pub fn as_count(self) -> u64 {
        match self {
            Shots::Exact => 0,
            Shots::Count(n) => n,
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Count(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(0) => Err(serde::de::Error::custom(
                "shots must be positive or \"exact\"",
            )),
            Repr::Count(n) => Ok(Shots::Count(n)),
            Repr::Word(w) if w == "exact" => Ok(Shots::Exact),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "shots must be a count or \"exact\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Random CPTP channels mixed with the identity to hit the target fidelities.
    #[default]
    RandomCptp,
    Depolarizing,
    /// Kraus sets read from channel files.
    Fixture,
}

fn default_reference_fidelity() -> f64 {
    0.9996
}
fn default_t_fidelity() -> f64 {
    0.95
}
fn default_lengths() -> Vec<usize> {
    (1..=20).collect()
}
fn default_sequences() -> usize {
    30
}
fn default_fiducials() -> Vec<Fiducial> {
    Fiducial::ALL.to_vec()
}

/// Experiment description; parsed from a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: QuditDimension,
    #[serde(default = "default_reference_fidelity")]
    pub reference_fidelity: f64,
    #[serde(default = "default_t_fidelity")]
    pub t_fidelity: f64,
    #[serde(default)]
    pub noise: NoiseMode,
    /// Kraus rank of random channels; defaults to `d²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_noise_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_noise_file: Option<PathBuf>,
    #[serde(default = "default_lengths")]
    pub lengths: Vec<usize>,
    #[serde(default = "default_sequences")]
    pub sequences_per_length: usize,
    #[serde(default)]
    pub shots: Shots,
    pub seed: u64,
    #[serde(default = "default_fiducials")]
    pub fiducials: Vec<Fiducial>,
}

impl ExperimentConfig {
    pub fn new(dimension: QuditDimension, seed: u64) -> Self {
        Self {
            dimension,
            reference_fidelity: default_reference_fidelity(),
            t_fidelity: default_t_fidelity(),
            noise: NoiseMode::default(),
            kraus_rank: None,
            reference_noise_file: None,
            t_noise_file: None,
            lengths: default_lengths(),
            sequences_per_length: default_sequences(),
            shots: Shots::Exact,
            seed,
            fiducials: default_fiducials(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads and validates a config file; relative fixture paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ProtocolError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProtocolError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_json(&text).map_err(|source| ProtocolError::ConfigSyntax {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.reference_noise_file, &mut cfg.t_noise_file]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::Config(msg));
        for (name, f) in [
            ("reference_fidelity", self.reference_fidelity),
            ("t_fidelity", self.t_fidelity),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("{name}: {f} is outside (0, 1]"));
            }
        }
        if self.lengths.is_empty() {
            return bad("lengths: at least one sequence length is required".into());
        }
        if let Some(m) = self.lengths.iter().find(|&&m| m == 0) {
            return bad(format!("lengths: {m} is not a positive length"));
        }
        if self.lengths.windows(2).any(|w| w[0] >= w[1]) {
            return bad("lengths: must be strictly increasing".into());
        }
        if self.sequences_per_length == 0 {
            return bad("sequences_per_length: must be positive".into());
        }
        if self.fiducials.is_empty() {
            return bad("fiducials: at least one of \"0\", \"+\" is required".into());
        }
        let d = self.dimension.d();
        if let Some(r) = self.kraus_rank {
            if r == 0 || r > d * d {
                return bad(format!("kraus_rank: {r} outside [1, {}]", d * d));
            }
        }
        if self.noise == NoiseMode::Fixture
            && (self.reference_noise_file.is_none() || self.t_noise_file.is_none())
        {
            return bad("noise \"fixture\" requires reference_noise_file and t_noise_file".into());
        }
        Ok(())
    }
}

/// Noise of the T gate and of every element of `C`.
#[derive(Debug, Clone)]
pub struct NoiseAssignment {
    pub t_kraus: KrausSet,
    pub reference_kraus: KrausSet,
    pub lambda_t: SuperOperator,
    pub lambda_c: SuperOperator,
}

impl NoiseAssignment {
    pub fn new(t_kraus: KrausSet, reference_kraus: KrausSet) -> Result<Self, ProtocolError> {
        if t_kraus.dim() != reference_kraus.dim() {
            return Err(ProtocolError::Config(format!(
                "noise channels act on different dimensions ({} and {})",
                t_kraus.dim(),
                reference_kraus.dim()
            )));
        }
        Ok(Self {
            lambda_t: superop_from_kraus(&t_kraus),
            lambda_c: superop_from_kraus(&reference_kraus),
            t_kraus,
            reference_kraus,
        })
    }

    pub fn noiseless(d: usize) -> Self {
        Self::new(KrausSet::identity(d), KrausSet::identity(d)).expect("same dimension")
    }
}

/// Independent, reproducible RNG stream for `(seed, kind, a, b)`.
pub fn stream_rng(seed: u64, kind: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 56) | ((a & 0xff_ffff) << 32) | (b & 0xffff_ffff));
    rng
}

/// Draws the noise channels described by the config.
pub fn generate_noise(cfg: &ExperimentConfig) -> Result<NoiseAssignment, ProtocolError> {
    let dim = cfg.dimension;
    let d = dim.d();
    match cfg.noise {
        NoiseMode::RandomCptp => {
            let rank = cfg.kraus_rank.unwrap_or(d * d);
            let mut rng = stream_rng(cfg.seed, STREAM_NOISE, 0, 0);
            let reference =
                mix_to_target_fidelity(&random_cptp(d, rank, &mut rng)?, cfg.reference_fidelity)?;
            let t = mix_to_target_fidelity(&random_cptp(d, rank, &mut rng)?, cfg.t_fidelity)?;
            NoiseAssignment::new(t, reference)
        }
        NoiseMode::Depolarizing => {
            let lambda = |f: f64| (d as f64 * f - 1.0) / (d as f64 - 1.0);
            NoiseAssignment::new(
                KrausSet::depolarizing(dim, lambda(cfg.t_fidelity))?,
                KrausSet::depolarizing(dim, lambda(cfg.reference_fidelity))?,
            )
        }
        NoiseMode::Fixture => {
            let load = |p: &Option<PathBuf>| -> Result<KrausSet, ProtocolError> {
                let p = p
                    .as_ref()
                    .ok_or_else(|| ProtocolError::Config("missing noise file".into()))?;
                Ok(KrausSet::load(p)?)
            };
            let noise =
                NoiseAssignment::new(load(&cfg.t_noise_file)?, load(&cfg.reference_noise_file)?)?;
            if noise.t_kraus.dim() != d {
                return Err(ProtocolError::Config(format!(
                    "noise files act on dimension {}, config says {d}",
                    noise.t_kraus.dim()
                )));
            }
            Ok(noise)
        }
    }
}

/// One sampled sequence: the elements in application order, `T^p` and the
/// inversion gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRecord {
    pub m: usize,
    pub elements: Vec<MonomialElement>,
    pub t_power: MonomialElement,
    pub inversion: MonomialElement,
}

impl SequenceRecord {
    /// Builds the record for given elements; the inversion undoes
    /// `T^p g_m ⋯ T^p g_1`.
    pub fn from_elements(
        group: &CliffordLikeGroup,
        elements: Vec<MonomialElement>,
    ) -> Result<Self, ProtocolError> {
        let t_power = group.t_power_element();
        let mut ideal = group.identity();
        for g in &elements {
            ideal = group.compose(&t_power, &group.compose(g, &ideal)?)?;
        }
        let inversion = group.inverse(&ideal)?;
        Ok(Self {
            m: elements.len(),
            elements,
            t_power,
            inversion,
        })
    }
}

pub fn build_sequence<R: Rng + ?Sized>(
    group: &CliffordLikeGroup,
    m: usize,
    rng: &mut R,
) -> Result<SequenceRecord, ProtocolError> {
    let elements = (0..m).map(|_| group.sample_uniform(rng)).collect();
    SequenceRecord::from_elements(group, elements)
}

/// Exact survival probability `⟨⟨E_ϖ| Λ_C S(inv) Π_i [S(T^p) Λ_T Λ_C S(g_i)] |ρ_ϖ⟩⟩`.
pub fn exact_survival(
    rec: &SequenceRecord,
    noise: &NoiseAssignment,
    fiducial: Fiducial,
) -> Result<f64, ProtocolError> {
    let d = rec.t_power.perm().len();
    let rho = vectorize(&fiducial_state(fiducial, d));
    let mut v = rho.clone();
    for g in &rec.elements {
        v = apply_element(g, &v);
        v = noise.lambda_c.apply(&v);
        v = noise.lambda_t.apply(&v);
        v = apply_element(&rec.t_power, &v);
    }
    v = apply_element(&rec.inversion, &v);
    v = noise.lambda_c.apply(&v);
    // The measurement projector equals the fiducial state.
    let p: f64 = rho
        .iter()
        .zip(&v)
        .map(|(e, x)| e.conj() * x)
        .sum::<C64>()
        .re;
    if !(-1e-9..=1.0 + 1e-9).contains(&p) {
        return Err(ProtocolError::NumericalIntegrity(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Survival estimate: the exact probability, or the mean of `shots` Bernoulli draws.
pub fn simulate_sequence<R: Rng + ?Sized>(
    rec: &SequenceRecord,
    noise: &NoiseAssignment,
    fiducial: Fiducial,
    shots: Shots,
    rng: &mut R,
) -> Result<f64, ProtocolError> {
    let p = exact_survival(rec, noise, fiducial)?;
    match shots {
        Shots::Exact => Ok(p),
        Shots::Count(n) => {
            let hits = Binomial::new(n, p)
                .map_err(|_| ProtocolError::NumericalIntegrity(p))?
                .sample(rng);
            Ok(hits as f64 / n as f64)
        }
    }
}

/// One CSV row: a single sequence's survival for one fiducial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub dimension: usize,
    pub fiducial: Fiducial,
    pub m: usize,
    pub sequence_index: usize,
    pub survival: f64,
    /// 0 for exact expectation values.
    pub shots: u64,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 7] = [
    "dimension",
    "fiducial",
    "m",
    "sequence_index",
    "survival",
    "shots",
    "seed",
];

pub fn write_csv<W: Write>(rows: &[SurvivalRow], w: W) -> Result<(), ProtocolError> {
    let mut writer = csv::Writer::from_writer(w);
    for r in rows {
        writer.serialize(r)?;
    }
    if rows.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    writer.flush().map_err(|source| ProtocolError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<SurvivalRow>, ProtocolError> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(ProtocolError::Schema(format!(
            "header {:?} does not match {:?}",
            header.iter().collect::<Vec<_>>(),
            CSV_HEADER
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(ProtocolError::from))
        .collect()
}

/// Everything produced by one simulated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<SurvivalRow>,
    pub noise: NoiseAssignment,
    pub group_order: u128,
    pub interleaving_power: u64,
}

impl ExperimentOutput {
    /// Mean survival per `(fiducial, m)`.
    pub fn means(&self) -> BTreeMap<(Fiducial, usize), f64> {
        let mut acc: BTreeMap<(Fiducial, usize), (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            let e = acc.entry((r.fiducial, r.m)).or_default();
            e.0 += r.survival;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, ProtocolError> {
    cfg.validate()?;
    let group = build_group(cfg.dimension)?;
    let noise = generate_noise(cfg)?;
    run_experiment_with(cfg, &group, noise)
}

/// Runs the sequences of `cfg` against a prebuilt group and explicit noise.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    group: &CliffordLikeGroup,
    noise: NoiseAssignment,
) -> Result<ExperimentOutput, ProtocolError> {
    cfg.validate()?;
    let mut rows =
        Vec::with_capacity(cfg.lengths.len() * cfg.sequences_per_length * cfg.fiducials.len());
    for &m in &cfg.lengths {
        for idx in 0..cfg.sequences_per_length {
            let mut rng = stream_rng(cfg.seed, STREAM_SEQUENCE, m as u64, idx as u64);
            let rec = build_sequence(group, m, &mut rng)?;
            for &fid in &cfg.fiducials {
                let tag = (idx as u64) << 1 | u64::from(fid == Fiducial::Plus);
                let mut shot_rng = stream_rng(cfg.seed, STREAM_SHOTS, m as u64, tag);
                let survival = simulate_sequence(&rec, &noise, fid, cfg.shots, &mut shot_rng)?;
                rows.push(SurvivalRow {
                    dimension: cfg.dimension.d(),
                    fiducial: fid,
                    m,
                    sequence_index: idx,
                    survival,
                    shots: cfg.shots.as_count(),
                    seed: cfg.seed,
                });
            }
        }
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        rows,
        noise,
        group_order: group.order(),
        interleaving_power: group.interleaving_power(),
    })
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or schema error, 2 usage error, 3 numerical or
//! structural integrity failure.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{fidelity_report, AnalysisError, Division, Weighting};
use crate::channels::{
    average_gate_fidelity, mix_to_target_fidelity, random_cptp, superop_from_kraus, ChannelError,
    KrausSet,
};
use crate::clifford::{build_group, GroupError, DEFAULT_ENUMERATION_CAP};
use crate::protocol::{read_csv, run_experiment, write_csv, ExperimentConfig, ProtocolError};
use crate::qudit::QuditDimension;
use crate::twirl::{
    agf_from_etas, block_spectrum_with_tol, exact_twirl, TwirlError, TwirlSpectrum,
    DEFAULT_STRUCTURE_TOL,
};

pub const OUTPUT_DIR_ENV: &str = "QUDIT_IB_OUTPUT_DIR";

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "qudit-ib",
    version,
    about = "Qudit non-Clifford interleaved benchmarking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DimArg {
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
}

impl From<DimArg> for QuditDimension {
    fn from(d: DimArg) -> Self {
        match d {
            DimArg::Three => QuditDimension::qutrit(),
            DimArg::Four => QuditDimension::ququart(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DivisionArg {
    Chi,
    Direct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Equal,
    InverseVariance,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the Clifford-like group and print its build report.
    BuildGroup {
        #[arg(long)]
        dim: DimArg,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Twirl a noise channel over the group and print its decay parameters.
    Twirl {
        #[arg(long)]
        dim: DimArg,
        /// depolarizing:<λ> | random:<seed>:<F> | file:<path> | identity
        #[arg(long)]
        noise: NoiseSpec,
        #[arg(long, default_value_t = DEFAULT_STRUCTURE_TOL)]
        tol: f64,
    },
    /// Simulate an interleaved benchmarking experiment from a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Fit decay data and estimate the T-gate fidelity.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        reference_fidelity: f64,
        /// True T-gate fidelity, for the relative error.
        #[arg(long)]
        truth: Option<f64>,
        #[arg(long, value_enum, default_value = "chi")]
        division: DivisionArg,
        #[arg(long, value_enum, default_value = "equal")]
        weighting: WeightingArg,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    Identity,
    Depolarizing(f64),
    Random { seed: u64, fidelity: f64 },
    File(PathBuf),
}

impl FromStr for NoiseSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parse_f = |x: &str| x.parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        match s.split_once(':') {
            None if s == "identity" => Ok(NoiseSpec::Identity),
            Some(("depolarizing", l)) => Ok(NoiseSpec::Depolarizing(parse_f(l)?)),
            Some(("random", rest)) => {
                let (seed, f) = rest
                    .split_once(':')
                    .ok_or("expected random:<seed>:<fidelity>")?;
                let seed = seed.parse().map_err(|e| format!("{seed:?}: {e}"))?;
                Ok(NoiseSpec::Random {
                    seed,
                    fidelity: parse_f(f)?,
                })
            }
            Some(("file", p)) if !p.is_empty() => Ok(NoiseSpec::File(PathBuf::from(p))),
            _ => Err(format!("unrecognized noise spec {s:?}")),
        }
    }
}

impl NoiseSpec {
    pub fn kraus(&self, dim: QuditDimension) -> Result<KrausSet, ChannelError> {
        let d = dim.d();
        let k = match self {
            NoiseSpec::Identity => KrausSet::identity(d),
            NoiseSpec::Depolarizing(l) => KrausSet::depolarizing(dim, *l)?,
            NoiseSpec::Random { seed, fidelity } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                mix_to_target_fidelity(&random_cptp(d, d * d, &mut rng)?, *fidelity)?
            }
            NoiseSpec::File(p) => KrausSet::load(p)?,
        };
        if k.dim() != d {
            return Err(ChannelError::Shape(format!(
                "noise acts on dimension {}, expected {d}",
                k.dim()
            )));
        }
        Ok(k)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::Io { .. } | ChannelError::Format { .. } | ChannelError::Shape(_) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<GroupError> for CliError {
    fn from(e: GroupError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<TwirlError> for CliError {
    fn from(e: TwirlError) -> Self {
        match e {
            TwirlError::DimensionMismatch { .. } => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Group(g) => g.into(),
            ProtocolError::Channel(c) => c.into(),
            ProtocolError::NumericalIntegrity(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Division { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    print!("{text}");
    if let Some(p) = out {
        std::fs::write(p, text).map_err(|e| CliError::io(p, e))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TwirlReport {
    pub dimension: usize,
    pub noise: String,
    pub noise_fidelity: f64,
    pub eta0: f64,
    pub eta_plus: f64,
    pub block_residuals: [f64; 3],
    pub offblock_residual: f64,
    pub agf: f64,
}

impl TwirlReport {
    fn new(dim: QuditDimension, noise: String, noise_fidelity: f64, s: &TwirlSpectrum) -> Self {
        Self {
            dimension: dim.d(),
            noise,
            noise_fidelity,
            eta0: s.eta0,
            eta_plus: s.eta_plus,
            block_residuals: s.block_residuals,
            offblock_residual: s.offblock_residual,
            agf: agf_from_etas(s.eta0, s.eta_plus, dim.d()),
        }
    }
}

/// Provenance of a simulate run; enough to replay it with the same binary.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub data: PathBuf,
    pub reference_noise: PathBuf,
    pub t_noise: PathBuf,
    pub group_order: u128,
    pub interleaving_power: u64,
    pub reference_fidelity: f64,
    pub t_fidelity: f64,
    pub composite_fidelity: f64,
}

pub const DATA_FILE: &str = "decay.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REFERENCE_NOISE_FILE: &str = "noise_reference.json";
pub const T_NOISE_FILE: &str = "noise_t.json";

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildGroup { dim, out } => {
            let group = build_group(dim.into())?;
            emit(&to_json(&group.report()?), out.as_deref())
        }
        Command::Twirl { dim, noise, tol } => {
            let dim: QuditDimension = dim.into();
            let group = build_group(dim)?;
            let s = superop_from_kraus(&noise.kraus(dim)?);
            let t = exact_twirl(&s, &group, DEFAULT_ENUMERATION_CAP)?;
            let spectrum = block_spectrum_with_tol(&t, tol)?;
            let label = match &noise {
                NoiseSpec::Identity => "identity".to_string(),
                NoiseSpec::Depolarizing(l) => format!("depolarizing:{l}"),
                NoiseSpec::Random { seed, fidelity } => format!("random:{seed}:{fidelity}"),
                NoiseSpec::File(p) => format!("file:{}", p.display()),
            };
            emit(
                &to_json(&TwirlReport::new(
                    dim,
                    label,
                    average_gate_fidelity(&s),
                    &spectrum,
                )),
                None,
            )
        }
        Command::Simulate { config, out_dir } => {
            let started = unix_now();
            let cfg = ExperimentConfig::load(&config)?;
            let output = run_experiment(&cfg)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
            let data = out_dir.join(DATA_FILE);
            let file = File::create(&data).map_err(|e| CliError::io(&data, e))?;
            write_csv(&output.rows, BufWriter::new(file))?;
            let reference_noise = out_dir.join(REFERENCE_NOISE_FILE);
            let t_noise = out_dir.join(T_NOISE_FILE);
            output.noise.reference_kraus.save(&reference_noise)?;
            output.noise.t_kraus.save(&t_noise)?;
            let noise = &output.noise;
            let manifest = RunManifest {
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: cfg.seed,
                config: cfg,
                started_unix: started,
                finished_unix: unix_now(),
                data: data.clone(),
                reference_noise,
                t_noise,
                group_order: output.group_order,
                interleaving_power: output.interleaving_power,
                reference_fidelity: average_gate_fidelity(&noise.lambda_c),
                t_fidelity: average_gate_fidelity(&noise.lambda_t),
                composite_fidelity: average_gate_fidelity(&noise.lambda_t.compose(&noise.lambda_c)),
            };
            let manifest_path = out_dir.join(MANIFEST_FILE);
            std::fs::write(&manifest_path, to_json(&manifest))
                .map_err(|e| CliError::io(&manifest_path, e))?;
            println!("wrote {} rows to {}", output.rows.len(), data.display());
            println!("manifest: {}", manifest_path.display());
            Ok(())
        }
        Command::Fit {
            data,
            reference_fidelity,
            truth,
            division,
            weighting,
            out,
        } => {
            let file = File::open(&data).map_err(|e| CliError::io(&data, e))?;
            let rows = read_csv(BufReader::new(file)).map_err(|e| CliError::io(&data, e))?;
            let division = match division {
                DivisionArg::Chi => Division::Chi,
                DivisionArg::Direct => Division::Direct,
            };
            let weighting = match weighting {
                WeightingArg::Equal => Weighting::Equal,
                WeightingArg::InverseVariance => Weighting::InverseVariance,
            };
            let report = fidelity_report(&rows, reference_fidelity, division, truth, weighting)?;
            emit(&to_json(&report), out.as_deref())
        }
    }
}

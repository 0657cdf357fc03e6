//! Python bindings for `qudit_ib`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qudit_ib::analysis::{self, DecayRecord, Division, Weighting};
use qudit_ib::channels::{self, KrausSet};
use qudit_ib::clifford::{self, CliffordLikeGroup, DEFAULT_ENUMERATION_CAP};
use qudit_ib::matrix::{CMatrix, C64};
use qudit_ib::protocol::{self, ExperimentConfig, Fiducial};
use qudit_ib::qudit::QuditDimension;
use qudit_ib::twirl;

type PyKraus = Vec<Vec<Vec<C64>>>;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn dimension(d: usize) -> PyResult<QuditDimension> {
    QuditDimension::new(d).map_err(value_err)
}

fn kraus_from_py(ops: PyKraus) -> PyResult<KrausSet> {
    let mats = ops
        .into_iter()
        .map(|rows| {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(PyValueError::new_err("Kraus operators must be square"));
            }
            Ok(CMatrix::from_vec(
                n,
                n,
                rows.into_iter().flatten().collect(),
            ))
        })
        .collect::<PyResult<Vec<_>>>()?;
    KrausSet::new(mats).map_err(value_err)
}

fn kraus_to_py(k: &KrausSet) -> PyKraus {
    k.ops()
        .iter()
        .map(|a| {
            (0..a.rows())
                .map(|i| (0..a.cols()).map(|j| a[(i, j)]).collect())
                .collect()
        })
        .collect()
}

fn fiducial(label: &str) -> PyResult<Fiducial> {
    label.parse().map_err(value_err)
}

/// Clifford-like reference group for `d = 3` or `d = 4`.
#[pyclass(name = "CliffordGroup", frozen)]
struct PyCliffordGroup {
    inner: CliffordLikeGroup,
}

#[pymethods]
impl PyCliffordGroup {
    #[new]
    fn new(d: usize) -> PyResult<Self> {
        let inner = clifford::build_group(dimension(d)?).map_err(runtime_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension().d()
    }

    #[getter]
    fn order(&self) -> u128 {
        self.inner.order()
    }

    #[getter]
    fn interleaving_power(&self) -> u64 {
        self.inner.interleaving_power()
    }

    #[getter]
    fn lattice_order(&self) -> u128 {
        self.inner.lattice().order()
    }

    #[getter]
    fn lattice_basis(&self) -> Vec<Vec<u64>> {
        self.inner
            .lattice()
            .generators()
            .iter()
            .map(|g| g.exponents().to_vec())
            .collect()
    }

    fn contains_t(&self) -> bool {
        self.inner.contains_t()
    }

    /// Whether a diagonal exponent vector lies in the group's lattice.
    fn lattice_contains(&self, exponents: Vec<i64>) -> bool {
        let dim = self.inner.dimension();
        let v = qudit_ib::qudit::PhaseExponentVector::from_signed(&exponents, dim.root_order());
        exponents.len() == dim.d() && self.inner.lattice().contains(&v)
    }

    /// Uniform element as `(permutation images, diagonal exponents)`.
    fn sample(&self, seed: u64) -> (Vec<usize>, Vec<u64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.inner.sample_uniform(&mut rng);
        (g.perm().images().to_vec(), g.diag().exponents().to_vec())
    }

    /// Build report as a JSON string.
    fn report(&self) -> PyResult<String> {
        let report = self.inner.report().map_err(runtime_err)?;
        serde_json::to_string_pretty(&report).map_err(runtime_err)
    }

    /// Decay parameters of the exact twirl of a Kraus channel.
    fn twirl_spectrum<'py>(&self, py: Python<'py>, kraus: PyKraus) -> PyResult<Bound<'py, PyDict>> {
        let k = kraus_from_py(kraus)?;
        let s = channels::superop_from_kraus(&k);
        let t = twirl::exact_twirl(&s, &self.inner, DEFAULT_ENUMERATION_CAP).map_err(value_err)?;
        let spec = twirl::block_spectrum(&t).map_err(runtime_err)?;
        let d = self.inner.dimension().d();
        let out = PyDict::new(py);
        out.set_item("eta0", spec.eta0)?;
        out.set_item("eta_plus", spec.eta_plus)?;
        out.set_item("max_residual", spec.max_residual())?;
        out.set_item("agf", twirl::agf_from_etas(spec.eta0, spec.eta_plus, d))?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "CliffordGroup(d={}, order={})",
            self.dimension(),
            self.order()
        )
    }
}

/// Random channel of the given Kraus rank mixed to an average gate fidelity.
#[pyfunction]
#[pyo3(signature = (d, seed, fidelity, rank=None))]
fn random_channel(d: usize, seed: u64, fidelity: f64, rank: Option<usize>) -> PyResult<PyKraus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = channels::random_cptp(d, rank.unwrap_or(d * d), &mut rng).map_err(value_err)?;
    Ok(kraus_to_py(
        &channels::mix_to_target_fidelity(&k, fidelity).map_err(value_err)?,
    ))
}

#[pyfunction]
fn depolarizing_channel(d: usize, lam: f64) -> PyResult<PyKraus> {
    Ok(kraus_to_py(
        &KrausSet::depolarizing(dimension(d)?, lam).map_err(value_err)?,
    ))
}

#[pyfunction]
fn average_gate_fidelity(kraus: PyKraus) -> PyResult<f64> {
    Ok(channels::average_gate_fidelity(
        &channels::superop_from_kraus(&kraus_from_py(kraus)?),
    ))
}

#[pyfunction]
fn chi00(kraus: PyKraus) -> PyResult<f64> {
    Ok(channels::chi00_from_kraus(&kraus_from_py(kraus)?))
}

#[pyfunction]
fn agf_from_etas(eta0: f64, eta_plus: f64, d: usize) -> f64 {
    twirl::agf_from_etas(eta0, eta_plus, d)
}

/// Runs an experiment from a JSON config; returns the CSV rows as tuples
/// `(dimension, fiducial, m, sequence_index, survival, shots, seed)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn run_experiment(
    py: Python<'_>,
    config_json: &str,
) -> PyResult<Vec<(usize, String, usize, usize, f64, u64, u64)>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(value_err)?;
    let out = py
        .detach(|| protocol::run_experiment(&cfg))
        .map_err(runtime_err)?;
    Ok(out
        .rows
        .into_iter()
        .map(|r| {
            (
                r.dimension,
                r.fiducial.to_string(),
                r.m,
                r.sequence_index,
                r.survival,
                r.shots,
                r.seed,
            )
        })
        .collect())
}

/// Fits `a + b·η^m` to mean survivals; returns `a`, `b`, `eta` and diagnostics.
#[pyfunction]
#[pyo3(signature = (lengths, survivals, fiducial="0"))]
fn fit_decay<'py>(
    py: Python<'py>,
    lengths: Vec<usize>,
    survivals: Vec<f64>,
    fiducial: &str,
) -> PyResult<Bound<'py, PyDict>> {
    if lengths.len() != survivals.len() {
        return Err(PyValueError::new_err(
            "lengths and survivals differ in length",
        ));
    }
    let data: Vec<(usize, f64)> = lengths.into_iter().zip(survivals).collect();
    let rec = DecayRecord::from_means(self::fiducial(fiducial)?, &data).map_err(value_err)?;
    let fit = analysis::fit_decay(&rec).map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item("a", fit.a)?;
    out.set_item("b", fit.b)?;
    out.set_item("eta", fit.eta)?;
    out.set_item("eta_stderr", fit.eta_stderr)?;
    out.set_item("residual_norm", fit.residual_norm)?;
    out.set_item("degenerate", fit.degenerate)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (f_composite, f_reference, d, division="chi"))]
fn t_gate_fidelity(f_composite: f64, f_reference: f64, d: usize, division: &str) -> PyResult<f64> {
    match division {
        "chi" => analysis::t_gate_fidelity(f_composite, f_reference, d).map_err(value_err),
        "direct" => analysis::t_gate_fidelity_direct(f_composite, f_reference).map_err(value_err),
        other => Err(PyValueError::new_err(format!("unknown division {other:?}"))),
    }
}

/// Fits both fiducials of a decay CSV file; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (csv_path, reference_fidelity, truth=None, division="chi"))]
fn fidelity_report(
    csv_path: &str,
    reference_fidelity: f64,
    truth: Option<f64>,
    division: &str,
) -> PyResult<String> {
    let division = match division {
        "chi" => Division::Chi,
        "direct" => Division::Direct,
        other => return Err(PyValueError::new_err(format!("unknown division {other:?}"))),
    };
    let file = std::fs::File::open(csv_path).map_err(|e| value_err(format!("{csv_path}: {e}")))?;
    let rows = protocol::read_csv(std::io::BufReader::new(file)).map_err(value_err)?;
    let report =
        analysis::fidelity_report(&rows, reference_fidelity, division, truth, Weighting::Equal)
            .map_err(value_err)?;
    serde_json::to_string_pretty(&report).map_err(runtime_err)
}

#[pymodule]
#[pyo3(name = "qudit_ib")]
fn qudit_ib_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCliffordGroup>()?;
    m.add_function(wrap_pyfunction!(random_channel, m)?)?;
    m.add_function(wrap_pyfunction!(depolarizing_channel, m)?)?;
    m.add_function(wrap_pyfunction!(average_gate_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(chi00, m)?)?;
    m.add_function(wrap_pyfunction!(agf_from_etas, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(fit_decay, m)?)?;
    m.add_function(wrap_pyfunction!(t_gate_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_report, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

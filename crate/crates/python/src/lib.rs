//! Python bindings for deobtime.
//!
//! ```python
//! import deobtime_py as d
//! c = d.Circuit.from_bench(open("c17.bench").read())
//! inst = d.obfuscate(c, 2, "xor", seed=1)
//! r = d.attack(inst)
//! assert r.status == "SOLVED" and r.verified
//! ```

use std::path::Path;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use deobtime::attack::{sat_attack, AttackConfig, AttackResult, LabelKind};
use deobtime::cnf::{to_dimacs, tseitin};
use deobtime::experiments::{evaluate, Dataset};
use deobtime::icnet::{train, Model, ModelConfig, Sample};
use deobtime::netlist::{emit_bench, parse_bench, Circuit};
use deobtime::obfuscate::{random_obfuscate, ObfuscationInstance, ObfuscationKind};

create_exception!(deobtime_py, DeobtimeError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    DeobtimeError::new_err(e.to_string())
}

fn label_kind(s: &str) -> PyResult<LabelKind> {
    s.parse().map_err(err)
}

/// A combinational netlist.
#[pyclass(name = "Circuit", frozen)]
struct PyCircuit(Arc<Circuit>);

#[pymethods]
impl PyCircuit {
    #[staticmethod]
    fn from_bench(text: &str) -> PyResult<Self> {
        parse_bench(text).map(|c| PyCircuit(Arc::new(c))).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Self::from_bench(&text)
    }

    fn to_bench(&self) -> String {
        emit_bench(&self.0)
    }

    #[getter]
    fn num_inputs(&self) -> usize {
        self.0.primary_inputs().len()
    }

    #[getter]
    fn num_keys(&self) -> usize {
        self.0.key_len()
    }

    #[getter]
    fn num_outputs(&self) -> usize {
        self.0.primary_outputs().len()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Counts per gate type, keyed by bench keyword.
    fn type_histogram(&self) -> Vec<(String, usize)> {
        let counts = self.0.type_histogram();
        deobtime::netlist::GateType::ALL
            .iter()
            .map(|t| (t.keyword().to_string(), counts[t.index()]))
            .collect()
    }

    #[pyo3(signature = (inputs, key = Vec::new()))]
    fn simulate(&self, inputs: Vec<bool>, key: Vec<bool>) -> PyResult<Vec<bool>> {
        self.0.simulate(&inputs, &key).map_err(err)
    }

    /// DIMACS text of the Tseitin encoding.
    fn to_dimacs(&self) -> PyResult<String> {
        tseitin(&self.0).map(|(f, _)| to_dimacs(&f)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(inputs={}, keys={}, outputs={}, nodes={})",
            self.num_inputs(),
            self.num_keys(),
            self.num_outputs(),
            self.0.len()
        )
    }
}

/// A locked circuit together with its correct key.
#[pyclass(name = "Instance", frozen)]
struct PyInstance(ObfuscationInstance);

#[pymethods]
impl PyInstance {
    #[getter]
    fn locked(&self) -> PyCircuit {
        PyCircuit(Arc::new(self.0.obfuscated.clone()))
    }

    #[getter]
    fn key(&self) -> Vec<bool> {
        self.0.key_truth.clone()
    }

    #[getter]
    fn mask(&self) -> Vec<bool> {
        self.0.mask.clone()
    }

    #[getter]
    fn kind(&self) -> String {
        self.0.kind.to_string()
    }

    #[getter]
    fn n_locations(&self) -> usize {
        self.0.n_locations()
    }

    fn to_json(&self, base_file: &str) -> PyResult<String> {
        serde_json::to_string(&self.0.to_record(base_file)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(kind={}, locations={}, key_bits={})",
            self.0.kind,
            self.0.n_locations(),
            self.0.key_truth.len()
        )
    }
}

/// Outcome of an oracle-guided attack.
#[pyclass(name = "AttackResult", frozen, get_all)]
struct PyAttackResult {
    status: String,
    verified: Option<bool>,
    key: Vec<bool>,
    iterations: usize,
    wall_seconds: f64,
    conflicts: u64,
    decisions: u64,
    propagations: u64,
}

impl From<AttackResult> for PyAttackResult {
    fn from(r: AttackResult) -> Self {
        let status = serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        PyAttackResult {
            status,
            verified: r.verified,
            key: r.recovered_key,
            iterations: r.iterations,
            wall_seconds: r.wall_seconds,
            conflicts: r.total_stats.conflicts,
            decisions: r.total_stats.decisions,
            propagations: r.total_stats.propagations,
        }
    }
}

#[pymethods]
impl PyAttackResult {
    fn __repr__(&self) -> String {
        format!(
            "AttackResult(status={}, iterations={}, conflicts={})",
            self.status, self.iterations, self.conflicts
        )
    }
}

/// Lock `n` randomly chosen gates. `kind` is `xor`, `xnor` or `lutK`.
#[pyfunction]
#[pyo3(signature = (circuit, n, kind = "xor", seed = 0))]
fn obfuscate(circuit: &PyCircuit, n: usize, kind: &str, seed: u64) -> PyResult<PyInstance> {
    let kind: ObfuscationKind = kind.parse().map_err(err)?;
    random_obfuscate(circuit.0.clone(), n, kind, seed)
        .map(PyInstance)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (instance, timeout = None))]
fn attack(py: Python<'_>, instance: &PyInstance, timeout: Option<f64>) -> PyResult<PyAttackResult> {
    let cfg = AttackConfig {
        timeout_seconds: timeout,
        ..AttackConfig::default()
    };
    py.detach(|| sat_attack(&instance.0, &cfg))
        .map(Into::into)
        .map_err(err)
}

/// A runtime predictor.
#[pyclass(name = "Model", frozen)]
struct PyModel(Model);

#[pymethods]
impl PyModel {
    /// Untrained model; `config` is a JSON object of overrides.
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(config: Option<&str>) -> PyResult<Self> {
        let cfg: ModelConfig = match config {
            Some(text) => serde_json::from_str(text).map_err(err)?,
            None => ModelConfig::default(),
        };
        Model::new(cfg).map(PyModel).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(err)?;
        Model::from_checkpoint_json(&text).map(PyModel).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, self.0.to_checkpoint_json()).map_err(err)
    }

    #[getter]
    fn config(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.config).map_err(err)
    }

    /// `(y_hat, seconds)`: the raw-scale prediction and inference time.
    fn predict(&self, instance: &PyInstance) -> PyResult<(f64, f64)> {
        self.0.predict(&instance.0).map(|(p, t)| (p.y_hat, t)).map_err(err)
    }

    /// Attention weights `(over features, over gates)` for one instance.
    fn attention(&self, instance: &PyInstance) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.0
            .predict(&instance.0)
            .map(|(p, _)| (p.a_feat, p.a_gate))
            .map_err(err)
    }
}

/// Train on a dataset directory written by `deobtime gen-data`.
///
/// Returns the model and its test-partition mse on the log scale.
#[pyfunction]
#[pyo3(signature = (data, label = "log1p_seconds", config = None))]
fn train_dataset(py: Python<'_>, data: &str, label: &str, config: Option<&str>) -> PyResult<(PyModel, f64)> {
    let label = label_kind(label)?;
    let cfg: ModelConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(err)?,
        None => ModelConfig::default(),
    };
    py.detach(|| {
        let ds = Dataset::load(Path::new(data)).map_err(err)?;
        let samples = ds.samples(&cfg, label).map_err(err)?;
        let out = train(&samples, &cfg).map_err(err)?;
        let test: Vec<&Sample> = out.test_idx.iter().map(|&i| &samples[i]).collect();
        let report = evaluate(&out.model, &test, label).map_err(err)?;
        Ok((PyModel(out.model), report.mse_log))
    })
}

#[pymodule]
fn deobtime_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DeobtimeError", m.py().get_type::<DeobtimeError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyAttackResult>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(obfuscate, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add_function(wrap_pyfunction!(train_dataset, m)?)?;
    Ok(())
}

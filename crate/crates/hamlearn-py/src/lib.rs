//! Python bindings for the dynamics-learning core.
//!
//! The module mirrors the Rust surface at the granularity a notebook wants:
//! build or load a plan, sample a dataset, learn the local operators, then
//! query predictions, or drive the whole artifact pipeline in one call.

use hamlearn_core::applications::{predict_mean_value, ClassicalState};
use hamlearn_core::cluster::{truncation_bound, truncation_order, ClusterConfig, TruncationPlan};
use hamlearn_core::dataset::Dataset as CoreDataset;
use hamlearn_core::hamiltonian::{
    builders, digest_hex, interaction_graph, load_plan, parse_plan, plan_digest, plan_to_json,
    EvolutionPlan,
};
use hamlearn_core::learner::{learn_local_operators, model_to_json, LearnConfig, LearnedModel};
use hamlearn_core::pauli::{Axis, PauliSum, PauliTerm};
use hamlearn_core::pipeline::{report_to_json, run, ExperimentConfig, Mode};
use hamlearn_core::reconstruct::LocalOperators;
use hamlearn_core::simulator::{sample_dataset, NoiseModel};
use num_complex::Complex64;
use pyo3::exceptions::{PyFileNotFoundError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn to_py_err(e: hamlearn_core::Error) -> PyErr {
    match e {
        hamlearn_core::Error::MissingInput { .. } => PyFileNotFoundError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn axis_from_str(s: &str) -> PyResult<Axis> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Axis::from_symbol(c.to_ascii_uppercase())
            .ok_or_else(|| PyValueError::new_err(format!("unknown Pauli axis {s:?}"))),
        _ => Err(PyValueError::new_err(format!(
            "axis must be a single character, got {s:?}"
        ))),
    }
}

fn word_axes(word: &str) -> PyResult<Vec<Axis>> {
    word.chars()
        .map(|c| {
            Axis::from_symbol(c.to_ascii_uppercase())
                .ok_or_else(|| PyValueError::new_err(format!("unknown Pauli symbol {c:?}")))
        })
        .collect()
}

fn term_word(term: &PauliTerm) -> String {
    (0..term.n())
        .map(|q| term.axis_at(q).map(|a| a.symbol()).unwrap_or('I'))
        .collect()
}

fn state_from_amplitudes(amps: Vec<Complex64>) -> PyResult<ClassicalState> {
    let dim = amps.len();
    if dim < 2 || !dim.is_power_of_two() {
        return Err(PyValueError::new_err(format!(
            "amplitude list length {dim} is not a power of two >= 2"
        )));
    }
    let n = dim.trailing_zeros() as usize;
    let configs = amps
        .into_iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(i, a)| (i as u64, a))
        .collect();
    ClassicalState::new(n, configs).map_err(to_py_err)
}

/// A piecewise-constant evolution: K steps, each a local Hamiltonian run
/// for a fixed time.
#[pyclass(frozen)]
struct Plan {
    inner: EvolutionPlan,
}

#[pymethods]
impl Plan {
    /// Parse a plan document from JSON text.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Plan> {
        Ok(Plan {
            inner: parse_plan(text).map_err(to_py_err)?,
        })
    }

    /// Load a plan document from a file path.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Plan> {
        Ok(Plan {
            inner: load_plan(&path).map_err(to_py_err)?,
        })
    }

    /// Open transverse-field Ising chain, one step.
    #[staticmethod]
    fn tfim_chain(n: usize, j: f64, g: f64, t: f64) -> PyResult<Plan> {
        if n < 2 {
            return Err(PyValueError::new_err("chain needs at least two qubits"));
        }
        Ok(Plan {
            inner: builders::tfim_chain(n, j, g, t),
        })
    }

    /// Open chain of ZZ bonds only.
    #[staticmethod]
    fn zz_chain(n: usize, j: f64, t: f64) -> PyResult<Plan> {
        if n < 2 {
            return Err(PyValueError::new_err("chain needs at least two qubits"));
        }
        Ok(Plan {
            inner: builders::zz_chain(n, j, t),
        })
    }

    /// Transverse-field Ising model on an open grid.
    #[staticmethod]
    fn tfim_grid(rows: usize, cols: usize, j: f64, g: f64, t: f64) -> PyResult<Plan> {
        if rows * cols == 0 {
            return Err(PyValueError::new_err("grid needs at least one site"));
        }
        Ok(Plan {
            inner: builders::tfim_grid(rows, cols, j, g, t),
        })
    }

    /// Single-qubit plan H = coeff * axis for time t.
    #[staticmethod]
    fn single_qubit(axis: &str, coeff: f64, t: f64) -> PyResult<Plan> {
        Ok(Plan {
            inner: builders::single_qubit(axis_from_str(axis)?, coeff, t),
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn locality(&self) -> usize {
        self.inner.locality()
    }

    #[getter]
    fn t_max(&self) -> f64 {
        self.inner.t_max()
    }

    #[getter]
    fn max_degree(&self) -> usize {
        interaction_graph(&self.inner).max_degree
    }

    fn to_json(&self) -> String {
        plan_to_json(&self.inner)
    }

    /// Hex SHA-256 of the canonical JSON form.
    fn digest(&self) -> String {
        digest_hex(&plan_digest(&self.inner))
    }

    /// Choose the cluster-expansion order for a target tail accuracy.
    /// Returns (m, t_star, regime, bound).
    #[pyo3(signature = (eps_prime, kappa=None))]
    fn truncation(&self, eps_prime: f64, kappa: Option<f64>) -> PyResult<(u32, f64, String, f64)> {
        let mut cfg = ClusterConfig::default();
        if let Some(k) = kappa {
            cfg.kappa = k;
        }
        let graph = interaction_graph(&self.inner);
        let trunc = truncation_order(&self.inner, &graph, eps_prime, &cfg).map_err(to_py_err)?;
        let bound = truncation_bound(&trunc, &self.inner, &graph);
        Ok((
            trunc.m,
            trunc.t_star,
            format!("{:?}", trunc.regime),
            bound,
        ))
    }

    /// Sample a measurement dataset from the dense simulator.
    #[pyo3(signature = (shots, seed, gamma=0.0))]
    fn simulate(&self, shots: u64, seed: u64, gamma: f64) -> PyResult<PyDataset> {
        let noise = if gamma > 0.0 {
            Some(NoiseModel::new(gamma).map_err(to_py_err)?)
        } else {
            None
        };
        Ok(PyDataset {
            inner: sample_dataset(&self.inner, shots, seed, noise).map_err(to_py_err)?,
        })
    }

    /// Estimate all 3n local Heisenberg operators from a dataset.
    #[pyo3(signature = (dataset, epsilon=0.1, delta=0.05, trunc_m=None, threshold=true))]
    fn learn(
        &self,
        dataset: &PyDataset,
        epsilon: f64,
        delta: f64,
        trunc_m: Option<u32>,
        threshold: bool,
    ) -> PyResult<Model> {
        let cfg = LearnConfig {
            epsilon,
            delta,
            threshold,
            m_override: trunc_m,
            shots_override: Some(dataset.inner.len() as u64),
            ..LearnConfig::default()
        };
        let graph = interaction_graph(&self.inner);
        let trunc = match trunc_m {
            Some(m) => TruncationPlan::manual(m),
            None => {
                let eps_prime =
                    hamlearn_core::applications::default_eps_prime(epsilon, self.inner.n);
                truncation_order(&self.inner, &graph, eps_prime, &cfg.cluster).map_err(to_py_err)?
            }
        };
        let model =
            learn_local_operators(&self.inner, &dataset.inner, &trunc, &cfg).map_err(to_py_err)?;
        let locals = LocalOperators::from_model(&model);
        Ok(Model { model, locals })
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan(n={}, steps={}, t_max={})",
            self.inner.n,
            self.inner.k(),
            self.inner.t_max()
        )
    }
}

/// Measurement records: stabilizer input labels, measured bases, outcomes.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: CoreDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: CoreDataset::read(&path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write(&path).map_err(to_py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, records={}, seed={})",
            self.inner.n(),
            self.inner.len(),
            self.inner.seed()
        )
    }
}

/// Learned local Heisenberg operators plus the estimates behind them.
#[pyclass]
struct Model {
    model: LearnedModel,
    locals: LocalOperators,
}

#[pymethods]
impl Model {
    #[getter]
    fn n(&self) -> usize {
        self.model.n
    }

    #[getter]
    fn m(&self) -> u32 {
        self.model.m
    }

    #[getter]
    fn shots(&self) -> u64 {
        self.model.shots
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.model.gamma
    }

    fn to_json(&self) -> PyResult<String> {
        model_to_json(&self.model).map_err(to_py_err)
    }

    /// Kept coefficients of one local operator as (word, alpha, stderr).
    fn kept_terms(&self, qubit: usize, axis: &str) -> PyResult<Vec<(String, f64, f64)>> {
        let local = self
            .model
            .local(qubit, axis_from_str(axis)?)
            .map_err(to_py_err)?;
        Ok(local
            .estimates
            .iter()
            .filter(|e| e.kept)
            .map(|e| (term_word(&e.term), e.alpha, e.stderr))
            .collect())
    }

    /// Predicted <phi|U†OU|phi> for a dense amplitude list and a Pauli
    /// observable given as (qubits, word).
    fn predict(&self, amplitudes: Vec<Complex64>, qubits: Vec<usize>, word: &str) -> PyResult<f64> {
        let phi = state_from_amplitudes(amplitudes)?;
        if phi.n() != self.model.n {
            return Err(PyValueError::new_err(format!(
                "state has {} qubits, model has {}",
                phi.n(),
                self.model.n
            )));
        }
        let axes = word_axes(word)?;
        let term = PauliTerm::from_word(self.model.n, &qubits, &axes).map_err(to_py_err)?;
        let o = PauliSum::from_term(&term, Complex64::new(1.0, 0.0));
        predict_mean_value(&self.locals, &phi, &o).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(n={}, m={}, shots={})",
            self.model.n, self.model.m, self.model.shots
        )
    }
}

/// Run one artifact pipeline (the same entry the CLI uses) and return the
/// report as a JSON string.
#[pyfunction]
#[pyo3(signature = (
    mode,
    plan_path,
    seed,
    out_dir,
    shots=None,
    epsilon=None,
    delta=None,
    gamma=None,
    trunc_m=None,
    kappa=None,
    dataset=None,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    mode: &str,
    plan_path: PathBuf,
    seed: u64,
    out_dir: PathBuf,
    shots: Option<u64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    gamma: Option<f64>,
    trunc_m: Option<u32>,
    kappa: Option<f64>,
    dataset: Option<PathBuf>,
) -> PyResult<String> {
    let mode = Mode::parse(mode).map_err(to_py_err)?;
    let cfg = ExperimentConfig {
        mode,
        plan_path,
        seed,
        shots,
        epsilon,
        delta,
        gamma,
        trunc_m,
        kappa,
        threads: None,
        out_dir,
        dataset_path: dataset,
    };
    let artifacts = run(&cfg).map_err(to_py_err)?;
    report_to_json(&artifacts.report).map_err(to_py_err)
}

#[pymodule]
fn hamlearn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Plan>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

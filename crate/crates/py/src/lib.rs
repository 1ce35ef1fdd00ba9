//! Python bindings: load or generate programs, simulate them under a
//! reclamation policy and read back the report.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use reclaim::benchgen::{self, SyntheticParams};
use reclaim::ir::{self, parse_program};
use reclaim::machine::CommMode;
use reclaim::metrics::NoiseModel;
use reclaim::policy::{self, CostInputs, LaaWeights, PolicyKind};
use reclaim::run::{self, Grid, RunConfig, RunError, RunReport, Source};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn run_err(e: RunError) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A parsed modular reversible program.
#[pyclass(frozen, module = "reclaimpy")]
pub struct Program {
    inner: ir::Program,
}

#[pymethods]
impl Program {
    /// Parses program source text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_program(text).map(|inner| Program { inner }).map_err(value_err)
    }

    /// Reads and parses a program file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        run::load_program(&Source::File(path)).map(|inner| Program { inner }).map_err(run_err)
    }

    /// A generated benchmark: `adder4`, `multiplier3`, `chain:3`, a preset name...
    #[staticmethod]
    fn bench(spec: &str) -> PyResult<Self> {
        benchgen::bench(spec).map(|inner| Program { inner }).map_err(value_err)
    }

    /// A seeded random modular program.
    #[staticmethod]
    #[pyo3(signature = (levels, max_callees, max_inputs, max_ancilla, max_gates, seed = 0))]
    fn synthetic(
        levels: u32,
        max_callees: u32,
        max_inputs: u32,
        max_ancilla: u32,
        max_gates: u32,
        seed: u64,
    ) -> PyResult<Self> {
        let p = SyntheticParams { levels, max_callees, max_inputs, max_ancilla, max_gates, seed };
        p.validate().map_err(PyValueError::new_err)?;
        Ok(Program { inner: benchgen::gen_synthetic(&p) })
    }

    #[getter]
    fn functions(&self) -> Vec<String> {
        self.inner.functions.iter().map(|f| f.name.clone()).collect()
    }

    /// Call-graph distance of `name` from the entry module.
    fn level(&self, name: &str) -> PyResult<u32> {
        self.inner.function_level(name).map_err(value_err)
    }

    #[getter]
    fn static_gate_count(&self) -> usize {
        self.inner.static_gate_count()
    }

    /// Whether explicit Uncompute blocks mirror their Compute blocks.
    fn check_uncompute(&self) -> PyResult<()> {
        ir::check_uncompute(&self.inner).map_err(value_err)
    }

    fn source(&self) -> String {
        ir::print_program(&self.inner)
    }

    /// Simulates the program and returns its resource report.
    #[pyo3(signature = (policy = "square", arch = "lattice", grid = None, max_qubits = None, verify = false, laa_alpha = None, laa_beta = None, noise = None))]
    #[allow(clippy::too_many_arguments)]
    fn simulate(
        &self,
        py: Python<'_>,
        policy: &str,
        arch: &str,
        grid: Option<&str>,
        max_qubits: Option<u32>,
        verify: bool,
        laa_alpha: Option<f64>,
        laa_beta: Option<f64>,
        noise: Option<(f64, f64, f64, f64, f64)>,
    ) -> PyResult<Report> {
        let cfg = config(policy, arch, grid, max_qubits, verify, laa_alpha, laa_beta, noise)?;
        let out = py.detach(|| run::run_program(&self.inner, &cfg)).map_err(run_err)?;
        Ok(Report { trace: out.trace, verified: out.outcome.verified, inner: out.report })
    }

    fn __repr__(&self) -> String {
        format!("Program({} functions, {} gates)", self.inner.functions.len(), self.inner.static_gate_count())
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    policy: &str,
    arch: &str,
    grid: Option<&str>,
    max_qubits: Option<u32>,
    verify: bool,
    laa_alpha: Option<f64>,
    laa_beta: Option<f64>,
    noise: Option<(f64, f64, f64, f64, f64)>,
) -> PyResult<RunConfig> {
    let policy: PolicyKind = policy.parse().map_err(value_err)?;
    let arch: CommMode = arch.parse().map_err(|_| value_err(format!("unknown architecture {arch:?}")))?;
    let grid: Option<Grid> = grid.map(str::parse).transpose().map_err(value_err)?;
    let d = LaaWeights::default();
    let noise = match noise {
        Some((eps_single, eps_two, t1_us, t2_us, cycle_ns)) => {
            NoiseModel { eps_single, eps_two, t1_us, t2_us, cycle_ns }.validated().map_err(value_err)?
        }
        None => NoiseModel::default(),
    };
    Ok(RunConfig {
        max_qubits,
        verify,
        noise,
        laa: LaaWeights { alpha: laa_alpha.unwrap_or(d.alpha), beta: laa_beta.unwrap_or(d.beta) },
        ..RunConfig::new(Source::Text(String::new()), policy, arch, grid)
    })
}

/// Resource report of one simulation.
#[pyclass(frozen, module = "reclaimpy")]
pub struct Report {
    inner: RunReport,
    trace: Vec<(u64, u64)>,
    verified: Option<bool>,
}

#[pymethods]
impl Report {
    #[getter]
    fn policy(&self) -> &str {
        &self.inner.policy
    }
    #[getter]
    fn arch(&self) -> &str {
        &self.inner.arch
    }
    #[getter]
    fn gate_count(&self) -> u64 {
        self.inner.metrics.gate_count
    }
    #[getter]
    fn swap_count(&self) -> u64 {
        self.inner.metrics.swap_count
    }
    #[getter]
    fn braid_retries(&self) -> u64 {
        self.inner.metrics.braid_retries
    }
    #[getter]
    fn qubit_count(&self) -> u64 {
        self.inner.metrics.qubit_count
    }
    #[getter]
    fn depth_cycles(&self) -> u64 {
        self.inner.metrics.depth_cycles
    }
    #[getter]
    fn aqv(&self) -> u64 {
        self.inner.metrics.aqv
    }
    #[getter]
    fn success_rate(&self) -> f64 {
        self.inner.metrics.success_rate
    }
    /// `(cycle, live qubits)` step points.
    #[getter]
    fn trace(&self) -> Vec<(u64, u64)> {
        self.trace.clone()
    }
    /// Shadow-check result; `None` unless requested and the program is classical.
    #[getter]
    fn verified(&self) -> Option<bool> {
        self.verified
    }
    /// `(function, level, decision)` for every reclamation decision.
    #[getter]
    fn decisions(&self) -> Vec<(String, u32, String)> {
        self.inner
            .cer_decisions
            .iter()
            .map(|d| {
                let kind = match d.decision {
                    policy::Decision::Uncompute => "uncompute",
                    policy::Decision::TransferToParent => "transfer_to_parent",
                };
                (d.function.clone(), d.level, kind.to_string())
            })
            .collect()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(policy={}, arch={}, qubits={}, aqv={}, depth={})",
            self.inner.policy, self.inner.arch, self.inner.metrics.qubit_count, self.inner.metrics.aqv,
            self.inner.metrics.depth_cycles
        )
    }
}

fn cost_inputs(n_active: u32, n_anc: u32, g_uncomp: u64, g_p: u64, s: f64, level: u32) -> CostInputs {
    CostInputs { n_active, n_anc, g_uncomp, g_p, s, level }
}

/// Cost of uncomputing a module now.
#[pyfunction]
#[pyo3(signature = (n_active, n_anc, g_uncomp, g_p, s = 1.0, level = 0))]
fn cost_uncompute(n_active: u32, n_anc: u32, g_uncomp: u64, g_p: u64, s: f64, level: u32) -> f64 {
    policy::cost_uncompute(&cost_inputs(n_active, n_anc, g_uncomp, g_p, s, level))
}

/// Cost of leaving a module's ancilla to its caller.
#[pyfunction]
#[pyo3(signature = (n_active, n_anc, g_uncomp, g_p, s = 1.0, level = 0))]
fn cost_no_uncompute(n_active: u32, n_anc: u32, g_uncomp: u64, g_p: u64, s: f64, level: u32) -> PyResult<f64> {
    policy::cost_no_uncompute(&cost_inputs(n_active, n_anc, g_uncomp, g_p, s, level)).map_err(value_err)
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    benchgen::preset_names().collect()
}

#[pymodule]
fn reclaimpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Program>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(cost_uncompute, m)?)?;
    m.add_function(wrap_pyfunction!(cost_no_uncompute, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add("SMALL_SUITE", benchgen::SMALL_SUITE.to_vec())?;
    m.add("MEDIUM_SUITE", benchgen::MEDIUM_SUITE.to_vec())?;
    Ok(())
}

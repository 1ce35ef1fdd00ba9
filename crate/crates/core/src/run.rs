//! Single runs and policy/architecture sweeps, shared by the CLI and the
//! Python bindings.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::benchgen::{self, SyntheticParams};
use crate::ir::{check_uncompute, parse_program, IrError, Program};
use crate::machine::{CommMode, MachineModel};
use crate::metrics::{emit_usage_trace, MetricsReport, NoiseModel};
use crate::policy::{LaaWeights, PolicyKind};
use crate::sched::{simulate, CerRecord, SimConfig, SimError, SimOutcome};

/// Capacity of a fully connected machine when neither a grid nor
/// `--max-qubits` bounds it.
pub const DEFAULT_FULL_CAPACITY: u32 = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    File(PathBuf),
    Bench(String),
    Synthetic(SyntheticParams),
    Text(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::File(p) => write!(f, "{}", p.display()),
            Source::Bench(b) => f.write_str(b),
            Source::Synthetic(p) => write!(
                f,
                "synthetic:{},{},{},{},{},{}",
                p.levels, p.max_callees, p.max_inputs, p.max_ancilla, p.max_gates, p.seed
            ),
            Source::Text(_) => f.write_str("<text>"),
        }
    }
}

/// Grid dimensions written `WxH`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub width: u32,
    pub height: u32,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("grid must be WxH, got {s:?}"))?;
        let dim = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("grid must be WxH, got {s:?}"));
        let g = Grid { width: dim(w)?, height: dim(h)? };
        if g.width == 0 || g.height == 0 {
            return Err(format!("grid dimensions must be positive, got {s:?}"));
        }
        Ok(g)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub source: Source,
    pub policy: PolicyKind,
    pub arch: CommMode,
    pub grid: Option<Grid>,
    pub max_qubits: Option<u32>,
    pub noise: NoiseModel,
    pub laa: LaaWeights,
    pub verify: bool,
    pub check_uncompute: bool,
}

impl RunConfig {
    pub fn new(source: Source, policy: PolicyKind, arch: CommMode, grid: Option<Grid>) -> Self {
        RunConfig {
            source,
            policy,
            arch,
            grid,
            max_qubits: None,
            noise: NoiseModel::default(),
            laa: LaaWeights::default(),
            verify: false,
            check_uncompute: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("{0}")]
    Input(String),
    #[error("parse error: {0}")]
    Parse(#[from] IrError),
    #[error("{0}")]
    Sim(#[from] SimError),
}

impl RunError {
    /// 1 for bad input, 2 for an allocation deadlock, 3 for a failed
    /// correctness check.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 1,
            RunError::Parse(IrError::UncomputeMismatch { .. }) => 3,
            RunError::Parse(_) => 1,
            RunError::Sim(e) if e.is_deadlock() => 2,
            RunError::Sim(SimError::Verification(_)) => 3,
            RunError::Sim(_) => 1,
        }
    }
}

/// The JSON report of one run. Units: cycles for depth, qubit-cycles for
/// aqv, a probability for success_rate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub policy: String,
    pub arch: String,
    pub grid: Option<String>,
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub cer_decisions: Vec<CerRecord>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct RunOutput {
    pub report: RunReport,
    /// `(cycle, live qubits)` step points.
    pub trace: Vec<(u64, u64)>,
    pub outcome: SimOutcome,
}

pub fn trace_csv(trace: &[(u64, u64)]) -> String {
    let mut out = String::from("cycle,active_qubits\n");
    for (t, n) in trace {
        out.push_str(&format!("{t},{n}\n"));
    }
    out
}

pub fn load_program(source: &Source) -> Result<Program, RunError> {
    let text = match source {
        Source::File(p) => {
            std::fs::read_to_string(p).map_err(|e| RunError::Input(format!("cannot read {}: {e}", p.display())))?
        }
        Source::Bench(b) => benchgen::bench_source(b).map_err(|e| RunError::Input(e.to_string()))?,
        Source::Synthetic(p) => {
            p.validate().map_err(RunError::Input)?;
            benchgen::synthetic_source(p)
        }
        Source::Text(t) => t.clone(),
    };
    Ok(parse_program(&text)?)
}

pub fn build_machine(arch: CommMode, grid: Option<Grid>, max_qubits: Option<u32>) -> Result<MachineModel, RunError> {
    let m = match (arch, grid) {
        (CommMode::FullyConnected, g) => {
            let cap = max_qubits.or(g.map(|g| g.width * g.height)).unwrap_or(DEFAULT_FULL_CAPACITY);
            MachineModel::fully_connected(cap)
        }
        (mode, Some(g)) => MachineModel::grid(mode, g.width, g.height, max_qubits),
        (mode, None) => return Err(RunError::Input(format!("--grid is required for --arch {}", mode.cli_name()))),
    };
    m.map_err(|e| RunError::Input(e.to_string()))
}

pub fn run_program(p: &Program, cfg: &RunConfig) -> Result<RunOutput, RunError> {
    if cfg.check_uncompute {
        check_uncompute(p)?;
    }
    let noise = cfg.noise.validated().map_err(|e| RunError::Input(e.to_string()))?;
    let m = build_machine(cfg.arch, cfg.grid, cfg.max_qubits)?;
    let sim_cfg = SimConfig { policy: cfg.policy, laa: cfg.laa, noise, verify: cfg.verify, shadow_inputs: None, record_events: false };
    let outcome = simulate(p, &m, &sim_cfg)?;
    let trace = emit_usage_trace(&outcome.timeline.segments);
    let report = RunReport {
        policy: cfg.policy.cli_name().to_string(),
        arch: cfg.arch.cli_name().to_string(),
        grid: m.is_grid().then(|| format!("{}x{}", m.width, m.height)),
        metrics: outcome.report.clone(),
        cer_decisions: outcome.decisions.clone(),
    };
    Ok(RunOutput { report, trace, outcome })
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    let p = load_program(&cfg.source)?;
    run_program(&p, cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub input: String,
    pub policy: String,
    pub arch: String,
    pub grid: Option<String>,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// Every combination of input, policy and architecture, in that nesting
/// order. Rows run in parallel on up to `jobs` threads and fail
/// independently.
pub fn sweep(
    template: &RunConfig,
    inputs: &[Source],
    policies: &[PolicyKind],
    archs: &[CommMode],
    jobs: usize,
) -> Vec<SweepRow> {
    let mut combos = Vec::new();
    for input in inputs {
        for &policy in policies {
            for &arch in archs {
                combos.push((input.clone(), policy, arch));
            }
        }
    }
    let work = || {
        combos
            .par_iter()
            .map(|(input, policy, arch)| {
                let cfg = RunConfig { source: input.clone(), policy: *policy, arch: *arch, ..template.clone() };
                let result = run(&cfg);
                let grid = match arch {
                    CommMode::FullyConnected => None,
                    _ => cfg.grid.map(|g| g.to_string()),
                };
                let (report, error) = match result {
                    Ok(out) => (Some(out.report), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                SweepRow {
                    input: input.to_string(),
                    policy: policy.cli_name().to_string(),
                    arch: arch.cli_name().to_string(),
                    grid,
                    report,
                    error,
                }
            })
            .collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

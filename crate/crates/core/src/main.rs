use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reclaim::benchgen::SyntheticParams;
use reclaim::machine::CommMode;
use reclaim::metrics::NoiseModel;
use reclaim::policy::{LaaWeights, PolicyKind};
use reclaim::run::{self, Grid, RunConfig, RunError, Source};

/// Ancilla reclamation compiler and resource simulator for modular
/// reversible programs.
#[derive(Parser)]
#[command(name = "reclaim", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one program (the default when no subcommand is given).
    Run(RunArgs),
    /// Simulate every combination of inputs, policies and architectures.
    Sweep(SweepArgs),
    /// Print the source of a generated benchmark.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
#[group(id = "source", multiple = false)]
struct InputArgs {
    /// Program source file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generated benchmark: adderN, multiplierN, chain:L[,G] or a preset name.
    #[arg(long)]
    bench: Option<String>,
    /// Random modular program: levels,callees,inputs,ancilla,gates,seed.
    #[arg(long, value_parser = SyntheticParams::from_csv)]
    synthetic: Option<SyntheticParams>,
}

impl InputArgs {
    fn source(&self) -> Result<Source, RunError> {
        match (&self.input, &self.bench, &self.synthetic) {
            (Some(p), _, _) => Ok(Source::File(p.clone())),
            (_, Some(b), _) => Ok(Source::Bench(b.clone())),
            (_, _, Some(s)) => Ok(Source::Synthetic(*s)),
            _ => Err(RunError::Input("one of --input, --bench or --synthetic is required".into())),
        }
    }
}

#[derive(Args, Clone)]
struct MachineArgs {
    /// Grid as WxH; required for lattice and ft.
    #[arg(long)]
    grid: Option<Grid>,
    #[arg(long)]
    max_qubits: Option<u32>,
    /// eps1,eps2,t1_us,t2_us,cycle_ns
    #[arg(long, value_parser = parse_noise)]
    noise: Option<NoiseModel>,
    #[arg(long, default_value_t = LaaWeights::default().alpha)]
    laa_alpha: f64,
    #[arg(long, default_value_t = LaaWeights::default().beta)]
    laa_beta: f64,
    /// Check with a classical shadow simulation that every reclaimed qubit is |0>.
    #[arg(long)]
    verify: bool,
    /// Check explicit Uncompute blocks against the derived ones.
    #[arg(long)]
    check_uncompute: bool,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "square", value_parser = parse_policy)]
    policy: PolicyKind,
    #[arg(long, default_value = "lattice", value_parser = parse_arch)]
    arch: CommMode,
    #[command(flatten)]
    machine: MachineArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the live-qubit trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    input: Vec<PathBuf>,
    #[arg(long)]
    bench: Vec<String>,
    #[arg(long, value_parser = SyntheticParams::from_csv)]
    synthetic: Vec<SyntheticParams>,
    #[arg(long, value_delimiter = ',', default_value = "eager,lazy,square", value_parser = parse_policy)]
    policies: Vec<PolicyKind>,
    #[arg(long, value_delimiter = ',', default_value = "lattice,full", value_parser = parse_arch)]
    archs: Vec<CommMode>,
    #[command(flatten)]
    machine: MachineArgs,
    /// Parallel rows.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
}

fn parse_arch(s: &str) -> Result<CommMode, String> {
    s.parse().map_err(|_| format!("unknown architecture {s:?} (expected lattice, full or ft)"))
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("not a number: {x:?}")))
        .collect::<Result<_, _>>()?;
    let [eps_single, eps_two, t1_us, t2_us, cycle_ns] = v[..] else {
        return Err("expected eps1,eps2,t1_us,t2_us,cycle_ns".into());
    };
    NoiseModel { eps_single, eps_two, t1_us, t2_us, cycle_ns }.validated().map_err(|e| e.to_string())
}

fn template(source: Source, policy: PolicyKind, arch: CommMode, m: &MachineArgs) -> RunConfig {
    RunConfig {
        max_qubits: m.max_qubits,
        noise: m.noise.unwrap_or_default(),
        laa: LaaWeights { alpha: m.laa_alpha, beta: m.laa_beta },
        verify: m.verify,
        check_uncompute: m.check_uncompute,
        ..RunConfig::new(source, policy, arch, m.grid)
    }
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), RunError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| RunError::Input(format!("cannot write {}: {e}", p.display()))),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            // A closed reader (`reclaim ... | head`) is not an error.
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(RunError::Input(format!("cannot write stdout: {e}"))),
            _ => Ok(()),
        },
    }
}

fn do_run(a: &RunArgs) -> Result<(), RunError> {
    let cfg = template(a.input.source()?, a.policy, a.arch, &a.machine);
    let out = run::run(&cfg)?;
    if cfg.verify && out.outcome.verified.is_none() {
        eprintln!("note: --verify skipped, the program uses non-classical gates");
    }
    if let Some(path) = &a.trace {
        write_out(Some(path), &run::trace_csv(&out.trace))?;
    }
    write_out(a.report.as_ref(), &out.report.to_json())
}

fn do_sweep(a: &SweepArgs) -> Result<(), RunError> {
    let inputs: Vec<Source> = a
        .input
        .iter()
        .map(|p| Source::File(p.clone()))
        .chain(a.bench.iter().map(|b| Source::Bench(b.clone())))
        .chain(a.synthetic.iter().map(|s| Source::Synthetic(*s)))
        .collect();
    if inputs.is_empty() {
        return Err(RunError::Input("sweep needs at least one --input, --bench or --synthetic".into()));
    }
    let first = template(inputs[0].clone(), a.policies[0], a.archs[0], &a.machine);
    let rows = run::sweep(&first, &inputs, &a.policies, &a.archs, a.jobs);
    write_out(a.report.as_ref(), &serde_json::to_string_pretty(&rows).expect("rows serialize"))
}

fn do_gen(a: &GenArgs) -> Result<(), RunError> {
    let p = run::load_program(&a.input.source()?)?;
    write_out(a.output.as_ref(), reclaim::ir::print_program(&p).trim_end())
}

fn main() -> ExitCode {
    // Usage errors share exit code 1 with other bad input; 2 is reserved
    // for allocation deadlocks.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        None => do_run(&cli.run),
        Some(Command::Run(a)) => do_run(a),
        Some(Command::Sweep(a)) => do_sweep(a),
        Some(Command::Gen(a)) => do_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

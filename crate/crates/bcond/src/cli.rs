use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use bcond_core::bounded::{PendingOrder, StopCriteria, StopReason};
use bcond_core::concurrent::{run_concurrent, ConcurrentError, Schedule};
use bcond_core::convergence::fit_decay;
use bcond_core::generate::{generate_description, GeneratorParams};
use bcond_core::network::is_singly_connected;
use bcond_core::oracle::{enumerate_posteriors, OracleError, DEFAULT_JOINT_CAP};
use bcond_core::{
    find_loop_cutset, BeliefNetwork, BoundedError, Conditioning, ConditioningError, Cutset,
    Evidence, EvidenceStream, Session, SessionOptions, VarId,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::format::{self, FormatError};
use crate::trace::{self, format_value};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Invalid network, evidence, trace or arguments.
    pub const INVALID: i32 = 1;
    /// Reserved for argument parsing errors reported by clap.
    pub const USAGE: i32 = 2;
    /// A file could not be read or written.
    pub const IO: i32 = 3;
    /// The evidence has probability zero.
    pub const IMPOSSIBLE: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(
    name = "bcond",
    version,
    about = "Exact and bounded conditioning on discrete belief networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network file.
    Validate { network: PathBuf },
    /// Print the loop cutset and its instance count.
    Cutset {
        network: PathBuf,
        /// Check these comma-separated members instead of searching.
        #[arg(long)]
        members: Option<String>,
    },
    /// Replay an evidence file and report posteriors or bounds.
    Run(RunArgs),
    /// Write a random network.
    Generate(GenerateArgs),
    /// Fit an exponential decay to the widths in a trace.
    Fit {
        trace: PathBuf,
        /// Only use this evidence epoch.
        #[arg(long)]
        epoch: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Bounded,
    Concurrent,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Descending,
    Ascending,
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0,1]"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Evidence file; without one the prior is reported.
    #[arg(long)]
    pub evidence: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bounded")]
    pub mode: Mode,
    /// Stop once every interval is at most this wide.
    #[arg(long, value_parser = unit_interval)]
    pub epsilon: Option<f64>,
    /// Budget in instance solves, initialization excluded.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Comma-separated variables to report; all by default.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    /// Comma-separated cutset members. Repeat for each concurrent analysis.
    #[arg(long)]
    pub cutset: Vec<String>,
    /// Seeds the choice of extra cutsets in concurrent mode.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "descending")]
    pub order: Order,
    /// Per-instance ratio weight bounds.
    #[arg(long)]
    pub tightened: bool,
    /// Fit the decay constant to the run's widths.
    #[arg(long)]
    pub fit: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long, default_value_t = 3)]
    pub max_parents: usize,
    #[arg(long, default_value_t = 2)]
    pub max_states: usize,
    #[arg(long, default_value_t = 0)]
    pub loops: usize,
    /// Mass given to state 0 of every row.
    #[arg(long)]
    pub asymmetry: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; standard output if absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// A failed command: message for standard error and exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: exit::INVALID,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure {
            code: exit::IO,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn impossible() -> Self {
        Failure {
            code: exit::IMPOSSIBLE,
            message: "impossible evidence: the observations have probability zero".into(),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure {
            code: if e.is_io() { exit::IO } else { exit::INVALID },
            message: e.to_string(),
        }
    }
}

impl From<BoundedError> for Failure {
    fn from(e: BoundedError) -> Self {
        match e {
            BoundedError::ImpossibleEvidence
            | BoundedError::Conditioning(ConditioningError::ImpossibleEvidence) => {
                Failure::impossible()
            }
            e => Failure::invalid(e.to_string()),
        }
    }
}

impl From<ConditioningError> for Failure {
    fn from(e: ConditioningError) -> Self {
        match e {
            ConditioningError::ImpossibleEvidence => Failure::impossible(),
            e => Failure::invalid(e.to_string()),
        }
    }
}

impl From<trace::TraceError> for Failure {
    fn from(e: trace::TraceError) -> Self {
        match e {
            trace::TraceError::Csv(c) if c.is_io_error() => Failure {
                code: exit::IO,
                message: c.to_string(),
            },
            e => Failure::invalid(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Runs a parsed command, writing reports to `out`. Returns the exit code;
/// failures are described on `err`.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Validate { network } => cmd_validate(network, out),
        Command::Cutset { network, members } => cmd_cutset(network, members.as_deref(), out),
        Command::Run(args) => cmd_run(args, out),
        Command::Generate(args) => cmd_generate(args, out),
        Command::Fit { trace, epoch } => cmd_fit(trace, *epoch, out),
    };
    match result {
        Ok(()) => exit::OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Outcome {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| Failure::io(Path::new("<stdout>"), e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { emit($out, format_args!($($arg)*)) };
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> Outcome {
    let text = format::read_file(path)?;
    let desc = format::parse_description(&text)?;
    let report = bcond_core::validate(&desc);
    if !report.is_empty() {
        for issue in &report.issues {
            say!(out, "{issue}")?;
        }
        return Err(Failure::invalid(format!(
            "{}: {} issue(s)",
            path.display(),
            report.issues.len()
        )));
    }
    let net = desc.build().expect("validated");
    let shape = if is_singly_connected(&net) {
        "singly connected"
    } else {
        "multiply connected"
    };
    say!(
        out,
        "valid: {} variables, {} arcs, {shape}",
        net.len(),
        net.arcs().count()
    )
}

fn names(net: &BeliefNetwork, cs: &Cutset) -> String {
    let parts: Vec<&str> = cs
        .members()
        .iter()
        .map(|&v| net.variable(v).name.as_str())
        .collect();
    format!("[{}]", parts.join(", "))
}

fn parse_cutset(net: &BeliefNetwork, spec: &str) -> Result<Cutset, Failure> {
    let members = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            net.find(name)
                .ok_or_else(|| Failure::invalid(format!("unknown cutset member {name}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cs = Cutset::new(net, members).map_err(|e| Failure::invalid(e.to_string()))?;
    if !cs.verify(net) {
        return Err(Failure::invalid(format!(
            "{} does not cut every loop",
            names(net, &cs)
        )));
    }
    Ok(cs)
}

fn instance_count(net: &BeliefNetwork, cs: &Cutset) -> Result<usize, Failure> {
    cs.instance_count(net)
        .map_err(|e| Failure::invalid(e.to_string()))
}

pub fn cmd_cutset(path: &Path, members: Option<&str>, out: &mut dyn Write) -> Outcome {
    let net = format::load_network(path)?;
    let cs = match members {
        Some(spec) => parse_cutset(&net, spec)?,
        None => find_loop_cutset(&net),
    };
    let n = instance_count(&net, &cs)?;
    say!(out, "cutset: {} instances: {n}", names(&net, &cs))
}

fn targets(net: &BeliefNetwork, names: &[String]) -> Result<Option<Vec<VarId>>, Failure> {
    if names.is_empty() {
        return Ok(None);
    }
    names
        .iter()
        .map(|n| {
            net.find(n)
                .ok_or_else(|| Failure::invalid(format!("unknown target {n}")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

fn selected(net: &BeliefNetwork, targets: &Option<Vec<VarId>>) -> Vec<VarId> {
    match targets {
        Some(t) => t.clone(),
        None => net.ids().collect(),
    }
}

fn write_posterior(out: &mut dyn Write, net: &BeliefNetwork, v: VarId, p: &[f64]) -> Outcome {
    let var = net.variable(v);
    let parts: Vec<String> = var
        .states
        .iter()
        .zip(p)
        .map(|(s, x)| format!("{s} {}", format_value(*x)))
        .collect();
    say!(out, "{}: {}", var.name, parts.join(" "))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(path, e))
}

fn stop_name(r: StopReason) -> &'static str {
    match r {
        StopReason::WidthReached => "width-reached",
        StopReason::BudgetExhausted => "budget-exhausted",
        StopReason::NothingPending => "nothing-pending",
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Outcome {
    let net = format::load_network(&args.network)?;
    let stream = match &args.evidence {
        Some(p) => format::load_evidence(&net, p)?,
        None => EvidenceStream::default(),
    };
    let targets = targets(&net, &args.targets)?;
    match args.mode {
        Mode::Exact => run_exact(&net, &stream, args, &targets, out),
        Mode::Oracle => run_oracle(&net, &stream, &targets, out),
        Mode::Bounded => run_bounded(&net, &stream, args, &targets, out),
        Mode::Concurrent => run_concurrent_mode(&net, &stream, args, &targets, out),
    }
}

fn single_cutset(net: &BeliefNetwork, args: &RunArgs) -> Result<Cutset, Failure> {
    match args.cutset.as_slice() {
        [] => Ok(find_loop_cutset(net)),
        [one] => parse_cutset(net, one),
        _ => Err(Failure::invalid("several cutsets need --mode concurrent")),
    }
}

fn run_exact(
    net: &BeliefNetwork,
    stream: &EvidenceStream,
    args: &RunArgs,
    targets: &Option<Vec<VarId>>,
    out: &mut dyn Write,
) -> Outcome {
    let cs = single_cutset(net, args)?;
    let mut c = Conditioning::new(net, &cs)?;
    for (ev, _) in stream.items() {
        c.observe(ev)?;
    }
    say!(out, "mode: exact")?;
    say!(
        out,
        "cutset: {} instances: {}",
        names(net, &cs),
        c.weights().len()
    )?;
    say!(
        out,
        "evidence probability: {}",
        format_value(c.evidence_probability())
    )?;
    for v in selected(net, targets) {
        write_posterior(out, net, v, &c.posterior(v)?)?;
    }
    Ok(())
}

fn run_oracle(
    net: &BeliefNetwork,
    stream: &EvidenceStream,
    targets: &Option<Vec<VarId>>,
    out: &mut dyn Write,
) -> Outcome {
    let mut all = Evidence::new();
    for (ev, _) in stream.items() {
        all = all.union(ev).ok_or_else(Failure::impossible)?;
    }
    let e = enumerate_posteriors(net, &all, DEFAULT_JOINT_CAP).map_err(|e| match e {
        OracleError::ImpossibleEvidence => Failure::impossible(),
        e => Failure::invalid(e.to_string()),
    })?;
    say!(out, "mode: oracle")?;
    say!(
        out,
        "evidence probability: {}",
        format_value(e.evidence_probability)
    )?;
    for v in selected(net, targets) {
        write_posterior(out, net, v, &e.marginals[v.0])?;
    }
    Ok(())
}

fn write_bounds(
    out: &mut dyn Write,
    net: &BeliefNetwork,
    bounds: &[Option<Vec<bcond_core::Interval>>],
    targets: &Option<Vec<VarId>>,
    observed: &Evidence,
) -> Outcome {
    for v in selected(net, targets) {
        let var = net.variable(v);
        match &bounds[v.0] {
            Some(ivs) => {
                let parts: Vec<String> = var
                    .states
                    .iter()
                    .zip(ivs)
                    .map(|(s, iv)| {
                        format!(
                            "{s} [{}, {}]",
                            format_value(iv.lower),
                            format_value(iv.upper)
                        )
                    })
                    .collect();
                say!(out, "{}: {}", var.name, parts.join(" "))?;
            }
            None => {
                let s = observed.get(v).expect("untracked variables are observed");
                say!(out, "{}: observed {}", var.name, var.states[s])?;
            }
        }
    }
    Ok(())
}

fn report_fit(out: &mut dyn Write, points: &[(f64, f64)]) -> Outcome {
    match fit_decay(points) {
        Ok(f) => say!(
            out,
            "fit: k {} residual {} points {} excluded {}",
            format_value(f.k),
            format_value(f.residual),
            f.used,
            f.excluded
        ),
        Err(e) => say!(out, "fit: unavailable ({e})"),
    }
}

fn run_bounded(
    net: &BeliefNetwork,
    stream: &EvidenceStream,
    args: &RunArgs,
    targets: &Option<Vec<VarId>>,
    out: &mut dyn Write,
) -> Outcome {
    let cs = single_cutset(net, args)?;
    let options = SessionOptions {
        order: match args.order {
            Order::Descending => PendingOrder::WeightDescending,
            Order::Ascending => PendingOrder::WeightAscending,
        },
        tightened: args.tightened,
    };
    let mut s = Session::begin(net, cs, options)?;
    let stop = StopCriteria {
        epsilon: args.epsilon,
        max_steps: args.steps,
    };
    let (steps, reason) = s.replay(stream, stop)?;
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        trace::write_trace(&mut w, net, s.trace(), targets.as_deref())?;
        w.flush().map_err(|e| Failure::io(path, e))?;
    }
    say!(out, "mode: bounded")?;
    say!(
        out,
        "cutset: {} instances: {}",
        names(net, s.cutset()),
        s.ledger().n()
    )?;
    say!(
        out,
        "steps: {steps} work units: {} epochs: {} stop: {}",
        s.work_units(),
        s.epoch(),
        stop_name(reason)
    )?;
    say!(out, "width: {}", format_value(s.snapshot().width))?;
    write_bounds(out, net, &s.snapshot().bounds, targets, s.observed())?;
    if args.fit {
        let widths: Vec<trace::StepWidth> = s
            .trace()
            .iter()
            .map(|r| trace::StepWidth {
                step: r.step,
                epoch: r.epoch,
                width: r.snapshot.width,
            })
            .collect();
        report_fit(out, &trace::decay_points(&widths, None))?;
    }
    Ok(())
}

/// The given cutsets, topped up to two: the heuristic cutset first, then
/// the heuristic cutset plus one extra member picked with the seed.
fn concurrent_cutsets(net: &BeliefNetwork, args: &RunArgs) -> Result<Vec<Cutset>, Failure> {
    let mut cutsets = args
        .cutset
        .iter()
        .map(|spec| parse_cutset(net, spec))
        .collect::<Result<Vec<_>, _>>()?;
    let base = find_loop_cutset(net);
    if cutsets.is_empty() {
        cutsets.push(base.clone());
    }
    if cutsets.len() < 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let extra = net
            .ids()
            .filter(|v| !base.contains(*v))
            .choose(&mut rng)
            .ok_or_else(|| Failure::invalid("no variable left to build a second cutset"))?;
        let mut members = base.members().to_vec();
        members.push(extra);
        cutsets.push(Cutset::new(net, members).map_err(|e| Failure::invalid(e.to_string()))?);
    }
    Ok(cutsets)
}

fn run_concurrent_mode(
    net: &BeliefNetwork,
    stream: &EvidenceStream,
    args: &RunArgs,
    targets: &Option<Vec<VarId>>,
    out: &mut dyn Write,
) -> Outcome {
    if args.epsilon.is_some() {
        return Err(Failure::invalid("concurrent mode stops on --steps only"));
    }
    let cutsets = concurrent_cutsets(net, args)?;
    let budget = args.steps.unwrap_or(usize::MAX);
    let run = run_concurrent(net, &cutsets, budget, stream, &Schedule::RoundRobin).map_err(
        |e| match e {
            ConcurrentError::Analysis { source, .. } => Failure::from(source),
            e => Failure::invalid(e.to_string()),
        },
    )?;
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        trace::write_concurrent_trace(&mut w, net, &run, targets.as_deref())?;
        w.flush().map_err(|e| Failure::io(path, e))?;
    }
    let last = run.rows.last().expect("run has a starting row");
    say!(out, "mode: concurrent")?;
    for (a, cs) in cutsets.iter().enumerate() {
        say!(
            out,
            "analysis {a}: cutset {} instances: {} solves: {} width: {}",
            names(net, cs),
            instance_count(net, cs)?,
            run.solves[a],
            format_value(last.snapshots[a].width)
        )?;
    }
    say!(
        out,
        "work units: {} epochs: {}",
        run.total_work(),
        last.epoch
    )?;
    say!(out, "combined width: {}", format_value(last.combined.width))?;
    let observed = stream.items()[..last.epoch]
        .iter()
        .try_fold(Evidence::new(), |acc, (e, _)| acc.union(e))
        .unwrap_or_default();
    write_bounds(out, net, &last.combined.bounds, targets, &observed)
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn Write) -> Outcome {
    let params = GeneratorParams {
        node_count: args.nodes,
        max_parents: args.max_parents,
        max_states: args.max_states,
        loop_target: args.loops,
        asymmetry: args.asymmetry,
    };
    let desc =
        generate_description(&params, args.seed).map_err(|e| Failure::invalid(e.to_string()))?;
    let text = format::serialize_description(&desc);
    match &args.output {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| Failure::io(path, e))?;
            say!(
                out,
                "wrote {}: {} variables, {} loops",
                path.display(),
                desc.variables.len(),
                args.loops
            )
        }
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

pub fn cmd_fit(path: &Path, epoch: Option<usize>, out: &mut dyn Write) -> Outcome {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    let widths = trace::read_step_widths(io::BufReader::new(file))?;
    let points = trace::decay_points(&widths, epoch);
    let f = fit_decay(&points).map_err(|e| Failure::invalid(e.to_string()))?;
    say!(out, "k: {}", format_value(f.k))?;
    say!(out, "residual: {}", format_value(f.residual))?;
    say!(out, "points: {} excluded: {}", f.used, f.excluded)
}

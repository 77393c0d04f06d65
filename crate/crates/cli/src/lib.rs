//! Command implementations behind the `qfsm` binary.
//!
//! Every command renders to a string so the output can be compared byte for
//! byte; `main` only prints it and maps the status to an exit code.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qfsm_core::grover::evolved_marked_mass;
use qfsm_core::{
    compile, compile_plain, encode, exactly_marked_inputs, grover_iterations_for, grover_round,
    halting_set, init_superposition, initial_config, parse_fsm, parse_regex, read_output_trace,
    run, run_traced, search, success_probability, CompiledMachine, Direction, Fsm, NodeId,
    QueryResult, SearchMode, Word,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "qfsm",
    version,
    about = "Reversible FSM compiler and Grover query simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a machine and print the register machine and its U_m table
    Compile(CompileArgs),
    /// Run one word forward T steps, then backward T steps
    Run(RunArgs),
    /// Search for words that halt at the target nodes
    Query(QueryArgs),
    /// Check the simulated oracle against classical enumeration
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Machine description file
    #[arg(long, value_name = "PATH")]
    pub fsm: Option<PathBuf>,
    /// Regular expression over 0, 1, |, *, and parentheses
    #[arg(long, value_name = "PATTERN")]
    pub regex: Option<String>,
}

#[derive(Debug, Args)]
pub struct MachineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Target node ids, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        value_name = "ID,...",
        conflicts_with = "accepts"
    )]
    pub halts_at: Vec<NodeId>,
    /// Use the machine's accepting nodes as targets
    #[arg(long)]
    pub accepts: bool,
    /// Longest input word considered (K)
    #[arg(long, default_value_t = 6, value_name = "K")]
    pub max_len: usize,
    /// Print JSON instead of text
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[command(flatten)]
    pub machine: MachineArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub machine: MachineArgs,
    /// Input word, first symbol leftmost; empty by default
    #[arg(long, default_value = "")]
    pub word: String,
    /// Print every configuration along the way
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub machine: MachineArgs,
    /// Number of measurements
    #[arg(long, default_value_t = 200)]
    pub shots: usize,
    /// Grover rounds: auto, bbht, or a fixed count
    #[arg(long, default_value = "auto", value_parser = parse_mode)]
    pub iterations: SearchMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub machine: MachineArgs,
    /// Rounds for the amplitude check: auto or a fixed count
    #[arg(long, default_value = "auto", value_parser = parse_mode)]
    pub iterations: SearchMode,
}

fn parse_mode(s: &str) -> Result<SearchMode, String> {
    match s {
        "auto" => Ok(SearchMode::Auto),
        "bbht" => Ok(SearchMode::Bbht),
        n => usize::from_str(n)
            .map(SearchMode::Fixed)
            .map_err(|_| format!("expected auto, bbht or a round count, got {n:?}")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Mismatch,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Mismatch => 1,
        }
    }
}

/// Rendered command output.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub status: Status,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            stdout,
            status: Status::Success,
        }
    }
}

/// Errors from here are usage or input problems (exit code 2).
pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Compile(a) => cmd_compile(a),
        Command::Run(a) => cmd_run(a),
        Command::Query(a) => cmd_query(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

struct Loaded {
    source: String,
    fsm: Fsm,
}

fn load(args: &SourceArgs) -> Result<Loaded> {
    if let Some(path) = &args.fsm {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let fsm = parse_fsm(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Loaded {
            source: format!("fsm:{}", path.display()),
            fsm,
        })
    } else if let Some(pattern) = &args.regex {
        let fsm = parse_regex(pattern).with_context(|| format!("parsing regex {pattern:?}"))?;
        Ok(Loaded {
            source: format!("regex:{pattern}"),
            fsm,
        })
    } else {
        bail!("one of --fsm or --regex is required")
    }
}

/// Explicit ids, or the accepting nodes when asked for (or when `required`
/// and nothing else was given). `None` means a plain compile.
fn resolve_targets(
    args: &MachineArgs,
    fsm: &Fsm,
    required: bool,
) -> Result<Option<BTreeSet<NodeId>>> {
    if !args.halts_at.is_empty() {
        return Ok(Some(args.halts_at.iter().copied().collect()));
    }
    if !args.accepts && !required {
        return Ok(None);
    }
    if fsm.accepts().is_empty() {
        bail!("machine has no accepting nodes; pass --halts-at");
    }
    Ok(Some(fsm.accepts().clone()))
}

fn compile_for(args: &MachineArgs, required: bool) -> Result<(Loaded, CompiledMachine)> {
    let loaded = load(&args.source)?;
    let compiled = match resolve_targets(args, &loaded.fsm, required)? {
        Some(t) => compile(&loaded.fsm, &t, args.max_len),
        None => compile_plain(&loaded.fsm, args.max_len),
    }
    .context("compiling")?;
    Ok((loaded, compiled))
}

fn ids(set: &BTreeSet<NodeId>) -> String {
    set.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Serialize)]
struct CompileJson<'a> {
    source: &'a str,
    #[serde(rename = "K")]
    k: usize,
    targets: Option<&'a BTreeSet<NodeId>>,
    registers: qfsm_core::RegisterSpec,
    schedule: qfsm_core::Schedule,
    marked: &'a BTreeSet<NodeId>,
    start: NodeId,
    nodes: Vec<NodeJson>,
    arcs: Vec<String>,
    um: Vec<String>,
}

#[derive(Serialize)]
struct NodeJson {
    id: NodeId,
    origin: qfsm_core::Origin,
    reading: bool,
    writing: bool,
    marked: bool,
}

pub fn cmd_compile(args: &CompileArgs) -> Result<Outcome> {
    let (loaded, c) = compile_for(&args.machine, false)?;
    if !args.machine.json {
        return Ok(Outcome::ok(format!(
            "source {}\n{}",
            loaded.source,
            c.to_text()
        )));
    }
    let rev = &c.machine;
    let doc = CompileJson {
        source: &loaded.source,
        k: c.k,
        targets: c.targets.as_ref(),
        registers: c.registers,
        schedule: c.schedule,
        marked: &c.marked,
        start: rev.start(),
        nodes: rev
            .origins()
            .iter()
            .enumerate()
            .map(|(id, origin)| NodeJson {
                id,
                origin: *origin,
                reading: rev.reading().contains(&id),
                writing: rev.writing().contains(&id),
                marked: c.marked.contains(&id),
            })
            .collect(),
        arcs: rev.arcs().iter().map(|a| a.to_string()).collect(),
        um: c.um.to_string().lines().map(str::to_owned).collect(),
    };
    Ok(Outcome::ok(json_line(&doc)?))
}

#[derive(Serialize)]
struct StepJson {
    config: String,
    read: Option<bool>,
    written: Option<bool>,
}

#[derive(Serialize)]
struct RunJson {
    source: String,
    word: Word,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "E")]
    e: usize,
    start: String,
    end: String,
    reads: usize,
    written: Vec<bool>,
    end_marked: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<Vec<StepJson>>,
    round_trip: bool,
}

fn bit_char(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<Outcome> {
    let word: Word = args.word.parse().context("parsing --word")?;
    let k = args.machine.max_len;
    if word.len() > k {
        bail!("word {word} is longer than --max-len {k}");
    }
    let (loaded, c) = compile_for(&args.machine, false)?;
    let width = c.registers.input_width;
    let start = initial_config(&c, encode(&word, k).map_err(|e| anyhow!(e))?);
    let t = c.schedule.steps;
    let forward = run_traced(&c, &start, t, Direction::Forward);
    let end = forward.last().clone();
    let back = run(&c, &end, t, Direction::Backward);
    let round_trip = back == start;
    let written = read_output_trace(&forward)?;
    let end_marked = c.is_marked(end.node);
    let status = if round_trip {
        Status::Success
    } else {
        Status::Mismatch
    };

    if args.machine.json {
        let doc = RunJson {
            source: loaded.source,
            word,
            k,
            t,
            e: c.schedule.eps_run,
            start: start.display(width),
            end: end.display(width),
            reads: forward.reads(),
            written,
            end_marked,
            steps: args.trace.then(|| {
                forward
                    .steps
                    .iter()
                    .map(|s| StepJson {
                        config: s.config.display(width),
                        read: s.effect.read,
                        written: s.effect.written,
                    })
                    .collect()
            }),
            round_trip,
        };
        return Ok(Outcome {
            stdout: json_line(&doc)?,
            status,
        });
    }

    let mut out = String::new();
    writeln!(
        out,
        "run {} word={} K={} T={} E={}",
        loaded.source, word, k, t, c.schedule.eps_run
    )?;
    writeln!(out, "start {}", start.display(width))?;
    if args.trace {
        for (i, s) in forward.steps.iter().enumerate() {
            write!(out, "step {:>3} {}", i + 1, s.config.display(width))?;
            if let Some(b) = s.effect.read {
                write!(out, " read={}", bit_char(b))?;
            }
            if let Some(b) = s.effect.written {
                write!(out, " wrote={}", bit_char(b))?;
            }
            out.push('\n');
        }
    }
    writeln!(
        out,
        "end   {}{}",
        end.display(width),
        if end_marked { " [marked]" } else { "" }
    )?;
    let bits: String = written.iter().map(|&b| bit_char(b)).collect();
    writeln!(
        out,
        "reads {} written {}",
        forward.reads(),
        if bits.is_empty() { "-" } else { &bits }
    )?;
    writeln!(
        out,
        "reverse {}",
        if round_trip {
            "returned to start"
        } else {
            "FAILED to return to start"
        }
    )?;
    Ok(Outcome {
        stdout: out,
        status,
    })
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryJson {
    pub query: QueryHeader,
    pub search: SearchJson,
    pub samples: Vec<SampleJson>,
    pub timing_ms: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryHeader {
    pub source: String,
    pub targets: Vec<NodeId>,
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchJson {
    pub mode: String,
    pub iterations: usize,
    pub marked_mass: f64,
    pub seed: u64,
    /// Present only for bbht searches, where `null` means no solution found.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "present"
    )]
    pub solution: Option<Option<Word>>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Option<Word>>, D::Error> {
    Option::<Word>::deserialize(d).map(Some)
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub word: Option<Word>,
    pub count: usize,
    pub marked: bool,
}

fn word_or_invalid(w: &Option<Word>) -> String {
    w.as_ref()
        .map_or_else(|| "<invalid>".to_owned(), |w| w.to_string())
}

fn render_query(
    source: &str,
    targets: &BTreeSet<NodeId>,
    k: usize,
    r: &QueryResult,
) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "query {source} targets={} K={k}", ids(targets))?;
    writeln!(
        out,
        "search mode={} iterations={} marked_mass={:.6} seed={}",
        r.mode, r.iterations, r.marked_mass, r.seed
    )?;
    if r.mode == SearchMode::Bbht {
        match &r.solution {
            Some(w) => writeln!(out, "solution {w}")?,
            None => writeln!(out, "no solution found")?,
        }
    }
    writeln!(
        out,
        "samples shots={} marked={}",
        r.shots(),
        r.marked_shots()
    )?;
    for s in &r.samples {
        writeln!(
            out,
            "  {:<width$} {:>6}{}",
            word_or_invalid(&s.word),
            s.count,
            if s.marked { "  marked" } else { "" },
            width = k.max(8)
        )?;
    }
    Ok(out)
}

pub fn cmd_query(args: &QueryArgs) -> Result<Outcome> {
    let started = Instant::now();
    let (loaded, c) = compile_for(&args.machine, true)?;
    let targets = c.targets.clone().expect("query compiles with targets");
    let r = search(&c, args.iterations, args.shots, args.seed)?;
    if !args.machine.json {
        return Ok(Outcome::ok(render_query(
            &loaded.source,
            &targets,
            c.k,
            &r,
        )?));
    }
    let doc = QueryJson {
        query: QueryHeader {
            source: loaded.source,
            targets: targets.into_iter().collect(),
            k: c.k,
        },
        search: SearchJson {
            mode: r.mode.to_string(),
            iterations: r.iterations,
            marked_mass: r.marked_mass,
            seed: r.seed,
            solution: (r.mode == SearchMode::Bbht).then(|| r.solution.clone()),
        },
        samples: r
            .samples
            .iter()
            .map(|s| SampleJson {
                word: s.word.clone(),
                count: s.count,
                marked: s.marked,
            })
            .collect(),
        timing_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(Outcome::ok(json_line(&doc)?))
}

#[derive(Serialize)]
struct AmplitudeCheck {
    rounds: usize,
    predicted: f64,
    simulated: f64,
    agrees: bool,
}

#[derive(Serialize)]
struct VerifyJson {
    source: String,
    targets: Vec<NodeId>,
    #[serde(rename = "K")]
    k: usize,
    classical: Vec<Word>,
    quantum: Vec<Option<Word>>,
    sets_equal: bool,
    amplitude: Option<AmplitudeCheck>,
    pass: bool,
}

/// Tolerance for simulated versus closed-form marked mass.
pub const MASS_TOLERANCE: f64 = 1e-9;

fn amplitude_check(
    c: &CompiledMachine,
    marked: u64,
    mode: SearchMode,
) -> Result<Option<AmplitudeCheck>> {
    let n = c.search_space();
    let rounds = match mode {
        SearchMode::Fixed(j) => j,
        SearchMode::Auto => match grover_iterations_for(n, marked) {
            Ok(j) => j,
            Err(_) => return Ok(None),
        },
        SearchMode::Bbht => return Ok(None),
    };
    let mut state = init_superposition(c)?;
    for _ in 0..rounds {
        state = grover_round(state, c)?;
    }
    let simulated = evolved_marked_mass(&state, c);
    let predicted = success_probability(n, marked, rounds);
    Ok(Some(AmplitudeCheck {
        rounds,
        predicted,
        simulated,
        agrees: (predicted - simulated).abs() <= MASS_TOLERANCE,
    }))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome> {
    let (loaded, c) = compile_for(&args.machine, true)?;
    let targets = c.targets.clone().expect("verify compiles with targets");
    let classical = halting_set(&loaded.fsm, &targets, c.k)?;
    let quantum = exactly_marked_inputs(&c);
    let sets_equal = quantum.len() == classical.len()
        && quantum
            .iter()
            .zip(&classical)
            .all(|(q, w)| q.as_ref() == Some(w));
    let amplitude = amplitude_check(&c, classical.len() as u64, args.iterations)?;
    let pass = sets_equal && amplitude.as_ref().is_none_or(|a| a.agrees);
    let status = if pass {
        Status::Success
    } else {
        Status::Mismatch
    };

    if args.machine.json {
        let doc = VerifyJson {
            source: loaded.source,
            targets: targets.into_iter().collect(),
            k: c.k,
            classical: classical.into_iter().collect(),
            quantum: quantum.into_iter().collect(),
            sets_equal,
            amplitude,
            pass,
        };
        return Ok(Outcome {
            stdout: json_line(&doc)?,
            status,
        });
    }

    let mut out = String::new();
    writeln!(
        out,
        "verify {} targets={} K={}",
        loaded.source,
        ids(&targets),
        c.k
    )?;
    writeln!(out, "classical {} words", classical.len())?;
    writeln!(out, "oracle    {} inputs", quantum.len())?;
    if !sets_equal {
        for w in classical
            .iter()
            .filter(|w| !quantum.contains(&Some((*w).clone())))
        {
            writeln!(out, "  missing from oracle: {w}")?;
        }
        for q in quantum
            .iter()
            .filter(|q| q.as_ref().is_none_or(|w| !classical.contains(w)))
        {
            writeln!(out, "  spurious in oracle: {}", word_or_invalid(q))?;
        }
    }
    writeln!(out, "sets {}", if sets_equal { "equal" } else { "DIFFER" })?;
    match &amplitude {
        Some(a) => writeln!(
            out,
            "amplitude rounds={} predicted={:.12} simulated={:.12} {}",
            a.rounds,
            a.predicted,
            a.simulated,
            if a.agrees { "ok" } else { "MISMATCH" }
        )?,
        None => writeln!(out, "amplitude skipped")?,
    }
    writeln!(out, "{}", if pass { "PASS" } else { "FAIL" })?;
    Ok(Outcome {
        stdout: out,
        status,
    })
}

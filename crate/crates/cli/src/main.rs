//! Command-line front end: repair, synthesize, check, simulate, metrics.
//!
//! Exit codes: 0 success, 2 parse/input error, 3 precondition violation,
//! 4 resource bound exceeded (state limits, search budgets, simulation
//! step caps). Output files are only written after the analysis succeeds,
//! so a failing run never leaves partial artifacts behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fcrepair_core::conformance::precision;
use fcrepair_core::event_log::{parse_traces_text, parse_xes, serialize_traces_text};
use fcrepair_core::pnml::{parse_pnml, serialize_pnml};
use fcrepair_core::region::synthesize;
use fcrepair_core::repair::{repair, ProblemStatus, RepairOptions, RepairReport};
use fcrepair_core::simulate::{simulate, DEFAULT_MAX_STEPS};
use fcrepair_core::transition_system::minimal_ts;
use fcrepair_core::{EventLog, NetSystem, Result, DEFAULT_MAX_STATES};

#[derive(Parser)]
#[command(
    name = "fcrepair",
    version,
    about = "Repair free-choice workflow nets against an event log via region synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect false free-choice relations and insert constraint places.
    Repair(RepairArgs),
    /// Synthesize a net from the minimal log automaton alone.
    Synthesize(SynthesizeArgs),
    /// Report structural and behavioral checks of a net.
    Check(CheckArgs),
    /// Generate an event log by random playout of a net.
    Simulate(SimulateArgs),
    /// Print conformance metrics of a net against a log.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct CommonLogArgs {
    /// Event log: `.xes` files are parsed as XES, anything else as
    /// comma-separated trace text (one trace per line, `Nx ` prefixes for
    /// multiplicities).
    #[arg(long)]
    log: PathBuf,
    /// Keep only the k most frequent distinct traces before any analysis.
    #[arg(long, value_name = "K")]
    top_k: Option<usize>,
}

#[derive(Args)]
struct RepairArgs {
    #[command(flatten)]
    log: CommonLogArgs,
    /// Input net (PNML).
    #[arg(long)]
    net: PathBuf,
    /// Where to write the repaired net (PNML).
    #[arg(long)]
    out: PathBuf,
    /// Where to write the textual repair report (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Node budget per event/state separation problem.
    #[arg(long, default_value_t = fcrepair_core::region::DEFAULT_ESSP_BUDGET)]
    essp_budget: usize,
    /// Skip the before/after conformance metrics.
    #[arg(long)]
    no_metrics: bool,
    /// Also evaluate the soundness-preservation precondition and report
    /// the prediction.
    #[arg(long = "theorem4-check")]
    theorem4_check: bool,
    /// Write Graphviz views (log automaton, repaired state space) here.
    #[arg(long, value_name = "DIR")]
    dot_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    log: CommonLogArgs,
    /// Where to write the synthesized net (PNML).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Write a Graphviz view of the log automaton here.
    #[arg(long, value_name = "DIR")]
    dot_out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Net to check (PNML).
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Exit nonzero when the net is unsound (otherwise the exit code only
    /// reflects whether the checks could be run).
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Net to play out (PNML).
    #[arg(long)]
    net: PathBuf,
    /// Number of traces to generate.
    #[arg(long)]
    traces: usize,
    /// RNG seed; equal seeds give byte-identical logs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-trace firing cap before the attempt is abandoned.
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: usize,
    /// Output path for the generated trace-text log (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    log: CommonLogArgs,
    /// Net to measure (PNML).
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Repair(args) => cmd_repair(args),
        Command::Synthesize(args) => cmd_synthesize(args),
        Command::Check(args) => cmd_check(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_log(args: &CommonLogArgs) -> Result<EventLog> {
    let bytes = fs::read(&args.log)?;
    let log = if args.log.extension().is_some_and(|e| e == "xes") {
        parse_xes(&bytes)?
    } else {
        parse_traces_text(&bytes)?
    };
    Ok(match args.top_k {
        Some(k) => log.filter_top_k(k),
        None => log,
    })
}

fn load_net(path: &Path) -> Result<NetSystem> {
    parse_pnml(&fs::read(path)?)
}

fn write_dot(dir: &Path, name: &str, dot: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), dot)?;
    Ok(())
}

fn render_report(report: &RepairReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let push = |out: &mut String, line: String| {
        let _ = writeln!(out, "{line}");
    };
    push(&mut out, format!("problems={}", report.problems.len()));
    for (problem, status) in &report.problems {
        let status = match status {
            ProblemStatus::Solved(regions) => format!("solved ({} region(s))", regions.len()),
            ProblemStatus::Unsolved => "unsolved".into(),
            ProblemStatus::BudgetExhausted => "budget-exhausted".into(),
        };
        push(&mut out, format!(
            "problem state=s{} forbid={} witness={} status={status}",
            problem.state, problem.forbidden_event, problem.witness_event
        ));
    }
    push(&mut out, format!("added_places={}", report.added_places.len()));
    for place in &report.added_places {
        let join = |set: &std::collections::BTreeSet<fcrepair_core::EventLabel>| {
            set.iter()
                .map(|e| e.as_str())
                .collect::<Vec<_>>()
                .join("|")
        };
        push(&mut out, format!(
            "place id={} enter={} exit={} initial={} extends_finals={}",
            place.place_id,
            join(&place.entering),
            join(&place.exiting),
            place.marked_initial,
            place.finals_extended
        ));
    }
    if !report.labels_missing_from_log.is_empty() {
        let missing: Vec<&str> = report
            .labels_missing_from_log
            .iter()
            .map(|e| e.as_str())
            .collect();
        push(&mut out, format!("labels_missing_from_log={}", missing.join("|")));
    }
    if let Some(before) = &report.metrics_before {
        push(&mut out, "[metrics_before]".into());
        out.push_str(&before.to_kv());
    }
    if let Some(after) = &report.metrics_after {
        push(&mut out, "[metrics_after]".into());
        out.push_str(&after.to_kv());
    }
    if let Some(predicted) = report.soundness_predicted {
        push(&mut out, format!("soundness_predicted={predicted}"));
    }
    push(&mut out, format!("wall_time_ms={}", report.wall_time.as_millis()));
    out
}

fn cmd_repair(args: RepairArgs) -> Result<ExitCode> {
    let log = load_log(&args.log)?;
    let sys = load_net(&args.net)?;
    let options = RepairOptions {
        essp_budget: args.essp_budget,
        max_states: args.max_states,
        compute_metrics: !args.no_metrics,
        theorem_check: args.theorem4_check,
    };
    let (repaired, report) = repair(&sys, &log, &options)?;

    // analysis done; only now touch the filesystem
    fs::write(&args.out, serialize_pnml(&repaired))?;
    let rendered = render_report(&report);
    match &args.report {
        Some(path) => fs::write(path, &rendered)?,
        None => print!("{rendered}"),
    }
    if let Some(dir) = &args.dot_out {
        write_dot(dir, "log_automaton.dot", &minimal_ts(&log).to_dot())?;
        let rg = repaired.reachability_graph(args.max_states)?;
        write_dot(dir, "repaired_state_space.dot", &rg.ts.to_dot())?;
    }
    // unsolved problems are reported, not fatal
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthesize(args: SynthesizeArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let log = load_log(&args.log)?;
    let ts = minimal_ts(&log);
    let sys = synthesize(&ts, args.max_states)?;
    fs::write(&args.out, serialize_pnml(&sys))?;
    if let Some(dir) = &args.dot_out {
        write_dot(dir, "log_automaton.dot", &ts.to_dot())?;
    }
    println!("places={}", sys.net.num_places());
    println!("transitions={}", sys.net.num_transitions());
    println!("wall_time_ms={}", start.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let sys = load_net(&args.net)?;
    let workflow = sys.net.is_workflow_net();
    println!("workflow_net={}", workflow.ok);
    for diag in &workflow.diagnostics {
        println!("workflow_diagnostic={diag}");
    }
    let fc = sys.net.is_free_choice();
    println!("free_choice={}", fc.ok);
    for (a, b) in &fc.violations {
        println!("free_choice_violation={a}|{b}");
    }
    let rg = sys.reachability_graph(args.max_states)?;
    println!("safe={}", rg.safe);
    println!("reachable_markings={}", rg.ts.num_states());
    let mut sound = true;
    if workflow.ok {
        let report = sys.check_soundness(args.max_states)?;
        sound = report.is_sound;
        println!("sound={}", report.is_sound);
        println!(
            "every_marking_reaches_some_final={}",
            report.every_marking_reaches_some_final
        );
        for m in &report.improper_completions {
            println!("improper_completion={}", sys.describe_marking(m));
        }
        for m in &report.unreachable_final_from {
            println!("no_completion_from={}", sys.describe_marking(m));
        }
        for t in &report.dead_transitions {
            println!("dead_transition={t}");
        }
    } else {
        println!("sound=not-checked");
    }
    if args.strict && !(workflow.ok && sound) {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode> {
    let sys = load_net(&args.net)?;
    let log = simulate(&sys, args.traces, args.seed, args.max_steps)?;
    let text = serialize_traces_text(&log);
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_metrics(args: MetricsArgs) -> Result<ExitCode> {
    let start = Instant::now();
    let log = load_log(&args.log)?;
    let sys = load_net(&args.net)?;
    let summary = precision(&sys, &log, args.max_states)?;
    print!("{}", summary.to_kv());
    let stats = log.stats();
    println!("log_traces={}", stats.trace_occurrences);
    println!("log_variants={}", log.distinct_count());
    println!("log_events={}", stats.event_occurrences);
    println!("log_unique_events={}", stats.unique_events);
    println!("net_places={}", sys.net.num_places());
    println!("net_transitions={}", sys.net.num_transitions());
    println!("wall_time_ms={}", start.elapsed().as_millis());
    Ok(ExitCode::SUCCESS)
}

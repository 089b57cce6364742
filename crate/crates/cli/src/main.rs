//! `codedcast`: delivery times, bit-level traces and Monte Carlo sweeps.
//!
//! Exit codes: 0 success, 1 a verification suite failed, 2 invalid input,
//! 3 a user failed to decode, 4 I/O failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use codedcast::delivery::{
    build_groups, delivery_plan, schedule_for, simulate_decode, DeliverySchedule,
};
use codedcast::experiments::{
    run_sweep, sample_channel, verify_properties, TrialConfig, VerificationReport, GAP_BOUND,
};
use codedcast::model::{
    file_label, parse_cache_size, validate_params, ChannelState, PlacementMode, Rational,
    RequestVector, Scheme, SystemParams,
};
use codedcast::placement::{centralized_place, decentralized_place, Library, PlacementState};
use codedcast::Error;

#[derive(Parser)]
#[command(
    name = "codedcast",
    version,
    about = "Coded caching delivery over a degraded Gaussian broadcast channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print one delivery schedule as JSON.
    Compute(ComputeArgs),
    /// Place, encode and decode a concrete library, printing every message.
    Trace(TraceArgs),
    /// Monte Carlo mean delivery times over a cache-size grid, as CSV.
    Sweep(SweepArgs),
    /// Check the scheme inequalities, equality cases and gap bound.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Number of users.
    #[arg(short = 'K', long = "users")]
    users: usize,
    /// Number of files.
    #[arg(short = 'N', long = "files")]
    files: usize,
    /// Cache size in files: integer, decimal or fraction such as 4/3.
    #[arg(short = 'M', long = "cache")]
    cache: String,
    #[arg(long, default_value = "centralized")]
    mode: PlacementMode,
    #[arg(long, default_value = "orthogonal")]
    scheme: Scheme,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Channel gains, one per user, any order.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "seed",
        required_unless_present = "seed"
    )]
    gains: Option<Vec<f64>>,
    /// Draw Rayleigh-faded gains from this seed instead.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Bits per file.
    #[arg(long = "file-bits")]
    file_bits: usize,
    /// Channel gains, one per user, any order (default: all 1).
    #[arg(long, value_delimiter = ',')]
    gains: Option<Vec<f64>>,
    /// Requested file per user (1-based, same order as the gains; default: user k wants file k).
    #[arg(long, value_delimiter = ',')]
    requests: Option<Vec<usize>>,
    /// Seed for the library contents and the decentralized placement.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(short = 'K', long = "users", default_value_t = 8)]
    users: usize,
    #[arg(short = 'N', long = "files", default_value_t = 8)]
    files: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: u64,
    /// Cache sizes to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<String>>,
    /// Fixed gains for every trial instead of Rayleigh draws.
    #[arg(long, value_delimiter = ',')]
    gains: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Restrict to one placement mode.
    #[arg(long)]
    mode: Option<PlacementMode>,
    /// Restrict to one delivery scheme.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// CSV destination (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Destination for the decentralized/centralized gap rows.
    #[arg(long = "gap-out")]
    gap_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "gap-bound", hide = true, default_value_t = GAP_BOUND)]
    gap_bound: f64,
}

enum Failure {
    Invalid(String),
    Decode(String),
    Io(String),
    Verify,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify => 1,
            Failure::Invalid(_) => 2,
            Failure::Decode(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::DecodeFailure { .. } => Failure::Decode(e.to_string()),
            Error::NonIntegerT { .. } => Failure::Invalid(format!("invalid -M: {e}")),
            Error::Divisibility { .. } => Failure::Invalid(format!("invalid --file-bits: {e}")),
            Error::ZeroGain { .. } => Failure::Invalid(format!("invalid --gains: {e}")),
            Error::Trial { ref source, .. } if matches!(**source, Error::DecodeFailure { .. }) => {
                Failure::Decode(e.to_string())
            }
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn invalid(field: &str, reason: impl std::fmt::Display) -> Failure {
    Failure::Invalid(format!("invalid {field}: {reason}"))
}

fn system_params(args: &SystemArgs) -> CliResult<SystemParams> {
    let cache = parse_cache_size(&args.cache)?;
    let p = SystemParams {
        users: args.users,
        files: args.files,
        cache,
    };
    Ok(validate_params(&p, args.mode)?)
}

fn channel(users: usize, gains: Option<&[f64]>, seed: Option<u64>) -> CliResult<ChannelState> {
    match (gains, seed) {
        (Some(g), _) => {
            if g.len() != users {
                return Err(invalid(
                    "--gains",
                    format!("expected K = {users} values, found {}", g.len()),
                ));
            }
            Ok(ChannelState::new(g.to_vec())?)
        }
        (None, Some(seed)) => Ok(sample_channel(users, seed)),
        (None, None) => Ok(ChannelState::uniform(users, 1.0)?),
    }
}

fn one_based(order: &[usize]) -> Vec<usize> {
    order.iter().map(|i| i + 1).collect()
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn cmd_compute(args: &ComputeArgs) -> CliResult<()> {
    let params = system_params(&args.system)?;
    let ch = channel(params.users, args.gains.as_deref(), args.seed)?;
    let mut schedule = schedule_for(&params, args.system.mode, args.system.scheme, &ch)?;
    schedule.attach_sets(&build_groups(&params, args.system.mode)?);

    let mut json = serde_json::to_value(&schedule).expect("schedule serializes");
    let obj = json.as_object_mut().expect("schedule is an object");
    obj.insert(
        "mode".into(),
        serde_json::to_value(args.system.mode).expect("serializes"),
    );
    obj.insert(
        "gains".into(),
        serde_json::to_value(ch.gains()).expect("serializes"),
    );
    obj.insert(
        "permutation".into(),
        serde_json::to_value(one_based(ch.original_order())).expect("serializes"),
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&json).expect("serializes")
    );
    Ok(())
}

fn trace_text(
    params: &SystemParams,
    mode: PlacementMode,
    schedule: &DeliverySchedule,
    placement: &PlacementState,
    library: &Library,
    requests: &RequestVector,
    ch: &ChannelState,
) -> CliResult<String> {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        "{mode} placement, {} delivery: K={} N={} M={} F={}",
        schedule.scheme,
        params.users,
        params.files,
        params.cache,
        placement.file_bits()
    );
    let gains: Vec<String> = ch.gains().iter().map(|g| g.to_string()).collect();
    let _ = writeln!(w, "gains, weakest first: {}", gains.join(", "));
    let order: Vec<String> = one_based(ch.original_order())
        .iter()
        .map(|i| i.to_string())
        .collect();
    let _ = writeln!(w, "user i is input position: {}", order.join(", "));
    let demands: Vec<String> = (0..params.users)
        .map(|u| format!("{}->{}", u + 1, file_label(requests.file_of(u))))
        .collect();
    let _ = writeln!(w, "requests: {}", demands.join(" "));

    let plan = delivery_plan(schedule, placement, library, requests)?;
    if plan.iter().all(|g| g.messages.is_empty()) {
        let _ = writeln!(w, "no transmission required");
    }
    for (entry, group) in schedule.entries.iter().zip(&plan) {
        let symbols: Vec<String> = group.messages.iter().map(|m| m.symbol()).collect();
        let _ = writeln!(
            w,
            "phase {}: {} message(s), rate {:.6}, duration {:.6}: {}",
            group.group,
            group.messages.len(),
            entry.rate,
            entry.duration,
            symbols.join("; ")
        );
    }
    let _ = writeln!(w, "total time {:.12}", schedule.total_time);

    let report = simulate_decode(schedule, placement, library, requests)?;
    for u in &report.users {
        let _ = writeln!(
            w,
            "user {} ({}): {} bits from cache, {} bits decoded from [{}], {} discarded",
            u.user + 1,
            file_label(u.file),
            u.from_cache,
            u.recovered_bits,
            u.consumed.join(", "),
            u.discarded
        );
    }
    let _ = writeln!(
        w,
        "all {} users decoded ({} messages, {} bits)",
        report.users.len(),
        report.messages_sent,
        report.bits_sent
    );
    Ok(out)
}

fn cmd_trace(args: &TraceArgs) -> CliResult<()> {
    let mode = args.system.mode;
    let params = system_params(&args.system)?;
    let seed = match (mode, args.seed) {
        (_, Some(s)) => s,
        (PlacementMode::Centralized, None) => 0,
        (PlacementMode::Decentralized, None) => {
            return Err(invalid(
                "--seed",
                "decentralized placement is random and needs an explicit seed",
            ))
        }
    };
    let ch = channel(params.users, args.gains.as_deref(), None)?;
    let requests = match &args.requests {
        Some(r) => RequestVector::new(&params, r.clone())?.to_gain_order(&ch)?,
        None => RequestVector::distinct(&params),
    };
    let placement = match mode {
        PlacementMode::Centralized => centralized_place(&params, args.file_bits)?,
        PlacementMode::Decentralized => decentralized_place(&params, args.file_bits, seed)?,
    };
    for warning in placement.warnings() {
        eprintln!("warning: {warning}");
    }
    let library = Library::random(params.files, args.file_bits, seed);
    let schedule = schedule_for(&params, mode, args.system.scheme, &ch)?;
    let text = trace_text(
        &params, mode, &schedule, &placement, &library, &requests, &ch,
    )?;
    print!("{text}");
    Ok(())
}

fn trial_config(
    args: &ExperimentArgs,
    default_grid: impl FnOnce(usize) -> Vec<Rational>,
) -> CliResult<TrialConfig> {
    if args.trials == 0 {
        return Err(invalid("--trials", "must be at least 1"));
    }
    let mut cfg = TrialConfig::new(args.users, args.files, args.trials, args.seed);
    cfg.cache_grid = match &args.grid {
        Some(items) => items
            .iter()
            .map(|m| parse_cache_size(m))
            .collect::<Result<_, _>>()?,
        None => default_grid(args.files),
    };
    if let Some(g) = &args.gains {
        if g.len() != args.users {
            return Err(invalid(
                "--gains",
                format!("expected K = {} values, found {}", args.users, g.len()),
            ));
        }
        ChannelState::new(g.clone())?;
        cfg.fixed_gains = Some(g.clone());
    }
    Ok(cfg)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let users = args.common.users;
    let mut cfg = trial_config(&args.common, |files| {
        (0..=users)
            .map(|j| Rational::new((j * files) as i64, users as i64))
            .collect()
    })?;
    if let Some(m) = args.mode {
        cfg.modes = vec![m];
    }
    if let Some(s) = args.scheme {
        cfg.schemes = vec![s];
    }
    let result = run_sweep(&cfg)?;
    match &args.out {
        Some(path) => write_file(path, &result.to_csv())?,
        None => print!("{}", result.to_csv()),
    }
    if let Some(path) = &args.gap_out {
        write_file(path, &result.gaps_to_csv())?;
    }
    Ok(())
}

fn report_text(report: &VerificationReport) -> String {
    let mut out = String::new();
    for s in &report.suites {
        let status = if s.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{status} {}: {} checks, {} failed",
            s.name, s.checks, s.failed
        );
        for ce in &s.counterexamples {
            let seed = ce
                .seed
                .map_or_else(|| "fixed".to_string(), |s| s.to_string());
            let _ = writeln!(
                out,
                "  seed {seed}, M={}, {}: {}",
                ce.cache, ce.mode, ce.detail
            );
        }
    }
    let verdict = if report.passed() {
        "all suites passed"
    } else {
        "verification failed"
    };
    let _ = writeln!(out, "{verdict}");
    out
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<()> {
    let mut cfg = trial_config(&args.common, |files| {
        (0..=4)
            .map(|j| Rational::new((j * files) as i64, 4))
            .collect()
    })?;
    if !(args.gap_bound.is_finite() && args.gap_bound > 0.0) {
        return Err(invalid("--gap-bound", "must be a positive number"));
    }
    cfg.gap_bound = args.gap_bound;
    let report = verify_properties(&cfg)?;
    print!("{}", report_text(&report));
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(path, &json)?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compute(a) => cmd_compute(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(m) | Failure::Decode(m) | Failure::Io(m) => {
                    eprintln!("error: {m}")
                }
                Failure::Verify => {}
            }
            ExitCode::from(f.code())
        }
    }
}

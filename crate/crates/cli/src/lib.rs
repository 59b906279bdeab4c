//! Command-line front end for the `sda_netlab` simulator.
//!
//! Every subcommand reads one JSON scenario config, runs the matching
//! experiment and writes CSV/JSON artifacts into the output directory.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;
use serde_json::Value;

use sda_netlab::constellation::write_snapshot_csv;
use sda_netlab::experiments::{
    compare_prepared, load_snapshot, simulate_prepared, AttackOutcome, ExperimentError, SweepPoint,
};
use sda_netlab::{
    actuator_sweep, attack_scenario, summarize, ArchitectureMode, EllipsoidModel, MetricsSummary, PreparedScenario,
    ScenarioConfig,
};

pub use config::{resolved_json, validate_config, ConfigErrors, ConfigIssue};

pub const THREADS_ENV: &str = "SDA_NETLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sda-netlab", version, about = "Latency simulator for SDA network architectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured constellation to snapshot.csv
    Generate(RunArgs),
    /// Run one architecture; writes report.csv and summary.json
    Simulate(RunArgs),
    /// On-orbit latency against actuator fraction; writes sweep.csv and summary.json
    Sweep(RunArgs),
    /// Baseline vs. attacked run; writes attack.json, report.csv and baseline_report.csv
    Attack(RunArgs),
    /// Downhaul vs. on-orbit on the same snapshot; writes compare.csv and summary.json
    Compare(RunArgs),
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// Scenario config (JSON)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism)
    #[arg(long, env = THREADS_ENV, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Override the config's architecture mode
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ArchitectureMode>,
    /// Draw a fresh actuator set for every sweep point
    #[arg(long)]
    independent_draws: bool,
    /// Only print errors
    #[arg(long)]
    quiet: bool,
}

fn parse_mode(s: &str) -> Result<ArchitectureMode, String> {
    s.parse()
}

#[derive(Debug)]
enum Failure {
    /// Bad arguments, config or input data: exit 1.
    Input(String),
    /// Anything that went wrong while running or writing: exit 2.
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 1,
            Self::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(err: ExperimentError) -> Self {
        match err {
            ExperimentError::Io { .. } | ExperimentError::Routing(_) => Self::Runtime(err.to_string()),
            _ => Self::Input(err.to_string()),
        }
    }
}

/// Parse `argv` (program name first), run the subcommand and return the
/// process exit code: 0 on success, 1 for argument/config/input errors,
/// 2 for runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let (name, args) = match &cli.command {
        Command::Generate(a) => ("generate", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Attack(a) => ("attack", a),
        Command::Compare(a) => ("compare", a),
    };
    init_logging(args.quiet);

    let result = load_config(args).and_then(|cfg| {
        let job = || execute(&cli.command, &cfg, args);
        match args.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(usize::from(n))
                .build()
                .map_err(|e| Failure::Runtime(format!("cannot start thread pool: {e}")))?
                .install(job),
            None => job(),
        }
    });
    match result {
        Ok(line) => {
            if !args.quiet {
                println!("{name}: {line}");
            }
            0
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message().trim_end());
            failure.exit_code()
        }
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("SDA_NETLAB_LOG")
        .format_timestamp(None)
        .try_init();
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut cfg = validate_config(&text, base).map_err(|e| Failure::Input(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode {
        if mode.is_downhaul() && cfg.stations_csv.is_none() {
            return Err(Failure::Input(format!("`stations_csv`: required for mode `{mode}`")));
        }
        cfg.mode = mode;
    }
    cfg.independent_draws |= args.independent_draws;
    Ok(cfg)
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = out.join(name);
    std::fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    write(out, name, &text)
}

fn prepare(cfg: &ScenarioConfig) -> Result<PreparedScenario, Failure> {
    let started = Instant::now();
    let prep = PreparedScenario::load(cfg)?;
    info!(
        "{}: {} satellites, {} stations, {} satellite links, {} station links ({:.2?})",
        prep.snapshot.label,
        prep.snapshot.len(),
        prep.stations.len(),
        prep.graph.sat_links().len(),
        prep.graph.station_links().len(),
        started.elapsed()
    );
    Ok(prep)
}

#[derive(Serialize)]
struct SnapshotInfo {
    label: String,
    satellite_count: usize,
    station_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    actuator_count: Option<usize>,
}

impl SnapshotInfo {
    fn new(prep: &PreparedScenario, actuator_count: Option<usize>) -> Self {
        Self {
            label: prep.snapshot.label.clone(),
            satellite_count: prep.snapshot.len(),
            station_count: prep.stations.len(),
            actuator_count,
        }
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    command: &'static str,
    config: Value,
    mode: ArchitectureMode,
    snapshot: SnapshotInfo,
    summary: &'a MetricsSummary,
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    command: &'static str,
    config: Value,
    snapshot: SnapshotInfo,
    points: &'a [SweepPoint],
}

#[derive(Serialize)]
struct AttackOutput<'a> {
    command: &'static str,
    config: Value,
    mode: ArchitectureMode,
    snapshot: SnapshotInfo,
    #[serde(flatten)]
    outcome: &'a AttackOutcome,
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    command: &'static str,
    config: Value,
    snapshot: SnapshotInfo,
    downhaul_mode: ArchitectureMode,
    downhaul: &'a MetricsSummary,
    onorbit: &'a MetricsSummary,
}

fn fmt_ms(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3} ms"))
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `fraction,mean_ms,median_ms,p95_ms,unreachable`; statistics of a point
/// with no reachable satellite are left empty.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("fraction,mean_ms,median_ms,p95_ms,unreachable\n");
    for p in points {
        let s = &p.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.fraction,
            csv_opt(s.mean_ms),
            csv_opt(s.median_ms),
            csv_opt(s.p95_ms),
            s.unreachable_count
        );
    }
    out
}

fn execute(command: &Command, cfg: &ScenarioConfig, args: &RunArgs) -> Result<String, Failure> {
    let out = args.out.as_path();
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let echo = resolved_json(cfg);

    match command {
        Command::Generate(_) => {
            let snapshot = load_snapshot(&cfg.source, &EllipsoidModel::wgs84())?;
            write(out, "snapshot.csv", &write_snapshot_csv(&snapshot))?;
            Ok(format!("{} satellites written", snapshot.len()))
        }
        Command::Simulate(_) => {
            let prep = prepare(cfg)?;
            let report = simulate_prepared(&prep, cfg)?;
            let summary = summarize(&report)?;
            write(out, "report.csv", &report.to_csv())?;
            let actuators = cfg.actuators.count_for(prep.snapshot.len());
            write_json(
                out,
                "summary.json",
                &SimulateOutput {
                    command: "simulate",
                    config: echo,
                    mode: cfg.mode,
                    snapshot: SnapshotInfo::new(&prep, Some(actuators)),
                    summary: &summary,
                },
            )?;
            Ok(format!(
                "{} mean {}, {} of {} unreachable",
                cfg.mode,
                fmt_ms(summary.mean_ms),
                summary.unreachable_count,
                summary.satellite_count
            ))
        }
        Command::Sweep(_) => {
            let prep = prepare(cfg)?;
            let overlay = cfg.overlay.as_ref();
            let penalty = cfg.reroute_penalty_ms + overlay.map_or(0.0, |o| o.reroute_penalty_ms);
            let points = actuator_sweep(&prep, &cfg.sweep_fractions, cfg.seed, cfg.independent_draws, overlay, penalty)?;
            write(out, "sweep.csv", &sweep_csv(&points))?;
            write_json(
                out,
                "summary.json",
                &SweepOutput {
                    command: "sweep",
                    config: echo,
                    snapshot: SnapshotInfo::new(&prep, None),
                    points: &points,
                },
            )?;
            Ok(format!("{} points", points.len()))
        }
        Command::Attack(_) => {
            let overlay = cfg
                .overlay
                .as_ref()
                .ok_or_else(|| Failure::Input("`overlay`: required by the attack command".into()))?;
            let prep = prepare(cfg)?;
            let (outcome, baseline, attacked) = attack_scenario(&prep, cfg, overlay)?;
            write(out, "report.csv", &attacked.to_csv())?;
            write(out, "baseline_report.csv", &baseline.to_csv())?;
            let actuators = cfg.actuators.count_for(prep.snapshot.len());
            write_json(
                out,
                "attack.json",
                &AttackOutput {
                    command: "attack",
                    config: echo,
                    mode: cfg.mode,
                    snapshot: SnapshotInfo::new(&prep, Some(actuators)),
                    outcome: &outcome,
                },
            )?;
            Ok(format!(
                "{} delta mean {}, availability loss {}",
                cfg.mode,
                fmt_ms(outcome.delta_mean_ms),
                outcome.availability_loss
            ))
        }
        Command::Compare(_) => {
            if cfg.stations_csv.is_none() {
                return Err(Failure::Input("`stations_csv`: required by the compare command".into()));
            }
            let prep = prepare(cfg)?;
            let cmp = compare_prepared(&prep, cfg, cfg)?;
            write(out, "compare.csv", &cmp.paired_csv())?;
            let downhaul_mode = cmp.downhaul.mode;
            write_json(
                out,
                "summary.json",
                &CompareOutput {
                    command: "compare",
                    config: echo,
                    snapshot: SnapshotInfo::new(&prep, Some(cfg.actuators.count_for(prep.snapshot.len()))),
                    downhaul_mode,
                    downhaul: &cmp.downhaul_summary,
                    onorbit: &cmp.onorbit_summary,
                },
            )?;
            Ok(format!(
                "{downhaul_mode} mean {}, onorbit mean {}",
                fmt_ms(cmp.downhaul_summary.mean_ms),
                fmt_ms(cmp.onorbit_summary.mean_ms)
            ))
        }
    }
}

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;

use shield_core::advisory::{build_risk_profile, HourSelector};
use shield_core::analytics::correlation_report;
use shield_core::encounter::EncounterMatrices;
use shield_core::simulator::{run_with_log, write_event_log, SimConfig};
use shield_core::trace_io::{
    generate_synthetic_world, parse_crime_log, parse_density_series, parse_encounter_trace,
    SyntheticWorldConfig,
};
use shield_core::trust::{ServiceTag, TrustMatrix, TrustParams};
use shield_core::NodeId;

#[derive(Debug, Parser)]
#[command(
    name = "shield",
    version,
    about = "Proximity emergency alert simulator and toolkit"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world and write its four CSV files.
    GenTraces(GenTracesArgs),
    /// Run the simulator and write a metrics report.
    Simulate(SimulateArgs),
    /// Print one node's trust table.
    Trust(TrustArgs),
    /// Rank locations by crime risk.
    Rank(RankArgs),
    /// Correlate crime and user density by hour of day.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
struct GenTracesArgs {
    /// World config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Batch of seeds, `A..B` or `A..=B`; outputs become `<stem>.<seed>.<ext>`.
    #[arg(long, value_parser = parse_seed_range)]
    seeds: Option<SeedRange>,
    /// Metrics report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Event log CSV.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrustArgs {
    #[arg(long)]
    encounters: PathBuf,
    #[arg(long)]
    node: u64,
    #[arg(long, default_value_t = TrustParams::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = TrustParams::default().friend_threshold)]
    friend: f64,
    #[arg(long, default_value_t = TrustParams::default().acquaintance_threshold)]
    acquaintance: f64,
    /// CSV `node,tag` of service providers.
    #[arg(long)]
    services: Option<PathBuf>,
    /// Writes the pairwise encounter matrices as CSV.
    #[arg(long)]
    matrix_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    crime: PathBuf,
    /// Rank by a single hour instead of the daily mean.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..24))]
    hour: Option<u8>,
    /// Writes the full risk profile as JSON.
    #[arg(long)]
    profile_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    crime: PathBuf,
    #[arg(long)]
    density: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Adds a rank correlation to the report.
    #[arg(long)]
    spearman: bool,
}

#[derive(Debug, Clone, Copy)]
struct SeedRange {
    start: u64,
    end: u64,
}

fn parse_seed_range(s: &str) -> Result<SeedRange, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        return Err("expected A..B or A..=B".into());
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("bad start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("bad end: {e}"))?;
    let end = if inclusive {
        b.checked_add(1).ok_or("range end overflows")?
    } else {
        b
    };
    if end <= a {
        return Err("empty seed range".into());
    }
    Ok(SeedRange { start: a, end })
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] shield_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Data(String),
}

type CliResult<T = ()> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.into(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })
}

fn write_text(path: &Path, text: &str) -> CliResult {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn gen_traces(args: &GenTracesArgs) -> CliResult {
    let cfg: SyntheticWorldConfig = read_json(&args.config)?;
    let world = generate_synthetic_world(&cfg)?;
    world.write_to_dir(&args.out)?;
    info!(
        "wrote {} encounters and {} crimes to {}",
        world.encounters.len(),
        world.crimes.len(),
        args.out.display()
    );
    Ok(())
}

fn with_seed(path: &Path, seed: u64) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{seed}"),
    };
    path.with_file_name(name)
}

fn simulate_one(cfg: &SimConfig, out: &Path, events: Option<&Path>) -> CliResult {
    let output = run_with_log(cfg)?;
    write_text(out, &output.report.to_json())?;
    if let Some(path) = events {
        let mut w = create(path)?;
        write_event_log(&mut w, &output.log)?;
        w.flush().map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?;
    }
    info!(
        "seed {}: availability {:.3}, {} deliveries",
        cfg.seed, output.report.availability, output.report.delivery_count
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> CliResult {
    let mut cfg = SimConfig::load(&args.config)?;
    match args.seeds {
        None => {
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            simulate_one(&cfg, &args.out, args.events.as_deref())
        }
        Some(range) => (range.start..range.end)
            .into_par_iter()
            .try_for_each(|seed| {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                let events = args.events.as_deref().map(|p| with_seed(p, seed));
                simulate_one(&cfg, &with_seed(&args.out, seed), events.as_deref())
            }),
    }
}

fn read_services(path: &Path) -> CliResult<Vec<(NodeId, ServiceTag)>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "node,tag" => {}
        _ => {
            return Err(CliError::Data(format!(
                "{}: expected header `node,tag`",
                path.display()
            )))
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let bad = |m: String| CliError::Data(format!("{}:{}: {m}", path.display(), k + 1));
            let (n, t) = l
                .split_once(',')
                .ok_or_else(|| bad("expected `node,tag`".into()))?;
            let node = n.trim().parse::<NodeId>().map_err(|e| bad(e.to_string()))?;
            let tag = t.trim().parse::<ServiceTag>().map_err(bad)?;
            Ok((node, tag))
        })
        .collect()
}

fn trust(args: &TrustArgs) -> CliResult {
    let params = TrustParams {
        alpha: args.alpha,
        friend_threshold: args.friend,
        acquaintance_threshold: args.acquaintance,
    };
    let events = parse_encounter_trace(&args.encounters)?;
    let services = match &args.services {
        Some(p) => read_services(p)?,
        None => Vec::new(),
    };
    let matrices = EncounterMatrices::from_events(&events);
    let nodes = events
        .iter()
        .flat_map(|e| [e.node_a, e.node_b])
        .chain(services.iter().map(|s| s.0));
    let matrix = TrustMatrix::build(&matrices, nodes, services.iter().copied(), params)?;
    let node = NodeId(args.node);
    if !matrix.nodes().any(|n| n == node) {
        return Err(CliError::Data(format!(
            "node {node} does not appear in the trace"
        )));
    }
    if let Some(path) = &args.matrix_out {
        let mut w = create(path)?;
        matrices.write_csv(&mut w)?;
        w.flush().map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?;
    }
    let stdout = io::stdout();
    matrix.write_report_csv(node, stdout.lock())?;
    Ok(())
}

fn rank(args: &RankArgs) -> CliResult {
    let crimes = parse_crime_log(&args.crime)?;
    let profile = build_risk_profile(&crimes);
    let hours = args.hour.map_or(HourSelector::AllHours, HourSelector::Hour);
    if let Some(path) = &args.profile_out {
        let mut text =
            serde_json::to_string_pretty(&profile.to_json()).expect("profile serializes");
        text.push('\n');
        write_text(path, &text)?;
    }
    let stdout = io::stdout();
    profile.write_ranking_csv(hours, stdout.lock())?;
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> CliResult {
    let crimes = parse_crime_log(&args.crime)?;
    let density = parse_density_series(&args.density)?;
    let mut report = correlation_report(&crimes, &density)?;
    if args.spearman {
        report = report.with_spearman()?;
    }
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    write_text(&args.out, &text)
}

fn init_logging() {
    let level = std::env::var("SHIELD_LOG").unwrap_or_else(|_| "off".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::GenTraces(a) => gen_traces(a),
        Command::Simulate(a) => simulate(a),
        Command::Trust(a) => trust(a),
        Command::Rank(a) => rank(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

//! `beaconcast` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use beaconcast::analytics::{export_csv, report_from_reader, summary_text, ReportOptions};
use beaconcast::node::DeviceAddress;
use beaconcast::registry::server::{serve, Service};
use beaconcast::registry::store::Store;
use beaconcast::registry::ProfileTaxonomy;
use beaconcast::simnet::{generate_faculty_scenario, run_streaming, FacultyParams, SimScenario};
#[cfg(test)]
use beaconcast::simnet::default_epoch;

#[derive(Parser)]
#[command(name = "beaconcast", version, about = "BLE beacon discovery and broadcasting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its interaction log.
    Simulate(SimulateArgs),
    /// Serve the registry wire API.
    Serve(ServeArgs),
    /// Aggregate an interaction log into CSVs and a text summary.
    Report(ReportArgs),
    /// Assign a profile category to a known user on a running registry.
    Assign(AssignArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "paper_shape", required_unless_present = "paper_shape")]
    scenario: Option<PathBuf>,
    /// Generate the synthetic faculty-building scenario instead.
    #[arg(long)]
    paper_shape: bool,
    #[arg(long, default_value_t = 27, requires = "paper_shape")]
    days: u32,
    #[arg(long, default_value_t = 13, requires = "paper_shape")]
    nodes: u32,
    #[arg(long, default_value_t = 120, requires = "paper_shape")]
    users: u32,
    /// Zero-based day on which the exam period starts.
    #[arg(long, default_value_t = 10, requires = "paper_shape")]
    exam_day: u32,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Profile taxonomy JSON; the built-in one is used when absent.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    store: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    log: PathBuf,
    /// Calendar time of t = 0 (RFC 3339).
    #[arg(long, value_parser = parse_epoch, default_value = "2017-05-05T00:00:00Z")]
    epoch: DateTime<Utc>,
    /// Local UTC offset in whole hours, e.g. +2.
    #[arg(long, value_parser = parse_tz, default_value = "+2", allow_hyphen_values = true)]
    tz: i32,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AssignArgs {
    /// Registry address, host:port.
    #[arg(long)]
    registry: String,
    #[arg(long)]
    device: DeviceAddress,
    #[arg(long)]
    category: String,
}

fn parse_epoch(s: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc))
        .map_err(|e| format!("expected an RFC 3339 datetime: {e}"))
}

fn parse_tz(s: &str) -> Result<i32, String> {
    let h: i32 = s
        .strip_prefix('+')
        .unwrap_or(s)
        .parse()
        .map_err(|_| format!("expected whole hours like +2 or -5, got {s:?}"))?;
    if h.abs() > 14 {
        return Err(format!("offset {h} is outside ±14 h"));
    }
    Ok(h)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Report(a) => report(a),
        Command::Assign(a) => assign(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario = match &a.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading scenario {}", path.display()))?;
            let mut s = SimScenario::from_json(&text)
                .with_context(|| format!("loading scenario {}", path.display()))?;
            if let Some(seed) = a.seed {
                s.seed = seed;
            }
            s
        }
        None => generate_faculty_scenario(&FacultyParams {
            days: a.days,
            n_nodes: a.nodes,
            n_users: a.users,
            seed: a.seed.unwrap_or(42),
            exam_start_day: a.exam_day,
            ..Default::default()
        })?,
    };

    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut out = BufWriter::new(file);
    let summary = run_streaming(&scenario, |entry| {
        out.write_all(entry.to_json_line().as_bytes())?;
        out.write_all(b"\n")
    })
    .with_context(|| format!("simulating into {}", a.out.display()))?;
    out.flush().with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "{} discovery records, {} deliveries, {} users",
        summary.records, summary.deliveries, summary.users_discovered
    );
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let taxonomy = match &a.taxonomy {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading taxonomy {}", path.display()))?;
            Some(
                ProfileTaxonomy::from_json(&text)
                    .with_context(|| format!("loading taxonomy {}", path.display()))?,
            )
        }
        None => None,
    };
    let (store, registry) = Store::open(&a.store, taxonomy)
        .with_context(|| format!("opening store {}", a.store.display()))?;
    let records = registry.record_count();
    let service = Arc::new(Service::new(registry, Some(store)));

    let listener =
        TcpListener::bind(&a.listen).with_context(|| format!("binding {}", a.listen))?;
    let addr = listener.local_addr()?;

    let on_signal = Arc::clone(&service);
    ctrlc::set_handler(move || {
        let code = match on_signal.checkpoint() {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: checkpoint failed: {e}");
                2
            }
        };
        std::process::exit(code);
    })
    .context("installing the shutdown handler")?;

    println!("listening on {addr} ({records} records restored)");
    std::io::stdout().flush()?;
    serve(listener, service).context("accepting connections")
}

fn report(a: ReportArgs) -> Result<()> {
    let file = File::open(&a.log).with_context(|| format!("opening log {}", a.log.display()))?;
    let options = ReportOptions {
        tz_offset_hours: a.tz,
        ..Default::default()
    };
    let report = report_from_reader(BufReader::new(file), a.epoch, options)
        .with_context(|| format!("reading {}", a.log.display()))?;
    let csv = export_csv(&report);
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (name, body) in [
        ("per_day.csv", &csv.per_day),
        ("per_hour.csv", &csv.per_hour),
        ("per_user.csv", &csv.per_user),
        ("summary.txt", &summary_text(&report)),
    ] {
        write_file(&a.out_dir.join(name), body)?;
    }
    Ok(())
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn assign(a: AssignArgs) -> Result<()> {
    let stream =
        TcpStream::connect(&a.registry).with_context(|| format!("connecting to {}", a.registry))?;
    let request = serde_json::json!({
        "op": "assign",
        "device": a.device,
        "category": a.category,
    });
    stream.set_nodelay(true)?;
    (&stream).write_all(format!("{request}\n").as_bytes())?;
    let mut line = String::new();
    BufReader::new(stream).read_line(&mut line)?;
    let response: serde_json::Value = serde_json::from_str(line.trim())
        .map_err(|e| anyhow!("unreadable registry response {line:?}: {e}"))?;
    if response["ok"] == true {
        println!("{}", line.trim());
        Ok(())
    } else {
        bail!(
            "registry refused: {}",
            response["error"].as_str().unwrap_or("unknown error")
        )
    }
}

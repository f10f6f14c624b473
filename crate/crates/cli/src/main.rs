use std::fmt::Write as _;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fivegsim::nwdaf::{kpi_packet_counts, kpi_throughput_matrix};
use fivegsim::scenario::DEFAULT_DURATION_MS;
use fivegsim::{
    default_topology, load_topology, run_scenario, validate_sequences, EventStore, RedundancyKind, ScenarioKind,
    ScenarioSpec, ValidateConfig, Window,
};

/// Deterministic desk-scale 5G network simulator.
#[derive(Parser)]
#[command(name = "fivegsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        /// Topology file; the built-in topology is used when omitted.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// idle, single_request, many_requests, urllc_sweep or validate.
        #[arg(long, default_value = "single_request")]
        scenario: ScenarioKind,
        #[arg(long)]
        ues: Option<usize>,
        #[arg(long, default_value = "document")]
        doc: String,
        /// Length of the measurement window.
        #[arg(long, default_value_t = DEFAULT_DURATION_MS)]
        duration_ms: u64,
        /// none, dual, n3 or psa.
        #[arg(long, default_value = "none")]
        redundancy: RedundancyKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check an exported event log against the expected message sequences.
    Validate {
        #[arg(long)]
        events: PathBuf,
    },
    /// Print packet counts and the throughput matrix of an exported event log.
    Kpi {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value_t = 1000)]
        start_ms: u64,
        #[arg(long, default_value_t = DEFAULT_DURATION_MS)]
        window_ms: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut out = String::new();
    let result = execute(cli.command, &mut out);
    if let Err(e) = io::stdout().lock().write_all(out.as_bytes()) {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether the run's checks passed; errors are usage or config problems.
fn execute(cmd: Command, out: &mut String) -> Result<bool> {
    match cmd {
        Command::Run { topology, scenario, ues, doc, duration_ms, redundancy, seed, out: dir } => {
            let topo = match &topology {
                Some(p) => load_topology(p).with_context(|| format!("loading {}", p.display()))?,
                None => default_topology(),
            };
            let mut spec = ScenarioSpec::new(scenario).doc(&doc).duration(duration_ms).redundancy(redundancy).seed(seed);
            if let Some(n) = ues {
                spec = spec.ues(n);
            }
            let artifacts = run_scenario(&topo, &spec)?;
            let files = artifacts.write_to(&dir).with_context(|| format!("writing {}", dir.display()))?;
            out.push_str(&artifacts.summary());
            for f in files {
                writeln!(out, "wrote {}", f.display())?;
            }
            Ok(artifacts.passed())
        }
        Command::Validate { events } => {
            let store = EventStore::import(&events).with_context(|| format!("reading {}", events.display()))?;
            let list = validate_sequences(store.events(), &ValidateConfig::default());
            writeln!(out, "{list}")?;
            Ok(list.all_passed())
        }
        Command::Kpi { events, start_ms, window_ms } => {
            let store = EventStore::import(&events).with_context(|| format!("reading {}", events.display()))?;
            let window = Window::new(start_ms, start_ms + window_ms);
            out.push_str(&kpi_packet_counts(store.events(), window, None).to_csv());
            out.push('\n');
            out.push_str(&kpi_throughput_matrix(store.events(), window).to_csv());
            Ok(true)
        }
    }
}

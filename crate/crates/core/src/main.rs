use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hanr::harness::io::{self, CycleRow};
use hanr::harness::{
    load_scenario, removal_report, render_removal_table, CampaignDir, Mode, ReplayLog, Scenario,
    REMOVAL_HEADER,
};
use hanr::model::TrackingRecord;

#[derive(Parser)]
#[command(
    name = "hanr",
    version,
    about = "Hybrid ANR engine and network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a campaign, or resume one left unfinished in --out.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to the scenario's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop after this run; a later invocation resumes.
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Re-run the engine over recorded PM, tracking and X2 logs.
    Replay {
        /// pm.csv of a previous campaign; tracking.csv and x2_attempts.csv
        /// are read from the same directory.
        #[arg(long)]
        pm: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a report from a campaign directory.
    Report {
        #[arg(long)]
        campaign: PathBuf,
        #[arg(long, value_enum)]
        kind: ReportKind,
        /// CSV instead of a text table (removals only).
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Thresholds,
    Removals,
    Cycles,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = format!("{err:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            scenario,
            seed,
            out,
            stop_after,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let out = out
                .or_else(|| s.output_dir.clone())
                .context("no --out given and the scenario has no output_dir")?;
            run(&s, &out, Mode::Simulate, stop_after)
        }
        Command::Replay { pm, scenario, out } => {
            let s = load_scenario(&scenario)?;
            let log = ReplayLog::load(&pm, &s)?;
            run(&s, &out, Mode::Replay(&log), None)
        }
        Command::Report {
            campaign,
            kind,
            csv,
        } => report(&campaign, kind, csv),
    }
}

fn run(scenario: &Scenario, out: &Path, mode: Mode<'_>, stop_after: Option<u32>) -> Result<()> {
    let dir = CampaignDir::new(out);
    let c = dir.run(scenario, mode, stop_after)?;
    let done = c.next_run.saturating_sub(1);
    println!(
        "runs={done}/{} complete={} out={}",
        c.final_run(),
        c.is_complete(),
        out.display()
    );
    Ok(())
}

fn report(root: &Path, kind: ReportKind, csv: bool) -> Result<()> {
    let dir = CampaignDir::new(root);
    let c = dir
        .load()?
        .with_context(|| format!("no campaign state in {}", root.display()))?;
    let bytes = match kind {
        ReportKind::Thresholds => io::to_csv(&c.history.thresholds, io::THRESHOLD_HEADER)?,
        ReportKind::Cycles => {
            let rows: Vec<CycleRow> = c
                .history
                .cycles
                .iter()
                .flat_map(|r| r.actions.iter().map(CycleRow::from))
                .collect();
            io::to_csv(&rows, io::CYCLE_HEADER)?
        }
        ReportKind::Removals => {
            let log: Vec<TrackingRecord> =
                c.network.tracking.events().into_iter().cloned().collect();
            let rows = removal_report(&c.network.cells, &log);
            if csv {
                io::to_csv(&rows, REMOVAL_HEADER)?
            } else {
                render_removal_table(&rows).into_bytes()
            }
        }
    };
    std::io::stdout().write_all(&bytes)?;
    Ok(())
}

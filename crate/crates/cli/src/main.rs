use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use coco_core::geometry::{build_cover_with, CoverOptions, DecisionSet, DEFAULT_MAX_CENTERS};
use coco_core::harness::{
    emit, emit_sweep, run, sweep, BoundCheck, RunConfig, RunSummary, OUTPUT_DIR_ENV,
};
use log::info;

#[derive(Parser)]
#[command(
    name = "coco",
    version,
    about = "Constrained online learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Run the config once per beta and write a summary table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        betas: Vec<f64>,
        #[arg(long, env = OUTPUT_DIR_ENV)]
        output_dir: Option<PathBuf>,
    },
    /// Print a delta-cover of a set as CSV.
    Cover {
        /// `simplex:N`, `box:lo:hi,lo:hi,...` or `ball:R:c1,c2,...`
        #[arg(long)]
        set: DecisionSet,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_CENTERS)]
        max_centers: usize,
    },
    /// Re-evaluate the bound checks stored in a summary JSON file.
    CheckBounds {
        #[arg(long)]
        record: PathBuf,
    },
}

fn resolve_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn print_checks(checks: &[BoundCheck]) -> bool {
    for c in checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        println!(
            "  {verdict} {:<22} lhs {:>14.6} rhs {:>14.6} margin {:>14.6}",
            c.name, c.lhs, c.rhs, c.margin
        );
    }
    checks.iter().all(|c| c.passed)
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, output_dir } => {
            let cfg = load(&config)?;
            let record = run(&cfg)?;
            let dir = resolve_dir(&cfg, output_dir);
            let files = emit(&record, &dir)?;
            info!("wrote {}", files.rounds_csv.display());
            let s = &record.summary;
            println!(
                "{} T={} beta={} seed={}: regret {:.6}, ccv {:.6}",
                s.policy, s.horizon, cfg.beta, s.seed, s.regret, s.ccv
            );
            println!("summary: {}", files.summary_json.display());
            Ok(print_checks(&s.checks))
        }
        Command::Sweep {
            config,
            betas,
            output_dir,
        } => {
            let cfg = load(&config)?;
            let rows = sweep(&cfg, &betas)?;
            let dir = resolve_dir(&cfg, output_dir);
            let path = emit_sweep(&rows, &dir, &format!("{}_sweep", cfg.file_stem()))?;
            println!("beta,regret,ccv,all_passed");
            for r in &rows {
                println!("{},{},{},{}", r.beta, r.regret, r.ccv, r.all_passed);
            }
            println!("table: {}", path.display());
            Ok(rows.iter().all(|r| r.all_passed))
        }
        Command::Cover {
            set,
            delta,
            max_centers,
        } => {
            let cover = build_cover_with(&set, delta, &CoverOptions { max_centers })?;
            let header: Vec<String> = (0..set.dimension()).map(|i| format!("x_{i}")).collect();
            println!("{}", header.join(","));
            for c in cover.centers() {
                let row: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                println!("{}", row.join(","));
            }
            info!("{} centers", cover.len());
            Ok(true)
        }
        Command::CheckBounds { record } => {
            let text = std::fs::read_to_string(&record)
                .with_context(|| format!("reading {}", record.display()))?;
            let summary = RunSummary::from_json(&text)?;
            println!(
                "{} T={} seed={}",
                summary.policy, summary.horizon, summary.seed
            );
            Ok(print_checks(&summary.recheck()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more bound checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

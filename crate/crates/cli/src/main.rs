use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bossamp::experiment::{contour_csv, grid_table, write_text};
use bossamp::{run_experiment, run_phase_transition, write_csv, Error, ExperimentConfig, Family};
use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

#[derive(Parser)]
#[command(name = "bossamp", version, about = "Seeded sparse-recovery experiments with CSV output")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the measurement SNR at fixed M.
    VariableSnr(RunArgs),
    /// Sweep the number of measurements at fixed SNR.
    VariableM(RunArgs),
    /// Average success over the (M/N, K/M) grid and its 0.5 contour.
    PhaseTransition(GridArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Contour CSV (default: `<out stem>.contour.csv` next to `--out`).
    #[arg(long)]
    contour: Option<PathBuf>,
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    Ok(cfg)
}

fn default_contour_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("phase");
    out.with_file_name(format!("{stem}.contour.csv"))
}

/// Returns the number of diverged realizations.
fn run(command: &Command) -> Result<usize, Error> {
    match command {
        Command::VariableSnr(args) | Command::VariableM(args) => {
            let family = match command {
                Command::VariableSnr(_) => Family::VariableSnr,
                _ => Family::VariableM,
            };
            let cfg = load(args)?;
            let table = run_experiment(&cfg, family, args.threads)?;
            write_csv(&table, &args.out)?;
            info!("wrote {} rows to {}", table.points.len(), args.out.display());
            Ok(table.diverged())
        }
        Command::PhaseTransition(grid_args) => {
            let args = &grid_args.run;
            let cfg = load(args)?;
            let (grid, contour) = run_phase_transition(&cfg, args.threads)?;
            let table = grid_table(&cfg, &grid);
            write_csv(&table, &args.out)?;
            let contour_path = grid_args
                .contour
                .clone()
                .unwrap_or_else(|| default_contour_path(&args.out));
            write_text(&contour_path, &contour_csv(&contour))?;
            info!(
                "wrote {} cells to {} and {} contour polylines to {}",
                table.points.len(),
                args.out.display(),
                contour.len(),
                contour_path.display()
            );
            Ok(table.diverged())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(diverged) => {
            warn!("{diverged} realizations diverged and were left out of the means");
            ExitCode::from(EXIT_DIVERGENCE)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

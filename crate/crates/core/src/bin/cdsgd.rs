//! Command-line front end: single runs, algorithm comparisons, parameter
//! sweeps, and bound reports, all driven by one TOML configuration file.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use cdsgd::harness::ops::{self, AlgorithmSpec, SweepParam};
use cdsgd::harness::runner::run_replicas;
use cdsgd::harness::RunConfig;
use cdsgd::Result;

#[derive(Parser)]
#[command(name = "cdsgd", about = "Consensus-based distributed SGD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the TOML run configuration.
    config: PathBuf,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Force deterministic mode (full-batch gradients, no injected noise).
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithm and write the trajectory records.
    Run(Common),
    /// Run several algorithms on the same data, partition, and seed.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Algorithm specs, e.g. "cdsgd" or "g-cdsgd:omega=0.5,alpha=0.01".
        #[arg(long, required = true, num_args = 1.., value_delimiter = ' ')]
        algorithms: Vec<String>,
    },
    /// Re-run the configuration over a grid of one hyper-parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Which hyper-parameter to sweep: alpha, omega, or tau.
        #[arg(long)]
        param: String,
        /// Grid values; tau values must be integers.
        #[arg(long, required = true, num_args = 1.., value_delimiter = ' ')]
        values: Vec<f64>,
    },
    /// Print and write theoretical bounds next to measured quantities.
    Bounds(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_file(&common.config)?;
    cfg.apply_overrides(common.seed, common.out_dir.clone(), common.deterministic);
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let records = run_replicas(&cfg)?;
            for rec in &records {
                let dir = if records.len() == 1 {
                    cfg.run.out_dir.clone()
                } else {
                    cfg.run.out_dir.join(format!("replica-{}", rec.master_seed))
                };
                let bound = ops::bound_report_for(&cfg, rec).ok();
                cdsgd::harness::runner::write_run_outputs_with_bounds(rec, bound.as_ref(), &dir)?;
                let last = rec.final_row();
                println!(
                    "{} seed={} iterations={} final F={} consensus={}{}",
                    rec.algorithm,
                    rec.master_seed,
                    last.map_or(0, |r| r.k),
                    last.map_or(f64::NAN, |r| r.f),
                    last.map_or(f64::NAN, |r| r.consensus_error),
                    rec.diverged
                        .as_deref()
                        .map_or(String::new(), |d| format!(" DIVERGED ({d})")),
                );
            }
            println!("wrote {}", cfg.run.out_dir.display());
            Ok(())
        }
        Command::Compare { common, algorithms } => {
            let cfg = load(&common)?;
            let specs: Vec<AlgorithmSpec> = algorithms
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_>>()?;
            let report = ops::compare(&cfg, &specs)?;
            for (label, rec) in report.labels.iter().zip(&report.records) {
                let gap = rec.degree_of_consensus.map_or(f64::NAN, |d| d.gap);
                println!(
                    "{label}: final F={} consensus gap={gap}{}",
                    rec.final_row().map_or(f64::NAN, |r| r.f),
                    rec.diverged
                        .as_deref()
                        .map_or(String::new(), |d| format!(" DIVERGED ({d})")),
                );
            }
            report.write(&cfg.run.out_dir, &specs)?;
            println!("wrote {}", cfg.run.out_dir.display());
            Ok(())
        }
        Command::Sweep {
            common,
            param,
            values,
        } => {
            let cfg = load(&common)?;
            let param = SweepParam::from_str(&param)?;
            let report = ops::sweep(&cfg, param, &values)?;
            print!("{}", report.csv());
            println!("ranked by final loss: {:?}", report.ranked_values());
            println!("ranked by agreement gap: {:?}", report.ranked_by_gap());
            report.write(&cfg.run.out_dir)?;
            println!("wrote {}", cfg.run.out_dir.display());
            Ok(())
        }
        Command::Bounds(common) => {
            let cfg = load(&common)?;
            let report = ops::bounds(&cfg)?;
            print!("{}", report.text_table());
            report.write(&cfg.run.out_dir)?;
            println!("wrote {}", cfg.run.out_dir.display());
            Ok(())
        }
    }
}

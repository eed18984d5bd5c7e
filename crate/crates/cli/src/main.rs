use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use ricci_lab::run::{configure_threads, thread_count_from_env, write_run, write_sweep};
use ricci_lab::{emit_plots, refine_sweep, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Residual checks for the extended Ricci flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured checks and record the time series.
    Run { config: PathBuf },
    /// Rerun the checks on successively halved grids and report orders.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Write a gnuplot script for a time-series CSV.
    Plot { csv: PathBuf },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    configure_threads(thread_count_from_env()?);
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run(&cfg)?;
            for path in write_run(&cfg, &out)? {
                println!("wrote {}", path.display());
            }
            for (name, r) in &out.report.checks {
                let order = r.h_order.map_or("-".to_string(), |o| format!("{o:.2}"));
                let isolated = if r.isolated.is_empty() { String::new() } else { format!(" [{}]", r.isolated.join(", ")) };
                println!("{name:<12} {:<24} h_order {order}{isolated}", format!("{:?}", r.verdict));
            }
            let failures = out.report.strict_failures(&cfg.strict);
            if failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("formula discrepancy in strict checks: {}", failures.join(", "));
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Sweep { config, levels } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (table, evals) = refine_sweep(&cfg, levels)?;
            print!("{}", table.render());
            for path in write_sweep(&cfg, &table)? {
                println!("wrote {}", path.display());
            }
            let report = ricci_lab::ResidualReport::from_evaluations(&evals);
            Ok(if report.strict_failures(&cfg.strict).is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Plot { csv } => {
            let path = emit_plots(&csv).with_context(|| format!("plotting {}", csv.display()))?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

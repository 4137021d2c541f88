//! Benchmark driver: build a problem/mesh/hierarchy sweep from a config
//! file, run the multigrid solver and preconditioned GMRES, and emit CSV.

mod config;
mod experiment;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::RawConfig;
use experiment::{Cell, Experiment};
use hmg::krylov::SolveStatus;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hmg", about = "Trace-system multigrid benchmark driver")]
struct Cli {
    /// Exit with code 2 if any sweep cell fails to converge.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an iteration-count sweep; CSV on stdout, readable table on stderr.
    Run { config: PathBuf },
    /// Run a mesh-refinement convergence study; CSV on stdout.
    Converge { config: PathBuf },
    /// Dump macro-element assignments of the hierarchy as CSV.
    DumpHierarchy { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(clean) => {
            if clean || !cli.strict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns whether every cell converged.
fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Run { config } => {
            let exp = Experiment::from_config(&RawConfig::load(config)?)?;
            let cells = exp.run()?;
            print_csv(&cells);
            print_table(&exp, &cells);
            Ok(cells
                .iter()
                .all(|c| c.report.status == SolveStatus::Converged))
        }
        Command::Converge { config } => {
            let exp = Experiment::from_config(&RawConfig::load(config)?)?;
            println!("p,levels,h,error,order");
            for (p, levels, h, err, order) in exp.run_convergence()? {
                let o = if order.is_nan() {
                    String::new()
                } else {
                    format!("{order:.3}")
                };
                println!("{p},{levels},{h:.6e},{err:.6e},{o}");
            }
            Ok(true)
        }
        Command::DumpHierarchy { config } => {
            let exp = Experiment::from_config(&RawConfig::load(config)?)?;
            let &levels = exp
                .levels_list
                .iter()
                .max()
                .ok_or_else(|| anyhow::anyhow!("solver.levels is empty"))?;
            let mesh = exp.build_mesh(levels)?;
            let agg = exp.build_hierarchy(&mesh, levels)?;
            println!("level,element,macro");
            for k in 1..=agg.num_levels {
                let part = agg.level(k);
                for (e, &m) in part.macro_of_element.iter().enumerate() {
                    println!("{k},{e},{m}");
                }
            }
            Ok(true)
        }
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIterations => "max-iterations",
        SolveStatus::Diverged => "diverged",
    }
}

fn print_csv(cells: &[Cell]) {
    println!("p,levels,mode,iters,status,residual,seconds");
    for c in cells {
        println!(
            "{},{},{},{},{},{:.3e},{:.3}",
            c.p,
            c.levels,
            c.mode.name(),
            c.report.iterations,
            status_name(c.report.status),
            c.report.final_residual,
            c.seconds
        );
    }
}

/// Human-readable side table (stderr): one row per p, one column per level,
/// "*" marking cells that did not converge.
fn print_table(exp: &Experiment, cells: &[Cell]) {
    for &mode in &exp.modes {
        eprintln!("# {} iterations", mode.name());
        let mut header = String::from("p\\levels");
        for &l in &exp.levels_list {
            header += &format!("\t{l}");
        }
        eprintln!("{header}");
        for &p in &exp.p_list {
            let mut row = format!("{p}");
            for &l in &exp.levels_list {
                let cell = cells
                    .iter()
                    .find(|c| c.p == p && c.levels == l && c.mode == mode);
                row += &match cell {
                    Some(c) if c.report.status == SolveStatus::Converged => {
                        format!("\t{}", c.report.iterations)
                    }
                    Some(_) => "\t*".to_string(),
                    None => "\t-".to_string(),
                };
            }
            eprintln!("{row}");
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use densitylab::lab::{self, RunOptions, SuiteConfig};

#[derive(Parser)]
#[command(name = "lab", about = "Run inequality checks on weighted manifolds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario of a suite and write JSON reports.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "lab-out")]
        out: PathBuf,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write mass and stiffness matrices in MatrixMarket format.
        #[arg(long)]
        dump_operators: bool,
    },
    /// Run a suite and print gap against mesh size with fitted orders.
    Convergence {
        config: PathBuf,
        #[arg(long, default_value = "lab-out")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        command: MeshCommand,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a mesh from a spec like `icosphere:radius=1,subdivisions=3`.
    Gen {
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &PathBuf) -> Result<Vec<lab::ResolvedScenario>, ExitCode> {
    SuiteConfig::load(config).and_then(|s| s.resolve()).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(2)
    })
}

fn run(config: PathBuf, opts: RunOptions, convergence: bool) -> ExitCode {
    let scenarios = match load(&config) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let outcomes = match lab::run_all(&scenarios, &opts).and_then(|o| lab::write_reports(&o, &opts.out_dir).map(|_| o)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if convergence {
        let rows = lab::convergence_rows(&outcomes);
        println!("{:<28} {:<22} {:>5} {:>12} {:>14} {:>8}", "scenario", "check", "level", "h", "gap", "order");
        for r in &rows {
            println!("{:<28} {:<22} {:>5} {:>12.4e} {:>14.4e} {:>8}", r.scenario, r.check, r.level, r.h, r.gap, lab::format_order(r.order));
        }
        if let Err(e) = lab::write_convergence(&rows, &opts.out_dir.join("convergence.csv")) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    } else {
        for o in &outcomes {
            for (id, c) in &o.checks {
                println!("{:<28} {:<22} {}", o.scenario.name, id.name(), lab::status_label(c));
            }
        }
    }
    if outcomes.iter().any(|o| o.failed()) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, jobs, dump_operators } => run(config, RunOptions { out_dir: out, jobs, dump_operators }, false),
        Command::Convergence { config, out, jobs } => run(config, RunOptions { out_dir: out, jobs, dump_operators: false }, true),
        Command::Mesh { command: MeshCommand::Gen { spec, out } } => match lab::mesh_gen(&spec, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use smoothrep_cli::{run, with_seed, Command, Instance};

/// Smooth zero-set representations from an instance file.
#[derive(Parser)]
#[command(name = "smoothrep", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Instance JSON.
    #[arg(long)]
    instance: PathBuf,
    /// Directory for report.json and the CSV tables.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the instance seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    smoothrep::exec::configure_threads_from_env();
    let inst = match Instance::load(&args.instance) {
        Ok(i) => with_seed(i, args.seed),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(args.command, &inst) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.write(&args.out) {
        eprintln!("error: cannot write {}: {e}", args.out.display());
        return ExitCode::from(2);
    }
    for c in report.failures() {
        eprintln!("FAIL {} = {} (threshold {:?}) {}", c.name, c.value, c.threshold, c.detail);
    }
    println!("{} {}: {} checks, {} failed", report.command, report.instance, report.checks.len(), report.failures().count());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frods::cli;
use frods::FrodsError;

#[derive(Parser)]
#[command(name = "frods", version, about = "Iterative Dyson-series dynamics of open quantum systems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write the CSV; one log line per step on stderr.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Overrides `output.path`; without either the CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the engine against the enumerating sums for a few steps.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: usize,
    },
    /// Convergence order from runs at dt, 2 dt and 4 dt.
    Order {
        fine: PathBuf,
        mid: PathBuf,
        coarse: PathBuf,
    },
    /// Number of bold diagrams kept per step.
    Count {
        #[arg(long)]
        dmax: usize,
        #[arg(long)]
        kmax: usize,
    },
}

fn dispatch(command: Command) -> Result<u8, FrodsError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Run { config, threads, out: path } => {
            cli::cmd_run(&config, threads, path.as_deref(), &mut std::io::stderr().lock())?;
        }
        Command::Oracle { config, steps } => {
            if !cli::cmd_oracle(&config, steps, &mut out)?.passed() {
                return Ok(2);
            }
        }
        Command::Order { fine, mid, coarse } => {
            cli::cmd_order([&fine, &mid, &coarse], &mut out)?;
        }
        Command::Count { dmax, kmax } => {
            cli::cmd_count(dmax, kmax, &mut out)?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            // bad arguments are validation failures, help and version are not
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(args.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

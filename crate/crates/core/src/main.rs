use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eisenhart::cli::{self, CliError};

#[derive(Parser)]
#[command(
    name = "eisenhart",
    version,
    about = "Lift Herglotz systems to null geodesics and check the lift"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate both pipelines and write CSV trajectories plus a report.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's `out_dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run named checks, e.g. `killing:du null conformal-pair`.
    Check {
        scenario: PathBuf,
        checks: Vec<String>,
        /// Print JSON lines instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// List catalog systems and their generators.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result: Result<(), CliError> = match args.command {
        Command::Run { scenario, out_dir } => cli::cmd_run(&scenario, out_dir.as_deref())
            .inspect(|r| print!("{}", r.summary()))
            .and_then(fail_on_check),
        Command::Check {
            scenario,
            checks,
            json,
        } => cli::cmd_check(&scenario, &checks)
            .inspect(|r| {
                if json {
                    print!("{}", r.json_lines());
                } else {
                    print!("{}", r.summary());
                }
            })
            .and_then(fail_on_check),
        Command::List { json } => {
            print!("{}", cli::render_listing(&cli::cmd_list(), json));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn fail_on_check(report: cli::RunReport) -> Result<(), CliError> {
    let failed = report.failures();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed))
    }
}

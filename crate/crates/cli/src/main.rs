use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eqlab::par::Execution;
use eqlab_cli::acceptance::{run_suite, Thresholds};
use eqlab_cli::run::run_file;
use eqlab_cli::schema::config_schema;

#[derive(Parser)]
#[command(name = "eqlab", version, about = "Exact-arithmetic equidistribution experiments")]
struct Cli {
    /// Run ensemble members one at a time.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Write the record here instead of the config's `output`.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance suite; exits 0 only if every criterion passes.
    Verify,
    /// Print the JSON Schema of experiment configs.
    PrintSchema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Run { config, output } => match run_file(&config, output.as_deref(), exec) {
            Ok((record, outputs)) => {
                println!("{}", record.payload.summary());
                match outputs {
                    Some(o) => {
                        println!("wrote {}", o.record.display());
                        for p in o.csv {
                            println!("wrote {}", p.display());
                        }
                    }
                    None => println!("{}", record.payload.to_json()),
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Verify => {
            let verdicts = run_suite(&Thresholds::default(), exec, |v| println!("{}", v.line()));
            let failed = verdicts.iter().filter(|v| !v.passed).count();
            println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::PrintSchema => {
            println!("{}", config_schema());
            ExitCode::SUCCESS
        }
    }
}

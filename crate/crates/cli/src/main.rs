use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mulenet::simkit::SimError;
use mulenet_cli::{read_metrics, render, run_command, validate, CliError, Format, RunConfig};

#[derive(Parser)]
#[command(
    name = "mulenet",
    version,
    about = "Simulate store-and-forward messaging between disconnected islands"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem found
    Validate { file: PathBuf },
    /// Run a scenario and write its metrics and logs into the output directory
    Run {
        file: PathBuf,
        /// Replace the scenario's seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Check custody conservation after every step
        #[arg(long)]
        audit: bool,
    },
    /// Render a metrics.json file
    Report {
        metrics: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
}

fn report_error(e: &CliError) {
    match e {
        CliError::Sim(SimError::Invalid(diags)) => {
            for d in diags {
                eprintln!("error: {d}");
            }
        }
        other => eprintln!("error: {other}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { file } => validate(&file).map(|_| println!("{}: ok", file.display())),
        Command::Run { file, seed, out, audit } => run_command(&RunConfig {
            scenario: file,
            seed,
            out,
            audit,
        })
        .map(|m| {
            println!(
                "generated {} delivered {} delivery_ratio {}",
                m.generated, m.delivered, m.delivery_ratio
            )
        }),
        Command::Report { metrics, format } => read_metrics(&metrics).map(|m| print!("{}", render(&m, format))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::from(e.exit_code())
        }
    }
}

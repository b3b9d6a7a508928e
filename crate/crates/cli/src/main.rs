use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rydfrag_cli::output::OUTPUT_ROOT_VAR;

#[derive(Parser)]
#[command(name = "rydfrag", version, about = "Constrained Rydberg chain workflows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the workflow described by a TOML config.
    Run { config: PathBuf },
    /// Run every point of the config's [[sweep.param]] grid.
    Scan { config: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// List workflow kinds and presets.
    ListWorkflows,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => rydfrag_cli::run(&config).map(|d| format!("wrote {}\n", d.display())),
        Command::Scan { config } => rydfrag_cli::scan(&config).map(|d| format!("wrote {}\n", d.display())),
        Command::Validate { config } => rydfrag_cli::validate(&config),
        Command::ListWorkflows => Ok(format!(
            "{}\noutputs go under ${OUTPUT_ROOT_VAR} (default ./runs)\n",
            rydfrag_cli::list_workflows()
        )),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

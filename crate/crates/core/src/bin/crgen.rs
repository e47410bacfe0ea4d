use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crgen::experiment::{exit_code, list_experiments, output_root, run, validate_file, MANIFEST_FILE};

/// Batch runner for common-randomness experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and run one experiment config.
    Run { config: PathBuf },
    /// Print the experiment catalogue with parameter schemas as JSON.
    List,
    /// Validate a config and print it with defaults filled in.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            println!("{}", serde_json::to_string_pretty(&list_experiments()).expect("catalogue serializes"));
            Ok(())
        }
        Command::Validate { config } => validate_file(&config).map(|c| print!("{}", c.canonical())),
        Command::Run { config } => validate_file(&config).and_then(|c| {
            let outcome = run(&c, &output_root(), &mut |line| println!("[{}] {line}", c.kind))?;
            println!(
                "wrote {} payload(s) and {} to {}",
                outcome.manifest.payloads.len(),
                MANIFEST_FILE,
                outcome.output_dir.display()
            );
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

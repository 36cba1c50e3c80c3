use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use parityscope::cli::{exit_code, run, Overrides, RunConfig};

/// Charge-parity switching simulator and tunneling-rate analysis.
#[derive(Parser)]
#[command(name = "parityscope", version)]
struct Args {
    /// spectrum | simulate | analyze | fit | physics | campaign | ingest | report
    command: Option<String>,
    /// JSON run document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Tabular output: json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Skip SVG figures.
    #[arg(long)]
    no_plots: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let overrides = Overrides {
        command: args.command,
        output_dir: args.out,
        seed: args.seed,
        format: args.format,
        plots: args.no_plots.then_some(false),
    };
    let result = RunConfig::load(args.config.as_deref(), &overrides).and_then(|c| run(&c));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for w in &outcome.manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{} file(s) in {} (results {})",
                outcome.manifest.files.len(),
                outcome.output_dir.display(),
                &outcome.manifest.results_hash[..16]
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

//! Fixture-backed embedding adapter: `oracle-adapter --fixture <file> <requests> <response>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Parser)]
#[command(about = "Embedding adapter that answers from a fixture file")]
struct Args {
    /// JSONL fixture mapping texts and audio digests to vectors.
    #[arg(long)]
    fixture: PathBuf,
    /// Model name written into each record.
    #[arg(long, default_value = "oracle")]
    model: String,
    requests: PathBuf,
    response: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match timbre_cli::fixture::run(&args.fixture, &args.model, &args.requests, &args.response) {
        Ok(()) => ExitCode::SUCCESS,
        Err(errors) => {
            for e in errors {
                eprintln!("oracle-adapter: {e}");
            }
            ExitCode::from(3)
        }
    }
}

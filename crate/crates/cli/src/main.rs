use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use timbre_cli::config::parse_levels;
use timbre_cli::{pipeline, report, Overrides, Result, RunConfig};

#[derive(Parser)]
#[command(name = "timbre-bench", version, about = "Timbre-semantics alignment benchmark")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "timbre-bench.toml")]
    config: PathBuf,
    /// Only use the adapter with this name.
    #[arg(long, global = true)]
    adapter: Option<String>,
    /// Comma-separated effect levels, e.g. 0.3,0.6,1.0.
    #[arg(long, global = true)]
    levels: Option<String>,
    /// Trend tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render all effect variants of the reference recording.
    Render,
    /// Embed all configured audio and descriptor texts with every adapter.
    Embed,
    /// Correlate instrument similarities with human ratings.
    EvalInstruments,
    /// Classify similarity trends across effect levels.
    EvalEffects,
    /// Summarize existing outputs into report.md.
    Report,
    /// Run every configured experiment, then report.
    All,
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides {
        adapter: cli.adapter,
        levels: cli.levels.as_deref().map(parse_levels).transpose()?,
        tolerance: cli.tolerance,
        output_dir: cli.out,
    };
    let cfg = RunConfig::load(&cli.config, &overrides)?;
    match cli.command {
        Command::Render => {
            let s = pipeline::render(&cfg)?;
            println!(
                "{} items ({} rendered, {} reused) -> {}",
                s.manifest.items.len(),
                s.rendered,
                s.reused,
                s.manifest_path.display()
            );
        }
        Command::Embed => {
            for (model, n, path) in pipeline::embed_all(&cfg)?.written {
                println!("{model}: {n} embeddings -> {}", path.display());
            }
        }
        Command::EvalInstruments => eval_instruments(&cfg)?,
        Command::EvalEffects => eval_effects(&cfg)?,
        Command::Report => println!("{}", report::report(&cfg)?.display()),
        Command::All => {
            if cfg.ratings_csv.is_some() {
                eval_instruments(&cfg)?;
            }
            if cfg.reference_audio.is_some() {
                eval_effects(&cfg)?;
            }
            println!("{}", report::report(&cfg)?.display());
        }
    }
    Ok(())
}

fn eval_instruments(cfg: &RunConfig) -> Result<()> {
    for r in pipeline::eval_instruments(cfg)? {
        let s = r.descriptor_summary;
        println!(
            "{}: {} of {} descriptors positively correlated",
            r.model,
            s.positive_count,
            r.descriptors.len()
        );
    }
    Ok(())
}

fn eval_effects(cfg: &RunConfig) -> Result<()> {
    let r = pipeline::eval_effects(cfg)?;
    println!("render: {} rendered, {} reused", r.rendered, r.reused);
    for t in &r.tables {
        for (k, m) in t.models.iter().enumerate() {
            println!(
                "{} {m}: {} of {} monotonic up",
                t.effect,
                t.count(k, timbre_core::stats::TrendClass::MonotonicUp),
                t.rows.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("timbre-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lae2_core::experiment::{
    write_ablation, write_comparison, write_containment, write_generated_trace, write_topk, ExperimentConfig,
    RunSummary,
};

/// Trace-driven cache replacement experiments.
#[derive(Parser, Debug)]
#[command(name = "lae2", version, about)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Hit rate of every configured policy at every cache size, plus Belady.
    RunComparison(Common),
    /// LA-E2 hit rate across the configured top-k values.
    RunTopk(Common),
    /// E2-only, prediction-only and LA-E2 windowed hit-rate series.
    RunAblation(Common),
    /// Fraction of optimal evictions contained in the predictor's top-k.
    RunContainment(Common),
    /// Write the configured trace in canonical text form.
    GenTrace(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key=value experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out` key; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed (overrides the config's `seed` key).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, common) = match &cli.verb {
        Verb::RunComparison(c) => ("run-comparison", c),
        Verb::RunTopk(c) => ("run-topk", c),
        Verb::RunAblation(c) => ("run-ablation", c),
        Verb::RunContainment(c) => ("run-containment", c),
        Verb::GenTrace(c) => ("gen-trace", c),
    };
    let cfg = match ExperimentConfig::load(&common.config, common.seed) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return ExitCode::from(1);
        }
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let threads = common.threads.max(1);
    let result = match cli.verb {
        Verb::RunComparison(_) => write_comparison(&cfg, &out, threads),
        Verb::RunTopk(_) => write_topk(&cfg, &out, threads),
        Verb::RunAblation(_) => write_ablation(&cfg, &out, threads),
        Verb::RunContainment(_) => write_containment(&cfg, &out, threads),
        Verb::GenTrace(_) => write_generated_trace(&cfg, &out),
    };
    match result {
        Ok(RunSummary { files, failed_cells }) => {
            for f in &files {
                println!("{}", f.display());
            }
            if failed_cells > 0 {
                eprintln!("{verb}: {failed_cells} cell(s) failed; see the error column");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {verb}: {e}");
            ExitCode::from(1)
        }
    }
}

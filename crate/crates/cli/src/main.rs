use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cutin_core::io::{cmd_comparison, cmd_one_case, cmd_post_process, RunConfig, SEED_ENV};

/// Cut-in safety simulations: single runs, model comparisons and their
/// post-processing.
#[derive(Debug, Parser)]
#[command(name = "cutin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario with one model; writes trace.csv and verdict.json.
    /// Exits with 2 when the run ends in a collision.
    #[command(alias = "one_case")]
    OneCase {
        #[arg(long)]
        config: PathBuf,
        /// Model name, overriding the config's model list.
        #[arg(long)]
        model: Option<String>,
        /// Output directory [default: out/<config hash>].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the configured grid with every configured model.
    Comparison {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads [default: one per core].
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize a comparison run: Gaussian TTC fit, histograms, densities.
    #[command(aliases = ["post_process", "post_processing"])]
    PostProcess {
        #[arg(long)]
        results: PathBuf,
        /// Critical TTC in seconds [default: the run's thresholds.ttc_critical_s].
        #[arg(long)]
        ttc_crit: Option<f64>,
    },
}

fn load(path: &Path) -> cutin_core::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
    Ok(cfg)
}

fn run(cli: Cli) -> cutin_core::Result<ExitCode> {
    match cli.command {
        Command::OneCase { config, model, out } => {
            let cfg = load(&config)?;
            let res = cmd_one_case(&cfg, model.as_deref(), out.as_deref())?;
            let v = &res.verdict;
            let ttc = v.min_ttc_s.map_or("inf".to_string(), |t| format!("{t:.3}"));
            println!(
                "{}: collided={} min_ttc={ttc} s class={} -> {}",
                v.model,
                v.collided,
                v.classification.name(),
                res.out_dir.display()
            );
            Ok(if v.collided { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Comparison { config, out, jobs } => {
            let cfg = load(&config)?;
            let res = cmd_comparison(&cfg, out.as_deref(), jobs)?;
            for f in &res.manifest.files {
                println!("{}: {} rows ({} errors) -> {}", f.model, f.rows, f.errors, f.path);
            }
            println!("wrote {}", res.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::PostProcess { results, ttc_crit } => {
            let res = cmd_post_process(&results, ttc_crit)?;
            println!("model      mean_ttc  std_ttc  P(ttc<{:.2})  n", res.summary.ttc_crit_s);
            for m in &res.summary.models {
                match (m.mean_ttc, m.std_ttc, m.prob_below) {
                    (Some(mu), Some(sd), Some(p)) => {
                        println!("{:<10} {mu:>8.4} {sd:>8.4} {p:>11.4}  {}", m.model, m.n)
                    }
                    _ => println!(
                        "{:<10} unavailable: {}",
                        m.model,
                        m.unavailable.as_deref().unwrap_or("no data")
                    ),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

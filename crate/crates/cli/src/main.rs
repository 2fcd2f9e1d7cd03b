use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use clozeprobe_cli::pipeline::{self, RunDir};
use clozeprobe_cli::{exit_code, Overrides, RunConfig, EXIT_VALIDATION};
use clozeprobe_core::{ItemsPerCell, ScorerSpec};

/// Attractor cloze probes: generate items, score them with language
/// models, and report accuracy and relative probability.
///
/// Settings come from built-in defaults, then the --config file, then
/// flags; later sources win.
#[derive(Parser)]
#[command(name = "clozeprobe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate probe items and the run manifest.
    Generate(Common),
    /// Score items and base contexts with every configured scorer.
    Score(Common),
    /// Compute per-item metrics and base competence.
    Evaluate(Common),
    /// Write tables and plots.
    Report(Common),
    /// All four stages in order.
    Run(RunArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory [default: runs/default].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scorer as family:model_id, e.g. mock:oracle or causal:gpt2. Repeatable;
    /// replaces the configured scorers.
    #[arg(long = "scorer")]
    scorers: Vec<ScorerSpec>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Items sampled per condition and base pair, or "exhaustive".
    #[arg(long)]
    items_per_cell: Option<ItemsPerCell>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Reproduce a recorded run from its manifest into --out.
    #[arg(long, conflicts_with_all = ["config", "seed", "scorers", "items_per_cell"])]
    manifest: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            scorers: self.scorers.clone(),
            workers: self.workers,
            items_per_cell: self.items_per_cell,
        }
    }

    fn file_config(&self) -> Result<Option<RunConfig>> {
        Ok(match &self.config {
            Some(p) => Some(RunConfig::load(p)?),
            None => None,
        })
    }

    /// Full configuration for stages that start from scratch.
    fn fresh(&self) -> Result<RunConfig> {
        let mut cfg = self.file_config()?.unwrap_or_default();
        cfg.apply(&self.overrides());
        Ok(cfg)
    }

    /// Configuration for stages that continue an existing run directory.
    fn continuing(&self) -> Result<(RunConfig, clozeprobe_core::ItemBank)> {
        let file = self.file_config()?;
        let dir = match (&self.out, &file) {
            (Some(out), _) => out.clone(),
            (None, Some(f)) => f.out_dir(),
            (None, None) => RunConfig::default().out_dir(),
        };
        let o = self.overrides();
        pipeline::resolve_for_stage(&RunDir(dir), file, |c| c.apply(&o))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.fresh()?;
            let bank = cfg.validate()?;
            let s = pipeline::cmd_generate(&cfg, &bank, None)?;
            println!("run {}: {} items over {} conditions in {}", s.run_id, s.items, s.conditions, cfg.out_dir().display());
        }
        Command::Score(args) => {
            let (cfg, bank) = args.continuing()?;
            let s = pipeline::cmd_score(&cfg, &bank)?;
            println!("scored {} contexts with {} scorers", s.records, s.scorers);
        }
        Command::Evaluate(args) => {
            let (cfg, bank) = args.continuing()?;
            let s = pipeline::cmd_evaluate(&cfg, &bank)?;
            print_evaluate(&s);
        }
        Command::Report(args) => {
            let (cfg, _) = args.continuing()?;
            let s = pipeline::cmd_report(&cfg)?;
            println!("wrote {} tables and {} plots", s.tables, s.plots);
        }
        Command::Run(args) => {
            let (cfg, bank, created) = match &args.manifest {
                Some(m) => {
                    let out = args.common.out.clone().unwrap_or_else(|| RunConfig::default().out_dir());
                    let (cfg, bank, created) = pipeline::from_manifest(m, out, args.common.workers)?;
                    (cfg, bank, Some(created))
                }
                None => {
                    let cfg = args.common.fresh()?;
                    let bank = cfg.validate()?;
                    (cfg, bank, None)
                }
            };
            let s = pipeline::cmd_run(&cfg, &bank, created)?;
            println!("run {}: {} items, {} scored contexts", s.generate.run_id, s.generate.items, s.score.records);
            print_evaluate(&s.evaluate);
            println!("wrote {} tables and {} plots to {}", s.report.tables, s.report.plots, cfg.out_dir().display());
        }
    }
    Ok(())
}

fn print_evaluate(s: &pipeline::EvaluateSummary) {
    println!("{} metric records", s.records);
    for (scorer, correct, total) in &s.base_competence {
        println!("base competence {scorer}: {correct}/{total}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

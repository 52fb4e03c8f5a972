use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use styleforge::config::ExperimentConfig;
use styleforge::experiment::{emit_report, Run, StageStatus};
use styleforge::trainer::{aggregate_results, published_table, ExperimentReport, Metrics};
use styleforge::Error;

/// Neural style transfer as data augmentation: desk-scale experiment driver.
#[derive(Parser, Debug)]
#[command(name = "styleforge", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment config (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset root; overrides `dataset_root` from the config.
    #[arg(long, global = true)]
    root: Option<PathBuf>,
    /// Global seed; overrides the config and STYLEFORGE_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Recompute outputs even when they already exist.
    #[arg(long, global = true)]
    force_rerun: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the two-class procedural corpus.
    GenData {
        #[arg(long)]
        per_class: Option<usize>,
        /// Square image side in pixels.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train the feature network on the reserved real pool.
    TrainFeatnet,
    /// Synthesise benign-content × malignant-style images.
    Synth,
    /// Score synthetic images and assign balanced pseudo-labels.
    PseudoLabel,
    /// Build and audit the k-fold plan.
    Split {
        /// Add one deliberate leak chosen by this seed (audit demo).
        #[arg(long, value_name = "SEED")]
        inject_leakage: Option<u64>,
    },
    /// Train classifiers for every architecture, regime and fold.
    Train,
    /// Score trained classifiers on their real test folds.
    Evaluate,
    /// Write the per-fold AUC table (text and JSON).
    Report {
        /// Metrics files to tabulate instead of the run's own.
        #[arg(long, num_args = 1..)]
        metrics: Vec<PathBuf>,
        /// Tabulate the published reference fold values.
        #[arg(long, conflicts_with = "metrics")]
        published: bool,
        /// Decimals in the text table; omit for full precision.
        #[arg(long)]
        precision: Option<usize>,
        /// Output path stem for <stem>.txt and <stem>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage in order.
    RunAll,
}

fn load_config(g: &Global) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(r) = &g.root {
        cfg.dataset_root = r.clone();
    }
    Ok(cfg)
}

fn status(stage: &str, s: StageStatus) {
    match s {
        StageStatus::Ran => println!("{stage}: done"),
        StageStatus::UpToDate => println!("{stage}: up to date (use --force-rerun to recompute)"),
    }
}

fn write_report(report: &ExperimentReport, stem: &Path, precision: Option<usize>) -> Result<(), Error> {
    let text = report.render_text(precision);
    fs::write(stem.with_extension("txt"), &text)?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(stem.with_extension("json"), json)?;
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli.global)?;
    if let Command::GenData { per_class, size } = &cli.command {
        if let Some(n) = per_class {
            cfg.corpus.per_class = *n;
        }
        if let Some(s) = size {
            cfg.corpus.height = *s;
            cfg.corpus.width = *s;
        }
    }
    let jobs = cli
        .global
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if let Command::Report { metrics, published, precision, out } = &cli.command {
        if *published || !metrics.is_empty() {
            let report = if *published {
                aggregate_results(&published_table())?
            } else {
                let mut ms = Vec::new();
                for p in metrics {
                    let text = fs::read_to_string(p)
                        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", p.display())))?;
                    let m: Metrics = serde_json::from_str(&text)?;
                    ms.push(m);
                }
                emit_report(&ms)?
            };
            match out {
                Some(stem) => write_report(&report, stem, *precision)?,
                None => print!("{}", report.render_text(*precision)),
            }
            return Ok(());
        }
    }
    let run = Run::new(cfg, jobs, cli.global.force_rerun)?;
    match cli.command {
        Command::GenData { .. } => status("gen-data", run.gen_data()?),
        Command::TrainFeatnet => status("train-featnet", run.train_featnet()?),
        Command::Synth => status("synth", run.synth()?),
        Command::PseudoLabel => status("pseudo-label", run.pseudo_label()?),
        Command::Split { inject_leakage } => status("split", run.split(inject_leakage)?),
        Command::Train => status("train", run.train()?),
        Command::Evaluate => status("evaluate", run.evaluate()?),
        Command::Report { precision, out, .. } => {
            let report = run.report()?;
            if let Some(stem) = out {
                write_report(&report, &stem, precision)?;
            } else {
                print!("{}", report.render_text(precision.or(Some(3))));
            }
        }
        Command::RunAll => {
            let report = run.run_all()?;
            print!("{}", report.render_text(Some(3)));
            println!("report written to {}", run.path("report.txt").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.global.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

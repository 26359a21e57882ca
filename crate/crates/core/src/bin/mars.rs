use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mars::gateway::{BackendKind, MockScript};
use mars::pipeline::{self, files, Config, Runtime, RuntimeOptions};
use mars::taxonomy::{FailureAnalysis, FailureRecord, RunRecord};
use mars::{fixtures, Error, Result};

#[derive(Parser)]
#[command(
    name = "mars",
    version,
    about = "Failure-driven prompt enhancement pipeline"
)]
struct Cli {
    /// TOML config holding model bindings and strategy defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the backend of every model binding.
    #[arg(long, global = true)]
    backend: Option<BackendKind>,
    /// JSON mock script for the mock backend.
    #[arg(long, global = true)]
    mock_script: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Content-addressed response cache directory.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    parallelism: usize,
    /// Enhancement cycles; more than one re-enters on residual failures.
    #[arg(long, global = true, default_value_t = 1)]
    cycles: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the base prompt and collect failed questions.
    RunBaseline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run only the training split and write train/val/test files.
        #[arg(long)]
        split: bool,
    },
    /// Diagnose each failed question.
    Diagnose {
        #[arg(long)]
        failed: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Group analyses by type-topic key.
    Group {
        #[arg(long)]
        analyses: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize one enhancement per group; renders prompts when
    /// categories are given.
    Synthesize {
        #[arg(long)]
        groups: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        failed: Option<PathBuf>,
        #[arg(long)]
        categories_from: Option<PathBuf>,
    },
    /// Run every enhancement phase in one go.
    Enhance {
        #[arg(long)]
        failed: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset whose categories also get prompts; required for --cycles > 1.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Select a variant per category and score every arm on the test split.
    Hybrid {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize result files and compute gain statistics.
    Report {
        #[arg(long = "results", required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the planted demo dataset along with its mock script and config.
    Fixture {
        #[arg(long)]
        out: PathBuf,
    },
}

fn runtime(cli: &Cli) -> Result<Runtime> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mock_script = cli
        .mock_script
        .as_deref()
        .map(MockScript::load)
        .transpose()?;
    Runtime::new(
        config,
        RuntimeOptions {
            backend: cli.backend,
            mock_script,
            seed: cli.seed,
            cache_dir: cli.cache_dir.clone(),
            parallelism: cli.parallelism,
        },
    )
}

fn categories(paths: &[Option<&Path>]) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for p in paths.iter().flatten() {
        out.extend(files::read_dataset(p)?.into_iter().map(|i| i.category));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::RunBaseline {
            dataset,
            out,
            split,
        } => {
            let rt = runtime(cli)?;
            let b = pipeline::run_baseline(&rt, &files::read_dataset(dataset)?, *split, out)?;
            println!("{} items, {} failed", b.records.len(), b.failed.len());
        }
        Command::Diagnose { failed, out } => {
            let rt = runtime(cli)?;
            let d = pipeline::diagnose(&rt, &files::read_jsonl::<FailureRecord>(failed)?, out)?;
            println!("{} analyses, {} skipped", d.analyses.len(), d.skipped.len());
        }
        Command::Group { analyses, out } => {
            files::ensure_dir(out)?;
            for g in pipeline::group(&files::read_jsonl::<FailureAnalysis>(analyses)?, out)? {
                println!("{:>4}  {}", g.len(), g.key());
            }
        }
        Command::Synthesize {
            groups,
            out,
            failed,
            categories_from,
        } => {
            let rt = runtime(cli)?;
            files::ensure_dir(out)?;
            let s = pipeline::synthesize(&rt, &pipeline::read_groups(groups)?, out)?;
            let mut cats = categories(&[categories_from.as_deref()])?;
            if let Some(f) = failed {
                cats.extend(
                    files::read_jsonl::<FailureRecord>(f)?
                        .into_iter()
                        .map(|r| r.category),
                );
            }
            if !cats.is_empty() {
                pipeline::render(&rt, &s.enhancements, &cats, out)?;
            }
            println!(
                "{} enhancements, {} skipped",
                s.enhancements.len(),
                s.skipped.len()
            );
        }
        Command::Enhance {
            failed,
            out,
            dataset,
        } => {
            let rt = runtime(cli)?;
            let items = match dataset {
                Some(d) => files::read_dataset(d)?,
                None => Vec::new(),
            };
            let failed = files::read_jsonl::<FailureRecord>(failed)?;
            let e = pipeline::enhance(&rt, &failed, &BTreeSet::new(), &items, cli.cycles, out)?;
            println!(
                "{} groups, {} enhancements, {} prompts, {} cycle(s)",
                e.groups.len(),
                e.enhancements.len(),
                e.prompts.len(),
                e.cycles_run
            );
        }
        Command::Hybrid {
            dataset,
            prompts,
            out,
        } => {
            let rt = runtime(cli)?;
            let h = pipeline::hybrid(
                &rt,
                &files::read_dataset(dataset)?,
                &files::read_prompts(prompts)?,
                out,
            )?;
            print!("{}", pipeline::hybrid_report(&h.policy, &h.scores));
        }
        Command::Report { results, out } => {
            let mut records = Vec::new();
            for p in results {
                records.extend(files::read_jsonl::<RunRecord>(p)?);
            }
            files::ensure_dir(out)?;
            let r = pipeline::report(&records, out)?;
            print!("{}", pipeline::report::summary_text(&r.rows));
            match &r.stats {
                Ok(s) => print!("{s}"),
                Err(e) => println!("gain statistics unavailable: {e}"),
            }
        }
        Command::Fixture { out } => {
            files::write_jsonl(&out.join("dataset.jsonl"), &fixtures::planted_dataset())?;
            files::write_text(
                &out.join("mock_script.json"),
                &serde_json::to_string_pretty(&fixtures::planted_script())?,
            )?;
            let toml = toml::to_string(&fixtures::planted_config())
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            files::write_text(&out.join("config.toml"), &toml)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_provider_exhaustion() { 2 } else { 1 })
        }
    }
}

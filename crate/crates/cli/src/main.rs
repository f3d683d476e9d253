use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use dialectqa::config::EvalConfig;
use dialectqa::report::{parse_csv_report, render_report, score_run, ReportFormat};
use dialectqa::runner::{build_backend, run_eval, run_translate};

#[derive(Parser)]
#[command(name = "dialectqa", version, about = "Dialect-aware privacy policy QA evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an evaluation run, or resume an interrupted one.
    Run {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Id of an earlier run to resume (skips completed pairs,
        /// retries failed ones).
        #[arg(long)]
        resume: Option<String>,
    },
    /// Score trace files against gold answers and emit a CSV report.
    Score {
        /// Trace file, or directory whose *.jsonl files are all read.
        /// Repeatable.
        #[arg(long, required = true)]
        traces: Vec<PathBuf>,
        /// Gold dataset: .tsv for classification, .json for extraction.
        #[arg(long)]
        gold: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a CSV report produced by `score`.
    Report {
        /// CSV report file.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Plain)]
        format: FormatArg,
    },
    /// Run only the translation step and score it against SAE references.
    Translate {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Plain,
}

impl From<FormatArg> for ReportFormat {
    fn from(value: FormatArg) -> ReportFormat {
        match value {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Plain => ReportFormat::Plain,
        }
    }
}

/// Directories expand to their .jsonl files in name order; plain paths
/// pass through untouched.
fn expand_traces(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut expanded = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found = Vec::new();
            for entry in
                fs::read_dir(path).with_context(|| format!("reading {}", path.display()))?
            {
                let candidate = entry?.path();
                if candidate.extension().is_some_and(|ext| ext == "jsonl") {
                    found.push(candidate);
                }
            }
            if found.is_empty() {
                bail!("no .jsonl trace files under {}", path.display());
            }
            found.sort();
            expanded.extend(found);
        } else {
            expanded.push(path.clone());
        }
    }
    Ok(expanded)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, resume } => {
            let config = EvalConfig::load(&config)?;
            let backend = build_backend(&config)?;
            let outcome = run_eval(&config, backend.as_ref(), resume.as_deref())?;
            let counts = &outcome.manifest.counts;
            println!(
                "run {}: {} completed, {} failed of {} pairs ({} parse fallbacks)",
                outcome.manifest.run_id,
                counts.completed,
                counts.failed,
                counts.total,
                counts.parse_failures
            );
            println!("traces:   {}", outcome.trace_path.display());
            println!("manifest: {}", outcome.manifest_path.display());
            if counts.failed > 0 {
                bail!(
                    "{} pairs failed; rerun with --resume {} to retry them",
                    counts.failed,
                    outcome.manifest.run_id
                );
            }
            Ok(())
        }
        Command::Score { traces, gold, out } => {
            let traces = expand_traces(&traces)?;
            let table = score_run(&traces, &gold)?;
            let csv = render_report(&table, ReportFormat::Csv)?;
            match out {
                Some(path) => {
                    fs::write(&path, &csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("report written to {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Report { input, format } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let table = parse_csv_report(&text)?;
            print!("{}", render_report(&table, format.into())?);
            Ok(())
        }
        Command::Translate { config } => {
            let config = EvalConfig::load(&config)?;
            let backend = build_backend(&config)?;
            let outcome = run_translate(&config, backend.as_ref())?;
            println!("translations: {}", outcome.path.display());
            for score in &outcome.per_dialect {
                println!(
                    "{:<12} n={:<4} bleu={:7.2} rouge_l={:7.2}",
                    score.dialect_id, score.n, score.bleu, score.rouge_l
                );
            }
            let overall = &outcome.overall;
            println!(
                "{:<12} n={:<4} bleu={:7.2} rouge_l={:7.2}",
                "overall", overall.n, overall.bleu, overall.rouge_l
            );
            Ok(())
        }
    }
}

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use spanrel::schema::TaskName;
use spanrel_cli::commands::{self, Outcome};
use spanrel_cli::config::RunConfig;
use spanrel_cli::{classify, EXIT_ERROR, EXIT_OK};

/// Span/relation models for structured prediction tasks.
///
/// Every command prints a JSON report on stdout and a one-line summary on
/// stderr. Exit status is 0 on success, 2 on malformed input and 1 on any
/// other failure. SPANREL_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "spanrel", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Task name (NER, RE, Coref, OpenIE, SRL, Dep, Consti, POS, ABSA, ORL).
    #[arg(long, global = true)]
    task: Option<TaskName>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus to BRAT standoff.
    Convert {
        /// conll2003_ner, conllu_dep, ptb_bracketed, props_srl or brat.
        #[arg(long)]
        format: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Check a BRAT directory against a task schema.
    Validate { dir: PathBuf },
    /// Train a model from a run configuration.
    Train,
    /// Decode a BRAT directory with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Score predicted BRAT documents against gold ones.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Compare the attention maps of two models.
    Analyze {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluate every task directory (gold/ and pred/) under a root.
    Benchmark { dir: PathBuf },
    /// Write a rule-generated BRAT corpus.
    Synth {
        /// relations or entities.
        #[arg(long, default_value = "relations")]
        corpus: String,
        #[arg(long, default_value_t = 500)]
        sentences: usize,
    },
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| anyhow!("--{flag} is required"))
}

fn task(cli: &Cli) -> Result<TaskName> {
    cli.task.ok_or_else(|| anyhow!("--task is required"))
}

fn run(cli: &Cli) -> Result<Outcome> {
    let config = match (&cli.command, &cli.config) {
        (Command::Train, _) | (_, None) => None,
        (_, Some(p)) => Some(RunConfig::load(p)?),
    };
    let config = config.as_ref();
    match &cli.command {
        Command::Convert { format, inputs } => commands::cmd_convert(format, inputs, required(&cli.out, "out")?, cli.task, config),
        Command::Validate { dir } => commands::cmd_validate(dir, task(cli)?, config),
        Command::Train => commands::cmd_train(required(&cli.config, "config")?, cli.seed, cli.out.as_deref()),
        Command::Predict { model, data } => commands::cmd_predict(model, data, cli.task, required(&cli.out, "out")?),
        Command::Evaluate { gold, pred } => commands::cmd_evaluate(gold, pred, task(cli)?, config),
        Command::Analyze { model_a, model_b, data } => commands::cmd_analyze(model_a, model_b, data, required(&cli.out, "out")?),
        Command::Benchmark { dir } => commands::cmd_benchmark(dir, cli.out.as_deref()),
        Command::Synth { corpus, sentences } => {
            commands::cmd_synth(corpus, *sentences, cli.seed.unwrap_or(0), required(&cli.out, "out")?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (code, report) = match run(&cli) {
        Ok(Outcome { report, ok, summary }) => {
            eprintln!("{summary}");
            (if ok { EXIT_OK } else { EXIT_ERROR }, report)
        }
        Err(e) => {
            let (code, msg) = classify(&e);
            eprintln!("error: {msg}");
            (code, json!({"ok": false, "error": msg}))
        }
    };
    // a closed pipe (`spanrel ... | head`) is not a command failure
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    ExitCode::from(code as u8)
}

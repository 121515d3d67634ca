//! `stackner` command-line driver.

mod commands;
mod config;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stackner::{Error, ErrorKind, Result};

use commands::{EnsembleArgs, EvalArgs, PredictArgs, TrainArgs};
use config::{RunConfig, Task};

#[derive(Parser)]
#[command(name = "stackner", version, about = "Stacked-embedding NER and text classification")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the three-fold bagging plan.
    SplitFolds {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one tagger.
    TrainNer(TrainCmd),
    /// Train one sentence classifier.
    TrainClf(TrainCmd),
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model_dir: PathBuf,
        /// Column corpus (NER) or TSV (classification).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ctx_file: Option<PathBuf>,
        #[arg(long)]
        sent_file: Option<PathBuf>,
        #[arg(long)]
        has_pos: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a prediction file against gold.
    Evaluate {
        #[arg(long, value_enum)]
        task: Task,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Entity types to keep (comma-separated or repeated).
        #[arg(long, value_delimiter = ',')]
        include_types: Vec<String>,
        #[arg(long)]
        has_pos: bool,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Majority vote over fold models, training them unless given.
    Ensemble {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        folds: Option<PathBuf>,
        /// Existing member models (confident model first), or a single base directory to train into.
        #[arg(long)]
        model_dir: Vec<PathBuf>,
        #[arg(long)]
        ctx_file: Option<PathBuf>,
        #[arg(long)]
        sent_file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        include_types: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    model_dir: Option<PathBuf>,
    #[arg(long)]
    folds: Option<PathBuf>,
    /// Train on this fold of the plan instead of the given split.
    #[arg(long)]
    fold: Option<usize>,
    /// Contextual token vectors for the training corpus (NER).
    #[arg(long)]
    ctx_file: Option<PathBuf>,
    /// Sentence embeddings for the training texts (classification).
    #[arg(long)]
    sent_file: Option<PathBuf>,
}

fn load_config(args: &ConfigArgs, task: Option<Task>) -> Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(task) = task.filter(|&t| t != config.task) {
        return Err(Error::Config(format!(
            "configuration is for task {:?}, command needs {task:?}",
            config.task
        )));
    }
    config.finalize()?;
    Ok(config)
}

fn type_filter(flag: Vec<String>, config: Option<&RunConfig>) -> Option<BTreeSet<String>> {
    if !flag.is_empty() {
        return Some(flag.into_iter().collect());
    }
    config
        .and_then(|c| c.include_types.clone())
        .map(|v| v.into_iter().collect())
}

fn train(cmd: &TrainCmd, task: Task) -> Result<()> {
    let config = load_config(&cmd.cfg, Some(task))?;
    let embedding_file = match task {
        Task::Ner => cmd.ctx_file.as_deref(),
        Task::Clf => cmd.sent_file.as_deref(),
    };
    let args = TrainArgs {
        model_dir: cmd.model_dir.as_deref(),
        folds: cmd.folds.as_deref(),
        fold: cmd.fold,
        embedding_file,
    };
    match task {
        Task::Ner => commands::train_ner(&config, &args).map(drop),
        Task::Clf => commands::train_clf(&config, &args),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SplitFolds { cfg, out } => {
            let config = load_config(&cfg, None)?;
            commands::split_folds(&config, out.as_deref()).map(drop)
        }
        Command::TrainNer(cmd) => train(&cmd, Task::Ner),
        Command::TrainClf(cmd) => train(&cmd, Task::Clf),
        Command::Predict {
            model_dir,
            input,
            ctx_file,
            sent_file,
            has_pos,
            out,
        } => commands::predict(&PredictArgs {
            model_dir: &model_dir,
            input: &input,
            ctx_file: ctx_file.as_deref(),
            sent_file: sent_file.as_deref(),
            has_pos,
            out: out.as_deref(),
        }),
        Command::Evaluate {
            task,
            gold,
            pred,
            include_types,
            has_pos,
            out,
        } => commands::evaluate(&EvalArgs {
            task,
            gold: &gold,
            pred: &pred,
            include_types: type_filter(include_types, None),
            has_pos,
            out: out.as_deref(),
        })
        .map(drop),
        Command::Ensemble {
            cfg,
            folds,
            model_dir,
            ctx_file,
            sent_file,
            include_types,
            out,
        } => {
            let config = load_config(&cfg, None)?;
            commands::ensemble(
                &config,
                &EnsembleArgs {
                    model_dirs: &model_dir,
                    folds: folds.as_deref(),
                    ctx_file: ctx_file.as_deref(),
                    sent_file: sent_file.as_deref(),
                    include_types: type_filter(include_types, Some(&config)),
                    out: out.as_deref(),
                },
            )
            .map(drop)
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Runtime => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut source = std::error::Error::source(&e);
            let mut message = e.to_string();
            while let Some(s) = source {
                if !message.contains(&s.to_string()) {
                    message.push_str(&format!(": {s}"));
                }
                source = s.source();
            }
            eprintln!("error: {message}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}


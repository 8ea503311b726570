use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rrgru::cli;
use rrgru::config::RunConfig;

/// Relation classification with range-restricted bidirectional GRUs and
/// attention pooling.
#[derive(Parser)]
#[command(name = "rrgru", version, about)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Opts {
    /// key=value configuration file; flags below override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    train_file: Option<PathBuf>,

    #[arg(long, global = true)]
    test_file: Option<PathBuf>,

    /// GloVe-format text embeddings
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,

    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// full | relation_only | nominals_only | att_bgru
    #[arg(long, global = true)]
    variant: Option<String>,

    /// Nominal window half-width
    #[arg(long, global = true)]
    k: Option<usize>,

    #[arg(long, global = true)]
    epochs: Option<usize>,

    #[arg(long, global = true)]
    batch_size: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the dataset, build the vocabulary, write tokenized caches
    /// and the embedding coverage report
    Preprocess,
    /// Train on the preprocessed cache and save the best-validation
    /// checkpoint
    Train,
    /// Evaluate a checkpoint: metrics plus an official-format prediction
    /// file
    Eval,
    /// Write predictions for a (possibly unlabeled) dataset
    Predict,
    /// Check analytic gradients against finite differences on tiny models
    /// of all four variants
    GradCheck,
}

fn build_config(opts: &Opts) -> rrgru::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &opts.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = &opts.train_file {
        cfg.train_file = Some(v.clone());
    }
    if let Some(v) = &opts.test_file {
        cfg.test_file = Some(v.clone());
    }
    if let Some(v) = &opts.embeddings {
        cfg.embeddings = Some(v.clone());
    }
    if let Some(v) = &opts.checkpoint {
        cfg.checkpoint = Some(v.clone());
    }
    if let Some(v) = &opts.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = opts.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = &opts.variant {
        cfg.set("variant", v)?;
    }
    if let Some(v) = opts.k {
        cfg.model.k = v;
    }
    if let Some(v) = opts.epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = opts.batch_size {
        cfg.train.batch_size = v;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> rrgru::Result<u8> {
    let cfg = build_config(&cli.opts)?;
    match cli.command {
        Command::Preprocess => {
            cli::cmd_preprocess(&cfg)?;
            Ok(0)
        }
        Command::Train => {
            let summary = cli::cmd_train(&cfg)?;
            println!(
                "best epoch {} (valid macro-F1 {:.4}); checkpoint at {}",
                summary.best_epoch,
                summary.best_valid_f1,
                summary.checkpoint_path.display()
            );
            Ok(0)
        }
        Command::Eval => {
            let report = cli::cmd_eval(&cfg)?;
            print!("{}", report.to_tsv());
            Ok(0)
        }
        Command::Predict => {
            let path = cli::cmd_predict(&cfg)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::GradCheck => {
            let ok = cli::cmd_gradcheck(1e-4)?;
            Ok(if ok { 0 } else { 4 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RRGRU_LOG", "info"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

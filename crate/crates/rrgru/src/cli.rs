//! Command implementations behind the `rrgru` binary: preprocess, train,
//! eval, predict, and grad-check.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use crate::autodiff::{grad_check, GradCheckReport};
use crate::config::{derive_seed, seed_stream, RunConfig};
use crate::corpus::{
    self, load_embeddings, random_embeddings, tokenize, EmbeddingMatrix, LabelSet,
    TokenizedExample, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{emit_scorer_file, macro_f1, MetricReport, PredictionRecord};
use crate::net::{
    forward, load_checkpoint, save_checkpoint, Checkpoint, DropoutCtx, ModelConfig, ModelParams,
    Variant,
};
use crate::train::{
    l2_penalty, l2_values, predict_all, ranking_loss, AdaDeltaState, LossConfig, TrainOutcome,
};

pub const TRAIN_CACHE: &str = "train_cache.tsv";
pub const TEST_CACHE: &str = "test_cache.tsv";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const COVERAGE_FILE: &str = "coverage.kv";
pub const RUN_CONFIG_FILE: &str = "run_config.kv";
pub const TRAIN_LOG: &str = "train_log.tsv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const PREDICTIONS_FILE: &str = "predictions.tsv";
pub const METRICS_TSV: &str = "metrics.tsv";
pub const METRICS_KV: &str = "metrics.kv";

fn write_run_config(cfg: &RunConfig) -> Result<()> {
    let path = cfg.out_dir.join(RUN_CONFIG_FILE);
    fs::write(&path, cfg.to_kv()).map_err(|e| Error::io(path.display(), e))
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("{} is required for this command", what)))
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(cfg.out_dir.display(), e))
}

/// Parse + tokenize the raw dataset, build the vocabulary, write the
/// tokenized caches, the vocabulary, and the embedding coverage report.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let train_path = require(&cfg.train_file, "train_file")?;

    let raw_train = corpus::parse_semeval(train_path)?;
    info!("parsed {} training sentences", raw_train.len());
    let mut vocab = Vocabulary::new();
    let train_tok: Vec<TokenizedExample> = raw_train
        .iter()
        .map(|ex| tokenize(ex, &mut vocab, false))
        .collect::<Result<_>>()?;
    corpus::write_cache(&cfg.out_dir.join(TRAIN_CACHE), &train_tok)?;

    if let Some(test_path) = &cfg.test_file {
        let raw_test = corpus::parse_semeval(test_path)?;
        info!("parsed {} test sentences", raw_test.len());
        let test_tok: Vec<TokenizedExample> = raw_test
            .iter()
            .map(|ex| tokenize(ex, &mut vocab, true))
            .collect::<Result<_>>()?;
        corpus::write_cache(&cfg.out_dir.join(TEST_CACHE), &test_tok)?;
    }

    vocab.write_file(&cfg.out_dir.join(VOCAB_FILE))?;
    info!("vocabulary of {} tokens", vocab.len());

    if let Some(emb_path) = &cfg.embeddings {
        let (_, stats) = load_embeddings(
            emb_path,
            &vocab,
            cfg.model.d_e,
            derive_seed(cfg.train.seed, "embeddings"),
        )?;
        let report = format!(
            "found={}\nrandom={}\nvocab_size={}\ncoverage={:.4}\nseed={}\n",
            stats.found,
            stats.random,
            stats.vocab_size,
            stats.found as f64 / stats.vocab_size as f64,
            cfg.train.seed,
        );
        let path = cfg.out_dir.join(COVERAGE_FILE);
        fs::write(&path, report).map_err(|e| Error::io(path.display(), e))?;
        info!(
            "embeddings cover {}/{} tokens",
            stats.found, stats.vocab_size
        );
    }

    write_run_config(cfg)
}

fn load_embedding_matrix(cfg: &RunConfig, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
    let seed = derive_seed(cfg.train.seed, "embeddings");
    match &cfg.embeddings {
        Some(path) => {
            let (matrix, stats) = load_embeddings(path, vocab, cfg.model.d_e, seed)?;
            info!(
                "loaded embeddings: {}/{} tokens covered",
                stats.found, stats.vocab_size
            );
            Ok(matrix)
        }
        None => {
            info!("no embeddings file configured; random initialization");
            Ok(random_embeddings(vocab, cfg.model.d_e, seed))
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint_path: PathBuf,
    pub best_epoch: usize,
    pub best_valid_f1: f64,
    pub epochs_run: usize,
}

/// Train per the config on the preprocessed cache, holding out fold 0 of
/// the k-fold split for validation, and save the best-validation
/// checkpoint plus the per-epoch log.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let vocab = Vocabulary::read_file(&cfg.out_dir.join(VOCAB_FILE))?;
    let data = corpus::read_cache(&cfg.out_dir.join(TRAIN_CACHE))?;
    if data.is_empty() {
        return Err(Error::Contract("training cache is empty".into()));
    }

    let matrix = load_embedding_matrix(cfg, &vocab)?;
    let mut init_rng = seed_stream(cfg.train.seed, "init");
    let mut params = ModelParams::init(&cfg.model, &matrix, &mut init_rng);
    let mut opt = AdaDeltaState::new(&params, cfg.adadelta_rho, cfg.adadelta_eps, cfg.lr_scale);

    let folds = corpus::kfold_split(&data, cfg.folds, derive_seed(cfg.train.seed, "folds"))?;
    let (train_data, valid_data) = &folds[0];
    info!(
        "training on {} examples, validating on {}",
        train_data.len(),
        valid_data.len()
    );

    let outcome: TrainOutcome = crate::train::train_model(
        train_data,
        valid_data,
        &mut params,
        &cfg.model,
        &cfg.train,
        &cfg.loss,
        &mut opt,
        |line| {
            info!(
                "epoch {} loss {:.4} train-acc {:.4} valid-f1 {:.4}",
                line.epoch, line.mean_loss, line.train_accuracy, line.valid_macro_f1
            )
        },
    )?;

    let log_path = cfg.out_dir.join(TRAIN_LOG);
    let log_text: String = outcome
        .log
        .iter()
        .map(|l| l.to_tsv() + "\n")
        .collect();
    fs::write(&log_path, log_text).map_err(|e| Error::io(log_path.display(), e))?;

    let ckpt_path = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join(CHECKPOINT_FILE));
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            cfg: cfg.model.clone(),
            seed: cfg.train.seed,
            vocab_hash: vocab.hash64(),
            vocab_size: vocab.len(),
            params: outcome.best_params,
        },
    )?;
    write_run_config(cfg)?;
    info!(
        "saved checkpoint from epoch {} (valid macro-F1 {:.4}) to {}",
        outcome.best_epoch,
        outcome.best_valid_f1,
        ckpt_path.display()
    );
    Ok(TrainSummary {
        checkpoint_path: ckpt_path,
        best_epoch: outcome.best_epoch,
        best_valid_f1: outcome.best_valid_f1,
        epochs_run: outcome.log.len(),
    })
}

fn load_model(cfg: &RunConfig) -> Result<(Checkpoint, Vocabulary)> {
    let ckpt_path = cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join(CHECKPOINT_FILE));
    let ckpt = load_checkpoint(&ckpt_path)?;
    let vocab = Vocabulary::read_file(&cfg.out_dir.join(VOCAB_FILE))?;
    if vocab.hash64() != ckpt.vocab_hash {
        return Err(Error::Checkpoint(format!(
            "vocabulary hash {:016x} does not match checkpoint hash {:016x}; \
             refusing to evaluate against a different vocabulary",
            vocab.hash64(),
            ckpt.vocab_hash
        )));
    }
    Ok((ckpt, vocab))
}

fn test_examples(cfg: &RunConfig, vocab: &mut Vocabulary) -> Result<Vec<TokenizedExample>> {
    if let Some(path) = &cfg.test_file {
        let raw = corpus::parse_semeval(path)?;
        raw.iter().map(|ex| tokenize(ex, vocab, true)).collect()
    } else {
        let cache = cfg.out_dir.join(TEST_CACHE);
        if !cache.exists() {
            return Err(Error::Config(
                "no test_file configured and no test cache present".into(),
            ));
        }
        corpus::read_cache(&cache)
    }
}

/// Evaluate a checkpoint: metric report plus an official-format
/// prediction file.
pub fn cmd_eval(cfg: &RunConfig) -> Result<MetricReport> {
    ensure_out_dir(cfg)?;
    let (ckpt, mut vocab) = load_model(cfg)?;
    let data = test_examples(cfg, &mut vocab)?;
    if data.is_empty() {
        return Err(Error::Contract("evaluation dataset is empty".into()));
    }

    let preds = predict_all(&ckpt.params, &ckpt.cfg, &data)?;
    let gold: Vec<usize> = data.iter().map(|e| e.label_id).collect();
    let report = macro_f1(&gold, &preds)?;

    let labels = LabelSet::new();
    let records: Vec<PredictionRecord> = data
        .iter()
        .zip(&preds)
        .map(|(ex, &p)| PredictionRecord {
            id: ex.id,
            label: labels.name(p).to_string(),
        })
        .collect();
    emit_scorer_file(&records, &cfg.out_dir.join(PREDICTIONS_FILE))?;

    let tsv_path = cfg.out_dir.join(METRICS_TSV);
    fs::write(&tsv_path, report.to_tsv()).map_err(|e| Error::io(tsv_path.display(), e))?;
    let kv_path = cfg.out_dir.join(METRICS_KV);
    let kv = format!("{}seed={}\n", report.to_kv(), ckpt.seed);
    fs::write(&kv_path, kv).map_err(|e| Error::io(kv_path.display(), e))?;

    info!("macro-F1 (excluding Other): {:.4}", report.macro_f1);
    Ok(report)
}

/// Predict labels for a dataset (labels in the input are optional) and
/// write the scorer-format file.
pub fn cmd_predict(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_out_dir(cfg)?;
    let (ckpt, mut vocab) = load_model(cfg)?;
    let path = require(&cfg.test_file, "test_file")?;
    let raw = corpus::parse_semeval_lenient(path)?;
    let data: Vec<TokenizedExample> = raw
        .iter()
        .map(|ex| tokenize(ex, &mut vocab, true))
        .collect::<Result<_>>()?;
    if data.is_empty() {
        return Err(Error::Contract("prediction dataset is empty".into()));
    }
    let preds = predict_all(&ckpt.params, &ckpt.cfg, &data)?;
    let labels = LabelSet::new();
    let records: Vec<PredictionRecord> = data
        .iter()
        .zip(&preds)
        .map(|(ex, &p)| PredictionRecord {
            id: ex.id,
            label: labels.name(p).to_string(),
        })
        .collect();
    let out = cfg.out_dir.join(PREDICTIONS_FILE);
    emit_scorer_file(&records, &out)?;
    info!("wrote {} predictions to {}", records.len(), out.display());
    Ok(out)
}

/// Fixed tiny dimensions for gradient checking.
pub const GRADCHECK_DIMS: (usize, usize, usize, usize) = (8, 6, 7, 1); // d_e, d_h, N, k

/// Analytic-vs-numeric gradient check of the full training loss on a tiny
/// model of the given variant.
pub fn gradcheck_variant(variant: Variant, tol: f64) -> Result<GradCheckReport> {
    let (d_e, d_h, n, k) = GRADCHECK_DIMS;
    let cfg = ModelConfig {
        d_e,
        d_h,
        k,
        variant,
        ..ModelConfig::default()
    };
    let vocab_size = n; // one distinct token per position
    let ex = TokenizedExample {
        id: 1,
        token_ids: (0..n as u32).collect(),
        p_e1: 2,
        p_e2: 5,
        label_id: 4,
    };
    let lcfg = LossConfig::default();
    let l2_coeff = 1e-5;

    let matrix = EmbeddingMatrix {
        d_e,
        vocab_size,
        data: {
            let mut rng = seed_stream(1702, "gradcheck-emb");
            use rand::Rng;
            (0..d_e * vocab_size).map(|_| rng.gen_range(-0.25..0.25)).collect()
        },
    };
    let mut rng = seed_stream(1702, "gradcheck-init");
    let params = ModelParams::init(&cfg, &matrix, &mut rng);
    let specs = params.to_param_specs();

    let build = |g: &mut crate::autodiff::Graph,
                 leaves: &[crate::autodiff::Value]|
     -> Result<crate::autodiff::Value> {
        let bound = params.bind_values(leaves)?;
        let trace = forward(g, &bound, &cfg, &ex, &mut DropoutCtx::Infer)?;
        let loss = ranking_loss(g, trace.s_c, ex.label_id, &lcfg)?;
        let l2_vals = l2_values(&params, &bound);
        let penalty = l2_penalty(g, &l2_vals, l2_coeff)?;
        g.add(loss, penalty)
    };
    grad_check(&specs, build, 1e-5, tol)
}

/// Run the gradient check across all four variants; true iff every
/// parameter array of every variant is within tolerance.
pub fn cmd_gradcheck(tol: f64) -> Result<bool> {
    let mut all_ok = true;
    for variant in Variant::ALL {
        let report = gradcheck_variant(variant, tol)?;
        let (worst_name, worst_err) = report.worst().unwrap_or(("-", 0.0));
        println!(
            "{}: {} (worst {} = {:.3e}, tol {:.1e})",
            variant.as_str(),
            if report.passed() { "pass" } else { "FAIL" },
            worst_name,
            worst_err,
            tol
        );
        if !report.passed() {
            print!("{}", report);
            all_ok = false;
        }
    }
    Ok(all_ok)
}

//! Training: the margin ranking loss, L2 regularization, inverted dropout,
//! AdaDelta, and the epoch/batch loop with best-checkpoint selection.

mod adadelta;

pub use adadelta::AdaDeltaState;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Value};
use crate::corpus::{TokenizedExample, N_DIRECTIONAL, OTHER_ID};
use crate::error::{Error, Result};
use crate::net::{forward, predict, BoundParams, DropoutCtx, DropoutRates, ModelConfig, ModelParams};

/// How examples labeled Other enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtherLoss {
    /// Only the competitive term, over all classifier rows.
    NegativeOnly,
    /// No loss contribution at all.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub m_plus: f64,
    pub m_minus: f64,
    pub gamma: f64,
    pub other_loss: OtherLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            m_plus: 2.5,
            m_minus: 0.5,
            gamma: 2.0,
            other_loss: OtherLoss::NegativeOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_embed: f64,
    pub dropout_hidden: f64,
    pub dropout_final: f64,
    pub l2_coeff: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            epochs: 100,
            dropout_embed: 0.3,
            dropout_hidden: 0.3,
            dropout_final: 0.7,
            l2_coeff: 1e-5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn dropout_rates(&self) -> DropoutRates {
        DropoutRates {
            embed: self.dropout_embed,
            hidden: self.dropout_hidden,
            fin: self.dropout_final,
        }
    }
}

/// Two-term margin ranking loss over the 18-entry score vector: the gold
/// class is pushed above `m_plus`, the best competitor below `-m_minus`.
/// A gold label of Other omits the positive term and competes over all
/// rows (or contributes nothing, per [`OtherLoss`]).
pub fn ranking_loss(g: &mut Graph, s_c: Value, gold: usize, cfg: &LossConfig) -> Result<Value> {
    let (rows, cols) = g.shape(s_c);
    if rows != N_DIRECTIONAL || cols != 1 {
        return Err(Error::Contract(format!(
            "ranking_loss expects an {}x1 score vector, got {}x{}",
            N_DIRECTIONAL, rows, cols
        )));
    }
    if gold > OTHER_ID {
        return Err(Error::Contract(format!("gold label {} out of range", gold)));
    }

    let scores = g.data(s_c).to_vec();
    let argmax_excluding = |skip: Option<usize>| {
        let mut best = f64::NEG_INFINITY;
        let mut idx = 0;
        for (i, &s) in scores.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if s > best {
                best = s;
                idx = i;
            }
        }
        idx
    };

    if gold == OTHER_ID {
        if cfg.other_loss == OtherLoss::Skip {
            return Ok(g.leaf_vec(&[0.0]));
        }
        let comp = argmax_excluding(None);
        let s_comp = g.pick(s_c, comp)?;
        let scaled = g.scale(s_comp, cfg.gamma);
        let arg = g.shift(scaled, cfg.gamma * cfg.m_minus);
        return Ok(g.softplus(arg));
    }

    let s_gold = g.pick(s_c, gold)?;
    let neg = g.scale(s_gold, -cfg.gamma);
    let pos_arg = g.shift(neg, cfg.gamma * cfg.m_plus);
    let pos_term = g.softplus(pos_arg);

    let comp = argmax_excluding(Some(gold));
    let s_comp = g.pick(s_c, comp)?;
    let scaled = g.scale(s_comp, cfg.gamma);
    let neg_arg = g.shift(scaled, cfg.gamma * cfg.m_minus);
    let neg_term = g.softplus(neg_arg);

    g.add(pos_term, neg_term)
}

/// `coeff * sum of squared entries` over the given bound arrays.
pub fn l2_penalty(g: &mut Graph, arrays: &[Value], coeff: f64) -> Result<Value> {
    if coeff < 0.0 {
        return Err(Error::Contract("l2_penalty requires coeff >= 0".into()));
    }
    if coeff == 0.0 || arrays.is_empty() {
        return Ok(g.leaf_vec(&[0.0]));
    }
    let mut total: Option<Value> = None;
    for &a in arrays {
        let sq = g.mul(a, a)?;
        let s = g.sum(sq);
        total = Some(match total {
            None => s,
            Some(t) => g.add(t, s)?,
        });
    }
    Ok(g.scale(total.expect("non-empty arrays"), coeff))
}

/// Bound values of the arrays inside the L2 scope, aligned by name.
pub fn l2_values(params: &ModelParams, bound: &BoundParams) -> Vec<Value> {
    let names = params.l2_array_names();
    params
        .arrays()
        .iter()
        .zip(bound.values())
        .filter(|(a, _)| names.contains(&a.name.as_str()))
        .map(|(_, v)| v)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: in train mode each entry is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; inference is the
/// identity.
pub fn apply_dropout(
    g: &mut Graph,
    v: Value,
    rate: f64,
    mode: DropoutMode,
    rng: &mut ChaCha8Rng,
) -> Result<Value> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Contract(format!(
            "dropout rate {} outside [0, 1)",
            rate
        )));
    }
    if mode == DropoutMode::Infer || rate == 0.0 {
        return Ok(v);
    }
    let (rows, cols) = g.shape(v);
    let keep_scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
        .collect();
    g.dropout(v, mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// One pass over the data: seeded shuffle, batches of `batch_size`, batch
/// loss = sum of ranking losses + L2 penalty, one AdaDelta step per batch.
/// Accuracy is measured afterwards with dropout off.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    data: &[TokenizedExample],
    params: &mut ModelParams,
    opt: &mut AdaDeltaState,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
    shuffle_rng: &mut ChaCha8Rng,
    dropout_rng: &mut ChaCha8Rng,
) -> Result<EpochReport> {
    if data.is_empty() {
        return Err(Error::Contract("train_epoch on empty data".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(shuffle_rng);

    let rates = tcfg.dropout_rates();
    let mut loss_total = 0.0;
    for batch in order.chunks(tcfg.batch_size) {
        let mut g = Graph::new();
        let bound = params.bind(&mut g)?;
        let mut batch_loss: Option<Value> = None;
        for &i in batch {
            let ex = &data[i];
            let mut ctx = DropoutCtx::Train {
                rates,
                rng: dropout_rng,
            };
            let trace = forward(&mut g, &bound, mcfg, ex, &mut ctx)?;
            let loss = ranking_loss(&mut g, trace.s_c, ex.label_id, lcfg)?;
            loss_total += g.data(loss)[0];
            batch_loss = Some(match batch_loss {
                None => loss,
                Some(acc) => g.add(acc, loss)?,
            });
        }
        let l2_vals = l2_values(params, &bound);
        let penalty = l2_penalty(&mut g, &l2_vals, tcfg.l2_coeff)?;
        let total = g.add(batch_loss.expect("non-empty batch"), penalty)?;
        g.backward(total)?;
        opt.step(params, &mut g, &bound)?;
    }

    let preds = predict_all(params, mcfg, data)?;
    let correct = preds
        .iter()
        .zip(data)
        .filter(|(p, ex)| **p == ex.label_id)
        .count();

    Ok(EpochReport {
        mean_loss: loss_total / data.len() as f64,
        train_accuracy: correct as f64 / data.len() as f64,
    })
}

/// Dropout-free predictions for a whole dataset. Parameters are bound
/// once per chunk so the embedding matrix is not copied per example.
pub fn predict_all(
    params: &ModelParams,
    cfg: &ModelConfig,
    data: &[TokenizedExample],
) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in data.chunks(128) {
        let mut g = Graph::new();
        let bound = params.bind(&mut g)?;
        for ex in chunk {
            let trace = forward(&mut g, &bound, cfg, ex, &mut DropoutCtx::Infer)?;
            out.push(predict(g.data(trace.s_c)));
        }
    }
    Ok(out)
}

/// One line per epoch of the training log.
#[derive(Debug, Clone)]
pub struct EpochLogLine {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub valid_macro_f1: f64,
}

impl EpochLogLine {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}",
            self.epoch, self.mean_loss, self.train_accuracy, self.valid_macro_f1
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the best-validation epoch (last epoch when no
    /// validation set is given).
    pub best_params: ModelParams,
    pub best_epoch: usize,
    pub best_valid_f1: f64,
    pub log: Vec<EpochLogLine>,
}

/// The full training loop: epochs of [`train_epoch`], per-epoch validation
/// macro-F1, and best-checkpoint selection. All randomness flows from the
/// named substreams of `tcfg.seed`.
pub fn train_model(
    train_data: &[TokenizedExample],
    valid_data: &[TokenizedExample],
    params: &mut ModelParams,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
    opt: &mut AdaDeltaState,
    mut on_epoch: impl FnMut(&EpochLogLine),
) -> Result<TrainOutcome> {
    let mut shuffle_rng = crate::config::seed_stream(tcfg.seed, "shuffle");
    let mut dropout_rng = crate::config::seed_stream(tcfg.seed, "dropout");

    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(tcfg.epochs);

    for epoch in 1..=tcfg.epochs {
        let report = train_epoch(
            train_data,
            params,
            opt,
            mcfg,
            tcfg,
            lcfg,
            &mut shuffle_rng,
            &mut dropout_rng,
        )?;
        let valid_f1 = if valid_data.is_empty() {
            f64::NAN
        } else {
            let preds = predict_all(params, mcfg, valid_data)?;
            let gold: Vec<usize> = valid_data.iter().map(|e| e.label_id).collect();
            crate::eval::macro_f1(&gold, &preds)?.macro_f1
        };
        let line = EpochLogLine {
            epoch,
            mean_loss: report.mean_loss,
            train_accuracy: report.train_accuracy,
            valid_macro_f1: valid_f1,
        };
        on_epoch(&line);
        log.push(line);

        let score = if valid_data.is_empty() { epoch as f64 } else { valid_f1 };
        if score > best_f1 {
            best_f1 = score;
            best_epoch = epoch;
            best_params = params.clone();
        }
    }
    if tcfg.epochs == 0 {
        best_epoch = 0;
        best_f1 = f64::NAN;
    }
    Ok(TrainOutcome {
        best_params,
        best_epoch,
        best_valid_f1: best_f1,
        log,
    })
}

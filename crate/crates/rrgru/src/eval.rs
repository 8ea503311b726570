//! Macro-averaged F1 excluding Other (official-metric-compatible),
//! confusion matrix, and scorer-format prediction files.

use std::fs;
use std::path::Path;

use crate::corpus::{LabelSet, N_LABELS, N_RELATIONS};
use crate::error::{Error, Result};

/// One line of a scorer-format prediction file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub id: u32,
    /// Directional label string, e.g. `Entity-Destination(e1,e2)` or `Other`.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationScore {
    pub relation: String,
    pub tp: usize,
    pub gold_count: usize,
    pub pred_count: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_relation: Vec<RelationScore>,
    /// Unweighted mean F1 over the 9 relations, direction-sensitive,
    /// Other excluded as a class. Relations absent from both gold and
    /// predictions drop out of the average.
    pub macro_f1: f64,
    pub accuracy: f64,
    /// `confusion[gold][pred]` over all 19 labels.
    pub confusion: Vec<Vec<usize>>,
}

/// Direction-sensitive scoring: a true positive needs relation AND
/// direction to match; predicted/gold counts per relation aggregate both
/// directions. Other contributes only false positives and negatives.
pub fn macro_f1(gold: &[usize], pred: &[usize]) -> Result<MetricReport> {
    if gold.len() != pred.len() {
        return Err(Error::Contract(format!(
            "gold and predictions differ in length: {} vs {}",
            gold.len(),
            pred.len()
        )));
    }
    let labels = LabelSet::new();
    let mut confusion = vec![vec![0usize; N_LABELS]; N_LABELS];
    for (&g, &p) in gold.iter().zip(pred) {
        if g >= N_LABELS || p >= N_LABELS {
            return Err(Error::Contract(format!("label id out of range: {} / {}", g, p)));
        }
        confusion[g][p] += 1;
    }

    let mut per_relation = Vec::with_capacity(N_RELATIONS);
    let mut f1_sum = 0.0;
    let mut f1_count = 0usize;
    for r in 0..N_RELATIONS {
        let dirs = [2 * r, 2 * r + 1];
        let tp: usize = dirs.iter().map(|&d| confusion[d][d]).sum();
        let gold_count: usize = dirs
            .iter()
            .map(|&d| confusion[d].iter().sum::<usize>())
            .sum();
        let pred_count: usize = dirs
            .iter()
            .map(|&d| confusion.iter().map(|row| row[d]).sum::<usize>())
            .sum();
        let precision = if pred_count == 0 {
            0.0
        } else {
            tp as f64 / pred_count as f64
        };
        let recall = if gold_count == 0 {
            0.0
        } else {
            tp as f64 / gold_count as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if gold_count + pred_count > 0 {
            f1_sum += f1;
            f1_count += 1;
        }
        per_relation.push(RelationScore {
            relation: labels.relation_name(r).to_string(),
            tp,
            gold_count,
            pred_count,
            precision,
            recall,
            f1,
        });
    }

    let correct: usize = (0..N_LABELS).map(|i| confusion[i][i]).sum();
    let accuracy = if gold.is_empty() {
        0.0
    } else {
        correct as f64 / gold.len() as f64
    };

    Ok(MetricReport {
        per_relation,
        macro_f1: if f1_count == 0 { 0.0 } else { f1_sum / f1_count as f64 },
        accuracy,
        confusion,
    })
}

impl MetricReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("relation\tprecision\trecall\tf1\tgold\tpredicted\n");
        for r in &self.per_relation {
            out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\n",
                r.relation, r.precision, r.recall, r.f1, r.gold_count, r.pred_count
            ));
        }
        out.push_str(&format!("macro_f1\t{:.4}\n", self.macro_f1));
        out.push_str(&format!("accuracy\t{:.4}\n", self.accuracy));
        out
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for r in &self.per_relation {
            let key = r.relation.to_lowercase().replace('-', "_");
            out.push_str(&format!("{}_f1={:.6}\n", key, r.f1));
        }
        out.push_str(&format!("macro_f1={:.6}\n", self.macro_f1));
        out.push_str(&format!("accuracy={:.6}\n", self.accuracy));
        out
    }
}

/// Write predictions in the official proposed-answer format: one
/// `<id>\t<label>` line per example, sorted by id.
pub fn emit_scorer_file(preds: &[PredictionRecord], path: &Path) -> Result<()> {
    let mut sorted: Vec<&PredictionRecord> = preds.iter().collect();
    sorted.sort_by_key(|p| p.id);
    for pair in sorted.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(Error::Contract(format!(
                "duplicate prediction id {}",
                pair[0].id
            )));
        }
    }
    let mut out = String::new();
    for p in sorted {
        out.push_str(&format!("{}\t{}\n", p.id, p.label));
    }
    fs::write(path, out).map_err(|e| Error::io(path.display(), e))
}

pub fn parse_scorer_file(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    let labels = LabelSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: "expected <id>\\t<label>".into(),
        })?;
        let id = id.trim().parse().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg: format!("bad id {:?}", id),
        })?;
        if labels.id(label.trim()).is_none() {
            return Err(Error::Label {
                path: path.display().to_string(),
                line: lineno + 1,
                label: label.trim().to_string(),
            });
        }
        out.push(PredictionRecord {
            id,
            label: label.trim().to_string(),
        });
    }
    Ok(out)
}

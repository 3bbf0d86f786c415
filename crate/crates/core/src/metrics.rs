//! Cumulative error rate, generalization gap and run summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::MetricsLog;

/// Number of positions where `predictions` and `labels` differ.
pub fn error_count(predictions: &[usize], labels: &[usize]) -> Result<usize> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(predictions.iter().zip(labels).filter(|(p, y)| p != y).count())
}

/// Cumulative error rate: the sum of per-megabatch test error counts.
pub fn cer(per_megabatch_errors: &[usize]) -> u64 {
    per_megabatch_errors.iter().map(|&e| e as u64).sum()
}

/// `100 · (train_acc − val_acc)` in percentage points; negative values are kept.
pub fn generalization_gap(train_acc: f64, val_acc: f64) -> Result<f64> {
    for (name, v) in [("train", train_acc), ("validation", val_acc)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Parameter(format!("{name} accuracy {v} outside [0, 1]")));
        }
    }
    Ok(100.0 * (train_acc - val_acc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Test accuracy after the last megabatch, in percent.
    pub final_test_acc: f64,
    pub test_total: usize,
    pub cer: u64,
    pub test_errors: Vec<usize>,
    /// Generalization gap after the last megabatch, in percentage points.
    pub final_gen_gap: f64,
    pub gen_gaps: Vec<f64>,
    pub kept_counts: Vec<usize>,
    pub dense_prunable: usize,
    pub config_hash: String,
}

/// Summarizes a complete log. The CER is cross-checked against a recount
/// from the logged per-sample predictions.
pub fn summarize(log: &MetricsLog) -> Result<RunSummary> {
    let n = log.megabatches.len();
    if n == 0 || n != log.config.megabatches {
        return Err(Error::Log(format!(
            "log holds {n} of {} megabatch records",
            log.config.megabatches
        )));
    }
    let test_errors: Vec<usize> = log.megabatches.iter().map(|m| m.test_errors).collect();
    let mut recount = Vec::with_capacity(n);
    for m in &log.megabatches {
        if m.test_total != log.test_labels.len() {
            return Err(Error::Log(format!(
                "megabatch {} evaluated {} samples, test set has {}",
                m.megabatch,
                m.test_total,
                log.test_labels.len()
            )));
        }
        recount.push(error_count(&m.predictions, &log.test_labels).map_err(|e| Error::Log(e.to_string()))?);
    }
    let total = cer(&test_errors);
    if total != cer(&recount) {
        return Err(Error::Log(format!(
            "recorded CER {total} disagrees with {} recounted from predictions",
            cer(&recount)
        )));
    }
    let last = &log.megabatches[n - 1];
    Ok(RunSummary {
        final_test_acc: 100.0 * last.test_acc(),
        test_total: last.test_total,
        cer: total,
        test_errors,
        final_gen_gap: last.gen_gap,
        gen_gaps: log.megabatches.iter().map(|m| m.gen_gap).collect(),
        kept_counts: log.megabatches.iter().map(|m| m.kept_count).collect(),
        dense_prunable: log.dense_prunable,
        config_hash: log.config_hash.clone(),
    })
}

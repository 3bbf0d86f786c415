use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::echo_config;
use super::plot;
use crate::error::{Error, Result};
use crate::harness::{MetricsLog, RunConfig, Variant};
use crate::metrics::{summarize, RunSummary};
use crate::pruners::Pruner;

pub const CURVES_HEADER: [&str; 13] = [
    "run_id",
    "variant",
    "pruner",
    "megabatch",
    "epoch",
    "global_iter",
    "lr",
    "train_acc",
    "train_loss",
    "val_acc",
    "val_loss",
    "kept_count",
    "kept_fraction",
];

/// Contents of `summary.json`: run identity, results and the resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub run_id: String,
    pub variant: Variant,
    pub pruner: Pruner,
    pub config_hash: String,
    pub results: RunSummary,
    pub config: RunConfig,
}

pub fn summary_file(log: &MetricsLog) -> Result<SummaryFile> {
    Ok(SummaryFile {
        run_id: log.run_id.clone(),
        variant: log.config.variant,
        pruner: log.config.pruner,
        config_hash: log.config_hash.clone(),
        results: summarize(log)?,
        config: log.config.clone(),
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<usize>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One row per epoch.
pub fn write_curves_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    let header: Vec<String> = CURVES_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = log.epochs.iter().map(|r| {
        vec![
            log.run_id.clone(),
            log.config.variant.name().to_string(),
            log.config.pruner.name().to_string(),
            r.megabatch.to_string(),
            r.epoch.to_string(),
            r.global_iter.to_string(),
            r.lr.to_string(),
            r.train_acc().to_string(),
            r.train_loss.to_string(),
            r.val_acc().to_string(),
            r.val_loss.to_string(),
            r.kept_count.to_string(),
            (r.kept_count as f64 / log.dense_prunable as f64).to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

/// One row per megabatch with a pruned-fraction column per prunable layer.
pub fn write_megabatches_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    let mut header: Vec<String> = ["megabatch", "test_errors", "test_acc", "gen_gap"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(log.prunable_layers.iter().map(|l| format!("pruned_frac_{l}")));
    let mut rows = Vec::with_capacity(log.megabatches.len());
    for m in &log.megabatches {
        let mut row = vec![
            m.megabatch.to_string(),
            m.test_errors.to_string(),
            m.test_acc().to_string(),
            m.gen_gap.to_string(),
        ];
        for name in &log.prunable_layers {
            let layer = m
                .layers
                .iter()
                .find(|l| &l.name == name)
                .ok_or_else(|| Error::Log(format!("megabatch {} lacks layer {name}", m.megabatch)))?;
            row.push(layer.fraction.to_string());
        }
        rows.push(row);
    }
    write_rows(path, &header, rows)
}

/// Long-format per-layer pruning counts, including the global row.
pub fn write_layers_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    let header: Vec<String> = ["megabatch", "layer", "pruned", "total", "fraction"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = log.megabatches.iter().flat_map(|m| {
        m.layers.iter().map(move |l| {
            vec![
                m.megabatch.to_string(),
                l.name.clone(),
                l.pruned.to_string(),
                l.total.to_string(),
                l.fraction.to_string(),
            ]
        })
    });
    write_rows(path, &header, rows)
}

pub fn write_predictions_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    let header: Vec<String> = ["megabatch", "sample", "label", "prediction"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = log.megabatches.iter().flat_map(|m| {
        m.predictions
            .iter()
            .zip(&log.test_labels)
            .enumerate()
            .map(move |(i, (p, y))| vec![m.megabatch.to_string(), i.to_string(), y.to_string(), p.to_string()])
    });
    write_rows(path, &header, rows)
}

pub fn write_events_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    let header: Vec<String> = ["megabatch", "kind", "epoch", "keep", "kept_count", "pi_size", "pi_pool_size"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = log.events.iter().map(|e| {
        vec![
            e.megabatch.to_string(),
            e.kind.name().to_string(),
            e.epoch.to_string(),
            opt(e.keep),
            e.kept_count.to_string(),
            opt(e.pi_size),
            opt(e.pi_pool_size),
        ]
    });
    write_rows(path, &header, rows)
}

pub fn write_summary_json(summary: &SummaryFile, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<SummaryFile> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Format(e.to_string()))
}

/// Writes every output of a completed run into `dir`.
pub fn write_run(log: &MetricsLog, dir: &Path) -> Result<SummaryFile> {
    let summary = summary_file(log)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), echo_config(&log.config)?)?;
    write_curves_csv(log, &dir.join("curves.csv"))?;
    write_megabatches_csv(log, &dir.join("megabatches.csv"))?;
    write_layers_csv(log, &dir.join("layers.csv"))?;
    write_predictions_csv(log, &dir.join("predictions.csv"))?;
    write_events_csv(log, &dir.join("events.csv"))?;
    write_summary_json(&summary, &dir.join("summary.json"))?;
    plot::plot_run_dir(dir)?;
    Ok(summary)
}

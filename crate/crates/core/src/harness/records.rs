use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::pruners::LayerFraction;

/// One training epoch. Accuracies are kept as exact counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub megabatch: usize,
    pub epoch: usize,
    /// Optimizer steps completed since the start of the stream.
    pub global_iter: u64,
    pub lr: f64,
    /// Running accuracy over the epoch's mini-batches.
    pub train_correct: usize,
    pub train_total: usize,
    pub train_loss: f64,
    pub val_correct: usize,
    pub val_total: usize,
    pub val_loss: f64,
    pub kept_count: usize,
}

impl EpochRecord {
    pub fn train_acc(&self) -> f64 {
        self.train_correct as f64 / self.train_total as f64
    }

    pub fn val_acc(&self) -> f64 {
        self.val_correct as f64 / self.val_total as f64
    }
}

/// Outcome of one megabatch, measured on the carried-forward checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MegabatchRecord {
    pub megabatch: usize,
    /// Epoch of the selected checkpoint; `None` when nothing was trained.
    pub best_epoch: Option<usize>,
    pub test_errors: usize,
    pub test_total: usize,
    /// Predicted class per test sample, in test-set order.
    pub predictions: Vec<usize>,
    pub train_acc: f64,
    pub val_acc: f64,
    /// Train minus validation accuracy at the checkpoint, in percentage points.
    pub gen_gap: f64,
    pub kept_count: usize,
    pub layers: Vec<LayerFraction>,
}

impl MegabatchRecord {
    pub fn test_acc(&self) -> f64 {
        (self.test_total - self.test_errors) as f64 / self.test_total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Prune,
    TrainStart,
    TrainEnd,
    Evaluate,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Prune => "prune",
            EventKind::TrainStart => "train_start",
            EventKind::TrainEnd => "train_end",
            EventKind::Evaluate => "evaluate",
        }
    }
}

/// Ordered run event. `epoch` is the number of epochs of the megabatch
/// completed when the event happened.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub megabatch: usize,
    pub kind: EventKind,
    pub epoch: usize,
    pub keep: Option<usize>,
    pub kept_count: usize,
    pub pi_size: Option<usize>,
    /// Number of training samples the pruning subset was drawn from.
    pub pi_pool_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub run_id: String,
    pub config: RunConfig,
    pub config_hash: String,
    /// Prunable weights of the dense model.
    pub dense_prunable: usize,
    pub prunable_layers: Vec<String>,
    pub test_labels: Vec<usize>,
    pub epochs: Vec<EpochRecord>,
    pub megabatches: Vec<MegabatchRecord>,
    pub events: Vec<Event>,
}

impl MetricsLog {
    pub fn events_of(&self, t: usize) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.megabatch == t)
    }
}

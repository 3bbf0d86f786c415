//! Megabatch streams, training loops and the experiment variants.

pub mod config;
mod records;
mod lr;
mod run;
mod stream;
mod train;

pub use records::{EpochRecord, Event, EventKind, MegabatchRecord, MetricsLog};
pub use config::{DatasetKind, DatasetSource, LrMode, Replay, RunConfig, Seeds, Variant};
pub use lr::lr_at;
pub use run::{config_hash, run, run_on, run_with, warmup_prune_epoch, NoObserver, Observer};
pub use stream::{build_stream, draw_pi, pi_size, replay_view, Megabatch, MegabatchStream, View};
pub use train::{evaluate, train_megabatch, Evaluation, MidPrune, StepView, TrainOutcome};

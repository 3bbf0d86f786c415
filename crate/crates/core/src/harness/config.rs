use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ConvLayer, ModelKind, ModelSpec};
use crate::pruners::Pruner;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    AnytimeOsp,
    AppDefault,
    AppFinal,
    AppWarmup,
    AppNoreplaySnip,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::AnytimeOsp => "anytime_osp",
            Variant::AppDefault => "app_default",
            Variant::AppFinal => "app_final",
            Variant::AppWarmup => "app_warmup",
            Variant::AppNoreplaySnip => "app_noreplay_snip",
        }
    }

    pub fn prunes(self) -> bool {
        self != Variant::Baseline
    }

    pub fn progressive(self) -> bool {
        matches!(
            self,
            Variant::AppDefault | Variant::AppFinal | Variant::AppWarmup | Variant::AppNoreplaySnip
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replay {
    Full,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrMode {
    /// Multi-step decay during the first megabatch, then a constant rate.
    MultistepM1Only,
    /// The multi-step shape restarted at every megabatch.
    CyclicEveryMt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Idx,
    Csv,
    SyntheticBlobs,
    SyntheticSpirals,
}

/// Where samples come from and how the held-out test set is formed.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        test: Option<(PathBuf, PathBuf)>,
        test_fraction: f64,
    },
    Csv {
        path: PathBuf,
        label_column: usize,
        test_path: Option<PathBuf>,
        input_shape: Option<Vec<usize>>,
        test_fraction: f64,
    },
    Blobs {
        classes: usize,
        per_class: usize,
        dim: usize,
        noise: f64,
        test_per_class: usize,
        seed: u64,
    },
    Spirals {
        classes: usize,
        per_class: usize,
        dim: usize,
        noise: f64,
        test_per_class: usize,
        seed: u64,
    },
}

fn d_pruner() -> Pruner {
    Pruner::Snip
}
fn d_replay() -> Replay {
    Replay::Full
}
fn d_epochs() -> usize {
    30
}
fn d_warmup() -> usize {
    20
}
fn d_lr_mode() -> LrMode {
    LrMode::MultistepM1Only
}
fn d_lr0() -> f64 {
    0.1
}
fn d_gamma() -> f64 {
    0.1
}
fn d_post_m1_lr() -> f64 {
    0.001
}
fn d_momentum() -> f64 {
    0.9
}
fn d_batch() -> usize {
    32
}
fn d_pi_fraction() -> f64 {
    0.2
}
fn d_val_fraction() -> f64 {
    0.1
}
fn d_model() -> ModelKind {
    ModelKind::Mlp
}
fn d_hidden() -> Vec<usize> {
    vec![256, 128]
}
fn d_conv_channels() -> Vec<usize> {
    vec![8, 16]
}
fn d_kernel() -> usize {
    3
}
fn d_one() -> usize {
    1
}
fn d_classes() -> usize {
    10
}
fn d_per_class() -> usize {
    100
}
fn d_dim() -> usize {
    16
}
fn d_noise() -> f64 {
    1.0
}
fn d_test_per_class() -> usize {
    50
}
fn d_test_fraction() -> f64 {
    0.2
}
fn d_label_column() -> usize {
    0
}

/// A complete experiment description. Every field except `variant`, `tau`,
/// `megabatches` and `dataset` has a default; [`RunConfig::resolve`] fills the
/// per-role seeds from `seed` so the echoed config is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    #[serde(default = "d_pruner")]
    pub pruner: Pruner,
    pub tau: f64,
    pub megabatches: usize,
    #[serde(default = "d_replay")]
    pub replay: Replay,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_warmup")]
    pub warmup_epochs: usize,
    #[serde(default = "d_lr_mode")]
    pub lr_mode: LrMode,
    #[serde(default = "d_lr0")]
    pub lr0: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_post_m1_lr")]
    pub post_m1_lr: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_pi_fraction")]
    pub pi_fraction: f64,
    #[serde(default = "d_val_fraction")]
    pub val_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class_cap: Option<usize>,

    #[serde(default = "d_model")]
    pub model: ModelKind,
    #[serde(default = "d_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "d_conv_channels")]
    pub conv_channels: Vec<usize>,
    #[serde(default = "d_kernel")]
    pub conv_kernel: usize,
    #[serde(default = "d_one")]
    pub conv_stride: usize,
    #[serde(default = "d_one")]
    pub conv_padding: usize,
    #[serde(default)]
    pub head_hidden: Vec<usize>,

    pub dataset: DatasetKind,
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_per_class")]
    pub per_class: usize,
    #[serde(default = "d_dim")]
    pub dim: usize,
    #[serde(default = "d_noise")]
    pub noise: f64,
    #[serde(default = "d_test_per_class")]
    pub test_per_class: usize,
    #[serde(default = "d_test_fraction")]
    pub test_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_csv: Option<PathBuf>,
    #[serde(default = "d_label_column")]
    pub csv_label_column: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_shape: Option<Vec<usize>>,

    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruning_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

/// Per-role seeds of a resolved config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub data: u64,
    pub partition: u64,
    pub init: u64,
    pub pruning: u64,
    pub shuffle: u64,
}

/// Child seed for one role, kept within 63 bits so it fits a TOML integer.
fn role_seed(master: u64, role: u64) -> u64 {
    rng::derive_seed(master, role) >> 1
}

fn unit_open(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

impl RunConfig {
    /// A config with every default filled in, for programmatic use.
    pub fn new(variant: Variant, tau: f64, megabatches: usize, dataset: DatasetKind) -> Self {
        let text = format!(
            "variant = \"{}\"\ntau = {tau:?}\nmegabatches = {megabatches}\ndataset = \"{}\"\n",
            variant.name(),
            dataset_name(dataset)
        );
        toml::from_str(&text).expect("minimal config always parses")
    }

    /// Fills unset seeds from `seed` and checks every constraint.
    pub fn resolve(mut self) -> Result<Self> {
        let master = self.seed;
        let fill = |s: &mut Option<u64>, role: u64| {
            s.get_or_insert(role_seed(master, role));
        };
        fill(&mut self.data_seed, 1);
        fill(&mut self.partition_seed, 2);
        fill(&mut self.init_seed, 3);
        fill(&mut self.pruning_seed, 4);
        fill(&mut self.shuffle_seed, 5);
        self.validate()?;
        Ok(self)
    }

    /// Replaces the master seed and re-derives every per-role seed from it.
    pub fn with_seed(mut self, seed: u64) -> Result<Self> {
        self.seed = seed;
        self.data_seed = None;
        self.partition_seed = None;
        self.init_seed = None;
        self.pruning_seed = None;
        self.shuffle_seed = None;
        self.resolve()
    }

    pub fn seeds(&self) -> Seeds {
        let get = |s: Option<u64>, role| s.unwrap_or_else(|| role_seed(self.seed, role));
        Seeds {
            data: get(self.data_seed, 1),
            partition: get(self.partition_seed, 2),
            init: get(self.init_seed, 3),
            pruning: get(self.pruning_seed, 4),
            shuffle: get(self.shuffle_seed, 5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |f: &str, m: String| Err(Error::config(f, m));
        if !(self.tau >= 1.0) || !self.tau.is_finite() {
            return err("tau", format!("must be at least 1, got {}", self.tau));
        }
        let seeds = [
            ("seed", Some(self.seed)),
            ("data_seed", self.data_seed),
            ("partition_seed", self.partition_seed),
            ("init_seed", self.init_seed),
            ("pruning_seed", self.pruning_seed),
            ("shuffle_seed", self.shuffle_seed),
        ];
        for (f, s) in seeds {
            if s.is_some_and(|s| s > i64::MAX as u64) {
                return err(f, format!("must not exceed {}", i64::MAX));
            }
        }
        if self.megabatches < 1 {
            return err("megabatches", "must be at least 1".into());
        }
        if self.batch_size < 1 {
            return err("batch_size", "must be at least 1".into());
        }
        for (f, v) in [("lr0", self.lr0), ("post_m1_lr", self.post_m1_lr), ("gamma", self.gamma)] {
            if !(v > 0.0) || !v.is_finite() {
                return err(f, format!("must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err("momentum", format!("must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0) {
            return err("weight_decay", format!("must be non-negative, got {}", self.weight_decay));
        }
        if !(self.pi_fraction > 0.0 && self.pi_fraction <= 1.0) {
            return err("pi_fraction", format!("must lie in (0, 1], got {}", self.pi_fraction));
        }
        if !unit_open(self.val_fraction) {
            return err("val_fraction", format!("must lie in (0, 1), got {}", self.val_fraction));
        }
        if self.per_class_cap == Some(0) {
            return err("per_class_cap", "must be at least 1".into());
        }
        if self.variant == Variant::AppNoreplaySnip && self.pruner != Pruner::Snip {
            return err(
                "pruner",
                format!("app_noreplay_snip requires pruner = \"snip\", got \"{}\"", self.pruner.name()),
            );
        }
        if self.variant == Variant::AppWarmup && self.warmup_epochs < 1 {
            return err("warmup_epochs", "app_warmup needs at least one warm-up epoch".into());
        }
        match self.dataset {
            DatasetKind::Idx => {
                if self.images.is_none() {
                    return err("images", "required for dataset = \"idx\"".into());
                }
                if self.labels.is_none() {
                    return err("labels", "required for dataset = \"idx\"".into());
                }
                if self.test_images.is_some() != self.test_labels.is_some() {
                    return err("test_labels", "test_images and test_labels go together".into());
                }
            }
            DatasetKind::Csv => {
                if self.csv.is_none() {
                    return err("csv", "required for dataset = \"csv\"".into());
                }
            }
            DatasetKind::SyntheticBlobs | DatasetKind::SyntheticSpirals => {
                if self.classes < 2 {
                    return err("classes", format!("need at least 2, got {}", self.classes));
                }
                if self.per_class < 1 {
                    return err("per_class", "must be at least 1".into());
                }
                if self.test_per_class < 1 {
                    return err("test_per_class", "must be at least 1".into());
                }
                let min_dim = if self.dataset == DatasetKind::SyntheticSpirals { 2 } else { 1 };
                if self.dim < min_dim {
                    return err("dim", format!("must be at least {min_dim}"));
                }
                if self.dataset == DatasetKind::SyntheticBlobs && self.dim == 1 && self.classes > 2 {
                    return err("dim", "one-dimensional blobs support only 2 classes".into());
                }
                if !(self.noise >= 0.0) {
                    return err("noise", "must be non-negative".into());
                }
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return err("test_fraction", format!("must lie in (0, 1), got {}", self.test_fraction));
        }
        if self.hidden.contains(&0) || self.head_hidden.contains(&0) || self.conv_channels.contains(&0) {
            return err("hidden", "layer widths must be at least 1".into());
        }
        if self.model == ModelKind::Convnet {
            if self.conv_kernel < 1 || self.conv_stride < 1 {
                return err("conv_kernel", "kernel and stride must be at least 1".into());
            }
            if matches!(self.dataset, DatasetKind::SyntheticBlobs | DatasetKind::SyntheticSpirals) {
                return err("model", "convnet needs image-shaped data (idx, or csv with image_shape)".into());
            }
            if self.dataset == DatasetKind::Csv && self.image_shape.as_ref().is_none_or(|s| s.len() != 3) {
                return err("image_shape", "convnet on csv data needs image_shape = [c, h, w]".into());
            }
        }
        Ok(())
    }

    pub fn dataset_source(&self) -> DatasetSource {
        let seeds = self.seeds();
        match self.dataset {
            DatasetKind::Idx => DatasetSource::Idx {
                images: self.images.clone().unwrap_or_default(),
                labels: self.labels.clone().unwrap_or_default(),
                test: self.test_images.clone().zip(self.test_labels.clone()),
                test_fraction: self.test_fraction,
            },
            DatasetKind::Csv => DatasetSource::Csv {
                path: self.csv.clone().unwrap_or_default(),
                label_column: self.csv_label_column,
                test_path: self.test_csv.clone(),
                input_shape: self.image_shape.clone(),
                test_fraction: self.test_fraction,
            },
            DatasetKind::SyntheticBlobs => DatasetSource::Blobs {
                classes: self.classes,
                per_class: self.per_class,
                dim: self.dim,
                noise: self.noise,
                test_per_class: self.test_per_class,
                seed: seeds.data,
            },
            DatasetKind::SyntheticSpirals => DatasetSource::Spirals {
                classes: self.classes,
                per_class: self.per_class,
                dim: self.dim,
                noise: self.noise,
                test_per_class: self.test_per_class,
                seed: seeds.data,
            },
        }
    }

    /// Model for data of the given input shape and class count.
    pub fn model_spec(&self, input_shape: &[usize], classes: usize) -> ModelSpec {
        match self.model {
            ModelKind::Mlp => {
                let d = input_shape.iter().product();
                let mut sizes = vec![d];
                sizes.extend(&self.hidden);
                sizes.push(classes);
                ModelSpec::mlp(sizes, classes)
            }
            ModelKind::Convnet => {
                let stack = self
                    .conv_channels
                    .iter()
                    .map(|&cout| ConvLayer {
                        cout,
                        kernel: self.conv_kernel,
                        stride: self.conv_stride,
                        padding: self.conv_padding,
                    })
                    .collect();
                let mut head = self.head_hidden.clone();
                head.push(classes);
                ModelSpec::convnet(input_shape.to_vec(), stack, head, classes)
            }
        }
    }
}

pub fn dataset_name(kind: DatasetKind) -> &'static str {
    match kind {
        DatasetKind::Idx => "idx",
        DatasetKind::Csv => "csv",
        DatasetKind::SyntheticBlobs => "synthetic_blobs",
        DatasetKind::SyntheticSpirals => "synthetic_spirals",
    }
}

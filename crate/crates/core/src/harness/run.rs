use std::cell::RefCell;

use sha2::{Digest, Sha256};

use super::config::{RunConfig, Variant};
use super::records::{Event, EventKind, MegabatchRecord, MetricsLog};
use super::stream::{build_stream, draw_pi, replay_view};
use super::train::{evaluate, train_megabatch, MidPrune, StepView};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::generalization_gap;
use crate::models::Model;
use crate::pruners::{keep_count, layer_pruned_fraction, make_delta_schedule, prune_step, SparsityMask};
use crate::rng;

const PI_BATCH: usize = 256;

/// Hooks into a running experiment, mainly for tests and progress output.
pub trait Observer {
    fn on_step(&mut self, _step: &StepView<'_>) {}
    fn on_mask(&mut self, _megabatch: usize, _mask: &SparsityMask) {}
    fn on_megabatch(&mut self, _record: &MegabatchRecord) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

/// Hex SHA-256 of the TOML echo of `config`.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    let text = toml::to_string(config).map_err(|e| Error::Format(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Loads the configured dataset and runs the experiment.
pub fn run(config: &RunConfig) -> Result<MetricsLog> {
    run_with(config, &mut NoObserver)
}

pub fn run_with(config: &RunConfig, observer: &mut dyn Observer) -> Result<MetricsLog> {
    let config = config.clone().resolve()?;
    let (pool, test) = io::load_source(&config.dataset_source(), config.seeds().partition)?;
    run_on(&config, &pool, &test, observer)
}

/// Epoch after which `app_warmup` prunes for `k` epochs per megabatch.
pub fn warmup_prune_epoch(k: usize, warmup: usize) -> usize {
    if k > warmup {
        warmup
    } else {
        k.div_ceil(2).min(k.saturating_sub(1))
    }
}

/// Runs the configured variant over the stream built from `pool`, evaluating
/// every megabatch's checkpoint on `test`.
pub fn run_on(config: &RunConfig, pool: &Dataset, test: &Dataset, observer: &mut dyn Observer) -> Result<MetricsLog> {
    let config = config.clone().resolve()?;
    if pool.classes() != test.classes() || pool.input_shape() != test.input_shape() {
        return Err(Error::Data("training pool and test set disagree on shape or classes".into()));
    }
    if test.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let seeds = config.seeds();
    let variant = config.variant;
    let n = config.megabatches;
    let k = config.epochs;

    let mut model = Model::build(config.model_spec(pool.input_shape(), pool.classes()), seeds.init)?;
    let stream = build_stream(pool, n, config.val_fraction, config.per_class_cap, seeds.partition)?;
    let dense = model.count_params(true);
    let schedule = make_delta_schedule(config.tau, n)?;
    let test_idx: Vec<usize> = (0..test.len()).collect();
    let hash = config_hash(&config)?;
    let prunable_layers = model.params().prunable().map(|(_, e)| e.name.clone()).collect();

    let warmup_at = warmup_prune_epoch(k, config.warmup_epochs);
    if variant == Variant::AppWarmup && k <= config.warmup_epochs {
        log::warn!(
            "{k} epochs per megabatch do not exceed the {} warm-up epochs; pruning after epoch {warmup_at}",
            config.warmup_epochs
        );
    }

    let mut mask: Option<SparsityMask> = None;
    let mut global_iter = 0u64;
    let mut epochs = Vec::new();
    let mut megabatches = Vec::with_capacity(n);
    let mut events = Vec::new();

    for t in 1..=n {
        let view = replay_view(&stream, t, config.replay)?;
        let keep = match variant {
            Variant::Baseline => None,
            Variant::AnytimeOsp => (t == 1).then(|| keep_count(config.tau, dense)).transpose()?,
            _ => Some(keep_count(schedule.values[t - 1], dense)?),
        };
        let pi_pool: &[usize] = match variant {
            Variant::AnytimeOsp => &stream.get(1)?.train,
            Variant::AppNoreplaySnip => &stream.get(t)?.train,
            _ => &view.train,
        };
        let pending: RefCell<Vec<Event>> = RefCell::new(Vec::new());
        let prune = |model: &mut Model, current: Option<&SparsityMask>, epoch: usize| -> Result<SparsityMask> {
            let keep = keep.expect("prune only scheduled with a keep count");
            let base = current.cloned().unwrap_or_else(|| SparsityMask::dense(model.params()));
            let (batches, pi_size) = if config.pruner.needs_data() {
                let idx = draw_pi(pi_pool, config.pi_fraction, seeds.pruning, t as u64)?;
                (pool.batches(&idx, PI_BATCH)?, Some(idx.len()))
            } else {
                (Vec::new(), None)
            };
            let refined = prune_step(
                model,
                &base,
                config.pruner,
                &batches,
                keep,
                rng::derive_seed(seeds.pruning, t as u64),
            )?;
            pending.borrow_mut().push(Event {
                megabatch: t,
                kind: EventKind::Prune,
                epoch,
                keep: Some(keep),
                kept_count: refined.kept_count(),
                pi_size,
                pi_pool_size: pi_size.map(|_| pi_pool.len()),
            });
            Ok(refined)
        };
        let event = |kind, epoch, mask: &Option<SparsityMask>| Event {
            megabatch: t,
            kind,
            epoch,
            keep: None,
            kept_count: mask.as_ref().map_or(dense, SparsityMask::kept_count),
            pi_size: None,
            pi_pool_size: None,
        };

        let prune_before = keep.is_some() && !matches!(variant, Variant::AppFinal | Variant::AppWarmup);
        if prune_before {
            let refined = prune(&mut model, mask.as_ref(), 0)?;
            observer.on_mask(t, &refined);
            mask = Some(refined);
        }
        events.append(&mut pending.borrow_mut());

        events.push(event(EventKind::TrainStart, 0, &mask));
        let mask_before = mask.clone();
        let mut warm = |m: &mut Model, cur: Option<&SparsityMask>| prune(m, cur, warmup_at);
        let mid = (variant == Variant::AppWarmup).then_some(MidPrune {
            after_epoch: warmup_at,
            prune: &mut warm,
        });
        let outcome = train_megabatch(
            &model,
            &mut mask,
            pool,
            &view,
            &config,
            t,
            &mut global_iter,
            mid,
            &mut |s| observer.on_step(s),
        )?;
        events.append(&mut pending.borrow_mut());
        if mask != mask_before {
            observer.on_mask(t, mask.as_ref().expect("a prune always leaves a mask"));
        }
        events.push(event(EventKind::TrainEnd, k, &mask));
        model = outcome.best;

        let (train_acc, val_acc) = match outcome.best_epoch {
            Some(e) => {
                let r = &outcome.records[e - 1];
                (r.train_acc(), r.val_acc())
            }
            None => {
                let tr = evaluate(&model, pool, &view.train)?;
                let va = evaluate(&model, pool, &view.val)?;
                (tr.correct as f64 / tr.total as f64, va.correct as f64 / va.total as f64)
            }
        };

        if variant == Variant::AppFinal {
            let refined = prune(&mut model, mask.as_ref(), k)?;
            events.append(&mut pending.borrow_mut());
            observer.on_mask(t, &refined);
            mask = Some(refined);
        }

        let eval = evaluate(&model, test, &test_idx)?;
        events.push(event(EventKind::Evaluate, k, &mask));
        let accounting = match &mask {
            Some(m) => m.clone(),
            None => SparsityMask::dense(model.params()),
        };
        let record = MegabatchRecord {
            megabatch: t,
            best_epoch: outcome.best_epoch,
            test_errors: eval.total - eval.correct,
            test_total: eval.total,
            predictions: eval.predictions,
            train_acc,
            val_acc,
            gen_gap: generalization_gap(train_acc, val_acc)?,
            kept_count: accounting.kept_count(),
            layers: layer_pruned_fraction(&accounting, model.params())?,
        };
        observer.on_megabatch(&record);
        log::info!(
            "megabatch {t}/{n}: test errors {}/{}, gap {:.2} pp, kept {}",
            record.test_errors,
            record.test_total,
            record.gen_gap,
            record.kept_count
        );
        epochs.extend(outcome.records);
        megabatches.push(record);
    }

    Ok(MetricsLog {
        run_id: format!("{}-{}-{}", variant.name(), config.pruner.name(), &hash[..8]),
        config,
        config_hash: hash,
        dense_prunable: dense,
        prunable_layers,
        test_labels: test.labels().to_vec(),
        epochs,
        megabatches,
        events,
    })
}

use rand::seq::SliceRandom;

use super::config::RunConfig;
use super::records::EpochRecord;
use super::lr::lr_at;
use super::stream::View;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::pruners::SparsityMask;
use crate::rng::{self, Purpose};
use crate::tensor::{ops, sgd_momentum_step, OptimState, Tensor};

const EVAL_BATCH: usize = 512;

/// Accuracy counts, mean loss and predictions of `model` on `indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    pub loss: f64,
    pub predictions: Vec<usize>,
}

pub fn evaluate(model: &Model, data: &Dataset, indices: &[usize]) -> Result<Evaluation> {
    if indices.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty set".into()));
    }
    let mut correct = 0;
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_BATCH) {
        let b = data.batch(chunk)?;
        let logits = model.forward(&b.inputs)?;
        let (l, _) = ops::softmax_cross_entropy(&logits, &b.labels)?;
        loss += l * chunk.len() as f64;
        let pred = ops::argmax_rows(&logits)?;
        correct += pred.iter().zip(&b.labels).filter(|(p, y)| p == y).count();
        predictions.extend(pred);
    }
    Ok(Evaluation {
        correct,
        total: indices.len(),
        loss: loss / indices.len() as f64,
        predictions,
    })
}

/// Everything a training-step observer may inspect.
pub struct StepView<'a> {
    pub megabatch: usize,
    pub epoch: usize,
    pub global_iter: u64,
    pub params: &'a [Tensor],
    pub velocity: &'a [Tensor],
    pub mask: Option<&'a SparsityMask>,
}

/// A prune to apply after `after_epoch` completed epochs of the megabatch.
pub struct MidPrune<'a> {
    pub after_epoch: usize,
    pub prune: &'a mut dyn FnMut(&mut Model, Option<&SparsityMask>) -> Result<SparsityMask>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Model,
    pub best_epoch: Option<usize>,
    pub records: Vec<EpochRecord>,
}

/// Trains on the view's training split for `config.epochs` epochs and returns
/// the checkpoint with the highest validation accuracy (earliest on ties).
/// When `mid_prune` fires, only checkpoints taken after it are eligible and
/// `mask` is updated in place.
#[allow(clippy::too_many_arguments)]
pub fn train_megabatch(
    model: &Model,
    mask: &mut Option<SparsityMask>,
    data: &Dataset,
    view: &View,
    config: &RunConfig,
    t: usize,
    global_iter: &mut u64,
    mut mid_prune: Option<MidPrune<'_>>,
    on_step: &mut dyn FnMut(&StepView<'_>),
) -> Result<TrainOutcome> {
    let mut model = model.clone();
    if view.train.is_empty() {
        return Err(Error::Data(format!("megabatch {t} has no training samples")));
    }
    let seeds = config.seeds();
    let dense = model.count_params(true);
    let mut params = model.params().tensors();
    let mut state = OptimState::new(&params, config.lr0, config.momentum, config.weight_decay)?;
    let mut records = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, usize, Vec<Tensor>)> = None;
    let mut eligible_from = 1;

    let prune_now = |model: &mut Model,
                         params: &mut Vec<Tensor>,
                         state: &mut OptimState,
                         mask: &mut Option<SparsityMask>,
                         hook: &mut MidPrune<'_>|
     -> Result<()> {
        model.params_mut().set_tensors(params.clone())?;
        let refined = (hook.prune)(model, mask.as_ref())?;
        *params = model.params().tensors();
        state.apply_masks(&refined.per_param(params.len()));
        *mask = Some(refined);
        Ok(())
    };

    if let Some(hook) = mid_prune.as_mut().filter(|h| h.after_epoch == 0) {
        prune_now(&mut model, &mut params, &mut state, mask, hook)?;
    }

    for epoch in 1..=config.epochs {
        state.lr = lr_at(config, t, epoch)?;
        let mut order = view.train.clone();
        order.shuffle(&mut rng::stream(seeds.shuffle, Purpose::Shuffle, ((t as u64) << 32) | epoch as u64));
        let (mut correct, mut loss_sum) = (0usize, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let batch = data.batch(chunk)?;
            let (loss, grads, logits) = model.loss_and_grad_at(&params, &batch.inputs, &batch.labels)?;
            loss_sum += loss * chunk.len() as f64;
            correct += ops::argmax_rows(&logits)?
                .iter()
                .zip(&batch.labels)
                .filter(|(p, y)| p == y)
                .count();
            let masks = match mask {
                Some(m) => m.per_param(params.len()),
                None => vec![None; params.len()],
            };
            sgd_momentum_step(&mut params, &grads, &mut state, &masks)?;
            *global_iter += 1;
            on_step(&StepView {
                megabatch: t,
                epoch,
                global_iter: *global_iter,
                params: &params,
                velocity: state.velocity(),
                mask: mask.as_ref(),
            });
        }

        model.params_mut().set_tensors(params.clone())?;
        let val = evaluate(&model, data, &view.val)?;
        records.push(EpochRecord {
            megabatch: t,
            epoch,
            global_iter: *global_iter,
            lr: state.lr,
            train_correct: correct,
            train_total: order.len(),
            train_loss: loss_sum / order.len() as f64,
            val_correct: val.correct,
            val_total: val.total,
            val_loss: val.loss,
            kept_count: mask.as_ref().map_or(dense, SparsityMask::kept_count),
        });
        if epoch >= eligible_from && best.as_ref().is_none_or(|b| val.correct > b.1) {
            best = Some((epoch, val.correct, params.clone()));
        }

        if let Some(hook) = mid_prune.as_mut().filter(|h| h.after_epoch == epoch) {
            prune_now(&mut model, &mut params, &mut state, mask, hook)?;
            eligible_from = epoch + 1;
            best = None;
        }
    }

    let best_epoch = match best {
        Some((epoch, _, snapshot)) => {
            model.params_mut().set_tensors(snapshot)?;
            Some(epoch)
        }
        None => {
            model.params_mut().set_tensors(params)?;
            None
        }
    };
    Ok(TrainOutcome {
        best: model,
        best_epoch,
        records,
    })
}

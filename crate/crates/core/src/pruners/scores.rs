//! Saliency scores. Pruned positions carry a sentinel so that selection alone
//! keeps them out: `-inf` for the keep-highest scorers, `+inf` for GraSP,
//! which keeps its lowest scores.

use rand::Rng;

use super::{Scores, SparsityMask};
use crate::data::LabeledBatch;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::{self, Purpose};
use crate::tensor::{default_hvp_eps, hvp_fd, Tensor};

fn masked(mask: &SparsityMask, values: Vec<Vec<f64>>, sentinel: f64) -> Scores {
    let layers = values
        .into_iter()
        .zip(mask.layers())
        .map(|(mut v, l)| {
            v.iter_mut()
                .zip(&l.keep)
                .filter(|(_, &k)| !k)
                .for_each(|(s, _)| *s = sentinel);
            v
        })
        .collect();
    Scores { layers }
}

fn check_aligned(mask: &SparsityMask, tensors: &[&Tensor], what: &str) -> Result<()> {
    if tensors.len() != mask.layers().len()
        || tensors
            .iter()
            .zip(mask.layers())
            .any(|(t, l)| t.len() != l.keep.len())
    {
        return Err(Error::Shape(format!("{what} do not match the mask layers")));
    }
    Ok(())
}

/// Connection sensitivity `|g ⊙ w|` over the prunable tensors (mask order).
pub fn snip_scores(weights: &[&Tensor], grads: &[&Tensor], mask: &SparsityMask) -> Result<Scores> {
    check_aligned(mask, weights, "weights")?;
    check_aligned(mask, grads, "gradients")?;
    let values = weights
        .iter()
        .zip(grads)
        .map(|(w, g)| w.data().iter().zip(g.data()).map(|(w, g)| (g * w).abs()).collect())
        .collect();
    Ok(masked(mask, values, f64::NEG_INFINITY))
}

/// GraSP scores `−w ⊙ (Hg)`; lower means more worth keeping.
pub fn grasp_scores(weights: &[&Tensor], hg: &[&Tensor], mask: &SparsityMask) -> Result<Scores> {
    check_aligned(mask, weights, "weights")?;
    check_aligned(mask, hg, "Hessian-gradient products")?;
    let values = weights
        .iter()
        .zip(hg)
        .map(|(w, h)| w.data().iter().zip(h.data()).map(|(w, h)| -w * h).collect())
        .collect();
    let scores = masked(mask, values, f64::INFINITY);
    for (s, l) in scores.layers.iter().zip(mask.layers()) {
        if s.iter().zip(&l.keep).any(|(v, &k)| k && !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite GraSP score in {}", l.name)));
        }
    }
    Ok(scores)
}

/// GraSP over an arbitrary differentiable objective: `grad` maps the full
/// parameter list to its gradient, `prunable` flags which entries the mask
/// layers correspond to (in order).
pub fn grasp_scores_with<F>(grad: F, params: &[Tensor], prunable: &[bool], mask: &SparsityMask) -> Result<Scores>
where
    F: Fn(&[Tensor]) -> Result<Vec<Tensor>>,
{
    let g = grad(params)?;
    let hg = hvp_fd(&grad, params, &g, default_hvp_eps(params))?;
    let pick = |ts: &[Tensor]| -> Vec<Tensor> {
        ts.iter()
            .zip(prunable)
            .filter(|(_, &p)| p)
            .map(|(t, _)| t.clone())
            .collect()
    };
    let (w, hg) = (pick(params), pick(&hg));
    grasp_scores(&w.iter().collect::<Vec<_>>(), &hg.iter().collect::<Vec<_>>(), mask)
}

pub fn magnitude_scores(weights: &[&Tensor], mask: &SparsityMask) -> Result<Scores> {
    check_aligned(mask, weights, "weights")?;
    let values = weights
        .iter()
        .map(|w| w.data().iter().map(|v| v.abs()).collect())
        .collect();
    Ok(masked(mask, values, f64::NEG_INFINITY))
}

/// I.i.d. uniform(0, 1) scores fully determined by `seed`.
pub fn score_random(mask: &SparsityMask, seed: u64) -> Scores {
    let mut rng = rng::stream(seed, Purpose::RandomScore, 0);
    let values = mask
        .layers()
        .iter()
        .map(|l| (0..l.keep.len()).map(|_| rng.gen::<f64>()).collect())
        .collect();
    masked(mask, values, f64::NEG_INFINITY)
}

/// Gradient of the mean cross-entropy over all samples of `pi`, accumulated
/// batch by batch, evaluated at `params`.
pub fn accumulated_gradient(model: &Model, params: &[Tensor], pi: &[LabeledBatch]) -> Result<Vec<Tensor>> {
    let total: usize = pi.iter().map(LabeledBatch::len).sum();
    if total == 0 {
        return Err(Error::Data("empty pruning set".into()));
    }
    let mut acc: Vec<Tensor> = params.iter().map(Tensor::zeros_like).collect();
    for batch in pi.iter().filter(|b| !b.is_empty()) {
        let (_, grads, _) = model.loss_and_grad_at(params, &batch.inputs, &batch.labels)?;
        let weight = batch.len() as f64;
        for (a, g) in acc.iter_mut().zip(&grads) {
            a.data_mut()
                .iter_mut()
                .zip(g.data())
                .for_each(|(a, g)| *a += weight * g);
        }
    }
    let inv = 1.0 / total as f64;
    for a in acc.iter_mut() {
        a.data_mut().iter_mut().for_each(|v| *v *= inv);
    }
    Ok(acc)
}

fn prunable_refs<'a>(model: &Model, tensors: &'a [Tensor]) -> Vec<&'a Tensor> {
    model
        .params()
        .entries()
        .iter()
        .zip(tensors)
        .filter(|(e, _)| e.prunable)
        .map(|(_, t)| t)
        .collect()
}

pub fn score_snip(model: &Model, mask: &SparsityMask, pi: &[LabeledBatch]) -> Result<Scores> {
    let params = model.params().tensors();
    let grads = accumulated_gradient(model, &params, pi)?;
    snip_scores(&prunable_refs(model, &params), &prunable_refs(model, &grads), mask)
}

pub fn score_grasp(model: &Model, mask: &SparsityMask, pi: &[LabeledBatch]) -> Result<Scores> {
    let params = model.params().tensors();
    let prunable: Vec<bool> = model.params().entries().iter().map(|e| e.prunable).collect();
    grasp_scores_with(|p| accumulated_gradient(model, p, pi), &params, &prunable, mask)
}

pub fn score_magnitude(model: &Model, mask: &SparsityMask) -> Result<Scores> {
    let params = model.params().tensors();
    magnitude_scores(&prunable_refs(model, &params), mask)
}

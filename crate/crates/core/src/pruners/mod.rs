//! Saliency scorers, the progressive sparsity schedule and global mask refinement.

mod mask;
mod schedule;
pub mod scores;

use serde::{Deserialize, Serialize};

pub use mask::{apply_mask, layer_pruned_fraction, prune_global, LayerFraction, LayerMask, SparsityMask, GLOBAL_ROW};
pub use schedule::{keep_count, keep_fraction, make_delta_schedule, DeltaSchedule};
pub use scores::{score_grasp, score_magnitude, score_random, score_snip};

use crate::data::LabeledBatch;
use crate::error::Result;
use crate::models::Model;

/// Per-weight scores for each prunable tensor, in mask layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub layers: Vec<Vec<f64>>,
}

impl Scores {
    pub fn single(values: Vec<f64>) -> Self {
        Scores { layers: vec![values] }
    }

    fn negated(mut self) -> Self {
        self.layers.iter_mut().flatten().for_each(|v| *v = -*v);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruner {
    Snip,
    Grasp,
    Magnitude,
    Random,
}

impl Pruner {
    pub fn name(self) -> &'static str {
        match self {
            Pruner::Snip => "snip",
            Pruner::Grasp => "grasp",
            Pruner::Magnitude => "magnitude",
            Pruner::Random => "random",
        }
    }

    /// Whether scoring looks at data at all.
    pub fn needs_data(self) -> bool {
        matches!(self, Pruner::Snip | Pruner::Grasp)
    }

    /// Keys for [`prune_global`]: higher means keep, pruned positions are
    /// `-inf`. GraSP keeps its lowest raw scores, so its keys are negated.
    pub fn selection_keys(self, model: &Model, mask: &SparsityMask, pi: &[LabeledBatch], seed: u64) -> Result<Scores> {
        Ok(match self {
            Pruner::Snip => score_snip(model, mask, pi)?,
            Pruner::Grasp => score_grasp(model, mask, pi)?.negated(),
            Pruner::Magnitude => score_magnitude(model, mask)?,
            Pruner::Random => score_random(mask, seed),
        })
    }
}

/// Scores `model`, refines `mask` down to `keep` weights and applies it.
pub fn prune_step(
    model: &mut Model,
    mask: &SparsityMask,
    pruner: Pruner,
    pi: &[LabeledBatch],
    keep: usize,
    seed: u64,
) -> Result<SparsityMask> {
    apply_mask(model, mask)?;
    let keys = pruner.selection_keys(model, mask, pi, seed)?;
    let refined = prune_global(mask, &keys, keep)?;
    apply_mask(model, &refined)?;
    Ok(refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;
    use crate::tensor::Tensor;

    #[test]
    fn prune_step_hits_keep_count_for_every_scorer() {
        let batch = LabeledBatch {
            inputs: Tensor::randn(&[10, 5], 2, 1.0).unwrap(),
            labels: (0..10).map(|i| i % 3).collect(),
        };
        for pruner in [Pruner::Snip, Pruner::Grasp, Pruner::Magnitude, Pruner::Random] {
            let mut model = Model::build(ModelSpec::mlp(vec![5, 7, 3], 3), 1).unwrap();
            let dense = SparsityMask::dense(model.params());
            let p = model.count_params(true);
            let k1 = keep_count(1.0, p).unwrap();
            let m1 = prune_step(&mut model, &dense, pruner, std::slice::from_ref(&batch), k1, 9).unwrap();
            assert_eq!(m1.kept_count(), k1, "{pruner:?}");
            let k2 = keep_count(4.5, p).unwrap();
            let m2 = prune_step(&mut model, &m1, pruner, std::slice::from_ref(&batch), k2, 10).unwrap();
            assert_eq!(m2.kept_count(), k2);
            assert!(m2.is_subset_of(&m1));
            for l in m2.layers() {
                let t = &model.params().entries()[l.param_index].tensor;
                for (w, &k) in t.data().iter().zip(&l.keep) {
                    if !k {
                        assert_eq!(*w, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn grasp_keeps_lowest_raw_scores() {
        let m = SparsityMask::from_layers(vec![LayerMask {
            name: "w".into(),
            param_index: 0,
            shape: vec![2],
            keep: vec![true; 2],
        }]);
        // Raw GraSP scores [−4, −16]: keep the −16 entry.
        let keys = Scores::single(vec![-4.0, -16.0]).negated();
        let kept = prune_global(&m, &keys, 1).unwrap();
        assert_eq!(kept.layers()[0].keep, vec![false, true]);
    }
}

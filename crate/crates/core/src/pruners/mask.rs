use serde::{Deserialize, Serialize};

use super::Scores;
use crate::error::{Error, Result};
use crate::models::{Model, ParamRegistry};

/// Binary keep-mask for one prunable tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerMask {
    pub name: String,
    /// Index of the tensor in the parameter registry.
    pub param_index: usize,
    pub shape: Vec<usize>,
    pub keep: Vec<bool>,
}

impl LayerMask {
    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }
}

/// Keep-masks for every prunable tensor, in registry order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityMask {
    layers: Vec<LayerMask>,
    kept: usize,
}

impl SparsityMask {
    /// All-ones mask over the registry's prunable tensors.
    pub fn dense(registry: &ParamRegistry) -> Self {
        let layers = registry
            .prunable()
            .map(|(i, e)| LayerMask {
                name: e.name.clone(),
                param_index: i,
                shape: e.tensor.shape().to_vec(),
                keep: vec![true; e.tensor.len()],
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<LayerMask>) -> Self {
        let kept = layers.iter().map(LayerMask::kept).sum();
        SparsityMask { layers, kept }
    }

    pub fn layers(&self) -> &[LayerMask] {
        &self.layers
    }

    pub fn kept_count(&self) -> usize {
        self.kept
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.keep.len()).sum()
    }

    /// True when every kept position of `self` is also kept in `other`.
    pub fn is_subset_of(&self, other: &SparsityMask) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.keep.len() == b.keep.len() && a.keep.iter().zip(&b.keep).all(|(&x, &y)| !x || y)
            })
    }

    /// Per-parameter masks aligned with a registry of `params` entries;
    /// non-prunable parameters get `None`.
    pub fn per_param(&self, params: usize) -> Vec<Option<&[bool]>> {
        let mut out = vec![None; params];
        for l in &self.layers {
            if l.param_index < params {
                out[l.param_index] = Some(l.keep.as_slice());
            }
        }
        out
    }

    pub fn check_against(&self, registry: &ParamRegistry) -> Result<()> {
        let prunable: Vec<_> = registry.prunable().collect();
        if prunable.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "mask has {} layers, registry {} prunable tensors",
                self.layers.len(),
                prunable.len()
            )));
        }
        for ((i, e), l) in prunable.iter().zip(&self.layers) {
            if *i != l.param_index || e.tensor.shape() != l.shape.as_slice() || e.name != l.name {
                return Err(Error::Shape(format!(
                    "mask layer `{}` {:?} does not match `{}` {:?}",
                    l.name,
                    l.shape,
                    e.name,
                    e.tensor.shape()
                )));
            }
        }
        Ok(())
    }

    fn check_scores(&self, scores: &Scores) -> Result<()> {
        if scores.layers.len() != self.layers.len()
            || scores
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(s, l)| s.len() != l.keep.len())
        {
            return Err(Error::Shape("scores do not cover the mask".into()));
        }
        Ok(())
    }
}

/// Keeps the `keep` highest-scoring currently kept positions across all
/// prunable tensors jointly. Equal scores favour the smaller global flat index
/// (registry order, then row-major offset).
pub fn prune_global(mask: &SparsityMask, scores: &Scores, keep: usize) -> Result<SparsityMask> {
    if keep < 1 {
        return Err(Error::Parameter("must keep at least one weight".into()));
    }
    if keep > mask.kept_count() {
        return Err(Error::Refinement {
            keep,
            kept: mask.kept_count(),
        });
    }
    mask.check_scores(scores)?;

    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(mask.kept_count());
    let mut offset = 0;
    for (layer, s) in mask.layers.iter().zip(&scores.layers) {
        for (j, (&k, &v)) in layer.keep.iter().zip(s).enumerate() {
            if k {
                if v.is_nan() {
                    return Err(Error::Numeric(format!("NaN score at {}[{j}]", layer.name)));
                }
                candidates.push((v, offset + j));
            }
        }
        offset += layer.keep.len();
    }
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if keep < candidates.len() {
        candidates.select_nth_unstable_by(keep - 1, order);
        candidates.truncate(keep);
    }

    let mut layers: Vec<LayerMask> = mask
        .layers
        .iter()
        .map(|l| LayerMask {
            keep: vec![false; l.keep.len()],
            ..l.clone()
        })
        .collect();
    let starts: Vec<usize> = mask
        .layers
        .iter()
        .scan(0, |acc, l| {
            let s = *acc;
            *acc += l.keep.len();
            Some(s)
        })
        .collect();
    for &(_, flat) in &candidates {
        let li = starts.partition_point(|&s| s <= flat) - 1;
        layers[li].keep[flat - starts[li]] = true;
    }
    Ok(SparsityMask::from_layers(layers))
}

/// Zeroes every masked weight of `model`.
pub fn apply_mask(model: &mut Model, mask: &SparsityMask) -> Result<()> {
    mask.check_against(model.params())?;
    for l in &mask.layers {
        let t = model.params_mut().tensor_mut(l.param_index);
        t.data_mut()
            .iter_mut()
            .zip(&l.keep)
            .filter(|(_, &k)| !k)
            .for_each(|(w, _)| *w = 0.0);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFraction {
    pub name: String,
    pub pruned: usize,
    pub total: usize,
    pub fraction: f64,
}

pub const GLOBAL_ROW: &str = "global";

/// Pruned fraction `1 − kept/total` per prunable tensor, followed by a
/// `global` row.
pub fn layer_pruned_fraction(mask: &SparsityMask, registry: &ParamRegistry) -> Result<Vec<LayerFraction>> {
    mask.check_against(registry)?;
    let row = |name: &str, pruned: usize, total: usize| LayerFraction {
        name: name.to_string(),
        pruned,
        total,
        fraction: pruned as f64 / total as f64,
    };
    let mut rows: Vec<LayerFraction> = mask
        .layers
        .iter()
        .map(|l| row(&l.name, l.keep.len() - l.kept(), l.keep.len()))
        .collect();
    rows.push(row(GLOBAL_ROW, mask.total() - mask.kept_count(), mask.total()));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    fn flat_mask(n: usize) -> SparsityMask {
        SparsityMask::from_layers(vec![LayerMask {
            name: "w".into(),
            param_index: 0,
            shape: vec![n],
            keep: vec![true; n],
        }])
    }

    fn kept_indices(m: &SparsityMask) -> Vec<usize> {
        m.layers()
            .iter()
            .flat_map(|l| l.keep.iter().copied())
            .enumerate()
            .filter_map(|(i, k)| k.then_some(i))
            .collect()
    }

    #[test]
    fn keeps_top_scores() {
        let m = prune_global(&flat_mask(4), &Scores::single(vec![5.0, 1.0, 3.0, 2.0]), 2).unwrap();
        assert_eq!(kept_indices(&m), vec![0, 2]);
        assert_eq!(m.kept_count(), 2);
    }

    #[test]
    fn ties_keep_smaller_indices() {
        let m = prune_global(&flat_mask(4), &Scores::single(vec![2.0; 4]), 2).unwrap();
        assert_eq!(kept_indices(&m), vec![0, 1]);
    }

    #[test]
    fn pruned_positions_never_return() {
        let m1 = prune_global(&flat_mask(4), &Scores::single(vec![5.0, 1.0, 3.0, 2.0]), 3).unwrap();
        // Index 1 is gone; even a huge score cannot bring it back.
        let m2 = prune_global(&m1, &Scores::single(vec![0.0, 1e9, 0.0, 0.0]), 3).unwrap();
        assert_eq!(kept_indices(&m2), vec![0, 2, 3]);
        assert!(m2.is_subset_of(&m1));
    }

    #[test]
    fn refinement_errors() {
        let m = flat_mask(3);
        let s = Scores::single(vec![1.0; 3]);
        assert!(matches!(prune_global(&m, &s, 4), Err(Error::Refinement { keep: 4, kept: 3 })));
        assert!(matches!(prune_global(&m, &s, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn apply_mask_contract() {
        let mut model = Model::build(ModelSpec::mlp(vec![3, 4, 2], 2), 1).unwrap();
        let before = model.clone();
        let dense = SparsityMask::dense(model.params());
        apply_mask(&mut model, &dense).unwrap();
        assert_eq!(model, before);

        let mut one = dense.clone();
        for l in one.layers.iter_mut() {
            l.keep.iter_mut().for_each(|k| *k = false);
        }
        one.layers[1].keep[3] = true;
        let one = SparsityMask::from_layers(one.layers);
        apply_mask(&mut model, &one).unwrap();
        let nonzero: usize = model
            .params()
            .prunable()
            .map(|(_, e)| e.tensor.data().iter().filter(|&&v| v != 0.0).count())
            .sum();
        assert_eq!(nonzero, 1);
        let once = model.clone();
        apply_mask(&mut model, &one).unwrap();
        assert_eq!(model, once);
    }

    #[test]
    fn apply_mask_shape_mismatch() {
        let mut model = Model::build(ModelSpec::mlp(vec![3, 4, 2], 2), 1).unwrap();
        let other = Model::build(ModelSpec::mlp(vec![3, 5, 2], 2), 1).unwrap();
        let m = SparsityMask::dense(other.params());
        assert!(matches!(apply_mask(&mut model, &m), Err(Error::Shape(_))));
    }

    #[test]
    fn layer_fractions() {
        let model = Model::build(ModelSpec::mlp(vec![2, 5, 2], 2), 1).unwrap();
        let dense = SparsityMask::dense(model.params());
        let rows = layer_pruned_fraction(&dense, model.params()).unwrap();
        assert!(rows.iter().all(|r| r.fraction == 0.0));

        // fc0 has 10 weights; keep 4 of them.
        let mut layers = dense.layers().to_vec();
        for k in layers[0].keep.iter_mut().skip(4) {
            *k = false;
        }
        layers[1].keep[0] = false;
        let m = SparsityMask::from_layers(layers);
        let rows = layer_pruned_fraction(&m, model.params()).unwrap();
        assert_eq!(rows[0].fraction, 0.6);
        let global = rows.last().unwrap();
        assert_eq!(global.name, GLOBAL_ROW);
        assert_eq!(rows[..rows.len() - 1].iter().map(|r| r.pruned).sum::<usize>(), global.pruned);
        assert_eq!(global.pruned, m.total() - m.kept_count());
    }

    #[test]
    fn per_param_alignment() {
        let model = Model::build(ModelSpec::mlp(vec![2, 3, 2], 2), 1).unwrap();
        let m = SparsityMask::dense(model.params());
        let pp = m.per_param(model.params().len());
        assert!(pp[0].is_some() && pp[1].is_none() && pp[2].is_some() && pp[3].is_none());
    }
}

//! In-memory labeled datasets.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Samples stored row-major, one flattened feature vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_shape: Vec<usize>,
    classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

/// A batch of inputs shaped `[n, ..input_shape]` with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl LabeledBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl Dataset {
    pub fn new(input_shape: Vec<usize>, classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let dim: usize = input_shape.iter().product();
        if input_shape.is_empty() || dim == 0 {
            return Err(Error::Data(format!("bad input shape {input_shape:?}")));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::Data(format!(
                "{} feature values for {} samples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if classes < 2 {
            return Err(Error::Data(format!("need at least 2 classes, got {classes}")));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Label { label, classes });
        }
        Ok(Dataset {
            input_shape,
            classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Gathers `indices` into one batch.
    pub fn batch(&self, indices: &[usize]) -> Result<LabeledBatch> {
        if indices.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let d = self.dim();
        let mut features = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Index(format!("sample {i} of {}", self.len())));
            }
            features.extend_from_slice(self.sample(i));
            labels.push(self.labels[i]);
        }
        let mut shape = vec![indices.len()];
        shape.extend(&self.input_shape);
        Ok(LabeledBatch {
            inputs: Tensor::new(shape, features)?,
            labels,
        })
    }

    /// Batches of at most `size` samples over `indices`, in order.
    pub fn batches(&self, indices: &[usize], size: usize) -> Result<Vec<LabeledBatch>> {
        indices.chunks(size.max(1)).map(|c| self.batch(c)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let b = self.batch(indices)?;
        Dataset::new(self.input_shape.clone(), self.classes, b.inputs.into_data(), b.labels)
    }
}

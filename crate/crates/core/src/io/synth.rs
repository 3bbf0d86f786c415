//! Seeded synthetic classification data.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

const RADIUS: f64 = 3.0;

/// Centre of class `c`: `3·e_c` when there are at most `dim` classes,
/// otherwise evenly spaced on a circle of radius 3 in the first two dims.
/// One-dimensional data places two classes at ±3.
pub fn blob_center(c: usize, classes: usize, dim: usize) -> Vec<f64> {
    let mut center = vec![0.0; dim];
    if dim == 1 {
        center[0] = if c == 0 { -RADIUS } else { RADIUS };
    } else if classes <= dim {
        center[c] = RADIUS;
    } else {
        let angle = 2.0 * PI * c as f64 / classes as f64;
        center[0] = RADIUS * angle.cos();
        center[1] = RADIUS * angle.sin();
    }
    center
}

fn check(classes: usize, per_class: usize, dim: usize, noise: f64) -> Result<()> {
    if classes < 2 || per_class < 1 || dim < 1 {
        return Err(Error::Parameter(format!(
            "need at least 2 classes, 1 sample per class and 1 dimension, got {classes}, {per_class}, {dim}"
        )));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::Parameter(format!("noise must be non-negative, got {noise}")));
    }
    Ok(())
}

/// Isotropic Gaussian blobs, `per_class` samples per class in class order.
/// `part` selects an independent draw, e.g. 0 for training and 1 for test.
pub fn gen_blobs_part(classes: usize, per_class: usize, dim: usize, noise: f64, seed: u64, part: u64) -> Result<Dataset> {
    check(classes, per_class, dim, noise)?;
    if dim == 1 && classes > 2 {
        return Err(Error::Parameter("one-dimensional blobs support only 2 classes".into()));
    }
    let mut rng = rng::stream(seed, Purpose::Synthetic, part << 1);
    let mut features = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let center = blob_center(c, classes, dim);
        for _ in 0..per_class {
            for &m in &center {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(m + noise * z);
            }
            labels.push(c);
        }
    }
    Dataset::new(vec![dim], classes, features, labels)
}

pub fn gen_blobs(classes: usize, per_class: usize, dim: usize, noise: f64, seed: u64) -> Result<Dataset> {
    gen_blobs_part(classes, per_class, dim, noise, seed, 0)
}

/// Interleaved spiral arms in the first two dimensions; further dimensions
/// carry pure noise.
pub fn gen_spirals_part(classes: usize, per_class: usize, dim: usize, noise: f64, seed: u64, part: u64) -> Result<Dataset> {
    check(classes, per_class, dim, noise)?;
    if dim < 2 {
        return Err(Error::Parameter("spirals need at least 2 dimensions".into()));
    }
    let mut rng = rng::stream(seed, Purpose::Synthetic, (part << 1) | 1);
    let mut features = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        for j in 0..per_class {
            let r = (j as f64 + 0.5) / per_class as f64;
            let angle = 2.0 * PI * c as f64 / classes as f64 + 1.5 * PI * r;
            let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
            features.push(RADIUS * r * angle.cos() + noise * z());
            features.push(RADIUS * r * angle.sin() + noise * z());
            for _ in 2..dim {
                features.push(noise * z());
            }
            labels.push(c);
        }
    }
    Dataset::new(vec![dim], classes, features, labels)
}

pub fn gen_spirals(classes: usize, per_class: usize, dim: usize, noise: f64, seed: u64) -> Result<Dataset> {
    gen_spirals_part(classes, per_class, dim, noise, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centers_lie_on_radius_three() {
        for (classes, dim) in [(2, 1), (3, 5), (10, 16), (10, 4)] {
            for c in 0..classes {
                let n: f64 = blob_center(c, classes, dim).iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blobs_shape_and_determinism() {
        let a = gen_blobs(2, 50, 2, 0.1, 0).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.class_counts(), vec![50, 50]);
        assert_eq!(a, gen_blobs(2, 50, 2, 0.1, 0).unwrap());
        assert_ne!(a, gen_blobs(2, 50, 2, 0.1, 1).unwrap());
        assert_ne!(a, gen_blobs_part(2, 50, 2, 0.1, 0, 1).unwrap());
    }

    #[test]
    fn spirals() {
        let s = gen_spirals(3, 20, 4, 0.05, 2).unwrap();
        assert_eq!(s.len(), 60);
        assert_eq!(s.dim(), 4);
        assert!(gen_spirals(3, 20, 1, 0.05, 2).is_err());
    }
}

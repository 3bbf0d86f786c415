//! Hessian-vector products by central differences of gradients.

use super::Tensor;
use crate::error::{Error, Result};

/// Step size used when the caller has no better choice: `1e-4 · (1 + max|θ|)`.
pub fn default_hvp_eps(params: &[Tensor]) -> f64 {
    let max = params.iter().fold(0.0f64, |m, p| m.max(p.max_abs()));
    1e-4 * (1.0 + max)
}

fn shifted(params: &[Tensor], v: &[Tensor], eps: f64) -> Vec<Tensor> {
    params
        .iter()
        .zip(v)
        .map(|(p, d)| {
            let mut q = p.clone();
            q.data_mut()
                .iter_mut()
                .zip(d.data())
                .for_each(|(x, dx)| *x += eps * dx);
            q
        })
        .collect()
}

/// `H·v ≈ (∇L(θ + εv) − ∇L(θ − εv)) / 2ε`.
///
/// `grad` maps a full parameter set to its gradient. The caller's parameters
/// are never modified; perturbed copies are handed to `grad` instead.
pub fn hvp_fd<F>(grad: F, params: &[Tensor], v: &[Tensor], eps: f64) -> Result<Vec<Tensor>>
where
    F: Fn(&[Tensor]) -> Result<Vec<Tensor>>,
{
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Parameter(format!("hvp step must be positive, got {eps}")));
    }
    if params.len() != v.len() {
        return Err(Error::Shape(format!(
            "{} direction tensors for {} parameters",
            v.len(),
            params.len()
        )));
    }
    for (p, d) in params.iter().zip(v) {
        p.same_shape(d, "hvp direction")?;
    }
    let plus = grad(&shifted(params, v, eps))?;
    let minus = grad(&shifted(params, v, -eps))?;
    if plus.len() != params.len() || minus.len() != params.len() {
        return Err(Error::Shape("gradient count does not match parameters".into()));
    }
    plus.into_iter()
        .zip(minus)
        .map(|(gp, gm)| {
            if !gp.all_finite() || !gm.all_finite() {
                return Err(Error::Numeric("non-finite gradient in hvp".into()));
            }
            let data = gp
                .data()
                .iter()
                .zip(gm.data())
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect();
            Tensor::new(gp.shape().to_vec(), data)
        })
        .collect()
}

use super::Tensor;
use crate::error::{Error, Result};

/// SGD-with-momentum hyperparameters and per-parameter velocity buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Tensor>,
}

impl OptimState {
    pub fn new(params: &[Tensor], lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::Parameter(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Parameter(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if !(weight_decay >= 0.0) {
            return Err(Error::Parameter(format!(
                "weight decay must be non-negative, got {weight_decay}"
            )));
        }
        Ok(OptimState {
            lr,
            momentum,
            weight_decay,
            velocity: params.iter().map(Tensor::zeros_like).collect(),
        })
    }

    pub fn velocity(&self) -> &[Tensor] {
        &self.velocity
    }

    /// Zeroes velocity wherever `masks` is off, e.g. after a mid-training prune.
    pub fn apply_masks(&mut self, masks: &[Option<&[bool]>]) {
        for (v, m) in self.velocity.iter_mut().zip(masks) {
            if let Some(m) = m {
                v.data_mut()
                    .iter_mut()
                    .zip(m.iter())
                    .filter(|(_, &keep)| !keep)
                    .for_each(|(x, _)| *x = 0.0);
            }
        }
    }
}

/// One masked SGD-with-momentum update.
///
/// `v ← μv + (g + λθ)`, `θ ← θ − ηv`, then both `θ` and `v` are set to exactly
/// zero wherever the parameter's mask is off. `masks[i] == None` leaves
/// parameter `i` unconstrained.
pub fn sgd_momentum_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut OptimState,
    masks: &[Option<&[bool]>],
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.velocity.len()
        || params.len() != masks.len()
    {
        return Err(Error::Shape(format!(
            "sgd step over {} params, {} grads, {} buffers, {} masks",
            params.len(),
            grads.len(),
            state.velocity.len(),
            masks.len()
        )));
    }
    for (i, ((p, g), m)) in params.iter().zip(grads).zip(masks).enumerate() {
        p.same_shape(g, "sgd gradient")?;
        p.same_shape(&state.velocity[i], "sgd velocity")?;
        if let Some(m) = m {
            if m.len() != p.len() {
                return Err(Error::Shape(format!(
                    "mask of {} entries for parameter of {}",
                    m.len(),
                    p.len()
                )));
            }
        }
    }
    let (lr, mu, wd) = (state.lr, state.momentum, state.weight_decay);
    for ((p, g), (v, m)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.velocity.iter_mut().zip(masks))
    {
        for (j, ((w, &gw), vel)) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(v.data_mut())
            .enumerate()
        {
            if m.is_some_and(|m| !m[j]) {
                *w = 0.0;
                *vel = 0.0;
                continue;
            }
            *vel = mu * *vel + (gw + wd * *w);
            *w -= lr * *vel;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Vec<Tensor> {
        vec![Tensor::vector(vec![v]).unwrap()]
    }

    #[test]
    fn vanilla_sgd() {
        let mut w = one(1.0);
        let mut st = OptimState::new(&w, 0.1, 0.0, 0.0).unwrap();
        sgd_momentum_step(&mut w, &one(2.0), &mut st, &[None]).unwrap();
        assert_eq!(w[0].data(), &[0.8]);
    }

    #[test]
    fn masked_position_stays_zero() {
        let mut w = vec![Tensor::vector(vec![0.0, 1.0]).unwrap()];
        let mut st = OptimState::new(&w, 0.1, 0.9, 1e-4).unwrap();
        let mask = [false, true];
        for _ in 0..3 {
            let g = vec![Tensor::vector(vec![5.0, 1.0]).unwrap()];
            sgd_momentum_step(&mut w, &g, &mut st, &[Some(&mask)]).unwrap();
            assert_eq!(w[0].data()[0], 0.0);
            assert_eq!(st.velocity()[0].data()[0], 0.0);
        }
        assert!(w[0].data()[1] != 1.0);
    }

    #[test]
    fn two_step_momentum_trace() {
        // Hand simulation with lr 0.1, μ 0.9, λ 1e-4, constant g = 1 from w = 1:
        //   v1 = 1 + 1e-4                       = 1.0001
        //   w1 = 1 - 0.1 * 1.0001               = 0.89999
        //   v2 = 0.9 * 1.0001 + 1 + 1e-4 * w1   = 1.900179999
        //   w2 = w1 - 0.1 * v2                  = 0.7099720001
        let mut w = one(1.0);
        let mut st = OptimState::new(&w, 0.1, 0.9, 1e-4).unwrap();
        sgd_momentum_step(&mut w, &one(1.0), &mut st, &[None]).unwrap();
        assert!((w[0].data()[0] - 0.89999).abs() < 1e-15);
        assert!((st.velocity()[0].data()[0] - 1.0001).abs() < 1e-15);
        sgd_momentum_step(&mut w, &one(1.0), &mut st, &[None]).unwrap();
        assert!((st.velocity()[0].data()[0] - 1.900179999).abs() < 1e-14);
        assert!((w[0].data()[0] - 0.7099720001).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let mut w = one(1.0);
        let mut st = OptimState::new(&w, 0.1, 0.0, 0.0).unwrap();
        let g = vec![Tensor::vector(vec![1.0, 2.0]).unwrap()];
        assert!(matches!(
            sgd_momentum_step(&mut w, &g, &mut st, &[None]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let w = one(1.0);
        assert!(OptimState::new(&w, 0.0, 0.9, 0.0).is_err());
        assert!(OptimState::new(&w, 0.1, 1.0, 0.0).is_err());
        assert!(OptimState::new(&w, 0.1, 0.9, -1.0).is_err());
    }
}

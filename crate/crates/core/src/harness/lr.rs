use super::config::{LrMode, RunConfig};
use crate::error::{Error, Result};

/// Multi-step rate for 1-based `epoch` of `k`: `lr0` before epoch `⌊k/2⌋`,
/// `lr0·γ` before `⌊3k/4⌋`, `lr0·γ²` from there on. A milestone that rounds
/// down to zero is skipped.
fn multistep(lr0: f64, gamma: f64, k: usize, epoch: usize) -> f64 {
    let milestones = [k / 2, 3 * k / 4];
    let passed = milestones.iter().filter(|&&m| m > 0 && epoch >= m).count();
    lr0 * gamma.powi(passed as i32)
}

/// Learning rate for epoch `epoch` (1-based, at most `config.epochs`) of
/// megabatch `t` (1-based).
pub fn lr_at(config: &RunConfig, t: usize, epoch: usize) -> Result<f64> {
    if epoch == 0 || epoch > config.epochs {
        return Err(Error::Index(format!("epoch {epoch} of {}", config.epochs)));
    }
    if t == 0 {
        return Err(Error::Index("megabatches are numbered from 1".into()));
    }
    Ok(match config.lr_mode {
        LrMode::MultistepM1Only if t >= 2 => config.post_m1_lr,
        _ => multistep(config.lr0, config.gamma, config.epochs, epoch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{DatasetKind, Variant};

    fn cfg(k: usize, mode: LrMode) -> RunConfig {
        let mut c = RunConfig::new(Variant::AppDefault, 4.5, 8, DatasetKind::SyntheticBlobs);
        c.epochs = k;
        c.lr_mode = mode;
        c
    }

    #[test]
    fn regime_a() {
        let c = cfg(182, LrMode::MultistepM1Only);
        assert_eq!(lr_at(&c, 1, 1).unwrap(), 0.1);
        assert_eq!(lr_at(&c, 1, 90).unwrap(), 0.1);
        assert!((lr_at(&c, 1, 91).unwrap() - 0.01).abs() < 1e-15);
        assert!((lr_at(&c, 1, 137).unwrap() - 0.001).abs() < 1e-15);
        assert_eq!(lr_at(&c, 2, 1).unwrap(), 0.001);
        assert_eq!(lr_at(&c, 7, 150).unwrap(), 0.001);
    }

    #[test]
    fn regime_b_restarts() {
        let c = cfg(20, LrMode::CyclicEveryMt);
        assert_eq!(lr_at(&c, 5, 1).unwrap(), 0.1);
        assert!((lr_at(&c, 5, 10).unwrap() - 0.01).abs() < 1e-15);
        assert!((lr_at(&c, 5, 15).unwrap() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn short_runs_and_bounds() {
        let c = cfg(1, LrMode::CyclicEveryMt);
        assert_eq!(lr_at(&c, 1, 1).unwrap(), 0.1);
        assert!(matches!(lr_at(&c, 1, 0), Err(Error::Index(_))));
        assert!(matches!(lr_at(&c, 1, 2), Err(Error::Index(_))));
    }
}

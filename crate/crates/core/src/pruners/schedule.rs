use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step exponents of the remaining-weight fraction `0.8^δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSchedule {
    pub tau: f64,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl DeltaSchedule {
    /// Remaining-weight fraction after step `t` (1-based).
    pub fn keep_fraction(&self, t: usize) -> f64 {
        keep_fraction(self.values[t - 1])
    }
}

/// Uniformly spaced exponents from 1 to `tau` inclusive; one step yields `[tau]`.
pub fn make_delta_schedule(tau: f64, steps: usize) -> Result<DeltaSchedule> {
    if !(tau >= 1.0) || !tau.is_finite() {
        return Err(Error::Parameter(format!("tau must be at least 1, got {tau}")));
    }
    if steps < 1 {
        return Err(Error::Parameter("schedule needs at least one step".into()));
    }
    let values = if steps == 1 {
        vec![tau]
    } else {
        let span = tau - 1.0;
        let last = (steps - 1) as f64;
        let mut v: Vec<f64> = (0..steps).map(|i| 1.0 + span * i as f64 / last).collect();
        v[steps - 1] = tau;
        v
    };
    Ok(DeltaSchedule { tau, steps, values })
}

pub fn keep_fraction(delta: f64) -> f64 {
    0.8f64.powf(delta)
}

/// Weights kept at exponent `delta` out of the dense prunable count:
/// `max(1, round_half_up(0.8^δ · P))`.
pub fn keep_count(delta: f64, dense_prunable: usize) -> Result<usize> {
    if dense_prunable < 1 {
        return Err(Error::Parameter("no prunable weights".into()));
    }
    let exact = keep_fraction(delta) * dense_prunable as f64;
    Ok(((exact + 0.5).floor() as usize).clamp(1, dense_prunable))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_step_schedule() {
        let s = make_delta_schedule(4.5, 8).unwrap();
        assert_eq!(s.values, vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5]);
    }

    #[test]
    fn uniform_spacing_and_endpoints() {
        for steps in 2..40 {
            let s = make_delta_schedule(4.5, steps).unwrap();
            assert_eq!(s.values[0], 1.0);
            assert_eq!(*s.values.last().unwrap(), 4.5);
            let d = 3.5 / (steps - 1) as f64;
            for w in s.values.windows(2) {
                assert!((w[1] - w[0] - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_step_is_tau() {
        assert_eq!(make_delta_schedule(4.5, 1).unwrap().values, vec![4.5]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_delta_schedule(0.5, 8).is_err());
        assert!(make_delta_schedule(4.5, 0).is_err());
        assert!(keep_count(1.0, 0).is_err());
    }

    #[test]
    fn final_fraction_matches_reported_remaining_weights() {
        // 36.63% remaining at τ = 4.5.
        assert!((keep_fraction(4.5) - 0.3663).abs() < 1e-4);
    }

    #[test]
    fn keep_counts() {
        assert_eq!(keep_count(1.0, 1000).unwrap(), 800);
        assert_eq!(keep_count(4.5, 10_000).unwrap(), 3664);
        assert_eq!(keep_count(20.0, 3).unwrap(), 1);
        // Frozen from a 50-digit evaluation of 0.8^δ · 10⁴ over the 8-step schedule.
        let s = make_delta_schedule(4.5, 8).unwrap();
        let counts: Vec<usize> = s.values.iter().map(|&d| keep_count(d, 10_000).unwrap()).collect();
        assert_eq!(counts, [8000, 7155, 6400, 5724, 5120, 4579, 4096, 3664]);
    }
}

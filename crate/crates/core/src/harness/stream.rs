use rand::seq::{index, SliceRandom};

use super::config::Replay;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// One megabatch as indices into the training pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Megabatch {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Megabatch {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Equal-sized disjoint megabatches over a training pool. The held-out test
/// set lives in a separate [`Dataset`] and never enters the pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MegabatchStream {
    megabatches: Vec<Megabatch>,
    dropped: usize,
}

/// Training and validation indices visible at one point of the stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Caps each class at `per_class_cap` (uniform subsample), shuffles, cuts
/// `count` equal megabatches (dropping the remainder) and splits each into
/// train and validation parts with `round(val_frac · |M|)` validation samples.
pub fn build_stream(
    dataset: &Dataset,
    count: usize,
    val_frac: f64,
    per_class_cap: Option<usize>,
    seed: u64,
) -> Result<MegabatchStream> {
    if count < 1 {
        return Err(Error::Partition("need at least one megabatch".into()));
    }
    if !(val_frac > 0.0 && val_frac < 1.0) {
        return Err(Error::Parameter(format!("validation fraction must lie in (0, 1), got {val_frac}")));
    }
    let mut pool: Vec<usize> = match per_class_cap {
        None => (0..dataset.len()).collect(),
        Some(cap) => {
            let mut by_class = vec![Vec::new(); dataset.classes()];
            for (i, &l) in dataset.labels().iter().enumerate() {
                by_class[l].push(i);
            }
            let mut pool = Vec::with_capacity(cap * by_class.len());
            for (c, members) in by_class.iter().enumerate() {
                if members.len() < cap {
                    return Err(Error::Data(format!(
                        "class {c} has {} samples, fewer than the cap {cap}",
                        members.len()
                    )));
                }
                let mut rng = rng::stream(seed, Purpose::Subsample, c as u64);
                let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), cap)
                    .into_iter()
                    .map(|j| members[j])
                    .collect();
                picked.sort_unstable();
                pool.extend(picked);
            }
            pool.sort_unstable();
            pool
        }
    };
    pool.shuffle(&mut rng::stream(seed, Purpose::Partition, 0));

    let size = pool.len() / count;
    if size == 0 {
        return Err(Error::Partition(format!(
            "{count} megabatches requested from {} samples",
            pool.len()
        )));
    }
    let val = round_half_up(val_frac * size as f64);
    if val == 0 || val >= size {
        return Err(Error::Partition(format!(
            "megabatches of {size} samples leave {val} for validation and {} for training",
            size - val.min(size)
        )));
    }
    let megabatches = pool[..size * count]
        .chunks_exact(size)
        .map(|c| Megabatch {
            train: c[..size - val].to_vec(),
            val: c[size - val..].to_vec(),
        })
        .collect();
    Ok(MegabatchStream {
        megabatches,
        dropped: pool.len() - size * count,
    })
}

impl MegabatchStream {
    pub fn megabatches(&self) -> &[Megabatch] {
        &self.megabatches
    }

    pub fn len(&self) -> usize {
        self.megabatches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.megabatches.is_empty()
    }

    /// Samples left over after cutting equal megabatches.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Megabatch `t` (1-based).
    pub fn get(&self, t: usize) -> Result<&Megabatch> {
        if t == 0 || t > self.len() {
            return Err(Error::Index(format!("megabatch {t} of {}", self.len())));
        }
        Ok(&self.megabatches[t - 1])
    }
}

/// Union of megabatches 1..=t under full replay, megabatch `t` alone otherwise.
pub fn replay_view(stream: &MegabatchStream, t: usize, replay: Replay) -> Result<View> {
    stream.get(t)?;
    let first = match replay {
        Replay::Full => 0,
        Replay::None => t - 1,
    };
    let parts = &stream.megabatches[first..t];
    Ok(View {
        train: parts.iter().flat_map(|m| m.train.iter().copied()).collect(),
        val: parts.iter().flat_map(|m| m.val.iter().copied()).collect(),
    })
}

/// Size of a pruning subset drawn from `n` training samples.
pub fn pi_size(n: usize, fraction: f64) -> usize {
    round_half_up(fraction * n as f64).clamp(1, n)
}

/// Uniform subset of `train` without replacement, of size
/// `round(fraction · |train|)` (at least one), in ascending pool order.
pub fn draw_pi(train: &[usize], fraction: f64, seed: u64, index: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!("pruning fraction must lie in (0, 1], got {fraction}")));
    }
    if train.is_empty() {
        return Err(Error::Data("cannot draw a pruning subset from an empty view".into()));
    }
    let n = pi_size(train.len(), fraction);
    let mut rng = rng::stream(seed, Purpose::Pi, index);
    let mut picked: Vec<usize> = index::sample(&mut rng, train.len(), n)
        .into_iter()
        .map(|j| train[j])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize, classes: usize) -> Dataset {
        Dataset::new(vec![1], classes, (0..n).map(|i| i as f64).collect(), (0..n).map(|i| i % classes).collect())
            .unwrap()
    }

    #[test]
    fn equal_megabatches_drop_remainder() {
        let s = build_stream(&pool(1003, 2), 10, 0.1, None, 0).unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.dropped(), 3);
        assert!(s.megabatches().iter().all(|m| m.train.len() == 90 && m.val.len() == 10));
        // remainder larger than one megabatch
        let s = build_stream(&pool(24, 2), 5, 0.25, None, 0).unwrap();
        assert_eq!((s.len(), s.dropped()), (5, 4));
    }

    #[test]
    fn cap_then_partition() {
        let s = build_stream(&pool(14 * 300, 14), 1, 0.1, Some(270), 1).unwrap();
        assert_eq!(s.megabatches()[0].len(), 3780);
        assert!(matches!(build_stream(&pool(20, 2), 1, 0.1, Some(11), 1), Err(Error::Data(_))));
    }

    #[test]
    fn partition_errors() {
        assert!(matches!(build_stream(&pool(5, 2), 6, 0.1, None, 0), Err(Error::Partition(_))));
        // One sample per megabatch leaves nothing for validation.
        assert!(matches!(build_stream(&pool(4, 2), 4, 0.1, None, 0), Err(Error::Partition(_))));
    }

    #[test]
    fn views() {
        let s = build_stream(&pool(1000, 2), 10, 0.1, None, 3).unwrap();
        assert_eq!(replay_view(&s, 3, Replay::Full).unwrap().train.len(), 270);
        assert_eq!(replay_view(&s, 3, Replay::None).unwrap().train.len(), 90);
        assert_eq!(replay_view(&s, 1, Replay::Full).unwrap(), replay_view(&s, 1, Replay::None).unwrap());
        assert!(matches!(replay_view(&s, 0, Replay::Full), Err(Error::Index(_))));
        assert!(matches!(replay_view(&s, 11, Replay::Full), Err(Error::Index(_))));
    }

    #[test]
    fn pi_sizes() {
        assert_eq!(pi_size(5625, 0.2), 1125);
        let train: Vec<usize> = (100..190).collect();
        let mut all = draw_pi(&train, 1.0, 1, 1).unwrap();
        all.sort_unstable();
        assert_eq!(all, train);
        assert_eq!(draw_pi(&train, 0.2, 4, 2).unwrap(), draw_pi(&train, 0.2, 4, 2).unwrap());
        assert!(matches!(draw_pi(&[], 0.2, 4, 2), Err(Error::Data(_))));
    }
}

use proptest::prelude::*;

use anytime_prune::harness::{build_stream, draw_pi, pi_size, replay_view, Replay};
use anytime_prune::io::gen_blobs;
use anytime_prune::pruners::{keep_count, make_delta_schedule, prune_global, LayerMask, Scores, SparsityMask};

fn mask_from(keep: Vec<Vec<bool>>) -> SparsityMask {
    SparsityMask::from_layers(
        keep.into_iter()
            .enumerate()
            .map(|(i, keep)| LayerMask {
                name: format!("l{i}"),
                param_index: i,
                shape: vec![keep.len()],
                keep,
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_is_monotone_and_ends_at_tau(tau in 1.0f64..8.0, steps in 1usize..40, p in 1usize..2_000_000) {
        let s = make_delta_schedule(tau, steps).unwrap();
        prop_assert_eq!(s.values.len(), steps);
        prop_assert_eq!(*s.values.last().unwrap(), tau);
        if steps > 1 {
            prop_assert_eq!(s.values[0], 1.0);
        }
        let counts: Vec<usize> = s.values.iter().map(|&d| keep_count(d, p).unwrap()).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(counts.iter().all(|&c| c >= 1 && c <= p));
    }

    #[test]
    fn stream_partitions_the_pool(per_class in 8usize..40, count in 1usize..6, seed in any::<u64>()) {
        let data = gen_blobs(3, per_class, 2, 0.5, 1).unwrap();
        let s = build_stream(&data, count, 0.2, None, seed).unwrap();
        prop_assert_eq!(s.len(), count);
        let mut seen: Vec<usize> = s.megabatches().iter().flat_map(|m| m.train.iter().chain(&m.val).copied()).collect();
        let sizes: Vec<usize> = s.megabatches().iter().map(|m| m.len()).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] == w[1]));
        prop_assert_eq!(seen.len() + s.dropped(), data.len());
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len() + s.dropped(), data.len());

        for t in 1..=count {
            let full = replay_view(&s, t, Replay::Full).unwrap();
            let none = replay_view(&s, t, Replay::None).unwrap();
            prop_assert_eq!(full.train.len(), t * s.get(1).unwrap().train.len());
            prop_assert_eq!(&none.train, &s.get(t).unwrap().train);
            let pi = draw_pi(&full.train, 0.2, seed, t as u64).unwrap();
            prop_assert_eq!(pi.len(), pi_size(full.train.len(), 0.2));
            prop_assert!(pi.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(pi.iter().all(|i| full.train.contains(i)));
        }
    }

    #[test]
    fn pruning_nests_and_hits_the_budget(
        keep in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..50), 1..4),
        raw in prop::collection::vec(0u8..5, 200),
        frac in 0.0f64..1.0,
    ) {
        let mask = mask_from(keep);
        prop_assume!(mask.kept_count() > 0);
        let mut it = raw.iter().cycle();
        let scores = Scores {
            layers: mask.layers().iter().map(|l| l.keep.iter().map(|_| *it.next().unwrap() as f64).collect()).collect(),
        };
        let k = ((frac * mask.kept_count() as f64) as usize).max(1);
        let next = prune_global(&mask, &scores, k).unwrap();
        prop_assert_eq!(next.kept_count(), k);
        prop_assert!(next.is_subset_of(&mask));
        prop_assert_eq!(next.total(), mask.total());
        // Deterministic under repetition.
        prop_assert_eq!(prune_global(&mask, &scores, k).unwrap(), next);
    }
}

#[test]
fn pruning_rejects_a_growing_budget() {
    let mask = mask_from(vec![vec![true, false, true]]);
    let scores = Scores { layers: vec![vec![1.0, 2.0, 3.0]] };
    assert!(prune_global(&mask, &scores, 3).is_err());
    assert!(prune_global(&mask, &scores, 0).is_err());
}

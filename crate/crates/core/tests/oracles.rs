use std::fs;

use anytime_prune::harness::{self, DatasetKind, RunConfig, Variant};
use anytime_prune::io::{self, gen_blobs, idx, tabular::parse_csv, write_idx};
use anytime_prune::metrics::summarize;

/// Nearest-centroid probe: well separated blobs must be almost perfectly
/// separable before any network is involved.
#[test]
fn blobs_are_linearly_separable() {
    let d = gen_blobs(2, 50, 2, 0.1, 0).unwrap();
    let mut centroids = [[0.0; 2]; 2];
    let counts = d.class_counts();
    for i in 0..d.len() {
        let c = &mut centroids[d.labels()[i]];
        c[0] += d.sample(i)[0] / counts[d.labels()[i]] as f64;
        c[1] += d.sample(i)[1] / counts[d.labels()[i]] as f64;
    }
    let correct = (0..d.len())
        .filter(|&i| {
            let x = d.sample(i);
            let dist = |c: &[f64; 2]| (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            let guess = if dist(&centroids[0]) <= dist(&centroids[1]) { 0 } else { 1 };
            guess == d.labels()[i]
        })
        .count();
    assert!(correct as f64 / d.len() as f64 >= 0.99, "{correct}/{}", d.len());
}

#[test]
fn dense_training_learns_easy_blobs() {
    let mut c = RunConfig::new(Variant::Baseline, 1.0, 2, DatasetKind::SyntheticBlobs);
    c.classes = 3;
    c.per_class = 60;
    c.dim = 4;
    c.noise = 0.3;
    c.hidden = vec![16];
    c.epochs = 8;
    let log = harness::run(&c.resolve().unwrap()).unwrap();
    let s = summarize(&log).unwrap();
    assert!(s.final_test_acc >= 95.0, "test acc {}", s.final_test_acc);
    assert_eq!(s.kept_counts, vec![s.dense_prunable; 2]);
}

#[test]
fn idx_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = io::load_idx(
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k/t10k-images-idx3-ubyte.gz"),
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k/t10k-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    assert_eq!(d.input_shape(), &[1, 28, 28]);
    assert_eq!(d.classes(), 10);
    let small = d.subset(&(0..50).collect::<Vec<_>>()).unwrap();
    let (a, b) = (dir.path().join("x.idx"), dir.path().join("y.idx"));
    write_idx(&small, &a, &b).unwrap();
    assert_eq!(idx::load_idx_with(&a, &b, 10).unwrap(), small);
}

#[test]
fn csv_with_and_without_header_agree() {
    let body = "0.5,1,2\n1.5,0,3\n";
    let plain = parse_csv(body, 1, None, 2).unwrap();
    let headed = parse_csv(&format!("x,label,y\n{body}"), 1, None, 2).unwrap();
    assert_eq!(plain, headed);
    assert_eq!(plain.labels(), &[1, 0]);
    assert_eq!(plain.sample(1), &[1.5, 3.0]);
}

#[test]
fn run_directory_layout() {
    let mut c = RunConfig::new(Variant::AppDefault, 2.0, 2, DatasetKind::SyntheticSpirals);
    c.classes = 2;
    c.per_class = 40;
    c.dim = 2;
    c.noise = 0.1;
    c.hidden = vec![8];
    c.epochs = 2;
    let log = harness::run(&c.resolve().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::write_run(&log, dir.path()).unwrap();
    for f in ["config.toml", "curves.csv", "megabatches.csv", "layers.csv", "predictions.csv", "events.csv", "summary.json", "gen_gap.svg", "cer.svg", "layers.svg"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let curves = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap(), io::CURVES_HEADER.join(","));
    assert_eq!(curves.lines().count(), 1 + 2 * 2);
    // The echoed config parses back to the same run.
    let again = io::parse_config(&dir.path().join("config.toml")).unwrap();
    assert_eq!(harness::config_hash(&again).unwrap(), log.config_hash);
}

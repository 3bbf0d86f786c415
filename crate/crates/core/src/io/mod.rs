//! Config files, dataset ingestion and run outputs.

mod config;
pub mod idx;
mod output;
pub mod plot;
pub mod synth;
pub mod tabular;

use rand::seq::SliceRandom;

pub use config::{echo_config, parse_config, parse_config_str};
pub use idx::{load_idx, write_idx};
pub use output::{
    read_summary, summary_file, write_curves_csv, write_events_csv, write_layers_csv, write_megabatches_csv,
    write_predictions_csv, write_run, write_summary_json, SummaryFile, CURVES_HEADER,
};
pub use synth::{gen_blobs, gen_spirals};
pub use tabular::load_csv;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::harness::DatasetSource;
use crate::rng::{self, Purpose};

/// Splits off `round(fraction · n)` samples as a held-out test set.
fn holdout(data: Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng::stream(seed, Purpose::Holdout, 0));
    let n_test = ((fraction * data.len() as f64) + 0.5).floor() as usize;
    if n_test == 0 || n_test >= data.len() {
        return Err(Error::Data(format!(
            "test fraction {fraction} of {} samples leaves an empty split",
            data.len()
        )));
    }
    let (test, pool) = order.split_at_mut(n_test);
    test.sort_unstable();
    pool.sort_unstable();
    Ok((data.subset(pool)?, data.subset(test)?))
}

fn same_classes(a: Dataset, b: Dataset) -> Result<(Dataset, Dataset)> {
    let classes = a.classes().max(b.classes());
    let widen = |d: Dataset| {
        if d.classes() == classes {
            Ok(d)
        } else {
            Dataset::new(d.input_shape().to_vec(), classes, d.features().to_vec(), d.labels().to_vec())
        }
    };
    Ok((widen(a)?, widen(b)?))
}

/// Training pool and held-out test set for a dataset source. Sources
/// without their own test split are divided using `split_seed`.
pub fn load_source(source: &DatasetSource, split_seed: u64) -> Result<(Dataset, Dataset)> {
    match source {
        DatasetSource::Idx {
            images,
            labels,
            test,
            test_fraction,
        } => {
            let data = load_idx(images, labels)?;
            match test {
                Some((ti, tl)) => same_classes(data, load_idx(ti, tl)?),
                None => holdout(data, *test_fraction, split_seed),
            }
        }
        DatasetSource::Csv {
            path,
            label_column,
            test_path,
            input_shape,
            test_fraction,
        } => {
            let read = |p: &std::path::Path| {
                tabular::parse_csv(&std::fs::read_to_string(p)?, *label_column, input_shape.as_deref(), 2)
            };
            let data = read(path)?;
            match test_path {
                Some(tp) => same_classes(data, read(tp)?),
                None => holdout(data, *test_fraction, split_seed),
            }
        }
        DatasetSource::Blobs {
            classes,
            per_class,
            dim,
            noise,
            test_per_class,
            seed,
        } => Ok((
            synth::gen_blobs_part(*classes, *per_class, *dim, *noise, *seed, 0)?,
            synth::gen_blobs_part(*classes, *test_per_class, *dim, *noise, *seed, 1)?,
        )),
        DatasetSource::Spirals {
            classes,
            per_class,
            dim,
            noise,
            test_per_class,
            seed,
        } => Ok((
            synth::gen_spirals_part(*classes, *per_class, *dim, *noise, *seed, 0)?,
            synth::gen_spirals_part(*classes, *test_per_class, *dim, *noise, *seed, 1)?,
        )),
    }
}

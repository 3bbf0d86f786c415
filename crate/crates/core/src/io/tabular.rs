//! Numeric CSV datasets: one sample per row, one integer label column.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

fn parse_label(cell: &str, line: usize) -> Result<usize> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("label `{cell}` is not a number"),
    })?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(Error::Parse {
            line,
            message: format!("label `{cell}` is not a non-negative integer"),
        });
    }
    Ok(v as usize)
}

/// Reads CSV text. A first row without a single numeric cell is taken as a
/// header. `input_shape`, when given, must multiply out to the feature count.
pub fn parse_csv(
    text: &str,
    label_column: usize,
    input_shape: Option<&[usize]>,
    min_classes: usize,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(row + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        if row == 0 && record.iter().all(|c| c.trim().parse::<f64>().is_err()) {
            continue;
        }
        if label_column >= record.len() {
            return Err(Error::Parse {
                line,
                message: format!("no label column {label_column} in a row of {} cells", record.len()),
            });
        }
        let w = record.len() - 1;
        if *width.get_or_insert(w) != w {
            return Err(Error::Parse {
                line,
                message: format!("{w} features, earlier rows have {}", width.unwrap_or(0)),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_column {
                labels.push(parse_label(cell, line)?);
            } else {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("cell `{cell}` in column {i} is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("cell `{cell}` in column {i} is not finite"),
                    });
                }
                features.push(v);
            }
        }
    }
    let width = width.ok_or_else(|| Error::Data("CSV holds no samples".into()))?;
    let shape = match input_shape {
        Some(s) if s.iter().product::<usize>() == width => s.to_vec(),
        Some(s) => {
            return Err(Error::Data(format!("input shape {s:?} does not hold {width} features")));
        }
        None => vec![width],
    };
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(min_classes).max(2);
    Dataset::new(shape, classes, features, labels)
}

pub fn load_csv(path: &Path, label_column: usize) -> Result<Dataset> {
    parse_csv(&std::fs::read_to_string(path)?, label_column, None, 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let d = parse_csv("label,x,y\n1,0.5,2\n0,1e-3,-4\n", 0, None, 2).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.sample(1), &[1e-3, -4.0]);
    }

    #[test]
    fn label_column_anywhere() {
        let d = parse_csv("0.5,2,3\n", 2, None, 5).unwrap();
        assert_eq!(d.labels(), &[3]);
        assert_eq!(d.classes(), 5);
        assert_eq!(d.sample(0), &[0.5, 2.0]);
    }

    #[test]
    fn non_numeric_cell_is_a_parse_error() {
        match parse_csv("1.0,2.0,abc\n", 0, None, 2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse_csv("a,b\n0,1\n1,x\n", 0, None, 2) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv("0.5,1\n", 0, None, 2), Err(Error::Parse { .. })));
    }
}

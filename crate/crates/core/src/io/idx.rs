//! IDX image/label files, optionally gzip-compressed.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// File contents, transparently gunzipped when they start with the gzip magic.
fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated {what} header")))
}

/// Header dimensions and payload of an IDX buffer with the expected magic.
fn parse<'a>(bytes: &'a [u8], magic: u32, what: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let found = be_u32(bytes, 0, what)?;
    if found != magic {
        return Err(Error::Format(format!(
            "{what} file has magic {found:#010x}, expected {magic:#010x}"
        )));
    }
    let ndim = (magic & 0xff) as usize;
    let dims: Vec<usize> = (0..ndim)
        .map(|i| be_u32(bytes, 4 + 4 * i, what).map(|d| d as usize))
        .collect::<Result<_>>()?;
    let header = 4 + 4 * ndim;
    let expected: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "{what} file truncated: {} of {expected} bytes",
            payload.len()
        )));
    }
    Ok((dims, &payload[..expected]))
}

/// Raw images `[count, rows, cols]` and labels from an IDX pair.
pub fn read_idx(images: &Path, labels: &Path) -> Result<(Vec<usize>, Vec<u8>, Vec<u8>)> {
    let image_bytes = read_bytes(images)?;
    let label_bytes = read_bytes(labels)?;
    let (dims, pixels) = parse(&image_bytes, IMAGES_MAGIC, "images")?;
    let (ldims, labs) = parse(&label_bytes, LABELS_MAGIC, "labels")?;
    if dims[0] != ldims[0] {
        return Err(Error::Format(format!("{} images but {} labels", dims[0], ldims[0])));
    }
    Ok((dims, pixels.to_vec(), labs.to_vec()))
}

/// Loads an IDX pair as samples of shape `[1, rows, cols]` with pixels scaled
/// to `[0, 1]`. The class count is one more than the largest label, but at
/// least `min_classes`.
pub fn load_idx_with(images: &Path, labels: &Path, min_classes: usize) -> Result<Dataset> {
    let (dims, pixels, labs) = read_idx(images, labels)?;
    if dims[1] == 0 || dims[2] == 0 {
        return Err(Error::Format(format!("empty image dimensions {dims:?}")));
    }
    let labels: Vec<usize> = labs.iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(min_classes).max(2);
    let features = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::new(vec![1, dims[1], dims[2]], classes, features, labels)
}

pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    load_idx_with(images, labels, 2)
}

/// Encodes `data` (shape `[1, rows, cols]`, values in `[0, 1]`) as an IDX
/// pair; paths ending in `.gz` are compressed.
pub fn write_idx(data: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let (rows, cols) = match data.input_shape() {
        [1, r, c] | [r, c] => (*r, *c),
        s => return Err(Error::Format(format!("cannot store samples of shape {s:?} as IDX images"))),
    };
    let mut img = Vec::with_capacity(16 + data.features().len());
    img.extend(IMAGES_MAGIC.to_be_bytes());
    for d in [data.len(), rows, cols] {
        img.extend((d as u32).to_be_bytes());
    }
    for &v in data.features() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Format(format!("pixel value {v} outside [0, 1]")));
        }
        img.push((v * 255.0).round() as u8);
    }
    let mut lab = Vec::with_capacity(8 + data.len());
    lab.extend(LABELS_MAGIC.to_be_bytes());
    lab.extend((data.len() as u32).to_be_bytes());
    for &l in data.labels() {
        lab.push(u8::try_from(l).map_err(|_| Error::Format(format!("label {l} does not fit a byte")))?);
    }
    write_maybe_gz(images, &img)?;
    write_maybe_gz(labels, &lab)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes)?;
        fs::write(path, enc.finish()?)?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_pair(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let images: Vec<u8> = vec![
            0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, // magic, 2 images of 2x2
            0, 255, 51, 102, //
            255, 0, 0, 0,
        ];
        let labels: Vec<u8> = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];
        let (a, b) = (dir.join("img.idx"), dir.join("lab.idx"));
        fs::write(&a, images).unwrap();
        fs::write(&b, labels).unwrap();
        (a, b)
    }

    #[test]
    fn hand_crafted_pair() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = hand_pair(dir.path());
        let d = load_idx(&a, &b).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 4);
        assert_eq!(d.labels(), &[7, 3]);
        assert_eq!(d.sample(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.sample(1)[0], 1.0);
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = hand_pair(dir.path());
        assert!(matches!(load_idx(&a, &a), Err(Error::Format(_))));
        let mut short = fs::read(&a).unwrap();
        short.truncate(20);
        fs::write(&a, short).unwrap();
        assert!(matches!(load_idx(&a, &b), Err(Error::Format(_))));
    }

    #[test]
    fn count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = hand_pair(dir.path());
        fs::write(&b, [0, 0, 8, 1, 0, 0, 0, 1, 7]).unwrap();
        assert!(matches!(load_idx(&a, &b), Err(Error::Format(_))));
    }

    #[test]
    fn gz_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = hand_pair(dir.path());
        let d = load_idx(&a, &b).unwrap();
        let (ga, gb) = (dir.path().join("i.gz"), dir.path().join("l.gz"));
        write_idx(&d, &ga, &gb).unwrap();
        assert_eq!(load_idx(&ga, &gb).unwrap(), d);
    }
}

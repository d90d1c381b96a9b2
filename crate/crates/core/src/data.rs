//! IDX dataset ingestion, 28×28 → 16×16 box resampling and 4-class subsets.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoding::{EncodedImage, IMAGE_LEN, IMAGE_SIDE, NUM_CLASSES};
use crate::error::{Error, Result};

pub const RAW_SIDE: usize = 28;
pub const RAW_LEN: usize = RAW_SIDE * RAW_SIDE;
pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
/// Source pixels per output pixel along each axis.
pub const SCALE: f64 = RAW_SIDE as f64 / IMAGE_SIDE as f64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    pixels: Vec<u8>,
    label: u8,
}

impl RawImage {
    pub fn new(pixels: Vec<u8>, label: u8) -> Result<Self> {
        if pixels.len() != RAW_LEN {
            return Err(Error::Validation(format!(
                "raw image needs {RAW_LEN} pixels, got {}",
                pixels.len()
            )));
        }
        if label > 9 {
            return Err(Error::Validation(format!("label {label} outside 0..=9")));
        }
        Ok(RawImage { pixels, label })
    }

    /// Row-major, row 0 first.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(path, offset as u64, "file ends inside the header"))
}

/// Reads a paired IDX images/labels file set.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<RawImage>> {
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;

    let magic = be_u32(&images, 0, images_path)?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            images_path,
            0,
            format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(&images, 4, images_path)? as usize;
    for (offset, what) in [(8, "rows"), (12, "columns")] {
        let dim = be_u32(&images, offset, images_path)?;
        if dim as usize != RAW_SIDE {
            return Err(format_err(
                images_path,
                offset as u64,
                format!("{what} = {dim}, expected {RAW_SIDE}"),
            ));
        }
    }
    let expected = 16 + count * RAW_LEN;
    if images.len() != expected {
        return Err(format_err(
            images_path,
            images.len().min(expected) as u64,
            format!("{count} images need {expected} bytes, file has {}", images.len()),
        ));
    }

    let magic = be_u32(&labels, 0, labels_path)?;
    if magic != LABELS_MAGIC {
        return Err(format_err(
            labels_path,
            0,
            format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let label_count = be_u32(&labels, 4, labels_path)? as usize;
    if label_count != count {
        return Err(format_err(
            labels_path,
            4,
            format!("{label_count} labels for {count} images"),
        ));
    }
    if labels.len() != 8 + count {
        return Err(format_err(
            labels_path,
            labels.len().min(8 + count) as u64,
            format!("{count} labels need {} bytes, file has {}", 8 + count, labels.len()),
        ));
    }

    images[16..]
        .chunks_exact(RAW_LEN)
        .zip(&labels[8..])
        .enumerate()
        .map(|(i, (px, &label))| {
            if label > 9 {
                return Err(format_err(
                    labels_path,
                    (8 + i) as u64,
                    format!("label {label} outside 0..=9"),
                ));
            }
            Ok(RawImage {
                pixels: px.to_vec(),
                label,
            })
        })
        .collect()
}

/// Writes `records` as an IDX images/labels pair.
pub fn write_idx(images_path: &Path, labels_path: &Path, records: &[RawImage]) -> Result<()> {
    let n = records.len() as u32;
    let mut images = Vec::with_capacity(16 + records.len() * RAW_LEN);
    for word in [IMAGES_MAGIC, n, RAW_SIDE as u32, RAW_SIDE as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    let mut labels = Vec::with_capacity(8 + records.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    for r in records {
        images.extend_from_slice(&r.pixels);
        labels.push(r.label);
    }
    fs::write(images_path, images).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))
}

pub fn count_by_class(records: &[RawImage]) -> BTreeMap<u8, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.label).or_insert(0) += 1;
    }
    counts
}

/// Fraction of source cell `i` (spanning `[i, i+1)`) inside output cell `o`.
fn overlap(o: usize, i: usize) -> f64 {
    let lo = (o as f64 * SCALE).max(i as f64);
    let hi = ((o + 1) as f64 * SCALE).min((i + 1) as f64);
    (hi - lo).max(0.0)
}

/// Area-average resampling of a `RAW_SIDE`² grid stored with row stride
/// `stride`; only the first `RAW_SIDE` rows and columns are read.
pub fn box_resample(grid: &[f64], stride: usize) -> Result<Vec<f64>> {
    if stride < RAW_SIDE || grid.len() < (RAW_SIDE - 1) * stride + RAW_SIDE {
        return Err(Error::Validation(format!(
            "grid of {} values with stride {stride} does not hold {RAW_SIDE}×{RAW_SIDE}",
            grid.len()
        )));
    }
    let weights: Vec<Vec<(usize, f64)>> = (0..IMAGE_SIDE)
        .map(|o| {
            (0..RAW_SIDE)
                .map(|i| (i, overlap(o, i)))
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let area = SCALE * SCALE;
    let mut out = vec![0.0; IMAGE_LEN];
    for (r, wr) in weights.iter().enumerate() {
        for (c, wc) in weights.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, a) in wr {
                for &(j, b) in wc {
                    acc += a * b * grid[i * stride + j];
                }
            }
            out[r * IMAGE_SIDE + c] = acc / area;
        }
    }
    Ok(out)
}

/// 16×16 row-major grid with values in `[0, 255]`.
pub fn rescale_16(img: &RawImage) -> Vec<f64> {
    let grid: Vec<f64> = img.pixels.iter().map(|&p| f64::from(p)).collect();
    box_resample(&grid, RAW_SIDE).expect("raw image has the resampler's shape")
}

/// Ordered list of 4 source labels; list position is the class index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ClassSubsetSpec {
    classes: [u8; NUM_CLASSES],
}

impl ClassSubsetSpec {
    pub fn new(classes: &[u8]) -> Result<Self> {
        let arr: [u8; NUM_CLASSES] = classes.try_into().map_err(|_| {
            Error::Config(format!(
                "need exactly {NUM_CLASSES} classes, got {}",
                classes.len()
            ))
        })?;
        if arr.iter().any(|&c| c > 9) {
            return Err(Error::Config(format!("classes must be in 0..=9, got {arr:?}")));
        }
        for i in 0..NUM_CLASSES {
            if arr[i + 1..].contains(&arr[i]) {
                return Err(Error::Config(format!("duplicate class {}", arr[i])));
            }
        }
        Ok(ClassSubsetSpec { classes: arr })
    }

    pub fn classes(&self) -> &[u8; NUM_CLASSES] {
        &self.classes
    }

    /// Class index of a source label, if selected.
    pub fn remap(&self, label: u8) -> Option<usize> {
        self.classes.iter().position(|&c| c == label)
    }
}

impl TryFrom<Vec<u8>> for ClassSubsetSpec {
    type Error = Error;
    fn try_from(v: Vec<u8>) -> Result<Self> {
        ClassSubsetSpec::new(&v)
    }
}

impl From<ClassSubsetSpec> for Vec<u8> {
    fn from(s: ClassSubsetSpec) -> Self {
        s.classes.to_vec()
    }
}

impl FromStr for ClassSubsetSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parsed = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u8>()
                    .map_err(|_| Error::Config(format!("bad class list {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ClassSubsetSpec::new(&parsed)
    }
}

impl fmt::Display for ClassSubsetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.classes.iter().map(u8::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Indices into `records` and remapped labels of the selected images, in file
/// order, keeping at most `limit_per_class` per class.
pub fn select(
    records: &[RawImage],
    spec: &ClassSubsetSpec,
    limit_per_class: Option<usize>,
) -> Result<Vec<(usize, usize)>> {
    let mut taken = [0usize; NUM_CLASSES];
    let mut seen = [false; NUM_CLASSES];
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if let Some(class) = spec.remap(r.label) {
            seen[class] = true;
            if limit_per_class.map_or(true, |l| taken[class] < l) {
                taken[class] += 1;
                out.push((i, class));
            }
        }
    }
    if let Some(class) = seen.iter().position(|s| !s) {
        return Err(Error::Validation(format!(
            "class {} is absent from the records",
            spec.classes[class]
        )));
    }
    Ok(out)
}

/// Filters, remaps, rescales to 16×16 and normalizes.
pub fn make_dataset(
    records: &[RawImage],
    spec: &ClassSubsetSpec,
    limit_per_class: Option<usize>,
) -> Result<Vec<EncodedImage>> {
    select(records, spec, limit_per_class)?
        .into_iter()
        .map(|(i, class)| EncodedImage::from_pixels(&rescale_16(&records[i]), class, i))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mnist,
    Fashion,
}

impl DatasetKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Fashion => "fashion",
        }
    }

    /// Standard `(images, labels)` file locations under `data_dir`.
    pub fn default_paths(self, data_dir: &Path, train: bool) -> (PathBuf, PathBuf) {
        let base = data_dir.join(self.dir_name());
        let prefix = if train { "train" } else { "t10k" };
        (
            base.join(format!("{prefix}-images-idx3-ubyte")),
            base.join(format!("{prefix}-labels-idx1-ubyte")),
        )
    }
}

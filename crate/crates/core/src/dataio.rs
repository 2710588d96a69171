//! IDX ingestion, class subsetting, and CSV/JSON persistence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IdxError, Result};
use crate::scalar::Real;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
/// Number of Fashion-MNIST classes.
pub const CLASSES: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Row-major 28×28 images scaled to `[0, 1]`, aligned with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub images: Vec<Vec<T>>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Column `k` (top to bottom) of image `i`.
    pub fn column(&self, i: usize, k: usize) -> Vec<T> {
        (0..SIDE).map(|r| self.images[i][r * SIDE + k]).collect()
    }

    pub fn label_histogram(&self) -> BTreeMap<u8, usize> {
        let mut hist = BTreeMap::new();
        for &y in &self.labels {
            *hist.entry(y).or_insert(0) += 1;
        }
        hist
    }

    /// First `n` samples of every class, in original order.
    pub fn take_per_class(&self, n: usize) -> Self {
        let mut seen: BTreeMap<u8, usize> = BTreeMap::new();
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let c = seen.entry(self.labels[i]).or_insert(0);
                *c += 1;
                *c <= n
            })
            .collect();
        self.select(&keep)
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            images: idx.iter().map(|&i| self.images[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            split: self.split,
        }
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn need(bytes: &[u8], expected: usize) -> Result<(), IdxError> {
    if bytes.len() < expected {
        Err(IdxError::Truncated {
            expected,
            found: bytes.len(),
        })
    } else {
        Ok(())
    }
}

/// Parses an IDX3 image file into raw 784-byte images.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Vec<u8>>, IdxError> {
    need(bytes, 16)?;
    let magic = be_u32(bytes, 0);
    if magic != IMAGE_MAGIC {
        return Err(IdxError::BadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4) as usize;
    let (rows, cols) = (be_u32(bytes, 8), be_u32(bytes, 12));
    if rows as usize != SIDE || cols as usize != SIDE {
        return Err(IdxError::DimMismatch { rows, cols });
    }
    need(bytes, 16 + count * PIXELS)?;
    Ok(bytes[16..16 + count * PIXELS].chunks_exact(PIXELS).map(<[u8]>::to_vec).collect())
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    need(bytes, 8)?;
    let magic = be_u32(bytes, 0);
    if magic != LABEL_MAGIC {
        return Err(IdxError::BadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let count = be_u32(bytes, 4) as usize;
    need(bytes, 8 + count)?;
    Ok(bytes[8..8 + count].to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an image/label IDX pair, scaling pixel bytes by 1/255.
pub fn load_idx<T: Real>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, split: Split) -> Result<Dataset<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let idx_err = |path: &Path| {
        let path = path.to_path_buf();
        move |kind| Error::Idx { path, kind }
    };
    let raw = parse_idx_images(&read(ip)?).map_err(idx_err(ip))?;
    let labels = parse_idx_labels(&read(lp)?).map_err(idx_err(lp))?;
    if raw.len() != labels.len() {
        return Err(Error::Idx {
            path: lp.to_path_buf(),
            kind: IdxError::CountMismatch {
                images: raw.len(),
                labels: labels.len(),
            },
        });
    }
    let scale = T::lit(255.0).recip();
    let images = raw
        .into_iter()
        .map(|img| img.into_iter().map(|b| T::from_count(b as usize) * scale).collect())
        .collect();
    Ok(Dataset { images, labels, split })
}

pub fn encode_idx_images(images: &[Vec<u8>]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + images.len() * PIXELS);
    for word in [IMAGE_MAGIC, images.len() as u32, SIDE as u32, SIDE as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        if img.len() != PIXELS {
            return Err(Error::DimensionMismatch {
                what: "image",
                expected: PIXELS,
                found: img.len(),
            });
        }
        out.extend_from_slice(img);
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>, images: &[Vec<u8>], labels: &[u8]) -> Result<()> {
    if images.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "labels",
            expected: images.len(),
            found: labels.len(),
        });
    }
    write_bytes(images_path.as_ref(), &encode_idx_images(images)?)?;
    write_bytes(labels_path.as_ref(), &encode_idx_labels(labels))
}

/// Keeps the listed classes, relabeled `0..classes.len()` in list order.
pub fn subset_classes<T: Real>(dataset: &Dataset<T>, classes: &[u8]) -> Result<Dataset<T>> {
    if classes.is_empty() {
        return Err(Error::Empty("class selection"));
    }
    if let Some(&bad) = classes.iter().find(|&&c| c >= CLASSES) {
        return Err(Error::UnknownClass(bad));
    }
    let mut relabel = [None; CLASSES as usize];
    for (new, &c) in classes.iter().enumerate() {
        if relabel[c as usize].replace(new as u8).is_some() {
            return Err(Error::param("classes", format!("class {c} listed twice")));
        }
    }
    let keep: Vec<usize> = (0..dataset.len()).filter(|&i| relabel.get(dataset.labels[i] as usize).copied().flatten().is_some()).collect();
    let mut out = dataset.select(&keep);
    for y in &mut out.labels {
        *y = relabel[*y as usize].expect("filtered");
    }
    Ok(out)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:?}").expect("write to String");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<f32> for Cell {
    fn from(v: f32) -> Self {
        // Through the shortest f32 decimal so the file shows `0.1`, not its f64 widening.
        Cell::Float(format!("{v:?}").parse().expect("f32 debug output parses"))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u8> for Cell {
    fn from(v: u8) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// In-memory CSV with a fixed header; every row must match its arity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::RowArity {
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Header and raw string rows of a CSV file.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;
    Ok((header, rows))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<V: Serialize + ?Sized>(path: impl AsRef<Path>, value: &V) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

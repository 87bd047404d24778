//! Dataset ingestion: IDX image/label files, delimited text, and synthetic
//! Gaussian blobs.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// `N × m` feature matrix with optional ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("dataset features must be finite".into()));
        }
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(Error::Input(format!(
                    "{} labels for {} samples",
                    l.len(),
                    features.nrows()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            features: features.as_standard_layout().into_owned(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Number of distinct ground-truth labels, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut seen: Vec<usize> = l.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        })
    }

    /// The first `n` samples.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            name: self.name.clone(),
            features: self.features.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
        }
    }

    /// Per-feature min-max scaling to `[0, 1]`; constant features become 0.
    pub fn minmax_normalize(&mut self) {
        for mut col in self.features.columns_mut() {
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            let range = hi - lo;
            col.mapv_inplace(|v| if range > 0.0 { (v - lo) / range } else { 0.0 });
        }
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxReader<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl IdxReader<'_> {
    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn u32_at(&self, offset: usize) -> Result<u32> {
        let chunk = self
            .bytes
            .get(offset..offset + 4)
            .ok_or_else(|| self.error(self.bytes.len(), "truncated header"))?;
        Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
    }

    fn expect_magic(&self, magic: u32) -> Result<()> {
        let found = self.u32_at(0)?;
        if found != magic {
            return Err(self.error(0, format!("expected magic {magic:#010x}, found {found:#010x}")));
        }
        Ok(())
    }

    fn payload(&self, start: usize, len: usize) -> Result<&[u8]> {
        let end = start + len;
        if self.bytes.len() < end {
            return Err(self.error(
                self.bytes.len(),
                format!("truncated data: expected {len} bytes from offset {start}"),
            ));
        }
        if self.bytes.len() > end {
            return Err(self.error(end, "unexpected trailing bytes"));
        }
        Ok(&self.bytes[start..end])
    }
}

/// Reads an unsigned-byte rank-3 IDX image file (optionally gzipped) and its
/// label file. Pixels are scaled to `[0, 1]` and each image is flattened
/// row-major.
pub fn load_idx(images: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let bytes = read_maybe_gz(images)?;
    let reader = IdxReader { bytes: &bytes, path: images };
    reader.expect_magic(IDX_IMAGES_MAGIC)?;
    let n = reader.u32_at(4)? as usize;
    let rows = reader.u32_at(8)? as usize;
    let cols = reader.u32_at(12)? as usize;
    let dim = rows * cols;
    let pixels = reader.payload(16, n * dim)?;
    let features = Array2::from_shape_fn((n, dim), |(i, j)| pixels[i * dim + j] as f64 / 255.0);

    let labels = match labels {
        Some(path) => {
            let bytes = read_maybe_gz(path)?;
            let reader = IdxReader { bytes: &bytes, path };
            reader.expect_magic(IDX_LABELS_MAGIC)?;
            let count = reader.u32_at(4)? as usize;
            if count != n {
                return Err(reader.error(4, format!("label count {count} does not match image count {n}")));
            }
            Some(reader.payload(8, n)?.iter().map(|&b| b as usize).collect())
        }
        None => None,
    };
    let name = images
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(name, features, labels)
}

/// Loads several IDX image/label pairs and stacks them in order.
pub fn load_idx_concat<P: AsRef<Path>>(pairs: &[(P, Option<P>)], name: &str) -> Result<Dataset> {
    if pairs.is_empty() {
        return Err(Error::Config("no IDX files given".into()));
    }
    let parts = pairs
        .iter()
        .map(|(img, lbl)| load_idx(img.as_ref(), lbl.as_ref().map(|p| p.as_ref())))
        .collect::<Result<Vec<_>>>()?;
    if parts.windows(2).any(|w| w[0].dim() != w[1].dim()) {
        return Err(Error::Input("IDX files have different image sizes".into()));
    }
    let views: Vec<_> = parts.iter().map(|d| d.features.view()).collect();
    let features = concatenate(Axis(0), &views).map_err(|e| Error::Input(e.to_string()))?;
    let labels = if parts.iter().all(|d| d.labels.is_some()) {
        Some(parts.iter().flat_map(|d| d.labels.clone().unwrap_or_default()).collect())
    } else {
        None
    };
    Dataset::new(name, features, labels)
}

/// Writes features as an `n × rows × cols` unsigned-byte IDX file (values
/// clamped to `[0, 1]` and quantized to 1/255) plus an optional label file.
/// Paths ending in `.gz` are gzip-compressed.
pub fn write_idx(dataset: &Dataset, images: &Path, labels: Option<&Path>, rows: usize, cols: usize) -> Result<()> {
    if rows * cols != dataset.dim() {
        return Err(Error::shape("IDX image size", dataset.dim(), format!("{rows}×{cols}")));
    }
    let mut out = Vec::with_capacity(16 + dataset.len() * dataset.dim());
    for word in [IDX_IMAGES_MAGIC, dataset.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend(dataset.features.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    write_maybe_gz(images, &out)?;

    if let Some(path) = labels {
        let values = dataset
            .labels()
            .ok_or_else(|| Error::Input("dataset has no labels to write".into()))?;
        let mut out = Vec::with_capacity(8 + values.len());
        out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(values.len() as u32).to_be_bytes());
        for &l in values {
            let byte = u8::try_from(l).map_err(|_| Error::Input(format!("label {l} does not fit in a byte")))?;
            out.push(byte);
        }
        write_maybe_gz(path, &out)?;
    }
    Ok(())
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(fs::File::create(path)?, Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        fs::write(path, bytes)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelColumn {
    Index(usize),
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelimitedOptions {
    pub delimiter: char,
    pub has_header: bool,
    pub label_column: Option<LabelColumn>,
}

impl Default for DelimitedOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: false,
            label_column: None,
        }
    }
}

/// Reads a rectangular numeric table. Blank lines are skipped; no
/// normalization is applied.
pub fn load_delimited(path: &Path, options: &DelimitedOptions) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut width = None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if (options.has_header && idx == 0) || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(options.delimiter).map(str::trim).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(parse_err(line_no, format!("expected {w} fields, found {}", cells.len())));
            }
            _ => {}
        }
        let label_idx = options.label_column.map(|c| match c {
            LabelColumn::Index(i) => i,
            LabelColumn::Last => cells.len() - 1,
        });
        if let Some(li) = label_idx {
            if li >= cells.len() {
                return Err(parse_err(line_no, format!("label column {li} out of range")));
            }
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line_no, format!("field {} is not numeric: {cell:?}", j + 1)))?;
            if Some(j) == label_idx {
                if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
                    return Err(parse_err(line_no, format!("label {cell:?} is not a non-negative integer")));
                }
                labels.push(v as usize);
            } else {
                if !v.is_finite() {
                    return Err(parse_err(line_no, format!("field {} is not finite", j + 1)));
                }
                values.push(v);
            }
        }
        rows += 1;
    }

    let cols = if rows == 0 { 0 } else { values.len() / rows };
    let features = Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Input(e.to_string()))?;
    let name = path
        .file_stem()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "delimited".into());
    Dataset::new(name, features, options.label_column.map(|_| labels))
}

/// Parameters for [`make_blobs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_per_cluster: usize,
    pub k: usize,
    pub dim: usize,
    /// Minimum pairwise distance between cluster centers.
    pub separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Isotropic Gaussian clusters with centers at least `separation` apart.
///
/// When `k ≤ dim` the centers sit on distinct scaled coordinate axes, so every
/// pair is exactly `separation` apart. Rows are shuffled.
pub fn make_blobs(spec: &BlobSpec) -> Result<Dataset> {
    if spec.n_per_cluster == 0 || spec.k == 0 || spec.dim == 0 {
        return Err(Error::Config("blob counts and dimension must be positive".into()));
    }
    if !(spec.separation > 0.0) || !(spec.noise_sigma >= 0.0) {
        return Err(Error::Config("separation must be > 0 and noise_sigma ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = blob_centers(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let n = spec.n_per_cluster * spec.k;
    let mut order: Vec<usize> = (0..n).map(|i| i % spec.k).collect();
    order.shuffle(&mut rng);
    let mut features = Array2::zeros((n, spec.dim));
    for (i, &c) in order.iter().enumerate() {
        for j in 0..spec.dim {
            let jitter = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            features[[i, j]] = centers[[c, j]] + jitter;
        }
    }
    Dataset::new(format!("blobs-k{}-d{}", spec.k, spec.dim), features, Some(order))
}

fn blob_centers(spec: &BlobSpec, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut centers = Array2::zeros((spec.k, spec.dim));
    if spec.k <= spec.dim {
        let scale = spec.separation / std::f64::consts::SQRT_2;
        let mut axes: Vec<usize> = (0..spec.dim).collect();
        axes.shuffle(rng);
        for c in 0..spec.k {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            centers[[c, axes[c]]] = sign * scale;
        }
        return centers;
    }
    let mut half_width = spec.separation * spec.k as f64;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < spec.k {
        let candidate: Vec<f64> = (0..spec.dim).map(|_| rng.random_range(-half_width..half_width)).collect();
        let ok = (0..placed).all(|c| {
            let d2: f64 = candidate.iter().enumerate().map(|(j, v)| (v - centers[[c, j]]).powi(2)).sum();
            d2 >= spec.separation * spec.separation
        });
        if ok {
            for (j, v) in candidate.into_iter().enumerate() {
                centers[[placed, j]] = v;
            }
            placed += 1;
        } else {
            attempts += 1;
            if attempts % 1000 == 0 {
                half_width *= 2.0;
            }
        }
    }
    centers
}

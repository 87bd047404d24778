use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use deepkm::data::{
    load_delimited, load_idx, load_idx_concat, make_blobs, BlobSpec, Dataset, DelimitedOptions, LabelColumn,
};

use crate::error::{CliError, Result};

/// Synthetic blobs used when `--dataset blobs` carries no options:
/// 4 clusters of 500 points in 50 dimensions.
pub const DEFAULT_BLOBS: BlobSpec = BlobSpec {
    n_per_cluster: 500,
    k: 4,
    dim: 50,
    separation: 3.5,
    noise_sigma: 1.0,
    seed: 0,
};

/// Where the data comes from.
///
/// String forms:
/// - `blobs` or `blobs:k=4,dim=50,n=500,sep=3.5,sigma=1,seed=0` (`n` is per cluster)
/// - `mnist:DIR`
/// - `idx:IMAGES[,LABELS]`
/// - `csv:PATH[,label=last|none|COLUMN][,header][,delim=tab|CHAR][,minmax]`
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Blobs(BlobSpec),
    Mnist(PathBuf),
    Idx { images: PathBuf, labels: Option<PathBuf> },
    Csv { path: PathBuf, options: DelimitedOptions, minmax: bool },
}

fn bad(spec: &str, why: impl fmt::Display) -> CliError {
    CliError::Usage(format!("dataset {spec:?}: {why}"))
}

fn parse_num<T: FromStr>(spec: &str, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(spec, format!("{key}={value} is not a valid number")))
}

impl FromStr for DatasetSource {
    type Err = CliError;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "blobs" => {
                let mut b = DEFAULT_BLOBS;
                for kv in rest.split(',').filter(|s| !s.is_empty()) {
                    let (key, value) = kv.split_once('=').ok_or_else(|| bad(spec, format!("expected key=value, got {kv:?}")))?;
                    match key {
                        "k" => b.k = parse_num(spec, key, value)?,
                        "dim" => b.dim = parse_num(spec, key, value)?,
                        "n" => b.n_per_cluster = parse_num(spec, key, value)?,
                        "sep" => b.separation = parse_num(spec, key, value)?,
                        "sigma" => b.noise_sigma = parse_num(spec, key, value)?,
                        "seed" => b.seed = parse_num(spec, key, value)?,
                        _ => return Err(bad(spec, format!("unknown blobs option {key:?}"))),
                    }
                }
                Ok(DatasetSource::Blobs(b))
            }
            "mnist" if !rest.is_empty() => Ok(DatasetSource::Mnist(rest.into())),
            "idx" if !rest.is_empty() => {
                let mut parts = rest.splitn(2, ',');
                let images = parts.next().unwrap_or_default().into();
                let labels = parts.next().map(PathBuf::from);
                Ok(DatasetSource::Idx { images, labels })
            }
            "csv" if !rest.is_empty() => {
                let mut parts = rest.split(',');
                let path = parts.next().unwrap_or_default().into();
                let mut options = DelimitedOptions {
                    label_column: Some(LabelColumn::Last),
                    ..Default::default()
                };
                let mut minmax = false;
                for opt in parts {
                    match opt.split_once('=') {
                        Some(("label", "last")) => options.label_column = Some(LabelColumn::Last),
                        Some(("label", "none")) => options.label_column = None,
                        Some(("label", col)) => {
                            options.label_column = Some(LabelColumn::Index(parse_num(spec, "label", col)?))
                        }
                        Some(("delim", "tab")) => options.delimiter = '\t',
                        Some(("delim", d)) if d.chars().count() == 1 => options.delimiter = d.chars().next().unwrap(),
                        None if opt == "header" => options.has_header = true,
                        None if opt == "minmax" => minmax = true,
                        _ => return Err(bad(spec, format!("unknown csv option {opt:?}"))),
                    }
                }
                Ok(DatasetSource::Csv { path, options, minmax })
            }
            _ => Err(bad(spec, "expected blobs[:…], mnist:DIR, idx:IMAGES[,LABELS] or csv:PATH[,…]")),
        }
    }
}

/// First existing file among `names` (each tried with and without `.gz`).
fn find_in(dir: &Path, names: &[&str]) -> Option<PathBuf> {
    names
        .iter()
        .flat_map(|n| [dir.join(format!("{n}.gz")), dir.join(n)])
        .find(|p| p.is_file())
}

impl DatasetSource {
    /// Files this source reads. Empty for synthetic data.
    pub fn paths(&self) -> Result<Vec<PathBuf>> {
        Ok(match self {
            DatasetSource::Blobs(_) => Vec::new(),
            DatasetSource::Mnist(dir) => self.mnist_pairs(dir)?.into_iter().flat_map(|(a, b)| [a, b]).collect(),
            DatasetSource::Idx { images, labels } => std::iter::once(images.clone()).chain(labels.clone()).collect(),
            DatasetSource::Csv { path, .. } => vec![path.clone()],
        })
    }

    /// Fails if a referenced file does not exist.
    pub fn check_paths(&self) -> Result<()> {
        for p in self.paths()? {
            if !p.is_file() {
                return Err(CliError::Usage(format!("dataset file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// `(images, labels)` pairs: a single `images-idx3-ubyte`/`labels-idx1-ubyte`
    /// pair, or the train and t10k splits stacked in that order.
    fn mnist_pairs(&self, dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
        let single = (
            find_in(dir, &["images-idx3-ubyte"]),
            find_in(dir, &["labels-idx1-ubyte"]),
        );
        if let (Some(i), Some(l)) = single {
            return Ok(vec![(i, l)]);
        }
        let mut pairs = Vec::new();
        for split in ["train", "t10k"] {
            let images = find_in(dir, &[&format!("{split}-images-idx3-ubyte"), &format!("{split}-images.idx3-ubyte")]);
            let labels = find_in(dir, &[&format!("{split}-labels-idx1-ubyte"), &format!("{split}-labels.idx1-ubyte")]);
            if let (Some(i), Some(l)) = (images, labels) {
                pairs.push((i, l));
            }
        }
        if pairs.is_empty() {
            return Err(CliError::Usage(format!("no MNIST IDX files found in {}", dir.display())));
        }
        Ok(pairs)
    }

    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DatasetSource::Blobs(spec) => make_blobs(spec)?,
            DatasetSource::Mnist(dir) => {
                let pairs: Vec<(PathBuf, Option<PathBuf>)> =
                    self.mnist_pairs(dir)?.into_iter().map(|(i, l)| (i, Some(l))).collect();
                load_idx_concat(&pairs, "mnist")?
            }
            DatasetSource::Idx { images, labels } => load_idx(images, labels.as_deref())?,
            DatasetSource::Csv { path, options, minmax } => {
                let mut ds = load_delimited(path, options)?;
                if *minmax {
                    ds.minmax_normalize();
                }
                ds
            }
        })
    }
}

//! Experiment description: defaults, then a key=value file, then flags.
//!
//! File format:
//!
//! ```text
//! # comment
//! [dataset]
//! source = mnist:data/mnist10k
//!
//! [train]
//! k = 10
//! lambda = 10
//! epochs = 30
//! hidden = 500,500,2000
//!
//! [experiment]
//! methods = aekm, ours
//! seeds = 0, 1, 2
//! out = results
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use deepkm::harness::{Method, TrainConfig};
use deepkm::nn::OptimizerKind;

use crate::dataset::DatasetSource;
use crate::error::{CliError, Result};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "DEEPKM_OUT";
pub const DEFAULT_OUT: &str = "results";

/// Settings that either the file or the command line may provide.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dataset: Option<String>,
    pub methods: Option<Vec<Method>>,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub finetune_epochs: Option<usize>,
    pub pretrain_epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub latent_dim: Option<usize>,
    pub hidden_dims: Option<Vec<usize>>,
    pub optimizer: Option<OptimizerKind>,
    pub learning_rate: Option<f64>,
    pub pretrain_learning_rate: Option<f64>,
    pub finetune_learning_rate: Option<f64>,
    pub kmeans_max_iters: Option<usize>,
    pub kmeans_tol: Option<f64>,
    pub kmeans_n_init: Option<usize>,
}

macro_rules! take {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl Overrides {
    /// Fields set in `later` replace those in `self`.
    pub fn merge(mut self, later: Overrides) -> Overrides {
        take!(self, later; dataset, methods, seeds, out, k, lambda, alpha, epsilon, finetune_epochs,
            pretrain_epochs, batch_size, latent_dim, hidden_dims, optimizer, learning_rate,
            pretrain_learning_rate, finetune_learning_rate, kmeans_max_iters, kmeans_tol, kmeans_n_init);
        self
    }

    fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident => $g:ident),*) => { $( if let Some(v) = self.$f.clone() { cfg.$g = v; } )* };
        }
        set!(k => k, alpha => alpha, epsilon => epsilon, finetune_epochs => finetune_epochs,
            pretrain_epochs => pretrain_epochs, batch_size => batch_size, latent_dim => latent_dim,
            hidden_dims => hidden_dims);
        if let Some(v) = self.kmeans_max_iters {
            cfg.kmeans.max_iters = v;
        }
        if let Some(v) = self.kmeans_tol {
            cfg.kmeans.tol = v;
        }
        if let Some(v) = self.kmeans_n_init {
            cfg.kmeans.n_init = v;
        }
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        for (slot, specific) in [
            (&mut cfg.pretrain_optimizer, self.pretrain_learning_rate),
            (&mut cfg.finetune_optimizer, self.finetune_learning_rate),
        ] {
            if let Some(kind) = self.optimizer {
                slot.kind = kind;
            }
            if let Some(lr) = specific.or(self.learning_rate) {
                slot.learning_rate = lr;
            }
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentFile {
    pub dataset: DatasetSource,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Shared settings; `method` and `seed` are filled per run.
    pub config: TrainConfig,
    pub out: PathBuf,
}

impl ExperimentFile {
    /// Defaults, then `file`, then `flags`. Validates every method's
    /// configuration and checks that dataset files exist.
    pub fn resolve(file: Overrides, flags: Overrides) -> Result<Self> {
        let merged = file.merge(flags);
        let spec = merged
            .dataset
            .clone()
            .ok_or_else(|| CliError::Usage("no dataset given (use --dataset or [dataset] source)".into()))?;
        let dataset: DatasetSource = spec.parse()?;
        dataset.check_paths()?;

        let mut config = TrainConfig::default();
        merged.apply(&mut config);
        let methods = merged.methods.clone().unwrap_or_else(|| vec![Method::Ours]);
        if methods.is_empty() {
            return Err(CliError::Usage("method list is empty".into()));
        }
        let seeds = merged.seeds.clone().unwrap_or_else(|| vec![0]);
        if seeds.is_empty() {
            return Err(CliError::Usage("seed list is empty".into()));
        }
        config.method = methods[0];
        config.seed = seeds[0];
        for &m in &methods {
            config.clone().with_method(m).validate()?;
        }
        let out = merged
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| DEFAULT_OUT.into());
        Ok(Self {
            dataset,
            methods,
            seeds,
            config,
            out,
        })
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| format!("bad list element {s:?}")))
        .collect()
}

fn parse_value<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("bad value {value:?}"))
}

fn parse_optimizer(value: &str) -> std::result::Result<OptimizerKind, String> {
    match value.to_ascii_lowercase().as_str() {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        _ => Err(format!("unknown optimizer {value:?}; expected adam or sgd")),
    }
}

pub fn parse_methods(value: &str) -> std::result::Result<Vec<Method>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Method>().map_err(|e| e.to_string()))
        .collect()
}

/// Parses the text of a config file. `path` is only used in messages.
pub fn parse_config_text(text: &str, path: &Path) -> Result<Overrides> {
    let mut o = Overrides::default();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| CliError::ConfigFile {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !["dataset", "train", "experiment"].contains(&name) {
                return Err(err(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim().replace('-', "_"), v.trim()))
            .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let Some(section) = section.as_deref() else {
            return Err(err(format!("key {key:?} appears before any [section]")));
        };
        let r: std::result::Result<(), String> = (|| {
            match (section, key.as_str()) {
                ("dataset", "source") => o.dataset = Some(value.to_string()),
                ("experiment", "methods" | "method") => o.methods = Some(parse_methods(value)?),
                ("experiment", "seeds" | "seed") => o.seeds = Some(parse_list(value)?),
                ("experiment", "out") => o.out = Some(value.into()),
                ("train", "k") => o.k = Some(parse_value(value)?),
                ("train", "lambda") => o.lambda = Some(parse_value(value)?),
                ("train", "alpha") => o.alpha = Some(parse_value(value)?),
                ("train", "epsilon") => o.epsilon = Some(parse_value(value)?),
                ("train", "epochs" | "finetune_epochs") => o.finetune_epochs = Some(parse_value(value)?),
                ("train", "pretrain_epochs") => o.pretrain_epochs = Some(parse_value(value)?),
                ("train", "batch_size") => o.batch_size = Some(parse_value(value)?),
                ("train", "latent_dim") => o.latent_dim = Some(parse_value(value)?),
                ("train", "hidden") => o.hidden_dims = Some(parse_list(value)?),
                ("train", "optimizer") => o.optimizer = Some(parse_optimizer(value)?),
                ("train", "lr") => o.learning_rate = Some(parse_value(value)?),
                ("train", "pretrain_lr") => o.pretrain_learning_rate = Some(parse_value(value)?),
                ("train", "finetune_lr") => o.finetune_learning_rate = Some(parse_value(value)?),
                ("train", "kmeans_max_iters") => o.kmeans_max_iters = Some(parse_value(value)?),
                ("train", "kmeans_tol") => o.kmeans_tol = Some(parse_value(value)?),
                ("train", "kmeans_n_init") => o.kmeans_n_init = Some(parse_value(value)?),
                _ => return Err(format!("unknown key {key:?} in [{section}]")),
            }
            Ok(())
        })();
        r.map_err(err)?;
    }
    Ok(o)
}

pub fn load_config_file(path: &Path) -> Result<Overrides> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_config_text(&text, path)
}

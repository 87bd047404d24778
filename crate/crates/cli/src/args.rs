use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config_file, parse_methods, ExperimentFile, Overrides};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "deepkm", version, about = "Deep clustering experiments on an autoencoder latent space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate one method with one seed.
    Run(TrainArgs),
    /// Every method × every seed, aggregated into mean ± std.
    Suite(TrainArgs),
    /// One run, plus a 2-D PCA projection of its final latents.
    Project(TrainArgs),
    /// Score predicted labels against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Default, Args)]
#[command(allow_negative_numbers = true)]
struct TrainArgs {
    /// key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// blobs[:k=4,…] | mnist:DIR | idx:IMAGES[,LABELS] | csv:PATH[,…]
    #[arg(long)]
    dataset: Option<String>,
    /// Method name, or a comma list for `suite`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Number of clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Clustering-loss weight (per-method default when unset).
    #[arg(long)]
    lambda: Option<f64>,
    /// Membership sharpness.
    #[arg(long)]
    alpha: Option<f64>,
    /// Finetuning epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Hidden widths of the encoder, e.g. 500,500,2000.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Learning rate for both phases.
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory (default: $DEEPKM_OUT, else ./results).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct EvalArgs {
    /// Predicted labels: a run JSON or one integer per line.
    #[arg(long)]
    pred: PathBuf,
    /// True labels, one integer per line.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    truth: Option<PathBuf>,
    /// Take true labels from a dataset instead.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Suite,
    Project,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    File(PathBuf),
    Dataset(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Train { mode: Mode, experiment: ExperimentFile },
    Eval { pred: PathBuf, truth: Truth },
}

impl TrainArgs {
    fn overrides(&self) -> Result<Overrides> {
        let methods = self
            .method
            .as_deref()
            .map(parse_methods)
            .transpose()
            .map_err(CliError::Usage)?;
        Ok(Overrides {
            dataset: self.dataset.clone(),
            methods,
            seeds: self.seed.map(|s| vec![s]).or_else(|| self.seeds.clone()),
            out: self.out.clone(),
            k: self.k,
            lambda: self.lambda,
            alpha: self.alpha,
            finetune_epochs: self.epochs,
            pretrain_epochs: self.pretrain_epochs,
            batch_size: self.batch_size,
            latent_dim: self.latent_dim,
            hidden_dims: self.hidden.clone(),
            learning_rate: self.lr,
            ..Default::default()
        })
    }
}

/// Parses `argv` (program name first) into a validated invocation.
pub fn parse_cli<I, T>(argv: I) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (mode, args) = match cli.command {
        Command::Eval(e) => {
            let truth = match (e.truth, e.dataset) {
                (Some(p), _) => Truth::File(p),
                (None, Some(d)) => Truth::Dataset(d),
                (None, None) => unreachable!("clap requires one of them"),
            };
            return Ok(Invocation::Eval { pred: e.pred, truth });
        }
        Command::Run(a) => (Mode::Run, a),
        Command::Suite(a) => (Mode::Suite, a),
        Command::Project(a) => (Mode::Project, a),
    };
    let file = match &args.config {
        Some(path) => load_config_file(path)?,
        None => Overrides::default(),
    };
    let experiment = ExperimentFile::resolve(file, args.overrides()?)?;
    if mode != Mode::Suite && (experiment.methods.len() != 1 || experiment.seeds.len() != 1) {
        return Err(CliError::Usage(
            "run and project take exactly one method and one seed; use suite for more".into(),
        ));
    }
    Ok(Invocation::Train { mode, experiment })
}

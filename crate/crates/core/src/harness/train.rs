use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::streams::{self, derive};
use super::{Method, NoObserver, RunReport, TrainConfig, TrainObserver};
use crate::clustering::{assign, kmeans, Assignment, Centroids};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::{combined_objective, LossConfig, Variant};
use crate::metrics::evaluate;
use crate::nn::{Architecture, Autoencoder, Optimizer};

/// A pretrained autoencoder and its per-epoch reconstruction losses.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub autoencoder: Autoencoder,
    pub losses: Vec<f64>,
}

/// Shuffled index batches; the last batch may be short.
fn epoch_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Running sample-weighted mean of per-batch losses.
#[derive(Default)]
struct EpochMean {
    sum: f64,
    count: usize,
}

impl EpochMean {
    fn add(&mut self, batch_mean: f64, batch_len: usize) {
        self.sum += batch_mean * batch_len as f64;
        self.count += batch_len;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}

fn check_dataset(dataset: &Dataset, config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if dataset.len() < config.k {
        return Err(Error::Config(format!(
            "dataset has {} samples, fewer than K = {}",
            dataset.len(),
            config.k
        )));
    }
    Ok(())
}

/// Reconstruction-only minibatch training for `pretrain_epochs` epochs.
pub fn pretrain(dataset: &Dataset, config: &TrainConfig) -> Result<Pretrained> {
    check_dataset(dataset, config)?;
    let arch = Architecture::symmetric(&config.encoder_dims(dataset.dim()))?;
    let mut ae = Autoencoder::new(&arch, derive(config.seed, streams::INIT))?;
    let mut optimizer = Optimizer::new(config.pretrain_optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(config.seed, streams::PRETRAIN_SHUFFLE));
    // the loss variant is irrelevant without centroids
    let loss = LossConfig::new(Variant::Ct, 0.0, 1.0)?;
    let features = dataset.features();
    let mut losses = Vec::with_capacity(config.pretrain_epochs);

    for epoch in 0..config.pretrain_epochs {
        let mut mean = EpochMean::default();
        for (b, idx) in epoch_batches(dataset.len(), config.batch_size, &mut rng).iter().enumerate() {
            let batch = features.select(Axis(0), idx);
            let objective = combined_objective(&ae, batch.view(), None, &loss)?;
            if !objective.total.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            optimizer.step(&mut ae, &objective.gradients)?;
            mean.add(objective.reconstruction, idx.len());
        }
        losses.push(mean.mean());
    }
    Ok(Pretrained {
        autoencoder: ae,
        losses,
    })
}

/// Runs `config.method` end to end.
pub fn run(dataset: &Dataset, config: &TrainConfig) -> Result<RunReport> {
    run_observed(dataset, config, &mut NoObserver)
}

pub fn run_observed(dataset: &Dataset, config: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<RunReport> {
    check_dataset(dataset, config)?;
    let started = Instant::now();
    if config.method == Method::Km {
        return km_report(dataset, config, started);
    }
    let pretrained = pretrain(dataset, config)?;
    finetune(dataset, config, &pretrained, observer, started)
}

/// Runs an autoencoder-based method from an already pretrained network.
///
/// Pretraining depends only on the seed and the shared settings, so one
/// [`Pretrained`] can serve every method of a seed.
pub fn run_with_pretrained(
    dataset: &Dataset,
    config: &TrainConfig,
    pretrained: &Pretrained,
    observer: &mut dyn TrainObserver,
) -> Result<RunReport> {
    check_dataset(dataset, config)?;
    let started = Instant::now();
    if config.method == Method::Km {
        return km_report(dataset, config, started);
    }
    finetune(dataset, config, pretrained, observer, started)
}

pub fn run_ours(dataset: &Dataset, config: &TrainConfig) -> Result<RunReport> {
    run(dataset, &config.clone().with_method(Method::Ours))
}

pub fn run_ours_norein(dataset: &Dataset, config: &TrainConfig) -> Result<RunReport> {
    run(dataset, &config.clone().with_method(Method::OursNorein))
}

pub fn run_dkm(dataset: &Dataset, config: &TrainConfig, reinit: bool) -> Result<RunReport> {
    let method = if reinit { Method::DkmRein } else { Method::Dkm };
    run(dataset, &config.clone().with_method(method))
}

pub fn run_dcn(dataset: &Dataset, config: &TrainConfig) -> Result<RunReport> {
    run(dataset, &config.clone().with_method(Method::Dcn))
}

pub fn run_baseline_km(dataset: &Dataset, config: &TrainConfig) -> Result<RunReport> {
    run(dataset, &config.clone().with_method(Method::Km))
}

pub fn run_baseline_aekm(dataset: &Dataset, config: &TrainConfig) -> Result<RunReport> {
    run(dataset, &config.clone().with_method(Method::Aekm))
}

fn kmeans_seed(config: &TrainConfig, call: u64) -> u64 {
    derive(config.seed, streams::KMEANS + call)
}

fn km_report(dataset: &Dataset, config: &TrainConfig, started: Instant) -> Result<RunReport> {
    let fit = kmeans(dataset.features().view(), config.k, kmeans_seed(config, 0), config.kmeans)?;
    finish(
        dataset,
        config,
        Vec::new(),
        Vec::new(),
        Vec::new(),
        fit.assignment,
        &fit.centroids,
        dataset.features().clone(),
        started,
    )
}

/// DCN centroid refresh: each batch point nudges its nearest center with
/// step `1/count`.
fn dcn_update(centroids: &mut Centroids, latent: ArrayView2<'_, f64>, counts: &mut [f64]) -> Result<()> {
    let labels = assign(latent, centroids)?;
    let centers = centroids.as_array_mut();
    for (z, &k) in latent.rows().into_iter().zip(labels.labels()) {
        counts[k] += 1.0;
        let rate = 1.0 / counts[k];
        let mut r = centers.row_mut(k);
        r.zip_mut_with(&z, |r, &z| *r -= rate * (*r - z));
    }
    Ok(())
}

fn finetune(
    dataset: &Dataset,
    config: &TrainConfig,
    pretrained: &Pretrained,
    observer: &mut dyn TrainObserver,
    started: Instant,
) -> Result<RunReport> {
    let features = dataset.features();
    let mut ae = pretrained.autoencoder.clone();
    if ae.input_dim() != dataset.dim() || ae.latent_dim() != config.latent_dim {
        return Err(Error::Config(
            "pretrained network does not match the dataset or latent dimension".into(),
        ));
    }
    let latents = ae.encode_all(features.view())?;
    let initial = kmeans(latents.view(), config.k, kmeans_seed(config, 0), config.kmeans)?;
    let mut centroids = initial.centroids;
    observer.on_init(&centroids);

    let Some(loss) = config.loss_config() else {
        // AEKM: clustering of the pretrained latents, no finetuning
        return finish(
            dataset,
            config,
            pretrained.losses.clone(),
            Vec::new(),
            Vec::new(),
            initial.assignment,
            &centroids,
            latents,
            started,
        );
    };

    let mut optimizer = Optimizer::new(config.finetune_optimizer)?;
    let mut centroid_optimizer = Optimizer::new(config.finetune_optimizer)?;
    let mut dcn_counts: Vec<f64> = initial.assignment.counts().iter().map(|&c| c as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive(config.seed, streams::FINETUNE_SHUFFLE));
    let mut recon_series = Vec::with_capacity(config.finetune_epochs);
    let mut cluster_series = Vec::with_capacity(config.finetune_epochs);

    for epoch in 0..config.finetune_epochs {
        let mut recon = EpochMean::default();
        let mut cluster = EpochMean::default();
        for (b, idx) in epoch_batches(dataset.len(), config.batch_size, &mut rng).iter().enumerate() {
            let batch = features.select(Axis(0), idx);
            let objective = combined_objective(&ae, batch.view(), Some(&centroids), &loss)?;
            if !objective.total.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            optimizer.step(&mut ae, &objective.gradients)?;
            match config.method {
                Method::Dkm | Method::DkmRein => {
                    let grad = objective.grad_centroids.as_ref().expect("centroid gradient");
                    centroid_optimizer.step_matrix(centroids.as_array_mut(), grad, "centroids")?;
                }
                Method::Dcn => {
                    let refreshed = ae.encode(batch.view())?;
                    dcn_update(&mut centroids, refreshed.view(), &mut dcn_counts)?;
                }
                _ => {}
            }
            recon.add(objective.reconstruction, idx.len());
            cluster.add(objective.clustering, idx.len());
            observer.on_batch(epoch, b, &centroids);
        }
        recon_series.push(recon.mean());
        cluster_series.push(cluster.mean());

        if matches!(config.method, Method::Ours | Method::DkmRein) {
            let latents = ae.encode_all(features.view())?;
            let fit = kmeans(latents.view(), config.k, kmeans_seed(config, epoch as u64 + 1), config.kmeans)?;
            centroids = fit.centroids;
        }
        observer.on_epoch_end(epoch, &centroids);
    }

    let latents = ae.encode_all(features.view())?;
    let assignment = assign(latents.view(), &centroids)?;
    finish(
        dataset,
        config,
        pretrained.losses.clone(),
        recon_series,
        cluster_series,
        assignment,
        &centroids,
        latents,
        started,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    dataset: &Dataset,
    config: &TrainConfig,
    pretrain_loss: Vec<f64>,
    reconstruction_loss: Vec<f64>,
    clustering_loss: Vec<f64>,
    assignment: Assignment,
    centroids: &Centroids,
    latents: Array2<f64>,
    started: Instant,
) -> Result<RunReport> {
    let assignments = assignment.into_labels();
    let metrics = match dataset.labels() {
        Some(truth) => Some(evaluate(&assignments, truth)?),
        None => None,
    };
    let mut echo = config.clone();
    echo.lambda = Some(config.lambda());
    Ok(RunReport {
        method: config.method,
        seed: config.seed,
        dataset: dataset.name.clone(),
        config: echo,
        pretrain_loss,
        reconstruction_loss,
        clustering_loss,
        assignments,
        centroids: centroids.as_array().rows().into_iter().map(|r| r.to_vec()).collect(),
        metrics,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        latents: Some(latents),
    })
}

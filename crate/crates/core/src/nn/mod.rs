//! Fully-connected autoencoder with hand-written forward and backward passes.
//!
//! Weights are stored `input_dim × output_dim` so a batch (one sample per row)
//! flows through a layer as `batch · W + b`. The encoder maps `ℝ^m → ℝ^l`, the
//! decoder maps `ℝ^l → ℝ^m`.

mod optim;

pub use optim::{Optimizer, OptimizerKind, OptimizerSettings, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray::linalg::general_mat_mul;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows per chunk when encoding a whole dataset.
const ENCODE_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, values: &mut Array2<f64>) {
        if self == Activation::Relu {
            values.mapv_inplace(|v| v.max(0.0));
        }
    }

    /// Masks an upstream gradient by the activation derivative, evaluated from
    /// the post-activation output.
    fn backprop(self, output: &Array2<f64>, grad: &mut Array2<f64>) {
        if self == Activation::Relu {
            ndarray::Zip::from(grad).and(output).for_each(|g, &o| {
                if o <= 0.0 {
                    *g = 0.0;
                }
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            activation,
        }
    }
}

/// Layer layout of an autoencoder, split into encoder and decoder halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
}

impl Architecture {
    /// Builds a mirrored architecture from the encoder widths `[m, h1, .., l]`.
    ///
    /// Hidden layers use ReLU; the encoder output and decoder output are linear.
    pub fn symmetric(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config(format!(
                "an autoencoder needs at least input and latent widths, got {dims:?}"
            )));
        }
        let half = |widths: &[usize]| {
            let n = widths.len() - 1;
            widths
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let act = if i + 1 == n {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    };
                    LayerSpec::new(w[0], w[1], act)
                })
                .collect::<Vec<_>>()
        };
        let reversed: Vec<usize> = dims.iter().rev().copied().collect();
        let arch = Self {
            encoder: half(dims),
            decoder: half(&reversed),
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.is_empty() || self.decoder.is_empty() {
            return Err(Error::Config(
                "encoder and decoder each need at least one layer".into(),
            ));
        }
        let all: Vec<&LayerSpec> = self.encoder.iter().chain(&self.decoder).collect();
        if let Some(bad) = all.iter().find(|l| l.input_dim == 0 || l.output_dim == 0) {
            return Err(Error::Config(format!("layer dims must be positive: {bad:?}")));
        }
        for (i, pair) in all.windows(2).enumerate() {
            if pair[0].output_dim != pair[1].input_dim {
                return Err(Error::Config(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim,
                    i + 1,
                    pair[1].input_dim
                )));
            }
        }
        let first = all[0].input_dim;
        let last = all[all.len() - 1].output_dim;
        if first != last {
            return Err(Error::Config(format!(
                "decoder output width {last} does not match input width {first}"
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[self.encoder.len() - 1].output_dim
    }
}

/// One affine layer followed by an element-wise activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `input_dim × output_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(spec: LayerSpec) -> Self {
        Self {
            weight: Array2::zeros((spec.input_dim, spec.output_dim)),
            bias: Array1::zeros(spec.output_dim),
            activation: spec.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn forward(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = input.dot(&self.weight);
        out += &self.bias;
        self.activation.apply(&mut out);
        out
    }
}

/// Encoder `h_θ` and decoder `g_φ` parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: Vec<Dense>,
    pub decoder: Vec<Dense>,
}

impl Autoencoder {
    /// Seeded initialization: weights uniform in `±1/√fan_in`, biases zero.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |spec: &LayerSpec| {
            let bound = 1.0 / (spec.input_dim as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let mut layer = Dense::zeros(*spec);
            layer.weight.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
            layer
        };
        let encoder = arch.encoder.iter().map(&mut init).collect();
        let decoder = arch.decoder.iter().map(&mut init).collect();
        Ok(Self { encoder, decoder })
    }

    /// Wraps explicit layers, checking that the dimensions chain.
    pub fn from_layers(encoder: Vec<Dense>, decoder: Vec<Dense>) -> Result<Self> {
        let ae = Self { encoder, decoder };
        ae.architecture().validate()?;
        for layer in ae.layers() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::Config(format!(
                    "bias length {} does not match layer width {}",
                    layer.bias.len(),
                    layer.output_dim()
                )));
            }
        }
        Ok(ae)
    }

    pub fn architecture(&self) -> Architecture {
        let spec = |d: &Dense| LayerSpec::new(d.input_dim(), d.output_dim(), d.activation);
        Architecture {
            encoder: self.encoder.iter().map(spec).collect(),
            decoder: self.decoder.iter().map(spec).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder[self.encoder.len() - 1].output_dim()
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.encoder.iter().chain(&self.decoder)
    }

    fn layer_count(&self) -> usize {
        self.encoder.len() + self.decoder.len()
    }

    fn layer(&self, index: usize) -> &Dense {
        if index < self.encoder.len() {
            &self.encoder[index]
        } else {
            &self.decoder[index - self.encoder.len()]
        }
    }

    fn run(layers: &[Dense], input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut current = layers[0].forward(input);
        for layer in &layers[1..] {
            current = layer.forward(current.view());
        }
        current
    }

    /// Maps a `B × m` batch to its `B × l` latent codes.
    pub fn encode(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_cols("encode input", batch, self.input_dim())?;
        Ok(Self::run(&self.encoder, batch))
    }

    /// Maps `B × l` latent codes back to `B × m` reconstructions.
    pub fn decode(&self, latent: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_cols("decode input", latent, self.latent_dim())?;
        Ok(Self::run(&self.decoder, latent))
    }

    /// Encodes an arbitrarily large matrix in fixed-size row chunks.
    pub fn encode_all(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_cols("encode input", data, self.input_dim())?;
        let mut out = Array2::zeros((data.nrows(), self.latent_dim()));
        for (src, mut dst) in data
            .axis_chunks_iter(Axis(0), ENCODE_CHUNK)
            .zip(out.axis_chunks_iter_mut(Axis(0), ENCODE_CHUNK))
        {
            dst.assign(&Self::run(&self.encoder, src));
        }
        Ok(out)
    }

    /// Full pass caching every layer output for [`Autoencoder::backward`].
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<ForwardPass> {
        check_cols("forward input", batch, self.input_dim())?;
        let mut activations = Vec::with_capacity(self.layer_count() + 1);
        activations.push(batch.to_owned());
        for layer in self.layers() {
            let next = layer.forward(activations[activations.len() - 1].view());
            activations.push(next);
        }
        Ok(ForwardPass {
            activations,
            latent_index: self.encoder.len(),
        })
    }

    /// Back-propagates upstream gradients of a scalar loss.
    ///
    /// `grad_reconstruction` is `∂loss/∂x̂` (`B × m`) and `grad_latent` is
    /// `∂loss/∂z` (`B × l`); either may be absent, meaning zero.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        grad_reconstruction: Option<ArrayView2<'_, f64>>,
        grad_latent: Option<ArrayView2<'_, f64>>,
    ) -> Result<Gradients> {
        self.check_pass(pass)?;
        let rows = pass.activations[0].nrows();
        if let Some(g) = grad_reconstruction {
            check_shape("reconstruction gradient", g, rows, self.input_dim())?;
        }
        if let Some(g) = grad_latent {
            check_shape("latent gradient", g, rows, self.latent_dim())?;
        }

        let mut grads = Gradients::zeros_like(self);
        let latent_index = self.encoder.len();
        let mut upstream: Option<Array2<f64>> = grad_reconstruction.map(|g| g.to_owned());

        for index in (0..self.layer_count()).rev() {
            if index + 1 == latent_index {
                if let Some(g) = grad_latent {
                    upstream = Some(match upstream {
                        Some(u) => u + &g,
                        None => g.to_owned(),
                    });
                }
            }
            let Some(mut delta) = upstream.take() else {
                continue;
            };
            let layer = self.layer(index);
            layer.activation.backprop(&pass.activations[index + 1], &mut delta);
            let input = &pass.activations[index];
            let slot = grads.layer_mut(index);
            // into the preallocated row-major buffer; `dot` may return a transposed layout
            general_mat_mul(1.0, &input.t(), &delta, 0.0, &mut slot.weight);
            slot.bias = delta.sum_axis(Axis(0));
            if index > 0 {
                upstream = Some(delta.dot(&layer.weight.t()));
            }
        }
        Ok(grads)
    }

    fn check_pass(&self, pass: &ForwardPass) -> Result<()> {
        if pass.activations.len() != self.layer_count() + 1 || pass.latent_index != self.encoder.len() {
            return Err(Error::State(format!(
                "forward cache has {} activations, network needs {}",
                pass.activations.len(),
                self.layer_count() + 1
            )));
        }
        let rows = pass.activations[0].nrows();
        for (i, layer) in self.layers().enumerate() {
            let (input, output) = (&pass.activations[i], &pass.activations[i + 1]);
            if input.ncols() != layer.input_dim()
                || output.ncols() != layer.output_dim()
                || output.nrows() != rows
            {
                return Err(Error::State(format!(
                    "forward cache does not match layer {i} of this network"
                )));
            }
        }
        Ok(())
    }

    /// Stable names for each parameter tensor, in optimizer order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (half, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for i in 0..layers.len() {
                names.push(format!("{half}.{i}.weight"));
                names.push(format!("{half}.{i}.bias"));
            }
        }
        names
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Array2<f64>>,
    latent_index: usize,
}

impl ForwardPass {
    pub fn input(&self) -> ArrayView2<'_, f64> {
        self.activations[0].view()
    }

    pub fn latent(&self) -> ArrayView2<'_, f64> {
        self.activations[self.latent_index].view()
    }

    pub fn reconstruction(&self) -> ArrayView2<'_, f64> {
        self.activations[self.activations.len() - 1].view()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter gradients, shape-congruent with an [`Autoencoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<DenseGrad>,
    pub decoder: Vec<DenseGrad>,
}

impl Gradients {
    pub fn zeros_like(ae: &Autoencoder) -> Self {
        let zero = |d: &Dense| DenseGrad {
            weight: Array2::zeros(d.weight.raw_dim()),
            bias: Array1::zeros(d.bias.len()),
        };
        Self {
            encoder: ae.encoder.iter().map(zero).collect(),
            decoder: ae.decoder.iter().map(zero).collect(),
        }
    }

    fn layer_mut(&mut self, index: usize) -> &mut DenseGrad {
        let n = self.encoder.len();
        if index < n {
            &mut self.encoder[index]
        } else {
            &mut self.decoder[index - n]
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|g| {
                [
                    g.weight.as_slice().expect("standard layout"),
                    g.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn check_cols(context: &'static str, m: ArrayView2<'_, f64>, cols: usize) -> Result<()> {
    if m.ncols() != cols {
        return Err(Error::shape(context, format!("{cols} columns"), format!("{} columns", m.ncols())));
    }
    Ok(())
}

fn check_shape(context: &'static str, m: ArrayView2<'_, f64>, rows: usize, cols: usize) -> Result<()> {
    if m.dim() != (rows, cols) {
        return Err(Error::shape(
            context,
            format!("{rows}×{cols}"),
            format!("{}×{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

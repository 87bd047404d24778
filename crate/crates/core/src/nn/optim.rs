use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Autoencoder, Gradients};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
        }
    }
}

impl OptimizerSettings {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
        }
    }
}

/// Plain SGD or bias-corrected Adam over a fixed list of parameter tensors.
///
/// Moment buffers are allocated on the first step and must stay congruent
/// with the tensors passed on every later step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    settings: OptimizerSettings,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(settings: OptimizerSettings) -> Result<Self> {
        if !(settings.learning_rate > 0.0 && settings.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                settings.learning_rate
            )));
        }
        Ok(Self {
            settings,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn settings(&self) -> OptimizerSettings {
        self.settings
    }

    /// Number of updates applied so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut Autoencoder, grads: &Gradients) -> Result<()> {
        let names = params.tensor_names();
        self.apply(params.tensors_mut(), grads.tensors(), |i| names[i].clone())
    }

    /// Updates a single matrix-valued parameter (e.g. centroids).
    pub fn step_matrix(&mut self, param: &mut Array2<f64>, grad: &Array2<f64>, name: &str) -> Result<()> {
        if param.dim() != grad.dim() {
            return Err(Error::shape("optimizer gradient", format!("{:?}", param.dim()), format!("{:?}", grad.dim())));
        }
        let grad = grad.as_standard_layout();
        let slice = param.as_slice_mut().expect("standard layout");
        self.apply(vec![slice], vec![grad.as_slice().expect("standard layout")], |_| name.to_string())
    }

    fn apply(
        &mut self,
        params: Vec<&mut [f64]>,
        grads: Vec<&[f64]>,
        name: impl Fn(usize) -> String,
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape("optimizer tensors", params.len(), grads.len()));
        }
        for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::shape("optimizer gradient", p.len(), format!("{} in {}", g.len(), name(i))));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { tensor: name(i) });
            }
        }

        match self.settings.kind {
            OptimizerKind::Sgd => {
                let lr = self.settings.learning_rate;
                for (p, g) in params.into_iter().zip(grads) {
                    p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                }
                let congruent = self.first_moment.len() == grads.len()
                    && self.first_moment.iter().zip(&grads).all(|(m, g)| m.len() == g.len());
                if !congruent {
                    return Err(Error::State("Adam moment buffers do not match the parameters".into()));
                }
                let t = (self.step + 1) as i32;
                let correction1 = 1.0 - ADAM_BETA1.powi(t);
                let correction2 = 1.0 - ADAM_BETA2.powi(t);
                let lr = self.settings.learning_rate;
                for ((p, g), (m, v)) in params
                    .into_iter()
                    .zip(grads)
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
                {
                    for i in 0..p.len() {
                        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                        let m_hat = m[i] / correction1;
                        let v_hat = v[i] / correction2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                    }
                }
            }
        }
        self.step += 1;
        Ok(())
    }
}

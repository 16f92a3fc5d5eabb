//! Fourier neural operator and DeepONet surrogates for `(u0, c) -> u(T)`.
//!
//! Both models multiply their raw output by `sin(pi x)`, so boundary values
//! are exactly zero regardless of parameters.

mod deeponet;
mod fno;

pub use deeponet::{deeponet_forward, init_deeponet, DeepOnetConfig, DeepOnetModel};
pub use fno::{fno_forward, fourier_layer, init_fno, FnoConfig, FnoLayerParams, FnoModel};

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{
    gradient_check, AutodiffError, Checkpoint, GradCheckReport, ModelKind, ParameterStore, Tape, Tensor, Var,
};
use crate::data::Sample;
use crate::solver::Grid;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("batch has {actual} points per field, model expects {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    KindMismatch { expected: ModelKind, found: ModelKind },
    #[error("checkpoint parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T> = std::result::Result<T, OperatorError>;

/// Input fields (and reference outputs) of a group of samples, flattened
/// row-major as `[batch, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    n_points: usize,
    size: usize,
    u0: Vec<f64>,
    c: Vec<f64>,
    target: Vec<f64>,
}

impl Batch {
    pub fn from_samples<'s>(samples: impl IntoIterator<Item = &'s Sample>, n_points: usize) -> Result<Self> {
        let mut b = Self {
            n_points,
            size: 0,
            u0: Vec::new(),
            c: Vec::new(),
            target: Vec::new(),
        };
        for s in samples {
            for len in [s.u0.len(), s.c.values().len(), s.ut.len()] {
                if len != n_points {
                    return Err(OperatorError::Dimension {
                        expected: n_points,
                        actual: len,
                    });
                }
            }
            b.u0.extend_from_slice(s.u0.values());
            b.c.extend_from_slice(s.c.values());
            b.target.extend_from_slice(s.ut.values());
            b.size += 1;
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn u0(&self) -> &[f64] {
        &self.u0
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Reference terminal states, `[batch, n]`.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_tensor(&self) -> Tensor {
        Tensor::new(vec![self.size, self.n_points], self.target.clone())
            .expect("batch buffers are sized on construction")
    }
}

/// Shared interface of the two surrogates.
pub trait OperatorModel {
    fn kind(&self) -> ModelKind;
    fn grid(&self) -> &Grid;
    fn params(&self) -> &ParameterStore;
    fn params_mut(&mut self) -> &mut ParameterStore;

    /// Records the forward pass on `tape`, which must borrow `self.params()`.
    /// Returns predictions of shape `[batch, n]`.
    fn forward(&self, tape: &mut Tape<'_>, batch: &Batch) -> Result<Var>;

    /// Gradient-free forward pass returning `[batch, n]` predictions.
    fn predict(&self, batch: &Batch) -> Result<Vec<f64>> {
        let mut tape = Tape::new(self.params());
        let out = self.forward(&mut tape, batch)?;
        Ok(tape.value(out).data().to_vec())
    }
}

/// Finite-difference check of the relative-L2 loss gradient of `model` on
/// `batch`; see [`gradient_check`].
pub fn check_model_gradients<M: OperatorModel + ?Sized>(
    model: &M,
    batch: &Batch,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    check_batch(batch, model.grid())?;
    let target = batch.target_tensor();
    let report = gradient_check(
        |tape| {
            let pred = model.forward(tape, batch).map_err(|e| match e {
                OperatorError::Autodiff(a) => a,
                other => AutodiffError::Shape(other.to_string()),
            })?;
            tape.relative_l2_loss(pred, &target)
        },
        model.params(),
        h,
        tol,
    )?;
    Ok(report)
}

/// `sin(pi x_i)` with exact zeros at the two end nodes.
pub fn dirichlet_envelope(grid: &Grid) -> Vec<f64> {
    let xs = grid.xs();
    let n = xs.len();
    let mut env: Vec<f64> = xs.iter().map(|&x| (PI * x).sin()).collect();
    env[0] = 0.0;
    env[n - 1] = 0.0;
    env
}

/// Fan-in uniform initialization `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub(crate) fn uniform_fan_in(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("length matches shape")
}

pub(crate) fn check_batch(batch: &Batch, grid: &Grid) -> Result<()> {
    if batch.n_points() != grid.n_points() {
        return Err(OperatorError::Dimension {
            expected: grid.n_points(),
            actual: batch.n_points(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Fno(FnoConfig),
    #[serde(rename = "deeponet")]
    DeepOnet(DeepOnetConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Fno(_) => ModelKind::Fno,
            ModelConfig::DeepOnet(_) => ModelKind::DeepOnet,
        }
    }
}

/// Either surrogate behind one type, for code that handles both.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Fno(FnoModel),
    DeepOnet(DeepOnetModel),
}

impl AnyModel {
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match cfg {
            ModelConfig::Fno(c) => AnyModel::Fno(init_fno(c, seed)?),
            ModelConfig::DeepOnet(c) => AnyModel::DeepOnet(init_deeponet(c, seed)?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            AnyModel::Fno(m) => ModelConfig::Fno(m.config().clone()),
            AnyModel::DeepOnet(m) => ModelConfig::DeepOnet(m.config().clone()),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: self.kind(),
            params: self.params().clone(),
        }
    }

    /// Rebuilds a model from its config and stored parameters. Every name,
    /// shape and layout must match a fresh model of that config.
    pub fn from_checkpoint(cfg: &ModelConfig, ckpt: Checkpoint) -> Result<Self> {
        if ckpt.kind != cfg.kind() {
            return Err(OperatorError::KindMismatch {
                expected: cfg.kind(),
                found: ckpt.kind,
            });
        }
        let mut model = Self::init(cfg, 0)?;
        let fresh = model.params();
        if fresh.len() != ckpt.params.len() {
            return Err(OperatorError::ParameterMismatch(format!(
                "{} parameters stored, {} expected",
                ckpt.params.len(),
                fresh.len()
            )));
        }
        for ((want_name, want), (name, got)) in fresh.iter().zip(ckpt.params.iter()) {
            if want_name != name || want.shape() != got.shape() || want.is_complex() != got.is_complex() {
                return Err(OperatorError::ParameterMismatch(format!(
                    "`{name}` {:?} does not match `{want_name}` {:?}",
                    got.shape(),
                    want.shape()
                )));
            }
        }
        *model.params_mut() = ckpt.params;
        Ok(model)
    }
}

impl OperatorModel for AnyModel {
    fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Fno(m) => m.kind(),
            AnyModel::DeepOnet(m) => m.kind(),
        }
    }

    fn grid(&self) -> &Grid {
        match self {
            AnyModel::Fno(m) => m.grid(),
            AnyModel::DeepOnet(m) => m.grid(),
        }
    }

    fn params(&self) -> &ParameterStore {
        match self {
            AnyModel::Fno(m) => m.params(),
            AnyModel::DeepOnet(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut ParameterStore {
        match self {
            AnyModel::Fno(m) => m.params_mut(),
            AnyModel::DeepOnet(m) => m.params_mut(),
        }
    }

    fn forward(&self, tape: &mut Tape<'_>, batch: &Batch) -> Result<Var> {
        match self {
            AnyModel::Fno(m) => m.forward(tape, batch),
            AnyModel::DeepOnet(m) => m.forward(tape, batch),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_examples() {
        let g = Grid::new(129).unwrap();
        let e = dirichlet_envelope(&g);
        assert_eq!(e[0], 0.0);
        assert_eq!(e[128], 0.0);
        assert_eq!(e[64], 1.0);
        for i in 0..129 {
            assert!((e[i] - e[128 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn checkpoint_rebuild_checks_layout() {
        let cfg = ModelConfig::DeepOnet(DeepOnetConfig::toy(16));
        let m = AnyModel::init(&cfg, 4).unwrap();
        let back = AnyModel::from_checkpoint(&cfg, m.to_checkpoint()).unwrap();
        assert_eq!(back, m);

        let other = ModelConfig::Fno(FnoConfig::toy(16));
        assert!(matches!(
            AnyModel::from_checkpoint(&other, m.to_checkpoint()),
            Err(OperatorError::KindMismatch { .. })
        ));
        let mut wider = DeepOnetConfig::toy(16);
        wider.latent = 9;
        assert!(matches!(
            AnyModel::from_checkpoint(&ModelConfig::DeepOnet(wider), m.to_checkpoint()),
            Err(OperatorError::ParameterMismatch(_))
        ));
    }
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_batch, dirichlet_envelope, uniform_fan_in, Batch, OperatorError, OperatorModel, Result};
use crate::autodiff::{ModelKind, ParameterStore, Tape, Tensor, Var};
use crate::solver::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeepOnetConfig {
    pub n_points: usize,
    pub branch_hidden: usize,
    pub trunk_hidden: usize,
    pub latent: usize,
    /// Affine layers per sub-network; ReLU sits between consecutive ones.
    pub depth: usize,
    pub output_bias: bool,
}

impl Default for DeepOnetConfig {
    fn default() -> Self {
        Self {
            n_points: 128,
            branch_hidden: 128,
            trunk_hidden: 128,
            latent: 128,
            depth: 3,
            output_bias: true,
        }
    }
}

impl DeepOnetConfig {
    pub fn toy(n_points: usize) -> Self {
        Self {
            n_points,
            branch_hidden: 8,
            trunk_hidden: 8,
            latent: 8,
            depth: 2,
            output_bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.branch_hidden == 0 || self.trunk_hidden == 0 || self.latent == 0 {
            return Err(OperatorError::Config(
                "depth, hidden sizes and latent size must be positive".into(),
            ));
        }
        Grid::new(self.n_points).map_err(|e| OperatorError::Config(e.to_string()))?;
        Ok(())
    }

    fn widths(&self, input: usize, hidden: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat_n(hidden, self.depth - 1));
        w.push(self.latent);
        w
    }

    fn branch_widths(&self) -> Vec<usize> {
        self.widths(2 * self.n_points, self.branch_hidden)
    }

    fn trunk_widths(&self) -> Vec<usize> {
        self.widths(1, self.trunk_hidden)
    }

    pub fn parameter_count(&self) -> usize {
        let mlp = |w: Vec<usize>| w.windows(2).map(|p| p[0] * p[1] + p[1]).sum::<usize>();
        mlp(self.branch_widths()) + mlp(self.trunk_widths()) + usize::from(self.output_bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepOnetModel {
    cfg: DeepOnetConfig,
    grid: Grid,
    envelope: Vec<f64>,
    params: ParameterStore,
}

impl DeepOnetModel {
    pub fn config(&self) -> &DeepOnetConfig {
        &self.cfg
    }
}

pub fn init_deeponet(cfg: &DeepOnetConfig, seed: u64) -> Result<DeepOnetModel> {
    cfg.validate()?;
    let grid = Grid::new(cfg.n_points).map_err(|e| OperatorError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParameterStore::new();
    for (net, widths) in [("branch", cfg.branch_widths()), ("trunk", cfg.trunk_widths())] {
        for (i, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            p.insert(
                format!("{net}.l{i}.w"),
                uniform_fan_in(&mut rng, vec![fan_in, fan_out], fan_in),
            )?;
            p.insert(format!("{net}.l{i}.b"), uniform_fan_in(&mut rng, vec![fan_out], fan_in))?;
        }
    }
    if cfg.output_bias {
        p.insert("b0", Tensor::new(vec![1], vec![0.0])?)?;
    }
    Ok(DeepOnetModel {
        cfg: cfg.clone(),
        envelope: dirichlet_envelope(&grid),
        grid,
        params: p,
    })
}

fn mlp(tape: &mut Tape<'_>, net: &str, depth: usize, mut h: Var) -> Result<Var> {
    for i in 0..depth {
        let w = tape.param(&format!("{net}.l{i}.w"))?;
        let b = tape.param(&format!("{net}.l{i}.b"))?;
        h = tape.affine(h, w, Some(b))?;
        if i + 1 < depth {
            h = tape.relu(h)?;
        }
    }
    Ok(h)
}

/// Branch features of the raw `[u0 | c]` samples.
pub(crate) fn branch_features(model: &DeepOnetModel, tape: &mut Tape<'_>, batch: &Batch) -> Result<Var> {
    let n = model.cfg.n_points;
    let mut input = Vec::with_capacity(batch.len() * 2 * n);
    for (u0, c) in batch.u0().chunks_exact(n).zip(batch.c().chunks_exact(n)) {
        input.extend_from_slice(u0);
        input.extend_from_slice(c);
    }
    let x = tape.constant(Tensor::new(vec![batch.len(), 2 * n], input)?);
    mlp(tape, "branch", model.cfg.depth, x)
}

/// Trunk features at every grid node, `[n, latent]`.
pub(crate) fn trunk_features(model: &DeepOnetModel, tape: &mut Tape<'_>) -> Result<Var> {
    let xs = model.grid.xs().to_vec();
    let x = tape.constant(Tensor::new(vec![xs.len(), 1], xs)?);
    mlp(tape, "trunk", model.cfg.depth, x)
}

/// `(branch . trunk^T + b0) * envelope`, shape `[batch, n]`.
pub fn deeponet_forward(model: &DeepOnetModel, tape: &mut Tape<'_>, batch: &Batch) -> Result<Var> {
    check_batch(batch, &model.grid)?;
    let branch = branch_features(model, tape, batch)?;
    let trunk = trunk_features(model, tape)?;
    let mut out = tape.matmul_nt(branch, trunk)?;
    if model.cfg.output_bias {
        let b0 = tape.param("b0")?;
        out = tape.add_scalar(out, b0)?;
    }
    Ok(tape.mask(out, &model.envelope)?)
}

impl OperatorModel for DeepOnetModel {
    fn kind(&self) -> ModelKind {
        ModelKind::DeepOnet
    }

    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn params(&self) -> &ParameterStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    fn forward(&self, tape: &mut Tape<'_>, batch: &Batch) -> Result<Var> {
        deeponet_forward(self, tape, batch)
    }
}

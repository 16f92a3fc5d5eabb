use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_batch, dirichlet_envelope, uniform_fan_in, Batch, OperatorError, OperatorModel, Result};
use crate::autodiff::{spectral, ModelKind, ParameterStore, Tape, Tensor, Var};
use crate::solver::Grid;

/// Per-point input channels: `u0`, `c`, and the coordinate `x`.
pub const FNO_IN_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FnoConfig {
    pub n_points: usize,
    pub modes: usize,
    pub width: usize,
    pub layers: usize,
    /// Zero cells appended to the grid before each transform.
    pub padding: usize,
    pub projection_hidden: usize,
}

impl Default for FnoConfig {
    fn default() -> Self {
        Self {
            n_points: 128,
            modes: 16,
            width: 64,
            layers: 4,
            padding: 0,
            projection_hidden: 128,
        }
    }
}

impl FnoConfig {
    /// A tiny network for gradient checks and quick tests.
    pub fn toy(n_points: usize) -> Self {
        Self {
            n_points,
            modes: 4,
            width: 4,
            layers: 2,
            padding: 0,
            projection_hidden: 8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(OperatorError::Config(m));
        if self.layers == 0 || self.width == 0 || self.projection_hidden == 0 {
            return fail("layers, width and projection_hidden must be positive".into());
        }
        let n = self.n_points + self.padding;
        let max = spectral::max_modes(n);
        if self.modes == 0 || self.modes > max {
            return fail(format!(
                "modes {} outside 1..={max} for transform length {n}",
                self.modes
            ));
        }
        Grid::new(self.n_points).map_err(|e| OperatorError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let (w, h) = (self.width, self.projection_hidden);
        let lift = FNO_IN_CHANNELS * w + w;
        let layer = self.modes * w * w * 2 + w * w + w;
        let proj = w * h + h + h + 1;
        lift + self.layers * layer + proj
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnoModel {
    cfg: FnoConfig,
    grid: Grid,
    envelope: Vec<f64>,
    params: ParameterStore,
}

impl FnoModel {
    pub fn config(&self) -> &FnoConfig {
        &self.cfg
    }
}

/// Fan-in uniform affine weights, spectral weights `N(0, 1) / width^2` for
/// both real and imaginary parts.
pub fn init_fno(cfg: &FnoConfig, seed: u64) -> Result<FnoModel> {
    cfg.validate()?;
    let grid = Grid::new(cfg.n_points).map_err(|e| OperatorError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h, m) = (cfg.width, cfg.projection_hidden, cfg.modes);
    let mut p = ParameterStore::new();
    let c = FNO_IN_CHANNELS;
    p.insert("lift.w", uniform_fan_in(&mut rng, vec![c, w], c))?;
    p.insert("lift.b", uniform_fan_in(&mut rng, vec![w], c))?;
    let scale = 1.0 / (w * w) as f64;
    for l in 0..cfg.layers {
        let data = (0..2 * m * w * w)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        p.insert(format!("layer{l}.spectral"), Tensor::complex(vec![m, w, w], data)?)?;
        p.insert(format!("layer{l}.w"), uniform_fan_in(&mut rng, vec![w, w], w))?;
        p.insert(format!("layer{l}.b"), uniform_fan_in(&mut rng, vec![w], w))?;
    }
    p.insert("proj.w1", uniform_fan_in(&mut rng, vec![w, h], w))?;
    p.insert("proj.b1", uniform_fan_in(&mut rng, vec![h], w))?;
    p.insert("proj.w2", uniform_fan_in(&mut rng, vec![h, 1], h))?;
    p.insert("proj.b2", uniform_fan_in(&mut rng, vec![1], h))?;
    Ok(FnoModel {
        cfg: cfg.clone(),
        envelope: dirichlet_envelope(&grid),
        grid,
        params: p,
    })
}

/// Tape handles of one Fourier layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct FnoLayerParams {
    pub spectral: Var,
    pub w: Var,
    pub b: Option<Var>,
}

/// `gelu(W v + b + irdft(mode_mix(rdft(v), R)))` for `v [batch, width, n]`.
pub fn fourier_layer(tape: &mut Tape<'_>, v: Var, layer: FnoLayerParams, modes: usize) -> Result<Var> {
    let n = *tape.shape(v).last().unwrap_or(&0);
    let spec = tape.rdft_truncated(v, modes)?;
    let mixed = tape.mode_mix(spec, layer.spectral)?;
    let back = tape.irdft(mixed, n)?;
    let local = tape.channel_affine(v, layer.w, layer.b)?;
    let sum = tape.add(local, back)?;
    Ok(tape.gelu(sum)?)
}

/// Full forward pass, `[batch, n]` predictions with the envelope applied.
pub fn fno_forward(model: &FnoModel, tape: &mut Tape<'_>, batch: &Batch) -> Result<Var> {
    check_batch(batch, &model.grid)?;
    let n = model.cfg.n_points;
    let b = batch.len();
    let xs = model.grid.xs();
    let mut input = Vec::with_capacity(b * FNO_IN_CHANNELS * n);
    for (u0, c) in batch.u0().chunks_exact(n).zip(batch.c().chunks_exact(n)) {
        input.extend_from_slice(u0);
        input.extend_from_slice(c);
        input.extend_from_slice(xs);
    }
    let x = tape.constant(Tensor::new(vec![b, FNO_IN_CHANNELS, n], input)?);

    let (lw, lb) = (tape.param("lift.w")?, tape.param("lift.b")?);
    let mut v = tape.channel_affine(x, lw, Some(lb))?;
    if model.cfg.padding > 0 {
        v = tape.pad_right(v, model.cfg.padding)?;
    }
    for l in 0..model.cfg.layers {
        let layer = FnoLayerParams {
            spectral: tape.param(&format!("layer{l}.spectral"))?,
            w: tape.param(&format!("layer{l}.w"))?,
            b: Some(tape.param(&format!("layer{l}.b"))?),
        };
        v = fourier_layer(tape, v, layer, model.cfg.modes)?;
    }
    if model.cfg.padding > 0 {
        v = tape.crop_right(v, n)?;
    }
    let (w1, b1) = (tape.param("proj.w1")?, tape.param("proj.b1")?);
    let (w2, b2) = (tape.param("proj.w2")?, tape.param("proj.b2")?);
    let hidden = tape.channel_affine(v, w1, Some(b1))?;
    let hidden = tape.gelu(hidden)?;
    let out = tape.channel_affine(hidden, w2, Some(b2))?;
    let out = tape.reshape(out, vec![b, n])?;
    Ok(tape.mask(out, &model.envelope)?)
}

impl OperatorModel for FnoModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Fno
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
        fno_forward(self, tape, batch)
    }
}

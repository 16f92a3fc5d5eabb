//! Seeded sampling of initial conditions and wave-speed fields, and
//! generation of the five dataset splits.
//!
//! Every sample is driven by a single integer seed. Independent ChaCha
//! streams of that seed feed the initial condition, the coefficient field,
//! and (for the frequency-shift split) the per-sample mode cutoff, so the
//! three draws never share random numbers.

mod format;

pub use format::{export_samples_csv, read_dataset, write_dataset, DATASET_MAGIC};

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binfmt::FormatError;
use crate::solver::{cfl_timestep, solve_terminal, CoefficientField, Grid, SolverError, WaveField, C_MIN};

const IC_STREAM: u64 = 0;
const COEFF_STREAM: u64 = 1;
const CUTOFF_STREAM: u64 = 2;

/// Spacing between the base seeds of consecutive splits.
pub const SPLIT_SEED_STRIDE: i64 = 1_000_000;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("mode {k_max} is not resolvable on a {n_points}-point grid (limit {limit})")]
    Resolvability { k_max: u32, n_points: usize, limit: u32 },
    #[error("invalid sampling config: {0}")]
    InvalidSpec(String),
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("dataset {0}")]
    Format(#[from] FormatError),
    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    IdTest,
    OodFreq,
    OodSmooth,
}

impl Split {
    pub const ALL: [Split; 5] = [
        Split::Train,
        Split::Val,
        Split::IdTest,
        Split::OodFreq,
        Split::OodSmooth,
    ];

    /// The four splits every report covers.
    pub const EVALUATED: [Split; 4] = [Split::Val, Split::IdTest, Split::OodFreq, Split::OodSmooth];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::IdTest => "id_test",
            Split::OodFreq => "ood_freq",
            Split::OodSmooth => "ood_smooth",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.wvop", self.name())
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Smooth,
    Medium,
    Rough,
}

impl Regime {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [Regime::Smooth, Regime::Medium, Regime::Rough]
            .get(code as usize)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditionSpec {
    pub k_min: u32,
    pub k_max: u32,
    pub amplitude_bound: f64,
    pub normalize: bool,
}

impl InitialConditionSpec {
    /// Highest sine mode kept meaningful on `grid`.
    pub fn resolvable_limit(grid: &Grid) -> u32 {
        ((grid.n_points() - 1) / 2) as u32
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.k_min < 1 || self.k_max < self.k_min {
            return Err(DataError::InvalidSpec(format!(
                "mode range {}..={} is empty or starts below 1",
                self.k_min, self.k_max
            )));
        }
        if !(self.amplitude_bound > 0.0 && self.amplitude_bound.is_finite()) {
            return Err(DataError::InvalidSpec(format!(
                "amplitude bound must be positive, got {}",
                self.amplitude_bound
            )));
        }
        let limit = Self::resolvable_limit(grid);
        if self.k_max > limit {
            return Err(DataError::Resolvability {
                k_max: self.k_max,
                n_points: grid.n_points(),
                limit,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub regime: Regime,
    /// Number of sinusoidal components.
    pub k_max: u32,
    pub amplitude_scale: f64,
    pub c_min: f64,
}

impl CoefficientSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(DataError::InvalidSpec(
                "coefficient needs at least one component".into(),
            ));
        }
        if !(self.amplitude_scale >= 0.0 && self.amplitude_scale.is_finite()) {
            return Err(DataError::InvalidSpec(format!(
                "amplitude scale must be non-negative, got {}",
                self.amplitude_scale
            )));
        }
        if !(self.c_min >= C_MIN && self.c_min + 0.05 < 1.0) {
            return Err(DataError::InvalidSpec(format!(
                "c_min must lie in [{C_MIN}, 0.95), got {}",
                self.c_min
            )));
        }
        Ok(())
    }
}

/// Everything needed to regenerate one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub split: Split,
    pub count: usize,
    pub base_seed: i64,
    pub ic_spec: InitialConditionSpec,
    /// When set, each sample draws its own cutoff uniformly from
    /// `cutoff_min..=ic_spec.k_max` and activates every mode up to it.
    #[serde(default)]
    pub cutoff_min: Option<u32>,
    pub coeff_spec: CoefficientSpec,
}

impl SplitManifest {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.ic_spec.validate(grid)?;
        self.coeff_spec.validate()?;
        if let Some(lo) = self.cutoff_min {
            if lo < self.ic_spec.k_min || lo > self.ic_spec.k_max {
                return Err(DataError::InvalidSpec(format!(
                    "cutoff_min {lo} outside {}..={}",
                    self.ic_spec.k_min, self.ic_spec.k_max
                )));
            }
        }
        Ok(())
    }
}

/// Courant number and horizon used for every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverPolicy {
    pub cfl_number: f64,
    pub terminal_time: f64,
}

impl Default for SolverPolicy {
    fn default() -> Self {
        Self {
            cfl_number: crate::solver::DEFAULT_CFL,
            terminal_time: crate::solver::DEFAULT_TERMINAL_TIME,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleMeta {
    pub seed: i64,
    pub split: Split,
    /// Highest active initial-condition mode.
    pub k_max: u16,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub u0: WaveField,
    pub c: CoefficientField,
    pub ut: WaveField,
    pub meta: SampleMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_points: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid(&self) -> std::result::Result<Grid, SolverError> {
        Grid::new(self.n_points)
    }
}

fn rng_for(seed: i64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    rng.set_stream(stream);
    rng
}

/// `sum_k a_k sin(k pi x)` with `amplitudes[k - 1] = a_k`, endpoints pinned.
pub fn sine_series(amplitudes: &[f64], grid: &Grid) -> WaveField {
    let mut u = WaveField::from_fn(grid, |x| {
        amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| a * ((i + 1) as f64 * PI * x).sin())
            .sum()
    });
    let n = u.len();
    u.values_mut()[0] = 0.0;
    u.values_mut()[n - 1] = 0.0;
    u
}

/// `1 + sum_k b_k sin(2 pi k x + phi_k)`, unvalidated.
pub fn coefficient_series(amplitudes: &[f64], phases: &[f64], grid: &Grid) -> Vec<f64> {
    grid.xs()
        .iter()
        .map(|&x| {
            1.0 + amplitudes
                .iter()
                .zip(phases)
                .enumerate()
                .map(|(i, (b, phi))| b * (2.0 * PI * (i + 1) as f64 * x + phi).sin())
                .sum::<f64>()
        })
        .collect()
}

/// Draws a random sine series. The returned amplitudes are indexed by
/// `k - 1` (zeros below `k_min`) and already include any normalization.
pub fn sample_initial_condition(seed: i64, spec: &InitialConditionSpec, grid: &Grid) -> Result<(WaveField, Vec<f64>)> {
    spec.validate(grid)?;
    let mut rng = rng_for(seed, IC_STREAM);
    let bound = spec.amplitude_bound;
    let mut amps = vec![0.0; spec.k_max as usize];
    for a in amps.iter_mut().skip(spec.k_min as usize - 1) {
        *a = rng.random_range(-bound..bound);
    }
    let mut u = sine_series(&amps, grid);
    if spec.normalize {
        let peak = u.max_abs();
        if peak > 0.0 {
            let s = 1.0 / peak;
            u.values_mut().iter_mut().for_each(|v| *v *= s);
            amps.iter_mut().for_each(|a| *a *= s);
        }
    }
    Ok((u, amps))
}

/// Draws a random wave-speed field. If the draw dips below `c_min`, all
/// amplitudes are scaled by one common factor so the minimum becomes
/// `c_min + 0.05`.
pub fn sample_coefficient_field(seed: i64, spec: &CoefficientSpec, grid: &Grid) -> Result<CoefficientField> {
    spec.validate()?;
    let mut rng = rng_for(seed, COEFF_STREAM);
    let s = spec.amplitude_scale;
    let mut amps = Vec::with_capacity(spec.k_max as usize);
    let mut phases = Vec::with_capacity(spec.k_max as usize);
    for _ in 0..spec.k_max {
        amps.push(if s > 0.0 { rng.random_range(-s..s) } else { 0.0 });
        phases.push(rng.random_range(0.0..2.0 * PI));
    }
    let mut c = coefficient_series(&amps, &phases, grid);
    let lowest = c.iter().copied().fold(f64::INFINITY, f64::min);
    if lowest < spec.c_min {
        let factor = (1.0 - (spec.c_min + 0.05)) / (1.0 - lowest);
        c.iter_mut().for_each(|v| *v = 1.0 + factor * (*v - 1.0));
    }
    Ok(CoefficientField::new(c)?)
}

/// Solves one sample of `manifest` with per-sample seed `base_seed + index`.
pub fn generate_sample(manifest: &SplitManifest, index: usize, grid: &Grid, policy: &SolverPolicy) -> Result<Sample> {
    let seed = manifest.base_seed + index as i64;
    let mut ic = manifest.ic_spec;
    if let Some(lo) = manifest.cutoff_min {
        ic.k_min = 1;
        ic.k_max = rng_for(seed, CUTOFF_STREAM).random_range(lo..=manifest.ic_spec.k_max);
    }
    let (u0, _) = sample_initial_condition(seed, &ic, grid)?;
    let c = sample_coefficient_field(seed, &manifest.coeff_spec, grid)?;
    let wrap = |source| DataError::Sample { index, source };
    let cfg = cfl_timestep(&c, grid, policy.cfl_number, policy.terminal_time).map_err(wrap)?;
    let ut = solve_terminal(&u0, &c, grid, &cfg).map_err(wrap)?;
    Ok(Sample {
        u0,
        c,
        ut,
        meta: SampleMeta {
            seed,
            split: manifest.split,
            k_max: ic.k_max as u16,
            regime: manifest.coeff_spec.regime,
        },
    })
}

/// Generates `manifest.count` samples in index order. With `threads > 1`
/// samples are solved on a dedicated pool; the output does not depend on
/// the thread count.
pub fn generate_split(manifest: &SplitManifest, grid: &Grid, policy: &SolverPolicy, threads: usize) -> Result<Dataset> {
    manifest.validate(grid)?;
    let gen = |j| generate_sample(manifest, j, grid, policy);
    let samples = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| DataError::InvalidSpec(format!("thread pool: {e}")))?;
        pool.install(|| (0..manifest.count).into_par_iter().map(gen).collect())
    } else {
        (0..manifest.count).map(gen).collect::<Result<Vec<_>>>()
    }?;
    Ok(Dataset {
        n_points: grid.n_points(),
        samples,
    })
}

/// Sampling knobs shared by all five splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub master_seed: i64,
    pub train_k_max: u32,
    pub ood_k_min: u32,
    pub ood_k_max: u32,
    pub amplitude_bound: f64,
    pub normalize: bool,
    pub coefficient_amplitude: f64,
    pub c_min: f64,
    pub smooth_components: u32,
    pub medium_components: u32,
    pub rough_components: u32,
    pub train_regime: Regime,
    pub ood_regime: Regime,
    pub counts: SplitCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub id_test: usize,
    pub ood_freq: usize,
    pub ood_smooth: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::IdTest => self.id_test,
            Split::OodFreq => self.ood_freq,
            Split::OodSmooth => self.ood_smooth,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            master_seed: 2026,
            train_k_max: 6,
            ood_k_min: 8,
            ood_k_max: 14,
            amplitude_bound: 1.0,
            normalize: true,
            coefficient_amplitude: 0.1,
            c_min: C_MIN,
            smooth_components: 2,
            medium_components: 5,
            rough_components: 10,
            train_regime: Regime::Medium,
            ood_regime: Regime::Smooth,
            counts: SplitCounts::default(),
        }
    }
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self {
            train: 2000,
            val: 200,
            id_test: 200,
            ood_freq: 200,
            ood_smooth: 200,
        }
    }
}

impl DataConfig {
    pub fn components(&self, regime: Regime) -> u32 {
        match regime {
            Regime::Smooth => self.smooth_components,
            Regime::Medium => self.medium_components,
            Regime::Rough => self.rough_components,
        }
    }

    fn coeff_spec(&self, regime: Regime) -> CoefficientSpec {
        CoefficientSpec {
            regime,
            k_max: self.components(regime),
            amplitude_scale: self.coefficient_amplitude,
            c_min: self.c_min,
        }
    }

    pub fn manifest(&self, split: Split) -> SplitManifest {
        let train_ic = InitialConditionSpec {
            k_min: 1,
            k_max: self.train_k_max,
            amplitude_bound: self.amplitude_bound,
            normalize: self.normalize,
        };
        let (ic_spec, cutoff_min) = match split {
            Split::OodFreq => (
                InitialConditionSpec {
                    k_max: self.ood_k_max,
                    ..train_ic
                },
                Some(self.ood_k_min),
            ),
            _ => (train_ic, None),
        };
        let regime = match split {
            Split::OodSmooth => self.ood_regime,
            _ => self.train_regime,
        };
        SplitManifest {
            split,
            count: self.counts.get(split),
            base_seed: self.master_seed + split.code() as i64 * SPLIT_SEED_STRIDE,
            ic_spec,
            cutoff_min,
            coeff_spec: self.coeff_spec(regime),
        }
    }

    pub fn manifests(&self) -> Vec<SplitManifest> {
        Split::ALL.iter().map(|&s| self.manifest(s)).collect()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.smooth_components < self.medium_components && self.medium_components < self.rough_components) {
            return Err(DataError::InvalidSpec(
                "regime component counts must increase smooth < medium < rough".into(),
            ));
        }
        if self.ood_k_min <= self.train_k_max {
            return Err(DataError::InvalidSpec(format!(
                "ood_k_min {} must exceed train_k_max {}",
                self.ood_k_min, self.train_k_max
            )));
        }
        for m in self.manifests() {
            m.validate(grid)?;
            if m.count > 0 && (m.count as i64) > SPLIT_SEED_STRIDE {
                return Err(DataError::InvalidSpec(format!(
                    "split {} has more samples than the seed stride",
                    m.split
                )));
            }
        }
        Ok(())
    }
}

/// All five splits, as produced by [`generate_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: Dataset,
    pub val: Dataset,
    pub id_test: Dataset,
    pub ood_freq: Dataset,
    pub ood_smooth: Dataset,
}

impl SplitSet {
    /// The four splits that models are scored on, in reporting order.
    pub fn evaluated(&self) -> Vec<(Split, &Dataset)> {
        Split::EVALUATED.iter().map(|&s| (s, self.get(s))).collect()
    }

    pub fn get(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::IdTest => &self.id_test,
            Split::OodFreq => &self.ood_freq,
            Split::OodSmooth => &self.ood_smooth,
        }
    }
}

pub fn generate_all(cfg: &DataConfig, grid: &Grid, policy: &SolverPolicy, threads: usize) -> Result<SplitSet> {
    cfg.validate(grid)?;
    let gen = |s| generate_split(&cfg.manifest(s), grid, policy, threads);
    Ok(SplitSet {
        train: gen(Split::Train)?,
        val: gen(Split::Val)?,
        id_test: gen(Split::IdTest)?,
        ood_freq: gen(Split::OodFreq)?,
        ood_smooth: gen(Split::OodSmooth)?,
    })
}

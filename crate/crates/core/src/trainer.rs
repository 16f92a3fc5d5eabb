//! Adam training under the batch-mean relative L2 loss, with validation
//! early stopping and best-snapshot restoration.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Gradients, ParameterStore, Tape};
use crate::data::Dataset;
use crate::evaluation::{relative_l2_slices, EvalError};
use crate::io::{fmt_f64, Csv};
use crate::operators::{Batch, OperatorError, OperatorModel};

/// Samples per forward pass when only predictions are needed.
pub const EVAL_BATCH: usize = 50;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite gradient in parameter `{param}`")]
    Poisoned { param: String },
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Batch {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<TrainError>,
    },
    #[error("reference output of sample {sample} has zero norm")]
    DegenerateTarget { sample: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 2026,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return fail("batch_size, max_epochs and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return fail("patience must not exceed max_epochs");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        Ok(())
    }
}

/// First and second moment accumulators mirroring the parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, p)| vec![0.0; p.data().len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Bias-corrected Adam update without weight decay. Complex parameters are
/// updated component-wise on their real and imaginary parts. Nothing is
/// modified if any gradient entry is non-finite.
pub fn adam_step(
    params: &mut ParameterStore,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(TrainError::Config(format!(
            "{} gradients and {} moment buffers for {} parameters",
            grads.len(),
            state.m.len(),
            params.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::Poisoned {
            param: params.name(i).to_string(),
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, ((m, v), p)) in state
        .m
        .iter_mut()
        .zip(state.v.iter_mut())
        .zip(params.tensors_mut())
        .enumerate()
    {
        let g = grads.get(i).data();
        for (((mi, vi), pi), &gi) in m.iter_mut().zip(v.iter_mut()).zip(p.data_mut()).zip(g) {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *pi -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Sample order for `epoch`, shuffled with seed `seed + epoch`.
pub fn epoch_order(len: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(epoch as u64));
    order.shuffle(&mut rng);
    order
}

/// One pass over `train` in shuffled mini-batches. Returns the mean loss,
/// weighted by batch size.
pub fn train_epoch<M: OperatorModel>(
    model: &mut M,
    train: &Dataset,
    cfg: &TrainConfig,
    epoch: usize,
    state: &mut AdamState,
) -> Result<f64> {
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let order = epoch_order(train.len(), cfg.seed, epoch);
    let mut total = 0.0;
    for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
        let wrap = |e: TrainError| TrainError::Batch {
            epoch,
            batch: bi,
            source: Box::new(e),
        };
        let batch =
            Batch::from_samples(idx.iter().map(|&i| &train.samples[i]), train.n_points).map_err(|e| wrap(e.into()))?;
        let (loss, grads) = {
            let mut tape = Tape::new(model.params());
            let pred = model.forward(&mut tape, &batch).map_err(|e| wrap(e.into()))?;
            let loss = tape
                .relative_l2_loss(pred, &batch.target_tensor())
                .map_err(|e| match e {
                    AutodiffError::DegenerateTarget { sample } => {
                        wrap(TrainError::DegenerateTarget { sample: idx[sample] })
                    }
                    other => wrap(other.into()),
                })?;
            let value = tape.value(loss).data()[0];
            (value, tape.backward(loss).map_err(|e| wrap(e.into()))?)
        };
        adam_step(model.params_mut(), &grads, state, cfg).map_err(wrap)?;
        total += loss * idx.len() as f64;
    }
    Ok(total / train.len() as f64)
}

/// Predictions for every sample of `ds`, `[len, n]` row-major, computed in
/// fixed chunks of [`EVAL_BATCH`].
pub fn predict_dataset<M: OperatorModel + ?Sized>(model: &M, ds: &Dataset) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ds.len() * ds.n_points);
    for chunk in ds.samples.chunks(EVAL_BATCH) {
        let batch = Batch::from_samples(chunk, ds.n_points)?;
        out.extend(model.predict(&batch)?);
    }
    Ok(out)
}

/// Per-sample relative L2 errors of `model` on `ds`.
pub fn per_sample_errors<M: OperatorModel + ?Sized>(model: &M, ds: &Dataset) -> Result<Vec<f64>> {
    let n = ds.n_points;
    let pred = predict_dataset(model, ds)?;
    ds.samples
        .iter()
        .zip(pred.chunks_exact(n))
        .enumerate()
        .map(|(i, (s, p))| {
            relative_l2_slices(p, s.ut.values()).map_err(|e| match e {
                EvalError::ZeroNormTruth => TrainError::DegenerateTarget { sample: i },
                other => TrainError::Config(other.to_string()),
            })
        })
        .collect()
}

/// Mean relative L2 error over `ds`, accumulated in sample order.
pub fn evaluate_split<M: OperatorModel + ?Sized>(model: &M, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let errs = per_sample_errors(model, ds)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the restored snapshot.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop_reason: StopReason,
}

impl TrainingLog {
    /// Loss trajectory only, so reruns produce identical bytes.
    pub fn losses_csv(&self) -> Csv {
        let mut csv = Csv::new(&["epoch", "train_loss", "val_loss"]);
        for r in &self.epochs {
            csv.row(&[r.epoch.to_string(), fmt_f64(r.train_loss), fmt_f64(r.val_loss)]);
        }
        csv
    }

    pub fn timings_csv(&self) -> Csv {
        let mut csv = Csv::new(&["epoch", "seconds"]);
        for r in &self.epochs {
            csv.row(&[r.epoch.to_string(), fmt_f64(r.seconds)]);
        }
        csv
    }

    pub fn total_seconds(&self) -> f64 {
        self.epochs.iter().map(|r| r.seconds).sum()
    }
}

pub fn fit<M: OperatorModel + Clone>(
    model: M,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(M, TrainingLog)> {
    fit_with(model, train, val, cfg, |_| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with<M: OperatorModel + Clone>(
    mut model: M,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(M, TrainingLog)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut state = AdamState::new(model.params());
    let mut best = model.params().clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 0..cfg.max_epochs {
        let start = Instant::now();
        let train_loss = train_epoch(&mut model, train, cfg, epoch, &mut state)?;
        let val_loss = evaluate_split(&model, val)?;
        let rec = EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&rec);
        epochs.push(rec);
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch + 1;
            best.clone_from(model.params());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }
    *model.params_mut() = best;
    Ok((
        model,
        TrainingLog {
            epochs,
            best_epoch,
            best_val_loss: best_val,
            stop_reason,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{ModelKind, Tensor, Var};
    use crate::data::{generate_split, DataConfig, SolverPolicy, Split};
    use crate::operators::{init_deeponet, init_fno, DeepOnetConfig, FnoConfig};
    use crate::solver::Grid;

    fn data(split: Split, count: usize, n: usize) -> Dataset {
        let grid = Grid::new(n).unwrap();
        let mut m = DataConfig::default().manifest(split);
        m.count = count;
        generate_split(&m, &grid, &SolverPolicy::default(), 1).unwrap()
    }

    fn scalar_store(v: f64) -> ParameterStore {
        let mut p = ParameterStore::new();
        p.insert("theta", Tensor::new(vec![1], vec![v]).unwrap()).unwrap();
        p
    }

    fn grads(v: f64) -> Gradients {
        Gradients::new(vec![Tensor::new(vec![1], vec![v]).unwrap()])
    }

    #[test]
    fn adam_single_step_oracle() {
        let cfg = TrainConfig::default();
        let mut p = scalar_store(1.0);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &grads(1.0), &mut st, &cfg).unwrap();
        let want = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((p.by_index(0).data()[0] - want).abs() < 1e-15);
        assert_eq!(st.step_count(), 1);

        let mut p = scalar_store(0.5);
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &grads(0.0), &mut st, &cfg).unwrap();
        assert_eq!(p.by_index(0).data()[0], 0.5);
    }

    #[test]
    fn adam_rejects_nan_without_mutation() {
        let cfg = TrainConfig::default();
        let mut p = scalar_store(2.0);
        let mut st = AdamState::new(&p);
        assert!(matches!(
            adam_step(&mut p, &grads(f64::NAN), &mut st, &cfg),
            Err(TrainError::Poisoned { .. })
        ));
        assert_eq!(p.by_index(0).data()[0], 2.0);
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn frozen_optimizer_and_partial_batch() {
        let train = data(Split::Train, 33, 32);
        let mut model = init_deeponet(&DeepOnetConfig::toy(32), 1).unwrap();
        let before = model.params().clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let mut st = AdamState::new(model.params());
        train_epoch(&mut model, &train, &cfg, 0, &mut st).unwrap();
        assert_eq!(model.params(), &before);
        assert_eq!(st.step_count(), 2);
    }

    #[test]
    fn single_epoch_fit_and_determinism() {
        let train = data(Split::Train, 20, 32);
        let val = data(Split::Val, 5, 32);
        let cfg = TrainConfig {
            max_epochs: 3,
            patience: 2,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let model = init_fno(&FnoConfig::toy(32), 3).unwrap();
        let (a, la) = fit(model.clone(), &train, &val, &cfg).unwrap();
        let (b, lb) = fit(model, &train, &val, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la.losses_csv().as_str(), lb.losses_csv().as_str());
        assert!(la.epochs.len() <= 3);
        let best = la.epochs.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(la.best_val_loss, best);
        assert_eq!(evaluate_split(&a, &val).unwrap(), best);

        let one = TrainConfig {
            max_epochs: 1,
            patience: 1,
            ..cfg
        };
        let (_, l1) = fit(init_fno(&FnoConfig::toy(32), 3).unwrap(), &train, &val, &one).unwrap();
        assert_eq!(l1.epochs.len(), 1);
        assert_eq!(l1.losses_csv().as_str().lines().count(), 2);
    }

    /// Returns the reference output regardless of parameters.
    #[derive(Clone)]
    struct Oracle {
        grid: Grid,
        params: ParameterStore,
        zero: bool,
    }

    impl Oracle {
        fn new(n: usize, zero: bool) -> Self {
            Self {
                grid: Grid::new(n).unwrap(),
                params: scalar_store(0.0),
                zero,
            }
        }
    }

    impl OperatorModel for Oracle {
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
        fn forward(&self, tape: &mut Tape<'_>, batch: &Batch) -> crate::operators::Result<Var> {
            let mut t = batch.target_tensor();
            if self.zero {
                t.data_mut().fill(0.0);
            }
            let theta = tape.param("theta")?;
            let c = tape.constant(t);
            Ok(tape.add_scalar(c, theta)?)
        }
    }

    #[test]
    fn evaluate_split_examples() {
        let val = data(Split::Val, 4, 32);
        assert_eq!(evaluate_split(&Oracle::new(32, false), &val).unwrap(), 0.0);
        let zero = evaluate_split(&Oracle::new(32, true), &val).unwrap();
        assert!((zero - 1.0).abs() < 1e-15);
        assert_eq!(zero, evaluate_split(&Oracle::new(32, true), &val).unwrap());
        let empty = Dataset {
            n_points: 32,
            samples: vec![],
        };
        assert!(matches!(
            evaluate_split(&Oracle::new(32, false), &empty),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn zero_loss_model_stops_after_patience() {
        let train = data(Split::Train, 4, 32);
        let val = data(Split::Val, 2, 32);
        let cfg = TrainConfig {
            max_epochs: 30,
            patience: 4,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let (_, log) = fit(Oracle::new(32, false), &train, &val, &cfg).unwrap();
        assert_eq!(log.epochs.len(), 5);
        assert_eq!(log.best_epoch, 1);
        assert_eq!(log.stop_reason, StopReason::EarlyStopped);
    }

    #[test]
    fn shuffle_depends_on_epoch() {
        let a = epoch_order(50, 2026, 0);
        assert_eq!(a, epoch_order(50, 2026, 0));
        assert_ne!(a, epoch_order(50, 2026, 1));
        let mut s = a.clone();
        s.sort_unstable();
        assert_eq!(s, (0..50).collect::<Vec<_>>());
    }
}

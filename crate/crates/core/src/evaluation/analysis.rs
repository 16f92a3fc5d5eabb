use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{energy_diagnostic, relative_l2_slices, sine_coefficients_slice, EvalError, Result};
use crate::autodiff::ModelKind;
use crate::data::{Dataset, Split, SplitSet};
use crate::io::{fmt_f64, Csv};
use crate::operators::{init_fno, Batch, FnoConfig, FnoModel, OperatorError, OperatorModel};
use crate::solver::{Grid, WaveField};
use crate::trainer::{fit_with, EpochRecord, TrainConfig, TrainingLog, EVAL_BATCH};

/// Anything that maps a batch of inputs to `[batch, n]` predictions.
pub trait Predictor {
    fn predict_batch(&self, batch: &Batch) -> std::result::Result<Vec<f64>, OperatorError>;
}

impl<M: OperatorModel> Predictor for M {
    fn predict_batch(&self, batch: &Batch) -> std::result::Result<Vec<f64>, OperatorError> {
        self.predict(batch)
    }
}

fn predictions<P: Predictor + ?Sized>(p: &P, ds: &Dataset) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ds.len() * ds.n_points);
    for chunk in ds.samples.chunks(EVAL_BATCH) {
        let batch = Batch::from_samples(chunk, ds.n_points).map_err(model_err)?;
        let pred = p.predict_batch(&batch).map_err(model_err)?;
        if pred.len() != batch.len() * ds.n_points {
            return Err(EvalError::Dimension {
                expected: batch.len() * ds.n_points,
                actual: pred.len(),
            });
        }
        out.extend(pred);
    }
    Ok(out)
}

fn model_err(e: OperatorError) -> EvalError {
    EvalError::Model(e.to_string())
}

fn non_empty(ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    Ok(())
}

/// Mean squared sine coefficient of the prediction error, per mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalErrorCurve {
    /// `mse[k - 1]` belongs to mode `k`.
    pub mse: Vec<f64>,
}

impl ModalErrorCurve {
    pub fn modes(&self) -> impl Iterator<Item = usize> + '_ {
        1..=self.mse.len()
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(&["mode", "mse"]);
        for (k, v) in self.modes().zip(&self.mse) {
            csv.row(&[k.to_string(), fmt_f64(*v)]);
        }
        csv
    }
}

pub fn modal_error_curve<P: Predictor + ?Sized>(
    model: &P,
    ds: &Dataset,
    grid: &Grid,
    modes: usize,
) -> Result<ModalErrorCurve> {
    non_empty(ds)?;
    let n = ds.n_points;
    let pred = predictions(model, ds)?;
    let mut acc = vec![0.0; modes];
    let mut err = vec![0.0; n];
    for (s, p) in ds.samples.iter().zip(pred.chunks_exact(n)) {
        for ((e, a), b) in err.iter_mut().zip(p).zip(s.ut.values()) {
            *e = a - b;
        }
        let coeffs = sine_coefficients_slice(&err, grid, modes)?;
        for (a, c) in acc.iter_mut().zip(&coeffs) {
            *a += c * c;
        }
    }
    let count = ds.len() as f64;
    Ok(ModalErrorCurve {
        mse: acc.into_iter().map(|a| a / count).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitMetrics {
    pub split: Split,
    pub mean: f64,
    /// Population standard deviation of the per-sample errors.
    pub std: f64,
    /// Mean of `|E(pred) - E(truth)| / E(truth)` for the energy diagnostic.
    pub energy_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub model: ModelKind,
    pub seed: u64,
    pub config: serde_json::Value,
    pub splits: Vec<SplitMetrics>,
}

impl MetricsReport {
    pub fn get(&self, split: Split) -> Option<&SplitMetrics> {
        self.splits.iter().find(|m| m.split == split)
    }
}

pub fn split_metrics<P: Predictor + ?Sized>(model: &P, split: Split, ds: &Dataset) -> Result<SplitMetrics> {
    non_empty(ds)?;
    let grid = ds.grid().map_err(|e| EvalError::Model(e.to_string()))?;
    let n = ds.n_points;
    let pred = predictions(model, ds)?;
    let mut errs = Vec::with_capacity(ds.len());
    let mut energy = 0.0;
    for (s, p) in ds.samples.iter().zip(pred.chunks_exact(n)) {
        errs.push(relative_l2_slices(p, s.ut.values())?);
        let e_true = energy_diagnostic(&s.ut, &s.c, &grid)?;
        let e_pred = energy_diagnostic(&WaveField::new(p.to_vec()), &s.c, &grid)?;
        if e_true == 0.0 {
            return Err(EvalError::ZeroNormTruth);
        }
        energy += (e_pred - e_true).abs() / e_true;
    }
    let count = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / count;
    let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / count;
    Ok(SplitMetrics {
        split,
        mean,
        std: var.sqrt(),
        energy_discrepancy: energy / count,
    })
}

/// Metrics for each `(split, dataset)` pair, typically
/// [`SplitSet::evaluated`].
pub fn evaluate_report<M: OperatorModel>(
    model: &M,
    seed: u64,
    config: serde_json::Value,
    splits: &[(Split, &Dataset)],
) -> Result<MetricsReport> {
    let splits = splits
        .iter()
        .map(|&(s, ds)| split_metrics(model, s, ds))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        model: model.kind(),
        seed,
        config,
        splits,
    })
}

pub fn write_metrics_csv(reports: &[MetricsReport], path: &Path) -> Result<()> {
    let mut csv = Csv::new(&["model", "split", "mean", "std", "energy_discrepancy"]);
    for r in reports {
        for m in &r.splits {
            csv.row(&[
                r.model.to_string(),
                m.split.to_string(),
                fmt_f64(m.mean),
                fmt_f64(m.std),
                fmt_f64(m.energy_discrepancy),
            ]);
        }
    }
    csv.write(path)?;
    Ok(())
}

/// Writes `modal_error_{split}_{model}.csv` into `dir` and returns its path.
pub fn write_modal_csv(curve: &ModalErrorCurve, split: Split, model: ModelKind, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("modal_error_{split}_{model}.csv"));
    curve.to_csv().write(&path)?;
    Ok(path)
}

/// Writes one CSV per index, `{stem}_{index}.csv`, with both models'
/// predictions and pointwise errors.
pub fn representative_case_export<A, B>(
    fno: &A,
    deeponet: &B,
    ds: &Dataset,
    indices: &[usize],
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>>
where
    A: Predictor + ?Sized,
    B: Predictor + ?Sized,
{
    if let Some(&index) = indices.iter().find(|&&i| i >= ds.len()) {
        return Err(EvalError::IndexOutOfRange { index, len: ds.len() });
    }
    let grid = ds.grid().map_err(|e| EvalError::Model(e.to_string()))?;
    let n = ds.n_points;
    let mut paths = Vec::with_capacity(indices.len());
    for &i in indices {
        let batch = Batch::from_samples([&ds.samples[i]], n).map_err(model_err)?;
        let pf = fno.predict_batch(&batch).map_err(model_err)?;
        let pd = deeponet.predict_batch(&batch).map_err(model_err)?;
        let truth = ds.samples[i].ut.values();
        let mut csv = Csv::new(&["x", "truth", "fno_pred", "deeponet_pred", "fno_err", "deeponet_err"]);
        for p in 0..n {
            csv.float_row(
                &[],
                &[grid.xs()[p], truth[p], pf[p], pd[p], pf[p] - truth[p], pd[p] - truth[p]],
            );
        }
        let path = dir.join(format!("{stem}_{i}.csv"));
        csv.write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Retained-mode settings of the ablation.
pub const ABLATION_MODES: [usize; 3] = [8, 16, 32];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AblationRow {
    pub modes: usize,
    pub val: f64,
    pub id: f64,
    pub ood_freq: f64,
    pub ood_smooth: f64,
}

/// Rows plus the trained models, so callers can reuse them.
#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub rows: Vec<AblationRow>,
    pub models: Vec<(FnoModel, TrainingLog)>,
}

/// Trains one FNO per retained-mode setting from the same seed and
/// evaluates it on the four reported splits.
pub fn modes_ablation(
    settings: &[usize],
    base: &FnoConfig,
    splits: &SplitSet,
    train_cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &EpochRecord),
) -> Result<AblationOutcome> {
    let mut rows = Vec::with_capacity(settings.len());
    let mut models = Vec::with_capacity(settings.len());
    for &modes in settings {
        let cfg = FnoConfig { modes, ..base.clone() };
        let model = init_fno(&cfg, train_cfg.seed).map_err(model_err)?;
        let (model, log) = fit_with(model, &splits.train, &splits.val, train_cfg, |r| on_epoch(modes, r))?;
        let err = |s: Split| crate::trainer::evaluate_split(&model, splits.get(s));
        rows.push(AblationRow {
            modes,
            val: err(Split::Val)?,
            id: err(Split::IdTest)?,
            ood_freq: err(Split::OodFreq)?,
            ood_smooth: err(Split::OodSmooth)?,
        });
        models.push((model, log));
    }
    Ok(AblationOutcome { rows, models })
}

pub fn write_ablation_csv(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut csv = Csv::new(&["modes", "val", "id", "ood_freq", "ood_smooth"]);
    for r in rows {
        csv.float_row(&[r.modes.to_string()], &[r.val, r.id, r.ood_freq, r.ood_smooth]);
    }
    csv.write(path)?;
    Ok(())
}

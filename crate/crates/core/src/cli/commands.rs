use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::{CliError, RunConfig, RunManifest};
use crate::autodiff::{read_checkpoint, write_checkpoint, ModelKind};
use crate::data::{generate_all, read_dataset, write_dataset, Dataset, Split, SplitSet};
use crate::evaluation::{
    evaluate_report, modal_error_curve, modes_ablation, representative_case_export, write_ablation_csv,
    write_metrics_csv, write_modal_csv, AblationRow, MetricsReport,
};
use crate::io::{fmt_f64, write_atomic, Csv};
use crate::operators::{AnyModel, ModelConfig, OperatorModel};
use crate::solver::{convergence_study_with, energy_drift, instability_onset, ConvergencePoint, TimeStart};
use crate::trainer::{fit_with, EpochRecord, TrainingLog};

/// Progress lines on stderr unless quiet.
#[derive(Debug, Clone, Copy, Default)]
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn quiet() -> Self {
        Self { quiet: true }
    }

    pub fn line(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn epoch(&self, label: &str, max: usize, r: &EpochRecord) {
        self.line(format!(
            "[{label}] epoch {:>3}/{max}  train {:.4e}  val {:.4e}  {:.1}s",
            r.epoch, r.train_loss, r.val_loss, r.seconds
        ));
    }
}

/// Default directory layout under [`RunConfig::out_dir`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn ablation(&self) -> PathBuf {
        self.root.join("ablation")
    }

    pub fn verify(&self) -> PathBuf {
        self.root.join("verify")
    }

    pub fn checkpoint(&self, kind: ModelKind) -> PathBuf {
        self.models().join(checkpoint_name(kind))
    }
}

pub fn checkpoint_name(kind: ModelKind) -> String {
    format!("{kind}.wopm")
}

/// The model config stored next to a checkpoint: `x.wopm` -> `x.json`.
pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

pub fn training_log_name(kind: ModelKind) -> String {
    format!("{kind}_train_log.csv")
}

pub fn training_timings_name(kind: ModelKind) -> String {
    format!("{kind}_train_timings.csv")
}

pub fn manifest_name(command: &str) -> String {
    format!("manifest_{command}.json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

fn write_csv(csv: &Csv, path: &Path) -> Result<(), CliError> {
    csv.write(path).map_err(io_err(path))
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("value serializes")
}

/// Reads one split file and checks it against the configured grid.
pub fn load_split(cfg: &RunConfig, dir: &Path, split: Split) -> Result<Dataset, CliError> {
    let path = dir.join(split.file_name());
    if !path.is_file() {
        return Err(CliError::MissingSplit { split, path });
    }
    let ds = read_dataset(&path).map_err(|source| CliError::Dataset {
        path: path.clone(),
        source,
    })?;
    if ds.n_points != cfg.n_points {
        return Err(CliError::Config {
            path: "n_points".into(),
            reason: format!(
                "{} holds {}-point samples, config says {}",
                path.display(),
                ds.n_points,
                cfg.n_points
            ),
        });
    }
    Ok(ds)
}

pub fn load_all_splits(cfg: &RunConfig, dir: &Path) -> Result<SplitSet, CliError> {
    Ok(SplitSet {
        train: load_split(cfg, dir, Split::Train)?,
        val: load_split(cfg, dir, Split::Val)?,
        id_test: load_split(cfg, dir, Split::IdTest)?,
        ood_freq: load_split(cfg, dir, Split::OodFreq)?,
        ood_smooth: load_split(cfg, dir, Split::OodSmooth)?,
    })
}

/// Generates the five splits and writes them as WVOP files into `out`.
pub fn cmd_gen_data(cfg: &RunConfig, out: &Path, console: Console) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let start = Instant::now();
    let splits = generate_all(&cfg.data, &grid, &cfg.solver, cfg.threads)?;
    let gen_secs = start.elapsed().as_secs_f64();
    console.line(format!(
        "generated {} samples in {gen_secs:.2}s",
        Split::ALL.iter().map(|&s| splits.get(s).len()).sum::<usize>()
    ));

    create_dir(out)?;
    let mut manifest = RunManifest::new("gen-data", cfg);
    let start = Instant::now();
    for split in Split::ALL {
        let path = out.join(split.file_name());
        write_dataset(splits.get(split), &path).map_err(|source| CliError::Dataset {
            path: path.clone(),
            source,
        })?;
        manifest.record(out, split.file_name())?;
    }
    manifest.timings.insert("generate".into(), gen_secs);
    manifest.timings.insert("write".into(), start.elapsed().as_secs_f64());
    manifest.details = json!({
        "counts": Split::ALL.iter().map(|&s| (s.name(), splits.get(s).len())).collect::<std::collections::BTreeMap<_, _>>(),
        "splits": to_json(&cfg.data.manifests()),
    });
    manifest.write(&out.join(manifest_name("gen_data")))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AnyModel,
    pub log: TrainingLog,
    pub manifest: RunManifest,
}

/// Trains one model on the train split, early-stopping on val, and writes
/// the best checkpoint, its config, and the training logs.
pub fn cmd_train(
    cfg: &RunConfig,
    kind: ModelKind,
    data: &Path,
    out: &Path,
    console: Console,
) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let train = load_split(cfg, data, Split::Train)?;
    let val = load_split(cfg, data, Split::Val)?;
    let model_cfg = cfg.model_config(kind);
    let model = AnyModel::init(&model_cfg, cfg.train.seed)?;
    console.line(format!(
        "training {kind} ({} parameters) on {} samples",
        model.params().scalar_count(),
        train.len()
    ));
    let start = Instant::now();
    let max = cfg.train.max_epochs;
    let (model, log) = fit_with(model, &train, &val, &cfg.train, |r| console.epoch(kind.name(), max, r))?;
    let secs = start.elapsed().as_secs_f64();

    create_dir(out)?;
    let mut manifest = RunManifest::new("train", cfg);
    let ckpt = checkpoint_name(kind);
    write_checkpoint(&out.join(&ckpt), &model.to_checkpoint()).map_err(|source| CliError::Checkpoint {
        path: out.join(&ckpt),
        source,
    })?;
    manifest.record(out, &ckpt)?;
    let sidecar = sidecar_path(Path::new(&ckpt));
    write_text(
        &out.join(&sidecar),
        &(serde_json::to_string_pretty(&model_cfg).expect("serializes") + "\n"),
    )?;
    manifest.record(out, sidecar)?;
    for (name, csv) in [
        (training_log_name(kind), log.losses_csv()),
        (training_timings_name(kind), log.timings_csv()),
    ] {
        write_csv(&csv, &out.join(&name))?;
        manifest.record(out, name)?;
    }
    manifest.timings.insert("fit".into(), secs);
    manifest.details = json!({
        "model": kind,
        "epochs": log.epochs.len(),
        "best_epoch": log.best_epoch,
        "best_val_loss": log.best_val_loss,
        "stop_reason": log.stop_reason,
    });
    manifest.write(&out.join(manifest_name(&format!("train_{kind}"))))?;
    Ok(TrainOutcome { model, log, manifest })
}

/// Rebuilds a model from a checkpoint, using the config stored beside it
/// when present and the run config otherwise.
pub fn load_model(cfg: &RunConfig, checkpoint: &Path) -> Result<AnyModel, CliError> {
    let ckpt = read_checkpoint(checkpoint).map_err(|source| CliError::Checkpoint {
        path: checkpoint.to_path_buf(),
        source,
    })?;
    let sidecar = sidecar_path(checkpoint);
    let model_cfg = if sidecar.is_file() {
        let text = std::fs::read_to_string(&sidecar).map_err(io_err(&sidecar))?;
        let mc: ModelConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: sidecar.display().to_string(),
            reason: e.to_string(),
        })?;
        mc
    } else {
        cfg.model_config(ckpt.kind)
    };
    AnyModel::from_checkpoint(&model_cfg, ckpt).map_err(|source| CliError::Model {
        path: checkpoint.to_path_buf(),
        source,
    })
}

/// Metrics, modal error curves, and (with both model kinds) representative
/// cases for every checkpoint on the four evaluated splits.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoints: &[PathBuf],
    data: &Path,
    out: &Path,
    console: Console,
) -> Result<(RunManifest, Vec<MetricsReport>), CliError> {
    cfg.validate()?;
    if checkpoints.is_empty() {
        return Err(CliError::Config {
            path: "checkpoint".into(),
            reason: "at least one checkpoint is required".into(),
        });
    }
    let mut models: Vec<AnyModel> = Vec::with_capacity(checkpoints.len());
    for path in checkpoints {
        let m = load_model(cfg, path)?;
        if models.iter().any(|o| o.kind() == m.kind()) {
            return Err(CliError::Config {
                path: "checkpoint".into(),
                reason: format!("more than one {} checkpoint given", m.kind()),
            });
        }
        models.push(m);
    }
    let splits: Vec<(Split, Dataset)> = Split::EVALUATED
        .iter()
        .map(|&s| load_split(cfg, data, s).map(|ds| (s, ds)))
        .collect::<Result<_, _>>()?;
    let pairs: Vec<(Split, &Dataset)> = splits.iter().map(|(s, ds)| (*s, ds)).collect();
    let grid = cfg.grid()?;

    create_dir(out)?;
    let mut manifest = RunManifest::new("evaluate", cfg);
    let start = Instant::now();
    let mut reports = Vec::with_capacity(models.len());
    for model in &models {
        let report = evaluate_report(model, cfg.train.seed, to_json(&model.config()), &pairs)?;
        for m in &report.splits {
            console.line(format!(
                "{:<9} {:<11} mean {:.4e}  std {:.4e}",
                report.model.name(),
                m.split.name(),
                m.mean,
                m.std
            ));
        }
        reports.push(report);
        for &(split, ds) in &pairs {
            let curve = modal_error_curve(model, ds, &grid, cfg.evaluation.analysis_modes)?;
            let path = write_modal_csv(&curve, split, model.kind(), out)?;
            manifest.record(out, path.file_name().expect("file name"))?;
        }
    }
    write_metrics_csv(&reports, &out.join("metrics_report.csv"))?;
    manifest.record(out, "metrics_report.csv")?;
    write_text(
        &out.join("metrics_report.json"),
        &(serde_json::to_string_pretty(&reports).expect("serializes") + "\n"),
    )?;
    manifest.record(out, "metrics_report.json")?;

    let find = |k: ModelKind| models.iter().find(|m| m.kind() == k);
    if let (Some(fno), Some(don)) = (find(ModelKind::Fno), find(ModelKind::DeepOnet)) {
        for &(split, ds) in &pairs {
            let stem = format!("case_{split}");
            for path in representative_case_export(fno, don, ds, &cfg.evaluation.representative_cases, out, &stem)? {
                manifest.record(out, path.file_name().expect("file name"))?;
            }
        }
    }
    manifest
        .timings
        .insert("evaluate".into(), start.elapsed().as_secs_f64());
    manifest.details = to_json(&reports);
    manifest.write(&out.join(manifest_name("evaluate")))?;
    Ok((manifest, reports))
}

/// One FNO per configured mode count, evaluated on the four splits.
pub fn cmd_ablate(
    cfg: &RunConfig,
    data: &Path,
    out: &Path,
    console: Console,
) -> Result<(RunManifest, Vec<AblationRow>), CliError> {
    cfg.validate()?;
    let splits = load_all_splits(cfg, data)?;
    let start = Instant::now();
    let max = cfg.train.max_epochs;
    let outcome = modes_ablation(&cfg.ablation.modes, &cfg.fno, &splits, &cfg.train, |m, r| {
        console.epoch(&format!("fno m={m}"), max, r)
    })?;

    create_dir(out)?;
    let mut manifest = RunManifest::new("ablate", cfg);
    write_ablation_csv(&outcome.rows, &out.join("ablation.csv"))?;
    manifest.record(out, "ablation.csv")?;
    for (row, (model, log)) in outcome.rows.iter().zip(&outcome.models) {
        let stem = format!("fno_m{}", row.modes);
        let ckpt = format!("{stem}.wopm");
        write_checkpoint(&out.join(&ckpt), &AnyModel::Fno(model.clone()).to_checkpoint()).map_err(|source| {
            CliError::Checkpoint {
                path: out.join(&ckpt),
                source,
            }
        })?;
        manifest.record(out, &ckpt)?;
        let sidecar = format!("{stem}.json");
        let mc = ModelConfig::Fno(model.config().clone());
        write_text(
            &out.join(&sidecar),
            &(serde_json::to_string_pretty(&mc).expect("serializes") + "\n"),
        )?;
        manifest.record(out, sidecar)?;
        let log_name = format!("{stem}_train_log.csv");
        write_csv(&log.losses_csv(), &out.join(&log_name))?;
        manifest.record(out, log_name)?;
        console.line(format!(
            "modes {:>2}: val {:.4e}  id {:.4e}  ood_freq {:.4e}  ood_smooth {:.4e}",
            row.modes, row.val, row.id, row.ood_freq, row.ood_smooth
        ));
    }
    manifest.timings.insert("ablate".into(), start.elapsed().as_secs_f64());
    manifest.details = to_json(&outcome.rows);
    manifest.write(&out.join(manifest_name("ablate")))?;
    Ok((manifest, outcome.rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub points: Vec<ConvergencePoint>,
    /// `err[i] / err[i + 1]` for consecutive resolutions.
    pub ratios: Vec<f64>,
    pub energy_drift: f64,
    pub unstable_step: Option<usize>,
    pub ratios_ok: bool,
    pub drift_ok: bool,
    pub instability_ok: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.ratios_ok && self.drift_ok && self.instability_ok
    }

    fn failures(&self) -> String {
        let mut out = Vec::new();
        if !self.ratios_ok {
            out.push(format!("error ratios {:?} outside the accepted range", self.ratios));
        }
        if !self.drift_ok {
            out.push(format!("energy drift {:.3e} above the limit", self.energy_drift));
        }
        if !self.instability_ok {
            out.push("supercritical run stayed finite".to_string());
        }
        out.join("; ")
    }
}

pub fn error_ratios(points: &[ConvergencePoint]) -> Vec<f64> {
    points.windows(2).map(|w| w[0].rel_error / w[1].rel_error).collect()
}

/// Convergence, energy drift, and the supercritical blow-up check. Writes
/// the CSVs in every case and fails only afterwards, so a failing run still
/// leaves its evidence.
pub fn cmd_verify_solver(
    cfg: &RunConfig,
    start: TimeStart,
    out: &Path,
    console: Console,
) -> Result<(RunManifest, VerifyReport), CliError> {
    cfg.validate()?;
    let v = &cfg.verify;
    let clock = Instant::now();
    let points = convergence_study_with(v.mode, 1.0, &v.resolutions, v.terminal_time, v.cfl_number, start)?;
    let ratios = error_ratios(&points);
    let drift = energy_drift(v.mode, 1.0, cfg.n_points, cfg.solver.terminal_time, v.cfl_number)?;
    let unstable_step = instability_onset(v.mode, cfg.n_points, v.unstable_cfl, v.unstable_steps)?;
    let report = VerifyReport {
        ratios_ok: ratios.iter().all(|r| (v.ratio_min..=v.ratio_max).contains(r)),
        ratios,
        energy_drift: drift,
        drift_ok: drift < v.drift_limit,
        instability_ok: unstable_step.is_some(),
        unstable_step,
        points,
    };

    create_dir(out)?;
    let mut manifest = RunManifest::new("verify-solver", cfg);
    let mut conv = Csv::new(&["n_points", "dt", "n_steps", "rel_error", "ratio"]);
    for (i, p) in report.points.iter().enumerate() {
        let ratio = if i == 0 {
            String::new()
        } else {
            fmt_f64(report.ratios[i - 1])
        };
        conv.row(&[
            p.n_points.to_string(),
            fmt_f64(p.dt),
            p.n_steps.to_string(),
            fmt_f64(p.rel_error),
            ratio,
        ]);
    }
    write_csv(&conv, &out.join("convergence.csv"))?;
    manifest.record(out, "convergence.csv")?;
    let mut stab = Csv::new(&["check", "value", "limit", "pass"]);
    stab.row(&[
        "energy_drift".into(),
        fmt_f64(drift),
        fmt_f64(v.drift_limit),
        report.drift_ok.to_string(),
    ]);
    stab.row(&[
        "unstable_step".into(),
        unstable_step.map_or_else(|| "none".into(), |s| s.to_string()),
        v.unstable_steps.to_string(),
        report.instability_ok.to_string(),
    ]);
    write_csv(&stab, &out.join("stability.csv"))?;
    manifest.record(out, "stability.csv")?;
    manifest.timings.insert("verify".into(), clock.elapsed().as_secs_f64());
    manifest.details = to_json(&report);
    manifest.write(&out.join(manifest_name("verify_solver")))?;

    for p in &report.points {
        console.line(format!("n = {:>4}  rel error {:.4e}", p.n_points, p.rel_error));
    }
    console.line(format!(
        "ratios {:?}  drift {drift:.3e}  blow-up step {unstable_step:?}",
        report.ratios
    ));
    if !report.passed() {
        return Err(CliError::VerificationFailed(report.failures()));
    }
    Ok((manifest, report))
}

/// Data, both models, evaluation, ablation, and solver checks in one go.
pub fn cmd_pipeline(cfg: &RunConfig, console: Console) -> Result<Vec<RunManifest>, CliError> {
    cfg.validate()?;
    let layout = RunLayout::new(&cfg.out_dir);
    let mut manifests = vec![cmd_verify_solver(cfg, TimeStart::Taylor, &layout.verify(), console)?.0];
    manifests.push(cmd_gen_data(cfg, &layout.data(), console)?);
    for kind in [ModelKind::Fno, ModelKind::DeepOnet] {
        manifests.push(cmd_train(cfg, kind, &layout.data(), &layout.models(), console)?.manifest);
    }
    let ckpts = [
        layout.checkpoint(ModelKind::Fno),
        layout.checkpoint(ModelKind::DeepOnet),
    ];
    manifests.push(cmd_evaluate(cfg, &ckpts, &layout.data(), &layout.eval(), console)?.0);
    manifests.push(cmd_ablate(cfg, &layout.data(), &layout.ablation(), console)?.0);
    Ok(manifests)
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::autodiff::ModelKind;
use crate::data::{DataConfig, InitialConditionSpec, SolverPolicy, Split};
use crate::evaluation::{ABLATION_MODES, DEFAULT_ANALYSIS_MODES};
use crate::operators::{DeepOnetConfig, FnoConfig, ModelConfig};
use crate::solver::{Grid, DEFAULT_CFL, VERIFY_TERMINAL_TIME};
use crate::trainer::TrainConfig;

/// Environment variable that overrides [`RunConfig::threads`].
pub const THREADS_ENV: &str = "WOPLAB_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub analysis_modes: usize,
    /// Sample indices exported as side-by-side prediction CSVs.
    pub representative_cases: Vec<usize>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            analysis_modes: DEFAULT_ANALYSIS_MODES,
            representative_cases: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    pub modes: Vec<usize>,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            modes: ABLATION_MODES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub mode: u32,
    pub resolutions: Vec<usize>,
    pub terminal_time: f64,
    pub cfl_number: f64,
    /// Accepted range for consecutive error ratios.
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub drift_limit: f64,
    pub unstable_cfl: f64,
    pub unstable_steps: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            mode: 1,
            resolutions: vec![65, 129, 257],
            terminal_time: VERIFY_TERMINAL_TIME,
            cfl_number: DEFAULT_CFL,
            ratio_min: 3.2,
            ratio_max: 4.8,
            drift_limit: 0.02,
            unstable_cfl: 1.5,
            unstable_steps: 2000,
        }
    }
}

/// Everything one pipeline run needs, read from a single JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_points: usize,
    pub solver: SolverPolicy,
    pub data: DataConfig,
    pub fno: FnoConfig,
    pub deeponet: DeepOnetConfig,
    pub train: TrainConfig,
    pub evaluation: EvaluationSettings,
    pub ablation: AblationSettings,
    pub verify: VerifySettings,
    pub out_dir: PathBuf,
    /// Worker threads for data generation.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_points: 128,
            solver: SolverPolicy::default(),
            data: DataConfig::default(),
            fno: FnoConfig::default(),
            deeponet: DeepOnetConfig::default(),
            train: TrainConfig::default(),
            evaluation: EvaluationSettings::default(),
            ablation: AblationSettings::default(),
            verify: VerifySettings::default(),
            out_dir: PathBuf::from("runs/default"),
            threads: 1,
        }
    }
}

fn invalid(path: impl Into<String>, reason: impl ToString) -> CliError {
    CliError::Config {
        path: path.into(),
        reason: reason.to_string(),
    }
}

impl RunConfig {
    /// Parses JSON text, reporting the dotted path of the first bad field.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| invalid("<root>", e))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, CliError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "<root>".into() } else { path }, e.into_inner())
        })
    }

    /// Reads `path` (or starts from defaults), applies `key=value`
    /// overrides, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                serde_json::from_str(&text).map_err(|e| invalid("<root>", e))?
            }
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg = Self::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(self.n_points).map_err(|e| invalid("n_points", e))
    }

    pub fn model_config(&self, kind: ModelKind) -> ModelConfig {
        match kind {
            ModelKind::Fno => ModelConfig::Fno(self.fno.clone()),
            ModelKind::DeepOnet => ModelConfig::DeepOnet(self.deeponet.clone()),
        }
    }

    /// Checks every nested section; the error names the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.grid()?;
        let p = &self.solver;
        if !(p.cfl_number > 0.0 && p.cfl_number <= 1.0) {
            return Err(invalid(
                "solver.cfl_number",
                format!("{} is outside (0, 1]", p.cfl_number),
            ));
        }
        if !(p.terminal_time > 0.0 && p.terminal_time.is_finite()) {
            return Err(invalid("solver.terminal_time", "must be positive and finite"));
        }
        self.data
            .validate(&grid)
            .map_err(|e| invalid(data_field(&self.data, &grid), e))?;
        self.fno.validate().map_err(|e| invalid("fno", e))?;
        if self.fno.n_points != self.n_points {
            return Err(invalid(
                "fno.n_points",
                format!("{} differs from n_points {}", self.fno.n_points, self.n_points),
            ));
        }
        self.deeponet.validate().map_err(|e| invalid("deeponet", e))?;
        if self.deeponet.n_points != self.n_points {
            return Err(invalid(
                "deeponet.n_points",
                format!("{} differs from n_points {}", self.deeponet.n_points, self.n_points),
            ));
        }
        self.train.validate().map_err(|e| invalid("train", e))?;

        let limit = InitialConditionSpec::resolvable_limit(&grid) as usize;
        let ev = &self.evaluation;
        if ev.analysis_modes == 0 || ev.analysis_modes > limit {
            return Err(invalid("evaluation.analysis_modes", format!("must lie in 1..={limit}")));
        }
        let smallest = Split::EVALUATED
            .iter()
            .map(|&s| self.data.counts.get(s))
            .min()
            .unwrap_or(0);
        if let Some(i) = ev.representative_cases.iter().position(|&i| i >= smallest) {
            return Err(invalid(
                format!("evaluation.representative_cases[{i}]"),
                format!("index exceeds the smallest evaluated split ({smallest} samples)"),
            ));
        }

        if self.ablation.modes.is_empty() {
            return Err(invalid("ablation.modes", "needs at least one setting"));
        }
        for (i, &modes) in self.ablation.modes.iter().enumerate() {
            FnoConfig {
                modes,
                ..self.fno.clone()
            }
            .validate()
            .map_err(|e| invalid(format!("ablation.modes[{i}]"), e))?;
        }

        let v = &self.verify;
        if v.mode == 0 {
            return Err(invalid("verify.mode", "must be at least 1"));
        }
        if v.resolutions.len() < 2 || v.resolutions.iter().any(|&n| n < 9) {
            return Err(invalid(
                "verify.resolutions",
                "need two or more resolutions of at least 9 points",
            ));
        }
        if !(v.terminal_time > 0.0 && v.terminal_time.is_finite()) {
            return Err(invalid("verify.terminal_time", "must be positive and finite"));
        }
        if !(v.cfl_number > 0.0 && v.cfl_number <= 1.0) {
            return Err(invalid("verify.cfl_number", "must lie in (0, 1]"));
        }
        if !(v.ratio_min < v.ratio_max) {
            return Err(invalid("verify.ratio_min", "must be below verify.ratio_max"));
        }
        if !(v.unstable_cfl > 0.0) || v.unstable_steps == 0 {
            return Err(invalid(
                "verify.unstable_cfl",
                "needs a positive Courant number and step budget",
            ));
        }
        if self.threads == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        Ok(())
    }

    /// Applies the thread-count environment override, if set.
    pub fn with_env_threads(mut self) -> Result<Self, CliError> {
        if let Ok(raw) = std::env::var(THREADS_ENV) {
            self.threads = match raw.trim().parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => return Err(invalid(THREADS_ENV, format!("`{raw}` is not a positive integer"))),
            };
        }
        Ok(self)
    }
}

/// Best guess at which data field a validation failure came from.
fn data_field(d: &DataConfig, grid: &Grid) -> &'static str {
    let limit = InitialConditionSpec::resolvable_limit(grid);
    if d.train_k_max > limit {
        "data.train_k_max"
    } else if d.ood_k_max > limit || d.ood_k_min > d.ood_k_max {
        "data.ood_k_max"
    } else {
        "data"
    }
}

/// Sets `a.b.c=value` inside a JSON tree. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must look like key.path=value"))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(invalid(path, "empty key in override path"));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(invalid(keys[..i].join("."), "is not an object"));
        };
        if i + 1 == keys.len() {
            map.insert(key.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("override path has at least one key")
}

//! JSON run configuration. Unknown keys are rejected; everything is
//! validated before any computation starts.

use crate::backtest::{AlphaPolicy, BacktestConfig, HfVariable, ModelKind, PanelInputs};
use crate::calendar::{parse_quarter_label, Horizon};
use crate::dataset::{to_calendar_weeks, DataError, Frequency, HighFreqSeries, HighFreqSpec, RawSeries};
use crate::evaluation::WeightScheme;
use crate::solver::{QuantileGrid, SolverError};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn default_ar_lags() -> usize {
    1
}
fn default_poly_order() -> usize {
    3
}
fn default_true() -> bool {
    true
}
fn default_quantiles() -> Vec<f64> {
    QuantileGrid::deciles_with_quartiles().taus().to_vec()
}
fn default_horizons() -> Vec<f64> {
    let mut h: Vec<f64> = (1..=11).map(|j| j as f64 / 12.0).collect();
    h.push(1.0);
    h.push(4.0);
    h
}
fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Gncqr, ModelKind::MidasQr, ModelKind::Qr]
}
fn default_start_size() -> usize {
    40
}
fn default_folds() -> usize {
    10
}
fn default_pre_cutoff() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 12, 31).expect("valid date")
}
fn default_density_quarters() -> Vec<String> {
    vec!["2008Q2".to_string()]
}
fn default_cv_loss() -> WeightScheme {
    WeightScheme::Equal
}
fn default_alpha_grid() -> Vec<f64> {
    crate::tuning::default_alpha_grid()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighFreqConfig {
    pub id: String,
    pub path: PathBuf,
    pub frequency: Frequency,
    pub lags: usize,
    #[serde(default = "default_poly_order")]
    pub poly_order: usize,
    #[serde(default = "default_true")]
    pub restricted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub target: PathBuf,
    #[serde(default = "default_ar_lags")]
    pub ar_lags: usize,
    pub high_freq: Vec<HighFreqConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum AlphaMode {
    Fixed,
    CvOnce,
    CvPerOrigin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub mode: AlphaMode,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default = "default_alpha_grid")]
    pub grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_cv_loss")]
    pub loss: WeightScheme,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            mode: AlphaMode::CvOnce,
            value: None,
            grid: default_alpha_grid(),
            folds: default_folds(),
            loss: default_cv_loss(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestSection {
    #[serde(default = "default_start_size")]
    pub start_size: usize,
    #[serde(default = "default_pre_cutoff")]
    pub pre_covid_cutoff: NaiveDate,
    #[serde(default = "default_density_quarters")]
    pub density_quarters: Vec<String>,
}

impl Default for BacktestSection {
    fn default() -> Self {
        BacktestSection {
            start_size: default_start_size(),
            pre_covid_cutoff: default_pre_cutoff(),
            density_quarters: default_density_quarters(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub alpha: AlphaConfig,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub log_level: Option<String>,
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        config
            .validate()
            .map_err(|message| ConfigError::Invalid {
                path: path.to_path_buf(),
                message,
            })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.data.high_freq.is_empty() {
            return Err("data.high_freq must list at least one series".into());
        }
        let mut ids: Vec<&str> = self.data.high_freq.iter().map(|h| h.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.data.high_freq.len() {
            return Err("high-frequency series ids must be unique".into());
        }
        for hf in &self.data.high_freq {
            if hf.frequency == Frequency::Quarterly {
                return Err(format!("series `{}`: high-frequency series cannot be quarterly", hf.id));
            }
            if hf.lags == 0 {
                return Err(format!("series `{}`: lags must be positive", hf.id));
            }
            if hf.poly_order >= hf.lags {
                return Err(format!(
                    "series `{}`: poly_order {} must be below lags {}",
                    hf.id, hf.poly_order, hf.lags
                ));
            }
            if hf.restricted && hf.poly_order < 2 {
                return Err(format!(
                    "series `{}`: endpoint restrictions need poly_order >= 2",
                    hf.id
                ));
            }
        }
        if self.horizons.is_empty() {
            return Err("horizons must be non-empty".into());
        }
        for &h in &self.horizons {
            let hz = Horizon::from_quarters(h).map_err(|e| e.to_string())?;
            if hz.weeks() == 0 {
                return Err(format!("horizon {h} rounds to zero weeks; horizons must be positive"));
            }
        }
        QuantileGrid::new(self.quantiles.clone()).map_err(|e| e.to_string())?;
        if self.models.is_empty() {
            return Err("models must be non-empty".into());
        }
        if matches!(self.alpha.mode, AlphaMode::Fixed) {
            match self.alpha.value {
                Some(v) if v.is_finite() && v >= 0.0 => {}
                _ => return Err("alpha.mode = fixed requires a non-negative alpha.value".into()),
            }
        }
        if self.alpha.grid.is_empty() {
            return Err("alpha.grid must be non-empty".into());
        }
        if self.backtest.start_size < 2 {
            return Err("backtest.start_size must be at least 2".into());
        }
        for q in &self.backtest.density_quarters {
            if parse_quarter_label(q).is_none() {
                return Err(format!("bad density quarter label `{q}` (use e.g. 2008Q2)"));
            }
        }
        Ok(())
    }

    pub fn horizons(&self) -> Vec<Horizon> {
        self.horizons
            .iter()
            .map(|&h| Horizon::from_quarters(h).expect("validated"))
            .collect()
    }

    pub fn grid(&self) -> QuantileGrid {
        QuantileGrid::new(self.quantiles.clone()).expect("validated")
    }

    pub fn alpha_policy(&self) -> AlphaPolicy {
        match self.alpha.mode {
            AlphaMode::Fixed => AlphaPolicy::Fixed {
                value: self.alpha.value.expect("validated"),
            },
            AlphaMode::CvOnce => AlphaPolicy::CvOnce,
            AlphaMode::CvPerOrigin => AlphaPolicy::CvPerOrigin,
        }
    }

    /// Load the series named in the config; relative paths resolve against
    /// `base_dir` (normally the config file's directory).
    pub fn load_inputs(&self, base_dir: &Path) -> Result<PanelInputs, ConfigError> {
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let target = RawSeries::from_csv_path(resolve(&self.data.target), "y", Frequency::Quarterly)?;
        let mut variables = Vec::with_capacity(self.data.high_freq.len());
        for hf in &self.data.high_freq {
            let raw = RawSeries::from_csv_path(resolve(&hf.path), hf.id.clone(), hf.frequency)?;
            let series = match hf.frequency {
                Frequency::Weekly => HighFreqSeries::Weekly(to_calendar_weeks(&raw)?),
                Frequency::Monthly => HighFreqSeries::Monthly(raw),
                Frequency::Quarterly => unreachable!("validated"),
            };
            variables.push(HfVariable {
                spec: HighFreqSpec {
                    series,
                    lags: hf.lags,
                },
                poly_order: hf.poly_order,
                restricted: hf.restricted,
            });
        }
        Ok(PanelInputs {
            target,
            ar_lags: self.data.ar_lags,
            variables,
        })
    }

    pub fn to_backtest_config(&self, out_dir: PathBuf) -> BacktestConfig {
        BacktestConfig {
            horizons: self.horizons(),
            start_size: self.backtest.start_size,
            models: self.models.clone(),
            grid: self.grid(),
            alpha_policy: self.alpha_policy(),
            alpha_grid: self.alpha.grid.clone(),
            cv_folds: self.alpha.folds,
            cv_loss: self.alpha.loss,
            pre_cutoff: self.backtest.pre_covid_cutoff,
            density_quarters: self
                .backtest
                .density_quarters
                .iter()
                .map(|q| parse_quarter_label(q).expect("validated"))
                .collect(),
            out_dir,
        }
    }
}

//! CSV and manifest writers. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back reproduces the exact bits.

use super::{BacktestConfig, BacktestError, ModelKind, PanelInputs, ScoreReport};
use crate::calendar::Horizon;
use crate::evaluation::{significance_stars, QuantileScorePanel, WeightScheme};
use crate::solver::{QuantileGrid, QuantilePanelFit};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Output-directory handle that records every file written so an aborted run
/// can clean up after itself.
#[derive(Debug)]
pub struct OutputTree {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputTree {
    pub fn new(root: PathBuf) -> Self {
        OutputTree {
            root,
            files: Vec::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn write(&mut self, rel: &str, content: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.root)?;
        let path = self.root.join(rel);
        std::fs::write(&path, content)?;
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn remove_written(&self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
    }
}

/// `model,variable,tau,lag,gamma` rows for one variable across all models.
pub fn surface_csv(
    fits: &[(ModelKind, QuantilePanelFit)],
    var_index: usize,
    grid: &QuantileGrid,
) -> Result<String, BacktestError> {
    let mut out = String::from("model,variable,tau,lag,gamma\n");
    for (model, fit) in fits {
        let layout = fit
            .layout
            .as_ref()
            .expect("backtest fits carry layouts");
        let block = &layout.blocks[var_index];
        for (q, &tau) in grid.taus().iter().enumerate() {
            let theta: Vec<f64> = block.cols.clone().map(|j| fit.delta[[j, q]]).collect();
            let gammas: Vec<f64> = match &block.map {
                Some(map) => map.lag_profile(&theta)?,
                None => theta,
            };
            for (m, &gamma) in gammas.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    model.cli_name(),
                    block.id,
                    tau,
                    m + 1,
                    gamma
                ));
            }
        }
    }
    Ok(out)
}

/// `model,variable,tau,effect` rows: the cumulative high-frequency effect per
/// quantile.
pub fn overall_csv(
    fits: &[(ModelKind, QuantilePanelFit)],
    var_index: usize,
    grid: &QuantileGrid,
) -> Result<String, BacktestError> {
    let mut out = String::from("model,variable,tau,effect\n");
    for (model, fit) in fits {
        let layout = fit
            .layout
            .as_ref()
            .expect("backtest fits carry layouts");
        let block = &layout.blocks[var_index];
        for (q, &tau) in grid.taus().iter().enumerate() {
            let theta: Vec<f64> = block.cols.clone().map(|j| fit.delta[[j, q]]).collect();
            let effect = match &block.map {
                Some(map) => map.overall_effect(&theta)?,
                None => theta.iter().sum(),
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                model.cli_name(),
                block.id,
                tau,
                effect
            ));
        }
    }
    Ok(out)
}

pub fn per_obs_header(grid: &QuantileGrid) -> String {
    let mut out = String::from("model,horizon,quarter,y");
    for tau in grid.taus() {
        out.push_str(&format!(",qs_{tau}"));
    }
    for scheme in WeightScheme::ALL {
        out.push(',');
        out.push_str(scheme.label());
    }
    out.push('\n');
    out
}

pub fn per_obs_row(
    model: ModelKind,
    horizon: Horizon,
    quarter: &str,
    y: f64,
    qs_row: ndarray::ArrayView1<'_, f64>,
    panel: &QuantileScorePanel,
    row: usize,
) -> String {
    let mut out = format!("{},{},{quarter},{y}", model.cli_name(), horizon.label());
    for v in qs_row {
        out.push_str(&format!(",{v}"));
    }
    for scheme in WeightScheme::ALL {
        let series = panel.qwcrps_series(scheme);
        out.push_str(&format!(",{}", series[row]));
    }
    out.push('\n');
    out
}

/// Score table: one row per model x horizon, means under the four weightings
/// for the full sample and the pre-cutoff subsample, with Diebold-Mariano
/// stars against the reference model.
pub fn scores_csv(report: &ScoreReport) -> String {
    let mut out = String::from("model,horizon");
    for sample in ["full", "precovid"] {
        for scheme in WeightScheme::ALL {
            out.push_str(&format!(",{}_{sample}", scheme.label()));
        }
    }
    for sample in ["full", "precovid"] {
        for scheme in WeightScheme::ALL {
            out.push_str(&format!(",stars_{}_{sample}", scheme.label()));
        }
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&format!("{},{}", row.model.cli_name(), row.horizon.label()));
        for v in row.full_means.iter().chain(&row.pre_means) {
            out.push_str(&format!(",{v}"));
        }
        for dm in row.full_dm.iter().chain(&row.pre_dm) {
            let stars = dm
                .as_ref()
                .map(|d| significance_stars(d.p_value))
                .unwrap_or("");
            out.push_str(&format!(",{stars}"));
        }
        out.push('\n');
    }
    out
}

#[derive(serde::Serialize)]
struct Manifest<'a> {
    config_hash: String,
    version: &'static str,
    solver: SolverSettings,
    models: Vec<&'a str>,
    horizons: Vec<String>,
    quantiles: &'a [f64],
    variables: Vec<VariableSummary>,
    start_size: usize,
    cv_folds: usize,
}

#[derive(serde::Serialize)]
struct SolverSettings {
    tol: f64,
    max_iter_per_column: usize,
}

#[derive(serde::Serialize)]
struct VariableSummary {
    id: String,
    frequency: String,
    lags: usize,
    poly_order: usize,
    restricted: bool,
}

/// Deterministic run manifest: configuration hash and solver settings, no
/// timestamps.
pub fn manifest_json(
    config: &BacktestConfig,
    inputs: &PanelInputs,
) -> Result<String, BacktestError> {
    let mut hasher = Sha256::new();
    hasher.update(format!(
        "{:?}|{:?}|{:?}|{:?}|{:?}|{}|{}|{:?}",
        config.horizons,
        config.models,
        config.grid.taus(),
        config.alpha_policy,
        config.alpha_grid,
        config.start_size,
        config.cv_folds,
        config.pre_cutoff,
    ));
    let hash = hasher.finalize();
    let mut config_hash = String::with_capacity(64);
    for byte in hash {
        config_hash.push_str(&format!("{byte:02x}"));
    }
    let manifest = Manifest {
        config_hash,
        version: env!("CARGO_PKG_VERSION"),
        solver: SolverSettings {
            tol: 1e-9,
            max_iter_per_column: 50,
        },
        models: config.models.iter().map(|m| m.cli_name()).collect(),
        horizons: config.horizons.iter().map(|h| h.label()).collect(),
        quantiles: config.grid.taus(),
        variables: inputs
            .variables
            .iter()
            .map(|v| VariableSummary {
                id: v.spec.series.id().to_string(),
                frequency: format!("{:?}", v.spec.series.frequency()).to_lowercase(),
                lags: v.spec.lags,
                poly_order: v.poly_order,
                restricted: v.restricted,
            })
            .collect(),
        start_size: config.start_size,
        cv_folds: config.cv_folds,
    };
    Ok(serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n")
}

//! Expanding-window pseudo-out-of-sample exercise: per horizon, fit every
//! configured model on data through each origin, predict the origin's target
//! quarter, score with qwCRPS under four weighting schemes, run
//! Diebold-Mariano tests against the reference model, and export coefficient
//! surfaces, overall effects, fitted densities and per-observation scores.

pub mod exports;

pub use exports::OutputTree;

use crate::almon::{make_almon_map, AlmonError, AlmonMap};
use crate::calendar::{quarter_label, quarter_last_day, Horizon, QuarterIndex};
use crate::dataset::{build_panel, DataError, HighFreqSpec, MixedFrequencyDataset, RawSeries};
use crate::evaluation::{
    density_from_quantiles, dm_test, significance_stars, DmResult, EvalError, QuantileScorePanel,
    QwCrpsReport, WeightScheme,
};
use crate::solver::{
    fit_independent, fit_joint, ConstraintMode, QuantileGrid, QuantilePanelFit, SolverError,
    SolverStatus,
};
use crate::tuning::{make_plan, select_alpha, AlphaSelection, TuningError};
use chrono::NaiveDate;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("horizon {horizon}: panel has {rows} rows but the first origin needs at least {needed} training rows plus one evaluation point; provide at least {needed_total} panel rows")]
    InsufficientData {
        horizon: String,
        rows: usize,
        needed: usize,
        needed_total: usize,
    },
    #[error("model {model} failed at origin {origin}: {source}")]
    ModelFailed {
        model: &'static str,
        origin: String,
        source: SolverError,
    },
    #[error("no scored models configured")]
    NoScoredModels,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Almon(#[from] AlmonError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Joint fit with Almon lag structure and adaptive non-crossing
    /// constraints.
    #[serde(rename = "gncqr")]
    Gncqr,
    /// Almon lag structure, quantiles estimated independently.
    #[serde(rename = "midas-qr")]
    MidasQr,
    /// Raw high-frequency lags, quantiles estimated independently. Fit for
    /// surface export only; never scored.
    #[serde(rename = "umidas")]
    UmidasQr,
    /// Flat within-window averages of the high-frequency variables.
    #[serde(rename = "qr")]
    Qr,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Gncqr => "MIDAS-GNCQR",
            ModelKind::MidasQr => "MIDAS-QR",
            ModelKind::UmidasQr => "UMIDAS-QR",
            ModelKind::Qr => "QR",
        }
    }

    pub fn cli_name(&self) -> &'static str {
        match self {
            ModelKind::Gncqr => "gncqr",
            ModelKind::MidasQr => "midas-qr",
            ModelKind::UmidasQr => "umidas",
            ModelKind::Qr => "qr",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "gncqr" => Some(ModelKind::Gncqr),
            "midas-qr" => Some(ModelKind::MidasQr),
            "umidas" => Some(ModelKind::UmidasQr),
            "qr" => Some(ModelKind::Qr),
            _ => None,
        }
    }

    /// UMIDAS-QR is excluded from score tables.
    pub fn scored(&self) -> bool {
        !matches!(self, ModelKind::UmidasQr)
    }

    pub fn uses_alpha(&self) -> bool {
        matches!(self, ModelKind::Gncqr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AlphaPolicy {
    /// Use a fixed tightness everywhere.
    Fixed { value: f64 },
    /// Cross-validate once per horizon on the first origin's training set.
    CvOnce,
    /// Re-select by cross-validation at every origin.
    CvPerOrigin,
}

/// One high-frequency input with its lag count and Almon settings.
#[derive(Debug, Clone)]
pub struct HfVariable {
    pub spec: HighFreqSpec,
    pub poly_order: usize,
    pub restricted: bool,
}

/// Everything needed to build panels: the target plus high-frequency inputs.
#[derive(Debug, Clone)]
pub struct PanelInputs {
    pub target: RawSeries,
    pub ar_lags: usize,
    pub variables: Vec<HfVariable>,
}

impl PanelInputs {
    pub fn panel(&self, horizon: Horizon) -> Result<MixedFrequencyDataset, DataError> {
        let specs: Vec<HighFreqSpec> = self.variables.iter().map(|v| v.spec.clone()).collect();
        build_panel(&self.target, &specs, horizon, self.ar_lags)
    }

    /// Per-variable Almon maps for a model: the restricted polynomial for the
    /// MIDAS models, the flat average for plain QR, raw lags for UMIDAS.
    pub fn maps_for(&self, model: ModelKind) -> Result<Vec<Option<AlmonMap>>, AlmonError> {
        self.variables
            .iter()
            .map(|v| match model {
                ModelKind::Gncqr | ModelKind::MidasQr => {
                    make_almon_map(v.spec.lags, v.poly_order, v.restricted).map(Some)
                }
                ModelKind::Qr => make_almon_map(v.spec.lags, 0, false).map(Some),
                ModelKind::UmidasQr => Ok(None),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub horizons: Vec<Horizon>,
    /// Minimum training rows before the first evaluated origin.
    pub start_size: usize,
    pub models: Vec<ModelKind>,
    pub grid: QuantileGrid,
    pub alpha_policy: AlphaPolicy,
    pub alpha_grid: Vec<f64>,
    pub cv_folds: usize,
    pub cv_loss: WeightScheme,
    /// Last target-quarter end date included in the pre-cutoff subsample.
    pub pre_cutoff: NaiveDate,
    pub density_quarters: Vec<QuarterIndex>,
    pub out_dir: PathBuf,
}

impl BacktestConfig {
    pub fn defaults(out_dir: PathBuf) -> Self {
        let mut horizons: Vec<Horizon> = (1..=11).map(Horizon::from_weeks).collect();
        horizons.push(Horizon::from_weeks(12));
        horizons.push(Horizon::from_weeks(48));
        BacktestConfig {
            horizons,
            start_size: 40,
            models: vec![ModelKind::Gncqr, ModelKind::MidasQr, ModelKind::Qr],
            grid: QuantileGrid::deciles_with_quartiles(),
            alpha_policy: AlphaPolicy::CvOnce,
            alpha_grid: crate::tuning::default_alpha_grid(),
            cv_folds: 10,
            cv_loss: WeightScheme::Equal,
            pre_cutoff: NaiveDate::from_ymd_opt(2019, 12, 31).expect("valid date"),
            density_quarters: vec![crate::calendar::parse_quarter_label("2008Q2")
                .expect("valid label")],
            out_dir,
        }
    }
}

/// One row of the published score table.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub model: ModelKind,
    pub horizon: Horizon,
    /// Means under omega1..omega4, full sample then pre-cutoff.
    pub full_means: [f64; 4],
    pub pre_means: [f64; 4],
    pub full_dm: [Option<DmResult>; 4],
    pub pre_dm: [Option<DmResult>; 4],
    pub n_full: usize,
    pub n_pre: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
}

impl ScoreReport {
    /// Plain-text table in the paper's layout, stars on the compared models.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut horizons: Vec<Horizon> = self.rows.iter().map(|r| r.horizon).collect();
        horizons.dedup();
        out.push_str(&format!(
            "{:<14} {:>24}  {:>4}{:>9}{:>9}{:>9}{:>9} | {:>9}{:>9}{:>9}{:>9}\n",
            "", "", "", "w1", "w2", "w3", "w4", "w1", "w2", "w3", "w4"
        ));
        for h in horizons {
            out.push_str(&format!(
                "h={:<38} {:>14}{:>27}\n",
                h.label(),
                "Full Sample",
                "Pre-cutoff"
            ));
            for row in self.rows.iter().filter(|r| r.horizon == h) {
                let cell = |mean: f64, dm: &Option<DmResult>| {
                    let stars = dm
                        .as_ref()
                        .map(|d| significance_stars(d.p_value))
                        .unwrap_or("");
                    format!("{mean:.3}{stars}")
                };
                out.push_str(&format!(
                    "  {:<12} {:>24}  {:>4}{:>9}{:>9}{:>9}{:>9} | {:>9}{:>9}{:>9}{:>9}\n",
                    row.model.label(),
                    "",
                    "",
                    cell(row.full_means[0], &row.full_dm[0]),
                    cell(row.full_means[1], &row.full_dm[1]),
                    cell(row.full_means[2], &row.full_dm[2]),
                    cell(row.full_means[3], &row.full_dm[3]),
                    cell(row.pre_means[0], &row.pre_dm[0]),
                    cell(row.pre_means[1], &row.pre_dm[1]),
                    cell(row.pre_means[2], &row.pre_dm[2]),
                    cell(row.pre_means[3], &row.pre_dm[3]),
                ));
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct BacktestArtifacts {
    pub report: ScoreReport,
    pub files: Vec<PathBuf>,
    /// True when every fit reached solver status optimal.
    pub all_optimal: bool,
}

struct OriginOutcome {
    quarter: QuarterIndex,
    y: f64,
    /// Predicted quantile vector per scored model (indexed like `scored`).
    predictions: Vec<Vec<f64>>,
    all_optimal: bool,
}

/// Fit one model on a training panel.
fn fit_model(
    model: ModelKind,
    inputs: &PanelInputs,
    train: &MixedFrequencyDataset,
    grid: &QuantileGrid,
    alpha: f64,
) -> Result<QuantilePanelFit, BacktestError> {
    let maps = inputs.maps_for(model)?;
    let fit = match model {
        ModelKind::Gncqr => fit_joint(train, &maps, grid, ConstraintMode::Adaptive(alpha)),
        _ => fit_independent(train, &maps, grid),
    };
    fit.map_err(|source| BacktestError::ModelFailed {
        model: model.label(),
        origin: "fit".into(),
        source,
    })
}

/// Run the full exercise and write every artefact under the configured
/// output directory. Partial outputs are removed when a run aborts.
pub fn run_backtest(
    config: &BacktestConfig,
    inputs: &PanelInputs,
) -> Result<BacktestArtifacts, BacktestError> {
    let mut tree = OutputTree::new(config.out_dir.clone());
    match run_inner(config, inputs, &mut tree) {
        Ok(artifacts) => Ok(artifacts),
        Err(e) => {
            tree.remove_written();
            Err(e)
        }
    }
}

fn run_inner(
    config: &BacktestConfig,
    inputs: &PanelInputs,
    tree: &mut OutputTree,
) -> Result<BacktestArtifacts, BacktestError> {
    let scored: Vec<ModelKind> = config.models.iter().copied().filter(|m| m.scored()).collect();
    if scored.is_empty() {
        return Err(BacktestError::NoScoredModels);
    }
    let grid = &config.grid;
    let mut report = ScoreReport::default();
    let mut all_optimal = true;
    let mut per_obs_csv = String::from(exports::per_obs_header(grid).as_str());

    for &h in &config.horizons {
        let panel = inputs.panel(h)?;
        let gap = h.guard_quarters() as i64;
        let t_rows = panel.rows();

        // origins: rows with at least start_size training rows available
        let origins: Vec<usize> = (0..t_rows)
            .filter(|&idx| {
                panel.rows_through_quarter(panel.target_quarters[idx] - gap) >= config.start_size
            })
            .collect();
        if origins.is_empty() {
            return Err(BacktestError::InsufficientData {
                horizon: h.label(),
                rows: t_rows,
                needed: config.start_size,
                needed_total: config.start_size + gap as usize + 1,
            });
        }

        // constraint tightness for the GNCQR path
        let needs_alpha = config.models.iter().any(|m| m.uses_alpha());
        let alphas: Vec<f64> = if !needs_alpha {
            vec![1.0; origins.len()]
        } else {
            match config.alpha_policy {
                AlphaPolicy::Fixed { value } => vec![value; origins.len()],
                AlphaPolicy::CvOnce => {
                    let train_len =
                        panel.rows_through_quarter(panel.target_quarters[origins[0]] - gap);
                    let selection = cv_select(config, inputs, &panel, train_len, h)?;
                    tree.write(
                        &format!("cv_audit_{}.csv", h.label()),
                        &selection.audit_csv(),
                    )?;
                    vec![selection.chosen_alpha; origins.len()]
                }
                AlphaPolicy::CvPerOrigin => {
                    let mut chosen = Vec::with_capacity(origins.len());
                    for &idx in &origins {
                        let train_len =
                            panel.rows_through_quarter(panel.target_quarters[idx] - gap);
                        let selection = cv_select(config, inputs, &panel, train_len, h)?;
                        tree.write(
                            &format!(
                                "cv_audit_{}_{}.csv",
                                h.label(),
                                quarter_label(panel.target_quarters[idx])
                            ),
                            &selection.audit_csv(),
                        )?;
                        chosen.push(selection.chosen_alpha);
                    }
                    chosen
                }
            }
        };

        // expanding-window loop, parallel across origins
        let outcomes: Vec<Result<OriginOutcome, BacktestError>> = origins
            .par_iter()
            .zip(&alphas)
            .map(|(&idx, &alpha)| {
                let quarter = panel.target_quarters[idx];
                let train_len = panel.rows_through_quarter(quarter - gap);
                let train_rows: Vec<usize> = (0..train_len).collect();
                let train = panel.subset(&train_rows);
                let test = panel.subset(&[idx]);
                let mut predictions = Vec::with_capacity(scored.len());
                let mut ok = true;
                for &model in &scored {
                    let fit = fit_model(model, inputs, &train, grid, alpha).map_err(|e| {
                        match e {
                            BacktestError::ModelFailed { model, source, .. } => {
                                BacktestError::ModelFailed {
                                    model,
                                    origin: quarter_label(quarter),
                                    source,
                                }
                            }
                            other => other,
                        }
                    })?;
                    ok &= fit.status == SolverStatus::Optimal;
                    let preds = fit.predict_panel(&test)?;
                    predictions.push(preds.row(0).to_vec());
                }
                Ok(OriginOutcome {
                    quarter,
                    y: panel.target[idx],
                    predictions,
                    all_optimal: ok,
                })
            })
            .collect();
        let mut results = Vec::with_capacity(outcomes.len());
        for r in outcomes {
            results.push(r?);
        }
        all_optimal &= results.iter().all(|r| r.all_optimal);

        // scores and DM tests against the reference (first scored) model
        let y: Vec<f64> = results.iter().map(|r| r.y).collect();
        let pre_mask: Vec<bool> = results
            .iter()
            .map(|r| quarter_last_day(r.quarter) <= config.pre_cutoff)
            .collect();
        let mut per_model_series: Vec<(Array2<f64>, QuantileScorePanel)> = Vec::new();
        for (mi, &model) in scored.iter().enumerate() {
            let preds = Array2::from_shape_fn((results.len(), grid.len()), |(i, q)| {
                results[i].predictions[mi][q]
            });
            let panel_scores =
                QuantileScorePanel::from_predictions(&y, &preds, grid, h.label())?;
            // per-observation rows for the persisted file
            for (i, r) in results.iter().enumerate() {
                per_obs_csv.push_str(&exports::per_obs_row(
                    model,
                    h,
                    quarter_label(r.quarter).as_str(),
                    r.y,
                    panel_scores.qs.row(i),
                    &panel_scores,
                    i,
                ));
            }
            per_model_series.push((preds, panel_scores));
        }

        let reference_losses: [Vec<f64>; 4] = std::array::from_fn(|s| {
            per_model_series[0].1.qwcrps_series(WeightScheme::ALL[s])
        });
        for (mi, &model) in scored.iter().enumerate() {
            let rep_full = QwCrpsReport::from_panel(&per_model_series[mi].1, "full");
            let pre_rows: Vec<usize> =
                (0..results.len()).filter(|&i| pre_mask[i]).collect();
            let mut full_dm: [Option<DmResult>; 4] = Default::default();
            let mut pre_dm: [Option<DmResult>; 4] = Default::default();
            let hac = h.guard_quarters().max(1);
            let mut pre_means = [f64::NAN; 4];
            for s in 0..4 {
                let series = per_model_series[mi].1.qwcrps_series(WeightScheme::ALL[s]);
                let pre_series: Vec<f64> = pre_rows.iter().map(|&i| series[i]).collect();
                pre_means[s] = mean(&pre_series);
                if mi > 0 {
                    let ref_series = &reference_losses[s];
                    if series.len() >= 10 {
                        full_dm[s] = dm_test(ref_series, &series, hac).ok();
                    }
                    let ref_pre: Vec<f64> = pre_rows.iter().map(|&i| ref_series[i]).collect();
                    if pre_series.len() >= 10 {
                        pre_dm[s] = dm_test(&ref_pre, &pre_series, hac).ok();
                    }
                }
            }
            report.rows.push(ScoreRow {
                model,
                horizon: h,
                full_means: rep_full.means,
                pre_means,
                full_dm,
                pre_dm,
                n_full: results.len(),
                n_pre: pre_rows.len(),
            });
        }

        // full-sample fits for surface and overall-effect exports
        let export_alpha = *alphas.last().expect("non-empty origins");
        let mut full_fits: Vec<(ModelKind, QuantilePanelFit)> = Vec::new();
        for &model in &config.models {
            let fit = fit_model(model, inputs, &panel, grid, export_alpha)?;
            all_optimal &= fit.status == SolverStatus::Optimal;
            full_fits.push((model, fit));
        }
        for (vi, var) in inputs.variables.iter().enumerate() {
            let id = var.spec.series.id();
            tree.write(
                &format!("surface_{}_{}.csv", id, h.label()),
                &exports::surface_csv(&full_fits, vi, grid)?,
            )?;
            tree.write(
                &format!("overall_{}_{}.csv", id, h.label()),
                &exports::overall_csv(&full_fits, vi, grid)?,
            )?;
        }

        // fitted densities for the configured quarters, re-estimated with
        // data through the corresponding cutoff
        for &dq in &config.density_quarters {
            let Some(idx) = panel.target_quarters.iter().position(|&q| q == dq) else {
                continue;
            };
            let train_len = panel.rows_through_quarter(dq - gap);
            if train_len < config.start_size.min(16) {
                continue;
            }
            let train_rows: Vec<usize> = (0..train_len).collect();
            let train = panel.subset(&train_rows);
            let test = panel.subset(&[idx]);
            let mut csv = String::from("model,y,pdf,cdf\n");
            for &model in &scored {
                let alpha = *alphas.first().expect("non-empty");
                let fit = fit_model(model, inputs, &train, grid, alpha)?;
                let preds = fit.predict_panel(&test)?;
                let curve = density_from_quantiles(&preds.row(0).to_vec(), grid, 401, 0.5)?;
                for i in 0..curve.support.len() {
                    csv.push_str(&format!(
                        "{},{},{},{}\n",
                        model.cli_name(),
                        curve.support[i],
                        curve.pdf[i],
                        curve.cdf[i]
                    ));
                }
            }
            tree.write(
                &format!("density_{}_{}.csv", quarter_label(dq), h.label()),
                &csv,
            )?;
        }
    }

    tree.write("scores.csv", &exports::scores_csv(&report))?;
    tree.write("scores_per_obs.csv", &per_obs_csv)?;
    tree.write(
        "run_manifest.json",
        &exports::manifest_json(config, inputs)?,
    )?;

    Ok(BacktestArtifacts {
        report,
        files: tree.files().to_vec(),
        all_optimal,
    })
}

fn cv_select(
    config: &BacktestConfig,
    inputs: &PanelInputs,
    panel: &MixedFrequencyDataset,
    train_len: usize,
    h: Horizon,
) -> Result<AlphaSelection, BacktestError> {
    let train_rows: Vec<usize> = (0..train_len).collect();
    let train = panel.subset(&train_rows);
    let maps = inputs.maps_for(ModelKind::Gncqr)?;
    let plan = make_plan(train_len, config.cv_folds, h)?;
    Ok(select_alpha(
        &train,
        &maps,
        &config.grid,
        &config.alpha_grid,
        &plan,
        config.cv_loss,
    )?)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

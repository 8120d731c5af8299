//! hv-block cross-validation of the adaptive-constraint tightness.
//!
//! Test blocks are contiguous chronological slices; `h_guard` low-frequency
//! periods on each side of a test block are removed from training so nothing
//! within the forecast horizon leaks across the split.

use crate::almon::AlmonMap;
use crate::calendar::Horizon;
use crate::dataset::MixedFrequencyDataset;
use crate::evaluation::{EvalError, QuantileScorePanel, WeightScheme};
use crate::solver::{fit_joint, ConstraintMode, QuantileGrid, SolverError};
use ndarray::Array2;
use rayon::prelude::*;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("need at least 2 folds, got {0}")]
    BadFolds(usize),
    #[error("T = {t} is too small for {n_folds} folds with guard {h_guard}; need T >= {min_t}")]
    TooSmall {
        t: usize,
        n_folds: usize,
        h_guard: usize,
        min_t: usize,
    },
    #[error("alpha grid is empty or contains invalid values")]
    BadAlphaGrid,
    #[error("fold {fold} fit failed at alpha = {alpha}: {source}")]
    FoldFitFailed {
        fold: usize,
        alpha: f64,
        source: SolverError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub test: Range<usize>,
    pub train: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct HvBlockPlan {
    pub folds: Vec<Fold>,
    pub n_folds: usize,
    pub h_guard: usize,
}

/// Contiguous equal-size test blocks (remainder spread over the first
/// blocks), guard of `ceil(h)` periods (1 for nowcasts) on both sides.
pub fn make_plan(t: usize, n_folds: usize, horizon: Horizon) -> Result<HvBlockPlan, TuningError> {
    if n_folds < 2 {
        return Err(TuningError::BadFolds(n_folds));
    }
    let h_guard = horizon.guard_quarters();
    let build = |t: usize| -> Option<Vec<Fold>> {
        if t < n_folds {
            return None;
        }
        let base = t / n_folds;
        let rem = t % n_folds;
        let mut folds = Vec::with_capacity(n_folds);
        let mut start = 0usize;
        for f in 0..n_folds {
            let size = base + usize::from(f < rem);
            let test = start..start + size;
            let train: Vec<usize> = (0..t)
                .filter(|&i| {
                    (i as i64) < test.start as i64 - h_guard as i64
                        || i as i64 > (test.end - 1 + h_guard) as i64
                })
                .collect();
            if train.is_empty() {
                return None;
            }
            folds.push(Fold { test, train });
            start += size;
        }
        Some(folds)
    };
    match build(t) {
        Some(folds) => Ok(HvBlockPlan {
            folds,
            n_folds,
            h_guard,
        }),
        None => {
            let min_t = (n_folds.max(2)..)
                .find(|&cand| build(cand).is_some())
                .expect("some T is large enough");
            Err(TuningError::TooSmall {
                t,
                n_folds,
                h_guard,
                min_t,
            })
        }
    }
}

/// Spec-default search grid: 0 through 1 in tenths, then 1.25, 1.5, 2.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    grid.extend([1.25, 1.5, 2.0]);
    grid
}

#[derive(Debug, Clone)]
pub struct AlphaSelection {
    pub grid: Vec<f64>,
    /// Mean out-of-fold loss per alpha.
    pub cv_scores: Vec<f64>,
    pub chosen_alpha: f64,
    /// fold x alpha losses, kept for audit.
    pub per_fold: Array2<f64>,
}

impl AlphaSelection {
    /// `fold,alpha,loss` audit rows.
    pub fn audit_csv(&self) -> String {
        let mut out = String::from("fold,alpha,loss\n");
        for f in 0..self.per_fold.nrows() {
            for (a, alpha) in self.grid.iter().enumerate() {
                out.push_str(&format!("{f},{alpha},{}\n", self.per_fold[[f, a]]));
            }
        }
        out
    }
}

/// Cross-validate the adaptive tightness: fit on each fold's training rows,
/// score the held-out block with the requested qwCRPS scheme, average across
/// folds, and return the minimiser (ties to the smallest alpha).
pub fn select_alpha(
    dataset: &MixedFrequencyDataset,
    maps: &[Option<AlmonMap>],
    grid: &QuantileGrid,
    alpha_grid: &[f64],
    plan: &HvBlockPlan,
    loss: WeightScheme,
) -> Result<AlphaSelection, TuningError> {
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(TuningError::BadAlphaGrid);
    }
    let mut alphas = alpha_grid.to_vec();
    alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite alphas"));

    let jobs: Vec<(usize, usize)> = (0..plan.folds.len())
        .flat_map(|f| (0..alphas.len()).map(move |a| (f, a)))
        .collect();
    let results: Vec<Result<f64, TuningError>> = jobs
        .par_iter()
        .map(|&(f, a)| {
            let fold = &plan.folds[f];
            let alpha = alphas[a];
            let train = dataset.subset(&fold.train);
            let fit = fit_joint(&train, maps, grid, ConstraintMode::Adaptive(alpha)).map_err(
                |source| TuningError::FoldFitFailed {
                    fold: f,
                    alpha,
                    source,
                },
            )?;
            let test_rows: Vec<usize> = fold.test.clone().collect();
            let test = dataset.subset(&test_rows);
            let preds = fit.predict_panel(&test)?;
            let y: Vec<f64> = test.target.to_vec();
            let panel = QuantileScorePanel::from_predictions(&y, &preds, grid, "cv")?;
            let series = panel.qwcrps_series(loss);
            Ok(series.iter().sum::<f64>() / series.len() as f64)
        })
        .collect();

    let mut per_fold = Array2::zeros((plan.folds.len(), alphas.len()));
    for (&(f, a), res) in jobs.iter().zip(results) {
        per_fold[[f, a]] = res?;
    }
    let cv_scores: Vec<f64> = (0..alphas.len())
        .map(|a| per_fold.column(a).iter().sum::<f64>() / plan.folds.len() as f64)
        .collect();
    let mut chosen = 0usize;
    for a in 1..alphas.len() {
        if cv_scores[a] < cv_scores[chosen] {
            chosen = a;
        }
    }
    Ok(AlphaSelection {
        chosen_alpha: alphas[chosen],
        grid: alphas,
        cv_scores,
        per_fold,
    })
}

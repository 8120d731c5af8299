//! Joint multi-quantile regression as a sparse linear program.
//!
//! The decision variables are the successive quantile-coefficient differences
//! split into signs, `v+_{j,q} - v-_{j,q}`, plus signed residuals
//! `u+_{t,q} - u-_{t,q}`. Coefficients are cumulative:
//! `delta_q = sum_{r<=q} v_r`. The objective is the tick loss
//! `sum_q sum_t [tau_q u+_{t,q} + (1-tau_q) u-_{t,q}]`; non-crossing modes add
//! one inequality per adjacent quantile pair, either the unit-hull form
//! (`v_{0,q} >= sum_j v-_{j,q}`) or its adaptive relaxation with tightness
//! `alpha` built from the min-max scaling statistics.

mod lp_text;
pub mod simplex;

pub use lp_text::lp_text;

use crate::almon::{AlmonError, AlmonMap};
use crate::dataset::{minmax_fit_apply, DataError, MixedFrequencyDataset, ScalingMap};
use ndarray::{Array1, Array2};
use simplex::{solve_standard_form, CscMatrix, SimplexError, SimplexOptions, SimplexStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("constraints require >= 2 quantiles")]
    GridTooShort,
    #[error("alpha must be non-negative and finite, got {0}")]
    BadAlpha(f64),
    #[error("quantile grid must be strictly increasing inside (0,1)")]
    BadGrid,
    #[error("design intercept column must be identically 1 at index 0")]
    MissingIntercept,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("internal solver error: {0}")]
    Internal(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Almon(#[from] AlmonError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Ordered quantile levels in (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid {
    taus: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(taus: Vec<f64>) -> Result<Self, SolverError> {
        if taus.is_empty()
            || taus.iter().any(|t| !t.is_finite() || *t <= 0.0 || *t >= 1.0)
            || taus.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(SolverError::BadGrid);
        }
        Ok(QuantileGrid { taus })
    }

    /// Eleven levels: every tenth quantile plus the 25th and 75th.
    pub fn deciles_with_quartiles() -> Self {
        QuantileGrid {
            taus: vec![0.1, 0.2, 0.25, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9],
        }
    }

    pub fn single(tau: f64) -> Result<Self, SolverError> {
        QuantileGrid::new(vec![tau])
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Tick (pinball) loss `rho_tau(u) = u (tau - I(u < 0))`; the single loss
/// definition shared by the LP objective and the quantile score.
pub fn pinball_loss(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

/// Cross-quantile constraint regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintMode {
    /// No coupling; the joint program separates across quantiles.
    Plain,
    /// Unit-hull non-crossing constraints.
    Bondell,
    /// Adaptive non-crossing constraints with tightness `alpha`.
    Adaptive(f64),
}

impl ConstraintMode {
    pub fn alpha(&self) -> Option<f64> {
        match self {
            ConstraintMode::Adaptive(a) => Some(*a),
            _ => None,
        }
    }
}

/// Semantic name of an LP column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarName {
    /// Positive part of the coefficient difference for regressor `j`,
    /// quantile index `q`.
    UpsilonPos { j: usize, q: usize },
    UpsilonNeg { j: usize, q: usize },
    /// Positive residual part for observation `t`, quantile `q`.
    ResidPos { t: usize, q: usize },
    ResidNeg { t: usize, q: usize },
}

impl std::fmt::Display for VarName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarName::UpsilonPos { j, q } => write!(f, "vp_{j}_{q}"),
            VarName::UpsilonNeg { j, q } => write!(f, "vn_{j}_{q}"),
            VarName::ResidPos { t, q } => write!(f, "up_{t}_{q}"),
            VarName::ResidNeg { t, q } => write!(f, "un_{t}_{q}"),
        }
    }
}

/// Sparse standard-form program for one joint fit. Rows `0..n_eq` are the
/// residual-definition equalities (one per observation x quantile), rows
/// `n_eq..` are non-crossing inequalities with left-hand side >= 0.
#[derive(Debug, Clone)]
pub struct LpProblem {
    n_obs: usize,
    n_coef: usize,
    columns: Vec<Vec<(usize, f64)>>,
    costs: Vec<f64>,
    eq_rhs: Vec<f64>,
    n_ineq: usize,
    catalog: Vec<VarName>,
    grid: QuantileGrid,
    scaling: ScalingMap,
    design: Array2<f64>,
    y: Array1<f64>,
    alpha: Option<f64>,
}

impl LpProblem {
    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    pub fn catalog(&self) -> &[VarName] {
        &self.catalog
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    /// Dense coefficients of inequality row `i` over the structural columns.
    pub fn inequality_row(&self, i: usize) -> Vec<f64> {
        let row = self.n_eq() + i;
        let mut out = vec![0.0; self.n_cols()];
        for (j, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                if r == row {
                    out[j] = v;
                }
            }
        }
        out
    }

    /// Structural invariants: full catalog, `T*Q` equalities, `0` or `Q-1`
    /// inequalities.
    pub fn validate(&self) -> Result<(), SolverError> {
        let q = self.grid.len();
        if self.catalog.len() != self.n_cols() {
            return Err(SolverError::Internal("catalog incomplete".into()));
        }
        if self.n_eq() != self.n_obs * q {
            return Err(SolverError::Internal("wrong equality count".into()));
        }
        if self.n_ineq != 0 && self.n_ineq != q - 1 {
            return Err(SolverError::Internal("wrong inequality count".into()));
        }
        Ok(())
    }

    /// Standard form `min c'x : Ax = b, x >= 0` with slack columns appended
    /// for the inequality rows.
    pub fn to_standard_form(&self) -> (CscMatrix, Vec<f64>, Vec<f64>) {
        let m = self.n_eq() + self.n_ineq;
        let mut cols = self.columns.clone();
        let mut costs = self.costs.clone();
        for i in 0..self.n_ineq {
            cols.push(vec![(self.n_eq() + i, -1.0)]);
            costs.push(0.0);
        }
        let mut b = self.eq_rhs.clone();
        b.extend(std::iter::repeat(0.0).take(self.n_ineq));
        (CscMatrix::from_columns(m, &cols), b, costs)
    }
}

/// Column index helpers for the fixed layout: all upsilon pairs (by quantile,
/// then regressor), then all residual pairs (by quantile, then observation).
fn up_col(n_coef: usize, j: usize, q: usize) -> usize {
    2 * (q * n_coef + j)
}
fn un_col(n_coef: usize, j: usize, q: usize) -> usize {
    2 * (q * n_coef + j) + 1
}
fn rp_col(n_coef: usize, n_qs: usize, t_rows: usize, t: usize, q: usize) -> usize {
    2 * n_coef * n_qs + 2 * (q * t_rows + t)
}

/// Formulate the joint program on an already min-max-scaled design with the
/// intercept in column 0.
pub fn assemble_lp(
    design: &Array2<f64>,
    y: &Array1<f64>,
    grid: &QuantileGrid,
    mode: ConstraintMode,
    scaling: &ScalingMap,
) -> Result<LpProblem, SolverError> {
    let t_rows = design.nrows();
    let n_coef = design.ncols();
    let n_qs = grid.len();
    if y.len() != t_rows {
        return Err(SolverError::Dimension(format!(
            "design has {t_rows} rows, y has {}",
            y.len()
        )));
    }
    if scaling.len() != n_coef {
        return Err(SolverError::Dimension(format!(
            "design has {n_coef} columns, scaling map has {}",
            scaling.len()
        )));
    }
    if design.column(0).iter().any(|&v| v != 1.0) {
        return Err(SolverError::MissingIntercept);
    }
    let constrained = !matches!(mode, ConstraintMode::Plain);
    if constrained && n_qs < 2 {
        return Err(SolverError::GridTooShort);
    }
    let alpha = match mode {
        ConstraintMode::Adaptive(a) if !(a.is_finite() && a >= 0.0) => {
            return Err(SolverError::BadAlpha(a))
        }
        ConstraintMode::Adaptive(a) => Some(a),
        ConstraintMode::Bondell => Some(1.0),
        ConstraintMode::Plain => None,
    };

    let n_eq = t_rows * n_qs;
    let n_ineq = if constrained { n_qs - 1 } else { 0 };
    let n_cols = 2 * n_coef * n_qs + 2 * t_rows * n_qs;
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_cols];
    let mut costs = vec![0.0; n_cols];
    let mut catalog = Vec::with_capacity(n_cols);

    for q in 0..n_qs {
        for j in 0..n_coef {
            catalog.push(VarName::UpsilonPos { j, q });
            catalog.push(VarName::UpsilonNeg { j, q });
        }
    }
    for q in 0..n_qs {
        for t in 0..t_rows {
            catalog.push(VarName::ResidPos { t, q });
            catalog.push(VarName::ResidNeg { t, q });
        }
    }

    // Upsilon columns: a difference at quantile r feeds every equality row
    // with q >= r (coefficients are cumulative sums of differences), plus the
    // non-crossing row for r >= 1.
    for r in 0..n_qs {
        for j in 0..n_coef {
            let plus = up_col(n_coef, j, r);
            let minus = un_col(n_coef, j, r);
            for q in r..n_qs {
                for t in 0..t_rows {
                    let z = design[[t, j]];
                    if z != 0.0 {
                        let row = q * t_rows + t;
                        columns[plus].push((row, z));
                        columns[minus].push((row, -z));
                    }
                }
            }
            if constrained && r >= 1 {
                let row = n_eq + r - 1;
                let (cp, cn) = match mode {
                    ConstraintMode::Plain => unreachable!(),
                    ConstraintMode::Bondell => {
                        if j == 0 {
                            (1.0, -1.0)
                        } else {
                            (0.0, -1.0)
                        }
                    }
                    ConstraintMode::Adaptive(a) => {
                        if j == 0 {
                            (1.0, -1.0)
                        } else {
                            let zbar = scaling.scaled_mean(j);
                            let zmin = scaling.scaled_min(j);
                            let zmax = scaling.scaled_max(j);
                            (
                                zbar - a * (zbar - zmin),
                                -(zbar + a * (zmax - zbar)),
                            )
                        }
                    }
                };
                if cp != 0.0 {
                    columns[plus].push((row, cp));
                }
                if cn != 0.0 {
                    columns[minus].push((row, cn));
                }
            }
        }
    }

    // Residual columns and the tick-loss objective.
    for q in 0..n_qs {
        let tau = grid.taus()[q];
        for t in 0..t_rows {
            let plus = rp_col(n_coef, n_qs, t_rows, t, q);
            let row = q * t_rows + t;
            columns[plus].push((row, 1.0));
            columns[plus + 1].push((row, -1.0));
            costs[plus] = tau;
            costs[plus + 1] = 1.0 - tau;
        }
    }

    let mut eq_rhs = Vec::with_capacity(n_eq);
    for _ in 0..n_qs {
        eq_rhs.extend(y.iter().copied());
    }

    let problem = LpProblem {
        n_obs: t_rows,
        n_coef,
        columns,
        costs,
        eq_rhs,
        n_ineq,
        catalog,
        grid: grid.clone(),
        scaling: scaling.clone(),
        design: design.clone(),
        y: y.clone(),
        alpha,
    };
    problem.validate()?;
    Ok(problem)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    IterationLimit,
    Infeasible,
}

/// Where each design column came from, kept so fits can rebuild designs for
/// new rows and export lag surfaces.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub id: String,
    pub cols: std::ops::Range<usize>,
    pub map: Option<AlmonMap>,
    pub m_lags: usize,
}

#[derive(Debug, Clone)]
pub struct DesignLayout {
    pub ar_lags: usize,
    pub n_cols: usize,
    pub blocks: Vec<BlockLayout>,
}

impl DesignLayout {
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["const".to_string()];
        for a in 1..=self.ar_lags {
            names.push(format!("y_lag{a}"));
        }
        for block in &self.blocks {
            match &block.map {
                Some(map) => {
                    for k in 0..map.n_params() {
                        names.push(format!("{}_poly{k}", block.id));
                    }
                }
                None => {
                    for m in 1..=block.m_lags {
                        names.push(format!("{}_lag{m}", block.id));
                    }
                }
            }
        }
        names
    }
}

/// Assemble the (unscaled) design `z_t = (x_t, Phi w_t')` from a panel, using
/// each variable's Almon transform where present and raw lags otherwise.
pub fn build_design(
    dataset: &MixedFrequencyDataset,
    maps: &[Option<AlmonMap>],
) -> Result<(Array2<f64>, DesignLayout), SolverError> {
    if maps.len() != dataset.high_freq.len() {
        return Err(SolverError::Dimension(format!(
            "got {} Almon maps for {} high-frequency blocks",
            maps.len(),
            dataset.high_freq.len()
        )));
    }
    let t = dataset.rows();
    let low = dataset.low_freq.ncols();
    let mut blocks = Vec::new();
    let mut n_cols = low;
    for (block, map) in dataset.high_freq.iter().zip(maps) {
        if let Some(map) = map {
            if map.lags() != block.lags.ncols() {
                return Err(SolverError::Dimension(format!(
                    "Almon map for `{}` has {} lags, block has {}",
                    block.id,
                    map.lags(),
                    block.lags.ncols()
                )));
            }
        }
        let width = match map {
            Some(map) => map.n_params(),
            None => block.lags.ncols(),
        };
        blocks.push(BlockLayout {
            id: block.id.clone(),
            cols: n_cols..n_cols + width,
            map: map.clone(),
            m_lags: block.lags.ncols(),
        });
        n_cols += width;
    }
    let mut design = Array2::zeros((t, n_cols));
    design
        .slice_mut(ndarray::s![.., ..low])
        .assign(&dataset.low_freq);
    for (block, layout) in dataset.high_freq.iter().zip(&blocks) {
        let cols = layout.cols.clone();
        match &layout.map {
            Some(map) => {
                let transformed = block.lags.dot(&map.regressor_transform());
                design.slice_mut(ndarray::s![.., cols]).assign(&transformed);
            }
            None => {
                design.slice_mut(ndarray::s![.., cols]).assign(&block.lags);
            }
        }
    }
    Ok((
        design,
        DesignLayout {
            ar_lags: dataset.ar_lags,
            n_cols,
            blocks,
        },
    ))
}

/// Joint coefficient matrix on the scaled design plus everything needed to
/// predict and audit the fit.
#[derive(Debug, Clone)]
pub struct QuantilePanelFit {
    /// (K+1) x Q coefficients on the scaled design.
    pub delta: Array2<f64>,
    /// (K+1) x Q successive differences; `delta_q = sum_{r<=q} upsilon_r`.
    pub upsilon: Array2<f64>,
    pub alpha: Option<f64>,
    pub objective_value: f64,
    pub scaling: ScalingMap,
    pub grid: QuantileGrid,
    pub status: SolverStatus,
    pub layout: Option<DesignLayout>,
    pub iterations: usize,
}

impl QuantilePanelFit {
    /// Predicted quantiles for unscaled design rows; outputs are reported raw
    /// (crossing is possible out of sample).
    pub fn predict(&self, new_rows: &Array2<f64>) -> Result<Array2<f64>, SolverError> {
        let scaled = self.scaling.apply(new_rows)?;
        Ok(scaled.dot(&self.delta))
    }

    /// Predicted quantiles for every row of a panel, using the stored layout.
    pub fn predict_panel(&self, dataset: &MixedFrequencyDataset) -> Result<Array2<f64>, SolverError> {
        let layout = self
            .layout
            .as_ref()
            .ok_or_else(|| SolverError::Internal("fit carries no design layout".into()))?;
        let maps: Vec<Option<AlmonMap>> = layout.blocks.iter().map(|b| b.map.clone()).collect();
        let (design, _) = build_design(dataset, &maps)?;
        self.predict(&design)
    }

    /// Tick loss of this fit on (scaled design, y), accumulated per quantile.
    pub fn tick_loss_by_quantile(&self, scaled: &Array2<f64>, y: &Array1<f64>) -> Vec<f64> {
        let fitted = scaled.dot(&self.delta);
        self.grid
            .taus()
            .iter()
            .enumerate()
            .map(|(q, &tau)| {
                y.iter()
                    .enumerate()
                    .map(|(t, &yt)| pinball_loss(yt - fitted[[t, q]], tau))
                    .sum()
            })
            .collect()
    }
}

/// Default iteration cap, 50 per LP column.
pub fn default_max_iter(problem: &LpProblem) -> usize {
    50 * (problem.n_cols() + problem.n_ineq())
}

/// Solve an assembled program. Deterministic: identical problems give
/// bit-identical fits.
pub fn solve(problem: &LpProblem, tol: f64, max_iter: usize) -> Result<QuantilePanelFit, SolverError> {
    problem.validate()?;
    let (a, b, c) = problem.to_standard_form();
    let opts = SimplexOptions {
        tol,
        max_iter,
        ..SimplexOptions::default()
    };
    let sol = solve_standard_form(&a, &b, &c, &opts)?;
    let status = match sol.status {
        SimplexStatus::Optimal => SolverStatus::Optimal,
        SimplexStatus::IterationLimit => SolverStatus::IterationLimit,
        SimplexStatus::Infeasible => {
            return Err(SolverError::Internal(
                "simplex reported an infeasible quantile program; these programs always admit \
                 the zero-coefficient point"
                    .into(),
            ))
        }
    };

    let n_coef = problem.n_coef;
    let n_qs = problem.grid.len();
    let mut upsilon = Array2::zeros((n_coef, n_qs));
    for q in 0..n_qs {
        for j in 0..n_coef {
            upsilon[[j, q]] = sol.x[up_col(n_coef, j, q)] - sol.x[un_col(n_coef, j, q)];
        }
    }
    let mut delta = Array2::zeros((n_coef, n_qs));
    for j in 0..n_coef {
        let mut acc = 0.0;
        for q in 0..n_qs {
            acc += upsilon[[j, q]];
            delta[[j, q]] = acc;
        }
    }

    let fit = QuantilePanelFit {
        delta,
        upsilon,
        alpha: problem.alpha,
        objective_value: sol.objective,
        scaling: problem.scaling.clone(),
        grid: problem.grid.clone(),
        status,
        layout: None,
        iterations: sol.iterations,
    };

    if status == SolverStatus::Optimal {
        // Residual feasibility and the objective identity are hard guarantees
        // of a vertex solution; violations mean the factorisation drifted.
        let recomputed: f64 = fit
            .tick_loss_by_quantile(&problem.design, &problem.y)
            .iter()
            .sum();
        let rel = (recomputed - sol.objective).abs() / (1.0 + sol.objective.abs());
        if rel > 1e-6 {
            return Err(SolverError::Internal(format!(
                "objective mismatch: lp {} vs recomputed tick loss {recomputed}",
                sol.objective
            )));
        }
    }
    Ok(fit)
}

pub fn solve_default(problem: &LpProblem) -> Result<QuantilePanelFit, SolverError> {
    solve(problem, 1e-9, default_max_iter(problem))
}

/// Build the design from a panel, scale it, assemble and solve the joint
/// program. With a single quantile there are no adjacent pairs to couple, so
/// constrained modes degenerate to the plain program.
pub fn fit_joint(
    dataset: &MixedFrequencyDataset,
    maps: &[Option<AlmonMap>],
    grid: &QuantileGrid,
    mode: ConstraintMode,
) -> Result<QuantilePanelFit, SolverError> {
    let (design, layout) = build_design(dataset, maps)?;
    let (scaled, scaling) = minmax_fit_apply(&design)?;
    let mode = if grid.len() == 1 {
        ConstraintMode::Plain
    } else {
        mode
    };
    let problem = assemble_lp(&scaled, &dataset.target, grid, mode, &scaling)?;
    let mut fit = solve_default(&problem)?;
    fit.layout = Some(layout);
    Ok(fit)
}

/// Fit each quantile as its own single-quantile program (the UMIDAS-QR /
/// plain-QR baselines). Fitted values match the joint plain mode; the LPs are
/// just much smaller.
pub fn fit_independent(
    dataset: &MixedFrequencyDataset,
    maps: &[Option<AlmonMap>],
    grid: &QuantileGrid,
) -> Result<QuantilePanelFit, SolverError> {
    let (design, layout) = build_design(dataset, maps)?;
    let (scaled, scaling) = minmax_fit_apply(&design)?;
    let n_coef = scaled.ncols();
    let mut delta = Array2::zeros((n_coef, grid.len()));
    let mut objective = 0.0;
    let mut status = SolverStatus::Optimal;
    let mut iterations = 0;
    for (q, &tau) in grid.taus().iter().enumerate() {
        let single = QuantileGrid::single(tau)?;
        let problem = assemble_lp(&scaled, &dataset.target, &single, ConstraintMode::Plain, &scaling)?;
        let fit = solve_default(&problem)?;
        if fit.status != SolverStatus::Optimal {
            status = fit.status;
        }
        objective += fit.objective_value;
        iterations += fit.iterations;
        for j in 0..n_coef {
            delta[[j, q]] = fit.delta[[j, 0]];
        }
    }
    let mut upsilon = Array2::zeros((n_coef, grid.len()));
    for j in 0..n_coef {
        for q in 0..grid.len() {
            upsilon[[j, q]] = if q == 0 {
                delta[[j, 0]]
            } else {
                delta[[j, q]] - delta[[j, q - 1]]
            };
        }
    }
    Ok(QuantilePanelFit {
        delta,
        upsilon,
        alpha: None,
        objective_value: objective,
        scaling,
        grid: grid.clone(),
        status,
        layout: Some(layout),
        iterations,
    })
}

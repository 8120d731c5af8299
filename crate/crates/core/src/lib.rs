//! Mixed-frequency quantile regression with two-dimensional structure:
//! Almon-restricted high-frequency lag profiles along the lag dimension and
//! adaptive non-crossing constraints along the quantile dimension, estimated
//! jointly as one linear program. The crate also carries the surrounding
//! pipeline — calendar-week alignment of weekly series, panel construction,
//! hv-block cross-validation of the constraint tightness, quantile-weighted
//! CRPS scoring with Diebold-Mariano comparisons, and the expanding-window
//! pseudo-out-of-sample backtest with CSV exports.

pub mod almon;
pub mod backtest;
pub mod calendar;
pub mod config;
pub mod dataset;
pub mod evaluation;
pub mod solver;
pub mod synthetic;
pub mod tuning;

pub use almon::{make_almon_map, AlmonError, AlmonMap, LagProfile};
pub use calendar::Horizon;
pub use dataset::{
    build_panel, minmax_fit_apply, to_calendar_weeks, CalendarWeeklySeries, DataError, Frequency,
    HighFreqSeries, HighFreqSpec, MixedFrequencyDataset, RawSeries, ScalingMap,
};
pub use solver::{
    assemble_lp, build_design, fit_independent, fit_joint, pinball_loss, solve, solve_default,
    ConstraintMode, LpProblem, QuantileGrid, QuantilePanelFit, SolverError, SolverStatus,
};

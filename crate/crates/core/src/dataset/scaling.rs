//! Min-max transform of the design matrix and the stored scaling metadata
//! that the adaptive non-crossing constraints read.

use super::DataError;
use ndarray::Array2;

/// Per-column scaling record. `raw_min`/`raw_max` reproduce the transform on
/// new rows; `scaled_mean` is the training mean on the scaled [0,1] domain
/// (the constraint coefficients' Z-bar).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScale {
    pub raw_min: f64,
    pub raw_max: f64,
    pub scaled_mean: f64,
    pub intercept: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingMap {
    cols: Vec<ColumnScale>,
}

impl ScalingMap {
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn columns(&self) -> &[ColumnScale] {
        &self.cols
    }

    pub fn is_intercept(&self, j: usize) -> bool {
        self.cols[j].intercept
    }

    /// Minimum of the scaled column (0, or 1 for the intercept).
    pub fn scaled_min(&self, j: usize) -> f64 {
        if self.cols[j].intercept {
            1.0
        } else {
            0.0
        }
    }

    /// Maximum of the scaled column (1 by construction).
    pub fn scaled_max(&self, _j: usize) -> f64 {
        1.0
    }

    /// Training mean of the scaled column.
    pub fn scaled_mean(&self, j: usize) -> f64 {
        self.cols[j].scaled_mean
    }

    /// Apply the stored transform; values outside the training range map
    /// outside [0,1].
    pub fn apply(&self, rows: &Array2<f64>) -> Result<Array2<f64>, DataError> {
        if rows.ncols() != self.cols.len() {
            return Err(DataError::ColumnMismatch {
                expected: self.cols.len(),
                got: rows.ncols(),
            });
        }
        let mut out = rows.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if col.intercept {
                continue;
            }
            let span = col.raw_max - col.raw_min;
            for v in out.column_mut(j) {
                *v = (*v - col.raw_min) / span;
            }
        }
        Ok(out)
    }
}

/// Scale every non-intercept column to [0,1]; a constant column equal to 1 is
/// flagged as the intercept and left alone, any other constant column is an
/// error.
pub fn minmax_fit_apply(design: &Array2<f64>) -> Result<(Array2<f64>, ScalingMap), DataError> {
    let t = design.nrows();
    let mut cols = Vec::with_capacity(design.ncols());
    for j in 0..design.ncols() {
        let col = design.column(j);
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in col {
            min = min.min(v);
            max = max.max(v);
        }
        if max == min {
            if min == 1.0 {
                cols.push(ColumnScale {
                    raw_min: 1.0,
                    raw_max: 1.0,
                    scaled_mean: 1.0,
                    intercept: true,
                });
                continue;
            }
            return Err(DataError::ConstantRegressor { col: j });
        }
        let span = max - min;
        let mean = col.iter().map(|&v| (v - min) / span).sum::<f64>() / t as f64;
        cols.push(ColumnScale {
            raw_min: min,
            raw_max: max,
            scaled_mean: mean,
            intercept: false,
        });
    }
    let map = ScalingMap { cols };
    let scaled = map.apply(design)?;
    Ok((scaled, map))
}

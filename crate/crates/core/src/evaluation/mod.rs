//! Scoring of predicted quantile panels: quantile score, quantile-weighted
//! CRPS under four weighting schemes, and Diebold-Mariano comparisons with a
//! Newey-West variance.

mod density;

pub use density::{density_from_quantiles, DensityCurve};

use crate::solver::{pinball_loss, QuantileGrid};
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("tau must lie strictly inside (0,1), got {0}")]
    BadTau(f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("degenerate differential: constant non-zero loss difference")]
    DegenerateDifferential,
    #[error("Diebold-Mariano needs at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
}

/// Quantile score of one observation at one level — the pinball loss
/// `(y - q)(tau - I(y < q))`.
pub fn quantile_score(y: f64, q_pred: f64, tau: f64) -> Result<f64, EvalError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(EvalError::BadTau(tau));
    }
    Ok(pinball_loss(y - q_pred, tau))
}

/// qwCRPS weighting schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    /// omega_1 = 1/Q: the plain average over quantiles.
    Equal,
    /// omega_2 = q(1-q): centre-weighted.
    Center,
    /// omega_3 = (1-q)^2: left tail.
    LeftTail,
    /// omega_4 = q^2: right tail.
    RightTail,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 4] = [
        WeightScheme::Equal,
        WeightScheme::Center,
        WeightScheme::LeftTail,
        WeightScheme::RightTail,
    ];

    pub fn weight(&self, tau: f64) -> f64 {
        match self {
            WeightScheme::Equal => 1.0,
            WeightScheme::Center => tau * (1.0 - tau),
            WeightScheme::LeftTail => (1.0 - tau) * (1.0 - tau),
            WeightScheme::RightTail => tau * tau,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WeightScheme::Equal => "omega1",
            WeightScheme::Center => "omega2",
            WeightScheme::LeftTail => "omega3",
            WeightScheme::RightTail => "omega4",
        }
    }
}

/// Discretised qwCRPS of one observation's quantile scores. The equal scheme
/// divides by Q (it is the average quantile score); the tail and centre
/// schemes are raw weighted sums.
pub fn qwcrps(qs_row: &[f64], grid: &QuantileGrid, scheme: WeightScheme) -> Result<f64, EvalError> {
    if qs_row.len() != grid.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} scores for {} quantiles",
            qs_row.len(),
            grid.len()
        )));
    }
    let total: f64 = qs_row
        .iter()
        .zip(grid.taus())
        .map(|(&qs, &tau)| scheme.weight(tau) * qs)
        .sum();
    Ok(match scheme {
        WeightScheme::Equal => total / grid.len() as f64,
        _ => total,
    })
}

/// Per-observation, per-quantile scores of a prediction panel.
#[derive(Debug, Clone)]
pub struct QuantileScorePanel {
    pub qs: Array2<f64>,
    pub grid: QuantileGrid,
    pub horizon_label: String,
}

impl QuantileScorePanel {
    pub fn from_predictions(
        y: &[f64],
        predictions: &Array2<f64>,
        grid: &QuantileGrid,
        horizon_label: impl Into<String>,
    ) -> Result<Self, EvalError> {
        if predictions.nrows() != y.len() || predictions.ncols() != grid.len() {
            return Err(EvalError::LengthMismatch(format!(
                "predictions are {}x{}, need {}x{}",
                predictions.nrows(),
                predictions.ncols(),
                y.len(),
                grid.len()
            )));
        }
        let mut qs = Array2::zeros((y.len(), grid.len()));
        for (t, &yt) in y.iter().enumerate() {
            for (q, &tau) in grid.taus().iter().enumerate() {
                qs[[t, q]] = quantile_score(yt, predictions[[t, q]], tau)?;
            }
        }
        Ok(QuantileScorePanel {
            qs,
            grid: grid.clone(),
            horizon_label: horizon_label.into(),
        })
    }

    /// Per-observation qwCRPS under one scheme.
    pub fn qwcrps_series(&self, scheme: WeightScheme) -> Vec<f64> {
        (0..self.qs.nrows())
            .map(|t| {
                qwcrps(
                    self.qs.row(t).as_slice().expect("contiguous row"),
                    &self.grid,
                    scheme,
                )
                .expect("shapes validated at construction")
            })
            .collect()
    }
}

/// Per-observation qwCRPS under all four schemes plus their means.
#[derive(Debug, Clone)]
pub struct QwCrpsReport {
    pub per_obs: Array2<f64>,
    pub means: [f64; 4],
    pub sample_label: String,
}

impl QwCrpsReport {
    pub fn from_panel(panel: &QuantileScorePanel, sample_label: impl Into<String>) -> Self {
        let n = panel.qs.nrows();
        let mut per_obs = Array2::zeros((n, 4));
        for (s, scheme) in WeightScheme::ALL.iter().enumerate() {
            for (t, v) in panel.qwcrps_series(*scheme).into_iter().enumerate() {
                per_obs[[t, s]] = v;
            }
        }
        let means = std::array::from_fn(|s| {
            per_obs.column(s).iter().sum::<f64>() / n.max(1) as f64
        });
        QwCrpsReport {
            per_obs,
            means,
            sample_label: sample_label.into(),
        }
    }
}

/// Diebold-Mariano result. Positive statistic: the first (reference) series
/// has the lower loss.
#[derive(Debug, Clone)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub loss_label: String,
    pub hac_lags: usize,
}

/// Two-sided Diebold-Mariano test on loss series, Newey-West variance with
/// Bartlett weights up to `hac_lags`.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], hac_lags: usize) -> Result<DmResult, EvalError> {
    if loss_a.len() != loss_b.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} vs {} losses",
            loss_a.len(),
            loss_b.len()
        )));
    }
    let n = loss_a.len();
    if n < 10 {
        return Err(EvalError::TooShort { min: 10, got: n });
    }
    let d: Vec<f64> = loss_b.iter().zip(loss_a).map(|(b, a)| b - a).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = newey_west_variance(&d, hac_lags);
    if var <= 0.0 {
        if mean == 0.0 {
            return Ok(DmResult {
                statistic: 0.0,
                p_value: 1.0,
                loss_label: String::new(),
                hac_lags,
            });
        }
        return Err(EvalError::DegenerateDifferential);
    }
    let statistic = mean / (var / n as f64).sqrt();
    let p_value = 2.0 * (1.0 - standard_normal_cdf(statistic.abs()));
    Ok(DmResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        loss_label: String::new(),
        hac_lags,
    })
}

/// Long-run variance with Bartlett weights `1 - k/(L+1)`.
pub fn newey_west_variance(d: &[f64], lags: usize) -> f64 {
    let n = d.len();
    let mean = d.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let gamma = |k: usize| -> f64 {
        centered[k..]
            .iter()
            .zip(&centered[..n - k])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut var = gamma(0);
    for k in 1..=lags.min(n - 1) {
        let w = 1.0 - k as f64 / (lags as f64 + 1.0);
        var += 2.0 * w * gamma(k);
    }
    var
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Table stars at the 10/5/1% levels.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.01 {
        "***"
    } else if p_value < 0.05 {
        "**"
    } else if p_value < 0.1 {
        "*"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn quantile_score_branches() {
        assert_eq!(quantile_score(1.0, 1.0, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(quantile_score(1.0, 0.0, 0.9).unwrap(), 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(quantile_score(0.0, 1.0, 0.9).unwrap(), 0.1, epsilon = 1e-15);
        assert!(quantile_score(0.0, 0.0, 0.0).is_err());
        assert!(quantile_score(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn qwcrps_hand_examples() {
        let grid = QuantileGrid::new(vec![0.25, 0.5, 0.75]).unwrap();
        let qs = [1.0, 1.0, 1.0];
        assert_abs_diff_eq!(
            qwcrps(&qs, &grid, WeightScheme::Equal).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            qwcrps(&qs, &grid, WeightScheme::Center).unwrap(),
            0.625,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            qwcrps(&qs, &grid, WeightScheme::LeftTail).unwrap(),
            0.875,
            epsilon = 1e-15
        );
        assert!(qwcrps(&[1.0], &grid, WeightScheme::Equal).is_err());
    }

    #[test]
    fn perfect_forecast_scores_zero() {
        let grid = QuantileGrid::deciles_with_quartiles();
        let y = [2.0, -1.0, 0.5];
        let preds = Array2::from_shape_fn((3, grid.len()), |(t, _)| y[t]);
        let panel = QuantileScorePanel::from_predictions(&y, &preds, &grid, "h").unwrap();
        for scheme in WeightScheme::ALL {
            for v in panel.qwcrps_series(scheme) {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn dm_trivial_cases() {
        let a = vec![1.0; 20];
        let r = dm_test(&a, &a, 2).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        // alternating +1/-1 differential has zero mean
        let base = vec![0.0; 20];
        let alt: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = dm_test(&base, &alt, 0).unwrap();
        assert_eq!(r.statistic, 0.0);

        // constant non-zero differential: zero variance error branch
        let shifted: Vec<f64> = base.iter().map(|v| v + 1.0).collect();
        assert!(matches!(
            dm_test(&base, &shifted, 0),
            Err(EvalError::DegenerateDifferential)
        ));

        assert!(matches!(
            dm_test(&[1.0; 5], &[1.0; 5], 0),
            Err(EvalError::TooShort { .. })
        ));
    }

    #[test]
    fn dm_antisymmetry_is_exact() {
        let a: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64) * 0.1 + 0.2).collect();
        let b: Vec<f64> = (0..40).map(|i| ((i * 17 % 7) as f64) * 0.15 + 0.1).collect();
        let ab = dm_test(&a, &b, 3).unwrap();
        let ba = dm_test(&b, &a, 3).unwrap();
        assert_eq!(ab.statistic.to_bits(), (-ba.statistic).to_bits());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_abs_diff_eq!(standard_normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            standard_normal_cdf(1.959963984540054),
            0.975,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            standard_normal_cdf(-2.326347874040841),
            0.01,
            epsilon = 1e-12
        );
    }

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.5), "");
        assert_eq!(significance_stars(0.09), "*");
        assert_eq!(significance_stars(0.04), "**");
        assert_eq!(significance_stars(0.009), "***");
    }

    proptest! {
        /// Elementwise-larger quantile scores never reduce the qwCRPS.
        #[test]
        fn qwcrps_is_monotone(
            base in proptest::collection::vec(0.0f64..5.0, 11),
            bump in proptest::collection::vec(0.0f64..2.0, 11),
        ) {
            let grid = QuantileGrid::deciles_with_quartiles();
            let larger: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            for scheme in WeightScheme::ALL {
                let lo = qwcrps(&base, &grid, scheme).unwrap();
                let hi = qwcrps(&larger, &grid, scheme).unwrap();
                prop_assert!(hi >= lo - 1e-12);
            }
        }
    }
}

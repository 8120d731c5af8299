//! Almon polynomial lag structure.
//!
//! High-frequency lag coefficients `gamma_1..gamma_M` are approximated by a
//! polynomial of order `p` in the lag index: `gamma_m = sum_i theta_i * m^i`.
//! The deterministic weighting matrix `Phi` has `phi[i, m-1] = m^i`, so a lag
//! block `W` (T x M) enters the regression as `W * Phi' * theta` and the
//! estimation is linear in the `p+1` polynomial coefficients.
//!
//! Endpoint restrictions force the polynomial's value and slope to zero at the
//! longest lag, `B(M) = 0` and `B'(M) = 0`, which removes two parameters. The
//! restricted parameterisation is `theta = N * theta_free` where the columns of
//! the null-space basis `N` satisfy both restrictions exactly: for free index
//! `i >= 2` the column is `theta_0 = (i-1) M^i`, `theta_1 = -i M^(i-1)`,
//! `theta_i = 1`. For `p = 3` this is the analytic pair
//! `(M^2, -2M, 1, 0)` and `(2M^3, -3M^2, 0, 1)`.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlmonError {
    #[error("polynomial order must be below lag count (p = {p}, M = {m})")]
    OrderTooHigh { p: usize, m: usize },
    #[error("restrictions exceed parameters (p = {p} needs p >= 2 for endpoint restrictions)")]
    TooFewParameters { p: usize },
    #[error("restricted parameter vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Deterministic polynomial weighting matrix with optional endpoint
/// restrictions.
#[derive(Debug, Clone)]
pub struct AlmonMap {
    m_lags: usize,
    poly_order: usize,
    restrictions: usize,
    phi: Array2<f64>,
    null_basis: Array2<f64>,
}

/// One quantile's lag coefficient profile, reconstructed from the restricted
/// polynomial parameters.
#[derive(Debug, Clone)]
pub struct LagProfile {
    pub variable: String,
    pub quantile: f64,
    pub gamma: Vec<f64>,
}

/// Build the Almon map for `m_lags` lags and polynomial order `poly_order`.
/// With `restricted`, the two endpoint restrictions are imposed and the free
/// parameter count drops from `p + 1` to `p - 1`.
pub fn make_almon_map(
    m_lags: usize,
    poly_order: usize,
    restricted: bool,
) -> Result<AlmonMap, AlmonError> {
    if poly_order >= m_lags {
        return Err(AlmonError::OrderTooHigh {
            p: poly_order,
            m: m_lags,
        });
    }
    if restricted && poly_order < 2 {
        return Err(AlmonError::TooFewParameters { p: poly_order });
    }
    let p = poly_order;
    let mut phi = Array2::zeros((p + 1, m_lags));
    for i in 0..=p {
        for m in 1..=m_lags {
            phi[[i, m - 1]] = (m as f64).powi(i as i32);
        }
    }
    let restrictions = if restricted { 2 } else { 0 };
    let null_basis = if restricted {
        // Column for free index i: theta_0 = (i-1) M^i, theta_1 = -i M^(i-1),
        // theta_i = 1; satisfies B(M) = 0 and B'(M) = 0 exactly.
        let mf = m_lags as f64;
        let mut basis = Array2::zeros((p + 1, p - 1));
        for (col, i) in (2..=p).enumerate() {
            basis[[0, col]] = (i as f64 - 1.0) * mf.powi(i as i32);
            basis[[1, col]] = -(i as f64) * mf.powi(i as i32 - 1);
            basis[[i, col]] = 1.0;
        }
        basis
    } else {
        Array2::eye(p + 1)
    };
    Ok(AlmonMap {
        m_lags,
        poly_order,
        restrictions,
        phi,
        null_basis,
    })
}

impl AlmonMap {
    pub fn lags(&self) -> usize {
        self.m_lags
    }

    pub fn poly_order(&self) -> usize {
        self.poly_order
    }

    pub fn restricted(&self) -> bool {
        self.restrictions == 2
    }

    /// Number of free parameters, `p + 1 - r`.
    pub fn n_params(&self) -> usize {
        self.poly_order + 1 - self.restrictions
    }

    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    pub fn null_basis(&self) -> &Array2<f64> {
        &self.null_basis
    }

    /// Full polynomial coefficients `theta = N * theta_free`.
    pub fn full_theta(&self, theta_free: &[f64]) -> Result<Array1<f64>, AlmonError> {
        if theta_free.len() != self.n_params() {
            return Err(AlmonError::DimensionMismatch {
                expected: self.n_params(),
                got: theta_free.len(),
            });
        }
        let theta = Array1::from(theta_free.to_vec());
        Ok(self.null_basis.dot(&theta))
    }

    /// The `M x n_params` matrix `Phi' * N` that maps free parameters to lag
    /// profiles; a raw lag block `W` enters the design as `W * transform`.
    pub fn regressor_transform(&self) -> Array2<f64> {
        self.phi.t().dot(&self.null_basis)
    }

    /// Lag profile `gamma_m = sum_i theta_i m^i` for `m = 1..=M`.
    pub fn lag_profile(&self, theta_free: &[f64]) -> Result<Vec<f64>, AlmonError> {
        let full = self.full_theta(theta_free)?;
        Ok(self.phi.t().dot(&full).to_vec())
    }

    /// Cumulative effect of the high-frequency variable, `sum_m gamma_m`.
    pub fn overall_effect(&self, theta_free: &[f64]) -> Result<f64, AlmonError> {
        Ok(self.lag_profile(theta_free)?.iter().sum())
    }

    /// Polynomial value at a (possibly fractional) lag.
    pub fn polynomial_at(&self, theta_free: &[f64], m: f64) -> Result<f64, AlmonError> {
        let full = self.full_theta(theta_free)?;
        Ok(full
            .iter()
            .enumerate()
            .map(|(i, t)| t * m.powi(i as i32))
            .sum())
    }
}

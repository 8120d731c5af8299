//! Fitted-density construction from a quantile vector: monotone cubic
//! interpolation of the quantile function, numerical inversion to a CDF on an
//! even support grid, and a finite-difference pdf.

use crate::solver::QuantileGrid;
use super::EvalError;

/// Density curve on an even support grid. `cdf` is non-decreasing from
/// `tau_1` to `tau_Q`; `pdf` comes from centred differences of the CDF.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub support: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// All input quantiles identical: mass returned as a single bin.
    pub degenerate: bool,
    /// Input quantiles crossed and were sorted before construction.
    pub crossed: bool,
}

impl DensityCurve {
    /// Count of strict local pdf maxima — multimodality shows up as > 1.
    pub fn modes(&self) -> usize {
        let n = self.pdf.len();
        if n < 3 {
            return usize::from(n > 0);
        }
        let mut count = 0;
        for i in 1..n - 1 {
            if self.pdf[i] > self.pdf[i - 1] && self.pdf[i] >= self.pdf[i + 1] {
                count += 1;
            }
        }
        count.max(1)
    }
}

/// Monotone piecewise-cubic (Fritsch-Butland) interpolant through
/// `(xs, ys)`; reproduces linear data exactly.
struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2);
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = ys
            .windows(2)
            .zip(&h)
            .map(|(w, hi)| (w[1] - w[0]) / hi)
            .collect();
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        slopes[0] = endpoint_slope(h[0], h.get(1).copied().unwrap_or(h[0]), d[0], d.get(1).copied().unwrap_or(d[0]));
        let m = n - 2;
        slopes[n - 1] = endpoint_slope(
            h[m],
            if m > 0 { h[m - 1] } else { h[m] },
            d[m],
            if m > 0 { d[m - 1] } else { d[m] },
        );
        MonotoneCubic { xs, ys, slopes }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self
            .xs
            .binary_search_by(|v| v.partial_cmp(&x).expect("finite"))
        {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * (t3 - t2)
    }

    /// Invert the (non-decreasing) interpolant by bisection.
    fn invert(&self, target: f64) -> f64 {
        let n = self.xs.len();
        let mut lo = self.xs[0];
        let mut hi = self.xs[n - 1];
        if target <= self.ys[0] {
            return lo;
        }
        if target >= self.ys[n - 1] {
            return hi;
        }
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    // three-point one-sided estimate, clamped for monotonicity
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if (m / d0).abs() > 3.0 {
        3.0 * d0
    } else {
        m
    }
}

/// Build a density curve from one row of predicted quantiles. Crossing inputs
/// are sorted and flagged; an all-identical vector is returned as a flagged
/// single-bin spike.
pub fn density_from_quantiles(
    q_vec: &[f64],
    grid: &QuantileGrid,
    support_points: usize,
    extend_iqr: f64,
) -> Result<DensityCurve, EvalError> {
    if q_vec.len() != grid.len() {
        return Err(EvalError::LengthMismatch(format!(
            "{} quantiles for a grid of {}",
            q_vec.len(),
            grid.len()
        )));
    }
    let taus = grid.taus();
    let crossed = q_vec.windows(2).any(|w| w[1] < w[0]);
    let mut sorted = q_vec.to_vec();
    if crossed {
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite quantiles"));
    }
    let (tau_lo, tau_hi) = (taus[0], taus[taus.len() - 1]);
    let (q_lo, q_hi) = (sorted[0], sorted[sorted.len() - 1]);

    if q_hi - q_lo <= 0.0 {
        let eps = 1e-9 * (1.0 + q_lo.abs());
        let mass = tau_hi - tau_lo;
        let support = vec![q_lo - eps, q_lo + eps];
        let width = support[1] - support[0];
        return Ok(DensityCurve {
            pdf: vec![mass / width; 2],
            support,
            cdf: vec![tau_lo, tau_hi],
            degenerate: true,
            crossed,
        });
    }

    // Interpolate tau -> quantile; ties in the quantile values get a tiny
    // separation so the interpolant stays invertible.
    let mut qs = sorted.clone();
    let sep = 1e-12 * (q_hi - q_lo);
    for i in 1..qs.len() {
        if qs[i] <= qs[i - 1] {
            qs[i] = qs[i - 1] + sep;
        }
    }
    let interp = MonotoneCubic::new(taus.to_vec(), qs.clone());

    let iqr = interp.eval(0.75f64.clamp(tau_lo, tau_hi)) - interp.eval(0.25f64.clamp(tau_lo, tau_hi));
    let lo = q_lo - extend_iqr * iqr;
    let hi = q_hi + extend_iqr * iqr;
    let n = support_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let support: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    let cdf: Vec<f64> = support
        .iter()
        .map(|&v| {
            if v <= qs[0] {
                tau_lo
            } else if v >= qs[qs.len() - 1] {
                tau_hi
            } else {
                interp.invert(v)
            }
        })
        .collect();
    let mut pdf = vec![0.0; n];
    for i in 0..n {
        let (a, b, span) = if i == 0 {
            (cdf[0], cdf[1], step)
        } else if i == n - 1 {
            (cdf[n - 2], cdf[n - 1], step)
        } else {
            (cdf[i - 1], cdf[i + 1], 2.0 * step)
        };
        pdf[i] = ((b - a) / span).max(0.0);
    }
    Ok(DensityCurve {
        support,
        pdf,
        cdf,
        degenerate: false,
        crossed,
    })
}

//! Seeded synthetic data with NFCI-like structure: a persistent weekly factor
//! whose lags move both the location and the scale of quarterly growth
//! (smooth, quantile-varying lag effects), plus an irrelevant monthly
//! activity series. Weekly reports are dated on the 1st, 8th, 15th and 22nd,
//! so the calendar-week conversion recovers the generated values exactly.

use crate::calendar::{self, QuarterIndex};
use crate::dataset::{Frequency, RawSeries};
use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    /// Target quarters to emit.
    pub quarters: usize,
    pub seed: u64,
    pub start_year: i32,
    /// Weekly factor AR(1) persistence.
    pub persistence: f64,
    /// Scale of the location lag profile.
    pub location_effect: f64,
    /// Strength of the scale (quantile-variation) channel.
    pub vol_effect: f64,
    /// Baseline innovation standard deviation.
    pub noise: f64,
    /// AR(1) coefficient of the target.
    pub ar_coef: f64,
    pub intercept: f64,
    /// Weeks before the end of the target quarter at which the 12-week
    /// signal window closes (0 = the quarter's own last 12 weeks).
    pub signal_lag_weeks: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            quarters: 120,
            seed: 7,
            start_year: 1980,
            persistence: 0.9,
            location_effect: -0.8,
            vol_effect: 1.0,
            noise: 1.5,
            ar_coef: 0.3,
            intercept: 2.0,
            signal_lag_weeks: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub target: RawSeries,
    pub weekly: RawSeries,
    pub monthly: RawSeries,
    /// Location lag profile on the 12 most recent weeks (lag 1 first).
    pub location_profile: Vec<f64>,
    /// Scale-channel lag profile.
    pub vol_profile: Vec<f64>,
}

/// Smooth decaying profile `(M - m)^2`, normalised to unit L1 mass — a
/// restricted Almon polynomial reproduces it exactly.
fn decay_profile(m_lags: usize, power: i32) -> Vec<f64> {
    let raw: Vec<f64> = (1..=m_lags)
        .map(|m| ((m_lags - m) as f64).powi(power))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Signed profile `(M - m)^2 (m - pivot)`, unit L1 mass: recent lags act with
/// the opposite sign of older ones, so a flat within-window average is a poor
/// summary. Also exactly representable by the restricted cubic.
fn signed_profile(m_lags: usize, pivot: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=m_lags)
        .map(|m| ((m_lags - m) as f64).powi(2) * (pivot - m as f64))
        .collect();
    let total: f64 = raw.iter().map(|v| v.abs()).sum();
    raw.iter().map(|v| v / total).collect()
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };

    // one lead-in year so early panel rows have full lag windows
    let lead_quarters = 4usize;
    let total_quarters = spec.quarters + lead_quarters;
    let q0: QuarterIndex = spec.start_year as i64 * 4;
    let first_month = calendar::quarter_first_month(q0 - lead_quarters as i64);
    let n_months = total_quarters * 3;
    let n_weeks = n_months * 4;

    // weekly factor
    let mut factor = Vec::with_capacity(n_weeks);
    let mut f = 0.0;
    for _ in 0..n_weeks {
        f = spec.persistence * f + (1.0 - spec.persistence * spec.persistence).sqrt() * draw();
        factor.push(f);
    }

    // irrelevant monthly activity series
    let mut activity = Vec::with_capacity(n_months);
    let mut g = 0.0;
    for _ in 0..n_months {
        g = 0.8 * g + 0.6 * draw();
        activity.push(g);
    }

    let loc = signed_profile(12, 4.0);
    let vol = decay_profile(12, 1);
    let location_profile: Vec<f64> = loc.iter().map(|v| v * spec.location_effect).collect();

    // quarterly target: lag window ends at the last week of the quarter
    let mut values = Vec::with_capacity(spec.quarters);
    let mut y_prev = spec.intercept / (1.0 - spec.ar_coef);
    for s in 0..spec.quarters {
        let q = q0 + s as i64;
        let end_week =
            (calendar::quarter_last_week(q) - first_month * 4) as usize - spec.signal_lag_weeks;
        let mut location = 0.0;
        let mut driver = 0.0;
        for m in 0..12 {
            let fw = factor[end_week - m];
            location += location_profile[m] * fw;
            driver += vol[m] * fw;
        }
        let sigma = spec.noise * (0.3 + spec.vol_effect / (1.0 + (-driver).exp()));
        let y = spec.intercept + spec.ar_coef * y_prev + location + sigma * draw();
        values.push((calendar::quarter_first_day(q), y));
        y_prev = y;
    }

    let mut weekly_obs = Vec::with_capacity(n_weeks);
    for (i, &v) in factor.iter().enumerate() {
        let month = first_month + (i / 4) as i64;
        let (year, mon) = calendar::year_month(month);
        let day = [1u32, 8, 15, 22][i % 4];
        weekly_obs.push((NaiveDate::from_ymd_opt(year, mon, day).expect("valid date"), v));
    }
    let mut monthly_obs = Vec::with_capacity(n_months);
    for (i, &v) in activity.iter().enumerate() {
        let (year, mon) = calendar::year_month(first_month + i as i64);
        monthly_obs.push((NaiveDate::from_ymd_opt(year, mon, 1).expect("valid date"), v));
    }

    SyntheticData {
        target: RawSeries::new("GDP", Frequency::Quarterly, values).expect("valid target"),
        weekly: RawSeries::new("NFCI", Frequency::Weekly, weekly_obs).expect("valid weekly"),
        monthly: RawSeries::new("IP", Frequency::Monthly, monthly_obs).expect("valid monthly"),
        location_profile,
        vol_profile: vol,
    }
}

impl SyntheticData {
    /// Write the three series as `gdp.csv`, `nfci.csv`, `ip.csv`.
    pub fn write_csvs(&self, dir: impl AsRef<Path>) -> std::io::Result<[PathBuf; 3]> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let paths = [
            dir.join("gdp.csv"),
            dir.join("nfci.csv"),
            dir.join("ip.csv"),
        ];
        std::fs::write(&paths[0], self.target.to_csv_string())?;
        std::fs::write(&paths[1], self.weekly.to_csv_string())?;
        std::fs::write(&paths[2], self.monthly.to_csv_string())?;
        Ok(paths)
    }
}

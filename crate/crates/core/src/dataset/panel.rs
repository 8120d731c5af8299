//! Estimation panel assembly for a given forecast horizon.
//!
//! Everything hangs off a single information-set cutoff: for a target quarter
//! `s` and horizon of `j` weeks, the cutoff is the absolute calendar week
//! `quarter_last_week(s) - j`. Weekly lag `m` is the value at week
//! `cutoff - (m-1)`; monthly lag `m` is the value of the `m`-th most recent
//! month fully completed by the cutoff; AR lags of the target come from the
//! most recent quarters fully completed by the cutoff. Rows with any
//! unavailable lag are dropped.

use super::{CalendarWeeklySeries, DataError, Frequency, RawSeries};
use crate::calendar::{
    self, quarter_label, Horizon, MonthIndex, QuarterIndex, WeekIndex,
};
use ndarray::{Array1, Array2};
use std::collections::BTreeMap;

/// A high-frequency input series: weekly series must already be on the
/// calendar-week grid, monthly series are raw.
#[derive(Debug, Clone)]
pub enum HighFreqSeries {
    Weekly(CalendarWeeklySeries),
    Monthly(RawSeries),
}

impl HighFreqSeries {
    pub fn id(&self) -> &str {
        match self {
            HighFreqSeries::Weekly(s) => s.id(),
            HighFreqSeries::Monthly(s) => s.id(),
        }
    }

    pub fn frequency(&self) -> Frequency {
        match self {
            HighFreqSeries::Weekly(_) => Frequency::Weekly,
            HighFreqSeries::Monthly(_) => Frequency::Monthly,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HighFreqSpec {
    pub series: HighFreqSeries,
    pub lags: usize,
}

/// One variable's lag block in the panel; lag 1 (most recent) comes first.
#[derive(Debug, Clone)]
pub struct HighFreqBlock {
    pub id: String,
    pub frequency: Frequency,
    /// T x M raw lag values.
    pub lags: Array2<f64>,
    /// Native-frequency absolute index (week or month) of every cell.
    pub stamps: Array2<i64>,
}

/// The estimation panel: aligned target plus low- and high-frequency blocks.
#[derive(Debug, Clone)]
pub struct MixedFrequencyDataset {
    pub horizon: Horizon,
    /// y_{t+h} per row.
    pub target: Array1<f64>,
    pub target_quarters: Vec<QuarterIndex>,
    /// Information-set cutoff (absolute calendar week) per row.
    pub cutoff_weeks: Vec<WeekIndex>,
    /// T x (1 + ar_lags): intercept followed by AR lags of the target.
    pub low_freq: Array2<f64>,
    /// Quarter index per AR-lag cell (T x ar_lags).
    pub low_freq_stamps: Array2<i64>,
    pub ar_lags: usize,
    pub high_freq: Vec<HighFreqBlock>,
}

impl MixedFrequencyDataset {
    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn quarter_labels(&self) -> Vec<String> {
        self.target_quarters.iter().map(|&q| quarter_label(q)).collect()
    }

    /// Raw (UMIDAS-style) design: intercept, AR lags, then each variable's
    /// raw lag block.
    pub fn raw_design(&self) -> Array2<f64> {
        let t = self.rows();
        let k = self.low_freq.ncols()
            + self.high_freq.iter().map(|b| b.lags.ncols()).sum::<usize>();
        let mut design = Array2::zeros((t, k));
        design
            .slice_mut(ndarray::s![.., ..self.low_freq.ncols()])
            .assign(&self.low_freq);
        let mut col = self.low_freq.ncols();
        for block in &self.high_freq {
            design
                .slice_mut(ndarray::s![.., col..col + block.lags.ncols()])
                .assign(&block.lags);
            col += block.lags.ncols();
        }
        design
    }

    /// Row subset (panel restricted to `rows`, order preserved).
    pub fn subset(&self, rows: &[usize]) -> MixedFrequencyDataset {
        let pick1 = |v: &Array1<f64>| Array1::from(rows.iter().map(|&r| v[r]).collect::<Vec<_>>());
        let pick2_f = |m: &Array2<f64>| {
            Array2::from_shape_fn((rows.len(), m.ncols()), |(i, j)| m[[rows[i], j]])
        };
        let pick2_i = |m: &Array2<i64>| {
            Array2::from_shape_fn((rows.len(), m.ncols()), |(i, j)| m[[rows[i], j]])
        };
        MixedFrequencyDataset {
            horizon: self.horizon,
            target: pick1(&self.target),
            target_quarters: rows.iter().map(|&r| self.target_quarters[r]).collect(),
            cutoff_weeks: rows.iter().map(|&r| self.cutoff_weeks[r]).collect(),
            low_freq: pick2_f(&self.low_freq),
            low_freq_stamps: pick2_i(&self.low_freq_stamps),
            ar_lags: self.ar_lags,
            high_freq: self
                .high_freq
                .iter()
                .map(|b| HighFreqBlock {
                    id: b.id.clone(),
                    frequency: b.frequency,
                    lags: pick2_f(&b.lags),
                    stamps: pick2_i(&b.stamps),
                })
                .collect(),
        }
    }

    /// Prefix of rows whose target quarter is at most `q`.
    pub fn rows_through_quarter(&self, q: QuarterIndex) -> usize {
        self.target_quarters.partition_point(|&tq| tq <= q)
    }
}

/// Build the estimation panel for one horizon.
pub fn build_panel(
    target: &RawSeries,
    high_freq: &[HighFreqSpec],
    horizon: Horizon,
    ar_lags: usize,
) -> Result<MixedFrequencyDataset, DataError> {
    if target.frequency() != Frequency::Quarterly {
        return Err(DataError::WrongFrequency {
            id: target.id().to_string(),
            expected: Frequency::Quarterly,
            got: target.frequency(),
        });
    }
    // Quarterly observations must be dated to the first day of the quarter.
    let mut y: BTreeMap<QuarterIndex, f64> = BTreeMap::new();
    for &(date, value) in target.observations() {
        if !calendar::is_quarter_start(date) {
            return Err(DataError::NotQuarterStart {
                id: target.id().to_string(),
                date,
            });
        }
        let q = calendar::quarter_of_date(date);
        if y.insert(q, value).is_some() {
            return Err(DataError::DuplicatePeriod {
                id: target.id().to_string(),
                period: "quarterly",
                label: quarter_label(q),
            });
        }
    }

    let mut monthly_maps: Vec<Option<BTreeMap<MonthIndex, f64>>> = Vec::new();
    for spec in high_freq {
        match &spec.series {
            HighFreqSeries::Monthly(s) => {
                if s.frequency() != Frequency::Monthly {
                    return Err(DataError::WrongFrequency {
                        id: s.id().to_string(),
                        expected: Frequency::Monthly,
                        got: s.frequency(),
                    });
                }
                let mut map = BTreeMap::new();
                for &(date, value) in s.observations() {
                    let m = calendar::month_of_date(date);
                    if map.insert(m, value).is_some() {
                        let (year, month) = calendar::year_month(m);
                        return Err(DataError::DuplicatePeriod {
                            id: s.id().to_string(),
                            period: "monthly",
                            label: format!("{year}-{month:02}"),
                        });
                    }
                }
                monthly_maps.push(Some(map));
            }
            HighFreqSeries::Weekly(_) => monthly_maps.push(None),
        }
    }

    let j = horizon.weeks() as i64;
    let mut rows: Vec<(
        QuarterIndex,
        f64,
        WeekIndex,
        Vec<f64>,
        Vec<i64>,
        Vec<Vec<f64>>,
        Vec<Vec<i64>>,
    )> = Vec::new();

    'targets: for (&s, &ys) in &y {
        let cutoff = calendar::quarter_last_week(s) - j;
        let q_avail = calendar::last_complete_quarter(cutoff);
        let m_avail = calendar::last_complete_month(cutoff);

        let mut ar_vals = Vec::with_capacity(ar_lags);
        let mut ar_stamps = Vec::with_capacity(ar_lags);
        for a in 0..ar_lags as i64 {
            let q = q_avail - a;
            match y.get(&q) {
                Some(&v) => {
                    ar_vals.push(v);
                    ar_stamps.push(q);
                }
                None => continue 'targets,
            }
        }

        let mut hf_vals = Vec::with_capacity(high_freq.len());
        let mut hf_stamps = Vec::with_capacity(high_freq.len());
        for (spec, monthly) in high_freq.iter().zip(&monthly_maps) {
            let mut vals = Vec::with_capacity(spec.lags);
            let mut stamps = Vec::with_capacity(spec.lags);
            match (&spec.series, monthly) {
                (HighFreqSeries::Weekly(w), _) => {
                    for m in 0..spec.lags as i64 {
                        let wk = cutoff - m;
                        match w.value_at(wk) {
                            Some(v) => {
                                vals.push(v);
                                stamps.push(wk);
                            }
                            None => continue 'targets,
                        }
                    }
                }
                (HighFreqSeries::Monthly(_), Some(map)) => {
                    for m in 0..spec.lags as i64 {
                        let mo = m_avail - m;
                        match map.get(&mo) {
                            Some(&v) => {
                                vals.push(v);
                                stamps.push(mo);
                            }
                            None => continue 'targets,
                        }
                    }
                }
                (HighFreqSeries::Monthly(_), None) => unreachable!("monthly map built above"),
            }
            hf_vals.push(vals);
            hf_stamps.push(stamps);
        }
        rows.push((s, ys, cutoff, ar_vals, ar_stamps, hf_vals, hf_stamps));
    }

    if rows.is_empty() {
        return Err(DataError::InsufficientHistory {
            first_feasible: first_feasible_target(&y, high_freq, &monthly_maps, j, ar_lags)
                .map(quarter_label)
                .unwrap_or_else(|| "none with the supplied series".to_string()),
        });
    }

    let t = rows.len();
    let mut dataset = MixedFrequencyDataset {
        horizon,
        target: Array1::zeros(t),
        target_quarters: Vec::with_capacity(t),
        cutoff_weeks: Vec::with_capacity(t),
        low_freq: Array2::zeros((t, 1 + ar_lags)),
        low_freq_stamps: Array2::zeros((t, ar_lags)),
        ar_lags,
        high_freq: high_freq
            .iter()
            .map(|spec| HighFreqBlock {
                id: spec.series.id().to_string(),
                frequency: spec.series.frequency(),
                lags: Array2::zeros((t, spec.lags)),
                stamps: Array2::zeros((t, spec.lags)),
            })
            .collect(),
    };
    for (i, (s, ys, cutoff, ar_vals, ar_stamps, hf_vals, hf_stamps)) in rows.into_iter().enumerate()
    {
        dataset.target[i] = ys;
        dataset.target_quarters.push(s);
        dataset.cutoff_weeks.push(cutoff);
        dataset.low_freq[[i, 0]] = 1.0;
        for (a, v) in ar_vals.into_iter().enumerate() {
            dataset.low_freq[[i, 1 + a]] = v;
        }
        for (a, q) in ar_stamps.into_iter().enumerate() {
            dataset.low_freq_stamps[[i, a]] = q;
        }
        for (b, (vals, stamps)) in hf_vals.into_iter().zip(hf_stamps).enumerate() {
            for (m, v) in vals.into_iter().enumerate() {
                dataset.high_freq[b].lags[[i, m]] = v;
            }
            for (m, st) in stamps.into_iter().enumerate() {
                dataset.high_freq[b].stamps[[i, m]] = st;
            }
        }
    }
    Ok(dataset)
}

/// Earliest target quarter whose full lag window lies inside the available
/// history, ignoring the forward availability of y itself. Used for the
/// insufficient-history error message.
fn first_feasible_target(
    y: &BTreeMap<QuarterIndex, f64>,
    high_freq: &[HighFreqSpec],
    monthly_maps: &[Option<BTreeMap<MonthIndex, f64>>],
    j: i64,
    ar_lags: usize,
) -> Option<QuarterIndex> {
    let &y_lo = y.keys().next()?;
    // cutoff(s) = 12 s + 11 - j must satisfy every history lower bound
    let mut min_cutoff = 12 * (y_lo + ar_lags as i64 - 1) + 11;
    for (spec, monthly) in high_freq.iter().zip(monthly_maps) {
        match (&spec.series, monthly) {
            (HighFreqSeries::Weekly(w), _) => {
                let lo = w.first_week()?;
                min_cutoff = min_cutoff.max(lo + spec.lags as i64 - 1);
            }
            (HighFreqSeries::Monthly(_), Some(map)) => {
                let &lo = map.keys().next()?;
                // month (lo + M - 1) must be complete: cutoff >= its last week
                min_cutoff = min_cutoff.max(calendar::month_last_week(lo + spec.lags as i64 - 1));
            }
            _ => unreachable!(),
        }
    }
    // smallest s with 12 s + 11 - j >= min_cutoff
    Some((min_cutoff + j - 11).div_euclid(12) + i64::from((min_cutoff + j - 11).rem_euclid(12) != 0))
}

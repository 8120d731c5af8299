//! Raw series ingestion, calendar-week alignment, panel construction and the
//! min-max transform.

mod panel;
mod scaling;

pub use panel::{
    build_panel, HighFreqBlock, HighFreqSeries, HighFreqSpec, MixedFrequencyDataset,
};
pub use scaling::{minmax_fit_apply, ColumnScale, ScalingMap};

use crate::calendar::{self, MonthIndex, WeekIndex};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty input")]
    EmptyInput,
    #[error("coverage gap: {gap_days} days between {before} and {after} in series `{id}` (max 28)")]
    CoverageGap {
        id: String,
        before: NaiveDate,
        after: NaiveDate,
        gap_days: i64,
    },
    #[error("duplicate date {date} in series `{id}`")]
    DuplicateDate { id: String, date: NaiveDate },
    #[error("non-finite value at {date} in series `{id}`")]
    NonFiniteValue { id: String, date: NaiveDate },
    #[error("{file}:{line}: {message}")]
    Csv {
        file: String,
        line: usize,
        message: String,
    },
    #[error("series `{id}` has frequency {got:?}, expected {expected:?}")]
    WrongFrequency {
        id: String,
        expected: Frequency,
        got: Frequency,
    },
    #[error("horizon must be non-negative")]
    NegativeHorizon,
    #[error("quarterly observation {date} in series `{id}` is not a quarter start (use the first day of the quarter)")]
    NotQuarterStart { id: String, date: NaiveDate },
    #[error("duplicate {period} observation for {label} in series `{id}`")]
    DuplicatePeriod {
        id: String,
        period: &'static str,
        label: String,
    },
    #[error("requested lags exceed available history: no feasible panel row; first feasible target quarter would be {first_feasible}")]
    InsufficientHistory { first_feasible: String },
    #[error("constant regressor in column {col}")]
    ConstantRegressor { col: usize },
    #[error("design has {got} columns, expected {expected}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("month {year}-{month:02} in series `{id}` has {got} weeks, expected 4")]
    IncompleteMonth {
        id: String,
        year: i32,
        month: u32,
        got: usize,
    },
    #[error("months in series `{id}` are not contiguous around {year}-{month:02}")]
    NonContiguousMonths { id: String, year: i32, month: u32 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Quarterly,
    Monthly,
    Weekly,
}

/// A raw time series: strictly increasing dates, finite values.
#[derive(Debug, Clone)]
pub struct RawSeries {
    id: String,
    frequency: Frequency,
    observations: Vec<(NaiveDate, f64)>,
}

impl RawSeries {
    /// Build from unordered observations; sorts by date and validates.
    pub fn new(
        id: impl Into<String>,
        frequency: Frequency,
        mut observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, DataError> {
        let id = id.into();
        observations.sort_by_key(|&(d, _)| d);
        for pair in observations.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(DataError::DuplicateDate {
                    id,
                    date: pair[0].0,
                });
            }
        }
        if let Some(&(date, v)) = observations.iter().find(|&&(_, v)| !v.is_finite()) {
            let _ = v;
            return Err(DataError::NonFiniteValue { id, date });
        }
        Ok(RawSeries {
            id,
            frequency,
            observations,
        })
    }

    /// Read a `date,value` CSV file. The header must be exactly
    /// `date,value`; dates are ISO-8601 `YYYY-MM-DD`; rows may be unsorted.
    pub fn from_csv_path(
        path: impl AsRef<Path>,
        id: impl Into<String>,
        frequency: Frequency,
    ) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| DataError::Csv {
            file: path.display().to_string(),
            line: 0,
            message: format!("cannot open: {e}"),
        })?;
        Self::from_csv_reader(
            std::io::BufReader::new(file),
            &path.display().to_string(),
            id,
            frequency,
        )
    }

    pub fn from_csv_reader(
        reader: impl BufRead,
        file_name: &str,
        id: impl Into<String>,
        frequency: Frequency,
    ) -> Result<Self, DataError> {
        let err = |line: usize, message: String| DataError::Csv {
            file: file_name.to_string(),
            line,
            message,
        };
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((i, Err(e))) => return Err(err(i + 1, e.to_string())),
            None => return Err(err(1, "missing `date,value` header".into())),
        };
        if header.trim_end_matches(['\r', '\n']).trim() != "date,value" {
            return Err(err(1, format!("missing `date,value` header, got `{header}`")));
        }
        let mut observations = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(|e| err(i + 1, e.to_string()))?;
            let line = line.trim_end_matches(['\r', '\n']).trim();
            if line.is_empty() {
                continue;
            }
            let (date, value) = line
                .split_once(',')
                .ok_or_else(|| err(i + 1, format!("expected `date,value` row, got `{line}`")))?;
            let date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d")
                .map_err(|e| err(i + 1, format!("bad date `{date}`: {e}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| err(i + 1, format!("bad value `{value}`: {e}")))?;
            observations.push((date, value));
        }
        RawSeries::new(id, frequency, observations)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Write back in the same `date,value` schema.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date,value\n");
        for (d, v) in &self.observations {
            out.push_str(&format!("{d},{v}\n"));
        }
        out
    }
}

/// One calendar week observation; `week` is 1-based within the month.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeekObs {
    pub year: i32,
    pub month: u32,
    pub week: u8,
    pub value: f64,
}

impl WeekObs {
    pub fn week_index(&self) -> WeekIndex {
        calendar::month_index(self.year, self.month) * 4 + (self.week as i64 - 1)
    }
}

/// Weekly series on the calendar-week grid: exactly four weeks per covered
/// month, months contiguous.
#[derive(Debug, Clone)]
pub struct CalendarWeeklySeries {
    id: String,
    observations: Vec<WeekObs>,
}

impl CalendarWeeklySeries {
    pub fn new(id: impl Into<String>, observations: Vec<WeekObs>) -> Result<Self, DataError> {
        let id = id.into();
        let mut months: Vec<(MonthIndex, usize)> = Vec::new();
        for obs in &observations {
            let m = calendar::month_index(obs.year, obs.month);
            match months.last_mut() {
                Some((last, count)) if *last == m => *count += 1,
                _ => months.push((m, 1)),
            }
        }
        for &(m, count) in &months {
            if count != 4 {
                let (year, month) = calendar::year_month(m);
                return Err(DataError::IncompleteMonth {
                    id,
                    year,
                    month,
                    got: count,
                });
            }
        }
        for pair in months.windows(2) {
            if pair[1].0 != pair[0].0 + 1 {
                let (year, month) = calendar::year_month(pair[1].0);
                return Err(DataError::NonContiguousMonths { id, year, month });
            }
        }
        Ok(CalendarWeeklySeries { id, observations })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn observations(&self) -> &[WeekObs] {
        &self.observations
    }

    pub fn first_week(&self) -> Option<WeekIndex> {
        self.observations.first().map(WeekObs::week_index)
    }

    pub fn last_week(&self) -> Option<WeekIndex> {
        self.observations.last().map(WeekObs::week_index)
    }

    /// Value at an absolute week index, if covered.
    pub fn value_at(&self, w: WeekIndex) -> Option<f64> {
        let first = self.first_week()?;
        let offset = w - first;
        if offset < 0 {
            return None;
        }
        self.observations.get(offset as usize).map(|o| o.value)
    }
}

/// Convert a weekly series reported on arbitrary days into calendar weeks:
/// each report is copied to every day from its date until the next report
/// (the last report carries to the end of its month), then weeks 1-4 of each
/// fully covered month are the means over days 1-7, 8-14, 15-21 and 22-end.
pub fn to_calendar_weeks(s: &RawSeries) -> Result<CalendarWeeklySeries, DataError> {
    if s.frequency != Frequency::Weekly {
        return Err(DataError::WrongFrequency {
            id: s.id.clone(),
            expected: Frequency::Weekly,
            got: s.frequency,
        });
    }
    if s.observations.is_empty() {
        return Err(DataError::EmptyInput);
    }
    for pair in s.observations.windows(2) {
        let gap = pair[1].0.signed_duration_since(pair[0].0).num_days();
        if gap > 28 {
            return Err(DataError::CoverageGap {
                id: s.id.clone(),
                before: pair[0].0,
                after: pair[1].0,
                gap_days: gap,
            });
        }
    }

    let first_day = s.observations[0].0;
    let last_report = s.observations[s.observations.len() - 1].0;
    let coverage_end = {
        use chrono::Datelike;
        let (y, m) = (last_report.year(), last_report.month());
        NaiveDate::from_ymd_opt(y, m, calendar::days_in_month(y, m)).expect("valid month end")
    };

    let mut out = Vec::new();
    let mut month = calendar::month_of_date(first_day);
    let last_month = calendar::month_of_date(coverage_end);
    // index of the report in force; advanced day by day
    let mut cursor = 0usize;
    while month <= last_month {
        let (year, mon) = calendar::year_month(month);
        let n_days = calendar::days_in_month(year, mon);
        // months with uncovered days (the first month when coverage starts
        // mid-month) are absent from the output
        let fully_covered = NaiveDate::from_ymd_opt(year, mon, 1).expect("valid month") >= first_day;
        let mut sums = [0.0f64; 4];
        let mut counts = [0usize; 4];
        for day in 1..=n_days {
            let date = NaiveDate::from_ymd_opt(year, mon, day).expect("valid day");
            if date < first_day {
                continue;
            }
            while cursor + 1 < s.observations.len() && s.observations[cursor + 1].0 <= date {
                cursor += 1;
            }
            let w = calendar::week_of_day(day);
            sums[w] += s.observations[cursor].1;
            counts[w] += 1;
        }
        if fully_covered {
            for (w, (&sum, &count)) in sums.iter().zip(&counts).enumerate() {
                out.push(WeekObs {
                    year,
                    month: mon,
                    week: w as u8 + 1,
                    value: sum / count as f64,
                });
            }
        }
        month += 1;
    }
    CalendarWeeklySeries::new(s.id.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn weekly(obs: Vec<(NaiveDate, f64)>) -> RawSeries {
        RawSeries::new("w", Frequency::Weekly, obs).unwrap()
    }

    /// Independent oracle: enumerate the daily step function and average the
    /// four windows by hand.
    fn daily_oracle(reports: &[(u32, f64)], n_days: u32) -> [f64; 4] {
        let mut sums = [0.0; 4];
        let mut counts = [0usize; 4];
        for day in 1..=n_days {
            let value = reports
                .iter()
                .rev()
                .find(|&&(rd, _)| rd <= day)
                .map(|&(_, v)| v)
                .expect("day covered");
            let w = calendar::week_of_day(day);
            sums[w] += value;
            counts[w] += 1;
        }
        std::array::from_fn(|w| sums[w] / counts[w] as f64)
    }

    #[test]
    fn constant_series_gives_constant_weeks() {
        let s = weekly(vec![
            (d(2020, 1, 1), 2.5),
            (d(2020, 1, 10), 2.5),
            (d(2020, 1, 17), 2.5),
            (d(2020, 1, 24), 2.5),
            (d(2020, 1, 31), 2.5),
        ]);
        let weeks = to_calendar_weeks(&s).unwrap();
        let jan: Vec<_> = weeks
            .observations()
            .iter()
            .filter(|o| o.month == 1)
            .collect();
        assert_eq!(jan.len(), 4);
        for o in jan {
            assert_eq!(o.value, 2.5);
        }
    }

    #[test]
    fn thirty_one_day_month_worked_example() {
        // Reports 1.0 on the 1st and 2.0 on the 15th of a 31-day month. The
        // expected weeks come from the daily-enumeration oracle under the
        // step-function replication rule.
        let s = weekly(vec![(d(2021, 1, 1), 1.0), (d(2021, 1, 15), 2.0)]);
        let weeks = to_calendar_weeks(&s).unwrap();
        let got: Vec<f64> = weeks.observations().iter().map(|o| o.value).collect();
        let expect = daily_oracle(&[(1, 1.0), (15, 2.0)], 31);
        assert_eq!(weeks.observations().len(), 4);
        for (g, e) in got.iter().zip(&expect) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
        assert_eq!(expect[0], 1.0);
        assert_eq!(expect[1], 1.0);
        assert_eq!(expect[3], 2.0);
    }

    #[test]
    fn week_four_window_lengths() {
        // 30-day month: week 4 spans days 22..=30, nine days; 28-day month:
        // seven days. Use a series whose value equals the day of the month so
        // window means pin the window lengths.
        for (year, month, n_days) in [(2021, 4, 30u32), (2021, 2, 28)] {
            let obs: Vec<_> = (1..=n_days)
                .map(|day| (d(year, month, day), day as f64))
                .collect();
            let s = weekly(obs);
            let weeks = to_calendar_weeks(&s).unwrap();
            let w4 = weeks.observations()[3].value;
            let expect: f64 =
                (22..=n_days).map(|x| x as f64).sum::<f64>() / (n_days - 21) as f64;
            assert_abs_diff_eq!(w4, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_and_gap_errors() {
        let empty = RawSeries::new("w", Frequency::Weekly, vec![]).unwrap();
        assert!(matches!(
            to_calendar_weeks(&empty),
            Err(DataError::EmptyInput)
        ));
        let gapped = weekly(vec![(d(2021, 1, 1), 1.0), (d(2021, 2, 5), 2.0)]);
        assert!(matches!(
            to_calendar_weeks(&gapped),
            Err(DataError::CoverageGap { gap_days: 35, .. })
        ));
        // 28 days exactly is allowed
        let ok = weekly(vec![(d(2021, 1, 1), 1.0), (d(2021, 1, 29), 2.0)]);
        assert!(to_calendar_weeks(&ok).is_ok());
        let monthly = RawSeries::new("m", Frequency::Monthly, vec![(d(2021, 1, 1), 1.0)]).unwrap();
        assert!(matches!(
            to_calendar_weeks(&monthly),
            Err(DataError::WrongFrequency { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let csv = "date,value\n2020-04-01,1.5\n2020-01-01,-0.25\n";
        let s = RawSeries::from_csv_reader(csv.as_bytes(), "mem.csv", "x", Frequency::Quarterly)
            .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.observations()[0].0, d(2020, 1, 1)); // sorted internally

        let bad_header = "time,value\n2020-01-01,1\n";
        let err = RawSeries::from_csv_reader(
            bad_header.as_bytes(),
            "bad.csv",
            "x",
            Frequency::Quarterly,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bad.csv"));
        assert!(err.to_string().contains("header"));

        let bad_value = "date,value\n2020-01-01,abc\n";
        let err =
            RawSeries::from_csv_reader(bad_value.as_bytes(), "v.csv", "x", Frequency::Quarterly)
                .unwrap_err();
        assert!(err.to_string().starts_with("v.csv:2"));

        let dup = "date,value\n2020-01-01,1\n2020-01-01,2\n";
        assert!(matches!(
            RawSeries::from_csv_reader(dup.as_bytes(), "d.csv", "x", Frequency::Quarterly),
            Err(DataError::DuplicateDate { .. })
        ));
    }

    #[test]
    fn five_reports_in_a_month_still_four_weeks() {
        let s = weekly(vec![
            (d(2021, 1, 1), 1.0),
            (d(2021, 1, 8), 2.0),
            (d(2021, 1, 15), 3.0),
            (d(2021, 1, 22), 4.0),
            (d(2021, 1, 29), 5.0),
        ]);
        let weeks = to_calendar_weeks(&s).unwrap();
        assert_eq!(weeks.observations().len(), 4);
        // week 4 mixes the 22nd report (7 days) and the 29th report (3 days)
        assert_abs_diff_eq!(
            weeks.observations()[3].value,
            (7.0 * 4.0 + 3.0 * 5.0) / 10.0,
            epsilon = 1e-12
        );
    }

    proptest! {
        /// Every covered month has exactly four weeks, and the conversion is
        /// insensitive to input row order.
        #[test]
        fn four_weeks_per_month_and_order_invariance(
            offsets in proptest::collection::vec(1u64..=14, 3..40),
            start_day in 1u32..=28,
            seed_vals in proptest::collection::vec(-5.0f64..5.0, 40),
        ) {
            let mut date = d(2019, 3, start_day);
            let mut obs = Vec::new();
            for (i, off) in offsets.iter().enumerate() {
                obs.push((date, seed_vals[i % seed_vals.len()]));
                date += chrono::Duration::days(*off as i64);
            }
            let forward = weekly(obs.clone());
            let weeks = to_calendar_weeks(&forward).unwrap();
            let mut by_month = std::collections::BTreeMap::new();
            for o in weeks.observations() {
                *by_month.entry((o.year, o.month)).or_insert(0usize) += 1;
            }
            for (_, count) in by_month {
                prop_assert_eq!(count, 4);
            }
            // permuted input rows produce identical output
            let mut rev = obs;
            rev.reverse();
            let backward = weekly(rev);
            let weeks2 = to_calendar_weeks(&backward).unwrap();
            prop_assert_eq!(weeks.observations(), weeks2.observations());
        }
    }
}

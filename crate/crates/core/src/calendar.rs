//! Calendar arithmetic shared by the dataset and backtest layers.
//!
//! Quarters, months and calendar weeks are addressed by absolute indices so
//! that lag arithmetic is plain integer subtraction:
//!
//! - month index = `year * 12 + (month - 1)`
//! - quarter index = `year * 4 + (quarter - 1)`; quarter `q` spans months
//!   `3q .. 3q + 2`
//! - week index = `month * 4 + (week - 1)` with four calendar weeks per month
//!   (days 1-7, 8-14, 15-21, 22-end), so a quarter spans twelve weeks.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// Absolute month count (`year * 12 + month0`).
pub type MonthIndex = i64;
/// Absolute calendar-week count, four per month.
pub type WeekIndex = i64;
/// Absolute quarter count (`year * 4 + quarter0`).
pub type QuarterIndex = i64;

pub fn month_index(year: i32, month: u32) -> MonthIndex {
    year as i64 * 12 + (month as i64 - 1)
}

pub fn month_of_date(d: NaiveDate) -> MonthIndex {
    month_index(d.year(), d.month())
}

pub fn quarter_of_date(d: NaiveDate) -> QuarterIndex {
    d.year() as i64 * 4 + (d.month0() / 3) as i64
}

/// First month of a quarter.
pub fn quarter_first_month(q: QuarterIndex) -> MonthIndex {
    3 * q
}

/// Last calendar week of a quarter (inclusive).
pub fn quarter_last_week(q: QuarterIndex) -> WeekIndex {
    12 * q + 11
}

/// Last calendar week of a month (inclusive).
pub fn month_last_week(m: MonthIndex) -> WeekIndex {
    4 * m + 3
}

/// Largest quarter whose final week is on or before `w`.
pub fn last_complete_quarter(w: WeekIndex) -> QuarterIndex {
    (w - 11).div_euclid(12)
}

/// Largest month whose final week is on or before `w`.
pub fn last_complete_month(w: WeekIndex) -> MonthIndex {
    (w - 3).div_euclid(4)
}

pub fn year_month(m: MonthIndex) -> (i32, u32) {
    (m.div_euclid(12) as i32, (m.rem_euclid(12) + 1) as u32)
}

pub fn quarter_first_day(q: QuarterIndex) -> NaiveDate {
    let (year, month) = year_month(quarter_first_month(q));
    NaiveDate::from_ymd_opt(year, month, 1).expect("valid quarter start")
}

pub fn quarter_last_day(q: QuarterIndex) -> NaiveDate {
    let (year, month) = year_month(quarter_first_month(q) + 2);
    NaiveDate::from_ymd_opt(year, month, days_in_month(year, month)).expect("valid quarter end")
}

pub fn is_quarter_start(d: NaiveDate) -> bool {
    d.day() == 1 && d.month0() % 3 == 0
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    };
    next.expect("valid month")
        .signed_duration_since(NaiveDate::from_ymd_opt(year, month, 1).expect("valid month"))
        .num_days() as u32
}

/// Calendar week (0-based, 0..=3) containing a day of the month.
pub fn week_of_day(day: u32) -> usize {
    match day {
        1..=7 => 0,
        8..=14 => 1,
        15..=21 => 2,
        _ => 3,
    }
}

/// Label like `2008Q2`.
pub fn quarter_label(q: QuarterIndex) -> String {
    format!("{}Q{}", q.div_euclid(4), q.rem_euclid(4) + 1)
}

pub fn parse_quarter_label(s: &str) -> Option<QuarterIndex> {
    let (year, qtr) = s.split_once(['Q', 'q'])?;
    let year: i64 = year.trim().parse().ok()?;
    let qtr: i64 = qtr.trim().parse().ok()?;
    if !(1..=4).contains(&qtr) {
        return None;
    }
    Some(year * 4 + (qtr - 1))
}

/// Forecast horizon measured in calendar weeks left until the end of the
/// target quarter. Twelve weeks make a quarter, so `h` in quarter units is
/// `weeks / 12`; the paper's nowcast horizons `0.08, 0.17, …, 0.92` map to
/// 1..=11 weeks and `h = 1, 4` map to 12 and 48.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Horizon {
    weeks: u32,
}

impl Horizon {
    pub fn from_weeks(weeks: u32) -> Self {
        Horizon { weeks }
    }

    /// Snap a horizon in quarter units to whole weeks. Negative horizons are
    /// rejected.
    pub fn from_quarters(h: f64) -> Result<Self, String> {
        if !h.is_finite() || h < 0.0 {
            return Err(format!("horizon must be non-negative and finite, got {h}"));
        }
        Ok(Horizon {
            weeks: (h * 12.0).round() as u32,
        })
    }

    pub fn weeks(&self) -> u32 {
        self.weeks
    }

    pub fn quarters(&self) -> f64 {
        self.weeks as f64 / 12.0
    }

    /// Within-quarter horizon (0 < h < 1).
    pub fn is_nowcast(&self) -> bool {
        self.weeks > 0 && self.weeks < 12
    }

    /// Quarters of separation needed between a training target and the
    /// information set: `ceil(h)` for h >= 1, else 1.
    pub fn guard_quarters(&self) -> usize {
        (self.weeks as usize).div_ceil(12).max(1)
    }

    /// Short label used in file names: `1`, `4`, `0.08`, `0.42`, ...
    pub fn label(&self) -> String {
        if self.weeks % 12 == 0 {
            return format!("{}", self.weeks / 12);
        }
        let mut s = format!("{:.2}", self.quarters());
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
        s
    }
}

impl TryFrom<f64> for Horizon {
    type Error = String;
    fn try_from(h: f64) -> Result<Self, String> {
        Horizon::from_quarters(h)
    }
}

impl From<Horizon> for f64 {
    fn from(h: Horizon) -> f64 {
        h.quarters()
    }
}

impl std::fmt::Display for Horizon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

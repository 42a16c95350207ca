//! Year-month calendar arithmetic.
//!
//! All series in the engine are monthly; daily sources are averaged to
//! calendar months before ingestion, so a month index is the only date
//! granularity we ever need.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month, stored as a flat month count so that arithmetic and
/// ordering are plain integer operations.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth(i32);

impl YearMonth {
    /// Builds a year-month; `month` is 1-based.
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month {month} out of range 1..=12")));
        }
        Ok(YearMonth(year * 12 + month as i32 - 1))
    }

    /// Parses a packed `YYYYMM` integer, e.g. `201502`.
    pub fn from_yyyymm(v: i32) -> Result<Self> {
        let year = v / 100;
        let month = (v % 100) as u32;
        Self::new(year, month)
    }

    /// Packs into a `YYYYMM` integer.
    pub fn yyyymm(self) -> i32 {
        self.year() * 100 + self.month() as i32
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(12)
    }

    /// 1-based month.
    pub fn month(self) -> u32 {
        (self.0.rem_euclid(12) + 1) as u32
    }

    pub fn add_months(self, n: i32) -> Self {
        YearMonth(self.0 + n)
    }

    pub fn next(self) -> Self {
        self.add_months(1)
    }

    pub fn prev(self) -> Self {
        self.add_months(-1)
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(self, other: YearMonth) -> i32 {
        self.0 - other.0
    }

    /// True for March, June, September, December (survey event months).
    pub fn is_quarter_end(self) -> bool {
        self.month().is_multiple_of(3)
    }

    /// Inclusive iterator over months `self..=last`.
    pub fn range_to(self, last: YearMonth) -> impl Iterator<Item = YearMonth> {
        (self.0..=last.0).map(YearMonth)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year(), self.month())
    }
}

impl fmt::Debug for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM`, e.g. `2015-02`.
    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("bad year-month '{s}', expected YYYY-MM")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| Error::Config(format!("bad year in '{s}'")))?;
        let month: u32 = m
            .parse()
            .map_err(|_| Error::Config(format!("bad month in '{s}'")))?;
        Self::new(year, month)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

/// Convenience constructor for literals in tests and fixtures.
pub fn ym(year: i32, month: u32) -> YearMonth {
    YearMonth::new(year, month).expect("valid month")
}

//! Contiguous monthly series.
//!
//! A `MonthlySeries` is gap-free by construction: missing trailing
//! observations are represented by absence (the series simply ends), never
//! by sentinel values.

use serde::{Deserialize, Serialize};

use crate::dates::YearMonth;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    start: YearMonth,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(start: YearMonth, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate("empty series".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in series".into()));
        }
        Ok(MonthlySeries { start, values })
    }

    /// Builds from (date, value) pairs that must form a contiguous,
    /// strictly-increasing month range.
    pub fn from_pairs(pairs: &[(YearMonth, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Degenerate("empty series".into()));
        }
        let start = pairs[0].0;
        for (i, (d, _)) in pairs.iter().enumerate() {
            if d.months_since(start) != i as i32 {
                return Err(Error::Integrity(format!(
                    "series has a gap or disorder at {d}"
                )));
            }
        }
        Self::new(start, pairs.iter().map(|&(_, v)| v).collect())
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn end(&self) -> YearMonth {
        self.start.add_months(self.values.len() as i32 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, date: YearMonth) -> Option<f64> {
        let off = date.months_since(self.start);
        if off < 0 {
            return None;
        }
        self.values.get(off as usize).copied()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("non-empty by construction")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start.add_months(i as i32), v))
    }

    /// Appends one observation at `end() + 1`.
    pub fn push(&mut self, value: f64) {
        self.values.push(value);
    }

    /// The last `n` observations (all of them if `n >= len`).
    pub fn tail(&self, n: usize) -> &[f64] {
        let k = self.values.len().saturating_sub(n);
        &self.values[k..]
    }

    /// Sub-series covering `[from, to]`; errors if not fully covered.
    pub fn slice(&self, from: YearMonth, to: YearMonth) -> Result<MonthlySeries> {
        let a = from.months_since(self.start);
        let b = to.months_since(self.start);
        if a < 0 || b >= self.values.len() as i32 || b < a {
            return Err(Error::Coverage(format!(
                "series [{}..{}] does not cover [{from}..{to}]",
                self.start,
                self.end()
            )));
        }
        MonthlySeries::new(from, self.values[a as usize..=b as usize].to_vec())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> MonthlySeries {
        MonthlySeries {
            start: self.start,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dates::ym;

    #[test]
    fn from_pairs_rejects_gaps() {
        let ok = MonthlySeries::from_pairs(&[(ym(2020, 1), 1.0), (ym(2020, 2), 2.0)]).unwrap();
        assert_eq!(ok.end(), ym(2020, 2));
        let gap = MonthlySeries::from_pairs(&[(ym(2020, 1), 1.0), (ym(2020, 3), 2.0)]);
        assert!(matches!(gap, Err(Error::Integrity(_))));
    }

    #[test]
    fn get_and_slice() {
        let s = MonthlySeries::new(ym(2020, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.get(ym(2020, 3)), Some(3.0));
        assert_eq!(s.get(ym(2019, 12)), None);
        assert_eq!(s.get(ym(2020, 5)), None);
        let sub = s.slice(ym(2020, 2), ym(2020, 3)).unwrap();
        assert_eq!(sub.values(), &[2.0, 3.0]);
        assert!(s.slice(ym(2019, 12), ym(2020, 2)).is_err());
    }

    #[test]
    fn tail_shorter_than_n_returns_all() {
        let s = MonthlySeries::new(ym(2020, 1), vec![1.0, 2.0]).unwrap();
        assert_eq!(s.tail(10), &[1.0, 2.0]);
        assert_eq!(s.tail(1), &[2.0]);
    }
}

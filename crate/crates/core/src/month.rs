//! Calendar-month keys and ranges used by every monthly series in the
//! pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A calendar month, e.g. `2015-03`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    year: i32,
    month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        if (1..=12).contains(&month) {
            Some(Self { year, month })
        } else {
            None
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn next(&self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn next_n(&self, n: usize) -> Self {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) + n as i64;
        Self {
            year: (total.div_euclid(12)) as i32,
            month: (total.rem_euclid(12) + 1) as u8,
        }
    }

    /// Number of months from `start` to `self`; negative when `self` is earlier.
    pub fn months_since(&self, start: YearMonth) -> i64 {
        (self.year as i64 - start.year as i64) * 12 + (self.month as i64 - start.month as i64)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| format!("invalid year-month {s:?}"))?;
        let year: i32 = y.parse().map_err(|_| format!("invalid year in {s:?}"))?;
        let month: u8 = m.parse().map_err(|_| format!("invalid month in {s:?}"))?;
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in {s:?}"))
    }
}

impl TryFrom<String> for YearMonth {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

/// A contiguous, inclusive range of months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthRange {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthRange {
    pub fn new(start: YearMonth, end: YearMonth) -> Option<Self> {
        if start <= end {
            Some(Self { start, end })
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        (self.end.months_since(self.start) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees start <= end
    }

    pub fn contains(&self, ym: YearMonth) -> bool {
        self.start <= ym && ym <= self.end
    }

    /// Zero-based offset of `ym` inside the range, if contained.
    pub fn index_of(&self, ym: YearMonth) -> Option<usize> {
        self.contains(ym)
            .then(|| ym.months_since(self.start) as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = YearMonth> + '_ {
        let mut cur = self.start;
        let end = self.end;
        std::iter::from_fn(move || {
            if cur > end {
                None
            } else {
                let out = cur;
                cur = cur.next();
                Some(out)
            }
        })
    }

    /// Overlap of two ranges, if any.
    pub fn intersect(&self, other: &MonthRange) -> Option<MonthRange> {
        MonthRange::new(self.start.max(other.start), self.end.min(other.end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_roundtrip_and_order() {
        let a: YearMonth = "2015-03".parse().unwrap();
        let b: YearMonth = "2015-12".parse().unwrap();
        assert!(a < b);
        assert_eq!(a.to_string(), "2015-03");
        assert_eq!(b.next().to_string(), "2016-01");
        assert_eq!(b.months_since(a), 9);
    }

    #[test]
    fn rejects_bad_months() {
        assert!("2015-13".parse::<YearMonth>().is_err());
        assert!("2015-00".parse::<YearMonth>().is_err());
        assert!("garbage".parse::<YearMonth>().is_err());
    }

    #[test]
    fn range_iteration() {
        let r = MonthRange::new("2015-11".parse().unwrap(), "2016-02".parse().unwrap()).unwrap();
        let months: Vec<String> = r.iter().map(|m| m.to_string()).collect();
        assert_eq!(months, ["2015-11", "2015-12", "2016-01", "2016-02"]);
        assert_eq!(r.len(), 4);
        assert_eq!(r.index_of("2016-01".parse().unwrap()), Some(2));
        assert_eq!(r.index_of("2017-01".parse().unwrap()), None);
    }

    #[test]
    fn range_intersection() {
        let a = MonthRange::new("2015-01".parse().unwrap(), "2015-06".parse().unwrap()).unwrap();
        let b = MonthRange::new("2015-04".parse().unwrap(), "2015-12".parse().unwrap()).unwrap();
        let c = a.intersect(&b).unwrap();
        assert_eq!(c.start.to_string(), "2015-04");
        assert_eq!(c.end.to_string(), "2015-06");
        let d = MonthRange::new("2016-01".parse().unwrap(), "2016-02".parse().unwrap()).unwrap();
        assert!(a.intersect(&d).is_none());
    }
}

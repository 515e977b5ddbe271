use chrono::{Datelike, Days, NaiveDate};

use super::{DailyCountSeries, Series};
use crate::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Weights for combining prior years into an expected-deaths baseline.
///
/// Each entry pairs a year offset (1 = most recent prior year) with a weight;
/// weights must sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineWeights {
    entries: Vec<(u32, f64)>,
}

impl BaselineWeights {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidWeights("no weights given".into()));
        }
        for (k, &(offset, w)) in entries.iter().enumerate() {
            if offset == 0 {
                return Err(Error::InvalidWeights("year offsets start at 1".into()));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidWeights(format!("weight {w} outside [0, 1]")));
            }
            if entries[..k].iter().any(|&(o, _)| o == offset) {
                return Err(Error::InvalidWeights(format!("year offset {offset} repeated")));
            }
        }
        let sum: f64 = entries.iter().map(|&(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(Self { entries })
    }

    /// Weights listed most recent year first, offsets assigned 1, 2, ...
    pub fn from_fractions(weights: &[f64]) -> Result<Self> {
        Self::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (i as u32 + 1, w))
                .collect(),
        )
    }

    /// 40/30/20/5/5 over the five prior years.
    pub fn five_year_default() -> Self {
        Self::from_fractions(&[0.40, 0.30, 0.20, 0.05, 0.05]).expect("valid default weights")
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, w)| w)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for BaselineWeights {
    fn default() -> Self {
        Self::five_year_default()
    }
}

/// One full calendar year taken from a history series.
struct HistoryYear<'a> {
    series: &'a DailyCountSeries,
    year: i32,
}

impl<'a> HistoryYear<'a> {
    /// Uses the first calendar year the series covers completely.
    fn locate(series: &'a DailyCountSeries, index: usize) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::MissingMonthDay { index, month: 1, day: 1 });
        }
        let start = series.start();
        let year = if start.ordinal() == 1 { start.year() } else { start.year() + 1 };
        let first = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid date");
        let last = NaiveDate::from_ymd_opt(year, 12, 31).expect("valid date");
        if series.index_of(first).is_none() {
            return Err(Error::MissingMonthDay { index, month: 1, day: 1 });
        }
        if series.index_of(last).is_none() {
            let missing = if series.end() < first { first } else { series.end() + Days::new(1) };
            return Err(Error::MissingMonthDay {
                index,
                month: missing.month(),
                day: missing.day(),
            });
        }
        Ok(Self { series, year })
    }

    fn at(&self, month: u32, day: u32) -> f64 {
        match NaiveDate::from_ymd_opt(self.year, month, day) {
            Some(date) => self.series.value_on(date).expect("full year covered"),
            // Feb 29 against a non-leap history: mean of the neighbours.
            None => 0.5 * (self.at(2, 28) + self.at(3, 1)),
        }
    }
}

/// Expected deaths for every day of `target_year`:
/// `sum_k weight_k * history_k(month, day)`.
///
/// Histories pair with weights by position. Each history contributes its
/// first complete calendar year and is aligned by month and day; a leap day
/// missing from a history is the mean of its Feb 28 and Mar 1 values.
pub fn expected_deaths(
    histories: &[DailyCountSeries],
    weights: &BaselineWeights,
    target_year: i32,
) -> Result<DailyCountSeries> {
    let first = NaiveDate::from_ymd_opt(target_year, 1, 1)
        .ok_or_else(|| Error::invalid(format!("year {target_year} out of range")))?;
    let last = NaiveDate::from_ymd_opt(target_year, 12, 31).expect("Dec 31 exists");
    expected_deaths_between(histories, weights, first, last)
}

/// [`expected_deaths`] over an arbitrary date range, possibly spanning
/// several target years.
pub fn expected_deaths_between(
    histories: &[DailyCountSeries],
    weights: &BaselineWeights,
    first: NaiveDate,
    last: NaiveDate,
) -> Result<DailyCountSeries> {
    if histories.len() != weights.len() {
        return Err(Error::HistoryCountMismatch {
            histories: histories.len(),
            weights: weights.len(),
        });
    }
    if last < first {
        return Err(Error::Empty);
    }
    let years = histories
        .iter()
        .enumerate()
        .map(|(i, h)| HistoryYear::locate(h, i))
        .collect::<Result<Vec<_>>>()?;

    let values = first
        .iter_days()
        .take_while(|d| *d <= last)
        .map(|date| {
            years
                .iter()
                .zip(weights.weights())
                .map(|(h, w)| w * h.at(date.month(), date.day()))
                .sum::<f64>()
        })
        .collect();
    DailyCountSeries::new(first, values)
}

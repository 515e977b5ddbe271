//! Daily mortality series, smoothing, expected-deaths baselines and excess
//! mortality.
//!
//! All series are stored as a start date plus one value per calendar day, so
//! the gap-free invariant holds by construction once a series exists.

mod baseline;
mod io;

use chrono::{Days, NaiveDate};

use crate::{Error, Result};

pub use baseline::{expected_deaths, expected_deaths_between, BaselineWeights};
pub use io::{load_excess, load_series, write_series, InputFormat};

/// Read access shared by [`DailyCountSeries`] and [`ExcessSeries`].
pub trait Series {
    fn start(&self) -> NaiveDate;
    fn values(&self) -> &[f64];

    fn len(&self) -> usize {
        self.values().len()
    }

    fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    /// Last date covered. For an empty series this is the day before `start`.
    fn end(&self) -> NaiveDate {
        match self.len() {
            0 => self.start() - Days::new(1),
            n => self.start() + Days::new(n as u64 - 1),
        }
    }

    fn date_at(&self, index: usize) -> NaiveDate {
        self.start() + Days::new(index as u64)
    }

    fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start()).num_days();
        (offset >= 0 && (offset as usize) < self.len()).then_some(offset as usize)
    }

    fn value_on(&self, date: NaiveDate) -> Option<f64> {
        self.index_of(date).map(|i| self.values()[i])
    }

    fn iter(&self) -> Box<dyn Iterator<Item = (NaiveDate, f64)> + '_> {
        let start = self.start();
        Box::new(
            self.values()
                .iter()
                .enumerate()
                .map(move |(i, &v)| (start + Days::new(i as u64), v)),
        )
    }
}

/// Non-negative daily counts (reported deaths, cases, model output).
#[derive(Clone, Debug, PartialEq)]
pub struct DailyCountSeries {
    start: NaiveDate,
    values: Vec<f64>,
}

/// Reported minus expected deaths; values may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcessSeries {
    start: NaiveDate,
    values: Vec<f64>,
}

impl Series for DailyCountSeries {
    fn start(&self) -> NaiveDate {
        self.start
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Series for ExcessSeries {
    fn start(&self) -> NaiveDate {
        self.start
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_values(start: NaiveDate, values: &[f64], allow_negative: bool) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || (!allow_negative && v < 0.0) {
            return Err(Error::InvalidValue {
                date: start + Days::new(i as u64),
                value: v,
            });
        }
    }
    Ok(())
}

fn check_entries(entries: &[(NaiveDate, f64)]) -> Result<()> {
    for (k, pair) in entries.windows(2).enumerate() {
        let (prev, next) = (pair[0].0, pair[1].0);
        let line = k as u64 + 2;
        match (next - prev).num_days() {
            1 => {}
            0 => return Err(Error::DuplicateDate { line, date: next }),
            d if d < 0 => {
                return Err(Error::UnorderedDate {
                    line,
                    date: next,
                    previous: prev,
                })
            }
            _ => {
                return Err(Error::Gap {
                    after: prev,
                    before: next,
                })
            }
        }
    }
    Ok(())
}

impl DailyCountSeries {
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        check_values(start, &values, false)?;
        Ok(Self { start, values })
    }

    /// Builds a series from explicit `(date, value)` pairs, which must be
    /// strictly increasing and gap-free.
    pub fn from_entries(entries: Vec<(NaiveDate, f64)>) -> Result<Self> {
        check_entries(&entries)?;
        let start = entries.first().ok_or(Error::Empty)?.0;
        Self::new(start, entries.into_iter().map(|(_, v)| v).collect())
    }

    /// A constant series of `days` days.
    pub fn constant(start: NaiveDate, days: usize, value: f64) -> Result<Self> {
        Self::new(start, vec![value; days])
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Sub-series covering `[first, last]`, clipped to the available range.
    pub fn window(&self, first: NaiveDate, last: NaiveDate) -> Option<Self> {
        let (start, values) = clip(self, first, last)?;
        Some(Self { start, values })
    }

    /// Seven-day trailing mean; see [`trailing_average_7`].
    pub fn trailing_average_7(&self) -> Result<Self> {
        let (start, values) = trailing_mean(self)?;
        Ok(Self { start, values })
    }
}

impl ExcessSeries {
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        check_values(start, &values, true)?;
        Ok(Self { start, values })
    }

    pub fn from_entries(entries: Vec<(NaiveDate, f64)>) -> Result<Self> {
        check_entries(&entries)?;
        let start = entries.first().ok_or(Error::Empty)?.0;
        Self::new(start, entries.into_iter().map(|(_, v)| v).collect())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn window(&self, first: NaiveDate, last: NaiveDate) -> Option<Self> {
        let (start, values) = clip(self, first, last)?;
        Some(Self { start, values })
    }

    pub fn trailing_average_7(&self) -> Result<Self> {
        let (start, values) = trailing_mean(self)?;
        Ok(Self { start, values })
    }

    /// Daily values floored at zero, as used for wave death totals and
    /// curve fitting.
    pub fn floored(&self) -> DailyCountSeries {
        DailyCountSeries {
            start: self.start,
            values: self.values.iter().map(|v| v.max(0.0)).collect(),
        }
    }

    /// Sum of all daily values, negative days included.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl From<DailyCountSeries> for ExcessSeries {
    fn from(s: DailyCountSeries) -> Self {
        Self {
            start: s.start,
            values: s.values,
        }
    }
}

fn clip<S: Series>(s: &S, first: NaiveDate, last: NaiveDate) -> Option<(NaiveDate, Vec<f64>)> {
    let lo = first.max(s.start());
    let hi = last.min(s.end());
    if lo > hi || s.is_empty() {
        return None;
    }
    let i = s.index_of(lo)?;
    let j = s.index_of(hi)?;
    Some((lo, s.values()[i..=j].to_vec()))
}

pub const SMOOTHING_WINDOW: usize = 7;

fn trailing_mean<S: Series>(s: &S) -> Result<(NaiveDate, Vec<f64>)> {
    if s.len() < SMOOTHING_WINDOW {
        return Err(Error::TooShort {
            len: s.len(),
            min: SMOOTHING_WINDOW,
        });
    }
    let values = s
        .values()
        .windows(SMOOTHING_WINDOW)
        .map(|w| w.iter().rev().sum::<f64>() / SMOOTHING_WINDOW as f64)
        .collect();
    Ok((s.date_at(SMOOTHING_WINDOW - 1), values))
}

/// Seven-day trailing average: `out[i] = (s[i] + s[i-1] + ... + s[i-6]) / 7`.
///
/// No partial windows are emitted, so the output starts six days after the
/// input and is six days shorter.
pub fn trailing_average_7(s: &DailyCountSeries) -> Result<DailyCountSeries> {
    s.trailing_average_7()
}

/// Pointwise `reported - expected` on the overlapping dates. Negative values
/// are kept.
pub fn excess_mortality(
    reported: &DailyCountSeries,
    expected: &DailyCountSeries,
) -> Result<ExcessSeries> {
    let lo = reported.start.max(expected.start);
    let hi = reported.end().min(expected.end());
    if reported.is_empty() || expected.is_empty() || lo > hi {
        return Err(Error::NoOverlap);
    }
    let r0 = reported.index_of(lo).expect("overlap start in reported");
    let e0 = expected.index_of(lo).expect("overlap start in expected");
    let n = (hi - lo).num_days() as usize + 1;
    let values = reported.values[r0..r0 + n]
        .iter()
        .zip(&expected.values[e0..e0 + n])
        .map(|(r, e)| r - e)
        .collect();
    Ok(ExcessSeries { start: lo, values })
}

/// Whether the 7-day smoothing runs on the reported and expected series
/// before subtracting them, or on the excess afterwards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SmoothingOrder {
    #[default]
    BeforeSubtraction,
    AfterSubtraction,
}

impl std::str::FromStr for SmoothingOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before" | "before-subtraction" => Ok(Self::BeforeSubtraction),
            "after" | "after-subtraction" => Ok(Self::AfterSubtraction),
            other => Err(Error::invalid(format!("unknown smoothing order {other:?}"))),
        }
    }
}

/// Reported series plus baseline histories to smoothed excess mortality.
#[derive(Clone, Debug)]
pub struct ExcessPipeline {
    pub weights: BaselineWeights,
    pub order: SmoothingOrder,
    pub smooth: bool,
}

impl ExcessPipeline {
    pub fn new(weights: BaselineWeights) -> Self {
        Self {
            weights,
            order: SmoothingOrder::default(),
            smooth: true,
        }
    }

    /// Expected deaths are built for every calendar year the reported series
    /// touches, starting six days early so the smoothed baseline lines up
    /// with the first smoothed reported day.
    pub fn expected(
        &self,
        reported: &DailyCountSeries,
        histories: &[DailyCountSeries],
    ) -> Result<DailyCountSeries> {
        if reported.is_empty() {
            return Err(Error::Empty);
        }
        let lead = if self.smooth { SMOOTHING_WINDOW as u64 - 1 } else { 0 };
        expected_deaths_between(
            histories,
            &self.weights,
            reported.start - Days::new(lead),
            reported.end(),
        )
    }

    pub fn run(
        &self,
        reported: &DailyCountSeries,
        histories: &[DailyCountSeries],
    ) -> Result<ExcessSeries> {
        let expected = self.expected(reported, histories)?;
        if !self.smooth {
            return excess_mortality(reported, &expected);
        }
        match self.order {
            SmoothingOrder::BeforeSubtraction => excess_mortality(
                &reported.trailing_average_7()?,
                &expected.trailing_average_7()?,
            ),
            SmoothingOrder::AfterSubtraction => {
                // The raw baseline only needs to cover the reported range here.
                let expected = expected
                    .window(reported.start, reported.end())
                    .ok_or(Error::NoOverlap)?;
                excess_mortality(reported, &expected)?.trailing_average_7()
            }
        }
    }
}

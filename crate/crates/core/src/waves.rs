//! Threshold segmentation of an excess-mortality series into waves.
//!
//! A wave opens on the first day of a run of at least `min_persistence_days`
//! days above `start_threshold` and closes on the first day of a run of at
//! least `min_persistence_days` days below `end_threshold`. A wave still open
//! when the series ends closes on the last day. The peak is the largest value
//! in `[start, end]`, earliest on ties. Waves shorter than `min_wave_days`
//! are dropped.
//!
//! Death totals floor each day at zero. The peak day counts toward
//! `deaths_after_peak`, so `deaths_to_peak` covers `[start, peak)` and the
//! two halves partition `total_deaths`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::mortality::{ExcessSeries, Series};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Deaths per day a run must exceed to open a wave.
    pub start_threshold: f64,
    /// Deaths per day a run must stay under to close a wave.
    pub end_threshold: f64,
    pub min_persistence_days: usize,
    pub min_wave_days: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            start_threshold: 10.0,
            end_threshold: 10.0,
            min_persistence_days: 3,
            min_wave_days: 21,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self.start_threshold.is_finite() && self.end_threshold.is_finite();
        if !finite || self.start_threshold < 0.0 || self.end_threshold < 0.0 {
            return Err(Error::invalid("segmentation thresholds must be finite and non-negative"));
        }
        if self.end_threshold > self.start_threshold {
            return Err(Error::invalid("end_threshold must not exceed start_threshold"));
        }
        if self.min_persistence_days == 0 || self.min_wave_days == 0 {
            return Err(Error::invalid("persistence and minimum wave length must be at least 1 day"));
        }
        Ok(())
    }
}

/// One epidemic wave with its day counts and floored death totals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSegment {
    #[serde(rename = "start")]
    pub start_date: NaiveDate,
    #[serde(rename = "peak")]
    pub peak_date: NaiveDate,
    #[serde(rename = "end")]
    pub end_date: NaiveDate,
    pub rise_days: i64,
    pub fall_days: i64,
    pub total_days: i64,
    pub deaths_to_peak: f64,
    pub deaths_after_peak: f64,
    pub total_deaths: f64,
}

impl WaveSegment {
    /// A segment with durations filled in and death totals zeroed; use
    /// [`wave_summary`] to fill the totals from a series.
    pub fn from_dates(start: NaiveDate, peak: NaiveDate, end: NaiveDate) -> Result<Self> {
        if !(start <= peak && peak <= end) {
            return Err(Error::invalid(format!(
                "wave dates out of order: {start} / {peak} / {end}"
            )));
        }
        let rise_days = (peak - start).num_days();
        let fall_days = (end - peak).num_days();
        Ok(Self {
            start_date: start,
            peak_date: peak,
            end_date: end,
            rise_days,
            fall_days,
            total_days: rise_days + fall_days,
            deaths_to_peak: 0.0,
            deaths_after_peak: 0.0,
            total_deaths: 0.0,
        })
    }
}

/// Splits `excess` into disjoint waves ordered by start date.
pub fn segment_waves(excess: &ExcessSeries, config: &SegmentationConfig) -> Result<Vec<WaveSegment>> {
    config.validate()?;
    if excess.is_empty() {
        return Err(Error::Empty);
    }
    let values = excess.values();
    let n = values.len();
    let run = config.min_persistence_days;
    let run_from = |i: usize, pred: &dyn Fn(f64) -> bool| {
        i + run <= n && values[i..i + run].iter().all(|&v| pred(v))
    };
    let above = |v: f64| v > config.start_threshold;
    let below = |v: f64| v < config.end_threshold;

    let mut waves = Vec::new();
    let mut i = 0;
    while i < n {
        if !run_from(i, &above) {
            i += 1;
            continue;
        }
        let open = i;
        let close = (open + 1..n).find(|&j| run_from(j, &below)).unwrap_or(n - 1);

        let peak = (open..=close).fold(open, |best, k| if values[k] > values[best] { k } else { best });
        if close - open >= config.min_wave_days {
            let segment = WaveSegment::from_dates(
                excess.date_at(open),
                excess.date_at(peak),
                excess.date_at(close),
            )?;
            waves.push(wave_summary(&segment, excess)?);
        }
        i = close + 1;
    }
    Ok(waves)
}

/// Recomputes durations and floored death totals of `segment` from `excess`.
pub fn wave_summary(segment: &WaveSegment, excess: &ExcessSeries) -> Result<WaveSegment> {
    let out_of_range = || Error::SegmentOutOfRange {
        start: segment.start_date,
        end: segment.end_date,
    };
    let start = excess.index_of(segment.start_date).ok_or_else(out_of_range)?;
    let end = excess.index_of(segment.end_date).ok_or_else(out_of_range)?;
    let peak = excess.index_of(segment.peak_date).ok_or_else(out_of_range)?;

    let mut summary =
        WaveSegment::from_dates(segment.start_date, segment.peak_date, segment.end_date)?;
    let floored = |range: std::ops::Range<usize>| -> f64 {
        excess.values()[range].iter().map(|v| v.max(0.0)).sum()
    };
    summary.deaths_to_peak = floored(start..peak);
    summary.deaths_after_peak = floored(peak..end + 1);
    summary.total_deaths = summary.deaths_to_peak + summary.deaths_after_peak;
    Ok(summary)
}

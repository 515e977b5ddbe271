//! Synthetic datasets for demos and tests.
//!
//! `synthetic-istanbul` is a stand-in for a registry export: five baseline
//! years (2015 to 2019) of seasonal daily deaths, and a 2020 to 2021
//! reported series made of the weighted baseline, four SEIR-shaped waves and
//! small deterministic noise. Wave peaks, totals and rates echo the published
//! Istanbul bookkeeping, but the numbers are generated, not observed.

use std::f64::consts::PI;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::epidemic::{daily_increments, integrate, IntegrationSettings, SeirParams};
use crate::mortality::{expected_deaths_between, BaselineWeights, DailyCountSeries, ExcessSeries, Series};
use crate::{Error, Result};

const RNG_SEED: u64 = 0x1570_2020;

/// Fraction of its peak below which a wave curve is cut off.
const WAVE_CUTOFF: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    SyntheticIstanbul,
    Triangle,
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic-istanbul" => Ok(Self::SyntheticIstanbul),
            "triangle" => Ok(Self::Triangle),
            other => Err(Error::invalid(format!(
                "unknown fixture {other:?} (expected synthetic-istanbul or triangle)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureWave {
    pub label: &'static str,
    pub params: SeirParams,
    pub peak: NaiveDate,
    pub total_deaths: f64,
    /// Daily deaths added to the reported series.
    pub curve: DailyCountSeries,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticDataset {
    pub reported: DailyCountSeries,
    /// Most recent year first, matching [`BaselineWeights::five_year_default`].
    pub histories: Vec<DailyCountSeries>,
    pub weights: BaselineWeights,
    pub waves: Vec<FixtureWave>,
}

struct WaveSpec {
    label: &'static str,
    beta: f64,
    eta: f64,
    epsilon: f64,
    peak: (i32, u32, u32),
    total: f64,
}

const WAVES: [WaveSpec; 4] = [
    WaveSpec { label: "first wave of 2020", beta: 0.231419776, eta: 0.073068182, epsilon: 3.0, peak: (2020, 4, 10), total: 4451.0 },
    WaveSpec { label: "second wave of 2020", beta: 0.230520067, eta: 0.14194734, epsilon: 3.0, peak: (2020, 11, 26), total: 11187.0 },
    WaveSpec { label: "first wave of 2021", beta: 0.228682277, eta: 0.142128916, epsilon: 3.75, peak: (2021, 4, 20), total: 8308.0 },
    WaveSpec { label: "second wave of 2021", beta: 0.2296, eta: 0.142, epsilon: 3.0, peak: (2021, 10, 15), total: 6500.0 },
];

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid fixture date")
}

/// Seasonal all-cause deaths per day: winter peak, summer trough.
fn seasonal(date: NaiveDate) -> f64 {
    let phase = 2.0 * PI * (date.ordinal0() as f64 - 20.0) / 365.25;
    215.0 + 25.0 * phase.cos() + 1.5 * (date.year() - 2015) as f64
}

fn wave_curve(spec: &WaveSpec) -> Result<FixtureWave> {
    let params = SeirParams::new(spec.beta, spec.eta, spec.epsilon)?;
    let settings = IntegrationSettings::default();
    let traj = integrate(settings.initial_state()?, &params, 700.0, settings.step)?;
    let daily = daily_increments(&traj)?;
    let peak = daily
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > daily[best] { k } else { best });
    let cut = WAVE_CUTOFF * daily[peak];
    let first = (0..peak).rev().find(|&d| daily[d] < cut).map_or(0, |d| d + 1);
    let last = (peak..daily.len()).find(|&d| daily[d] < cut).map_or(daily.len() - 1, |d| d - 1);
    let window = &daily[first..=last];
    let kappa = spec.total / window.iter().sum::<f64>();
    let peak_date = ymd(spec.peak.0, spec.peak.1, spec.peak.2);
    let start = peak_date - Days::new((peak - first) as u64);
    Ok(FixtureWave {
        label: spec.label,
        params,
        peak: peak_date,
        total_deaths: spec.total,
        curve: DailyCountSeries::new(start, window.iter().map(|x| kappa * x).collect())?,
    })
}

/// The four-wave synthetic dataset. Deterministic across runs and platforms.
pub fn synthetic_istanbul() -> Result<SyntheticDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(RNG_SEED);
    let weights = BaselineWeights::five_year_default();

    let histories = (2015..=2019)
        .rev()
        .map(|year| {
            let start = ymd(year, 1, 1);
            let values = start
                .iter_days()
                .take_while(|d| d.year() == year)
                .map(|d| (seasonal(d) + rng.gen_range(-4.0..4.0)).round())
                .collect();
            DailyCountSeries::new(start, values)
        })
        .collect::<Result<Vec<_>>>()?;

    let waves = WAVES.iter().map(wave_curve).collect::<Result<Vec<_>>>()?;

    let (first, last) = (ymd(2020, 1, 1), ymd(2021, 12, 31));
    let expected = expected_deaths_between(&histories, &weights, first, last)?;
    let values = expected
        .iter()
        .map(|(date, base)| {
            let surge: f64 = waves.iter().filter_map(|w| w.curve.value_on(date)).sum();
            (base + surge + rng.gen_range(-3.0..3.0)).round().max(0.0)
        })
        .collect();

    Ok(SyntheticDataset {
        reported: DailyCountSeries::new(first, values)?,
        histories,
        weights,
        waves,
    })
}

/// Symmetric triangle rising from 0 to `peak` and back over
/// `2 * half_width + 1` days.
pub fn triangle_excess(start: NaiveDate, half_width: usize, peak: f64) -> Result<ExcessSeries> {
    let h = half_width as f64;
    let values = (0..=2 * half_width)
        .map(|i| (h - (i as f64 - h).abs()) * peak / h)
        .collect();
    ExcessSeries::new(start, values)
}

/// The 41-day, height-100 triangle starting 2020-03-01.
pub fn default_triangle() -> ExcessSeries {
    triangle_excess(ymd(2020, 3, 1), 20, 100.0).expect("valid triangle")
}

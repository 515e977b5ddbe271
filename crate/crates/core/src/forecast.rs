//! Next-wave forecast as a central curve with lower and upper bounds.
//!
//! The central band runs the SEIR model at the mean of the prior fits'
//! `(beta, eta, epsilon, kappa)`. The lower band takes the smallest `beta`
//! and largest `eta` seen across the priors (the lowest-`R0` corner), the
//! upper band the largest `beta` and smallest `eta`; both keep the mean
//! `epsilon` and `kappa`. If the three curves cross on some day, the bands
//! are replaced by the pointwise min/max of the three.

use std::io::Write;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::calibration::FitCandidate;
use crate::epidemic::{DailyStepper, IntegrationSettings, SeirParams};
use crate::mortality::{DailyCountSeries, Series};
use crate::{Error, Result};

/// Shortest forecast horizon, in days.
pub const MIN_HORIZON_DAYS: usize = 14;

/// Longest lead searched when aligning the onset.
const MAX_LEAD_DAYS: usize = 3000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    pub integration: IntegrationSettings,
    /// When set, model days before the central curve first exceeds this many
    /// deaths per day are skipped, so `start_date` marks the wave onset
    /// rather than the seeding instant.
    pub onset_threshold: Option<f64>,
}

/// Parameters behind one band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandParams {
    pub beta: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub r0: f64,
}

impl BandParams {
    fn new(params: SeirParams, kappa: f64) -> Self {
        Self {
            beta: params.beta(),
            eta: params.eta(),
            epsilon: params.epsilon(),
            kappa,
            r0: params.r0(),
        }
    }

    fn seir(&self) -> Result<SeirParams> {
        SeirParams::new(self.beta, self.eta, self.epsilon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastAssumptions {
    pub priors: Vec<BandParams>,
    pub central: BandParams,
    pub lower: BandParams,
    pub upper: BandParams,
    pub integration: IntegrationSettings,
    pub onset_threshold: Option<f64>,
    /// Model days skipped before `start_date`.
    pub lead_days: usize,
    /// Whether pointwise min/max repair was needed.
    pub repaired: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastBand {
    pub central: DailyCountSeries,
    pub lower: DailyCountSeries,
    pub upper: DailyCountSeries,
    pub assumptions: ForecastAssumptions,
}

impl ForecastBand {
    /// `date,lower,central,upper`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "date,lower,central,upper")?;
        for (k, (date, central)) in self.central.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                date.format("%Y-%m-%d"),
                self.lower.values()[k],
                central,
                self.upper.values()[k]
            )?;
        }
        out.flush()
    }
}

fn model_days(band: &BandParams, settings: &IntegrationSettings, days: usize) -> Result<Vec<f64>> {
    let mut stepper = DailyStepper::new(band.seir()?, settings)?;
    let values: Vec<f64> = (0..days).map(|_| band.kappa * stepper.next_day()).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: days as f64 });
    }
    Ok(values)
}

/// Forecasts `horizon_days` of daily deaths starting at `start_date`.
pub fn predict_wave(
    priors: &[FitCandidate],
    start_date: NaiveDate,
    horizon_days: usize,
    options: &ForecastOptions,
) -> Result<ForecastBand> {
    if priors.is_empty() {
        return Err(Error::invalid("forecast needs at least one prior fit"));
    }
    if horizon_days < MIN_HORIZON_DAYS {
        return Err(Error::invalid(format!(
            "horizon must be at least {MIN_HORIZON_DAYS} days, got {horizon_days}"
        )));
    }
    if start_date.checked_add_days(Days::new(horizon_days as u64)).is_none() {
        return Err(Error::invalid("forecast horizon runs past the calendar"));
    }
    let n = priors.len() as f64;
    let mean = |f: &dyn Fn(&FitCandidate) -> f64| priors.iter().map(f).sum::<f64>() / n;
    let fold = |f: &dyn Fn(&FitCandidate) -> f64, pick: fn(f64, f64) -> f64| {
        priors.iter().map(f).reduce(pick).expect("non-empty priors")
    };
    let beta = |c: &FitCandidate| c.params.beta();
    let eta = |c: &FitCandidate| c.params.eta();
    let epsilon = mean(&|c| c.params.epsilon());
    let kappa = mean(&|c| c.kappa);
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("mean kappa must be non-negative, got {kappa}")));
    }

    let central = BandParams::new(SeirParams::new(mean(&beta), mean(&eta), epsilon)?, kappa);
    let lower = BandParams::new(SeirParams::new(fold(&beta, f64::min), fold(&eta, f64::max), epsilon)?, kappa);
    let upper = BandParams::new(SeirParams::new(fold(&beta, f64::max), fold(&eta, f64::min), epsilon)?, kappa);

    let settings = options.integration;
    let lead = match options.onset_threshold {
        None => 0,
        Some(threshold) => {
            let probe = model_days(&central, &settings, MAX_LEAD_DAYS)?;
            probe.iter().position(|&v| v > threshold).unwrap_or(0)
        }
    };
    let total = lead + horizon_days;
    let curve = |band: &BandParams| -> Result<Vec<f64>> {
        Ok(model_days(band, &settings, total)?.split_off(lead))
    };
    let (mut lo, mid, mut hi) = (curve(&lower)?, curve(&central)?, curve(&upper)?);

    let mut repaired = false;
    for k in 0..horizon_days {
        let (a, b, c) = (lo[k], mid[k], hi[k]);
        if !(a <= b && b <= c) {
            repaired = true;
            lo[k] = a.min(b).min(c);
            hi[k] = a.max(b).max(c);
        }
    }
    let series = |v: Vec<f64>| DailyCountSeries::new(start_date, v);
    Ok(ForecastBand {
        central: series(mid)?,
        lower: series(lo)?,
        upper: series(hi)?,
        assumptions: ForecastAssumptions {
            priors: priors.iter().map(|c| BandParams::new(c.params, c.kappa)).collect(),
            central,
            lower,
            upper,
            integration: settings,
            onset_threshold: options.onset_threshold,
            lead_days: lead,
            repaired,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(beta: f64, eta: f64, epsilon: f64, kappa: f64) -> FitCandidate {
        FitCandidate::new(SeirParams::new(beta, eta, epsilon).unwrap(), kappa, 1.0)
    }

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 7, 1).unwrap()
    }

    #[test]
    fn single_prior_collapses_bands() {
        let band = predict_wave(&[prior(0.23, 0.142, 3.0, 2e5)], start(), 200, &ForecastOptions::default()).unwrap();
        assert_eq!(band.lower, band.central);
        assert_eq!(band.upper, band.central);
        assert!(!band.assumptions.repaired);
        assert_eq!(band.central.len(), 200);
    }

    #[test]
    fn central_r0_from_mean_rates() {
        let priors = [
            prior(0.230520067, 0.14194734, 3.0, 1e5),
            prior(0.228682277, 0.142128916, 3.0, 1e5),
        ];
        let band = predict_wave(&priors, start(), 100, &ForecastOptions::default()).unwrap();
        let r0 = band.assumptions.central.r0;
        assert!((r0 - 1.616).abs() < 5e-4, "{r0}");
        assert!((r0 - (0.230520067 + 0.228682277) / (0.14194734 + 0.142128916)).abs() < 1e-12);
        assert_eq!(band.assumptions.lower.beta, 0.228682277);
        assert_eq!(band.assumptions.lower.eta, 0.142128916);
        assert_eq!(band.assumptions.upper.beta, 0.230520067);
        assert_eq!(band.assumptions.upper.eta, 0.14194734);
    }

    #[test]
    fn bands_are_ordered() {
        let priors = [prior(0.20, 0.12, 3.0, 1e5), prior(0.24, 0.12, 4.0, 2e5), prior(0.26, 0.15, 2.0, 1e5)];
        for onset in [None, Some(10.0)] {
            let opts = ForecastOptions { onset_threshold: onset, ..Default::default() };
            let band = predict_wave(&priors, start(), 400, &opts).unwrap();
            for k in 0..band.central.len() {
                let (l, c, u) = (band.lower.values()[k], band.central.values()[k], band.upper.values()[k]);
                assert!(l <= c && c <= u, "day {k}: {l} {c} {u}");
            }
        }
    }

    #[test]
    fn onset_alignment_skips_quiet_days() {
        let priors = [prior(0.23, 0.142, 3.0, 2e5)];
        let opts = ForecastOptions { onset_threshold: Some(10.0), ..Default::default() };
        let band = predict_wave(&priors, start(), 60, &opts).unwrap();
        assert!(band.assumptions.lead_days > 0);
        assert!(band.central.values()[0] > 10.0);
        let plain = predict_wave(&priors, start(), 60, &ForecastOptions::default()).unwrap();
        assert!(plain.central.values()[0] < 10.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(predict_wave(&[], start(), 100, &ForecastOptions::default()).is_err());
        assert!(predict_wave(&[prior(0.2, 0.1, 3.0, 1.0)], start(), 13, &ForecastOptions::default()).is_err());
    }

    #[test]
    fn csv_columns() {
        let band = predict_wave(&[prior(0.23, 0.142, 3.0, 2e5)], start(), 14, &ForecastOptions::default()).unwrap();
        let mut buf = Vec::new();
        band.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("date,lower,central,upper\n2021-07-01,"));
        assert_eq!(text.lines().count(), 15);
    }
}

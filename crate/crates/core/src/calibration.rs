//! Grid-search calibration of SEIR parameters to an observed wave.
//!
//! For every `(beta, eta, epsilon)` cell the model is integrated from the
//! standard seeded state, its daily deaths are shifted so the model peak
//! lands on the observed peak day, and the observation scale `kappa` is set
//! in closed form so model and observed totals agree over the wave. The
//! remaining mismatch is scored as a percentage:
//!
//! * `nrmse-peak`: `100 * RMSE(model, observed) / max(observed)`
//! * `cum-mape`: `100 * mean(|cum_model - cum_obs| / cum_obs)` over days with
//!   `cum_obs > 0`
//!
//! Cells are independent and evaluated in parallel; ranking happens after
//! all cells are collected, so reports do not depend on thread scheduling.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epidemic::{DailyStepper, IntegrationSettings, SeirParams};
use crate::mortality::{DailyCountSeries, Series};
use crate::waves::WaveSegment;
use crate::{Error, Result};

/// Shortest wave accepted for fitting, in days.
pub const MIN_WAVE_DAYS: usize = 14;

/// Integration horizon cap for cells whose epidemic never turns over
/// (`R0` barely above one).
pub const MAX_HORIZON_DAYS: usize = 3000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorMetric {
    #[default]
    #[serde(rename = "nrmse-peak")]
    NrmsePeak,
    #[serde(rename = "cum-mape")]
    CumMape,
}

impl fmt::Display for ErrorMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMetric::NrmsePeak => "nrmse-peak",
            ErrorMetric::CumMape => "cum-mape",
        })
    }
}

impl FromStr for ErrorMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nrmse-peak" => Ok(Self::NrmsePeak),
            "cum-mape" => Ok(Self::CumMape),
            other => Err(Error::invalid(format!(
                "unknown metric {other:?} (expected nrmse-peak or cum-mape)"
            ))),
        }
    }
}

/// `steps` evenly spaced values from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let axis = Self { min, max, steps };
        axis.validate()?;
        Ok(axis)
    }

    pub fn single(value: f64) -> Result<Self> {
        Self::new(value, value, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("axis needs at least one step"));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0) {
            return Err(Error::invalid(format!(
                "axis bounds must be positive, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.steps > 1 && self.min >= self.max {
            return Err(Error::invalid(format!(
                "axis with {} steps needs min < max, got [{}, {}]",
                self.steps, self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = self.steps - 1;
        (0..self.steps)
            .map(|k| {
                if k == last {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / last as f64
                }
            })
            .collect()
    }

    /// Spacing between neighbouring values (zero for a single value).
    pub fn resolution(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.steps - 1) as f64
        }
    }
}

/// Parses `min:max:steps`, or a single value.
impl FromStr for AxisRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {p:?} in axis {s:?}")))
        };
        match parts.as_slice() {
            [v] => Self::single(num(v)?),
            [lo, hi, n] => {
                let steps = n
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad step count {n:?} in axis {s:?}")))?;
                Self::new(num(lo)?, num(hi)?, steps)
            }
            _ => Err(Error::invalid(format!("axis {s:?} is not min:max:steps"))),
        }
    }
}

impl fmt::Display for AxisRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub beta: AxisRange,
    pub eta: AxisRange,
    pub epsilon: AxisRange,
}

impl Default for GridSpec {
    /// `beta` in [0.15, 0.35] x 200, `eta` in [0.05, 0.20] x 150,
    /// `epsilon` in {2, 2.5, ..., 5}: 210 000 cells.
    fn default() -> Self {
        Self {
            beta: AxisRange { min: 0.15, max: 0.35, steps: 200 },
            eta: AxisRange { min: 0.05, max: 0.20, steps: 150 },
            epsilon: AxisRange { min: 2.0, max: 5.0, steps: 7 },
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.beta.validate()?;
        self.eta.validate()?;
        self.epsilon.validate()
    }

    pub fn cell_count(&self) -> usize {
        self.beta.steps * self.eta.steps * self.epsilon.steps
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitCandidate {
    pub params: SeirParams,
    /// Deaths per unit of removed population fraction.
    pub kappa: f64,
    pub r0: f64,
    pub error_pct: f64,
}

impl FitCandidate {
    pub fn new(params: SeirParams, kappa: f64, error_pct: f64) -> Self {
        Self {
            params,
            kappa,
            r0: params.r0(),
            error_pct,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOutcome {
    pub error_pct: f64,
    pub kappa: f64,
}

/// Lowest error reached at each value of one axis, minimised over the others.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurface {
    pub beta: Vec<(f64, f64)>,
    pub eta: Vec<(f64, f64)>,
    pub epsilon: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Ascending by error, ties broken by `(beta, eta, epsilon)`.
    pub candidates: Vec<FitCandidate>,
    pub observed_wave: Option<WaveSegment>,
    pub grid: GridSpec,
    pub metric: ErrorMetric,
    pub surface: ErrorSurface,
}

impl FitReport {
    pub fn best(&self) -> &FitCandidate {
        &self.candidates[0]
    }

    pub fn with_wave(mut self, wave: WaveSegment) -> Self {
        self.observed_wave = Some(wave);
        self
    }
}

/// Observed wave summary reused across grid cells.
struct Observed<'a> {
    values: &'a [f64],
    peak: usize,
    max: f64,
    total: f64,
}

impl<'a> Observed<'a> {
    fn new(series: &'a DailyCountSeries) -> Result<Self> {
        let values = series.values();
        if values.len() < MIN_WAVE_DAYS {
            return Err(Error::TooShort {
                len: values.len(),
                min: MIN_WAVE_DAYS,
            });
        }
        let peak = argmax(values);
        let max = values[peak];
        if max <= 0.0 {
            return Err(Error::AllZero);
        }
        Ok(Self {
            values,
            peak,
            max,
            total: values.iter().sum(),
        })
    }
}

/// Index of the largest value, earliest on ties.
fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > values[best] { k } else { best })
}

/// Unscaled model removals per day over the observed window, shifted so the
/// model peak falls on the observed peak day. Days before the model start
/// are zero.
fn aligned_model(
    params: SeirParams,
    settings: &IntegrationSettings,
    len: usize,
    observed_peak: usize,
) -> Result<Vec<f64>> {
    let mut stepper = DailyStepper::new(params, settings)?;
    let r0 = params.r0();
    let tail = len - observed_peak;
    let mut daily: Vec<f64> = Vec::with_capacity(512);
    let mut peak = 0;
    loop {
        let x = stepper.next_day();
        daily.push(x);
        let day = daily.len() - 1;
        if x > daily[peak] {
            peak = day;
        }
        // Removals peak after the susceptible fraction drops below 1 / R0;
        // earlier maxima are seeding transients.
        let turned = day > peak && stepper.state().s * r0 < 1.0;
        if (turned && daily.len() >= peak + tail) || daily.len() >= MAX_HORIZON_DAYS {
            break;
        }
    }
    while daily.len() < peak + tail {
        daily.push(stepper.next_day());
    }
    if !daily.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { t: daily.len() as f64 });
    }
    let offset = peak as isize - observed_peak as isize;
    Ok((0..len as isize)
        .map(|i| {
            let k = offset + i;
            if k < 0 {
                0.0
            } else {
                daily[k as usize]
            }
        })
        .collect())
}

fn score(observed: &Observed<'_>, model: &[f64], metric: ErrorMetric) -> FitOutcome {
    let model_total: f64 = model.iter().sum();
    let kappa = if model_total > 0.0 {
        observed.total / model_total
    } else {
        0.0
    };
    let error_pct = match metric {
        ErrorMetric::NrmsePeak => {
            let sse: f64 = model
                .iter()
                .zip(observed.values)
                .map(|(m, o)| {
                    let d = kappa * m - o;
                    d * d
                })
                .sum();
            100.0 * (sse / model.len() as f64).sqrt() / observed.max
        }
        ErrorMetric::CumMape => {
            let (mut cum_m, mut cum_o) = (0.0, 0.0);
            let (mut sum, mut days) = (0.0, 0usize);
            for (m, o) in model.iter().zip(observed.values) {
                cum_m += kappa * m;
                cum_o += o;
                if cum_o > 0.0 {
                    sum += (cum_m - cum_o).abs() / cum_o;
                    days += 1;
                }
            }
            100.0 * sum / days as f64
        }
    };
    FitOutcome { error_pct, kappa }
}

/// Percentage error and closed-form scale of `params` against an observed
/// wave.
pub fn fit_error(
    params: &SeirParams,
    observed: &DailyCountSeries,
    metric: ErrorMetric,
    settings: &IntegrationSettings,
) -> Result<FitOutcome> {
    let obs = Observed::new(observed)?;
    let model = aligned_model(*params, settings, obs.values.len(), obs.peak)?;
    Ok(score(&obs, &model, metric))
}

/// Model daily deaths for a candidate, aligned to the dates of `observed`.
pub fn fitted_curve(
    candidate: &FitCandidate,
    observed: &DailyCountSeries,
    settings: &IntegrationSettings,
) -> Result<DailyCountSeries> {
    let obs = Observed::new(observed)?;
    let model = aligned_model(candidate.params, settings, obs.values.len(), obs.peak)?;
    DailyCountSeries::new(
        observed.start(),
        model.into_iter().map(|m| candidate.kappa * m).collect(),
    )
}

fn rank(a: &FitCandidate, b: &FitCandidate) -> Ordering {
    a.error_pct
        .total_cmp(&b.error_pct)
        .then(a.params.beta().total_cmp(&b.params.beta()))
        .then(a.params.eta().total_cmp(&b.params.eta()))
        .then(a.params.epsilon().total_cmp(&b.params.epsilon()))
}

/// Evaluates every grid cell and keeps the `top_k` lowest-error candidates.
pub fn grid_search(
    observed: &DailyCountSeries,
    grid: &GridSpec,
    metric: ErrorMetric,
    top_k: usize,
    settings: &IntegrationSettings,
) -> Result<FitReport> {
    grid.validate()?;
    if top_k == 0 {
        return Err(Error::invalid("top_k must be at least 1"));
    }
    let obs = Observed::new(observed)?;
    let betas = grid.beta.values();
    let etas = grid.eta.values();
    let epsilons = grid.epsilon.values();
    let (ne, nx) = (etas.len(), epsilons.len());
    let cells = grid.cell_count();

    let evaluated: Vec<FitCandidate> = (0..cells)
        .into_par_iter()
        .map(|idx| {
            let params = SeirParams::new(betas[idx / (ne * nx)], etas[(idx / nx) % ne], epsilons[idx % nx])?;
            let model = aligned_model(params, settings, obs.values.len(), obs.peak)?;
            let outcome = score(&obs, &model, metric);
            Ok(FitCandidate::new(params, outcome.kappa, outcome.error_pct))
        })
        .collect::<Result<_>>()?;

    let mut surface = ErrorSurface {
        beta: betas.iter().map(|&b| (b, f64::INFINITY)).collect(),
        eta: etas.iter().map(|&e| (e, f64::INFINITY)).collect(),
        epsilon: epsilons.iter().map(|&e| (e, f64::INFINITY)).collect(),
    };
    for (idx, c) in evaluated.iter().enumerate() {
        for (slot, k) in [
            (&mut surface.beta, idx / (ne * nx)),
            (&mut surface.eta, (idx / nx) % ne),
            (&mut surface.epsilon, idx % nx),
        ] {
            slot[k].1 = slot[k].1.min(c.error_pct);
        }
    }

    let mut candidates = evaluated;
    let keep = top_k.min(candidates.len());
    if keep < candidates.len() {
        candidates.select_nth_unstable_by(keep - 1, rank);
        candidates.truncate(keep);
    }
    candidates.sort_by(rank);

    Ok(FitReport {
        candidates,
        observed_wave: None,
        grid: *grid,
        metric,
        surface,
    })
}

/// Arithmetic mean of `beta`, `eta`, `epsilon`, `kappa` and error over the
/// `n` best candidates; `r0` is recomputed from the mean rates.
pub fn average_top_candidates(report: &FitReport, n: usize) -> Result<FitCandidate> {
    average_candidates(&report.candidates, n)
}

/// [`average_top_candidates`] over a ranked candidate list.
pub fn average_candidates(candidates: &[FitCandidate], n: usize) -> Result<FitCandidate> {
    if n == 0 || candidates.len() < n {
        return Err(Error::NotEnoughCandidates {
            needed: n,
            available: candidates.len(),
        });
    }
    let top = &candidates[..n];
    let mean = |f: &dyn Fn(&FitCandidate) -> f64| top.iter().map(f).sum::<f64>() / n as f64;
    let params = SeirParams::new(
        mean(&|c| c.params.beta()),
        mean(&|c| c.params.eta()),
        mean(&|c| c.params.epsilon()),
    )?;
    Ok(FitCandidate::new(params, mean(&|c| c.kappa), mean(&|c| c.error_pct)))
}

/// `r0,beta,eta,epsilon,kappa,error_pct`, one row per candidate.
pub fn write_report_csv<W: Write>(candidates: &[FitCandidate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "r0,beta,eta,epsilon,kappa,error_pct")?;
    for c in candidates {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            c.r0,
            c.params.beta(),
            c.params.eta(),
            c.params.epsilon(),
            c.kappa,
            c.error_pct
        )?;
    }
    out.flush()
}

/// Reads candidates written by [`write_report_csv`]. `r0` is recomputed.
pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<FitCandidate>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::MalformedRow { line: 1, message: e.to_string() })?;
    let expected = ["r0", "beta", "eta", "epsilon", "kappa", "error_pct"];
    if header.iter().ne(expected) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::MalformedRow {
                    line,
                    message: format!("bad {} field", expected[i]),
                })
        };
        let params = SeirParams::new(field(1)?, field(2)?, field(3)?)
            .map_err(|e| Error::MalformedRow { line, message: e.to_string() })?;
        out.push(FitCandidate::new(params, field(4)?, field(5)?));
    }
    Ok(out)
}

/// `param_value,min_error_pct` for one axis of an [`ErrorSurface`].
pub fn write_error_scan<W: Write>(axis: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "param_value,min_error_pct")?;
    for (value, err) in axis {
        writeln!(out, "{value},{err}")?;
    }
    out.flush()
}

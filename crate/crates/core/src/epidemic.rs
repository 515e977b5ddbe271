//! SIR and SEIR compartmental models, fixed-step RK4 integration, and the
//! observation map from removals to daily deaths.
//!
//! States are population fractions. The SEIR field is
//!
//! ```text
//! dS/dt = -beta S I
//! dE/dt =  beta S I - epsilon E
//! dI/dt =  epsilon E - eta I
//! dR/dt =  eta I
//! ```
//!
//! and SIR is the same system without the exposed compartment.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::format::format_significant;
use crate::mortality::DailyCountSeries;
use crate::{Error, Result};

/// Tolerance on `sum of compartments == 1` for a valid state.
pub const CONSERVATION_TOLERANCE: f64 = 1e-9;

/// Default RK4 step in days.
pub const DEFAULT_STEP: f64 = 0.05;

/// Default initial exposed and infectious fraction.
pub const DEFAULT_SEED: f64 = 1e-5;

/// Rates per day: transmission `beta`, removal `eta`, and exposed-to-infectious
/// transfer `epsilon`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeirParams {
    beta: f64,
    eta: f64,
    epsilon: f64,
}

impl SeirParams {
    pub fn new(beta: f64, eta: f64, epsilon: f64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("eta", eta), ("epsilon", epsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { beta, eta, epsilon })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `beta / eta`.
    pub fn r0(&self) -> f64 {
        basic_reproduction(self)
    }

    /// Mean incubation duration `1 / epsilon`, in days.
    pub fn incubation_days(&self) -> f64 {
        1.0 / self.epsilon
    }

    /// Mean infectious duration `1 / eta`, in days.
    pub fn infectious_days(&self) -> f64 {
        1.0 / self.eta
    }
}

impl fmt::Display for SeirParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "beta={} eta={} epsilon={}", self.beta, self.eta, self.epsilon)
    }
}

/// Basic reproduction number `R0 = beta / eta`.
pub fn basic_reproduction(params: &SeirParams) -> f64 {
    params.beta / params.eta
}

/// Shared behaviour of SIR and SEIR states for the integrator.
pub trait Compartments: Copy + fmt::Debug + Send + Sync {
    fn derivative(&self, params: &SeirParams) -> Self;

    /// `self + h * rate`, componentwise.
    fn add_scaled(&self, rate: &Self, h: f64) -> Self;

    fn susceptible(&self) -> f64;
    fn removed(&self) -> f64;
    fn total(&self) -> f64;
    fn min_component(&self) -> f64;
    fn is_finite(&self) -> bool;

    /// View as SEIR (`E = 0` for SIR) for export.
    fn to_seir(&self) -> SeirState;

    fn validate(&self) -> Result<()> {
        let seir = self.to_seir();
        let parts = [seir.s, seir.e, seir.i, seir.r];
        if parts.iter().any(|v| !v.is_finite() || !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("compartments outside [0, 1]: {seir:?}")));
        }
        if (self.total() - 1.0).abs() > CONSERVATION_TOLERANCE {
            return Err(Error::invalid(format!("compartments sum to {}, not 1", self.total())));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SirState {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeirState {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

impl SirState {
    pub fn new(s: f64, i: f64, r: f64) -> Result<Self> {
        let state = Self { s, i, r };
        state.validate()?;
        Ok(state)
    }

    /// `S = 1 - seed`, `I = seed`, `R = 0`.
    pub fn seeded(seed: f64) -> Result<Self> {
        Self::new(1.0 - seed, seed, 0.0)
    }
}

impl SeirState {
    pub fn new(s: f64, e: f64, i: f64, r: f64) -> Result<Self> {
        let state = Self { s, e, i, r };
        state.validate()?;
        Ok(state)
    }

    /// `S = 1 - 2 seed`, `E = I = seed`, `R = 0`.
    pub fn seeded(seed: f64) -> Result<Self> {
        Self::new(1.0 - 2.0 * seed, seed, seed, 0.0)
    }
}

/// SIR vector field: `(-beta S I, beta S I - eta I, eta I)`.
pub fn sir_rhs(state: &SirState, params: &SeirParams) -> SirState {
    let infection = params.beta * state.s * state.i;
    let removal = params.eta * state.i;
    SirState {
        s: -infection,
        i: infection - removal,
        r: removal,
    }
}

/// SEIR vector field: `(-beta S I, beta S I - epsilon E, epsilon E - eta I, eta I)`.
pub fn seir_rhs(state: &SeirState, params: &SeirParams) -> SeirState {
    let infection = params.beta * state.s * state.i;
    let onset = params.epsilon * state.e;
    let removal = params.eta * state.i;
    SeirState {
        s: -infection,
        e: infection - onset,
        i: onset - removal,
        r: removal,
    }
}

impl Compartments for SirState {
    #[inline]
    fn derivative(&self, params: &SeirParams) -> Self {
        sir_rhs(self, params)
    }

    #[inline]
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        Self {
            s: self.s + h * rate.s,
            i: self.i + h * rate.i,
            r: self.r + h * rate.r,
        }
    }

    fn susceptible(&self) -> f64 {
        self.s
    }
    fn removed(&self) -> f64 {
        self.r
    }
    fn total(&self) -> f64 {
        self.s + self.i + self.r
    }
    fn min_component(&self) -> f64 {
        self.s.min(self.i).min(self.r)
    }
    fn is_finite(&self) -> bool {
        self.s.is_finite() && self.i.is_finite() && self.r.is_finite()
    }
    fn to_seir(&self) -> SeirState {
        SeirState {
            s: self.s,
            e: 0.0,
            i: self.i,
            r: self.r,
        }
    }
}

impl Compartments for SeirState {
    #[inline]
    fn derivative(&self, params: &SeirParams) -> Self {
        seir_rhs(self, params)
    }

    #[inline]
    fn add_scaled(&self, rate: &Self, h: f64) -> Self {
        Self {
            s: self.s + h * rate.s,
            e: self.e + h * rate.e,
            i: self.i + h * rate.i,
            r: self.r + h * rate.r,
        }
    }

    fn susceptible(&self) -> f64 {
        self.s
    }
    fn removed(&self) -> f64 {
        self.r
    }
    fn total(&self) -> f64 {
        self.s + self.e + self.i + self.r
    }
    fn min_component(&self) -> f64 {
        self.s.min(self.e).min(self.i).min(self.r)
    }
    fn is_finite(&self) -> bool {
        self.s.is_finite() && self.e.is_finite() && self.i.is_finite() && self.r.is_finite()
    }
    fn to_seir(&self) -> SeirState {
        *self
    }
}

/// One classical fourth-order Runge-Kutta step.
#[inline]
pub fn rk4_step<S: Compartments>(y: &S, params: &SeirParams, h: f64) -> S {
    let k1 = y.derivative(params);
    let k2 = y.add_scaled(&k1, 0.5 * h).derivative(params);
    let k3 = y.add_scaled(&k2, 0.5 * h).derivative(params);
    let k4 = y.add_scaled(&k3, h).derivative(params);
    y.add_scaled(&k1, h / 6.0)
        .add_scaled(&k2, h / 3.0)
        .add_scaled(&k3, h / 3.0)
        .add_scaled(&k4, h / 6.0)
}

/// Samples at `t = k * step`, `k = 0, 1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    step: f64,
    states: Vec<S>,
}

impl<S: Compartments> Trajectory<S> {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.step
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &S)> + '_ {
        self.states.iter().enumerate().map(|(k, s)| (self.time(k), s))
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds t = 0")
    }

    /// Index of the largest infectious fraction, earliest on ties.
    pub fn peak_infectious(&self) -> (f64, f64) {
        let mut best = 0;
        for (k, s) in self.states.iter().enumerate() {
            if s.to_seir().i > self.states[best].to_seir().i {
                best = k;
            }
        }
        (self.time(best), self.states[best].to_seir().i)
    }

    /// Writes `t,S,E,I,R` with 12 significant digits (`E = 0` for SIR).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,S,E,I,R")?;
        for (t, state) in self.samples() {
            let s = state.to_seir();
            writeln!(
                out,
                "{},{},{},{},{}",
                format_significant(t, 12),
                format_significant(s.s, 12),
                format_significant(s.e, 12),
                format_significant(s.i, 12),
                format_significant(s.r, 12),
            )?;
        }
        out.flush()
    }
}

/// Integrates from `t = 0` to the last multiple of `step` not past `t_end`
/// with classical RK4.
pub fn integrate<S: Compartments>(
    initial: S,
    params: &SeirParams,
    t_end: f64,
    step: f64,
) -> Result<Trajectory<S>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if !(t_end.is_finite() && t_end >= step) {
        return Err(Error::invalid(format!("t_end must be at least one step, got {t_end}")));
    }
    initial.validate()?;
    let n = (t_end / step + 1e-9).floor() as usize;
    let mut states = Vec::with_capacity(n + 1);
    states.push(initial);
    let mut y = initial;
    for k in 1..=n {
        y = rk4_step(&y, params, step);
        if !y.is_finite() {
            return Err(Error::NonFinite { t: k as f64 * step });
        }
        states.push(y);
    }
    Ok(Trajectory { step, states })
}

/// Integration step and seed fraction shared by fitting, forecasting and
/// simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub step: f64,
    pub seed: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            seed: DEFAULT_SEED,
        }
    }
}

impl IntegrationSettings {
    /// RK4 steps per day; the step must divide one day evenly.
    pub fn steps_per_day(&self) -> Result<usize> {
        steps_per_day(self.step)
    }

    pub fn initial_state(&self) -> Result<SeirState> {
        SeirState::seeded(self.seed)
    }
}

pub(crate) fn steps_per_day(step: f64) -> Result<usize> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::invalid(format!("step must be in (0, 1] day, got {step}")));
    }
    let per_day = 1.0 / step;
    let rounded = per_day.round();
    if (per_day - rounded).abs() > 1e-9 * per_day {
        return Err(Error::invalid(format!("step {step} does not divide one day")));
    }
    Ok(rounded as usize)
}

/// Removed-fraction increment over each whole day: `R(d + 1) - R(d)`.
pub fn daily_increments<S: Compartments>(traj: &Trajectory<S>) -> Result<Vec<f64>> {
    let per_day = steps_per_day(traj.step)?;
    let days = (traj.len() - 1) / per_day;
    if days < 1 {
        return Err(Error::TooShort { len: days, min: 1 });
    }
    Ok((0..days)
        .map(|d| {
            let r0 = traj.states[d * per_day].removed();
            let r1 = traj.states[(d + 1) * per_day].removed();
            (r1 - r0).max(0.0)
        })
        .collect())
}

/// Observation model: daily deaths are `scale` times the daily increment of
/// the removed compartment. Day 0 of the trajectory maps to `start`.
pub fn daily_deaths<S: Compartments>(
    traj: &Trajectory<S>,
    scale: f64,
    start: NaiveDate,
) -> Result<DailyCountSeries> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid(format!("scale must be non-negative, got {scale}")));
    }
    let values = daily_increments(traj)?.into_iter().map(|x| scale * x).collect();
    DailyCountSeries::new(start, values)
}

/// Advances an SEIR model one day at a time; used where the horizon is not
/// known in advance. Produces the same states as [`integrate`] at whole days.
#[derive(Clone, Debug)]
pub(crate) struct DailyStepper {
    params: SeirParams,
    step: f64,
    per_day: usize,
    state: SeirState,
}

impl DailyStepper {
    pub(crate) fn new(params: SeirParams, settings: &IntegrationSettings) -> Result<Self> {
        let per_day = settings.steps_per_day()?;
        Ok(Self {
            params,
            step: settings.step,
            per_day,
            state: settings.initial_state()?,
        })
    }

    pub(crate) fn state(&self) -> &SeirState {
        &self.state
    }

    /// Advances one day and returns the removed-fraction increment.
    #[inline]
    pub(crate) fn next_day(&mut self) -> f64 {
        let before = self.state.r;
        for _ in 0..self.per_day {
            self.state = rk4_step(&self.state, &self.params, self.step);
        }
        (self.state.r - before).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mortality::Series;
    use approx::assert_relative_eq;

    fn table1_row1() -> SeirParams {
        SeirParams::new(0.232846715, 0.072992701, 3.0).unwrap()
    }

    #[test]
    fn sir_rhs_hand_values() {
        let p = table1_row1();
        let d = sir_rhs(&SirState { s: 0.5, i: 0.5, r: 0.0 }, &p);
        // beta/4 and eta/2 by hand.
        assert_relative_eq!(d.s, -0.05821167875, epsilon = 1e-15);
        assert_relative_eq!(d.i, 0.05821167875 - 0.0364963505, epsilon = 1e-15);
        assert_relative_eq!(d.r, 0.0364963505, epsilon = 1e-15);
    }

    #[test]
    fn sir_fixed_points() {
        let p = table1_row1();
        let zero = SirState { s: 0.0, i: 0.0, r: 0.0 };
        assert_eq!(sir_rhs(&SirState { s: 0.7, i: 0.0, r: 0.3 }, &p), SirState { s: -0.0, ..zero });
        let d = sir_rhs(&SirState { s: 1.0, i: 0.0, r: 0.0 }, &p);
        assert_eq!([d.s, d.i, d.r], [0.0; 3]);
    }

    #[test]
    fn seir_rhs_hand_values() {
        let p = SeirParams::new(0.23, 0.142857143, 3.0).unwrap();
        let d = seir_rhs(&SeirState { s: 0.9, e: 0.05, i: 0.05 , r: 0.0 }, &p);
        // beta S I = 0.23 * 0.045 = 0.01035; eps E = 0.15; eta I = 0.00714285715.
        assert_relative_eq!(d.s, -0.01035, epsilon = 1e-15);
        assert_relative_eq!(d.e, 0.01035 - 0.15, epsilon = 1e-15);
        assert_relative_eq!(d.i, 0.15 - 0.00714285715, epsilon = 1e-15);
        assert_relative_eq!(d.r, 0.00714285715, epsilon = 1e-15);
        assert!((d.s + d.e + d.i + d.r).abs() < 1e-16);

        let d = seir_rhs(&SeirState { s: 0.6, e: 0.0, i: 0.0, r: 0.4 }, &p);
        assert_eq!([d.s, d.e, d.i, d.r].map(f64::abs), [0.0; 4]);
    }

    #[test]
    fn r0_matches_tables() {
        let r = |b, e| basic_reproduction(&SeirParams::new(b, e, 3.0).unwrap());
        assert_eq!(format!("{:.2}", r(0.232846715, 0.072992701)), "3.19");
        assert_eq!(format!("{:.2}", r(0.231098431, 0.142653352)), "1.62");
        assert_eq!(r(0.2, 0.2), 1.0);
    }

    #[test]
    fn disease_free_trajectory_is_constant() {
        let p = table1_row1();
        let init = SeirState::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let traj = integrate(init, &p, 30.0, 0.05).unwrap();
        assert!(traj.states().iter().all(|s| *s == init));
        let deaths = daily_deaths(&traj, 1e4, NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()).unwrap();
        assert_eq!(deaths.len(), 30);
        assert!(deaths.into_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sample_grid_includes_endpoints() {
        let p = table1_row1();
        let traj = integrate(SeirState::seeded(1e-5).unwrap(), &p, 1.0, 0.05).unwrap();
        assert_eq!(traj.len(), 21);
        assert_eq!(traj.time(20), 1.0);
        let traj = integrate(SeirState::seeded(1e-5).unwrap(), &p, 1.02, 0.05).unwrap();
        assert_eq!(traj.len(), 21);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = table1_row1();
        let init = SeirState::seeded(1e-5).unwrap();
        assert!(integrate(init, &p, 10.0, 0.0).is_err());
        assert!(integrate(init, &p, 0.01, 0.05).is_err());
        let bad = SeirState { s: 0.5, e: 0.0, i: 0.0, r: 0.0 };
        assert!(integrate(bad, &p, 10.0, 0.05).is_err());
        assert!(SeirParams::new(0.2, 0.0, 3.0).is_err());
        assert!(SeirParams::new(f64::NAN, 0.1, 3.0).is_err());
    }

    #[test]
    fn daily_deaths_telescopes() {
        let p = table1_row1();
        let traj = integrate(SeirState::seeded(1e-5).unwrap(), &p, 120.0, 0.05).unwrap();
        let start = NaiveDate::from_ymd_opt(2020, 3, 15).unwrap();
        let scale = 12_345.0;
        let deaths = daily_deaths(&traj, scale, start).unwrap();
        let total: f64 = deaths.into_values().iter().sum();
        let expected = scale * (traj.last().r - traj.states()[0].r);
        assert!((total - expected).abs() < 1e-9, "{total} vs {expected}");

        let zero = daily_deaths(&traj, 0.0, start).unwrap();
        assert!(zero.into_values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_trajectory_has_no_daily_deaths() {
        let p = table1_row1();
        let traj = integrate(SeirState::seeded(1e-5).unwrap(), &p, 0.5, 0.05).unwrap();
        assert!(matches!(
            daily_increments(&traj),
            Err(Error::TooShort { .. })
        ));
        let traj = integrate(SeirState::seeded(1e-5).unwrap(), &p, 3.0, 0.3).unwrap();
        assert!(daily_increments(&traj).is_err());
    }

    #[test]
    fn stepper_matches_integrate() {
        let p = SeirParams::new(0.23, 0.14, 3.0).unwrap();
        let settings = IntegrationSettings::default();
        let traj = integrate(settings.initial_state().unwrap(), &p, 60.0, settings.step).unwrap();
        let batch = daily_increments(&traj).unwrap();
        let mut stepper = DailyStepper::new(p, &settings).unwrap();
        let online: Vec<f64> = (0..60).map(|_| stepper.next_day()).collect();
        assert_eq!(batch, online);
        assert_eq!(stepper.state(), traj.last());
    }

    #[test]
    fn csv_export_shape() {
        let p = table1_row1();
        let traj = integrate(SirState::seeded(1e-3).unwrap(), &p, 0.1, 0.05).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,S,E,I,R");
        assert_eq!(lines[1], "0,0.999,0,0.001,0");
        assert_eq!(lines.len(), 4);
    }
}

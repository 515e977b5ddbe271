use chrono::NaiveDate;
use proptest::prelude::*;

use epiwave::calibration::FitCandidate;
use epiwave::epidemic::SeirParams;
use epiwave::forecast::{predict_wave, ForecastAssumptions, ForecastOptions};
use epiwave::mortality::Series;

fn prior(beta: f64, eta: f64, epsilon: f64, kappa: f64) -> FitCandidate {
    FitCandidate::new(SeirParams::new(beta, eta, epsilon).unwrap(), kappa, 0.5)
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 8, 1).unwrap()
}

#[test]
fn last_two_waves_give_expected_corners() {
    let priors = [prior(0.230520067, 0.14194734, 3.0, 1.7e4), prior(0.228682277, 0.142128916, 3.75, 1.4e4)];
    let opts = ForecastOptions { onset_threshold: Some(10.0), ..Default::default() };
    let band = predict_wave(&priors, start(), 200, &opts).unwrap();
    let a = &band.assumptions;
    assert!((a.central.r0 - 1.6165).abs() < 1e-4, "{}", a.central.r0);
    assert_eq!(a.central.epsilon, 3.375);
    assert_eq!(a.central.kappa, 1.55e4);
    assert!(a.lower.r0 < a.central.r0 && a.central.r0 < a.upper.r0);
    assert_eq!(band.central.start(), start());
    assert_eq!(band.central.len(), 200);
    assert!(band.central.values()[0] > 10.0);
}

#[test]
fn assumptions_round_trip_through_json() {
    let priors = [prior(0.21, 0.13, 3.0, 1e4), prior(0.25, 0.15, 4.0, 2e4)];
    let band = predict_wave(&priors, start(), 60, &ForecastOptions::default()).unwrap();
    let json = serde_json::to_string(&band.assumptions).unwrap();
    let back: ForecastAssumptions = serde_json::from_str(&json).unwrap();
    assert_eq!(back, band.assumptions);
    assert_eq!(back.priors[1].beta, 0.25);
}

#[test]
fn deterministic() {
    let priors = [prior(0.22, 0.14, 3.0, 1e4), prior(0.24, 0.13, 3.5, 1.2e4)];
    let opts = ForecastOptions { onset_threshold: Some(5.0), ..Default::default() };
    assert_eq!(
        predict_wave(&priors, start(), 120, &opts).unwrap(),
        predict_wave(&priors, start(), 120, &opts).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bands_bracket_central(
        rates in prop::collection::vec((0.18f64..0.3, 0.1f64..0.17, 2.0f64..5.0, 1e3f64..5e4), 1..4),
        onset in prop::option::of(1.0f64..20.0),
    ) {
        let priors: Vec<_> = rates.iter().map(|&(b, e, x, k)| prior(b, e, x, k)).collect();
        let opts = ForecastOptions { onset_threshold: onset, ..Default::default() };
        let band = predict_wave(&priors, start(), 150, &opts).unwrap();
        for k in 0..150 {
            let (l, c, u) = (band.lower.values()[k], band.central.values()[k], band.upper.values()[k]);
            prop_assert!(l <= c && c <= u);
            prop_assert!(l >= 0.0);
        }
        if priors.len() == 1 {
            prop_assert_eq!(&band.lower, &band.central);
            prop_assert_eq!(&band.upper, &band.central);
        }
    }
}

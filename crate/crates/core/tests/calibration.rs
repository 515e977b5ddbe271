use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epiwave::calibration::{
    average_top_candidates, fit_error, fitted_curve, grid_search, read_report_csv,
    write_report_csv, AxisRange, ErrorMetric, GridSpec,
};
use epiwave::epidemic::{daily_increments, integrate, IntegrationSettings, SeirParams};
use epiwave::mortality::{DailyCountSeries, Series};

/// A noiseless wave: `kappa` times the daily removed increment, cut where
/// it falls below 2% of its peak on either side.
fn synthetic_wave(params: &SeirParams, kappa: f64) -> DailyCountSeries {
    let settings = IntegrationSettings::default();
    let traj = integrate(settings.initial_state().unwrap(), params, 600.0, settings.step).unwrap();
    let daily = daily_increments(&traj).unwrap();
    let peak = (0..daily.len()).fold(0, |b, k| if daily[k] > daily[b] { k } else { b });
    let cut = 0.02 * daily[peak];
    let first = (0..peak).rev().find(|&k| daily[k] < cut).unwrap() + 1;
    let last = (peak..daily.len()).find(|&k| daily[k] < cut).unwrap() - 1;
    let start = NaiveDate::from_ymd_opt(2020, 9, 1).unwrap();
    DailyCountSeries::new(start, daily[first..=last].iter().map(|v| kappa * v).collect()).unwrap()
}

fn small_grid() -> GridSpec {
    GridSpec {
        beta: AxisRange::new(0.20, 0.26, 13).unwrap(),
        eta: AxisRange::new(0.12, 0.16, 9).unwrap(),
        epsilon: AxisRange::new(2.0, 5.0, 7).unwrap(),
    }
}

fn on_grid_truth() -> SeirParams {
    let grid = small_grid();
    SeirParams::new(grid.beta.values()[6], grid.eta.values()[4], grid.epsilon.values()[2]).unwrap()
}

#[test]
fn recovers_truth_on_grid_nodes() {
    let truth = on_grid_truth();
    let observed = synthetic_wave(&truth, 2.0e4);
    for metric in [ErrorMetric::NrmsePeak, ErrorMetric::CumMape] {
        let report = grid_search(&observed, &small_grid(), metric, 10, &IntegrationSettings::default()).unwrap();
        let best = report.best();
        assert_eq!(best.params, truth, "{metric}");
        assert!(best.error_pct < 1e-9, "{metric}: {}", best.error_pct);
        assert!((best.kappa / 2.0e4 - 1.0).abs() < 1e-9);
        assert_eq!(report.candidates.len(), 10);
        assert!(report.candidates.windows(2).all(|p| p[0].error_pct <= p[1].error_pct));
    }
}

#[test]
fn fit_error_tracks_noise_level() {
    let truth = SeirParams::new(0.23, 0.142, 3.0).unwrap();
    let clean = synthetic_wave(&truth, 2.0e4);
    let peak_idx = (0..clean.len()).fold(0, |b, k| if clean.values()[k] > clean.values()[b] { k } else { b });
    let peak = clean.values()[peak_idx];
    // Uniform noise with standard deviation 1% of the peak.
    let a = 3f64.sqrt() * 0.01 * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noisy: Vec<f64> = clean
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == peak_idx { v + a } else { (v + rng.gen_range(-a..a)).max(0.0) })
        .collect();
    let observed = DailyCountSeries::new(clean.start(), noisy).unwrap();
    let outcome = fit_error(&truth, &observed, ErrorMetric::NrmsePeak, &IntegrationSettings::default()).unwrap();
    assert!((0.85..=1.15).contains(&outcome.error_pct), "{}", outcome.error_pct);
}

#[test]
fn scale_invariance() {
    let observed = synthetic_wave(&SeirParams::new(0.231, 0.139, 3.3).unwrap(), 1.0e4);
    let scaled = DailyCountSeries::new(observed.start(), observed.values().iter().map(|v| 7.0 * v).collect()).unwrap();
    let settings = IntegrationSettings::default();
    let a = grid_search(&observed, &small_grid(), ErrorMetric::NrmsePeak, 5, &settings).unwrap();
    let b = grid_search(&scaled, &small_grid(), ErrorMetric::NrmsePeak, 5, &settings).unwrap();
    for (x, y) in a.candidates.iter().zip(&b.candidates) {
        assert_eq!(x.params, y.params);
        assert!((x.error_pct - y.error_pct).abs() < 1e-9);
        assert!((y.kappa / x.kappa - 7.0).abs() < 1e-9);
    }
}

#[test]
fn kappa_closes_the_total() {
    let observed = synthetic_wave(&SeirParams::new(0.24, 0.15, 2.5).unwrap(), 3.0e4);
    let report = grid_search(&observed, &small_grid(), ErrorMetric::NrmsePeak, 3, &IntegrationSettings::default()).unwrap();
    for c in &report.candidates {
        let curve = fitted_curve(c, &observed, &IntegrationSettings::default()).unwrap();
        let (obs, model): (f64, f64) = (observed.values().iter().sum(), curve.values().iter().sum());
        assert!((obs - model).abs() < 1e-6 * obs);
        assert_eq!(curve.start(), observed.start());
    }
}

#[test]
fn deterministic_across_thread_counts() {
    let observed = synthetic_wave(&SeirParams::new(0.228, 0.141, 3.7).unwrap(), 1.5e4);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            grid_search(&observed, &small_grid(), ErrorMetric::NrmsePeak, 10, &IntegrationSettings::default()).unwrap()
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_report_csv(&one.candidates, &mut a).unwrap();
    write_report_csv(&run(3).candidates, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn report_csv_round_trip() {
    let observed = synthetic_wave(&on_grid_truth(), 1.0e4);
    let report = grid_search(&observed, &small_grid(), ErrorMetric::NrmsePeak, 10, &IntegrationSettings::default()).unwrap();
    let mut buf = Vec::new();
    write_report_csv(&report.candidates, &mut buf).unwrap();
    assert_eq!(read_report_csv(buf.as_slice()).unwrap(), report.candidates);
}

#[test]
fn averaging_uses_mean_rates() {
    let observed = synthetic_wave(&on_grid_truth(), 1.0e4);
    let report = grid_search(&observed, &small_grid(), ErrorMetric::NrmsePeak, 4, &IntegrationSettings::default()).unwrap();
    let mean = average_top_candidates(&report, 4).unwrap();
    let beta = report.candidates.iter().map(|c| c.params.beta()).sum::<f64>() / 4.0;
    let eta = report.candidates.iter().map(|c| c.params.eta()).sum::<f64>() / 4.0;
    assert!((mean.params.beta() - beta).abs() < 1e-15);
    assert!((mean.r0 - beta / eta).abs() < 1e-12);
    assert!(average_top_candidates(&report, 5).is_err());
}

use chrono::NaiveDate;

use epiwave::fixture::{default_triangle, synthetic_istanbul, triangle_excess};
use epiwave::mortality::{load_excess, write_series, ExcessPipeline};
use epiwave::waves::{segment_waves, SegmentationConfig, WaveSegment};

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

#[test]
fn triangle_matches_hand_scan() {
    // Values 0, 5, ..., 100, ..., 5, 0. The first day above 10 is day 3
    // (15); no three-day run below 10 exists before the end, so the wave
    // closes on day 40. Floored sums: 5 * (3 + ... + 19) = 935 before the
    // peak, 5 * (20 + ... + 0) = 1050 from the peak on.
    let waves = segment_waves(&default_triangle(), &SegmentationConfig::default()).unwrap();
    assert_eq!(waves.len(), 1);
    let w = waves[0];
    assert_eq!((w.start_date, w.peak_date, w.end_date), (d(2020, 3, 4), d(2020, 3, 21), d(2020, 4, 10)));
    assert_eq!((w.rise_days, w.fall_days, w.total_days), (17, 20, 37));
    assert_eq!((w.deaths_to_peak, w.deaths_after_peak, w.total_deaths), (935.0, 1050.0, 1985.0));
}

#[test]
fn padded_triangle_closes_on_quiet_run() {
    let mut values = default_triangle().into_values();
    values.extend([0.0; 10]);
    let excess = epiwave::mortality::ExcessSeries::new(d(2020, 3, 1), values).unwrap();
    let w = segment_waves(&excess, &SegmentationConfig::default()).unwrap()[0];
    // Day 38 is exactly 10, so the first day of a run below 10 is day 39.
    assert_eq!(w.end_date, d(2020, 4, 9));
    assert_eq!(w.fall_days, 19);
}

#[test]
fn fixture_has_four_waves_in_order() {
    let data = synthetic_istanbul().unwrap();
    let excess = ExcessPipeline::new(data.weights.clone()).run(&data.reported, &data.histories).unwrap();
    let waves = segment_waves(&excess, &SegmentationConfig::default()).unwrap();
    assert_eq!(waves.len(), 4);
    for pair in waves.windows(2) {
        assert!(pair[0].end_date < pair[1].start_date);
    }
    for (found, truth) in waves.iter().zip(&data.waves) {
        // The trailing average delays the peak by about three days.
        let lag = (found.peak_date - truth.peak).num_days();
        assert!((0..=6).contains(&lag), "{}: lag {lag}", truth.label);
        assert!((found.total_deaths - truth.total_deaths).abs() / truth.total_deaths < 0.05);
    }
}

#[test]
fn csv_round_trip_preserves_segmentation() {
    let data = synthetic_istanbul().unwrap();
    let excess = ExcessPipeline::new(data.weights.clone()).run(&data.reported, &data.histories).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("excess.csv");
    write_series(&excess, std::fs::File::create(&path).unwrap()).unwrap();
    let config = SegmentationConfig::default();
    assert_eq!(
        segment_waves(&load_excess(&path).unwrap(), &config).unwrap(),
        segment_waves(&excess, &config).unwrap()
    );
}

#[test]
fn json_field_names() {
    let triangle = triangle_excess(d(2021, 1, 1), 15, 60.0).unwrap();
    let waves = segment_waves(&triangle, &SegmentationConfig::default()).unwrap();
    let json = serde_json::to_value(&waves).unwrap();
    let obj = json[0].as_object().unwrap();
    for key in ["start", "peak", "end", "rise_days", "fall_days", "total_days", "deaths_to_peak", "deaths_after_peak", "total_deaths"] {
        assert!(obj.contains_key(key), "{key}");
    }
    let back: Vec<WaveSegment> = serde_json::from_value(json).unwrap();
    assert_eq!(back, waves);
}

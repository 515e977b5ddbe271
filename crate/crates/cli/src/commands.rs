use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use serde_json::{json, Value};

use epiwave::calibration::{
    average_candidates, average_top_candidates, fitted_curve, grid_search, read_report_csv,
    write_error_scan, write_report_csv, AxisRange, ErrorMetric, GridSpec,
};
use epiwave::epidemic::{integrate, IntegrationSettings, SeirParams, SeirState, SirState, Trajectory, DEFAULT_SEED, DEFAULT_STEP};
use epiwave::epidemic::{daily_deaths, Compartments};
use epiwave::finalsize::{final_size_curve, solve_final_size, write_curve_csv, write_table_csv};
use epiwave::fixture::{default_triangle, synthetic_istanbul, Fixture};
use epiwave::forecast::{predict_wave, ForecastOptions};
use epiwave::mortality::{
    load_excess, load_series, write_series, BaselineWeights, DailyCountSeries, ExcessPipeline,
    ExcessSeries, InputFormat, Series, SmoothingOrder,
};
use epiwave::waves::{segment_waves, SegmentationConfig, WaveSegment};

use crate::config::Config;
use crate::{Cli, CliError, Command};

type CliResult<T = ()> = Result<T, CliError>;

/// Shared state for one invocation: resolved common flags and the list of
/// files written so far.
struct Run {
    config: Config,
    out: PathBuf,
    data_dir: Option<PathBuf>,
    quiet: bool,
    timestamp: bool,
    outputs: Vec<String>,
}

impl Run {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn input(&self, path: PathBuf) -> PathBuf {
        match &self.data_dir {
            Some(root) if path.is_relative() => root.join(path),
            _ => path,
        }
    }

    fn write<F>(&mut self, name: &str, body: F) -> CliResult
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| write_error(&path, e))?;
        let mut buf = BufWriter::new(file);
        body(&mut buf)?;
        buf.flush().map_err(|e| write_error(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl serde::Serialize) -> CliResult {
        let path = self.out.join(name);
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| write_error(&path, e.into()))?;
            writeln!(w).map_err(|e| write_error(&path, e))
        })
    }

    /// Writes `run.json`: the command, its resolved settings and outputs.
    fn finish(mut self, command: &str, settings: Value) -> CliResult {
        let mut meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "settings": settings,
            "outputs": self.outputs,
        });
        if self.timestamp {
            meta["timestamp"] = json!(chrono::Utc::now().to_rfc3339());
        }
        self.write_json("run.json", &meta)
    }
}

fn write_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

fn io(path: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("cannot write {path}: {e}"))
}

pub fn run(cli: Cli) -> CliResult {
    let config = match &cli.common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let out = config.pick_or("out", cli.common.out.clone(), PathBuf::from("."))?;
    std::fs::create_dir_all(&out).map_err(|e| write_error(&out, e))?;
    let run = Run {
        quiet: config.switch("quiet", cli.common.quiet)?,
        timestamp: !config.switch("no-timestamp", cli.common.no_timestamp)?,
        data_dir: config.pick("data-dir", cli.common.data_dir.clone())?,
        config,
        out,
        outputs: Vec::new(),
    };
    match cli.command {
        Command::Excess(args) => excess(run, args),
        Command::Waves(args) => waves(run, args),
        Command::Fit(args) => fit(run, args),
        Command::Forecast(args) => forecast(run, args),
        Command::Finalsize(args) => finalsize(run, args),
        Command::Simulate(args) => simulate(run, args),
    }
}

fn fmt_f(x: f64, decimals: usize) -> String {
    // `+ 0.0` turns a negative zero into a positive one.
    format!("{:.*}", decimals, x + 0.0)
}

// ---------------------------------------------------------------- excess

#[derive(Debug, Args)]
pub struct ExcessArgs {
    /// Reported daily deaths (`date,value`).
    #[arg(long, value_name = "PATH")]
    reported: Option<PathBuf>,

    /// Baseline history, most recent year first; repeat once per weight.
    #[arg(long, value_name = "PATH")]
    history: Vec<PathBuf>,

    /// Baseline weights, most recent year first [default: 0.4,0.3,0.2,0.05,0.05]
    #[arg(long, value_delimiter = ',', value_name = "W,...")]
    weights: Vec<f64>,

    /// Smooth `before` or `after` subtracting the baseline [default: before]
    #[arg(long, value_name = "ORDER")]
    smoothing: Option<SmoothingOrder>,

    /// Skip the 7-day trailing average.
    #[arg(long)]
    no_smoothing: bool,

    /// Use a bundled synthetic dataset instead of input files.
    #[arg(long, value_name = "NAME", conflicts_with_all = ["reported", "history"])]
    fixture: Option<Fixture>,
}

struct ExcessInputs {
    reported: DailyCountSeries,
    histories: Vec<DailyCountSeries>,
    source: Value,
}

fn excess_inputs(run: &Run, args: &ExcessArgs) -> CliResult<ExcessInputs> {
    let cfg = &run.config;
    if let Some(fixture) = cfg.pick("fixture", args.fixture)? {
        if fixture != Fixture::SyntheticIstanbul {
            return Err(CliError::Usage("excess needs the synthetic-istanbul fixture".into()));
        }
        let data = synthetic_istanbul()?;
        return Ok(ExcessInputs {
            reported: data.reported,
            histories: data.histories,
            source: json!({ "fixture": "synthetic-istanbul" }),
        });
    }
    let reported = cfg
        .pick("reported", args.reported.clone())?
        .ok_or_else(|| CliError::Usage("excess needs --reported or --fixture".into()))?;
    let histories = cfg.list("history", args.history.clone())?;
    if histories.is_empty() {
        return Err(CliError::Usage("excess needs at least one --history".into()));
    }
    let load = |p: &PathBuf| load_series(run.input(p.clone()), InputFormat::Csv);
    Ok(ExcessInputs {
        reported: load(&reported)?,
        histories: histories.iter().map(load).collect::<Result<_, _>>()?,
        source: json!({ "reported": reported, "history": histories }),
    })
}

fn pipeline(run: &Run, args: &ExcessArgs) -> CliResult<ExcessPipeline> {
    let cfg = &run.config;
    let weights = cfg.list("weights", args.weights.clone())?;
    let weights = if weights.is_empty() {
        BaselineWeights::five_year_default()
    } else {
        BaselineWeights::from_fractions(&weights)?
    };
    let mut pipeline = ExcessPipeline::new(weights);
    pipeline.order = cfg.pick_or("smoothing", args.smoothing, SmoothingOrder::default())?;
    pipeline.smooth = !cfg.switch("no-smoothing", args.no_smoothing)?;
    Ok(pipeline)
}

fn excess(mut run: Run, args: ExcessArgs) -> CliResult {
    let pipeline = pipeline(&run, &args)?;
    let inputs = excess_inputs(&run, &args)?;
    let excess = pipeline.run(&inputs.reported, &inputs.histories)?;
    let expected = pipeline
        .expected(&inputs.reported, &inputs.histories)?
        .window(inputs.reported.start(), inputs.reported.end())
        .expect("baseline covers the reported range");

    run.write("excess.csv", |w| write_series(&excess, w).map_err(io("excess.csv")))?;
    run.write("expected.csv", |w| write_series(&expected, w).map_err(io("expected.csv")))?;
    run.say(format!(
        "total excess: {} deaths over {} days ({} to {})",
        fmt_f(excess.total(), 1),
        excess.len(),
        excess.start(),
        excess.end()
    ));
    let settings = json!({
        "input": inputs.source,
        "weights": pipeline.weights.weights().collect::<Vec<_>>(),
        "smoothing": if pipeline.smooth { format!("{:?}", pipeline.order) } else { "none".into() },
        "total_excess": excess.total(),
    });
    run.finish("excess", settings)
}

// ---------------------------------------------------------------- waves

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Excess series (`date,value`, negatives allowed).
    #[arg(long, value_name = "PATH")]
    excess: Option<PathBuf>,

    /// Use a bundled synthetic dataset: `triangle` or `synthetic-istanbul`.
    #[arg(long, value_name = "NAME", conflicts_with = "excess")]
    fixture: Option<Fixture>,

    /// Deaths per day that open a wave [default: 10]
    #[arg(long, value_name = "X")]
    start_threshold: Option<f64>,

    /// Deaths per day that close a wave [default: 10]
    #[arg(long, value_name = "X")]
    end_threshold: Option<f64>,

    /// Consecutive days needed to open or close a wave [default: 3]
    #[arg(long, value_name = "DAYS")]
    persistence: Option<usize>,

    /// Shorter waves are discarded [default: 21]
    #[arg(long, value_name = "DAYS")]
    min_wave_days: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WavesArgs {
    #[command(flatten)]
    segment: SegmentArgs,
}

fn load_excess_input(run: &Run, args: &SegmentArgs) -> CliResult<(ExcessSeries, Value)> {
    let cfg = &run.config;
    if let Some(fixture) = cfg.pick("fixture", args.fixture)? {
        let series = match fixture {
            Fixture::Triangle => default_triangle(),
            Fixture::SyntheticIstanbul => {
                let data = synthetic_istanbul()?;
                ExcessPipeline::new(data.weights).run(&data.reported, &data.histories)?
            }
        };
        let name = match fixture {
            Fixture::Triangle => "triangle",
            Fixture::SyntheticIstanbul => "synthetic-istanbul",
        };
        return Ok((series, json!({ "fixture": name })));
    }
    let path = cfg
        .pick("excess", args.excess.clone())?
        .ok_or_else(|| CliError::Usage("needs --excess or --fixture".into()))?;
    Ok((load_excess(run.input(path.clone()))?, json!({ "excess": path })))
}

fn segmentation(run: &Run, args: &SegmentArgs) -> CliResult<SegmentationConfig> {
    let cfg = &run.config;
    let d = SegmentationConfig::default();
    let config = SegmentationConfig {
        start_threshold: cfg.pick_or("start-threshold", args.start_threshold, d.start_threshold)?,
        end_threshold: cfg.pick_or("end-threshold", args.end_threshold, d.end_threshold)?,
        min_persistence_days: cfg.pick_or("persistence", args.persistence, d.min_persistence_days)?,
        min_wave_days: cfg.pick_or("min-wave-days", args.min_wave_days, d.min_wave_days)?,
    };
    config.validate()?;
    Ok(config)
}

fn describe(index: usize, w: &WaveSegment) -> String {
    format!(
        "wave {index}: {} .. {} .. {}  rise {} d, fall {} d, {} deaths",
        w.start_date,
        w.peak_date,
        w.end_date,
        w.rise_days,
        w.fall_days,
        fmt_f(w.total_deaths, 0)
    )
}

fn waves(mut run: Run, args: WavesArgs) -> CliResult {
    let (series, source) = load_excess_input(&run, &args.segment)?;
    let config = segmentation(&run, &args.segment)?;
    let waves = segment_waves(&series, &config)?;
    run.write_json("waves.json", &waves)?;
    run.say(format!("{} wave(s)", waves.len()));
    for (k, w) in waves.iter().enumerate() {
        run.say(describe(k + 1, w));
    }
    run.finish("waves", json!({ "input": source, "segmentation": config }))
}

// ---------------------------------------------------------------- fit

#[derive(Debug, Args)]
pub struct IntegrationArgs {
    /// RK4 step in days; must divide one day [default: 0.05]
    #[arg(long, value_name = "DAYS")]
    step: Option<f64>,

    /// Initial exposed and infectious fraction [default: 1e-5]
    #[arg(long, value_name = "FRACTION")]
    seed_fraction: Option<f64>,
}

fn integration(run: &Run, args: &IntegrationArgs) -> CliResult<IntegrationSettings> {
    let settings = IntegrationSettings {
        step: run.config.pick_or("step", args.step, DEFAULT_STEP)?,
        seed: run.config.pick_or("seed-fraction", args.seed_fraction, DEFAULT_SEED)?,
    };
    settings.steps_per_day()?;
    settings.initial_state()?;
    Ok(settings)
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    segment: SegmentArgs,

    /// Wave to fit, counting from 1 in the segmented series.
    #[arg(long, value_name = "INDEX", conflicts_with = "whole_series")]
    wave: Option<usize>,

    /// Fit the whole series instead of one wave.
    #[arg(long)]
    whole_series: bool,

    /// Transmission rate axis, `min:max:steps` or a single value [default: 0.15:0.35:200]
    #[arg(long, value_name = "AXIS")]
    beta: Option<AxisRange>,

    /// Removal rate axis [default: 0.05:0.2:150]
    #[arg(long, value_name = "AXIS")]
    eta: Option<AxisRange>,

    /// Incubation rate axis [default: 2:5:7]
    #[arg(long, value_name = "AXIS")]
    epsilon: Option<AxisRange>,

    /// `nrmse-peak` or `cum-mape` [default: nrmse-peak]
    #[arg(long, value_name = "METRIC")]
    metric: Option<ErrorMetric>,

    /// Number of ranked candidates to keep [default: 10]
    #[arg(long, value_name = "N")]
    top_k: Option<usize>,

    /// Worker threads for the grid [default: all cores]
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    #[command(flatten)]
    integration: IntegrationArgs,
}

fn fit(mut run: Run, args: FitArgs) -> CliResult {
    let cfg = &run.config;
    let (series, source) = load_excess_input(&run, &args.segment)?;
    let whole = cfg.switch("whole-series", args.whole_series)?;
    let wave_index = cfg.pick("wave", args.wave)?;
    let d = GridSpec::default();
    let grid = GridSpec {
        beta: cfg.pick_or("beta", args.beta, d.beta)?,
        eta: cfg.pick_or("eta", args.eta, d.eta)?,
        epsilon: cfg.pick_or("epsilon", args.epsilon, d.epsilon)?,
    };
    grid.validate()?;
    let metric = cfg.pick_or("metric", args.metric, ErrorMetric::default())?;
    let top_k = cfg.pick_or("top-k", args.top_k, 10)?;
    if top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let settings = integration(&run, &args.integration)?;
    if let Some(threads) = cfg.pick("threads", args.threads)? {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }

    let (observed, wave) = match (whole, wave_index) {
        (true, _) => (series.floored(), None),
        (false, None) => return Err(CliError::Usage("fit needs --wave <INDEX> or --whole-series".into())),
        (false, Some(index)) => {
            let segmentation = segmentation(&run, &args.segment)?;
            let waves = segment_waves(&series, &segmentation)?;
            let wave = index
                .checked_sub(1)
                .and_then(|k| waves.get(k))
                .copied()
                .ok_or_else(|| {
                    CliError::Usage(format!("wave {index} out of range: {} wave(s) detected", waves.len()))
                })?;
            let window = series
                .window(wave.start_date, wave.end_date)
                .expect("wave lies inside the series");
            (window.floored(), Some(wave))
        }
    };

    let mut report = grid_search(&observed, &grid, metric, top_k, &settings)?;
    if let Some(wave) = wave {
        report = report.with_wave(wave);
    }
    let best = *report.best();
    let mean = average_top_candidates(&report, report.candidates.len())?;
    let curve = fitted_curve(&best, &observed, &settings)?;

    run.write("fit_report.csv", |w| write_report_csv(&report.candidates, w).map_err(io("fit_report.csv")))?;
    for (name, axis) in [
        ("error_scan_beta.csv", &report.surface.beta),
        ("error_scan_eta.csv", &report.surface.eta),
        ("error_scan_epsilon.csv", &report.surface.epsilon),
    ] {
        run.write(name, |w| write_error_scan(axis, w).map_err(io(name)))?;
    }
    run.write("fit_curve.csv", |w| {
        writeln!(w, "date,observed,fitted").map_err(io("fit_curve.csv"))?;
        for ((date, obs), fitted) in observed.iter().zip(curve.values()) {
            writeln!(w, "{},{},{}", date.format("%Y-%m-%d"), obs, fitted).map_err(io("fit_curve.csv"))?;
        }
        Ok(())
    })?;

    if let Some(w) = &wave {
        run.say(describe(wave_index.unwrap_or(0), w));
    }
    run.say(format!(
        "best: R0 {}  beta {}  eta {}  epsilon {}  kappa {}  error {}%",
        fmt_f(best.r0, 3),
        fmt_f(best.params.beta(), 4),
        fmt_f(best.params.eta(), 4),
        fmt_f(best.params.epsilon(), 2),
        fmt_f(best.kappa, 1),
        fmt_f(best.error_pct, 3),
    ));
    run.say(format!(
        "mean of top {}: R0 {}  beta {}  eta {}  epsilon {}",
        report.candidates.len(),
        fmt_f(mean.r0, 3),
        fmt_f(mean.params.beta(), 4),
        fmt_f(mean.params.eta(), 4),
        fmt_f(mean.params.epsilon(), 2),
    ));
    let settings = json!({
        "input": source,
        "wave_index": if whole { Value::Null } else { json!(wave_index) },
        "wave": wave,
        "grid": {
            "beta": grid.beta.to_string(),
            "eta": grid.eta.to_string(),
            "epsilon": grid.epsilon.to_string(),
            "cells": grid.cell_count(),
        },
        "metric": metric.to_string(),
        "top_k": top_k,
        "integration": settings,
        "best": best,
        "mean_of_top": mean,
    });
    run.finish("fit", settings)
}

// ---------------------------------------------------------------- forecast

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Fit report from an earlier wave, oldest first; repeatable.
    #[arg(long, value_name = "PATH")]
    prior: Vec<PathBuf>,

    /// Use only the most recent N priors [default: 2]
    #[arg(long, value_name = "N")]
    last: Option<usize>,

    /// Average the best N rows of each report into one prior [default: 10]
    #[arg(long, value_name = "N")]
    average: Option<usize>,

    /// First forecast day (YYYY-MM-DD).
    #[arg(long, value_name = "DATE")]
    start: Option<NaiveDate>,

    /// Days to forecast [default: 200]
    #[arg(long, value_name = "DAYS")]
    horizon: Option<usize>,

    /// Align the start date with the day the central curve first exceeds
    /// this many deaths [default: 10]
    #[arg(long, value_name = "X", conflicts_with = "no_onset")]
    onset_threshold: Option<f64>,

    /// Start at the seeding instant instead of the onset.
    #[arg(long)]
    no_onset: bool,

    #[command(flatten)]
    integration: IntegrationArgs,
}

fn forecast(mut run: Run, args: ForecastArgs) -> CliResult {
    let cfg = &run.config;
    let paths = cfg.list("prior", args.prior.clone())?;
    if paths.is_empty() {
        return Err(CliError::Usage("forecast needs at least one --prior".into()));
    }
    let last = cfg.pick_or("last", args.last, 2)?;
    let average = cfg.pick_or("average", args.average, 10)?;
    if last == 0 || average == 0 {
        return Err(CliError::Usage("--last and --average must be at least 1".into()));
    }
    let start = cfg
        .pick("start", args.start)?
        .ok_or_else(|| CliError::Usage("forecast needs --start".into()))?;
    let horizon = cfg.pick_or("horizon", args.horizon, 200)?;
    let onset_threshold = if args.no_onset {
        None
    } else {
        Some(cfg.pick_or("onset-threshold", args.onset_threshold, 10.0)?)
    };
    let options = ForecastOptions {
        integration: integration(&run, &args.integration)?,
        onset_threshold,
    };

    let used = &paths[paths.len().saturating_sub(last)..];
    let mut priors = Vec::with_capacity(used.len());
    for path in used {
        let resolved = run.input(path.clone());
        let file = File::open(&resolved).map_err(|e| CliError::Input(format!("cannot read {}: {e}", resolved.display())))?;
        let candidates = read_report_csv(file)?;
        priors.push(average_candidates(&candidates, average.min(candidates.len().max(1)))?);
    }
    let band = predict_wave(&priors, start, horizon, &options)?;

    run.write("forecast.csv", |w| band.write_csv(w).map_err(io("forecast.csv")))?;
    run.write_json("forecast_assumptions.json", &band.assumptions)?;
    let a = &band.assumptions;
    run.say(format!(
        "R0 central {}  lower {}  upper {}",
        fmt_f(a.central.r0, 3),
        fmt_f(a.lower.r0, 3),
        fmt_f(a.upper.r0, 3)
    ));
    let peak = band
        .central
        .iter()
        .fold(None::<(NaiveDate, f64)>, |best, (d, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((d, v)),
        });
    if let Some((date, value)) = peak {
        run.say(format!("central peak: {} deaths/day on {date}", fmt_f(value, 1)));
    }
    let settings = json!({
        "priors": used,
        "average": average,
        "start": start,
        "horizon": horizon,
        "onset_threshold": onset_threshold,
    });
    run.finish("forecast", settings)
}

// ---------------------------------------------------------------- finalsize

#[derive(Debug, Args)]
pub struct FinalsizeArgs {
    /// Print the final size for one basic reproduction number.
    #[arg(long, value_name = "R0")]
    r0: Option<f64>,

    /// Write the curve `min:max:points` to final_size.csv.
    #[arg(long, value_name = "RANGE")]
    curve: Option<CurveRange>,

    /// Table row `label=r0` for herd_immunity.csv; repeatable.
    #[arg(long, value_name = "LABEL=R0")]
    table: Vec<String>,
}

/// `min:max:points` for the final-size curve.
#[derive(Clone, Copy, Debug)]
struct CurveRange {
    min: f64,
    max: f64,
    points: usize,
}

impl std::str::FromStr for CurveRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("{s:?} is not min:max:points");
        match s.split(':').map(str::trim).collect::<Vec<_>>().as_slice() {
            [min, max, points] => Ok(Self {
                min: min.parse().map_err(|_| bad())?,
                max: max.parse().map_err(|_| bad())?,
                points: points.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

fn parse_table_row(row: &str) -> CliResult<(String, f64)> {
    let (label, r0) = row
        .rsplit_once('=')
        .ok_or_else(|| CliError::Usage(format!("table row {row:?} is not label=r0")))?;
    let r0 = r0
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("table row {row:?}: bad r0")))?;
    Ok((label.trim().to_string(), r0))
}

fn finalsize(mut run: Run, args: FinalsizeArgs) -> CliResult {
    let cfg = &run.config;
    let r0 = cfg.pick("r0", args.r0)?;
    let curve = cfg.pick("curve", args.curve)?;
    let table: Vec<(String, f64)> = if args.table.is_empty() {
        // In a config file rows are separated by `;` since labels may hold commas.
        cfg.pick::<String>("table", None)?
            .map(|s| s.split(';').map(parse_table_row).collect::<CliResult<_>>())
            .transpose()?
            .unwrap_or_default()
    } else {
        args.table.iter().map(|r| parse_table_row(r)).collect::<CliResult<_>>()?
    };
    if r0.is_none() && curve.is_none() && table.is_empty() {
        return Err(CliError::Usage("finalsize needs --r0, --curve or --table".into()));
    }

    let mut settings = json!({});
    if let Some(r0) = r0 {
        let res = solve_final_size(r0)?;
        // The value is the command's result, so --quiet does not hide it.
        println!("{}", fmt_f(res.r_f, 3));
        settings["r0"] = json!(r0);
        settings["r_f"] = json!(res.r_f);
    }
    if let Some(range) = curve {
        let points = final_size_curve(range.min, range.max, range.points)?;
        run.write("final_size.csv", |w| write_curve_csv(&points, w).map_err(io("final_size.csv")))?;
        settings["curve"] = json!({ "min": range.min, "max": range.max, "points": range.points });
    }
    if !table.is_empty() {
        run.write("herd_immunity.csv", |w| write_table_csv(&table, w).map_err(CliError::from))?;
        settings["table"] = json!(table);
    }
    run.finish("finalsize", settings)
}

// ---------------------------------------------------------------- simulate

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
enum Model {
    Sir,
    Seir,
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Compartment model [default: seir]
    #[arg(long, value_enum)]
    model: Option<Model>,

    /// Transmission rate per day.
    #[arg(long)]
    beta: Option<f64>,

    /// Removal rate per day.
    #[arg(long)]
    eta: Option<f64>,

    /// Incubation rate per day, SEIR only [default: 3]
    #[arg(long)]
    epsilon: Option<f64>,

    /// Days to integrate [default: 200]
    #[arg(long, value_name = "DAYS")]
    days: Option<f64>,

    /// RK4 step in days [default: 0.05]
    #[arg(long, value_name = "DAYS")]
    step: Option<f64>,

    /// Initial infectious fraction [default: 1e-5]
    #[arg(long, value_name = "FRACTION")]
    i0: Option<f64>,

    /// Initial exposed fraction, SEIR only [default: 1e-5]
    #[arg(long, value_name = "FRACTION")]
    e0: Option<f64>,

    /// Deaths per unit removed fraction; with --start also writes deaths.csv.
    #[arg(long, requires = "start")]
    kappa: Option<f64>,

    /// Calendar date of day 0 for deaths.csv.
    #[arg(long, value_name = "DATE", requires = "kappa")]
    start: Option<NaiveDate>,
}

fn simulate(mut run: Run, args: SimulateArgs) -> CliResult {
    let cfg = &run.config;
    let model = cfg.pick_or("model", args.model, Model::Seir)?;
    let beta = cfg.pick("beta", args.beta)?.ok_or_else(|| CliError::Usage("simulate needs --beta".into()))?;
    let eta = cfg.pick("eta", args.eta)?.ok_or_else(|| CliError::Usage("simulate needs --eta".into()))?;
    let epsilon = cfg.pick_or("epsilon", args.epsilon, 3.0)?;
    let days = cfg.pick_or("days", args.days, 200.0)?;
    let step = cfg.pick_or("step", args.step, DEFAULT_STEP)?;
    let i0 = cfg.pick_or("i0", args.i0, DEFAULT_SEED)?;
    let e0 = cfg.pick_or("e0", args.e0, if model == Model::Seir { DEFAULT_SEED } else { 0.0 })?;
    let kappa = cfg.pick("kappa", args.kappa)?;
    let start = cfg.pick("start", args.start)?;
    if !(days.is_finite() && days > 0.0) {
        return Err(CliError::Usage(format!("--days must be positive, got {days}")));
    }
    let params = SeirParams::new(beta, eta, epsilon)?;

    fn emit<S: Compartments>(run: &mut Run, traj: &Trajectory<S>, kappa: Option<f64>, start: Option<NaiveDate>) -> CliResult {
        run.write("trajectory.csv", |w| traj.write_csv(w).map_err(io("trajectory.csv")))?;
        if let (Some(kappa), Some(start)) = (kappa, start) {
            let deaths = daily_deaths(traj, kappa, start)?;
            run.write("deaths.csv", |w| write_series(&deaths, w).map_err(io("deaths.csv")))?;
        }
        let end = traj.last().to_seir();
        let (t_peak, i_peak) = traj.peak_infectious();
        run.say(format!(
            "day {}: S {}  R {}  peak I {} at day {}",
            epiwave::format_significant(traj.time(traj.len() - 1), 6),
            epiwave::format_significant(end.s, 6),
            epiwave::format_significant(end.r, 6),
            epiwave::format_significant(i_peak, 6),
            epiwave::format_significant(t_peak, 6),
        ));
        Ok(())
    }

    match model {
        Model::Sir => {
            if args.e0.is_some() {
                return Err(CliError::Usage("--e0 applies to the SEIR model only".into()));
            }
            let traj = integrate(SirState::new(1.0 - i0, i0, 0.0)?, &params, days, step)?;
            emit(&mut run, &traj, kappa, start)?;
        }
        Model::Seir => {
            let traj = integrate(SeirState::new(1.0 - e0 - i0, e0, i0, 0.0)?, &params, days, step)?;
            emit(&mut run, &traj, kappa, start)?;
        }
    }
    let settings = json!({
        "model": format!("{model:?}").to_lowercase(),
        "params": params,
        "r0": params.r0(),
        "days": days,
        "step": step,
        "i0": i0,
        "e0": e0,
        "kappa": kappa,
        "start": start,
    });
    run.finish("simulate", settings)
}

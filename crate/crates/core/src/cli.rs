// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end: CSV ingestion, detection, simulation and
//! benchmarking with JSON and CSV outputs.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::detect::{detect, DetectConfig, Detection, Method};
use crate::error::{ParcsError, Result};
use crate::experiment::{realisation_rng, run_benchmark, BenchmarkConfig, BenchmarkOutput};
use crate::infer::{BlockSize, BootstrapConfig, CpTest};
use crate::metrics::{pp_curve, roc_curve, LevelOutcomes, MetricReport, RateDefinition, Scoring};
use crate::rng::RngSpec;
use crate::series::{MultiSeries, TimeSeries};
use crate::synth::{generate, scenario, ScenarioOverrides};

pub const SCHEMA: &str = "parcs-result/1";
pub const BENCHMARK_COLUMNS: [&str; 9] = [
    "condition",
    "method",
    "alpha_nominal",
    "type1",
    "type2",
    "acc_c1",
    "acc_c2",
    "cb_mean",
    "cb_median",
];

#[derive(Debug, Parser)]
#[command(name = "parcs", version, about = "Multiple change-point detection on CUSUM curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect change points in a CSV file (rows are time steps, columns covariates).
    Detect(DetectArgs),
    /// Write realisations of a simulation preset.
    Simulate(SimulateArgs),
    /// Generate, detect and score realisations of a preset.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Nominal significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Number of bootstrap permutations.
    #[arg(long = "bootstrap", default_value_t = 10_000)]
    permutations: usize,
    /// Block length for the permutation bootstrap, or `auto` to estimate it.
    #[arg(long, default_value = "auto")]
    block_size: BlockSize,
    /// Upper bound on the estimated MA order.
    #[arg(long, default_value_t = 9)]
    ma_upper_bound: usize,
    /// Level of the autocorrelation test that picks the MA order.
    #[arg(long, default_value_t = 0.05)]
    ma_alpha: f64,
    /// Permute all covariates with one shared block order.
    #[arg(long)]
    shared_permutation: bool,
    /// Model order M for PARCS.
    #[arg(long, default_value_t = 3)]
    max_cps: usize,
    /// Forward-stage bound L (defaults to ceil(2.5 M)).
    #[arg(long)]
    forward: Option<usize>,
    /// Locator weighting exponent for the CUSUM methods.
    #[arg(long)]
    gamma: Option<f64>,
    /// Partitioning rounds for binary segmentation.
    #[arg(long, default_value_t = 1)]
    max_depth: usize,
    /// Preprocessing applied before detection.
    #[arg(long, value_parser = ["sqrt"])]
    preprocess: Option<String>,
    /// Random seed; drawn from system entropy and reported when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

impl TestArgs {
    fn detect_config(&self, method: Method) -> DetectConfig {
        DetectConfig {
            method,
            max_cps: self.max_cps,
            forward: self.forward,
            gamma: self.gamma,
            max_depth: self.max_depth,
            sqrt_preprocess: self.preprocess.is_some(),
            bootstrap: BootstrapConfig {
                permutations: self.permutations,
                alpha: self.alpha,
                block_size: self.block_size,
                ma_upper_bound: self.ma_upper_bound,
                ma_alpha: self.ma_alpha,
                shared_permutation: self.shared_permutation,
                ..BootstrapConfig::default()
            },
        }
    }
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "parcs")]
    method: Method,
    #[command(flatten)]
    test: TestArgs,
    /// JSON output path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    /// Parameter override `key=value` (T, sigma, w0, c, w1, w2); repeatable.
    #[arg(long = "override")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 1)]
    realisations: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// `per-realisation` writes one CSV per realisation; `long` writes a single
    /// `realisation,t,covariate,value` table.
    #[arg(long, default_value = "per-realisation", value_parser = ["per-realisation", "long"])]
    format: String,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long = "override")]
    overrides: Vec<String>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "parcs")]
    methods: Vec<Method>,
    /// Comma-separated nominal levels.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    alpha_grid: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    realisations: usize,
    #[command(flatten)]
    test: TestArgs,
    /// Half-width of the matching window (defaults to round(0.05 T)).
    #[arg(long)]
    window: Option<usize>,
    /// Error-rate definition: `count` or `windowed`.
    #[arg(long, default_value = "count")]
    rates: RateDefinition,
    /// Also score a matched pure-noise ensemble and report ROC points.
    #[arg(long)]
    roc: bool,
    /// Also write wall-clock timings to `<stem>.timings.csv`.
    #[arg(long)]
    timings: bool,
    /// Metrics CSV path; a `<stem>.summary.json` sidecar is written beside it.
    #[arg(long)]
    out: PathBuf,
}

/// Runs the command line given by `args` (including the program name) and
/// returns the process exit code: 0 on success, 2 for usage, input or
/// configuration errors, 1 for internal or output failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Detect(a) => run_detect(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Benchmark(a) => run_benchmark_command(a),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> ParcsError {
    ParcsError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

/// Reads a CSV file with one row per time step and one column per covariate.
pub fn ingest_csv(path: &Path) -> Result<MultiSeries> {
    let file = fs::File::open(path)
        .map_err(|e| ParcsError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(file)
}

/// Parses CSV text; a first row without any numeric cell is taken as a header.
pub fn parse_csv<R: Read>(reader: R) -> Result<MultiSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for record in rdr.records() {
        let record = record.map_err(|e| ParcsError::Parse(e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            if record.iter().all(|c| c.parse::<f64>().is_err()) {
                continue;
            }
        }
        if columns.is_empty() {
            columns = vec![Vec::new(); record.len()];
        } else if record.len() != columns.len() {
            return Err(ParcsError::Parse(format!(
                "ragged row {row}: {} cells, expected {}",
                record.len(),
                columns.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    ParcsError::Parse(format!("row {row}, column {}: '{cell}' is not a finite number", col + 1))
                })?;
            columns[col].push(v);
        }
    }
    if columns.is_empty() {
        return Err(ParcsError::Parse("no data rows".into()));
    }
    let len = columns[0].len();
    if len < TimeSeries::MIN_LEN {
        return Err(ParcsError::Parse(format!("T={len} rows; at least {} are required", TimeSeries::MIN_LEN)));
    }
    MultiSeries::from_columns(columns)
}

/// Writes `series` with a `x1,...,xN` header in shortest round-trip decimals.
pub fn write_series_csv<W: Write>(series: &MultiSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (1..=series.covariates()).map(|n| format!("x{n}")).collect();
    w.write_record(&header).map_err(|e| ParcsError::Io(e.to_string()))?;
    for t in 0..series.len() {
        let row = series.columns().iter().map(|c| c.values()[t].to_string());
        w.write_record(row).map_err(|e| ParcsError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cp_json(t: &CpTest) -> Value {
    json!({
        "location": t.location,
        "rank": t.rank,
        "statistic": t.statistic,
        "threshold": t.threshold,
        "p_value": t.p_value,
        "step_weights": t.step_weights,
    })
}

/// Runs detection and assembles the versioned result document.
pub fn detect_document(series: &MultiSeries, config: &DetectConfig, seed: u64) -> Result<Value> {
    let d = detect(series, config, RngSpec::new(seed))?;
    result_document(series, config, seed, &d)
}

/// Result document for a detection already run on `series` with `config`.
pub fn result_document(series: &MultiSeries, config: &DetectConfig, seed: u64, d: &Detection) -> Result<Value> {
    let boot = &config.bootstrap;
    Ok(json!({
        "schema": SCHEMA,
        "method": config.method.name(),
        "T": series.len(),
        "N": series.covariates(),
        "parameters": {
            "max_cps": config.max_cps,
            "forward": config.forward,
            "gamma": config.locator()?.gamma,
            "max_depth": config.max_depth,
            "preprocess": if config.sqrt_preprocess { Some("sqrt") } else { None },
            "alpha": boot.alpha,
            "bootstrap": boot.permutations,
            "block_size": boot.block_size.to_string(),
            "ma_upper_bound": boot.ma_upper_bound,
            "ma_alpha": boot.ma_alpha,
            "shared_permutation": boot.shared_permutation,
            "seed": seed,
        },
        "accepted_cps": d.result.accepted.iter().map(cp_json).collect::<Vec<_>>(),
        "rejected_cps": d.result.rejected.iter().map(cp_json).collect::<Vec<_>>(),
        "estimated_ma_order": d.result.estimated_q,
        "block_size": d.result.block_size,
        "reconstructed_mean": d.reconstructed,
        "diagnostics": d.result.diagnostics,
    }))
}

fn to_pretty(v: &Value) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| ParcsError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn run_detect(a: DetectArgs) -> Result<()> {
    let config = a.test.detect_config(a.method);
    config.validate()?;
    let series = ingest_csv(&a.input)?;
    let seed = resolve_seed(a.test.seed);
    let doc = to_pretty(&detect_document(&series, &config, seed)?)?;
    match a.output {
        Some(path) => write_file(&path, &doc),
        None => std::io::stdout().write_all(&doc).map_err(ParcsError::from),
    }
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let overrides = ScenarioOverrides::parse_all(&a.overrides)?;
    let spec = scenario(&a.scenario, &overrides)?;
    if a.realisations == 0 {
        return Err(ParcsError::Config("realisations must be at least 1".into()));
    }
    let seed = resolve_seed(a.seed);
    let series = (0..a.realisations)
        .map(|r| generate(&spec, realisation_rng(seed, r)))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let width = a.realisations.to_string().len().max(4);
    let long = a.format == "long";
    let files: Vec<String> = if long {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| ParcsError::Io(e.to_string());
        w.write_record(["realisation", "t", "covariate", "value"]).map_err(err)?;
        for (r, x) in series.iter().enumerate() {
            for (n, col) in x.columns().iter().enumerate() {
                for (t, v) in col.values().iter().enumerate() {
                    w.write_record([(r + 1).to_string(), (t + 1).to_string(), (n + 1).to_string(), v.to_string()])
                        .map_err(err)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| ParcsError::Io(e.to_string()))?;
        write_file(&a.out.join("realisations.csv"), &bytes)?;
        vec!["realisations.csv".to_string()]
    } else {
        series
            .iter()
            .enumerate()
            .map(|(r, x)| {
                let name = format!("realisation_{:0width$}.csv", r + 1);
                let mut bytes = Vec::new();
                write_series_csv(x, &mut bytes)?;
                write_file(&a.out.join(&name), &bytes)?;
                Ok(name)
            })
            .collect::<Result<Vec<_>>>()?
    };
    let sidecar = json!({
        "scenario": a.scenario,
        "overrides": overrides,
        "seed": seed,
        "realisations": a.realisations,
        "format": a.format,
        "files": files,
        "spec": spec,
    });
    write_file(&a.out.join("spec.json"), &to_pretty(&sidecar)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| (x + 0.0).to_string()).unwrap_or_default()
}

/// Metrics table with the fixed benchmark columns.
pub fn benchmark_csv(reports: &[MetricReport]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| ParcsError::Io(e.to_string());
    w.write_record(BENCHMARK_COLUMNS).map_err(err)?;
    for r in reports {
        w.write_record([
            r.condition.clone(),
            r.method.clone(),
            r.alpha_nominal.to_string(),
            r.type1.to_string(),
            r.type2.to_string(),
            fmt_opt(r.accuracy.first().copied()),
            fmt_opt(r.accuracy.get(1).copied()),
            fmt_opt(r.cb_mean),
            fmt_opt(r.cb_median),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| ParcsError::Io(e.to_string()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn timings_csv(outputs: &[(&str, &BenchmarkOutput)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| ParcsError::Io(e.to_string());
    w.write_record(["ensemble", "method", "alpha_nominal", "generate_seconds", "detect_seconds", "score_seconds"])
        .map_err(err)?;
    for (name, out) in outputs {
        for t in &out.timings {
            w.write_record([
                name.to_string(),
                t.method.name().to_string(),
                t.alpha.to_string(),
                out.generate_seconds.to_string(),
                t.detect_seconds.to_string(),
                t.score_seconds.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| ParcsError::Io(e.to_string()))
}

fn run_benchmark_command(a: BenchmarkArgs) -> Result<()> {
    let overrides = ScenarioOverrides::parse_all(&a.overrides)?;
    let seed = resolve_seed(a.test.seed);
    let config = BenchmarkConfig {
        scenario: a.scenario.clone(),
        overrides: overrides.clone(),
        methods: a.methods.clone(),
        alpha_grid: a.alpha_grid.clone(),
        realisations: a.realisations,
        seed,
        detect: a.test.detect_config(Method::Parcs),
        window: a.window,
        rates: a.rates,
    };
    config.validate()?;
    let signal = run_benchmark(&config)?;
    let scoring = Scoring {
        window: a.window.unwrap_or_else(|| crate::metrics::default_window(signal.spec.len)),
        rates: a.rates,
    };
    let noise = if a.roc {
        let mut c = config.clone();
        c.overrides.w0 = Some(0.0);
        Some(run_benchmark(&c)?)
    } else {
        None
    };

    let mut levels_by_method = Vec::new();
    let cells = config.methods.iter().flat_map(|m| config.alpha_grid.iter().map(move |a| (*m, *a)));
    for (i, (method, alpha)) in cells.enumerate() {
        levels_by_method.push((method, alpha, i));
    }
    let mut curves = serde_json::Map::new();
    for method in &config.methods {
        let cells: Vec<_> = levels_by_method.iter().filter(|(m, _, _)| m == method).collect();
        let mut entry = serde_json::Map::new();
        if signal.spec.effective_cps().is_empty() {
            let pp = pp_curve(
                &cells.iter().map(|(_, a, i)| (*a, signal.outcomes[*i].clone())).collect::<Vec<_>>(),
            )?;
            entry.insert("pp".into(), serde_json::to_value(pp).map_err(|e| ParcsError::Internal(e.to_string()))?);
        }
        if let Some(noise) = &noise {
            let levels: Vec<LevelOutcomes> = cells
                .iter()
                .map(|(_, a, i)| LevelOutcomes {
                    alpha: *a,
                    noise: noise.outcomes[*i].clone(),
                    signal: signal.outcomes[*i].clone(),
                })
                .collect();
            let roc = roc_curve(&levels, scoring)?;
            entry.insert("roc".into(), serde_json::to_value(roc).map_err(|e| ParcsError::Internal(e.to_string()))?);
            let pp = pp_curve(&cells.iter().map(|(_, a, i)| (*a, noise.outcomes[*i].clone())).collect::<Vec<_>>())?;
            entry.insert("pp".into(), serde_json::to_value(pp).map_err(|e| ParcsError::Internal(e.to_string()))?);
        }
        if !entry.is_empty() {
            curves.insert(method.name().to_string(), Value::Object(entry));
        }
    }

    let summary = json!({
        "schema": SCHEMA,
        "condition": signal.condition,
        "scenario": a.scenario,
        "overrides": overrides,
        "seed": seed,
        "realisations": a.realisations,
        "spec": signal.spec,
        "detect": config.detect,
        "scoring": scoring,
        "rate_note": match a.rates {
            RateDefinition::Count => "type1: share of realisations with more detections than true change points; type2: missing detections per true change point",
            RateDefinition::Windowed => "type1: share of realisations with a detection unmatched within the window; type2: true change points unmatched within the window",
        },
        "reports": signal.reports,
        "curves": curves,
    });
    write_file(&a.out, &benchmark_csv(&signal.reports)?)?;
    write_file(&sibling(&a.out, ".summary.json"), &to_pretty(&summary)?)?;
    if a.timings {
        let mut ensembles = vec![("signal", &signal)];
        if let Some(n) = &noise {
            ensembles.push(("noise", n));
        }
        write_file(&sibling(&a.out, ".timings.csv"), &timings_csv(&ensembles)?)?;
    }
    Ok(())
}

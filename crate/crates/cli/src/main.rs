//! Command-line front end for the jamming-resilience simulator.
//!
//! Three subcommands:
//!
//! - `run` — execute one scenario file, writing the throughput trace, the
//!   run summary (which embeds the fully-resolved config) and, when the
//!   scenario carries an `[analysis]` block, the closed-form rows.
//! - `analyze` — evaluate the closed-form fixed/adaptive model for a single
//!   parameter set and print one row.
//! - `sweep` — run a scenario template once per point of a parameter grid,
//!   with deterministic per-point seeds derived from the master seed.
//!
//! Exit codes: 0 on success; 2 for configuration problems, with a
//! machine-readable JSON error report on stdout naming every offending
//! field; 3 for runtime failures after a configuration was accepted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ares_core::analytics::{
    classify_link, pdr_threshold, t_adapt, t_fixed, AnalyticInputs, JammerMoments, LinkClass,
};
use ares_core::engine::RunOutput;
use ares_core::error::{Error, ValidationReport};
use ares_core::jammer::JammerProfile;
use ares_core::phy::{RateEntry, RateTable};
use ares_core::rate::DwellProfile;
use ares_core::scenario::ScenarioConfig;
use ares_core::trace::analysis_to_csv;

#[derive(Parser)]
#[command(
    name = "ares",
    version,
    about = "802.11-under-jamming simulator: scenario runs, closed-form analysis, parameter sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its trace and summary.
    Run(RunArgs),
    /// Print closed-form fixed/adaptive throughput for one parameter set.
    Analyze(AnalyzeArgs),
    /// Run a scenario template once per point of a parameter grid.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Override the scenario's seed.
    #[arg(long, env = "ARES_SEED")]
    seed: Option<u64>,
    /// Output directory, created if missing [default: out/<scenario-stem>].
    #[arg(long, env = "ARES_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Trace encoding (the summary is always JSON).
    #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
    format: TraceFormat,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Offered load in Mbps; the fixed policy pins the lowest table rate at
    /// or above it.
    #[arg(long)]
    rate: f64,
    /// Link delivery ratio at the fixed rate.
    #[arg(long, default_value_t = 1.0)]
    pdr: f64,
    /// Cycling-jammer preset: balanced, rare, frequent or
    /// balanced-validation.
    #[arg(long, default_value = "balanced-validation")]
    jammer_preset: String,
    /// Calibration file (TOML, or YAML by .yml/.yaml extension): dwell
    /// profile and optional rate-table override.
    #[arg(long)]
    dwell_file: Option<PathBuf>,
    /// Goodput in Mbps while the jammer is active.
    #[arg(long = "F", default_value_t = 0.0)]
    f_mbps: f64,
    /// Emit the row as a JSON object instead of key=value text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario template (TOML).
    template: PathBuf,
    /// Grid axis as `dotted.path=range`; repeatable. The grid is the
    /// cartesian product of all axes, last axis varying fastest. Ranges:
    /// a comma list `6,12,54`, an inclusive span `1..4`, or a stepped span
    /// `-75..-30:5`. Numeric path segments index arrays.
    #[arg(long = "param", value_name = "PATH=RANGE")]
    params: Vec<String>,
    /// Worker threads; grid points are independent.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Master seed; grid point i runs with seed master+i
    /// [default: the template's seed].
    #[arg(long, env = "ARES_SEED")]
    seed: Option<u64>,
    /// Sweep root directory [default: out/<template-stem>-sweep].
    #[arg(long, env = "ARES_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

/// A command failure, already classified into an exit code.
enum CmdError {
    /// Rejected configuration: JSON report on stdout, exit 2.
    Validation {
        /// What was being parsed (file path or parameter context).
        source: String,
        report: ValidationReport,
    },
    /// Failure after configuration was accepted: stderr, exit 3.
    Runtime(String),
}

type CmdResult<T> = Result<T, CmdError>;

impl CmdError {
    /// Single-field validation failure.
    fn rejected(source: impl Into<String>, field: &str, message: impl Into<String>) -> Self {
        let mut report = ValidationReport::default();
        report.push(field, message);
        CmdError::Validation {
            source: source.into(),
            report,
        }
    }
}

/// Maps a library error from loading a scenario into the exit-2 family.
fn config_error(source: &Path, err: Error) -> CmdError {
    let source = source.display().to_string();
    match err {
        Error::Validation(report) => CmdError::Validation { source, report },
        Error::Parse(message) => CmdError::rejected(source, "(document)", message),
        other => CmdError::rejected(source, "(document)", other.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Validation { source, report }) => {
            let doc = serde_json::json!({
                "status": "error",
                "kind": "validation",
                "source": source,
                "errors": report.errors,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("error report serializes")
            );
            ExitCode::from(2)
        }
        Err(CmdError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(3)
        }
    }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

/// Reads, parses and validates one scenario file.
fn load_scenario(path: &Path) -> CmdResult<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CmdError::rejected(
            path.display().to_string(),
            "(file)",
            format!("cannot read scenario: {e}"),
        )
    })?;
    let cfg = ScenarioConfig::from_toml_str(&text).map_err(|e| config_error(path, e))?;
    cfg.validate().map_err(|e| config_error(path, e))?;
    Ok(cfg)
}

/// Writes one run's artifacts into `dir`; returns the written paths.
fn write_outputs(
    dir: &Path,
    output: &RunOutput,
    format: TraceFormat,
) -> Result<Vec<PathBuf>, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut written = Vec::new();
    let write = |path: PathBuf, text: String| -> Result<PathBuf, String> {
        std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        Ok(path)
    };
    match format {
        TraceFormat::Csv => {
            written.push(write(dir.join("trace.csv"), output.trace.to_csv())?);
        }
        TraceFormat::Json => {
            let mut text = serde_json::to_string_pretty(&output.trace)
                .map_err(|e| format!("cannot encode trace: {e}"))?;
            text.push('\n');
            written.push(write(dir.join("trace.json"), text)?);
        }
    }
    let summary = output
        .summary
        .to_json()
        .map_err(|e| format!("cannot encode summary: {e}"))?;
    written.push(write(dir.join("summary.json"), summary + "\n")?);
    if let Some(rows) = &output.analysis {
        written.push(write(dir.join("analysis.csv"), analysis_to_csv(rows))?);
    }
    Ok(written)
}

fn default_out_dir(scenario: &Path) -> PathBuf {
    let stem = scenario
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string());
    PathBuf::from("out").join(stem)
}

fn cmd_run(args: RunArgs) -> CmdResult<()> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out_dir = args
        .out_dir
        .unwrap_or_else(|| default_out_dir(&args.scenario));
    let output = ares_core::engine::run(&cfg).map_err(|e| CmdError::Runtime(e.to_string()))?;
    let written = write_outputs(&out_dir, &output, args.format).map_err(CmdError::Runtime)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

/// On-disk calibration for `analyze`: the ladder's dwell profile, plus an
/// optional rate-table override (a break-even threshold is only meaningful
/// for the ladder it was measured on).
#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    uniform_s: Option<f64>,
    /// Per-rate dwell overrides, keyed by nominal rate rendered as a string.
    y: Option<BTreeMap<String, f64>>,
    table: Option<Vec<RateEntry>>,
}

/// Loads a calibration file, choosing the parser by file extension.
fn load_calibration(path: &Path) -> CmdResult<CalibrationFile> {
    let source = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::rejected(&source, "(file)", format!("cannot read: {e}")))?;
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    let parsed: Result<CalibrationFile, String> = if ext == "yml" || ext == "yaml" {
        serde_yaml::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| CmdError::rejected(&source, "(document)", message))
}

/// Builds the dwell profile a calibration file describes, reusing the
/// library's own parsing (and validation) of the `{uniform_s, y}` shape.
fn calibration_dwell(source: &str, file: &CalibrationFile) -> CmdResult<DwellProfile> {
    let mut doc = serde_json::Map::new();
    if let Some(uniform) = file.uniform_s {
        doc.insert("uniform_s".into(), serde_json::json!(uniform));
    }
    if let Some(y) = &file.y {
        doc.insert("y".into(), serde_json::json!(y));
    }
    serde_json::from_value(serde_json::Value::Object(doc))
        .map_err(|e| CmdError::rejected(source, "dwell", e.to_string()))
}

fn cmd_analyze(args: AnalyzeArgs) -> CmdResult<()> {
    const SRC: &str = "(analyze)";
    let profile = JammerProfile::preset(&args.jammer_preset)
        .map_err(|e| CmdError::rejected(SRC, "jammer-preset", e.to_string()))?;
    let moments = JammerMoments::from_profile(&profile)
        .map_err(|e| CmdError::rejected(SRC, "jammer-preset", e.to_string()))?;

    let (dwell, table) = match &args.dwell_file {
        None => (DwellProfile::default(), RateTable::default()),
        Some(path) => {
            let source = path.display().to_string();
            let file = load_calibration(path)?;
            let dwell = calibration_dwell(&source, &file)?;
            let table = match file.table {
                None => RateTable::default(),
                Some(entries) => RateTable::new(entries)
                    .map_err(|e| CmdError::rejected(&source, "table", e.to_string()))?,
            };
            (dwell, table)
        }
    };

    let inputs = AnalyticInputs {
        moments,
        r_a_mbps: args.rate,
        pdr_f: args.pdr,
        f_mbps: args.f_mbps,
        dwell: &dwell,
        table: &table,
    };
    let evaluate = || -> Result<(f64, f64, _, LinkClass), Error> {
        Ok((
            t_fixed(&inputs)?,
            t_adapt(&inputs)?,
            pdr_threshold(&inputs)?,
            classify_link(&inputs)?,
        ))
    };
    let (fixed, adapt, threshold, class) =
        evaluate().map_err(|e| CmdError::rejected(SRC, "rate", e.to_string()))?;
    let class_label = match class {
        LinkClass::Lossless => "lossless",
        LinkClass::Lossy => "lossy",
    };

    if args.json {
        let doc = serde_json::json!({
            "rate_mbps": args.rate,
            "pdr": args.pdr,
            "f_mbps": args.f_mbps,
            "jammer_preset": args.jammer_preset,
            "t_fixed_mbps": fixed,
            "t_adapt_mbps": adapt,
            "pdr_threshold": threshold.pdr,
            "crossing": threshold.crossing,
            "class": class_label,
        });
        println!(
            "{}",
            serde_json::to_string_pretty(&doc).expect("analysis row serializes")
        );
    } else {
        println!(
            "rate_mbps={} pdr={:.4} f_mbps={:.4} jammer={} t_fixed_mbps={:.6} \
             t_adapt_mbps={:.6} pdr_threshold={:.4} crossing={} class={}",
            args.rate,
            args.pdr,
            args.f_mbps,
            args.jammer_preset,
            fixed,
            adapt,
            threshold.pdr,
            threshold.crossing,
            class_label,
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// One grid axis: a dotted config path and its values. Each value keeps the
/// source token it was written as, for directory naming.
struct Axis {
    path: String,
    values: Vec<(String, toml::Value)>,
}

/// Parses a scalar range token into the narrowest fitting TOML value.
fn parse_scalar(token: &str) -> toml::Value {
    if let Ok(i) = token.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = token.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = token.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(token.to_string())
    }
}

/// Formats a numeric grid value back into a token (used for directory
/// names when the value came from span expansion).
fn number_token(value: f64) -> String {
    if value == value.trunc() && value.abs() < 1e15 {
        format!("{}", value as i64)
    } else {
        format!("{value}")
    }
}

/// Parses one `dotted.path=range` axis specification.
fn parse_axis(spec: &str) -> Result<Axis, String> {
    let (path, range) = spec
        .split_once('=')
        .ok_or_else(|| format!("'{spec}': expected PATH=RANGE"))?;
    if path.is_empty() {
        return Err(format!("'{spec}': empty parameter path"));
    }
    let range = range.trim();
    let mut values = Vec::new();
    if let Some((lo, rest)) = range.split_once("..") {
        let (hi, step) = match rest.split_once(':') {
            Some((hi, step)) => (hi, Some(step)),
            None => (rest, None),
        };
        let lo: f64 = lo
            .parse()
            .map_err(|_| format!("'{spec}': bad span start '{lo}'"))?;
        let hi: f64 = hi
            .parse()
            .map_err(|_| format!("'{spec}': bad span end '{hi}'"))?;
        let step: f64 = match step {
            Some(s) => s
                .parse()
                .map_err(|_| format!("'{spec}': bad span step '{s}'"))?,
            None => 1.0,
        };
        if !(step > 0.0) {
            return Err(format!("'{spec}': span step must be positive"));
        }
        // Inclusive ends; an empty span (start past end) yields no points.
        let mut k = 0u32;
        loop {
            let value = lo + f64::from(k) * step;
            if value > hi + 1e-9 {
                break;
            }
            values.push((number_token(value), parse_scalar(&number_token(value))));
            k += 1;
        }
    } else {
        for token in range.split(',') {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            values.push((token.to_string(), parse_scalar(token)));
        }
    }
    Ok(Axis {
        path: path.to_string(),
        values,
    })
}

/// Sets `leaf` at a dotted path inside a TOML document. Numeric segments
/// index arrays (which must already exist and be long enough); missing
/// intermediate tables are created.
fn set_path(root: &mut toml::Value, path: &str, leaf: toml::Value) -> Result<(), String> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err("empty path segment".to_string());
    }
    let mut leaf = Some(leaf);
    let mut current = root;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = current
                .as_array_mut()
                .ok_or_else(|| format!("segment '{seg}' indexes a non-array"))?;
            let len = arr.len();
            let slot = arr
                .get_mut(idx)
                .ok_or_else(|| format!("index {idx} out of bounds (array has {len} elements)"))?;
            if last {
                *slot = leaf.take().expect("leaf consumed once");
                return Ok(());
            }
            current = slot;
        } else {
            let table = current
                .as_table_mut()
                .ok_or_else(|| format!("segment '{seg}' indexes a non-table"))?;
            if last {
                table.insert((*seg).to_string(), leaf.take().expect("leaf consumed once"));
                return Ok(());
            }
            current = table
                .entry(*seg)
                .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
        }
    }
    unreachable!("the loop returns on the last segment");
}

/// Replaces anything awkward in a directory-name component.
fn sanitize(component: &str) -> String {
    component
        .chars()
        .map(|c| match c {
            '/' | '\\' | ' ' | ':' => '-',
            '.' => '-',
            other => other,
        })
        .collect()
}

/// One fully-resolved grid point, validated and ready to run.
struct GridPoint {
    dir: String,
    cfg: ScenarioConfig,
    params: BTreeMap<String, String>,
    seed: u64,
}

fn cmd_sweep(args: SweepArgs) -> CmdResult<()> {
    let template_src = args.template.display().to_string();
    let text = std::fs::read_to_string(&args.template).map_err(|e| {
        CmdError::rejected(&template_src, "(file)", format!("cannot read template: {e}"))
    })?;
    let base: toml::Value = text
        .parse()
        .map_err(|e| CmdError::rejected(&template_src, "(document)", format!("{e}")))?;

    let mut axes = Vec::new();
    for spec in &args.params {
        axes.push(parse_axis(spec).map_err(|m| CmdError::rejected(&template_src, "--param", m))?);
    }

    let total: usize = axes.iter().map(|a| a.values.len()).product();
    if total == 0 {
        println!("sweep grid: 0 points; nothing to run");
        return Ok(());
    }

    // Resolve the master seed: flag/env beats the template's own value.
    let template_cfg =
        ScenarioConfig::from_toml_str(&text).map_err(|e| config_error(&args.template, e))?;
    let master_seed = args.seed.unwrap_or(template_cfg.seed);

    // Expand and validate every point before running any of them.
    let mut points = Vec::with_capacity(total);
    let mut dirs = std::collections::BTreeSet::new();
    for index in 0..total {
        // Mixed-radix decode: the last axis varies fastest.
        let mut rem = index;
        let mut choice = vec![0usize; axes.len()];
        for (a, axis) in axes.iter().enumerate().rev() {
            choice[a] = rem % axis.values.len();
            rem /= axis.values.len();
        }

        let mut value = base.clone();
        let mut params = BTreeMap::new();
        let mut name_parts = Vec::new();
        for (axis, &pick) in axes.iter().zip(&choice) {
            let (token, scalar) = &axis.values[pick];
            set_path(&mut value, &axis.path, scalar.clone())
                .map_err(|m| CmdError::rejected(&template_src, &axis.path, m))?;
            params.insert(axis.path.clone(), token.clone());
            name_parts.push(format!("{}={}", sanitize(&axis.path), sanitize(token)));
        }
        let dir = if name_parts.is_empty() {
            "base".to_string()
        } else {
            name_parts.join("_")
        };
        if !dirs.insert(dir.clone()) {
            return Err(CmdError::rejected(
                &template_src,
                "--param",
                format!("overlapping output path '{dir}': grid points must be distinct"),
            ));
        }

        let patched =
            toml::to_string(&value).map_err(|e| CmdError::Runtime(format!("re-encode: {e}")))?;
        let point_src = format!("{template_src} [{dir}]");
        let mut cfg = ScenarioConfig::from_toml_str(&patched)
            .map_err(|e| config_error(Path::new(&point_src), e))?;
        cfg.validate()
            .map_err(|e| config_error(Path::new(&point_src), e))?;
        cfg.seed = master_seed.wrapping_add(index as u64);
        points.push(GridPoint {
            dir,
            seed: cfg.seed,
            cfg,
            params,
        });
    }

    let out_root = args.out_dir.unwrap_or_else(|| {
        let mut stem = args
            .template
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "template".to_string());
        stem.push_str("-sweep");
        PathBuf::from("out").join(stem)
    });
    std::fs::create_dir_all(&out_root)
        .map_err(|e| CmdError::Runtime(format!("cannot create {}: {e}", out_root.display())))?;

    let manifest = serde_json::json!({
        "template": template_src,
        "master_seed": master_seed,
        "points": points
            .iter()
            .map(|p| {
                serde_json::json!({ "dir": p.dir, "seed": p.seed, "params": p.params })
            })
            .collect::<Vec<_>>(),
    });
    let manifest_path = out_root.join("manifest.json");
    let mut manifest_text =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    std::fs::write(&manifest_path, manifest_text)
        .map_err(|e| CmdError::Runtime(format!("cannot write manifest: {e}")))?;
    println!("sweep grid: {total} points");
    println!("wrote {}", manifest_path.display());

    // Independent grid points; a simple shared-counter worker pool.
    let next = AtomicUsize::new(0);
    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    let workers = args.parallel.max(1).min(points.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(i) else { break };
                let result = ares_core::engine::run(&point.cfg)
                    .map_err(|e| e.to_string())
                    .and_then(|output| {
                        write_outputs(&out_root.join(&point.dir), &output, TraceFormat::Csv)
                    });
                if let Err(message) = result {
                    failures
                        .lock()
                        .expect("failure list lock")
                        .push(format!("{}: {message}", point.dir));
                }
            });
        }
    });

    let failures = failures.into_inner().expect("failure list lock");
    if failures.is_empty() {
        println!("completed {total}/{total} points in {}", out_root.display());
        Ok(())
    } else {
        Err(CmdError::Runtime(format!(
            "{}/{} points failed: {}",
            failures.len(),
            total,
            failures.join("; ")
        )))
    }
}

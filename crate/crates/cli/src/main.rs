//! `opd-lab`: simulate bivariate long-memory paths, estimate ordinal pattern
//! dependence and run the limit-theorem experiments.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use opd_core::hermite::{alpha_weights, HermiteCoefficients};
use opd_core::mc::run_limit_experiment_with_progress;
use opd_core::rosenblatt::{RosenblattSampler, DEFAULT_INNER_N};
use opd_core::{
    estimate_opd_kind, extended_covariance, limit_weights, moments, qq_data, BivariateLrdModel,
    ExperimentConfig, OpdError, Scalar, SecondInnovation, Seed, SeriesKind,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "opd-lab", version, about = "Ordinal pattern dependence under long-range dependence")]
struct Cli {
    /// Worker threads (output does not depend on it).
    #[arg(long, global = true, env = "OPD_LAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path of the bivariate model and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate p, q and the OPD of two series.
    Opd(OpdArgs),
    /// Replicate the normalized estimator and compare with its limit.
    LimitExperiment(LimitArgs),
    /// Draw standard Rosenblatt variables.
    Rosenblatt(RosenblattArgs),
    /// Dump the Hermite coefficients and limit weights.
    Weights(WeightsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Second {
    SameHurst,
    WhiteNoise,
}

impl From<Second> for SecondInnovation {
    fn from(s: Second) -> Self {
        match s {
            Second::SameHurst => SecondInnovation::SameHurst,
            Second::WhiteNoise => SecondInnovation::WhiteNoise,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    hurst: f64,
    #[arg(long, default_value_t = 0.0)]
    psi: f64,
    /// Defaults to √(1 − ψ²), giving unit variance.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, value_enum, default_value = "same-hurst")]
    second: Second,
}

impl ModelArgs {
    fn model(&self) -> Result<BivariateLrdModel, OpdError> {
        let phi = match self.phi {
            Some(phi) => phi,
            None if self.psi.abs() < 1.0 => (1.0 - self.psi * self.psi).sqrt(),
            None => {
                return Err(OpdError::InvalidParameter(format!(
                    "--phi is required when |psi| >= 1 (psi = {})",
                    self.psi
                )))
            }
        };
        BivariateLrdModel::with_second(self.hurst, self.psi, phi, self.second.into())
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the integrated series.
    #[arg(long)]
    cumsum: bool,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OpdArgs {
    /// CSV holding both series.
    #[arg(long, conflicts_with_all = ["first", "second"])]
    input: Option<PathBuf>,
    /// Columns of --input, by header name or 0-based index.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    columns: Vec<String>,
    #[arg(long, requires = "second")]
    first: Option<PathBuf>,
    #[arg(long, requires = "first")]
    second: Option<PathBuf>,
    /// Column used from --first/--second (default: last).
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    h: usize,
    /// Inputs are increments: patterns of their cumulative sums.
    #[arg(long)]
    increments: bool,
    /// Negate the second series (negative-dependence reading).
    #[arg(long)]
    negate_second: bool,
}

#[derive(Args)]
struct LimitArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    path_n: Option<usize>,
    #[arg(long)]
    replications: Option<usize>,
    /// lrd or srd.
    #[arg(long)]
    regime: Option<String>,
    /// A probability, "estimate" or "auto".
    #[arg(long)]
    true_p: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RosenblattArgs {
    #[arg(long)]
    d_star: f64,
    #[arg(long)]
    draws: usize,
    #[arg(long, default_value_t = DEFAULT_INNER_N)]
    inner_n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct WeightsArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    h: usize,
    #[arg(long, default_value_t = 1_000_000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact coefficients (h = 1 only) instead of Monte Carlo.
    #[arg(long)]
    closed_form: bool,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<OpdError> for Failure {
    fn from(e: OpdError) -> Self {
        Failure {
            code: if e.is_numeric() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

/// Print to stdout; a closed pipe is not an error.
fn emit(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(usage(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn usage(msg: impl Display) -> Failure {
    Failure {
        code: 2,
        message: msg.to_string(),
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Opd(a) => opd(a),
        Command::LimitExperiment(a) => limit_experiment(a),
        Command::Rosenblatt(a) => rosenblatt(a),
        Command::Weights(a) => weights(a),
    };
    let result = match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(run),
            Err(e) => Err(usage(format!("cannot start thread pool: {e}"))),
        },
        None => run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

// output helpers

fn prepare_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

/// Write via a temporary file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: &dyn Display| usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(bytes).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(usage)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// 17 significant digits, locale-free.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Csv(String);

impl Csv {
    fn new(header: &str) -> Self {
        Csv(format!("{header}\n"))
    }

    fn row(&mut self, fields: &[String]) {
        self.0.push_str(&fields.join(","));
        self.0.push('\n');
    }
}

fn qq_csv(samples: &[f64], reference: &[f64]) -> CliResult<Csv> {
    let mut csv = Csv::new("q_sample,q_reference");
    for (a, b) in qq_data(samples, reference)? {
        csv.row(&[num(a), num(b)]);
    }
    Ok(csv)
}

// simulate

fn path_csvs<T: Scalar>(model: &BivariateLrdModel, n: usize, seed: u64) -> CliResult<(Csv, Csv)> {
    let path = opd_core::simulate_bivariate::<T>(model, n, Seed::new(seed))?;
    let mut incr = Csv::new("j,y1,y2");
    for (j, (a, b)) in path.y1.iter().zip(&path.y2).enumerate() {
        incr.row(&[(j + 1).to_string(), num(a.as_f64()), num(b.as_f64())]);
    }
    let (x1, x2) = path.cumulative();
    let mut cum = Csv::new("j,x1,x2");
    for (j, (a, b)) in x1.iter().zip(&x2).enumerate() {
        cum.row(&[(j + 1).to_string(), num(a.as_f64()), num(b.as_f64())]);
    }
    Ok((incr, cum))
}

fn simulate(a: SimulateArgs) -> CliResult {
    let model = a.model.model()?;
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let (incr, cum) = match a.precision {
        Precision::F64 => path_csvs::<f64>(&model, a.n, a.seed)?,
        Precision::F32 => path_csvs::<f32>(&model, a.n, a.seed)?,
    };
    prepare_dir(&a.out_dir)?;
    write_atomic(&a.out_dir.join("path.csv"), incr.0.as_bytes())?;
    if a.cumsum {
        write_atomic(&a.out_dir.join("integrated.csv"), cum.0.as_bytes())?;
    }
    let precision = match a.precision {
        Precision::F32 => "f32",
        Precision::F64 => "f64",
    };
    write_json(
        &a.out_dir.join("config.json"),
        &json!({
            "hurst": model.hurst,
            "psi": model.psi,
            "phi": model.phi,
            "second": model.second,
            "n": a.n,
            "seed": a.seed,
            "cumsum": a.cumsum,
            "precision": precision,
        }),
    )
}

// opd

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> CliResult<Table> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let split = |l: &str| -> Vec<String> { l.split(',').map(|f| f.trim().to_string()).collect() };
    let header = match lines.peek() {
        Some(first) if split(first).iter().any(|f| f.parse::<f64>().is_err()) => {
            let h = split(first);
            lines.next();
            Some(h)
        }
        _ => None,
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = split(line)
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("{}: data row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

impl Table {
    fn width(&self) -> usize {
        self.header
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }

    fn column_index(&self, spec: Option<&str>, path: &Path) -> CliResult<usize> {
        let width = self.width();
        let Some(spec) = spec else {
            return width.checked_sub(1).ok_or_else(|| usage(format!("{} is empty", path.display())));
        };
        if let Some(i) = self.header.as_ref().and_then(|h| h.iter().position(|c| c == spec)) {
            return Ok(i);
        }
        match spec.parse::<usize>() {
            Ok(i) if i < width => Ok(i),
            _ => Err(usage(format!("{}: no column {spec:?}", path.display()))),
        }
    }

    fn column(&self, i: usize, path: &Path) -> CliResult<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.get(i)
                    .copied()
                    .ok_or_else(|| usage(format!("{}: data row {} has no column {i}", path.display(), r + 1)))
            })
            .collect()
    }
}

fn opd(a: OpdArgs) -> CliResult {
    let (x1, mut x2) = match (&a.input, &a.first, &a.second) {
        (Some(path), _, _) => {
            if a.columns.len() != 2 {
                return Err(usage(format!("--columns takes two columns, got {}", a.columns.len())));
            }
            let t = read_table(path)?;
            let i = t.column_index(Some(&a.columns[0]), path)?;
            let k = t.column_index(Some(&a.columns[1]), path)?;
            (t.column(i, path)?, t.column(k, path)?)
        }
        (None, Some(f), Some(s)) => {
            let (tf, ts) = (read_table(f)?, read_table(s)?);
            let col = a.column.as_deref();
            (
                tf.column(tf.column_index(col, f)?, f)?,
                ts.column(ts.column_index(col, s)?, s)?,
            )
        }
        _ => return Err(usage("give --input, or both --first and --second")),
    };
    if a.negate_second {
        x2.iter_mut().for_each(|v| *v = -*v);
    }
    let kind = if a.increments {
        SeriesKind::Increments
    } else {
        SeriesKind::Values
    };
    let est = estimate_opd_kind(&x1, &x2, a.h, kind)?;
    emit(&serde_json::to_string(&est).map_err(usage)?)
}

// limit-experiment

fn effective_config(a: &LimitArgs) -> CliResult<ExperimentConfig> {
    let mut root = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| usage(format!("config {}: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    let obj = root
        .as_object_mut()
        .ok_or_else(|| usage("config must be a JSON object"))?;
    let model = obj
        .entry("model")
        .or_insert_with(|| Value::Object(Map::new()))
        .as_object_mut()
        .ok_or_else(|| usage("config field \"model\" must be an object"))?;
    for (key, v) in [("hurst", a.hurst), ("psi", a.psi), ("phi", a.phi)] {
        if let Some(v) = v {
            model.insert(key.into(), json!(v));
        }
    }
    if !model.contains_key("phi") {
        if let Some(psi) = model.get("psi").and_then(Value::as_f64) {
            if psi.abs() < 1.0 {
                model.insert("phi".into(), json!((1.0 - psi * psi).sqrt()));
            }
        }
    }
    let overrides = [
        ("h", a.h.map(|v| json!(v))),
        ("path_n", a.path_n.map(|v| json!(v))),
        ("replications", a.replications.map(|v| json!(v))),
        ("regime", a.regime.as_ref().map(|v| json!(v))),
        ("master_seed", a.seed.map(|v| json!(v))),
        (
            "true_p",
            a.true_p
                .as_ref()
                .map(|v| v.parse::<f64>().map_or_else(|_| json!(v), |p| json!(p))),
        ),
    ];
    for (key, v) in overrides {
        if let Some(v) = v {
            obj.insert(key.into(), v);
        }
    }
    let config: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| usage(format!("invalid experiment config: {e}")))?;
    // validates the model parameters as well
    BivariateLrdModel::with_second(
        config.model.hurst,
        config.model.psi,
        config.model.phi,
        config.model.second,
    )?;
    config.validate()?;
    Ok(config)
}

fn limit_experiment(a: LimitArgs) -> CliResult {
    let config = effective_config(&a)?;
    prepare_dir(&a.out_dir)?;
    let done = AtomicUsize::new(0);
    let total = config.replications;
    let progress = |_| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        if k == total || k.is_multiple_of(25) {
            eprint!("\rreplication {k}/{total}");
            if k == total {
                eprintln!();
            }
        }
    };
    let set = run_limit_experiment_with_progress(&config, &progress)?;

    let mut values = Csv::new("rep,value");
    for (r, v) in set.values.iter().enumerate() {
        values.row(&[r.to_string(), num(*v)]);
    }
    write_atomic(&a.out_dir.join("values.csv"), values.0.as_bytes())?;
    write_atomic(
        &a.out_dir.join("qq_normal.csv"),
        qq_csv(&set.values, &set.normal_reference)?.0.as_bytes(),
    )?;
    let limit = match &set.limit_reference {
        Some(r) => {
            write_atomic(
                &a.out_dir.join("qq_rosenblatt.csv"),
                qq_csv(&set.values, &r.values)?.0.as_bytes(),
            )?;
            json!({
                "coefficients": [r.coefficients.0, r.coefficients.1],
                "inner_n": r.inner_n,
                "weights": r.weights,
            })
        }
        None => Value::Null,
    };
    write_json(
        &a.out_dir.join("diagnostics.json"),
        &json!({
            "replications": set.values.len(),
            "true_p": set.true_p,
            "diagnostics": set.diagnostics,
            "limit": limit,
        }),
    )?;
    write_json(&a.out_dir.join("config.json"), &config)
}

// rosenblatt

fn rosenblatt(a: RosenblattArgs) -> CliResult {
    if a.draws == 0 {
        return Err(usage("--draws must be at least 1"));
    }
    let sampler = RosenblattSampler::<f64>::new(a.d_star, a.inner_n)?;
    let draws = sampler.sample_batch(a.draws, Seed::new(a.seed));
    prepare_dir(&a.out_dir)?;
    let mut csv = Csv::new("z");
    for z in &draws {
        csv.row(&[num(*z)]);
    }
    write_atomic(&a.out_dir.join("draws.csv"), csv.0.as_bytes())?;
    write_json(
        &a.out_dir.join("rosenblatt.json"),
        &json!({
            "d_star": a.d_star,
            "inner_n": a.inner_n,
            "draws": a.draws,
            "master_seed": a.seed,
        }),
    )?;
    if let Ok(m) = moments(&draws) {
        emit(&serde_json::to_string(&m).map_err(usage)?)?;
    }
    Ok(())
}

// weights

fn weights(a: WeightsArgs) -> CliResult {
    let model = a.model.model()?;
    let w = if a.closed_form {
        if a.h != 1 {
            return Err(usage("--closed-form is available for h = 1 only"));
        }
        let coeffs = HermiteCoefficients::closed_form_h1(model.lag0_correlation())?;
        alpha_weights(&extended_covariance(&model, 1)?, &coeffs)?
    } else {
        limit_weights(&model, a.h, a.draws, Seed::new(a.seed))?
    };
    match &a.out {
        Some(path) => write_json(path, &w),
        None => emit(&serde_json::to_string_pretty(&w).map_err(usage)?),
    }
}

//! The `eirp` command-line front end.
//!
//! Every subcommand that writes files also writes a `*.manifest.json` next to
//! its main output. `eirp replay --manifest <file>` re-runs the recorded
//! invocation; simulation outputs are reproduced byte for byte.
//!
//! Exit codes: 0 success, 1 compliance violation (`verify`), 2 usage or
//! input errors.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{self, Algorithm, Workload};
use crate::sim::{self, SimTrace, TraceSummary};
use config::{ModelArgs, ResolvedConfig};
use output::{sidecar, table_csv, to_json, trace_csv, write_atomic, SCHEMA_VERSION};

pub const DEFAULT_SWEEP_LOADS: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9];
pub const DEFAULT_V_GRID: [f64; 10] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
pub const DEFAULT_COMPARE_LOADS: [f64; 9] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
pub const DEFAULT_W_GRID: [usize; 4] = [10, 100, 1000, 10000];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "eirp", version, about = "Sliding-window EIRP budgets and smooth EIRP control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one closed-loop simulation and write its per-period trace.
    Simulate(SimulateArgs),
    /// Check a trace CSV against the sliding-window threshold.
    Verify(VerifyArgs),
    /// Find the V maximising the mean alpha-fair score for each load.
    SweepV(SweepArgs),
    /// Average exact and conservative budgets along greedy traces.
    CompareBudgets(CompareArgs),
    /// Time per-update cost of the budget algorithms against W.
    Bench(BenchArgs),
    /// Re-run an invocation recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "trace.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long = "W", default_value_t = 10)]
    pub window: usize,
    #[arg(long = "C-bar", default_value_t = 1.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = sim::COMPLIANCE_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub loads: Option<Vec<f64>>,
    #[arg(long = "v-grid", value_delimiter = ',')]
    pub v_grid: Option<Vec<f64>>,
    #[arg(long, default_value = "sweep_v.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',')]
    pub loads: Option<Vec<f64>>,
    #[arg(long, default_value = "compare_budgets.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "w-grid", value_delimiter = ',')]
    pub w_grid: Option<Vec<usize>>,
    /// Timed updates per (algorithm, W).
    #[arg(long, default_value_t = 100_000)]
    pub updates: usize,
    /// Updates per timed batch.
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value = "random_compliant", value_parser = parse_workload)]
    pub workload: Workload,
    #[arg(long, default_value = "bench.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here (same file names) instead of the recorded paths.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

fn parse_workload(s: &str) -> Result<Workload, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Command-specific inputs recorded in a manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandInputs {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loads: Option<Vec<f64>>,
    #[serde(rename = "v-grid", skip_serializing_if = "Option::is_none", default)]
    pub v_grid: Option<Vec<f64>>,
    #[serde(rename = "w-grid", skip_serializing_if = "Option::is_none", default)]
    pub w_grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub updates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub batch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub workload: Option<Workload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_clock_ms: f64,
}

/// Everything needed to reproduce one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: ResolvedConfig,
    pub inputs: CommandInputs,
    /// Output role → path.
    pub outputs: BTreeMap<String, String>,
    pub timings: Timings,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn execute(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate(a) => {
            let cfg = ResolvedConfig::resolve(&a.model)?;
            simulate(&cfg, &a.out)
        }
        Command::Verify(a) => verify(&a),
        Command::SweepV(a) => {
            let cfg = ResolvedConfig::resolve(&a.model)?;
            let inputs = CommandInputs {
                loads: Some(a.loads.unwrap_or_else(|| DEFAULT_SWEEP_LOADS.to_vec())),
                v_grid: Some(a.v_grid.unwrap_or_else(|| DEFAULT_V_GRID.to_vec())),
                ..CommandInputs::default()
            };
            sweep(&cfg, &inputs, &a.out)
        }
        Command::CompareBudgets(a) => {
            let cfg = ResolvedConfig::resolve(&a.model)?;
            let inputs = CommandInputs {
                loads: Some(a.loads.unwrap_or_else(|| DEFAULT_COMPARE_LOADS.to_vec())),
                ..CommandInputs::default()
            };
            compare(&cfg, &inputs, &a.out)
        }
        Command::Bench(a) => {
            let cfg = ResolvedConfig::resolve(&a.model)?;
            let inputs = CommandInputs {
                w_grid: Some(a.w_grid.unwrap_or_else(|| DEFAULT_W_GRID.to_vec())),
                updates: Some(a.updates),
                batch: Some(a.batch),
                workload: Some(a.workload),
                ..CommandInputs::default()
            };
            run_bench(&cfg, &inputs, &a.out)
        }
        Command::Replay(a) => replay(&a),
    }
}

fn nonempty<T: Clone>(grid: &Option<Vec<T>>, name: &str) -> Result<Vec<T>, CliError> {
    match grid {
        Some(v) if !v.is_empty() => Ok(v.clone()),
        _ => Err(CliError::Usage(format!("--{name} must list at least one value"))),
    }
}

fn write_manifest(
    command: &str,
    cfg: &ResolvedConfig,
    inputs: &CommandInputs,
    out: &Path,
    extra: &[(&str, PathBuf)],
    started: Instant,
) -> Result<(), CliError> {
    let manifest_path = sidecar(out, "manifest.json");
    let mut outputs = BTreeMap::new();
    outputs.insert("main".to_string(), out.display().to_string());
    for (role, path) in extra {
        outputs.insert(role.to_string(), path.display().to_string());
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        inputs: inputs.clone(),
        outputs,
        timings: Timings {
            wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    };
    write_atomic(&manifest_path, to_json(&manifest).as_bytes())
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    schema_version: u32,
    summary: &'a TraceSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    display_dbm: Option<DbmDisplay>,
}

/// Headline quantities in dBm relative to a configured `C̄` level.
#[derive(Serialize)]
struct DbmDisplay {
    c_bar_dbm: f64,
    max_budget_dbm: Option<f64>,
    mean_gamma_dbm: Option<f64>,
    mean_budget_exact_dbm: Option<f64>,
    worst_window_average_dbm: Option<f64>,
}

fn to_dbm(value: f64, threshold: f64, c_bar_dbm: f64) -> Option<f64> {
    (value > 0.0).then(|| c_bar_dbm + 10.0 * (value / threshold).log10())
}

fn simulate(cfg: &ResolvedConfig, out: &Path) -> Result<i32, CliError> {
    let started = Instant::now();
    let sim_cfg = cfg.sim_config()?;
    let trace: SimTrace = sim::run_simulation(&sim_cfg, 0)?;
    let s = &trace.summary;
    let display_dbm = cfg.c_bar_dbm.map(|dbm| {
        let conv = |x| to_dbm(x, cfg.threshold, dbm);
        DbmDisplay {
            c_bar_dbm: dbm,
            max_budget_dbm: conv(sim_cfg.emf.max_budget()),
            mean_gamma_dbm: conv(s.mean_gamma),
            mean_budget_exact_dbm: conv(s.mean_budget_exact),
            worst_window_average_dbm: conv(s.compliance.worst_window_average),
        }
    });
    let summary_json = to_json(&SimulateSummary {
        schema_version: SCHEMA_VERSION,
        summary: s,
        display_dbm,
    });
    let summary_path = sidecar(out, "summary.json");
    write_atomic(out, trace_csv(&trace).as_bytes())?;
    write_atomic(&summary_path, summary_json.as_bytes())?;
    write_manifest(
        "simulate",
        cfg,
        &CommandInputs::default(),
        out,
        &[("summary", summary_path)],
        started,
    )?;
    print!("{summary_json}");
    Ok(0)
}

fn verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let emf = crate::budget::EmfConfig::new(a.window, a.threshold, 0.0)?;
    let consumption = output::read_consumption(&a.trace)?;
    let report = sim::verify_compliance(&consumption, &emf, a.tolerance)?;
    print!("{}", to_json(&report));
    Ok(if report.compliant { 0 } else { 1 })
}

#[derive(Serialize)]
struct SweepJson<'a> {
    schema_version: u32,
    result: &'a sim::SweepResult,
}

fn sweep(cfg: &ResolvedConfig, inputs: &CommandInputs, out: &Path) -> Result<i32, CliError> {
    let started = Instant::now();
    let loads = nonempty(&inputs.loads, "loads")?;
    let v_grid = nonempty(&inputs.v_grid, "v-grid")?;
    let sim_cfg = cfg.sim_config()?;
    let result = sim::sweep_v(&sim_cfg, &loads, &v_grid, cfg.reps)?;
    let json_path = sidecar(out, "json");
    write_atomic(out, table_csv(&result.rows)?.as_bytes())?;
    write_atomic(
        &json_path,
        to_json(&SweepJson {
            schema_version: SCHEMA_VERSION,
            result: &result,
        })
        .as_bytes(),
    )?;
    write_manifest("sweep-v", cfg, inputs, out, &[("json", json_path)], started)?;
    print!("{}", table_csv(&result.rows)?);
    Ok(0)
}

#[derive(Serialize)]
struct RowsJson<'a, T> {
    schema_version: u32,
    rows: &'a [T],
}

fn compare(cfg: &ResolvedConfig, inputs: &CommandInputs, out: &Path) -> Result<i32, CliError> {
    let started = Instant::now();
    let loads = nonempty(&inputs.loads, "loads")?;
    let sim_cfg = cfg.sim_config()?;
    let rows = sim::compare_budgets(&sim_cfg, &loads, cfg.reps)?;
    let json_path = sidecar(out, "json");
    let csv = table_csv(&rows)?;
    write_atomic(out, csv.as_bytes())?;
    write_atomic(
        &json_path,
        to_json(&RowsJson {
            schema_version: SCHEMA_VERSION,
            rows: &rows,
        })
        .as_bytes(),
    )?;
    write_manifest(
        "compare-budgets",
        cfg,
        inputs,
        out,
        &[("json", json_path)],
        started,
    )?;
    print!("{csv}");
    Ok(0)
}

fn run_bench(cfg: &ResolvedConfig, inputs: &CommandInputs, out: &Path) -> Result<i32, CliError> {
    let started = Instant::now();
    let w_grid = nonempty(&inputs.w_grid, "w-grid")?;
    let updates = inputs.updates.unwrap_or(100_000);
    let batch = inputs.batch.unwrap_or(32);
    let workload = inputs.workload.unwrap_or(Workload::RandomCompliant);
    let mut rows = Vec::new();
    for &w in &w_grid {
        let emf = crate::budget::EmfConfig::new(w, cfg.threshold, cfg.rho)?;
        for alg in Algorithm::ALL {
            rows.push(bench::measure(alg, &emf, workload, updates, batch, cfg.seed)?);
        }
    }
    let json_path = sidecar(out, "json");
    let csv = table_csv(&rows)?;
    write_atomic(out, csv.as_bytes())?;
    write_atomic(
        &json_path,
        to_json(&RowsJson {
            schema_version: SCHEMA_VERSION,
            rows: &rows,
        })
        .as_bytes(),
    )?;
    write_manifest("bench", cfg, inputs, out, &[("json", json_path)], started)?;
    print!("{csv}");
    Ok(0)
}

fn replay(a: &ReplayArgs) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&a.manifest).map_err(|e| CliError::io(&a.manifest, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("{}: bad manifest: {e}", a.manifest.display()))
    })?;
    let recorded = manifest
        .outputs
        .get("main")
        .ok_or_else(|| CliError::Usage("manifest has no main output".into()))?;
    let out = match &a.out_dir {
        Some(dir) => {
            let name = Path::new(recorded)
                .file_name()
                .ok_or_else(|| CliError::Usage(format!("bad recorded output {recorded:?}")))?;
            dir.join(name)
        }
        None => PathBuf::from(recorded),
    };
    let cfg = &manifest.config;
    match manifest.command.as_str() {
        "simulate" => simulate(cfg, &out),
        "sweep-v" => sweep(cfg, &manifest.inputs, &out),
        "compare-budgets" => compare(cfg, &manifest.inputs, &out),
        "bench" => run_bench(cfg, &manifest.inputs, &out),
        other => Err(CliError::Usage(format!("cannot replay command {other:?}"))),
    }
}

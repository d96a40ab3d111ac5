//! The `ustat` command-line driver.
//!
//! Subcommands:
//!
//! - `compute --config FILE`: evaluate a complete, weighted or incomplete
//!   U-statistic; prints a JSON result.
//! - `decompose --config FILE [--level C]`: degeneracy report, optionally
//!   with the level-`C` component and its own certification.
//! - `experiment run --config FILE --out DIR`: run a harness experiment and
//!   persist `manifest.json`, `report.json` and CSV grids.
//!
//! Exit codes: 0 on success or a passing experiment, 1 when an experiment's
//! criteria fail, 2 on usage and configuration errors.

use crate::error::{Error, Result};
use crate::harness::{
    effective_seed, run_experiment, ExperimentConfig, ExperimentKind, Extras, InequalityReport, RunOverrides,
};
use crate::hoeffding::{
    check_degeneracy_with, project_degenerate_level_with, DegeneracyOptions, DegeneracyReport,
    EvaluationPath, ProjectionMethod, ProjectionOptions, DEFAULT_INNER, DEFAULT_OUTER,
};
use crate::holder::DyadicExceedance;
use crate::incomplete::{draw_design, incomplete_ustat, write_moment_table, SamplingDesign};
use crate::kernels::{sample_iid, Distribution, KernelSpec};
use crate::rng::{StreamSeed, DEFAULT_SEED};
use crate::spaces::BanachSpace;
use crate::ustat::complete_ustat;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ustat", version, about = "U-statistics with Banach-valued kernels")]
pub struct Cli {
    /// Worker threads for the parallel parts (defaults to all cores).
    #[arg(long, global = true, env = "USTAT_THREADS")]
    pub threads: Option<usize>,
    /// Master seed; overrides the config. Defaults to 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a U-statistic on inline, file or synthetic data.
    Compute(ComputeArgs),
    /// Hoeffding projections and degeneracy certification.
    Decompose(DecomposeArgs),
    /// Experiments checking the inequalities numerically.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Also project onto level `c` (symmetric kernels only).
    #[arg(long)]
    pub level: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCommand {
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub replications: Option<usize>,
}

/// Input of `compute`. Exactly one of `data`, `data_file` and
/// `distribution` must be given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComputeConfig {
    pub kernel: KernelSpec,
    #[serde(default)]
    pub space: Option<BanachSpace>,
    #[serde(default)]
    pub data: Option<Vec<f64>>,
    /// CSV of sample values, relative to the config file.
    #[serde(default)]
    pub data_file: Option<PathBuf>,
    #[serde(default)]
    pub distribution: Option<Distribution>,
    /// Sample size; defaults to the length of the data.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub design: Option<SamplingDesign>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Replication index selecting the synthetic sample and design draw.
    #[serde(default)]
    pub replication: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub kernel: KernelSpec,
    pub distribution: Distribution,
    #[serde(default)]
    pub space: Option<BanachSpace>,
    #[serde(default)]
    pub method: ProjectionMethod,
    #[serde(default)]
    pub inner: Option<usize>,
    #[serde(default)]
    pub outer: Option<usize>,
    #[serde(default)]
    pub level: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

/// Written to the output directory before any result.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub experiment: ExperimentKind,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub status: String,
    pub files: Vec<ManifestFile>,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
}

/// Reads every numeric field of a CSV file; a non-numeric first row is
/// taken as a header.
pub fn read_sample_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::config("data_file", format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record
            .iter()
            .filter(|f| !f.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::config("data_file", format!("row {}: {e}", row + 1))),
        }
    }
    Ok(out)
}

fn point_json(value: &[f64]) -> Value {
    match value {
        [x] => json!(x),
        v => json!(v),
    }
}

/// Runs `compute`; the returned JSON is what the command prints.
pub fn compute(config: &ComputeConfig, base: &Path, seed_override: Option<u64>) -> Result<Value> {
    let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
    let master = StreamSeed::new(seed);
    let sources = [
        config.data.is_some(),
        config.data_file.is_some(),
        config.distribution.is_some(),
    ];
    if sources.iter().filter(|b| **b).count() != 1 {
        return Err(Error::config(
            "data",
            "give exactly one of `data`, `data_file` and `distribution`",
        ));
    }
    let sample = if let Some(d) = &config.data {
        d.clone()
    } else if let Some(f) = &config.data_file {
        read_sample_csv(&base.join(f))?
    } else {
        let dist = config.distribution.as_ref().expect("checked above");
        dist.validate()?;
        let n = config
            .n
            .ok_or_else(|| Error::config("n", "required with a synthetic distribution"))?;
        sample_iid(dist, n, &master.derive_str("sample"), config.replication)?
    };
    let n = config.n.unwrap_or(sample.len());
    if n > sample.len() {
        return Err(Error::config(
            "n",
            format!("exceeds the {} available values", sample.len()),
        ));
    }
    let kernel = config.kernel.build(config.space, config.distribution.as_ref())?;
    let m = kernel.arity();
    let mut out = json!({
        "kernel": kernel.name(),
        "m": m,
        "n": n,
        "seed": seed,
    });
    match &config.design {
        None => {
            let r = complete_ustat(&kernel, &sample, n)?;
            out["value"] = point_json(&r.value);
            out["norm"] = json!(kernel.norm(&r.value));
            out["max_running_norm"] = json!(r.running_max.last().copied().unwrap_or(0.0));
        }
        Some(design) => {
            design
                .validate(n, m)
                .map_err(|e| Error::config("design", e.to_string()))?;
            let w = draw_design(design, n, m, &master.derive_str("design"), config.replication)?;
            let value = incomplete_ustat(&kernel, &sample, n, &w)?;
            out["value"] = point_json(&value);
            out["norm"] = json!(kernel.norm(&value));
            out["design"] = serde_json::to_value(design)?;
            out["distinct_tuples"] = json!(w.len());
            out["total_weight"] = json!(w.total_weight());
        }
    }
    Ok(out)
}

/// Runs `decompose`. Without a level the result is the degeneracy report
/// itself; with one it also carries the component's own certification.
pub fn decompose(
    config: &DecomposeConfig,
    level: Option<usize>,
    seed_override: Option<u64>,
) -> Result<(Value, DegeneracyReport)> {
    config.distribution.validate()?;
    let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
    let master = StreamSeed::new(seed);
    let kernel = config.kernel.build(config.space, Some(&config.distribution))?;
    let inner = config.inner.unwrap_or(DEFAULT_INNER);
    let outer = config.outer.unwrap_or(DEFAULT_OUTER);
    let mut opts = DegeneracyOptions::new(inner, outer, master.derive_str("degeneracy"));
    opts.method = config.method;
    let level = level.or(config.level);
    if let Some(c) = level {
        if !kernel.is_symmetric() {
            return Err(Error::config(
                "level",
                "level projections need a symmetric kernel",
            ));
        }
        if c == 0 || c > kernel.arity() {
            return Err(Error::config(
                "level",
                format!("must lie in 1..={}", kernel.arity()),
            ));
        }
    }
    let report = check_degeneracy_with(&kernel, &config.distribution, &opts)?;
    let Some(c) = level else {
        return Ok((serde_json::to_value(&report)?, report));
    };
    let popts = ProjectionOptions::new(inner, master.derive_str("projection")).with_method(config.method);
    let component = project_degenerate_level_with(&kernel, c, &config.distribution, &popts)?;
    let induced = component.as_kernel()?;
    let mut copts = DegeneracyOptions::new(inner, outer, master.derive_str("component"));
    copts.method = config.method;
    let component_report = check_degeneracy_with(&induced, &config.distribution, &copts)?;
    let value = json!({
        "degeneracy": report,
        "level": {
            "c": c,
            "path": component.path(),
            "inner": component.inner(),
            "degeneracy": component_report,
        }
    });
    Ok((value, report))
}

/// Human-readable table of the level statistics.
pub fn degeneracy_table(report: &DegeneracyReport) -> String {
    let mut s = format!(
        "kernel {} (m = {}, {} path, scale {:.4e})\n{:>6} {:>14} {:>14} {:>12}\n",
        report.kernel,
        report.arity,
        match report.path {
            EvaluationPath::Exact => "exact",
            EvaluationPath::MonteCarlo => "monte carlo",
        },
        report.scale,
        "level",
        "mean_norm",
        "mean_square",
        "verdict"
    );
    for (k, l) in report.levels.iter().enumerate() {
        s += &format!(
            "{:>6} {:>14.6e} {:>14.6e} {:>12}\n",
            k,
            l.mean_norm,
            l.mean_square,
            format!("{:?}", l.verdict).to_lowercase()
        );
    }
    s += &format!(
        "verdict: {:?}, order: {}\n",
        report.verdict,
        report.order.map_or("-".to_string(), |d| d.to_string())
    );
    s
}

fn planned_files(kind: ExperimentKind) -> Vec<&'static str> {
    let mut files = vec!["report.json"];
    match kind {
        ExperimentKind::Holder => {
            files.extend(["holder_quantiles.csv", "dyadic_cells.csv", "dyadic_curve.csv"])
        }
        ExperimentKind::IncompleteMoment => files.extend(["points.csv", "moment_table.csv"]),
        ExperimentKind::Lln => files.extend(["points.csv", "terminal_medians.csv"]),
        _ => files.push("points.csv"),
    }
    files
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_pairs<W: Write>(out: W, header: [&str; 2], rows: impl Iterator<Item = (String, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (a, b) in rows {
        w.write_record([a, format!("{b:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn write_outputs(dir: &Path, report: &InequalityReport) -> Result<()> {
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    if !report.points.is_empty() {
        report.write_points_csv(create(dir, "points.csv")?)?;
    }
    match &report.extras {
        Extras::None => {}
        Extras::Lln { terminal_medians, .. } => write_pairs(
            create(dir, "terminal_medians.csv")?,
            ["n", "median"],
            terminal_medians.iter().map(|(n, v)| (n.to_string(), *v)),
        )?,
        Extras::Holder {
            quantiles,
            exceedance,
            ..
        } => {
            let mut w = csv::Writer::from_writer(create(dir, "holder_quantiles.csv")?);
            w.write_record(["n", "median", "q90"])?;
            for q in quantiles {
                w.write_record([
                    q.n.to_string(),
                    format!("{:.16e}", q.median),
                    format!("{:.16e}", q.q90),
                ])?;
            }
            w.flush()?;
            write_dyadic(dir, exceedance)?;
        }
        Extras::IncompleteMoment { rows } => write_moment_table(rows, create(dir, "moment_table.csv")?)?,
    }
    Ok(())
}

fn write_dyadic(dir: &Path, e: &DyadicExceedance) -> Result<()> {
    e.write_cells_csv(create(dir, "dyadic_cells.csv")?)?;
    e.write_curve_csv(create(dir, "dyadic_curve.csv")?)?;
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex(&Sha256::digest(fs::read(path)?)))
}

/// Runs `experiment run` and persists its outputs under `out`.
pub fn run_to_dir(config_text: &str, out: &Path, overrides: &RunOverrides) -> Result<InequalityReport> {
    let config = ExperimentConfig::from_json(config_text)?;
    fs::create_dir_all(out)?;
    let mut manifest = RunManifest {
        config_sha256: hex(&Sha256::digest(config_text.as_bytes())),
        seed: effective_seed(&config, overrides),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment,
        threads: rayon::current_num_threads(),
        started_unix: now(),
        finished_unix: None,
        status: "running".into(),
        files: planned_files(config.experiment)
            .into_iter()
            .map(|p| ManifestFile {
                path: p.into(),
                sha256: None,
            })
            .collect(),
    };
    write_manifest(out, &manifest)?;
    let report = match run_experiment(&config, overrides) {
        Ok(r) => r,
        Err(e) => {
            manifest.status = format!("error: {e}");
            manifest.finished_unix = Some(now());
            manifest.files.clear();
            write_manifest(out, &manifest)?;
            return Err(e);
        }
    };
    write_outputs(out, &report)?;
    manifest.files.retain(|f| out.join(&f.path).exists());
    for f in &mut manifest.files {
        f.sha256 = Some(sha256_file(&out.join(&f.path))?);
    }
    manifest.status = if report.pass { "pass" } else { "fail" }.into();
    manifest.finished_unix = Some(now());
    write_manifest(out, &manifest)?;
    Ok(report)
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Compute(a) => {
            let config: ComputeConfig = parse(&read_config(&a.config)?)?;
            let out = compute(&config, &base_dir(&a.config), cli.seed)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_OK)
        }
        Command::Decompose(a) => {
            let config: DecomposeConfig = parse(&read_config(&a.config)?)?;
            let (out, report) = decompose(&config, a.level, cli.seed)?;
            eprint!("{}", degeneracy_table(&report));
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(EXIT_OK)
        }
        Command::Experiment(ExperimentCommand::Run(a)) => {
            let text = read_config(&a.config)?;
            let overrides = RunOverrides {
                seed: cli.seed,
                replications: a.replications,
            };
            let report = run_to_dir(&text, &a.out, &overrides)?;
            println!("{}", report.summary());
            Ok(if report.pass { EXIT_OK } else { EXIT_FAIL })
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match cli.threads {
        Some(0) => {
            eprintln!("error: invalid config field `--threads`: must be positive");
            return EXIT_USAGE;
        }
        Some(t) => rayon::ThreadPoolBuilder::new().num_threads(t).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_FAIL;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_FAIL
            }
        }
    }
}

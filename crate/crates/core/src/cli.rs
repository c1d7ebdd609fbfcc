//! Subcommand implementations behind the `dmimo` binary: resolve a config,
//! refuse to clobber earlier results, write a manifest, run, then write the
//! CSV and its JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::closedform::{integer_multiplexing, DmtCurve};
use crate::error::{Error, Result};
use crate::montecarlo::{
    estimate_outage, multiuser_rate_experiment, run_mux_convergence, run_rate_experiment,
    ConfigFile, ResultTable,
};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "DMIMO_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";

/// Columns of `rate_curve.csv`; the remaining columns go to the detail file.
pub const RATE_CURVE_COLUMNS: [&str; 6] = [
    "snr_a_db",
    "mc_mean_rate",
    "mc_stderr",
    "closed_form_rate",
    "digital_svd_rate",
    "singularity_warnings",
];

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    /// Worker threads for trial loops; 0 picks the rayon default.
    pub threads: usize,
    pub force: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions { out_dir: out_dir.into(), seed_override: None, threads: 0, force: false }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub subcommand: &'a str,
    pub config_path: Option<&'a Path>,
    pub output_dir: &'a Path,
    pub seed_override: Option<u64>,
    pub config: &'a ConfigFile,
}

/// Files written by one invocation.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
}

/// `{subcommand, config, seed, trials, runtime_seconds, warnings}` plus the
/// table's own metadata under `results`.
#[derive(Debug, Serialize)]
struct Meta<'a> {
    subcommand: &'a str,
    config: &'a ConfigFile,
    seed: u64,
    trials: Option<u64>,
    runtime_seconds: f64,
    warnings: Vec<String>,
    results: &'a serde_json::Map<String, Value>,
}

struct Run<'a> {
    subcommand: &'a str,
    config: ConfigFile,
    opts: &'a RunOptions,
    started: Instant,
    report: RunReport,
}

impl<'a> Run<'a> {
    /// Applies the seed override, checks that none of `outputs` exist (unless
    /// forced) and writes the manifest.
    fn start(
        subcommand: &'a str,
        config: &ConfigFile,
        config_path: Option<&Path>,
        opts: &'a RunOptions,
        outputs: &[String],
    ) -> Result<Self> {
        let mut config = config.clone();
        if let Some(seed) = opts.seed_override {
            config.seed = Some(seed);
        }
        let config = config.resolved();
        let manifest_name = format!("{subcommand}.manifest.json");
        if !opts.force {
            for name in outputs.iter().chain(std::iter::once(&manifest_name)) {
                let path = opts.out_dir.join(name);
                if path.exists() {
                    return Err(Error::WouldOverwrite(path.display().to_string()));
                }
            }
        }
        fs::create_dir_all(&opts.out_dir)?;
        let manifest = RunManifest {
            subcommand,
            config_path,
            output_dir: &opts.out_dir,
            seed_override: opts.seed_override,
            config: &config,
        };
        let manifest_path = opts.out_dir.join(&manifest_name);
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(Run {
            subcommand,
            config,
            opts,
            started: Instant::now(),
            report: RunReport { files: vec![manifest_path] },
        })
    }

    fn write_csv(&mut self, name: &str, table: &ResultTable) -> Result<()> {
        let path = self.opts.out_dir.join(name);
        fs::write(&path, table.to_csv_string())?;
        self.report.files.push(path);
        Ok(())
    }

    fn write_meta(&mut self, name: &str, table: &ResultTable, trials: Option<u64>, warnings: Vec<String>) -> Result<()> {
        let meta = Meta {
            subcommand: self.subcommand,
            config: &self.config,
            seed: self.config.seed(),
            trials,
            runtime_seconds: self.started.elapsed().as_secs_f64(),
            warnings,
            results: &table.metadata,
        };
        let path = self.opts.out_dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
        self.report.files.push(path);
        Ok(())
    }
}

fn count_warning(table: &ResultTable, key: &str, what: &str) -> Vec<String> {
    match table.metadata.get(key).and_then(Value::as_u64) {
        Some(n) if n > 0 => vec![format!("{n} {what}")],
        _ => Vec::new(),
    }
}

fn rate_warnings(table: &ResultTable) -> Vec<String> {
    let mut w = count_warning(table, "singularity_warnings", "trials with an ill-conditioned or singular combiner");
    w.extend(count_warning(table, "stream_clamps", "trials with fewer paths than requested streams"));
    w
}

/// Rate curve(s): `rate_curve.csv` (or one `rate_curve_N{n}.csv` per swept
/// antenna count), each with `.detail.csv` and `.meta.json` companions.
pub fn cmd_rate_curve(config: &ConfigFile, config_path: Option<&Path>, opts: &RunOptions) -> Result<RunReport> {
    let mut seeded = config.clone();
    if let Some(seed) = opts.seed_override {
        seeded.seed = Some(seed);
    }
    let experiments = seeded.sweep_experiments()?;
    let stems: Vec<String> = experiments
        .iter()
        .map(|(n, _)| match n {
            Some(n) => format!("rate_curve_N{n}"),
            None => "rate_curve".to_string(),
        })
        .collect();
    let outputs: Vec<String> = stems
        .iter()
        .flat_map(|s| [format!("{s}.csv"), format!("{s}.detail.csv"), format!("{s}.meta.json")])
        .collect();
    let mut run = Run::start("rate-curve", config, config_path, opts, &outputs)?;
    for ((_, cfg), stem) in experiments.iter().zip(&stems) {
        let table = run_rate_experiment(cfg, opts.threads)?;
        run.write_csv(&format!("{stem}.csv"), &table.select(&RATE_CURVE_COLUMNS)?)?;
        run.write_csv(&format!("{stem}.detail.csv"), &table)?;
        run.write_meta(&format!("{stem}.meta.json"), &table, Some(cfg.trials), rate_warnings(&table))?;
    }
    Ok(run.report)
}

/// `dmt.csv` with columns `d, g_m, g_m_integer` over the configured grid
/// merged with the curve's breakpoints.
pub fn cmd_dmt(config: &ConfigFile, config_path: Option<&Path>, opts: &RunOptions) -> Result<RunReport> {
    let section = config.dmt_section()?;
    let grid = section.grid()?;
    let curve = DmtCurve::on_grid(section.architecture, &grid)
        .map_err(|e| Error::config("dmt.d_grid", e.to_string()))?;
    let mut run = Run::start("dmt", config, config_path, opts, &["dmt.csv".into(), "dmt.meta.json".into()])?;
    let mut table = ResultTable::new();
    table.push_float("d", curve.points.iter().map(|p| p.0).collect())?;
    table.push_float("g_m", curve.points.iter().map(|p| p.1).collect())?;
    table.push_float("g_m_integer", curve.points.iter().map(|p| integer_multiplexing(p.1)).collect())?;
    table.set_meta("architecture", serde_json::to_value(section.architecture)?);
    table.set_meta("max_diversity", section.architecture.max_diversity());
    table.set_meta("max_multiplexing", section.architecture.max_multiplexing());
    table.set_meta("breakpoints", section.architecture.breakpoints());
    run.write_csv("dmt.csv", &table)?;
    run.write_meta("dmt.meta.json", &table, None, Vec::new())?;
    Ok(run.report)
}

/// `mux_gain.csv`: closed-form `Ψ` and per-doubling slope per curve.
pub fn cmd_mux_gain(config: &ConfigFile, config_path: Option<&Path>, opts: &RunOptions) -> Result<RunReport> {
    let curves = config.mux_curves()?;
    let grid = config.snr_grid()?;
    let mut run = Run::start(
        "mux-gain",
        config,
        config_path,
        opts,
        &["mux_gain.csv".into(), "mux_gain.meta.json".into()],
    )?;
    let table = run_mux_convergence(&curves, &grid)?;
    let warnings = match table.metadata.get("excluded_snr_db").and_then(Value::as_array) {
        Some(v) if !v.is_empty() => vec![format!("{} grid points with SNR <= 0 dB have no Psi value", v.len())],
        _ => Vec::new(),
    };
    run.write_csv("mux_gain.csv", &table)?;
    run.write_meta("mux_gain.meta.json", &table, None, warnings)?;
    Ok(run.report)
}

/// `outage.csv`: empirical and analytic outage probability per SNR, with
/// the fitted slope in the sidecar and as a column.
pub fn cmd_outage(config: &ConfigFile, config_path: Option<&Path>, opts: &RunOptions) -> Result<RunReport> {
    let mut seeded = config.clone();
    if let Some(seed) = opts.seed_override {
        seeded.seed = Some(seed);
    }
    let cfg = seeded.experiment()?;
    let section = *seeded.outage_section()?;
    let mut run = Run::start("outage", config, config_path, opts, &["outage.csv".into(), "outage.meta.json".into()])?;
    let (table, fit) = estimate_outage(&cfg, &section, opts.threads)?;
    let mut warnings = Vec::new();
    let flagged = table.counts("insufficient_events").map_or(0, |c| c.iter().sum::<u64>());
    if flagged > 0 {
        warnings.push(format!("{flagged} grid points had fewer than 50 outage events"));
    }
    if fit.slope.is_none() {
        warnings.push("no fit window with at least two usable points".to_string());
    }
    run.write_csv("outage.csv", &table)?;
    run.write_meta("outage.meta.json", &table, Some(cfg.trials), warnings)?;
    Ok(run.report)
}

/// `multiuser.csv`: per-user and sum rates plus interference statistics.
pub fn cmd_multiuser(config: &ConfigFile, config_path: Option<&Path>, opts: &RunOptions) -> Result<RunReport> {
    let mut seeded = config.clone();
    if let Some(seed) = opts.seed_override {
        seeded.seed = Some(seed);
    }
    let cfg = seeded.experiment()?;
    let section = *seeded.multiuser_section()?;
    let mut run = Run::start(
        "multiuser",
        config,
        config_path,
        opts,
        &["multiuser.csv".into(), "multiuser.meta.json".into()],
    )?;
    let table = multiuser_rate_experiment(&cfg, &section, opts.threads)?;
    let warnings = rate_warnings(&table);
    run.write_csv("multiuser.csv", &table)?;
    run.write_meta("multiuser.meta.json", &table, Some(cfg.trials), warnings)?;
    Ok(run.report)
}

/// Reads the config at `path`, naming the file in any error.
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    ConfigFile::from_path(path)
}

/// JSON summary of a validation run, for `--out` when validating.
pub fn validation_json(results: &[crate::validate::CheckResult]) -> Value {
    json!({
        "checks": results.iter().map(|r| json!({"name": r.name, "passed": r.passed, "detail": r.detail})).collect::<Vec<_>>(),
        "passed": results.iter().all(|r| r.passed),
    })
}

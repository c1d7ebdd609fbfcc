use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use dmimo::cli::{self, RunOptions, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use dmimo::montecarlo::ConfigFile;
use dmimo::validate;

#[derive(Parser)]
#[command(name = "dmimo", version, about = "Distributed-subarray mmWave MIMO rate and DMT simulator")]
struct Args {
    /// TOML (or .json) experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    out: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial loops (0 = one per core). Results do not
    /// depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ergodic rate vs SNR, with the closed form and digital SVD benchmark.
    RateCurve,
    /// Closed-form multiplexing gain convergence.
    MuxGain,
    /// Diversity-multiplexing tradeoff table.
    Dmt,
    /// Per-stream outage probability and fitted diversity slope.
    Outage,
    /// Multiuser downlink rates and inter-user interference.
    Multiuser,
    /// Runs the built-in self-checks.
    Validate {
        /// Also write the results as JSON to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(args: Args) -> anyhow::Result<bool> {
    if let Command::Validate { report } = &args.command {
        let results = validate::run_all();
        for r in &results {
            println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        }
        let failed = results.iter().filter(|r| !r.passed).count();
        println!("{} checks, {failed} failed", results.len());
        if let Some(path) = report {
            let json = serde_json::to_string_pretty(&cli::validation_json(&results))?;
            std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        return Ok(failed == 0);
    }

    let config = match &args.config {
        Some(path) => cli::load_config(path)?,
        None => ConfigFile::default(),
    };
    let opts = RunOptions {
        out_dir: args.out.clone(),
        seed_override: args.seed,
        threads: args.threads,
        force: args.force,
    };
    let path = args.config.as_deref();
    let report = match args.command {
        Command::RateCurve => cli::cmd_rate_curve(&config, path, &opts)?,
        Command::MuxGain => cli::cmd_mux_gain(&config, path, &opts)?,
        Command::Dmt => cli::cmd_dmt(&config, path, &opts)?,
        Command::Outage => cli::cmd_outage(&config, path, &opts)?,
        Command::Multiuser => cli::cmd_multiuser(&config, path, &opts)?,
        Command::Validate { .. } => unreachable!(),
    };
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

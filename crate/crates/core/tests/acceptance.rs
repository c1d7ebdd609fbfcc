//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Monte Carlo comparisons allow mean ± 3·stderr.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use dmimo::array::{coherence, embed_response, ula_response, ArraySpec};
use dmimo::cli::{self, RunOptions};
use dmimo::closedform::dmt::{dmt_fully_connected, dmt_partially_connected, Architecture};
use dmimo::closedform::rate::{ergodic_rate_alternating, HomogeneousEnsemble};
use dmimo::closedform::delta;
use dmimo::montecarlo::config::{ConfigFile, MuxCurve, OutageSection};
use dmimo::montecarlo::{
    estimate_outage, multiuser_rate_experiment, run_mux_convergence, run_rate_experiment, ResultTable,
};
use dmimo::rng::trial_rng;

type Verdict = (bool, String);

fn config(name: &str) -> ConfigFile {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ConfigFile::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn col<'a>(t: &'a ResultTable, name: &str) -> &'a [f64] {
    t.floats(name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn theorem1_consistency() -> Verdict {
    let mut worst: f64 = 0.0;
    for l_s in 1..=12 {
        for g in [0.1, 1.0, 10.0, 100.0] {
            let ens = HomogeneousEnsemble::new(l_s, l_s, g).unwrap();
            let sum = ergodic_rate_alternating(&ens).unwrap();
            let closed = l_s as f64 * delta(g).unwrap();
            worst = worst.max((sum - closed).abs());
        }
    }
    (worst <= 1e-8, format!("max |order-statistic sum - L_s·Δ(γ)| = {worst:.2e} (limit 1e-8)"))
}

/// Rate tables for N = 5 and N = 50, shared by criteria 2 and 8.
fn fig3_tables() -> Vec<(usize, ResultTable)> {
    let base = config("rate_curve.toml").experiment().unwrap();
    [5, 50]
        .into_iter()
        .map(|n| (n, run_rate_experiment(&base.clone().with_antennas(n), 0).unwrap()))
        .collect()
}

fn convergence_to_closed_form(tables: &[(usize, ResultTable)]) -> Verdict {
    let (small, large) = (&tables[0].1, &tables[1].1);
    let snr = col(large, "snr_a_db");
    let (mc, se, cf) = (col(large, "mc_mean_rate"), col(large, "mc_stderr"), col(large, "closed_form_rate"));
    let mut ok = true;
    let mut gaps = Vec::new();
    for k in 0..snr.len() {
        let gap = mc[k] - cf[k];
        ok &= gap.abs() <= 0.03 * cf[k] + 3.0 * se[k];
        gaps.push(format!("{:.0}dB {:+.2}%", snr[k], 100.0 * gap / cf[k]));
    }
    let below = col(small, "mc_mean_rate").iter().zip(mc).all(|(a, b)| a < b);
    (
        ok && below,
        format!(
            "N=50 vs closed form within 3% (+3se): {ok} [{}]; N=5 below N=50 everywhere: {below}",
            gaps.join(", ")
        ),
    )
}

fn mux_gain_convergence() -> Verdict {
    let curves = [MuxCurve { k: 1, l: 3, n_s: 3 }, MuxCurve { k: 2, l: 3, n_s: 12 }];
    let grid: Vec<f64> = (0..=200).map(|k| 10.0 + 0.25 * k as f64).collect();
    let t = run_mux_convergence(&curves, &grid).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for c in curves {
        let label = format!("k{}_l{}_ns{}", c.k, c.l, c.n_s);
        let psi = col(&t, &format!("psi_{label}"));
        let slope = *col(&t, &format!("slope_{label}")).last().unwrap();
        let increasing = psi.windows(2).all(|w| w[1] > w[0]);
        let first_rise = psi.windows(2).position(|w| w[1] > w[0]).map_or(f64::NAN, |k| grid[k]);
        let slope_ok = (slope - c.n_s as f64).abs() <= 0.05 * c.n_s as f64;
        ok &= increasing && slope_ok;
        parts.push(format!(
            "N_s={}: strictly increasing on [10,60] dB: {increasing} (Ψ rises from {first_rise} dB on), slope at 60 dB {slope:.4} ok: {slope_ok}",
            c.n_s
        ));
    }
    (ok, parts.join("; "))
}

fn dmt_exact_values() -> Verdict {
    let l_s = 12;
    let g = |d: f64| dmt_fully_connected(d, l_s).unwrap();
    let h12: f64 = (1..=12).map(|k| 1.0 / k as f64).sum();
    let remark_g1: f64 = (1..l_s).map(|l| (l_s - l) as f64 / (l_s - l + 1) as f64).sum();
    let values = [(0.0, 12.0), (1.0, 12.0 - h12), (1.0, remark_g1), (11.0, 1.0 / 12.0), (12.0, 0.0)];
    let value_err = values.iter().map(|&(d, v)| (g(d) - v).abs()).fold(0.0, f64::max);

    let mut slope_err: f64 = 0.0;
    for n_s in 1..=l_s {
        let a = (l_s - n_s) as f64;
        let fd = (g(a + 0.75) - g(a + 0.25)) / 0.5;
        let expected: f64 = -(1..=n_s).map(|l| 1.0 / (l_s - l + 1) as f64).sum::<f64>();
        slope_err = slope_err.max((fd - expected).abs());
    }
    let fine: Vec<f64> = (0..=1200).map(|k| g(k as f64 / 100.0)).collect();
    let convex = fine.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-12);
    (
        value_err <= 1e-12 && slope_err <= 1e-10 && convex,
        format!("G_m(1) = {:.4}, max value error {value_err:.1e}, max slope error {slope_err:.1e}, convex: {convex}", g(1.0)),
    )
}

fn partial_dmt() -> Verdict {
    let arch = Architecture::PartiallyConnected { k_t: 2, k_r: 2, l: 3 };
    let div = arch.path_diversities();
    let values = [(0.0, 2.0), (3.0, 0.75), (12.0, 0.0)];
    let err = values
        .iter()
        .map(|&(d, v)| (dmt_partially_connected(d, 2, 2, 3).unwrap() - v).abs())
        .fold(0.0, f64::max);
    (
        div == [12.0, 3.0] && err <= 1e-12,
        format!("path diversities {div:?}, max value error {err:.1e}"),
    )
}

fn outage_slopes() -> Verdict {
    let file = config("outage.toml");
    let cfg = file.experiment().unwrap();
    let base = *file.outage_section().unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (l, target, tol) in [(12, -1.0, 0.15), (11, -2.0, 0.3)] {
        let section = OutageSection { stream_index: l, ..base };
        let (_, fit) = estimate_outage(&cfg, &section, 0).unwrap();
        let (slope, oracle) = (fit.slope.unwrap_or(f64::NAN), fit.oracle_slope.unwrap_or(f64::NAN));
        let pass = (slope - target).abs() <= tol && (slope - oracle).abs() <= tol;
        ok &= pass;
        parts.push(format!(
            "l={l}: fitted {slope:.3}, oracle {oracle:.3}, target {target}±{tol}, window {:?} dB",
            fit.window_db.unwrap_or((f64::NAN, f64::NAN))
        ));
    }
    (ok, format!("{} trials; {}", cfg.trials, parts.join("; ")))
}

fn steering_orthogonality() -> Verdict {
    let mut rng = trial_rng(7, 0);
    let (mut pairs, mut wins) = (0, 0);
    while pairs < 1000 {
        let a1 = rng.random_range(-PI..PI);
        let a2 = rng.random_range(-PI..PI);
        // Outside the N = 16 main lobe.
        if (a1.sin() - a2.sin()).abs() < 2.0 / 16.0 {
            continue;
        }
        pairs += 1;
        let c = |n| coherence(&ula_response(&ArraySpec::ula(n), a1).unwrap(), &ula_response(&ArraySpec::ula(n), a2).unwrap()).unwrap();
        if c(256) < c(16) {
            wins += 1;
        }
    }
    let v = ula_response(&ArraySpec::ula(256), 0.4).unwrap();
    let cross = coherence(&embed_response(&v, 1, 2).unwrap(), &embed_response(&v, 2, 2).unwrap()).unwrap();
    (
        wins * 100 >= pairs * 99 && cross == 0.0,
        format!("{wins}/{pairs} pairs less coherent at N=256 than N=16; cross-subarray coherence {cross}"),
    )
}

fn power_sandwich(tables: &[(usize, ResultTable)]) -> Verdict {
    let mut ok = true;
    let mut literal_misses = Vec::new();
    for (n, t) in tables {
        let snr = col(t, "snr_a_db");
        let (e, es) = (col(t, "equal_power_rate"), col(t, "equal_power_stderr"));
        let (w, ws) = (col(t, "waterfilling_rate"), col(t, "waterfilling_stderr"));
        let (f, fs) = (col(t, "full_power_rate"), col(t, "full_power_stderr"));
        for k in 0..snr.len() {
            ok &= e[k] - 3.0 * es[k] <= w[k] + 3.0 * ws[k] && w[k] - 3.0 * ws[k] <= f[k] + 3.0 * fs[k];
            if e[k] > w[k] || w[k] > f[k] {
                literal_misses.push(format!("N={n} {:.0}dB: {:.4}/{:.4}/{:.4}", snr[k], e[k], w[k], f[k]));
            }
        }
    }
    (
        ok,
        format!(
            "R_e(P/N_s) <= R_o(waterfilled) <= R_e(P) within 3se at all {} points; mean-only inversions: [{}]",
            tables.iter().map(|t| t.1.rows()).sum::<usize>(),
            literal_misses.join(", ")
        ),
    )
}

fn multiuser_separability() -> Verdict {
    let file = config("multiuser.toml");
    let cfg = file.experiment().unwrap();
    let t = multiuser_rate_experiment(&cfg, file.multiuser_section().unwrap(), 0).unwrap();
    let isr = t.metadata["max_stream_isr"].as_f64().unwrap();
    let isr_se = col(&t, "max_stream_isr_stderr")[0];
    let isr_ok = isr - 3.0 * isr_se < 0.01;
    let cf = col(&t, "user_closed_form_rate");
    let mut rate_ok = true;
    let mut worst: f64 = 0.0;
    for u in 1..=2 {
        let (m, se) = (col(&t, &format!("user_{u}_rate")), col(&t, &format!("user_{u}_stderr")));
        for k in 0..m.len() {
            rate_ok &= (m[k] - cf[k]).abs() <= 0.05 * cf[k] + 3.0 * se[k];
            worst = worst.max((m[k] - cf[k]).abs() / cf[k]);
        }
    }
    (
        isr_ok && rate_ok,
        format!(
            "{} trials: max per-stream ISR {:.3}% ± {:.3}% (limit 1%); worst per-user rate gap {:.2}% (limit 5%)",
            cfg.trials,
            100.0 * isr,
            100.0 * isr_se,
            100.0 * worst
        ),
    )
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    type Cmd = fn(&ConfigFile, Option<&Path>, &RunOptions) -> dmimo::Result<cli::RunReport>;
    let mut rate = config("rate_curve.toml");
    rate.trials = Some(60);
    rate.sweep.as_mut().unwrap().antennas = vec![5, 10];
    let mut outage = config("outage.toml");
    outage.trials = Some(20_000);
    let mut multi = config("multiuser.toml");
    multi.trials = Some(100);
    let cases: [(&str, ConfigFile, Cmd); 6] = [
        ("rate-curve", rate, cli::cmd_rate_curve),
        ("mux-gain", config("mux_gain.toml"), cli::cmd_mux_gain),
        ("dmt", config("dmt.toml"), cli::cmd_dmt),
        ("dmt-partial", config("dmt_partial.toml"), cli::cmd_dmt),
        ("outage", outage, cli::cmd_outage),
        ("multiuser", multi, cli::cmd_multiuser),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut bad = Vec::new();
    let mut n_files = 0;
    for (name, cfg, cmd) in cases {
        let outputs: Vec<Vec<(String, Vec<u8>)>> = [(1, "a"), (1, "b"), (4, "c")]
            .iter()
            .map(|&(threads, tag)| {
                let dir: PathBuf = root.path().join(format!("{name}-{tag}"));
                let opts = RunOptions { threads, ..RunOptions::new(&dir) };
                cmd(&cfg, None, &opts).unwrap();
                csv_files(&dir)
            })
            .collect();
        n_files += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            ok = false;
            bad.push(name);
        }
    }
    (
        ok,
        format!("{n_files} CSV files, 1 thread twice and 4 threads; mismatches: {bad:?}"),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, run: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let (pass, detail) = run();
        if !pass {
            failures += 1;
        }
        println!(
            "{} {id:>2} {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "full-stream closed form consistency", &mut theorem1_consistency);
    let start = Instant::now();
    let tables = fig3_tables();
    println!("     (rate curves for N=5 and N=50 took {:.1}s)", start.elapsed().as_secs_f64());
    report(2, "large-array convergence of the rate curve", &mut || convergence_to_closed_form(&tables));
    report(3, "multiplexing gain convergence", &mut mux_gain_convergence);
    report(4, "fully connected DMT values", &mut dmt_exact_values);
    report(5, "partially connected DMT values", &mut partial_dmt);
    report(6, "outage slopes", &mut outage_slopes);
    report(7, "steering vector orthogonality", &mut steering_orthogonality);
    report(8, "power allocation sandwich", &mut || power_sandwich(&tables));
    report(9, "multiuser separability", &mut multiuser_separability);
    report(10, "determinism across threads", &mut determinism);
    println!("{} of 10 criteria failed", failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Quick self-checks behind `dmimo validate`. Each check runs a few hundred
//! trials at most and reports a one-line detail string.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::array::{coherence, embed_response, ula_response, upa_response, ArraySpec, C64};
use crate::beamforming::{
    build_beamsteering, digital_rate_from_singular_values, waterfill, EffectiveChannel,
    PowerAllocation, PowerPolicy,
};
use crate::channel::{assemble_channel, sample_paths, ChannelRealization, LinkConfig, SystemGeometry};
use crate::closedform::dmt::{dmt_fully_connected, dmt_partially_connected, Architecture};
use crate::closedform::rate::{
    ergodic_rate_alternating, ergodic_rate_homogeneous, ergodic_rate_quadrature, HomogeneousEnsemble,
};
use crate::closedform::special::{e1_series, scaled_e1_continued_fraction};
use crate::closedform::delta;
use crate::montecarlo::config::{ConfigFile, MultiuserSection, MuxCurve, OutageSection};
use crate::montecarlo::{
    estimate_outage, multiuser_rate_experiment, run_mux_convergence, run_rate_experiment, run_trials,
    ExperimentConfig,
};
use crate::rng::trial_rng;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Outcome = std::result::Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const CHECKS: &[Check] = &[
    ("array.steering_unit_norm", steering_unit_norm),
    ("array.upa_is_kronecker", upa_is_kronecker),
    ("array.cross_subarray_coherence_zero", cross_subarray_coherence_zero),
    ("array.coherence_decays_with_n", coherence_decays_with_n),
    ("channel.assembly_and_ordering", assembly_and_ordering),
    ("channel.path_counts", path_counts),
    ("beamforming.unit_columns", beamformer_unit_columns),
    ("beamforming.zero_channel_zero_rate", zero_channel_zero_rate),
    ("beamforming.rate_monotone_in_power", rate_monotone_in_power),
    ("beamforming.waterfill_kkt", waterfill_kkt),
    ("beamforming.digital_dominates_hybrid", digital_dominates_hybrid),
    ("beamforming.power_policy_sandwich", power_policy_sandwich),
    ("closedform.e1_backends_agree", e1_backends_agree),
    ("closedform.full_stream_identity", full_stream_identity),
    ("closedform.sum_vs_quadrature", sum_vs_quadrature),
    ("closedform.dmt_fully_connected_values", dmt_fully_connected_values),
    ("closedform.dmt_partially_connected_values", dmt_partially_connected_values),
    ("closedform.dmt_convex", dmt_convex),
    ("montecarlo.substream_prefix", substream_prefix),
    ("montecarlo.thread_determinism", thread_determinism),
    ("montecarlo.outage_rate_exponent_ordering", outage_ordering),
    ("montecarlo.mux_below_stream_count", mux_below_stream_count),
    ("montecarlo.multiuser_single_user", multiuser_single_user),
    ("config.rejects_zero_spacing", rejects_zero_spacing),
    ("config.rejects_unknown_key", rejects_unknown_key),
    ("config.rejects_empty_grid", rejects_empty_grid),
];

/// Names of every check, in run order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// Runs every check. A panicking check is reported as a failure.
pub fn run_all() -> Vec<CheckResult> {
    CHECKS
        .iter()
        .map(|&(name, check)| {
            let outcome = catch_unwind(AssertUnwindSafe(check))
                .unwrap_or_else(|_| Err("check panicked".to_string()));
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            let detail = detail.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(" ");
            CheckResult { name, passed, detail }
        })
        .collect()
}

fn steering_unit_norm() -> Outcome {
    let mut rng = trial_rng(1, 0);
    let mut worst: f64 = 0.0;
    for n in [1, 7, 64, 256] {
        for _ in 0..50 {
            let az = rng.random_range(-PI..PI);
            let v = ula_response(&ArraySpec::ula(n), az).map_err(err)?;
            worst = worst.max((v.norm() - 1.0).abs());
        }
    }
    ensure(worst < 1e-12, format!("max | ||a|| - 1 | = {worst:.1e}"))
}

fn upa_is_kronecker() -> Outcome {
    let (az, el) = (0.37, -0.81);
    let upa = upa_response(&ArraySpec::upa(4, 3), az, el).map_err(err)?;
    let h = ula_response(&ArraySpec::ula(4), az).map_err(err)?;
    let v = ula_response(&ArraySpec::ula(3), el).map_err(err)?;
    let kron = h.entries.kronecker(&v.entries);
    let gap = (&upa.entries - kron).norm();
    ensure(gap < 1e-12, format!("||a_upa - a_h ⊗ a_v|| = {gap:.1e}"))
}

fn cross_subarray_coherence_zero() -> Outcome {
    let a = ula_response(&ArraySpec::ula(8), 0.3).map_err(err)?;
    let b = ula_response(&ArraySpec::ula(8), 0.3).map_err(err)?;
    let c = coherence(&embed_response(&a, 1, 3).map_err(err)?, &embed_response(&b, 3, 3).map_err(err)?)
        .map_err(err)?;
    ensure(c == 0.0, format!("coherence across subarrays = {c}"))
}

fn coherence_decays_with_n() -> Outcome {
    let mut rng = trial_rng(2, 0);
    let mut wins = 0;
    let pairs = 200;
    for _ in 0..pairs {
        let a1 = rng.random_range(-1.2..1.2);
        let a2 = a1 + rng.random_range(0.2..0.5);
        let c = |n| -> crate::Result<f64> {
            let spec = ArraySpec::ula(n);
            coherence(&ula_response(&spec, a1)?, &ula_response(&spec, a2)?)
        };
        if c(256).map_err(err)? < c(16).map_err(err)? {
            wins += 1;
        }
    }
    ensure(wins * 100 >= pairs * 95, format!("{wins}/{pairs} pairs less coherent at N=256 than N=16"))
}

fn assembly_and_ordering() -> Outcome {
    let geo = SystemGeometry::symmetric_ula(2, 6);
    let link = LinkConfig::homogeneous(2, 2, 3);
    let mut rng = trial_rng(3, 0);
    for _ in 0..20 {
        let paths = sample_paths(&geo, &link, &mut rng).map_err(err)?;
        let ch = assemble_channel(paths, &geo, &link).map_err(err)?;
        if ch.paths.windows(2).any(|w| w[0].power() < w[1].power()) {
            return Err("paths not sorted by power".into());
        }
        let mut direct = DMatrix::<C64>::zeros(ch.h.nrows(), ch.h.ncols());
        for (p, (r, t)) in ch.paths.iter().zip(ch.rx_vectors.iter().zip(&ch.tx_vectors)) {
            direct += &r.entries * t.entries.adjoint() * p.alpha_tilde;
        }
        let gap = (&direct - &ch.h).norm() / ch.h.norm();
        if gap > 1e-12 {
            return Err(format!("sum of path outer products differs from H by {gap:.1e}"));
        }
    }
    Ok("20 draws sorted and consistent".into())
}

fn path_counts() -> Outcome {
    let geo = SystemGeometry::symmetric_ula(3, 4);
    let link = LinkConfig::homogeneous(3, 3, 2);
    let ch = ChannelRealization::sample(&geo, &link, &mut trial_rng(4, 0)).map_err(err)?;
    ensure(
        ch.l_s() == 18 && ch.h.shape() == (12, 12),
        format!("L_s = {}, H is {:?}", ch.l_s(), ch.h.shape()),
    )
}

fn sample_channel(k: usize, n: usize, l: usize, seed: u64, t: u64) -> crate::Result<ChannelRealization> {
    ChannelRealization::sample(
        &SystemGeometry::symmetric_ula(k, n),
        &LinkConfig::homogeneous(k, k, l),
        &mut trial_rng(seed, t),
    )
}

fn beamformer_unit_columns() -> Outcome {
    let ch = sample_channel(2, 16, 3, 5, 0).map_err(err)?;
    let bf = build_beamsteering(&ch, 6).map_err(err)?;
    let worst = bf
        .tx_combined
        .column_iter()
        .chain(bf.rx_combined.column_iter())
        .map(|c| (c.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(
        worst < 1e-12 && bf.tx_combined.ncols() == 6,
        format!("6 columns, max norm error {worst:.1e}"),
    )
}

fn zero_channel_zero_rate() -> Outcome {
    let geo = SystemGeometry::symmetric_ula(2, 8);
    let link = LinkConfig::homogeneous(2, 2, 2).with_gains(vec![vec![0.0; 2]; 2]);
    let ch = ChannelRealization::sample(&geo, &link, &mut trial_rng(6, 0)).map_err(err)?;
    let bf = build_beamsteering(&ch, 2).map_err(err)?;
    let eff = EffectiveChannel::new(&ch.h, &bf).map_err(err)?;
    let rate = eff.rate(&PowerAllocation::equal(2, 10.0).map_err(err)?).map_err(err)?;
    ensure(rate.abs() < 1e-12, format!("rate with g = 0: {rate:.1e}"))
}

fn rate_monotone_in_power() -> Outcome {
    for t in 0..20 {
        let ch = sample_channel(2, 16, 3, 7, t).map_err(err)?;
        let bf = build_beamsteering(&ch, 4).map_err(err)?;
        let eff = EffectiveChannel::new(&ch.h, &bf).map_err(err)?;
        let pa = PowerAllocation::equal(4, 1e-3).map_err(err)?;
        let mut last = 0.0;
        for k in 0..8 {
            let r = eff.rate(&pa.scaled(10f64.powi(k))).map_err(err)?;
            if r + 1e-9 < last {
                return Err(format!("trial {t}: rate fell from {last} to {r}"));
            }
            last = r;
        }
    }
    Ok("20 draws, power 1e-3..1e4".into())
}

fn waterfill_kkt() -> Outcome {
    let mut rng = trial_rng(8, 0);
    for _ in 0..100 {
        let n = rng.random_range(1..10);
        let gains: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
        let total = rng.random_range(0.01..50.0);
        let p = waterfill(&gains, total).map_err(err)?.p;
        let sum: f64 = p.iter().sum();
        if (sum - total).abs() > 1e-9 * total {
            return Err(format!("power sums to {sum}, expected {total}"));
        }
        let mu = p.iter().zip(&gains).find(|(p, _)| **p > 0.0).map(|(p, g)| p + 1.0 / g).unwrap();
        for (pi, g) in p.iter().zip(&gains) {
            let level = pi + 1.0 / g;
            let bad = if *pi > 0.0 { (level - mu).abs() > 1e-9 * mu } else { level < mu - 1e-9 };
            if bad {
                return Err(format!("KKT violated: p = {pi}, 1/g = {}, mu = {mu}", 1.0 / g));
            }
        }
    }
    Ok("100 random instances".into())
}

fn digital_dominates_hybrid() -> Outcome {
    for t in 0..30 {
        let ch = sample_channel(2, 16, 3, 9, t).map_err(err)?;
        let bf = build_beamsteering(&ch, 6).map_err(err)?;
        let p = 10.0;
        let hybrid = EffectiveChannel::new(&ch.h, &bf)
            .or_else(|_| EffectiveChannel::projected(&ch.h, &bf))
            .map_err(err)?
            .rate(&PowerAllocation::equal(6, p).map_err(err)?)
            .map_err(err)?;
        let sv: Vec<f64> = ch.singular_values().iter().copied().collect();
        let digital = digital_rate_from_singular_values(&sv, p, 6, PowerPolicy::Waterfilling);
        if digital + 1e-9 < hybrid {
            return Err(format!("trial {t}: digital {digital} < hybrid {hybrid}"));
        }
    }
    Ok("30 draws".into())
}

fn power_policy_sandwich() -> Outcome {
    let cfg = ExperimentConfig::homogeneous(2, 16, 3, 6, vec![0.0, 10.0, 20.0]).with_trials(200).with_seed(10);
    let t = run_rate_experiment(&cfg, 0).map_err(err)?;
    let get = |n: &str| t.floats(n).map(<[f64]>::to_vec).ok_or_else(|| format!("missing {n}"));
    let (e, es) = (get("equal_power_rate")?, get("equal_power_stderr")?);
    let (w, ws) = (get("waterfilling_rate")?, get("waterfilling_stderr")?);
    let (f, fs) = (get("full_power_rate")?, get("full_power_stderr")?);
    for k in 0..e.len() {
        let ok = e[k] <= w[k] + 3.0 * (es[k] + ws[k]) && w[k] <= f[k] + 3.0 * (ws[k] + fs[k]);
        if !ok {
            return Err(format!("point {k}: equal {} waterfill {} full {}", e[k], w[k], f[k]));
        }
    }
    Ok(format!("equal <= waterfill <= full at {} SNRs", e.len()))
}

fn e1_backends_agree() -> Outcome {
    let series = e1_series(1.0);
    let cf = (-1.0f64).exp() * scaled_e1_continued_fraction(1.0);
    let reference = 0.219_383_934_395_520_3;
    ensure(
        (series - reference).abs() < 1e-13 && (cf - reference).abs() < 1e-13,
        format!("E1(1): series {series:.15}, continued fraction {cf:.15}"),
    )
}

fn full_stream_identity() -> Outcome {
    for l_s in 1..=12 {
        for g in [0.1, 1.0, 10.0, 1000.0] {
            let ens = HomogeneousEnsemble::new(l_s, l_s, g).map_err(err)?;
            let sum = ergodic_rate_alternating(&ens).map_err(err)?;
            let full = l_s as f64 * delta(g).map_err(err)?;
            if (sum - full).abs() > 1e-8 * full.max(1.0) {
                return Err(format!("L_s = {l_s}, γ = {g}: {sum} vs {full}"));
            }
        }
    }
    Ok("order-statistic sum equals L_s·Δ(γ) for L_s <= 12".into())
}

fn sum_vs_quadrature() -> Outcome {
    let mut worst: f64 = 0.0;
    for (l_s, n_s) in [(12, 3), (20, 8), (20, 20)] {
        for g in [0.5, 10.0, 300.0] {
            let ens = HomogeneousEnsemble::new(l_s, n_s, g).map_err(err)?;
            let a = ergodic_rate_alternating(&ens).map_err(err)?;
            let q = ergodic_rate_quadrature(&ens).map_err(err)?;
            worst = worst.max((a - q).abs() / q);
        }
    }
    let big = ergodic_rate_homogeneous(&HomogeneousEnsemble::new(60, 12, 10.0).map_err(err)?).map_err(err)?;
    ensure(worst < 1e-7 && big.is_finite(), format!("max relative gap {worst:.1e}"))
}

fn dmt_fully_connected_values() -> Outcome {
    let tail: f64 = (6..=12).map(|g| 1.0 / g as f64).sum();
    let expected = [(0.0, 12.0), (11.0, 1.0 / 12.0), (12.0, 0.0), (6.0, 7.0 - 6.0 * tail)];
    for (d, g) in expected {
        let v = dmt_fully_connected(d, 12).map_err(err)?;
        if (v - g).abs() > 1e-12 {
            return Err(format!("G_m({d}) = {v}, expected {g}"));
        }
    }
    Ok("L_s = 12 values exact".into())
}

fn dmt_partially_connected_values() -> Outcome {
    // K_t = K_r = 2, L = 3: path diversities 12 and 3.
    let expected = [(0.0, 2.0), (3.0, 0.75), (6.0, 0.5), (12.0, 0.0)];
    for (d, g) in expected {
        let v = dmt_partially_connected(d, 2, 2, 3).map_err(err)?;
        if (v - g).abs() > 1e-12 {
            return Err(format!("G_m({d}) = {v}, expected {g}"));
        }
    }
    Ok("K = 2, L = 3 values exact".into())
}

fn dmt_convex() -> Outcome {
    for arch in [
        Architecture::FullyConnected { l_s: 12 },
        Architecture::PartiallyConnected { k_t: 3, k_r: 2, l: 2 },
    ] {
        let top = arch.max_diversity();
        let n = 400;
        let g: Vec<f64> = (0..=n)
            .map(|k| arch.multiplexing_gain(top * k as f64 / n as f64))
            .collect::<crate::Result<_>>()
            .map_err(err)?;
        if g.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(format!("{}: not non-increasing", arch.name()));
        }
        if g.windows(3).any(|w| w[0] - 2.0 * w[1] + w[2] < -1e-9) {
            return Err(format!("{}: not convex", arch.name()));
        }
    }
    Ok("non-increasing and convex on 401-point grids".into())
}

fn first_entry(seed: u64, t: u64) -> crate::Result<C64> {
    Ok(sample_channel(2, 4, 2, seed, t)?.h[(0, 0)])
}

fn substream_prefix() -> Outcome {
    let short = run_trials(20, 1, |t| first_entry(11, t)).map_err(err)?;
    let long = run_trials(40, 3, |t| first_entry(11, t)).map_err(err)?;
    ensure(short[..] == long[..20], "first 20 of 40 trials match a 20-trial run".into())
}

fn thread_determinism() -> Outcome {
    let cfg = ExperimentConfig::homogeneous(2, 8, 2, 4, vec![0.0, 10.0]).with_trials(64).with_seed(12);
    let a = run_rate_experiment(&cfg, 1).map_err(err)?.to_csv_string();
    let b = run_rate_experiment(&cfg, 4).map_err(err)?.to_csv_string();
    ensure(a == b, "1 and 4 threads give identical CSV".into())
}

fn outage_ordering() -> Outcome {
    let cfg = ExperimentConfig::homogeneous(1, 4, 4, 1, (0..=20).map(|k| k as f64).collect())
        .with_trials(20_000)
        .with_seed(13);
    let prob = |r: f64| -> std::result::Result<Vec<f64>, String> {
        let section = OutageSection { stream_index: 2, rate_exponent: r, rate_offset_bits: 1.0, fast_path: true };
        let (t, _) = estimate_outage(&cfg, &section, 0).map_err(err)?;
        Ok(t.floats("outage_prob").unwrap().to_vec())
    };
    let (p0, p5) = (prob(0.0)?, prob(0.5)?);
    let ok = p0.iter().zip(&p5).all(|(a, b)| a <= b);
    ensure(ok, format!("P_out(r=0) <= P_out(r=0.5) at every SNR; at 20 dB {:.2e} vs {:.2e}", p0[20], p5[20]))
}

fn mux_below_stream_count() -> Outcome {
    let curves = [MuxCurve { k: 1, l: 3, n_s: 3 }, MuxCurve { k: 2, l: 3, n_s: 12 }];
    let t = run_mux_convergence(&curves, &[10.0]).map_err(err)?;
    for c in curves {
        let psi = t.floats(&format!("psi_k{}_l{}_ns{}", c.k, c.l, c.n_s)).ok_or("missing psi column")?[0];
        if !(psi < c.n_s as f64) {
            return Err(format!("Ψ = {psi} at 10 dB, N_s = {}", c.n_s));
        }
    }
    Ok("Ψ < N_s at 10 dB".into())
}

fn multiuser_single_user() -> Outcome {
    let mut cfg = ExperimentConfig::homogeneous(2, 16, 3, 2, vec![0.0, 10.0]).with_trials(40).with_seed(14);
    cfg.geometry.k_r = 1;
    cfg.link = LinkConfig::homogeneous(1, 2, 3);
    let mu = multiuser_rate_experiment(&cfg, &MultiuserSection { k_u: 1 }, 1).map_err(err)?;
    let su = run_rate_experiment(&cfg, 1).map_err(err)?;
    let (a, b) = (mu.floats("user_1_rate").unwrap(), su.floats("mc_mean_rate").unwrap());
    let gap = a.iter().zip(b).map(|(x, y)| (x - y).abs() / y).fold(0.0, f64::max);
    ensure(gap < 1e-10, format!("K_u = 1 vs single link: relative gap {gap:.1e}"))
}

fn expect_config_error(toml: &str, needle: &str) -> Outcome {
    match ConfigFile::from_toml_str(toml).and_then(|c| c.experiment()) {
        Ok(_) => Err("accepted an invalid config".into()),
        Err(e) if e.to_string().contains(needle) => Ok(e.to_string()),
        Err(e) => Err(format!("wrong error: {e}")),
    }
}

const GOOD: &str = r#"
snr_grid_db = [0.0, 10.0]
n_s = 2
[geometry]
k_t = 2
k_r = 2
tx_array = { kind = "ula", n_h = 8 }
rx_array = { kind = "ula", n_h = 8 }
[link]
path_counts = 2
"#;

fn rejects_zero_spacing() -> Outcome {
    ConfigFile::from_toml_str(GOOD).and_then(|c| c.experiment()).map_err(err)?;
    expect_config_error(&GOOD.replace("n_h = 8 }\nrx", "n_h = 8, d_h = 0.0 }\nrx"), "d_h")
}

fn rejects_unknown_key() -> Outcome {
    expect_config_error(&GOOD.replace("n_s = 2", "n_s = 2\nsnr_grdi = 1"), "snr_grdi")
}

fn rejects_empty_grid() -> Outcome {
    expect_config_error(&GOOD.replace("[0.0, 10.0]", "[]"), "snr_grid_db")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes_and_names_are_unique() {
        let results = run_all();
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{failed:?}");
        let mut names = check_names();
        let n = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), n);
        assert!(results.iter().all(|r| !r.detail.contains('\n')));
    }
}

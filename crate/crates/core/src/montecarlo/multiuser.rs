//! Multiuser downlink: one base station with `K_b` subarrays serving `K_u`
//! users. Each user gets its own beam-steering columns and combiner; the
//! other users' streams are treated as noise.

use nalgebra::DMatrix;

use crate::array::C64;
use crate::beamforming::{log2_det_hpd, BeamformerPair};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::rng::trial_rng;

use super::config::{ExperimentConfig, MultiuserSection};
use super::rate::{closed_form_column, effective_channel};
use super::{db_to_linear, mean_stderr, provenance, run_trials, ResultTable};

struct TrialOutcome {
    /// `[user][snr]`
    rates: Vec<Vec<f64>>,
    /// Interference and signal power per stream index (unit per-stream
    /// power), summed over users.
    interference: Vec<f64>,
    signal: Vec<f64>,
    warned: bool,
}

/// `log2 det(R + S + I) − log2 det(R + I)` for user streams `own` of the
/// combined gain matrix `a` (rows: user streams, columns: all streams).
fn sinr_rate(a: &DMatrix<C64>, r_n: &DMatrix<C64>, own: std::ops::Range<usize>, p: f64) -> Result<f64> {
    let sqrt_p = C64::new(p.sqrt(), 0.0);
    let mut interference = r_n.clone();
    let mut total = r_n.clone();
    for c in 0..a.ncols() {
        let col = a.column(c) * sqrt_p;
        let outer = &col * col.adjoint();
        total += &outer;
        if !own.contains(&c) {
            interference += outer;
        }
    }
    Ok((log2_det_hpd(&total)? - log2_det_hpd(&interference)?).max(0.0))
}

fn one_trial(
    cfg: &ExperimentConfig,
    k_u: usize,
    gammas: &[f64],
    max_streams: usize,
    t: u64,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(cfg.seed, t);
    let users = (0..k_u)
        .map(|_| ChannelRealization::sample(&cfg.geometry, &cfg.link, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let beams = users
        .iter()
        .map(|ch| crate::beamforming::build_beamsteering(ch, cfg.n_s.resolve(ch.l_s())))
        .collect::<Result<Vec<_>>>()?;
    let streams: Vec<usize> = beams.iter().map(|b| b.n_s).collect();
    let total_streams: usize = streams.iter().sum();
    if total_streams > max_streams {
        return Err(Error::config(
            "n_s",
            format!("{total_streams} streams exceed the {max_streams} base-station antennas"),
        ));
    }
    let tx_cols: Vec<_> = beams.iter().flat_map(|b| b.tx_combined.column_iter()).collect();
    let f = DMatrix::from_columns(&tx_cols);

    let mut out = TrialOutcome {
        rates: Vec::with_capacity(k_u),
        interference: vec![0.0; streams.iter().copied().max().unwrap_or(0)],
        signal: vec![0.0; streams.iter().copied().max().unwrap_or(0)],
        warned: false,
    };
    let mut offset = 0;
    for (i, ch) in users.iter().enumerate() {
        let own = offset..offset + streams[i];
        offset += streams[i];
        let pair = BeamformerPair {
            tx_combined: f.clone(),
            rx_combined: beams[i].rx_combined.clone(),
            n_s: total_streams,
        };
        let (eff, warned) = effective_channel(&ch.h, &pair)?;
        out.warned |= warned;
        // Leakage is measured on the raw combined gains W^H H F.
        let raw = beams[i].rx_combined.adjoint() * &ch.h * &f;
        for l in 0..streams[i] {
            let row = raw.row(l);
            out.signal[l] += row[own.start + l].norm_sqr();
            out.interference[l] += (0..total_streams)
                .filter(|c| !own.contains(c))
                .map(|c| row[c].norm_sqr())
                .sum::<f64>();
        }
        let rates = gammas
            .iter()
            .map(|&g| sinr_rate(&eff.gain, &eff.r_n, own.clone(), cfg.per_stream_power(g)))
            .collect::<Result<Vec<_>>>()?;
        out.rates.push(rates);
    }
    Ok(out)
}

/// Per-user and sum rates of the beam-steering downlink, the single-user
/// closed form for comparison, and the per-stream inter-user
/// interference-to-signal ratio (ratio of trial-pooled means).
///
/// `cfg.geometry` describes one user's link: `k_t` base-station subarrays
/// and the user's own array on the receive side.
pub fn multiuser_rate_experiment(
    cfg: &ExperimentConfig,
    section: &MultiuserSection,
    threads: usize,
) -> Result<ResultTable> {
    cfg.validate()?;
    let k_u = section.k_u;
    if k_u == 0 {
        return Err(Error::config("multiuser.k_u", "must be >= 1"));
    }
    let max_streams = cfg.geometry.tx_dim();
    if let Some(l_s) = cfg.fixed_l_s() {
        let per_user = cfg.n_s.resolve(l_s);
        if k_u * per_user > max_streams {
            return Err(Error::config(
                "n_s",
                format!("{k_u} users x {per_user} streams exceed {max_streams} base-station antennas"),
            ));
        }
    }
    let gammas: Vec<f64> = cfg.snr_grid_db.iter().map(|&db| db_to_linear(db)).collect();
    let trials = run_trials(cfg.trials, threads, |t| one_trial(cfg, k_u, &gammas, max_streams, t))?;

    let n_points = gammas.len();
    let mut t = ResultTable::new();
    t.push_float("snr_a_db", cfg.snr_grid_db.clone())?;
    t.push_float("gamma_tilde", gammas.clone())?;
    let sums: Vec<Vec<f64>> = trials
        .iter()
        .map(|tr| (0..n_points).map(|k| tr.rates.iter().map(|r| r[k]).sum()).collect())
        .collect();
    let stats = |values: &dyn Fn(usize) -> Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        (0..n_points).map(|k| mean_stderr(&values(k))).unzip()
    };
    let (sum_mean, sum_err) = stats(&|k| sums.iter().map(|s| s[k]).collect());
    t.push_float("sum_rate", sum_mean)?;
    t.push_float("sum_rate_stderr", sum_err)?;
    for u in 0..k_u {
        let (m, e) = stats(&|k| trials.iter().map(|tr| tr.rates[u][k]).collect());
        t.push_float(format!("user_{}_rate", u + 1), m)?;
        t.push_float(format!("user_{}_stderr", u + 1), e)?;
    }
    let closed = closed_form_column(cfg, &gammas)?;
    t.push_float(
        "user_closed_form_rate",
        closed.clone().unwrap_or_else(|| vec![f64::NAN; n_points]),
    )?;

    let n_stream_slots = trials.iter().map(|tr| tr.signal.len()).max().unwrap_or(0);
    let mut isr = Vec::with_capacity(n_stream_slots);
    let mut isr_err = Vec::with_capacity(n_stream_slots);
    let mut mean_interference = Vec::with_capacity(n_stream_slots);
    for l in 0..n_stream_slots {
        let pairs: Vec<(f64, f64)> = trials
            .iter()
            .filter_map(|tr| Some((*tr.interference.get(l)?, *tr.signal.get(l)?)))
            .collect();
        let n = pairs.len() as f64;
        let i_bar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let s_bar = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let ratio = i_bar / s_bar;
        // Delta method for a ratio of means.
        let resid = pairs.iter().map(|(i, s)| (i - ratio * s).powi(2)).sum::<f64>();
        isr.push(ratio);
        isr_err.push((resid / (n * (n - 1.0)).max(1.0)).sqrt() / s_bar);
        mean_interference.push(i_bar / k_u as f64);
    }
    let worst = (0..isr.len()).max_by(|&a, &b| isr[a].total_cmp(&isr[b]));
    let max_isr = worst.map_or(0.0, |k| isr[k]);
    let max_isr_err = worst.map_or(0.0, |k| isr_err[k]);
    t.push_float("max_stream_isr", vec![max_isr; n_points])?;
    t.push_float("max_stream_isr_stderr", vec![max_isr_err; n_points])?;
    // Interference power per stream at the grid SNR, averaged over streams.
    let avg_i = mean_interference.iter().sum::<f64>() / n_stream_slots.max(1) as f64;
    t.push_float(
        "interference_power",
        gammas.iter().map(|&g| cfg.per_stream_power(g) * avg_i).collect(),
    )?;
    let warnings = trials.iter().filter(|tr| tr.warned).count() as u64;
    t.push_count("singularity_warnings", vec![warnings; n_points])?;

    t.set_meta("k_u", k_u);
    t.set_meta("stream_isr", isr);
    t.set_meta("stream_isr_stderr", isr_err);
    t.set_meta("max_stream_isr", max_isr);
    t.set_meta("singularity_warnings", warnings);
    t.set_meta("trials", cfg.trials);
    t.set_meta("seed", cfg.seed);
    t.set_meta("provenance", provenance(&format!("{cfg:?}{section:?}")));
    Ok(t)
}

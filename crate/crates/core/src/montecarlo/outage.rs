use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::rng::trial_rng;

use super::config::{ExperimentConfig, OutageSection};
use super::{db_to_linear, provenance, run_trials, ResultTable};

/// Outage probabilities inside this band are used for the slope fit.
pub const FIT_P_MIN: f64 = 1e-5;
pub const FIT_P_MAX: f64 = 1e-1;
/// Fewer events than this at a grid point excludes it from the fit.
pub const MIN_EVENTS: u64 = 50;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OutageFit {
    /// Least-squares slope of `ln P` against `ln γ̄` over the window.
    pub slope: Option<f64>,
    /// Same fit applied to the analytic probabilities on the same window.
    pub oracle_slope: Option<f64>,
    /// Asymptotic `−(L_s − l + 1)(1 − r)`.
    pub theory_slope: f64,
    /// First and last SNR (dB) of the fit window.
    pub window_db: Option<(f64, f64)>,
    pub points: usize,
}

/// `(2^{offset} γ̄^r − 1) / γ̄`: below this normalized gain the stream cannot
/// carry `offset + r·log2 γ̄` bits.
pub fn outage_threshold(gamma_bar: f64, rate_exponent: f64, rate_offset_bits: f64) -> f64 {
    (rate_offset_bits.exp2() * gamma_bar.powf(rate_exponent) - 1.0) / gamma_bar
}

/// `P(X_(l) < x)` for the `l`-th largest of `l_s` i.i.d. unit exponentials:
/// at least `l_s − l + 1` of them fall below `x`.
pub fn ordered_exponential_cdf(l: usize, l_s: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_f = (-(-x).exp_m1()).ln();
    let ln_1mf = -x;
    let mut ln_binom = 0.0;
    let (mut below, mut above) = (0.0, 0.0);
    // C(l_s, m) built up from m = 0.
    for m in 0..=l_s {
        if m > 0 {
            ln_binom += ((l_s - m + 1) as f64).ln() - (m as f64).ln();
        }
        let term = (ln_binom + m as f64 * ln_f + (l_s - m) as f64 * ln_1mf).exp();
        if m > l_s - l {
            below += term;
        } else {
            above += term;
        }
    }
    // Return the smaller tail directly so probabilities near 1 stay monotone.
    if below <= 0.5 { below } else { (1.0 - above).clamp(0.0, 1.0) }
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Longest run of consecutive eligible points; the earliest wins ties.
fn longest_run(eligible: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (k, &ok) in eligible.iter().chain(std::iter::once(&false)).enumerate() {
        match (ok, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| k - s > b - a + 1) {
                    best = Some((s, k - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Empirical outage probability of the `l`-th strongest path over the SNR
/// grid and the fitted diversity slope.
///
/// The fast path samples the `L_s` normalized path gains directly as unit
/// exponentials (homogeneous links only); otherwise full channels are drawn
/// and the `l`-th path gain is normalized by the SNR coefficient.
pub fn estimate_outage(
    cfg: &ExperimentConfig,
    section: &OutageSection,
    threads: usize,
) -> Result<(ResultTable, OutageFit)> {
    cfg.validate()?;
    let l = section.stream_index;
    let r = section.rate_exponent;
    let l_s = cfg
        .fixed_l_s()
        .ok_or_else(|| Error::config("link.path_counts", "outage needs fixed path counts"))?;
    if l == 0 || l > l_s {
        return Err(Error::config("outage.stream_index", format!("need 1 <= l <= L_s = {l_s}")));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(Error::config("outage.rate_exponent", "need 0 <= r < 1"));
    }
    if !(section.rate_offset_bits.is_finite() && section.rate_offset_bits >= 0.0) {
        return Err(Error::config("outage.rate_offset_bits", "must be finite and >= 0"));
    }
    let homogeneous = cfg.homogeneous_link().is_some();
    if section.fast_path && !homogeneous {
        return Err(Error::config("outage.fast_path", "fast path needs a homogeneous link"));
    }

    let gains: Vec<f64> = if section.fast_path {
        run_trials(cfg.trials, threads, |t| {
            let mut rng = trial_rng(cfg.seed, t);
            let mut x: Vec<f64> = (0..l_s).map(|_| Exp1.sample(&mut rng)).collect();
            let (_, nth, _) = x.select_nth_unstable_by(l - 1, |a: &f64, b| b.total_cmp(a));
            Ok(*nth)
        })?
    } else {
        let coeff = cfg.snr_coefficient();
        run_trials(cfg.trials, threads, |t| {
            let mut rng = trial_rng(cfg.seed, t);
            let ch = ChannelRealization::sample(&cfg.geometry, &cfg.link, &mut rng)?;
            Ok(ch.paths[l - 1].power() / coeff)
        })?
    };

    let gammas: Vec<f64> = cfg.snr_grid_db.iter().map(|&db| db_to_linear(db)).collect();
    let thresholds: Vec<f64> =
        gammas.iter().map(|&g| outage_threshold(g, r, section.rate_offset_bits)).collect();
    let events: Vec<u64> = thresholds
        .iter()
        .map(|&thr| gains.iter().filter(|&&x| x < thr).count() as u64)
        .collect();
    let probs: Vec<f64> = events.iter().map(|&e| e as f64 / cfg.trials as f64).collect();
    let analytic: Vec<f64> = if homogeneous {
        thresholds.iter().map(|&thr| ordered_exponential_cdf(l, l_s, thr)).collect()
    } else {
        vec![f64::NAN; gammas.len()]
    };
    let eligible: Vec<bool> = probs
        .iter()
        .zip(&events)
        .map(|(&p, &e)| (FIT_P_MIN..=FIT_P_MAX).contains(&p) && e >= MIN_EVENTS)
        .collect();
    let window = longest_run(&eligible).filter(|(a, b)| b > a);

    let theory_slope = -((l_s - l + 1) as f64) * (1.0 - r);
    let fit = match window {
        Some((a, b)) => {
            let x: Vec<f64> = gammas[a..=b].iter().map(|g| g.ln()).collect();
            let y: Vec<f64> = probs[a..=b].iter().map(|p| p.ln()).collect();
            let oracle = homogeneous.then(|| {
                let ya: Vec<f64> = analytic[a..=b].iter().map(|p| p.ln()).collect();
                least_squares_slope(&x, &ya)
            });
            OutageFit {
                slope: Some(least_squares_slope(&x, &y)),
                oracle_slope: oracle,
                theory_slope,
                window_db: Some((cfg.snr_grid_db[a], cfg.snr_grid_db[b])),
                points: b - a + 1,
            }
        }
        None => OutageFit { slope: None, oracle_slope: None, theory_slope, window_db: None, points: 0 },
    };
    let in_window: Vec<u64> = (0..gammas.len())
        .map(|k| window.is_some_and(|(a, b)| (a..=b).contains(&k)) as u64)
        .collect();
    let low_events: Vec<u64> = events.iter().map(|&e| (e < MIN_EVENTS) as u64).collect();

    let mut t = ResultTable::new();
    t.push_float("snr_db", cfg.snr_grid_db.clone())?;
    t.push_float("gamma_bar", gammas)?;
    t.push_float("threshold", thresholds)?;
    t.push_float("outage_prob", probs)?;
    t.push_count("outage_events", events)?;
    t.push_float("analytic_prob", analytic)?;
    t.push_count("in_fit_window", in_window)?;
    t.push_count("insufficient_events", low_events)?;
    let n = t.rows();
    t.push_float("fitted_slope", vec![fit.slope.unwrap_or(f64::NAN); n])?;
    t.push_float("theory_slope", vec![theory_slope; n])?;
    t.set_meta("fit", serde_json::to_value(&fit)?);
    t.set_meta("stream_index", l);
    t.set_meta("rate_exponent", r);
    t.set_meta("rate_offset_bits", section.rate_offset_bits);
    t.set_meta("fast_path", section.fast_path);
    t.set_meta("provenance", provenance(&format!("{cfg:?}{section:?}")));
    Ok((t, fit))
}

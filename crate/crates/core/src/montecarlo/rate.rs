use crate::beamforming::{
    build_beamsteering, digital_rate_from_singular_values, waterfill_nonneg, EffectiveChannel,
    PowerAllocation, PowerPolicy,
};
use crate::channel::ChannelRealization;
use crate::closedform::{ergodic_rate_homogeneous, HomogeneousEnsemble};
use crate::error::{Error, Result};
use crate::rng::trial_rng;

use super::config::{ExperimentConfig, Precoder, StreamCount};
use super::{db_to_linear, mean_stderr, provenance, run_trials, ResultTable};

/// Per-trial rates, one entry per SNR grid point.
struct TrialRates {
    mc: Vec<f64>,
    equal: Vec<f64>,
    water: Vec<f64>,
    full: Vec<f64>,
    digital: Vec<f64>,
    warned: bool,
    clamped: bool,
    l_s: usize,
}

/// Effective channel for a beamformer pair, falling back to the projected
/// form when the combiner Gram matrix is singular. The flag marks trials
/// that were ill-conditioned or singular.
pub(crate) fn effective_channel(
    h: &nalgebra::DMatrix<crate::array::C64>,
    bf: &crate::beamforming::BeamformerPair,
) -> Result<(EffectiveChannel, bool)> {
    match EffectiveChannel::new(h, bf) {
        Ok(e) => {
            let warn = e.is_ill_conditioned();
            Ok((e, warn))
        }
        Err(Error::SingularCombiner { .. }) => Ok((EffectiveChannel::projected(h, bf)?, true)),
        Err(e) => Err(e),
    }
}

fn one_trial(cfg: &ExperimentConfig, gammas: &[f64], t: u64) -> Result<TrialRates> {
    let mut rng = trial_rng(cfg.seed, t);
    let ch = ChannelRealization::sample(&cfg.geometry, &cfg.link, &mut rng)?;
    let l_s = ch.l_s();
    let n_s = cfg.n_s.resolve(l_s);
    let clamped = matches!(cfg.n_s, StreamCount::Fixed(n) if n > l_s);
    let bf = build_beamsteering(&ch, n_s)?;
    let (eff, warned) = effective_channel(&ch.h, &bf)?;
    let sv: Vec<f64> = ch.singular_values().iter().copied().collect();
    let path_gains: Vec<f64> = ch.paths[..n_s].iter().map(|p| p.power()).collect();

    let mut out = TrialRates {
        mc: Vec::with_capacity(gammas.len()),
        equal: Vec::with_capacity(gammas.len()),
        water: Vec::with_capacity(gammas.len()),
        full: Vec::with_capacity(gammas.len()),
        digital: Vec::with_capacity(gammas.len()),
        warned,
        clamped,
        l_s,
    };
    for &gamma in gammas {
        let p = cfg.per_stream_power(gamma);
        let total = p * n_s as f64;
        let equal = eff.rate(&PowerAllocation::equal(n_s, total)?)?;
        let water = eff.rate(&PowerAllocation::new(waterfill_nonneg(&path_gains, total))?)?;
        let full = eff.rate(&PowerAllocation::equal(n_s, total * n_s as f64)?)?;
        let digital = digital_rate_from_singular_values(&sv, total, n_s, PowerPolicy::Waterfilling);
        let mc = match (cfg.precoder, cfg.power_policy) {
            (Precoder::BeamSteering, PowerPolicy::EqualPower) => equal,
            (Precoder::BeamSteering, PowerPolicy::Waterfilling) => water,
            (Precoder::DigitalSvd, PowerPolicy::Waterfilling) => digital,
            (Precoder::DigitalSvd, PowerPolicy::EqualPower) => {
                digital_rate_from_singular_values(&sv, total, n_s, PowerPolicy::EqualPower)
            }
        };
        out.mc.push(mc);
        out.equal.push(equal);
        out.water.push(water);
        out.full.push(full);
        out.digital.push(digital);
    }
    Ok(out)
}

/// Closed-form ergodic rate at each SNR for homogeneous fixed-count links;
/// `None` otherwise.
pub fn closed_form_column(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<Option<Vec<f64>>> {
    let (Some(_), Some(l_s)) = (cfg.homogeneous_link(), cfg.fixed_l_s()) else {
        return Ok(None);
    };
    let n_s = cfg.n_s.resolve(l_s);
    gammas
        .iter()
        .map(|&g| ergodic_rate_homogeneous(&HomogeneousEnsemble::new(l_s, n_s, g)?))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Monte Carlo ergodic rate over the SNR grid, with the closed form, the
/// fully digital benchmark and the three power-allocation variants of the
/// equal/optimal sandwich alongside.
///
/// Each trial draws one channel and evaluates every grid point on it.
pub fn run_rate_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ResultTable> {
    cfg.validate()?;
    let gammas: Vec<f64> = cfg.snr_grid_db.iter().map(|&db| db_to_linear(db)).collect();
    let trials = run_trials(cfg.trials, threads, |t| one_trial(cfg, &gammas, t))?;

    let n_points = gammas.len();
    let column = |pick: fn(&TrialRates) -> &Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        let mut means = Vec::with_capacity(n_points);
        let mut errs = Vec::with_capacity(n_points);
        let mut xs = Vec::with_capacity(trials.len());
        for k in 0..n_points {
            xs.clear();
            xs.extend(trials.iter().map(|tr| pick(tr)[k]));
            let (m, s) = mean_stderr(&xs);
            means.push(m);
            errs.push(s);
        }
        (means, errs)
    };
    let (mc, mc_err) = column(|t| &t.mc);
    let (equal, equal_err) = column(|t| &t.equal);
    let (water, water_err) = column(|t| &t.water);
    let (full, full_err) = column(|t| &t.full);
    let (digital, digital_err) = column(|t| &t.digital);
    let warnings = trials.iter().filter(|t| t.warned).count() as u64;
    let clamps = trials.iter().filter(|t| t.clamped).count() as u64;
    let mean_l_s = trials.iter().map(|t| t.l_s as f64).sum::<f64>() / trials.len() as f64;

    let nominal_streams = match cfg.fixed_l_s() {
        Some(l_s) => cfg.n_s.resolve(l_s) as f64,
        None => match cfg.n_s {
            StreamCount::Fixed(n) => n as f64,
            StreamCount::Adaptive => cfg.nominal_l_s(),
        },
    };
    let closed = closed_form_column(cfg, &gammas)?;

    let mut t = ResultTable::new();
    t.push_float("snr_a_db", cfg.snr_grid_db.clone())?;
    t.push_float("gamma_tilde", gammas.clone())?;
    t.push_float(
        "total_power",
        gammas.iter().map(|&g| cfg.per_stream_power(g) * nominal_streams).collect(),
    )?;
    t.push_float("mc_mean_rate", mc)?;
    t.push_float("mc_stderr", mc_err)?;
    t.push_float("closed_form_rate", closed.clone().unwrap_or_else(|| vec![f64::NAN; n_points]))?;
    t.push_float("digital_svd_rate", digital)?;
    t.push_float("digital_svd_stderr", digital_err)?;
    t.push_float("equal_power_rate", equal)?;
    t.push_float("equal_power_stderr", equal_err)?;
    t.push_float("waterfilling_rate", water)?;
    t.push_float("waterfilling_stderr", water_err)?;
    t.push_float("full_power_rate", full)?;
    t.push_float("full_power_stderr", full_err)?;
    t.push_count("singularity_warnings", vec![warnings; n_points])?;

    t.set_meta("provenance", provenance(&format!("{cfg:?}")));
    t.set_meta("trials", cfg.trials);
    t.set_meta("seed", cfg.seed);
    t.set_meta("realized_mean_path_count", mean_l_s);
    t.set_meta("singularity_warnings", warnings);
    t.set_meta("stream_clamps", clamps);
    t.set_meta("closed_form_available", closed.is_some());
    Ok(t)
}

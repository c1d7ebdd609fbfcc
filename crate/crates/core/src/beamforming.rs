//! Beam-steering precoder/combiner built from the strongest paths, power
//! allocation, and achievable-rate evaluation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::C64;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};

/// Condition number of the combiner Gram matrix above which a trial is flagged.
pub const CONDITION_WARNING: f64 = 1e8;
/// Reciprocal condition number below which the combiner is treated as singular.
const SINGULAR_RCOND: f64 = 1e-13;

/// Combined products `F_t·W_t` and `F_r·W_r`, one column per stream.
#[derive(Debug, Clone)]
pub struct BeamformerPair {
    pub tx_combined: DMatrix<C64>,
    pub rx_combined: DMatrix<C64>,
    pub n_s: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerPolicy {
    EqualPower,
    Waterfilling,
}

/// Diagonal of the stream power matrix and its total.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p: Vec<f64>,
    pub total: f64,
}

impl PowerAllocation {
    pub fn equal(n_s: usize, total: f64) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::invalid("n_s", "must be >= 1"));
        }
        Self::new(vec![total / n_s as f64; n_s])
    }

    /// Takes the given per-stream powers; the total is their sum.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::invalid("power", "per-stream powers must be finite and >= 0"));
        }
        let total = p.iter().sum();
        Ok(PowerAllocation { p, total })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PowerAllocation {
            p: self.p.iter().map(|x| x * factor).collect(),
            total: self.total * factor,
        }
    }
}

/// Column `l` pairs the embedded responses of the `l`-th strongest path; the
/// transmit column is rotated by `exp(j·psi_l)`.
pub fn build_beamsteering(ch: &ChannelRealization, n_s: usize) -> Result<BeamformerPair> {
    if n_s == 0 || n_s > ch.l_s() {
        return Err(Error::invalid(
            "n_s",
            format!("need 1 <= n_s <= L_s = {}, got {n_s}", ch.l_s()),
        ));
    }
    let tx_cols: Vec<DVector<C64>> = ch.paths[..n_s]
        .iter()
        .zip(&ch.tx_vectors)
        .map(|(p, v)| &v.entries * C64::from_polar(1.0, p.psi))
        .collect();
    let rx_cols: Vec<DVector<C64>> = ch.rx_vectors[..n_s].iter().map(|v| v.entries.clone()).collect();
    Ok(BeamformerPair {
        tx_combined: DMatrix::from_columns(&tx_cols),
        rx_combined: DMatrix::from_columns(&rx_cols),
        n_s,
    })
}

/// The `N_s × N_s` quantities the log-det rate depends on: the combined
/// channel `W^H H F` and the combiner Gram matrix `R_n = W^H W`.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    pub gain: DMatrix<C64>,
    pub r_n: DMatrix<C64>,
    pub condition: f64,
}

impl EffectiveChannel {
    pub fn new(h: &DMatrix<C64>, bf: &BeamformerPair) -> Result<Self> {
        if h.nrows() != bf.rx_combined.nrows() || h.ncols() != bf.tx_combined.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "H is {}x{}, beamformers expect {}x{}",
                h.nrows(),
                h.ncols(),
                bf.rx_combined.nrows(),
                bf.tx_combined.nrows()
            )));
        }
        let w_h = bf.rx_combined.adjoint();
        let gain = &w_h * h * &bf.tx_combined;
        let r_n = &w_h * &bf.rx_combined;
        let eig = r_n.clone().symmetric_eigenvalues();
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if !(lo > SINGULAR_RCOND * hi) {
            return Err(Error::SingularCombiner {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }
        Ok(EffectiveChannel {
            gain,
            r_n,
            condition: hi / lo,
        })
    }

    /// Same rate as [`EffectiveChannel::new`] when `R_n` is invertible, but
    /// also defined when receive columns are linearly dependent: the combiner
    /// output is whitened on the column space of `W`, i.e. the mutual
    /// information of `W^H y` without dividing by a singular Gram matrix.
    pub fn projected(h: &DMatrix<C64>, bf: &BeamformerPair) -> Result<Self> {
        if h.nrows() != bf.rx_combined.nrows() || h.ncols() != bf.tx_combined.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "H is {}x{}, beamformers expect {}x{}",
                h.nrows(),
                h.ncols(),
                bf.rx_combined.nrows(),
                bf.tx_combined.nrows()
            )));
        }
        let w_h = bf.rx_combined.adjoint();
        let gram = &w_h * &bf.rx_combined;
        let dim = gram.nrows();
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > SINGULAR_RCOND * top)
            .collect();
        if keep.is_empty() {
            return Err(Error::SingularCombiner { condition: f64::INFINITY });
        }
        let whiten = DMatrix::from_fn(keep.len(), dim, |r, c| {
            eig.eigenvectors[(c, keep[r])].conj() / eig.eigenvalues[keep[r]].sqrt()
        });
        let gain = whiten * (&w_h * h * &bf.tx_combined);
        let lo = keep.iter().map(|&k| eig.eigenvalues[k]).fold(f64::INFINITY, f64::min);
        Ok(EffectiveChannel {
            r_n: DMatrix::identity(keep.len(), keep.len()),
            gain,
            condition: top / lo,
        })
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition > CONDITION_WARNING
    }

    /// `log2 det(I + R_n^{-1} G P G^H)`, evaluated as
    /// `log2 det(R_n + G P G^H) - log2 det(R_n)`.
    pub fn rate(&self, pa: &PowerAllocation) -> Result<f64> {
        let n = self.gain.ncols();
        if pa.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} stream powers for {} streams",
                pa.len(),
                n
            )));
        }
        let mut scaled = self.gain.clone();
        for (mut col, &p) in scaled.column_iter_mut().zip(&pa.p) {
            col *= C64::new(p.sqrt(), 0.0);
        }
        let signal = &scaled * scaled.adjoint();
        let rate = log2_det_hpd(&(&self.r_n + signal))? - log2_det_hpd(&self.r_n)?;
        Ok(rate.max(0.0))
    }
}

/// `log2 det` of a Hermitian positive-definite matrix via Cholesky.
pub fn log2_det_hpd(m: &DMatrix<C64>) -> Result<f64> {
    // Symmetrize to keep Cholesky happy with rounding-level asymmetry.
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let chol = sym.cholesky().ok_or(Error::SingularCombiner {
        condition: f64::INFINITY,
    })?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.re.ln()).sum::<f64>() / std::f64::consts::LN_2)
}

/// Achievable rate with the combined beamformers substituted into the full
/// log-det expression, so finite-size inter-stream leakage is kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEval {
    pub bits: f64,
    pub condition: f64,
}

pub fn achievable_rate(
    ch: &ChannelRealization,
    bf: &BeamformerPair,
    pa: &PowerAllocation,
) -> Result<RateEval> {
    let eff = EffectiveChannel::new(&ch.h, bf)?;
    Ok(RateEval {
        bits: eff.rate(pa)?,
        condition: eff.condition,
    })
}

/// Per-stream SNR `p_l·|alpha_tilde_l|²` over the `n_s` strongest paths.
pub fn stream_snrs(ch: &ChannelRealization, pa: &PowerAllocation, n_s: usize) -> Result<Vec<f64>> {
    if n_s > ch.l_s() || pa.len() < n_s {
        return Err(Error::invalid(
            "n_s",
            format!("n_s = {n_s} exceeds L_s = {} or the power vector", ch.l_s()),
        ));
    }
    Ok(ch.paths[..n_s]
        .iter()
        .zip(&pa.p)
        .map(|(path, p)| p * path.power())
        .collect())
}

/// Waterfilling `p_l = (mu - 1/g_l)^+` with `Σ p_l = total_power`, solved
/// exactly by scanning active sets of the strongest gains.
pub fn waterfill(gains: &[f64], total_power: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return Err(Error::invalid("gains", "need at least one stream"));
    }
    if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::invalid("gains", format!("gains must be finite and > 0, got {g}")));
    }
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::invalid("total_power", "must be finite and > 0"));
    }
    let level = water_level(gains, total_power);
    let p = gains.iter().map(|g| (level - 1.0 / g).max(0.0)).collect();
    Ok(PowerAllocation { p, total: total_power })
}

/// Water level `mu` for strictly positive gains.
fn water_level(gains: &[f64], total_power: f64) -> f64 {
    let mut inv: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    inv.sort_by(f64::total_cmp);
    let mut prefix = 0.0;
    let mut best = total_power + inv[0];
    for (k, &floor) in inv.iter().enumerate() {
        prefix += floor;
        let mu = (total_power + prefix) / (k + 1) as f64;
        if mu > floor {
            best = mu;
        } else {
            break;
        }
    }
    best
}

/// Waterfilling that tolerates zero gains (they get no power).
pub(crate) fn waterfill_nonneg(gains: &[f64], total_power: f64) -> Vec<f64> {
    let positive: Vec<f64> = gains.iter().copied().filter(|g| *g > 0.0).collect();
    if positive.is_empty() || total_power <= 0.0 {
        return vec![0.0; gains.len()];
    }
    let mu = water_level(&positive, total_power);
    gains
        .iter()
        .map(|&g| if g > 0.0 { (mu - 1.0 / g).max(0.0) } else { 0.0 })
        .collect()
}

/// Rate of an ideal fully digital transceiver restricted to `n_s` streams on
/// the given singular values (sorted non-increasing).
pub fn digital_rate_from_singular_values(
    sv: &[f64],
    total_power: f64,
    n_s: usize,
    policy: PowerPolicy,
) -> f64 {
    let gains: Vec<f64> = sv.iter().take(n_s).map(|s| s * s).collect();
    let p = match policy {
        PowerPolicy::Waterfilling => waterfill_nonneg(&gains, total_power),
        PowerPolicy::EqualPower => vec![total_power / n_s as f64; gains.len()],
    };
    gains.iter().zip(&p).map(|(g, p)| (p * g).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Fully digital benchmark: exact SVD of `H`, waterfilling over the `n_s`
/// strongest singular modes.
pub fn digital_svd_rate(h: &DMatrix<C64>, total_power: f64, n_s: usize) -> Result<f64> {
    let max_streams = h.nrows().min(h.ncols());
    if n_s == 0 || n_s > max_streams {
        return Err(Error::invalid(
            "n_s",
            format!("need 1 <= n_s <= {max_streams}, got {n_s}"),
        ));
    }
    let mut sv: Vec<f64> = h.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(digital_rate_from_singular_values(&sv, total_power, n_s, PowerPolicy::Waterfilling))
}

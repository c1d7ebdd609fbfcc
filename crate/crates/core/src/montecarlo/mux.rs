use crate::closedform::{ergodic_rate_homogeneous, HomogeneousEnsemble};
use crate::error::Result;

use super::config::MuxCurve;
use super::{db_to_linear, provenance, ResultTable};

pub fn curve_label(c: &MuxCurve) -> String {
    format!("k{}_l{}_ns{}", c.k, c.l, c.n_s)
}

/// Closed-form `Ψ(γ̄) = R(γ̄) / log2 γ̄` per curve, plus the per-doubling
/// slope `R(2γ̄) − R(γ̄)` as a second estimate of the multiplexing gain.
///
/// `Ψ` is NaN at grid points with `γ̄ <= 1`; those rows are listed in the
/// `excluded_snr_db` metadata entry.
pub fn run_mux_convergence(curves: &[MuxCurve], snr_grid_db: &[f64]) -> Result<ResultTable> {
    let gammas: Vec<f64> = snr_grid_db.iter().map(|&db| db_to_linear(db)).collect();
    let mut t = ResultTable::new();
    t.push_float("snr_db", snr_grid_db.to_vec())?;
    t.push_float("gamma_bar", gammas.clone())?;
    for c in curves {
        let ens = HomogeneousEnsemble::new(c.l_s(), c.n_s, 1.0)?;
        let mut rate = Vec::with_capacity(gammas.len());
        let mut psi = Vec::with_capacity(gammas.len());
        let mut slope = Vec::with_capacity(gammas.len());
        for &g in &gammas {
            let r = ergodic_rate_homogeneous(&ens.with_gamma(g))?;
            let r2 = ergodic_rate_homogeneous(&ens.with_gamma(2.0 * g))?;
            rate.push(r);
            psi.push(if g > 1.0 { r / g.log2() } else { f64::NAN });
            slope.push(r2 - r);
        }
        let label = curve_label(c);
        t.push_float(format!("rate_{label}"), rate)?;
        t.push_float(format!("psi_{label}"), psi)?;
        t.push_float(format!("slope_{label}"), slope)?;
    }
    let excluded: Vec<f64> = snr_grid_db
        .iter()
        .zip(&gammas)
        .filter(|(_, &g)| g <= 1.0)
        .map(|(&db, _)| db)
        .collect();
    t.set_meta("excluded_snr_db", excluded);
    t.set_meta("provenance", provenance(&format!("{curves:?}{snr_grid_db:?}")));
    Ok(t)
}

//! Ergodic rates of the ordered-path channel: order-statistic densities,
//! the homogeneous closed form and its quadrature backend, bounds for the
//! inhomogeneous case, and the distributed vs co-located comparison.

use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use super::quad;
use super::special::delta;
use crate::error::{Error, Result};

/// Above this many paths the alternating binomial sum loses too many digits
/// and the rate is computed by quadrature instead.
pub const ALTERNATING_SUM_MAX_PATHS: usize = 30;

/// `L_s` i.i.d. unit-mean exponential path gains scaled by a common average
/// per-stream SNR `gamma_tilde`, of which the `n_s` strongest carry data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousEnsemble {
    pub l_s: usize,
    pub n_s: usize,
    pub gamma_tilde: f64,
}

impl HomogeneousEnsemble {
    pub fn new(l_s: usize, n_s: usize, gamma_tilde: f64) -> Result<Self> {
        let ens = HomogeneousEnsemble { l_s, n_s, gamma_tilde };
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 || self.n_s > self.l_s {
            return Err(Error::invalid(
                "n_s",
                format!("need 1 <= n_s <= L_s = {}, got {}", self.l_s, self.n_s),
            ));
        }
        if !(self.gamma_tilde.is_finite() && self.gamma_tilde > 0.0) {
            return Err(Error::invalid("gamma_tilde", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn with_gamma(self, gamma_tilde: f64) -> Self {
        HomogeneousEnsemble { gamma_tilde, ..self }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `L_s! / ((L_s-l)! (l-1)!)`.
fn order_coefficient(l: usize, l_s: usize) -> f64 {
    (ln_factorial(l_s) - ln_factorial(l_s - l) - ln_factorial(l - 1)).exp()
}

fn check_order(l: usize, l_s: usize) -> Result<()> {
    if l == 0 || l > l_s {
        Err(Error::IndexOutOfRange { index: l, max: l_s })
    } else {
        Ok(())
    }
}

/// Density of the `l`-th largest of `L_s` i.i.d. exponential SNRs with mean
/// `ens.gamma_tilde`, at `gamma`.
pub fn ordered_snr_pdf(l: usize, ens: &HomogeneousEnsemble, gamma: f64) -> Result<f64> {
    check_order(l, ens.l_s)?;
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma", "must be >= 0"));
    }
    let t = gamma / ens.gamma_tilde;
    Ok(unit_ordered_pdf(l, ens.l_s, t) / ens.gamma_tilde)
}

/// Same density for unit mean.
fn unit_ordered_pdf(l: usize, l_s: usize, t: f64) -> f64 {
    let cdf = -(-t).exp_m1();
    order_coefficient(l, l_s) * cdf.powi((l_s - l) as i32) * (-(l as f64) * t).exp()
}

/// `Δ(γ/m)/m` for `m = 1..=l_s` (index 0 unused).
fn delta_table(l_s: usize, gamma_tilde: f64) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((1..=l_s).map(|m| {
            let m = m as f64;
            delta(gamma_tilde / m).expect("positive argument") / m
        }))
        .collect()
}

fn stream_rate_from_table(l: usize, l_s: usize, table: &[f64]) -> f64 {
    let coef = order_coefficient(l, l_s);
    let top = l_s - l;
    (0..=top)
        .map(|k| {
            let sign = if (top - k).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * coef * binomial(top, k) * table[l_s - k]
        })
        .sum()
}

/// Ergodic rate of the `l`-th strongest stream from the alternating binomial
/// expansion of the order-statistic density.
pub fn stream_rate_alternating(l: usize, l_s: usize, gamma_tilde: f64) -> Result<f64> {
    HomogeneousEnsemble::new(l_s, l_s, gamma_tilde)?;
    check_order(l, l_s)?;
    Ok(stream_rate_from_table(l, l_s, &delta_table(l_s, gamma_tilde)))
}

/// `∫ log2(1+γ) f_{l:L_s}(γ) dγ` by adaptive quadrature.
pub fn stream_rate_quadrature(l: usize, l_s: usize, gamma_tilde: f64) -> Result<f64> {
    HomogeneousEnsemble::new(l_s, l_s, gamma_tilde)?;
    check_order(l, l_s)?;
    let f = |t: f64| (gamma_tilde * t).ln_1p() * LOG2_E * unit_ordered_pdf(l, l_s, t);
    // Geometric breakpoints resolve both the small-t behaviour of the weakest
    // paths and the log kink near 1/gamma.
    let mut breaks = vec![0.0];
    let mut x = 1e-8;
    while x < 80.0 {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.push(80.0);
    Ok(breaks
        .windows(2)
        .map(|w| quad::integrate(f, w[0], w[1], 1e-16, 1e-13))
        .sum())
}

/// Sum over the `n_s` strongest streams, alternating-sum backend.
pub fn ergodic_rate_alternating(ens: &HomogeneousEnsemble) -> Result<f64> {
    ens.validate()?;
    let table = delta_table(ens.l_s, ens.gamma_tilde);
    Ok((1..=ens.n_s)
        .map(|l| stream_rate_from_table(l, ens.l_s, &table))
        .sum())
}

/// Sum over the `n_s` strongest streams, quadrature backend.
pub fn ergodic_rate_quadrature(ens: &HomogeneousEnsemble) -> Result<f64> {
    ens.validate()?;
    (1..=ens.n_s)
        .map(|l| stream_rate_quadrature(l, ens.l_s, ens.gamma_tilde))
        .sum()
}

/// Ergodic rate with equal per-stream SNR in the large-array limit. With all
/// paths in use this is `L_s·Δ(γ)`; otherwise the order-statistic sum.
pub fn ergodic_rate_homogeneous(ens: &HomogeneousEnsemble) -> Result<f64> {
    ens.validate()?;
    if ens.n_s == ens.l_s {
        let full = ens.l_s as f64 * delta(ens.gamma_tilde)?;
        if ens.l_s <= 12 {
            let alt = ergodic_rate_alternating(ens)?;
            debug_assert!(
                (alt - full).abs() <= 1e-8 * full.max(1.0),
                "alternating sum {alt} disagrees with L_s·Δ = {full}"
            );
        }
        return Ok(full);
    }
    if ens.l_s <= ALTERNATING_SUM_MAX_PATHS {
        ergodic_rate_alternating(ens)
    } else {
        ergodic_rate_quadrature(ens)
    }
}

/// Rates at the smallest and largest per-stream SNR, which bracket the rate
/// of an inhomogeneous coefficient set.
pub fn ergodic_rate_bounds(
    gamma_tilde_min: f64,
    gamma_tilde_max: f64,
    ens: &HomogeneousEnsemble,
) -> Result<(f64, f64)> {
    if !(gamma_tilde_min > 0.0 && gamma_tilde_min <= gamma_tilde_max) {
        return Err(Error::invalid(
            "gamma_tilde_min",
            format!("need 0 < min <= max, got {gamma_tilde_min} and {gamma_tilde_max}"),
        ));
    }
    Ok((
        ergodic_rate_homogeneous(&ens.with_gamma(gamma_tilde_min))?,
        ergodic_rate_homogeneous(&ens.with_gamma(gamma_tilde_max))?,
    ))
}

/// `(K_t K_r L·Δ(γ), L·Δ(K_t K_r γ))`: all paths over distributed subarrays
/// vs one co-located array with the same total antennas and `L` paths.
pub fn colocated_comparison(k_t: usize, k_r: usize, l: usize, gamma_tilde: f64) -> Result<(f64, f64)> {
    if k_t == 0 || k_r == 0 || l == 0 {
        return Err(Error::invalid("k_t/k_r/L", "must be >= 1"));
    }
    let k = (k_t * k_r) as f64;
    Ok((
        k * l as f64 * delta(gamma_tilde)?,
        l as f64 * delta(k * gamma_tilde)?,
    ))
}

/// Average maximum multiplexing gain `K_r K_t L̄`.
pub fn max_mux_gain(k_t: usize, k_r: usize, l_bar: f64) -> f64 {
    (k_r * k_t) as f64 * l_bar
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: composite Simpson on [0, upper] in the unit-mean variable.
    fn simpson<F: Fn(f64) -> f64>(f: F, upper: f64, n: usize) -> f64 {
        let h = upper / n as f64;
        let mut acc = f(0.0) + f(upper);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    // Order-statistic density written straight from F and f, no log-space tricks.
    fn naive_pdf(l: usize, l_s: usize, t: f64) -> f64 {
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let c = fact(l_s) / (fact(l_s - l) * fact(l - 1));
        let cdf = 1.0 - (-t).exp();
        c * cdf.powi((l_s - l) as i32) * (1.0 - cdf).powi((l - 1) as i32) * (-t).exp()
    }

    #[test]
    fn single_path_density_is_exponential() {
        let ens = HomogeneousEnsemble::new(1, 1, 2.5).unwrap();
        for g in [0.0, 0.3, 4.0] {
            let v = ordered_snr_pdf(1, &ens, g).unwrap();
            assert!((v - (-g / 2.5f64).exp() / 2.5).abs() < 1e-15);
        }
    }

    #[test]
    fn max_density_vanishes_at_zero() {
        let ens = HomogeneousEnsemble::new(2, 2, 1.0).unwrap();
        assert_eq!(ordered_snr_pdf(1, &ens, 0.0).unwrap(), 0.0);
        assert!(ordered_snr_pdf(3, &ens, 1.0).is_err());
        assert!(ordered_snr_pdf(0, &ens, 1.0).is_err());
    }

    #[test]
    fn ordered_densities_integrate_to_one() {
        let ens = HomogeneousEnsemble::new(3, 3, 1.7).unwrap();
        for l in 1..=3 {
            let mass = simpson(|g| ordered_snr_pdf(l, &ens, g).unwrap(), 1.7 * 60.0, 200_000);
            assert!((mass - 1.0).abs() < 1e-9, "l={l}: {mass}");
        }
    }

    #[test]
    fn density_matches_naive_form() {
        for (l, l_s) in [(1, 5), (3, 5), (5, 5), (4, 12)] {
            let ens = HomogeneousEnsemble::new(l_s, l_s, 1.0).unwrap();
            for t in [0.01, 0.5, 2.0, 7.0] {
                let a = ordered_snr_pdf(l, &ens, t).unwrap();
                let b = naive_pdf(l, l_s, t);
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "{l} {l_s} {t}");
            }
        }
    }

    #[test]
    fn mixture_of_ordered_densities_is_exponential() {
        let l_s = 6;
        let ens = HomogeneousEnsemble::new(l_s, l_s, 2.0).unwrap();
        for i in 0..200 {
            let g = i as f64 * 0.1;
            let mix: f64 = (1..=l_s).map(|l| ordered_snr_pdf(l, &ens, g).unwrap()).sum::<f64>() / l_s as f64;
            assert!((mix - (-g / 2.0f64).exp() / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn all_streams_reduce_to_delta() {
        for l_s in 1..=12 {
            for gamma in [0.1, 1.0, 10.0, 100.0] {
                let ens = HomogeneousEnsemble::new(l_s, l_s, gamma).unwrap();
                let alt = ergodic_rate_alternating(&ens).unwrap();
                let full = l_s as f64 * delta(gamma).unwrap();
                assert!((alt - full).abs() < 1e-8, "L_s={l_s} γ={gamma}: {alt} vs {full}");
                assert_eq!(ergodic_rate_homogeneous(&ens).unwrap(), full);
            }
        }
        let one = HomogeneousEnsemble::new(1, 1, 3.0).unwrap();
        assert_eq!(ergodic_rate_homogeneous(&one).unwrap(), delta(3.0).unwrap());
    }

    #[test]
    fn strongest_of_two() {
        let ens = HomogeneousEnsemble::new(2, 1, 1.0).unwrap();
        let closed = ergodic_rate_homogeneous(&ens).unwrap();
        let expanded = 2.0 * delta(1.0).unwrap() - delta(0.5).unwrap();
        assert!((closed - expanded).abs() < 1e-13);
        let oracle = simpson(|t| (1.0 + t).log2() * naive_pdf(1, 2, t), 80.0, 400_000);
        assert!((closed - oracle).abs() < 1e-9, "{closed} vs {oracle}");
    }

    #[test]
    fn backends_agree() {
        for l_s in [12usize, 20] {
            for n_s in [1, l_s / 2, l_s] {
                for gamma in [0.5, 10.0, 1000.0] {
                    let ens = HomogeneousEnsemble::new(l_s, n_s, gamma).unwrap();
                    let a = ergodic_rate_alternating(&ens).unwrap();
                    let q = ergodic_rate_quadrature(&ens).unwrap();
                    assert!(((a - q) / q).abs() < 1e-7, "L_s={l_s} n_s={n_s} γ={gamma}: {a} vs {q}");
                }
            }
        }
        for n_s in [1, 15, 30] {
            let ens = HomogeneousEnsemble::new(30, n_s, 10.0).unwrap();
            let a = ergodic_rate_alternating(&ens).unwrap();
            let q = ergodic_rate_quadrature(&ens).unwrap();
            assert!(((a - q) / q).abs() < 1e-4, "L_s=30 n_s={n_s}: {a} vs {q}");
        }
    }

    #[test]
    fn large_path_counts_use_quadrature() {
        let ens = HomogeneousEnsemble::new(40, 40, 5.0).unwrap();
        let q = ergodic_rate_quadrature(&ens).unwrap();
        assert!((q - 40.0 * delta(5.0).unwrap()).abs() < 1e-8 * q);
        let partial = HomogeneousEnsemble::new(40, 10, 5.0).unwrap();
        let r = ergodic_rate_homogeneous(&partial).unwrap();
        assert!(r.is_finite() && r > 0.0 && r < q);
    }

    #[test]
    fn ordered_rates_sum_to_unordered() {
        let l_s = 12;
        for gamma in [0.3, 5.0, 80.0] {
            let sum: f64 = (1..=l_s).map(|l| stream_rate_alternating(l, l_s, gamma).unwrap()).sum();
            assert!((sum - l_s as f64 * delta(gamma).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn bounds_behave() {
        let ens = HomogeneousEnsemble::new(12, 6, 1.0).unwrap();
        let (lo, hi) = ergodic_rate_bounds(2.0, 2.0, &ens).unwrap();
        assert_eq!(lo, hi);
        let (lo, hi) = ergodic_rate_bounds(0.5, 2.0, &ens).unwrap();
        let (lo2, hi2) = ergodic_rate_bounds(1.0, 4.0, &ens).unwrap();
        assert!(lo < hi && lo2 > lo && hi2 > hi);
        assert!(ergodic_rate_bounds(2.0, 1.0, &ens).is_err());
    }

    #[test]
    fn colocated_values() {
        let (d, c) = colocated_comparison(1, 1, 3, 2.0).unwrap();
        assert_eq!(d, c);
        let (d, c) = colocated_comparison(2, 2, 3, 5.0).unwrap();
        assert!((d - 12.0 * delta(5.0).unwrap()).abs() < 1e-12);
        assert!((c - 3.0 * delta(20.0).unwrap()).abs() < 1e-12);
        let (d, c) = colocated_comparison(2, 2, 3, 100.0).unwrap();
        assert!(d > c);
    }

    #[test]
    fn mux_gain_products() {
        assert_eq!(max_mux_gain(1, 1, 3.0), 3.0);
        assert_eq!(max_mux_gain(2, 2, 3.0), 12.0);
        assert_eq!(max_mux_gain(3, 2, 4.0), 24.0);
    }
}

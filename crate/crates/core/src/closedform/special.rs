//! Exponential integral `E1` and the exponential-mean log-rate function `Δ`.

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Number of series terms used for `y <= 1`. The tail after 30 terms is
/// bounded by `y^31 / (31·31!)`, below 4e-36 on that range.
pub const E1_SERIES_TERMS: usize = 30;

/// Power series `E1(y) = -γ - ln y - Σ_{k>=1} (-y)^k / (k·k!)`.
pub fn e1_series(y: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..=E1_SERIES_TERMS {
        term *= -y / k as f64;
        sum += term / k as f64;
    }
    -EULER_GAMMA - y.ln() - sum
}

/// `e^y·E1(y)` from the continued fraction
/// `1/(y+1- 1/(y+3- 4/(y+5- ...)))`, evaluated with modified Lentz.
pub fn scaled_e1_continued_fraction(y: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = y + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn check_positive(name: &str, y: f64) -> Result<()> {
    if y.is_finite() && y > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and > 0, got {y}")))
    }
}

/// `E1(y) = ∫_1^∞ e^{-yt}/t dt`. Series for `y <= 1`, continued fraction above.
pub fn exp_integral_e1(y: f64) -> Result<f64> {
    check_positive("y", y)?;
    Ok(if y <= 1.0 {
        e1_series(y)
    } else {
        (-y).exp() * scaled_e1_continued_fraction(y)
    })
}

/// `e^y·E1(y)`, finite for all `y > 0` (no overflow for large `y`).
pub fn scaled_e1(y: f64) -> Result<f64> {
    check_positive("y", y)?;
    Ok(if y <= 1.0 {
        y.exp() * e1_series(y)
    } else {
        scaled_e1_continued_fraction(y)
    })
}

/// `Δ(x) = E[log2(1+T)]` for `T` exponential with mean `x`,
/// i.e. `log2(e)·e^{1/x}·E1(1/x)`.
pub fn delta(x: f64) -> Result<f64> {
    check_positive("x", x)?;
    if x < 1e-8 {
        return Ok(x * LOG2_E);
    }
    Ok(LOG2_E * scaled_e1(1.0 / x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Oracle: t = e^s turns the defining integral into ∫_0^∞ exp(-y e^s) ds,
    // which decays double-exponentially; composite Simpson on [0, 8].
    fn e1_quadrature(y: f64) -> f64 {
        let n = 400_000;
        let (a, b) = (0.0, 8.0);
        let h = (b - a) / n as f64;
        let f = |s: f64| (-y * s.exp()).exp();
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn e1_at_one_matches_quadrature() {
        let q = e1_quadrature(1.0);
        let v = exp_integral_e1(1.0).unwrap();
        assert!((v - q).abs() < 1e-12, "{v} vs {q}");
        assert!((v - 0.219_383_934_395_520_3).abs() < 1e-13);
    }

    #[test]
    fn e1_matches_quadrature_across_range() {
        for y in [0.01, 0.1, 0.5, 0.9, 1.1, 2.0, 5.0, 12.0] {
            let q = e1_quadrature(y);
            let v = exp_integral_e1(y).unwrap();
            assert!(((v - q) / q).abs() < 1e-11, "y={y}: {v} vs {q}");
        }
    }

    #[test]
    fn e1_classical_bracket() {
        for y in [10.0f64, 50.0] {
            let v = exp_integral_e1(y).unwrap();
            assert!((-y).exp() / (y + 1.0) < v && v < (-y).exp() / y);
        }
    }

    #[test]
    fn branches_agree_at_seam() {
        let series = e1_series(1.0);
        let cf = (-1.0f64).exp() * scaled_e1_continued_fraction(1.0);
        assert!((series - cf).abs() < 1e-11, "{series} vs {cf}");
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(exp_integral_e1(0.0).is_err());
        assert!(exp_integral_e1(-1.0).is_err());
        assert!(delta(0.0).is_err());
        assert!(delta(f64::NAN).is_err());
    }

    // Oracle: Simpson on ∫ log2(1+t) e^{-t/x}/x dt with t = x·u, u ∈ [0, 60].
    fn delta_quadrature(x: f64) -> f64 {
        let n = 600_000;
        let h = 60.0 / n as f64;
        let f = |u: f64| (1.0 + x * u).log2() * (-u).exp();
        let mut acc = f(0.0) + f(60.0);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn delta_of_one() {
        let d = delta(1.0).unwrap();
        assert!((d - delta_quadrature(1.0)).abs() < 1e-10);
        assert!((d - 0.86035).abs() < 1e-5);
        for x in [0.05, 0.5, 3.0, 40.0] {
            let q = delta_quadrature(x);
            assert!(((delta(x).unwrap() - q) / q).abs() < 1e-9, "x={x}");
        }
        // High SNR: log2(x) - gamma*log2(e) + O(ln x / x).
        let x: f64 = 1e6;
        let asym = x.log2() - EULER_GAMMA * LOG2_E;
        assert!((delta(x).unwrap() - asym).abs() < 1e-4);
    }

    #[test]
    fn delta_monotone_and_small_snr_limit() {
        assert!(delta(2.0).unwrap() > delta(1.0).unwrap());
        let ratio = delta(1e-6).unwrap() / 1e-6;
        assert!((ratio / LOG2_E - 1.0).abs() < 1e-3);
        assert_eq!(delta(1e-9).unwrap(), 1e-9 * LOG2_E);
        // Large means stay finite.
        assert!(delta(1e12).unwrap().is_finite());
        assert!(delta(1e-3).unwrap().is_finite());
    }
}

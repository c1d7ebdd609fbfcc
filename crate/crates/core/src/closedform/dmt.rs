//! Diversity–multiplexing tradeoff curves.
//!
//! Each architecture exposes a set of per-path diversity orders `G_l`; the
//! maximum multiplexing gain at diversity `d` is `Σ_l (1 - d/G_l)^+`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid points may overshoot the admissible range by this much (relative)
/// and are clamped back.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    /// Fully connected RF front end over `l_s` ordered paths.
    FullyConnected { l_s: usize },
    /// One RF chain per subarray, `L` paths per subchannel.
    PartiallyConnected { k_t: usize, k_r: usize, l: usize },
    /// `k_u` users served by `k_b` base-station subarrays, `L` paths each.
    MultiuserDownlink { k_u: usize, k_b: usize, l: usize },
    /// Uplink counterpart; uses the same `K_b·L` path count as the downlink.
    MultiuserUplink { k_u: usize, k_b: usize, l: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::FullyConnected { .. } => "fully_connected",
            Architecture::PartiallyConnected { .. } => "partially_connected",
            Architecture::MultiuserDownlink { .. } => "multiuser_downlink",
            Architecture::MultiuserUplink { .. } => "multiuser_uplink",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Architecture::FullyConnected { l_s } => l_s >= 1,
            Architecture::PartiallyConnected { k_t, k_r, l } => k_t >= 1 && k_r >= 1 && l >= 1,
            Architecture::MultiuserDownlink { k_u, k_b, l }
            | Architecture::MultiuserUplink { k_u, k_b, l } => k_u >= 1 && k_b >= 1 && l >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(self.name(), "all parameters must be >= 1"))
        }
    }

    /// Per-path diversity orders of one user's (or the single link's) paths,
    /// strongest path first.
    pub fn path_diversities(&self) -> Vec<f64> {
        match *self {
            Architecture::FullyConnected { l_s } => ordered_path_diversities(l_s),
            Architecture::PartiallyConnected { k_t, k_r, l } => partial_path_diversities(k_t, k_r, l),
            Architecture::MultiuserDownlink { k_b, l, .. }
            | Architecture::MultiuserUplink { k_b, l, .. } => ordered_path_diversities(k_b * l),
        }
    }

    fn users(&self) -> f64 {
        match *self {
            Architecture::MultiuserDownlink { k_u, .. } | Architecture::MultiuserUplink { k_u, .. } => {
                k_u as f64
            }
            _ => 1.0,
        }
    }

    pub fn max_diversity(&self) -> f64 {
        self.path_diversities().into_iter().fold(0.0, f64::max)
    }

    pub fn max_multiplexing(&self) -> f64 {
        self.users() * self.path_diversities().len() as f64
    }

    /// `G_m(d)`; errors when `d` is outside `[0, max_diversity]`.
    pub fn multiplexing_gain(&self, d: f64) -> Result<f64> {
        self.validate()?;
        let d = clamp_diversity(d, self.max_diversity())?;
        Ok(self.users() * tradeoff_sum(d, &self.path_diversities()))
    }

    /// Diversity values where the curve changes slope, including both ends.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.path_diversities();
        pts.push(0.0);
        if let Architecture::FullyConnected { .. }
        | Architecture::MultiuserDownlink { .. }
        | Architecture::MultiuserUplink { .. } = self
        {
            let max = self.max_diversity() as usize;
            pts.extend((0..=max).map(|d| d as f64));
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

fn ordered_path_diversities(l_s: usize) -> Vec<f64> {
    (1..=l_s).map(|l| (l_s - l + 1) as f64).collect()
}

/// `(K_t-l+1)(K_r-l+1)L` for `l = 1..=min(K_t, K_r)`.
pub fn partial_path_diversities(k_t: usize, k_r: usize, l: usize) -> Vec<f64> {
    (1..=k_t.min(k_r))
        .map(|i| ((k_t - i + 1) * (k_r - i + 1) * l) as f64)
        .collect()
}

fn clamp_diversity(d: f64, max: f64) -> Result<f64> {
    let slack = RANGE_SLACK * max.max(1.0);
    if !d.is_finite() || d < -slack || d > max + slack {
        return Err(Error::invalid(
            "d",
            format!("diversity gain must lie in [0, {max}], got {d}"),
        ));
    }
    Ok(d.clamp(0.0, max))
}

fn tradeoff_sum(d: f64, diversities: &[f64]) -> f64 {
    diversities.iter().map(|g| (1.0 - d / g).max(0.0)).sum()
}

/// `Σ_{l=1}^{L_s} (1 - d/(L_s-l+1))^+`.
pub fn dmt_fully_connected(d: f64, l_s: usize) -> Result<f64> {
    Architecture::FullyConnected { l_s }.multiplexing_gain(d)
}

/// `Σ_{l=1}^{K_m} (1 - d/((K_t-l+1)(K_r-l+1)L))^+`. Accepts `d` up to the
/// largest per-path diversity `K_t K_r L`.
pub fn dmt_partially_connected(d: f64, k_t: usize, k_r: usize, l: usize) -> Result<f64> {
    Architecture::PartiallyConnected { k_t, k_r, l }.multiplexing_gain(d)
}

/// One user's curve over its own `L_s^(i)` paths.
pub fn per_user_dmt(d_i: f64, l_s_i: usize) -> Result<f64> {
    dmt_fully_connected(d_i, l_s_i)
}

/// Aggregate multiuser curve `K_u·Σ_{l=1}^{K_b L} (1 - d/(K_b L - l + 1))^+`.
pub fn dmt_multiuser(d: f64, k_u: usize, k_b: usize, l: usize) -> Result<f64> {
    Architecture::MultiuserDownlink { k_u, k_b, l }.multiplexing_gain(d)
}

/// Largest integer multiplexing gain not exceeding `G_m(d)`.
pub fn integer_multiplexing(g_m: f64) -> f64 {
    (g_m + 1e-12).floor()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DmtCurve {
    pub architecture: Architecture,
    /// `(d, G_m)` pairs in increasing `d`.
    pub points: Vec<(f64, f64)>,
}

impl DmtCurve {
    /// Evaluates on `grid` merged with every breakpoint so the piecewise
    /// linear shape is represented exactly.
    pub fn on_grid(architecture: Architecture, grid: &[f64]) -> Result<Self> {
        architecture.validate()?;
        let max = architecture.max_diversity();
        let mut ds = Vec::with_capacity(grid.len());
        for &d in grid {
            ds.push(clamp_diversity(d, max)?);
        }
        ds.extend(architecture.breakpoints());
        ds.sort_by(f64::total_cmp);
        ds.dedup_by(|a, b| (*a - *b).abs() <= RANGE_SLACK * max.max(1.0));
        let points = ds
            .into_iter()
            .map(|d| architecture.multiplexing_gain(d).map(|g| (d, g)))
            .collect::<Result<_>>()?;
        Ok(DmtCurve { architecture, points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(n: usize) -> f64 {
        (1..=n).map(|k| 1.0 / k as f64).sum()
    }

    #[test]
    fn fully_connected_endpoints() {
        assert_eq!(dmt_fully_connected(0.0, 12).unwrap(), 12.0);
        assert_eq!(dmt_fully_connected(12.0, 12).unwrap(), 0.0);
        assert!((dmt_fully_connected(11.0, 12).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((dmt_fully_connected(1.0, 12).unwrap() - (12.0 - harmonic(12))).abs() < 1e-12);
        assert!((dmt_fully_connected(1.0, 12).unwrap() - 8.8968).abs() < 1e-4);
        assert!(dmt_fully_connected(12.5, 12).is_err());
        assert!(dmt_fully_connected(-0.1, 12).is_err());
    }

    #[test]
    fn integer_points_match_closed_sums() {
        // G_m(L_s - N_s + 1) = Σ_{l<N_s} (N_s - l)/(L_s - l + 1)
        let l_s = 12;
        for n_s in 1..=l_s {
            let expected: f64 = (1..n_s).map(|l| (n_s - l) as f64 / (l_s - l + 1) as f64).sum();
            let d = (l_s - n_s + 1) as f64;
            assert!((dmt_fully_connected(d, l_s).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fully_connected_slopes_by_finite_differences() {
        let l_s = 12;
        for n_s in 1..=l_s {
            let lo = (l_s - n_s) as f64;
            let expected = -(1..=n_s).map(|l| 1.0 / (l_s - l + 1) as f64).sum::<f64>();
            let h = 1e-3;
            for k in 0..9 {
                let d = lo + 0.05 + 0.1 * k as f64;
                let fd = (dmt_fully_connected(d + h, l_s).unwrap() - dmt_fully_connected(d - h, l_s).unwrap())
                    / (2.0 * h);
                assert!((fd - expected).abs() < 1e-10, "n_s={n_s} d={d}: {fd} vs {expected}");
            }
        }
    }

    #[test]
    fn partially_connected_values() {
        assert_eq!(partial_path_diversities(2, 2, 3), vec![12.0, 3.0]);
        assert_eq!(dmt_partially_connected(0.0, 2, 2, 3).unwrap(), 2.0);
        assert!((dmt_partially_connected(3.0, 2, 2, 3).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(dmt_partially_connected(12.0, 2, 2, 3).unwrap(), 0.0);
        for d in [0.0, 0.5, 1.7, 3.0] {
            assert!((dmt_partially_connected(d, 1, 1, 3).unwrap() - (1.0 - d / 3.0f64).max(0.0)).abs() < 1e-15);
        }
        let mut prev = f64::INFINITY;
        for i in 0..=120 {
            let g = dmt_partially_connected(i as f64 * 0.1, 2, 2, 3).unwrap();
            assert!(g <= prev);
            prev = g;
        }
    }

    #[test]
    fn multiuser_values() {
        for d in [0.0, 1.5, 4.0, 6.0] {
            assert_eq!(dmt_multiuser(d, 1, 2, 3).unwrap(), per_user_dmt(d, 6).unwrap());
        }
        assert_eq!(dmt_multiuser(0.0, 3, 2, 4).unwrap(), 24.0);
        assert_eq!(dmt_multiuser(6.0, 2, 2, 3).unwrap(), 0.0);
        assert!(dmt_multiuser(6.5, 2, 2, 3).is_err());
        let up = Architecture::MultiuserUplink { k_u: 2, k_b: 2, l: 3 };
        assert_eq!(up.multiplexing_gain(2.0).unwrap(), dmt_multiuser(2.0, 2, 2, 3).unwrap());
    }

    #[test]
    fn curve_contains_breakpoints() {
        let grid: Vec<f64> = (0..=24).map(|i| i as f64 * 0.5).collect();
        let curve = DmtCurve::on_grid(Architecture::FullyConnected { l_s: 12 }, &grid).unwrap();
        assert!(curve.points.contains(&(0.0, 12.0)));
        assert!(curve.points.contains(&(12.0, 0.0)));
        assert!(curve.points.iter().any(|&(d, g)| d == 11.0 && (g - 1.0 / 12.0).abs() < 1e-15));

        let partial = DmtCurve::on_grid(Architecture::PartiallyConnected { k_t: 2, k_r: 2, l: 3 }, &[1.0]).unwrap();
        let ds: Vec<f64> = partial.points.iter().map(|p| p.0).collect();
        assert_eq!(ds, vec![0.0, 1.0, 3.0, 12.0]);
        assert!(DmtCurve::on_grid(Architecture::FullyConnected { l_s: 3 }, &[4.0]).is_err());
    }

    #[test]
    fn integer_restriction() {
        assert_eq!(integer_multiplexing(8.8968), 8.0);
        assert_eq!(integer_multiplexing(12.0), 12.0);
        assert_eq!(integer_multiplexing(3.0 - 1e-14), 3.0);
        assert_eq!(integer_multiplexing(1.0 / 12.0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arch() -> impl Strategy<Value = Architecture> {
            prop_oneof![
                (1usize..20).prop_map(|l_s| Architecture::FullyConnected { l_s }),
                (1usize..5, 1usize..5, 1usize..5)
                    .prop_map(|(k_t, k_r, l)| Architecture::PartiallyConnected { k_t, k_r, l }),
                (1usize..4, 1usize..4, 1usize..5)
                    .prop_map(|(k_u, k_b, l)| Architecture::MultiuserDownlink { k_u, k_b, l }),
            ]
        }

        proptest! {
            #[test]
            fn curves_are_convex_decreasing_and_anchored(a in arch(), x in 0.0f64..1.0, y in 0.0f64..1.0, w in 0.0f64..1.0) {
                let max = a.max_diversity();
                prop_assert_eq!(a.multiplexing_gain(0.0).unwrap(), a.max_multiplexing());
                prop_assert_eq!(a.multiplexing_gain(max).unwrap(), 0.0);
                let (d1, d2) = (x.min(y) * max, x.max(y) * max);
                let (g1, g2) = (a.multiplexing_gain(d1).unwrap(), a.multiplexing_gain(d2).unwrap());
                prop_assert!(g2 <= g1 + 1e-12);
                prop_assert!(g1 >= 0.0 && g2 >= 0.0);
                let mid = a.multiplexing_gain(w * d1 + (1.0 - w) * d2).unwrap();
                prop_assert!(mid <= w * g1 + (1.0 - w) * g2 + 1e-12);
            }
        }
    }
}

//! Clustered multipath channel for a distributed `(K_t, N_t, K_r, N_r)` array.
//!
//! Every subarray pair `(i, j)` contributes `L_ij` single-ray clusters. Each ray
//! has a circular complex Gaussian gain and i.i.d. uniform angles; the full
//! channel is a sum of `L_s = Σ L_ij` rank-one terms built from block-embedded
//! steering vectors.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::array::{embed_response, ArraySpec, SteeringVector, C64};
use crate::error::{Error, Result};

/// Subarray counts and the (uniform) per-subarray array geometry at each end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemGeometry {
    pub k_t: usize,
    pub k_r: usize,
    pub tx_array: ArraySpec,
    pub rx_array: ArraySpec,
}

impl SystemGeometry {
    /// `K_t = K_r = k` with `n`-element half-wavelength ULAs at both ends.
    pub fn symmetric_ula(k: usize, n: usize) -> Self {
        SystemGeometry {
            k_t: k,
            k_r: k,
            tx_array: ArraySpec::ula(n),
            rx_array: ArraySpec::ula(n),
        }
    }

    pub fn n_t(&self) -> usize {
        self.tx_array.len()
    }

    pub fn n_r(&self) -> usize {
        self.rx_array.len()
    }

    /// Number of columns of `H`, `K_t·N_t`.
    pub fn tx_dim(&self) -> usize {
        self.k_t * self.n_t()
    }

    /// Number of rows of `H`, `K_r·N_r`.
    pub fn rx_dim(&self) -> usize {
        self.k_r * self.n_r()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_t == 0 {
            return Err(Error::invalid("geometry.k_t", "must be >= 1"));
        }
        if self.k_r == 0 {
            return Err(Error::invalid("geometry.k_r", "must be >= 1"));
        }
        self.tx_array.validate("geometry.tx_array")?;
        self.rx_array.validate("geometry.rx_array")
    }
}

/// How many rays each subchannel carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathCountLaw {
    /// `L_ij` given per subarray pair (rows index the receive subarray).
    Fixed(Vec<Vec<usize>>),
    /// `L_ij ~ Poisson(mean)` conditioned on `L_ij >= 1` by resampling zeros.
    Poisson { mean: f64 },
}

/// Large-scale gains `g_ij` and the path-count law, both `K_r × K_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub g: Vec<Vec<f64>>,
    pub path_counts: PathCountLaw,
}

impl LinkConfig {
    /// `g_ij = 1` and `L_ij = l` everywhere.
    pub fn homogeneous(k_r: usize, k_t: usize, l: usize) -> Self {
        LinkConfig {
            g: vec![vec![1.0; k_t]; k_r],
            path_counts: PathCountLaw::Fixed(vec![vec![l; k_t]; k_r]),
        }
    }

    pub fn poisson(k_r: usize, k_t: usize, mean: f64) -> Self {
        LinkConfig {
            g: vec![vec![1.0; k_t]; k_r],
            path_counts: PathCountLaw::Poisson { mean },
        }
    }

    pub fn with_gains(mut self, g: Vec<Vec<f64>>) -> Self {
        self.g = g;
        self
    }

    pub fn validate(&self, geometry: &SystemGeometry) -> Result<()> {
        let shape_ok = |rows: usize, mut cols: std::slice::Iter<'_, usize>| {
            rows == geometry.k_r && cols.all(|&c| c == geometry.k_t)
        };
        let g_cols: Vec<usize> = self.g.iter().map(Vec::len).collect();
        if !shape_ok(self.g.len(), g_cols.iter()) {
            return Err(Error::invalid(
                "link.g",
                format!("expected a {}x{} matrix", geometry.k_r, geometry.k_t),
            ));
        }
        for (i, row) in self.g.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if !(g.is_finite() && g >= 0.0) {
                    return Err(Error::invalid(
                        format!("link.g[{i}][{j}]"),
                        format!("large-scale gain must be finite and >= 0, got {g}"),
                    ));
                }
            }
        }
        match &self.path_counts {
            PathCountLaw::Fixed(l) => {
                let l_cols: Vec<usize> = l.iter().map(Vec::len).collect();
                if !shape_ok(l.len(), l_cols.iter()) {
                    return Err(Error::invalid(
                        "link.path_counts",
                        format!("expected a {}x{} matrix", geometry.k_r, geometry.k_t),
                    ));
                }
                for (i, row) in l.iter().enumerate() {
                    for (j, &n) in row.iter().enumerate() {
                        if n == 0 {
                            return Err(Error::invalid(
                                format!("link.path_counts[{i}][{j}]"),
                                "fixed path counts must be >= 1",
                            ));
                        }
                    }
                }
            }
            PathCountLaw::Poisson { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::invalid(
                        "link.path_counts.poisson.mean",
                        format!("must be finite and > 0, got {mean}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `Some(L)` when every subchannel has exactly `L` rays.
    pub fn uniform_path_count(&self) -> Option<usize> {
        match &self.path_counts {
            PathCountLaw::Fixed(l) => {
                let first = *l.first()?.first()?;
                l.iter().flatten().all(|&x| x == first).then_some(first)
            }
            PathCountLaw::Poisson { .. } => None,
        }
    }

    /// `Some(g)` when every large-scale gain equals `g`.
    pub fn uniform_gain(&self) -> Option<f64> {
        let first = *self.g.first()?.first()?;
        self.g.iter().flatten().all(|&x| x == first).then_some(first)
    }

    /// Nominal ray count of subchannel `(i, j)` (0-based); the Poisson mean
    /// under the random law.
    pub fn nominal_path_count(&self, i: usize, j: usize) -> f64 {
        match &self.path_counts {
            PathCountLaw::Fixed(l) => l[i][j] as f64,
            PathCountLaw::Poisson { mean } => *mean,
        }
    }
}

/// One propagation path. `rx_rau`, `tx_rau` and `ray` are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    pub rx_rau: usize,
    pub tx_rau: usize,
    pub ray: usize,
    /// Position in the original draw order; the final tie-breaker when sorting.
    pub draw_index: usize,
    pub alpha: C64,
    pub alpha_tilde: C64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub psi: f64,
}

impl PathComponent {
    /// `|alpha|²`, the normalized small-scale power of this path.
    pub fn small_scale_power(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// `|alpha_tilde|²`.
    pub fn power(&self) -> f64 {
        self.alpha_tilde.norm_sqr()
    }
}

/// Standard circular complex Gaussian: each component has variance 1/2.
pub fn sample_cn01<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn sample_path_count<R: Rng + ?Sized>(law: &PathCountLaw, i: usize, j: usize, rng: &mut R) -> usize {
    match law {
        PathCountLaw::Fixed(l) => l[i][j],
        PathCountLaw::Poisson { mean } => {
            let poisson = Poisson::new(*mean).expect("validated mean");
            loop {
                let n: f64 = poisson.sample(rng);
                if n >= 1.0 {
                    break n as usize;
                }
            }
        }
    }
}

/// Draws every ray of every subchannel in `(i, j, ray)` order.
///
/// Per subchannel: the path count (Poisson law only), then for each ray the
/// complex gain followed by AoA azimuth/elevation and AoD azimuth/elevation.
/// Azimuths are uniform on `[-π, π)`, elevations on `[-π/2, π/2]`.
pub fn sample_paths<R: Rng + ?Sized>(
    geometry: &SystemGeometry,
    link: &LinkConfig,
    rng: &mut R,
) -> Result<Vec<PathComponent>> {
    geometry.validate()?;
    link.validate(geometry)?;
    let n_prod = (geometry.n_t() * geometry.n_r()) as f64;
    let mut paths = Vec::new();
    for i in 0..geometry.k_r {
        for j in 0..geometry.k_t {
            let l_ij = sample_path_count(&link.path_counts, i, j, rng);
            let scale = (link.g[i][j] * n_prod / l_ij as f64).sqrt();
            for ray in 1..=l_ij {
                let alpha = sample_cn01(rng);
                let aoa_az = rng.random_range(-PI..PI);
                let aoa_el = rng.random_range(-PI / 2.0..=PI / 2.0);
                let aod_az = rng.random_range(-PI..PI);
                let aod_el = rng.random_range(-PI / 2.0..=PI / 2.0);
                let alpha_tilde = alpha * scale;
                paths.push(PathComponent {
                    rx_rau: i + 1,
                    tx_rau: j + 1,
                    ray,
                    draw_index: paths.len(),
                    alpha,
                    alpha_tilde,
                    aoa_az,
                    aoa_el,
                    aod_az,
                    aod_el,
                    psi: alpha_tilde.arg(),
                });
            }
        }
    }
    Ok(paths)
}

/// Orders paths by non-increasing `|alpha_tilde|`; ties fall back to
/// `(rx_rau, tx_rau, draw_index)` ascending.
pub fn sort_paths(mut paths: Vec<PathComponent>) -> Vec<PathComponent> {
    paths.sort_by(|a, b| {
        b.alpha_tilde
            .norm()
            .total_cmp(&a.alpha_tilde.norm())
            .then(a.rx_rau.cmp(&b.rx_rau))
            .then(a.tx_rau.cmp(&b.tx_rau))
            .then(a.draw_index.cmp(&b.draw_index))
    });
    paths
}

/// One channel draw: the ordered paths, their embedded steering vectors and
/// the assembled `K_rN_r × K_tN_t` matrix.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub geometry: SystemGeometry,
    pub link: LinkConfig,
    /// Sorted strongest first.
    pub paths: Vec<PathComponent>,
    /// Embedded receive responses aligned with `paths`.
    pub rx_vectors: Vec<SteeringVector>,
    /// Embedded transmit responses aligned with `paths`.
    pub tx_vectors: Vec<SteeringVector>,
    pub h: DMatrix<C64>,
    /// Realized `L_ij`.
    pub path_counts: Vec<Vec<usize>>,
}

impl ChannelRealization {
    /// Samples and assembles in one step.
    pub fn sample<R: Rng + ?Sized>(
        geometry: &SystemGeometry,
        link: &LinkConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let paths = sample_paths(geometry, link, rng)?;
        assemble_channel(paths, geometry, link)
    }

    /// Total path count `L_s`.
    pub fn l_s(&self) -> usize {
        self.paths.len()
    }

    /// Singular values of `H` in non-increasing order, computed from the
    /// factorization `H = A_r D A_t^H` (thin QR of both response matrices)
    /// rather than from the full matrix.
    pub fn singular_values(&self) -> DVector<f64> {
        let l_s = self.l_s();
        let a_r = DMatrix::from_columns(
            &self.rx_vectors.iter().map(|v| v.entries.clone()).collect::<Vec<_>>(),
        );
        let a_t = DMatrix::from_columns(
            &self.tx_vectors.iter().map(|v| v.entries.clone()).collect::<Vec<_>>(),
        );
        let r_r = a_r.qr().r();
        let r_t = a_t.qr().r();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            l_s,
            self.paths.iter().map(|p| p.alpha_tilde),
        ));
        let core = r_r * d * r_t.adjoint();
        let mut sv: Vec<f64> = core.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        DVector::from_vec(sv)
    }
}

/// Builds `H` as the sum of rank-one terms over all paths, cross-checks it
/// against the block form (each subchannel assembled on its own and scaled by
/// `sqrt(g_ij)`), and returns the paths in sorted order.
pub fn assemble_channel(
    paths: Vec<PathComponent>,
    geometry: &SystemGeometry,
    link: &LinkConfig,
) -> Result<ChannelRealization> {
    if paths.is_empty() {
        return Err(Error::invalid("paths", "at least one path is required"));
    }
    geometry.validate()?;
    link.validate(geometry)?;
    let (k_r, k_t) = (geometry.k_r, geometry.k_t);
    let (n_r, n_t) = (geometry.n_r(), geometry.n_t());

    let mut counts = vec![vec![0usize; k_t]; k_r];
    for p in &paths {
        if p.rx_rau == 0 || p.rx_rau > k_r || p.tx_rau == 0 || p.tx_rau > k_t {
            return Err(Error::DimensionMismatch(format!(
                "path references subarray pair ({}, {}) outside a {}x{} geometry",
                p.rx_rau, p.tx_rau, k_r, k_t
            )));
        }
        counts[p.rx_rau - 1][p.tx_rau - 1] += 1;
    }

    let paths = sort_paths(paths);
    let mut rx_local = Vec::with_capacity(paths.len());
    let mut tx_local = Vec::with_capacity(paths.len());
    for p in &paths {
        rx_local.push(geometry.rx_array.response(p.aoa_az, p.aoa_el)?);
        tx_local.push(geometry.tx_array.response(p.aod_az, p.aod_el)?);
    }

    // Rank-one route.
    let mut h = DMatrix::from_element(geometry.rx_dim(), geometry.tx_dim(), C64::new(0.0, 0.0));
    let mut rx_vectors = Vec::with_capacity(paths.len());
    let mut tx_vectors = Vec::with_capacity(paths.len());
    for ((p, ar), at) in paths.iter().zip(&rx_local).zip(&tx_local) {
        let ar = embed_response(ar, p.rx_rau, k_r)?;
        let at = embed_response(at, p.tx_rau, k_t)?;
        h.gerc(p.alpha_tilde, &ar.entries, &at.entries, C64::new(1.0, 0.0));
        rx_vectors.push(ar);
        tx_vectors.push(at);
    }

    // Block route.
    let n_prod = (n_t * n_r) as f64;
    let mut blocks = DMatrix::from_element(geometry.rx_dim(), geometry.tx_dim(), C64::new(0.0, 0.0));
    for i in 0..k_r {
        for j in 0..k_t {
            if counts[i][j] == 0 {
                continue;
            }
            let mut sub = DMatrix::from_element(n_r, n_t, C64::new(0.0, 0.0));
            for ((p, ar), at) in paths.iter().zip(&rx_local).zip(&tx_local) {
                if p.rx_rau == i + 1 && p.tx_rau == j + 1 {
                    sub.gerc(p.alpha, &ar.entries, &at.entries, C64::new(1.0, 0.0));
                }
            }
            let scale = (link.g[i][j]).sqrt() * (n_prod / counts[i][j] as f64).sqrt();
            blocks
                .view_mut((i * n_r, j * n_t), (n_r, n_t))
                .copy_from(&(sub * C64::new(scale, 0.0)));
        }
    }
    let mismatch = (&h - &blocks).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let magnitude = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if mismatch > 1e-10 * magnitude {
        return Err(Error::AssemblyMismatch(mismatch));
    }

    Ok(ChannelRealization {
        geometry: geometry.clone(),
        link: link.clone(),
        paths,
        rx_vectors,
        tx_vectors,
        h,
        path_counts: counts,
    })
}

/// Writes one CSV record per path:
/// `trial,i,j,l,re_alpha,im_alpha,aoa_az,aoa_el,aod_az,aod_el`.
pub fn write_path_dump<W: Write>(
    out: &mut W,
    trial: u64,
    paths: &[PathComponent],
    header: bool,
) -> std::io::Result<()> {
    if header {
        writeln!(out, "trial,i,j,l,re_alpha,im_alpha,aoa_az,aoa_el,aod_az,aod_el")?;
    }
    let mut ordered: Vec<&PathComponent> = paths.iter().collect();
    ordered.sort_by_key(|p| p.draw_index);
    for p in ordered {
        writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            trial,
            p.rx_rau,
            p.tx_rau,
            p.ray,
            p.alpha.re,
            p.alpha.im,
            p.aoa_az,
            p.aoa_el,
            p.aod_az,
            p.aod_el
        )?;
    }
    Ok(())
}

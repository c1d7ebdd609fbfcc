//! Experiment configuration as read from a TOML (or JSON) file.
//!
//! Every subcommand reads the same file type; each one resolves only the
//! sections it needs and reports a missing or malformed field by its path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beamforming::PowerPolicy;
use crate::channel::{LinkConfig, PathCountLaw, SystemGeometry};
use crate::closedform::Architecture;
use crate::error::{Error, Result};

pub const DEFAULT_TRIALS: u64 = 2000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_RATE_OFFSET_BITS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoder {
    BeamSteering,
    DigitalSvd,
}

/// Streams per realization: a fixed count, or every path (`L_s`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StreamCountRepr", into = "StreamCountRepr")]
pub enum StreamCount {
    Fixed(usize),
    Adaptive,
}

impl StreamCount {
    /// Stream count for a realization with `l_s` paths.
    pub fn resolve(self, l_s: usize) -> usize {
        match self {
            StreamCount::Fixed(n) => n.min(l_s),
            StreamCount::Adaptive => l_s,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StreamCountRepr {
    Fixed(usize),
    Keyword(String),
}

impl TryFrom<StreamCountRepr> for StreamCount {
    type Error = String;

    fn try_from(r: StreamCountRepr) -> std::result::Result<Self, String> {
        match r {
            StreamCountRepr::Fixed(0) => Err("n_s must be >= 1".into()),
            StreamCountRepr::Fixed(n) => Ok(StreamCount::Fixed(n)),
            StreamCountRepr::Keyword(k) if k == "adaptive" => Ok(StreamCount::Adaptive),
            StreamCountRepr::Keyword(k) => {
                Err(format!("n_s must be a positive integer or \"adaptive\", got {k:?}"))
            }
        }
    }
}

impl From<StreamCount> for StreamCountRepr {
    fn from(s: StreamCount) -> Self {
        match s {
            StreamCount::Fixed(n) => StreamCountRepr::Fixed(n),
            StreamCount::Adaptive => StreamCountRepr::Keyword("adaptive".into()),
        }
    }
}

/// SNR grid in dB: an explicit list or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrGrid {
    List(Vec<f64>),
    Range(SnrRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrRange {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            SnrGrid::List(v) => v.clone(),
            SnrGrid::Range(r) => arithmetic_range(r.start_db, r.stop_db, r.step_db, "snr_grid_db")?,
        };
        check_grid(&v, "snr_grid_db")?;
        Ok(v)
    }
}

/// Diversity-gain grid for the DMT table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DGrid {
    List(Vec<f64>),
    Range(DRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            DGrid::List(v) => v.clone(),
            DGrid::Range(r) => arithmetic_range(r.start, r.stop, r.step, "dmt.d_grid")?,
        };
        check_grid(&v, "dmt.d_grid")?;
        Ok(v)
    }
}

/// `start, start + step, …` up to `stop` inclusive (within rounding).
fn arithmetic_range(start: f64, stop: f64, step: f64, field: &str) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0) {
        return Err(Error::config(field, "range needs finite start/stop and step > 0"));
    }
    if stop < start {
        return Err(Error::config(field, "range stop is below start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| start + k as f64 * step).collect())
}

fn check_grid(v: &[f64], field: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(field, "grid must be nonempty"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(field, "grid values must be finite"));
    }
    if v.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config(field, "grid must be sorted ascending"));
    }
    Ok(())
}

/// `g` as one value for every subarray pair or as a `K_r × K_t` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathCountSpec {
    Uniform(usize),
    Matrix(Vec<Vec<usize>>),
    Poisson(PoissonSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSpec {
    pub poisson_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "unit_gain")]
    pub g: GainSpec,
    pub path_counts: PathCountSpec,
}

fn unit_gain() -> GainSpec {
    GainSpec::Uniform(1.0)
}

impl LinkSection {
    pub fn resolve(&self, geometry: &SystemGeometry) -> Result<LinkConfig> {
        let (k_r, k_t) = (geometry.k_r, geometry.k_t);
        let g = match &self.g {
            GainSpec::Uniform(g) => vec![vec![*g; k_t]; k_r],
            GainSpec::Matrix(m) => m.clone(),
        };
        let path_counts = match &self.path_counts {
            PathCountSpec::Uniform(l) => PathCountLaw::Fixed(vec![vec![*l; k_t]; k_r]),
            PathCountSpec::Matrix(m) => PathCountLaw::Fixed(m.clone()),
            PathCountSpec::Poisson(p) => PathCountLaw::Poisson { mean: p.poisson_mean },
        };
        let link = LinkConfig { g, path_counts };
        link.validate(geometry)?;
        Ok(link)
    }
}

/// Antenna-count sweep: each value replaces `n_h` of both arrays in turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub antennas: Vec<usize>,
}

/// One closed-form multiplexing-gain curve with `K_t = K_r = k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuxCurve {
    pub k: usize,
    pub l: usize,
    pub n_s: usize,
}

impl MuxCurve {
    pub fn l_s(&self) -> usize {
        self.k * self.k * self.l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuxSection {
    pub curves: Vec<MuxCurve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutageSection {
    /// 1-based rank of the path whose outage is tracked.
    pub stream_index: usize,
    pub rate_exponent: f64,
    /// Target rate is `rate_offset_bits + r·log2(γ̄)`; with zero offset and
    /// `r = 0` the target is 0 bits and nothing is ever in outage.
    #[serde(default = "default_offset")]
    pub rate_offset_bits: f64,
    /// Sample ordered exponential gains directly instead of full channels.
    #[serde(default = "yes")]
    pub fast_path: bool,
}

fn default_offset() -> f64 {
    DEFAULT_RATE_OFFSET_BITS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiuserSection {
    pub k_u: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmtSection {
    pub architecture: Architecture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_grid: Option<DGrid>,
}

impl DmtSection {
    /// The configured grid, or quarter steps over `[0, max diversity]`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        self.architecture.validate()?;
        match &self.d_grid {
            Some(g) => g.values(),
            None => {
                let top = self.architecture.max_diversity();
                arithmetic_range(0.0, top, 0.25, "dmt.d_grid")
            }
        }
    }
}

/// The on-disk config. All sections are optional here; each subcommand
/// asks for the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<SystemGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<StreamCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<SnrGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_policy: Option<PowerPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precoder: Option<Precoder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mux: Option<MuxSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outage: Option<OutageSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiuser: Option<MultiuserSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmt: Option<DmtSection>,
}

impl ConfigFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("<config>", e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config("<config>", e.to_string()))
    }

    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        };
        parsed.map_err(|e| match e {
            Error::Config { reason, .. } => Error::config(path.display().to_string(), reason),
            other => other,
        })
    }

    fn require<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| Error::config(field, "missing required field"))
    }

    pub fn trials(&self) -> Result<u64> {
        let t = self.trials.unwrap_or(DEFAULT_TRIALS);
        if t == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        Ok(t)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn snr_grid(&self) -> Result<Vec<f64>> {
        Self::require(&self.snr_grid_db, "snr_grid_db")?.values()
    }

    /// The single-link experiment described by the top-level fields.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let geometry = Self::require(&self.geometry, "geometry")?.clone();
        geometry.validate()?;
        let link = Self::require(&self.link, "link")?.resolve(&geometry)?;
        let cfg = ExperimentConfig {
            geometry,
            link,
            n_s: self.n_s.unwrap_or(StreamCount::Adaptive),
            snr_grid_db: self.snr_grid()?,
            trials: self.trials()?,
            seed: self.seed(),
            power_policy: self.power_policy.unwrap_or(PowerPolicy::EqualPower),
            precoder: self.precoder.unwrap_or(Precoder::BeamSteering),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// One experiment per swept antenna count, or just the base experiment.
    pub fn sweep_experiments(&self) -> Result<Vec<(Option<usize>, ExperimentConfig)>> {
        let base = self.experiment()?;
        match &self.sweep {
            None => Ok(vec![(None, base)]),
            Some(s) if s.antennas.is_empty() => {
                Err(Error::config("sweep.antennas", "must be nonempty"))
            }
            Some(s) => s
                .antennas
                .iter()
                .map(|&n| {
                    let cfg = base.clone().with_antennas(n);
                    cfg.validate()
                        .map_err(|e| Error::config("sweep.antennas", e.to_string()))?;
                    Ok((Some(n), cfg))
                })
                .collect(),
        }
    }

    pub fn outage_section(&self) -> Result<&OutageSection> {
        Self::require(&self.outage, "outage")
    }

    pub fn multiuser_section(&self) -> Result<&MultiuserSection> {
        Self::require(&self.multiuser, "multiuser")
    }

    pub fn dmt_section(&self) -> Result<&DmtSection> {
        Self::require(&self.dmt, "dmt")
    }

    /// Curves for the multiplexing-gain table: the `[mux]` list, or the one
    /// curve implied by a homogeneous symmetric top-level setup.
    pub fn mux_curves(&self) -> Result<Vec<MuxCurve>> {
        let curves = match &self.mux {
            Some(m) => m.curves.clone(),
            None => {
                let cfg = self.experiment()?;
                let l = cfg.link.uniform_path_count().ok_or_else(|| {
                    Error::config("link.path_counts", "mux-gain needs a fixed uniform path count")
                })?;
                if cfg.geometry.k_t != cfg.geometry.k_r {
                    return Err(Error::config("geometry", "mux-gain needs k_t == k_r"));
                }
                let k = cfg.geometry.k_t;
                vec![MuxCurve { k, l, n_s: cfg.n_s.resolve(k * k * l) }]
            }
        };
        if curves.is_empty() {
            return Err(Error::config("mux.curves", "must be nonempty"));
        }
        for (i, c) in curves.iter().enumerate() {
            if c.k == 0 || c.l == 0 || c.n_s == 0 || c.n_s > c.l_s() {
                return Err(Error::config(
                    format!("mux.curves[{i}]"),
                    format!("need k, l >= 1 and 1 <= n_s <= k*k*l = {}", c.l_s()),
                ));
            }
        }
        Ok(curves)
    }

    /// Copy with every defaulted top-level field written out, as echoed into
    /// the metadata sidecar.
    pub fn resolved(&self) -> ConfigFile {
        let mut c = self.clone();
        c.seed = Some(self.seed());
        if self.geometry.is_some() || self.snr_grid_db.is_some() || self.trials.is_some() {
            c.trials = Some(self.trials.unwrap_or(DEFAULT_TRIALS));
        }
        if self.geometry.is_some() {
            c.n_s.get_or_insert(StreamCount::Adaptive);
            c.power_policy.get_or_insert(PowerPolicy::EqualPower);
            c.precoder.get_or_insert(Precoder::BeamSteering);
        }
        c
    }
}

/// A fully resolved single-link experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: SystemGeometry,
    pub link: LinkConfig,
    pub n_s: StreamCount,
    pub snr_grid_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub power_policy: PowerPolicy,
    pub precoder: Precoder,
}

impl ExperimentConfig {
    /// Homogeneous setup with `K_t = K_r = k`, `n`-element ULAs and `l` rays
    /// per subchannel.
    pub fn homogeneous(k: usize, n: usize, l: usize, n_s: usize, snr_grid_db: Vec<f64>) -> Self {
        ExperimentConfig {
            geometry: SystemGeometry::symmetric_ula(k, n),
            link: LinkConfig::homogeneous(k, k, l),
            n_s: StreamCount::Fixed(n_s),
            snr_grid_db,
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            power_policy: PowerPolicy::EqualPower,
            precoder: Precoder::BeamSteering,
        }
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_antennas(mut self, n: usize) -> Self {
        self.geometry.tx_array.n_h = n;
        self.geometry.rx_array.n_h = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.link.validate(&self.geometry)?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        check_grid(&self.snr_grid_db, "snr_grid_db")?;
        if let (StreamCount::Fixed(n), Some(l)) = (self.n_s, self.fixed_l_s()) {
            if n > l {
                return Err(Error::config("n_s", format!("{n} streams exceed L_s = {l}")));
            }
        }
        Ok(())
    }

    /// `L_s` when the path counts are deterministic.
    pub fn fixed_l_s(&self) -> Option<usize> {
        match &self.link.path_counts {
            PathCountLaw::Fixed(l) => Some(l.iter().flatten().sum()),
            PathCountLaw::Poisson { .. } => None,
        }
    }

    /// Nominal `L_s`: the fixed total, or the sum of Poisson means.
    pub fn nominal_l_s(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.geometry.k_r {
            for j in 0..self.geometry.k_t {
                s += self.link.nominal_path_count(i, j);
            }
        }
        s
    }

    /// `mean_ij(g_ij·N_t·N_r / L_ij)` with nominal path counts; the factor
    /// turning a per-stream power into the per-stream SNR coefficient.
    pub fn snr_coefficient(&self) -> f64 {
        let n_prod = (self.geometry.n_t() * self.geometry.n_r()) as f64;
        let (k_r, k_t) = (self.geometry.k_r, self.geometry.k_t);
        let mut s = 0.0;
        for i in 0..k_r {
            for j in 0..k_t {
                s += self.link.g[i][j] * n_prod / self.link.nominal_path_count(i, j);
            }
        }
        s / (k_r * k_t) as f64
    }

    /// Per-stream power that puts the SNR coefficient at `gamma_tilde`.
    pub fn per_stream_power(&self, gamma_tilde: f64) -> f64 {
        gamma_tilde / self.snr_coefficient()
    }

    /// `(g, L)` when the link is homogeneous with a fixed path count.
    pub fn homogeneous_link(&self) -> Option<(f64, usize)> {
        Some((self.link.uniform_gain()?, self.link.uniform_path_count()?))
    }
}

//! Seeded experiment harness: rate curves, multiplexing-gain convergence,
//! outage slopes and the multiuser downlink.
//!
//! Trial `t` always draws from substream `t` of the master seed, and results
//! are reduced in trial order, so a table depends only on the config and seed,
//! never on the thread count.

pub mod config;
pub mod multiuser;
pub mod mux;
pub mod outage;
pub mod rate;
pub mod table;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use config::{
    ConfigFile, DmtSection, ExperimentConfig, MultiuserSection, MuxCurve, MuxSection,
    OutageSection, Precoder, SnrGrid, StreamCount, Sweep,
};
pub use multiuser::multiuser_rate_experiment;
pub use mux::run_mux_convergence;
pub use outage::{estimate_outage, OutageFit};
pub use rate::run_rate_experiment;
pub use table::{Column, ResultTable};

/// Runs `f(0..trials)` and returns the outputs in trial order.
///
/// `threads == 1` stays on the calling thread; `0` uses rayon's default pool
/// size.
pub fn run_trials<T, F>(trials: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    if threads == 1 {
        return (0..trials).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// Sample mean and standard error (`std / sqrt(n)`, with the `n - 1` sample
/// variance), accumulated in slice order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `dmimo <version> cfg:<hash>` where the hash is FNV-1a over `repr`.
pub fn provenance(repr: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in repr.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("dmimo {} cfg:{h:016x}", env!("CARGO_PKG_VERSION"))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

//! Analytical results: special functions, order-statistic rates,
//! multiplexing-gain limits and diversity–multiplexing tradeoff curves.

pub mod dmt;
pub mod quad;
pub mod rate;
pub mod special;

pub use dmt::{
    dmt_fully_connected, dmt_multiuser, dmt_partially_connected, integer_multiplexing,
    partial_path_diversities, per_user_dmt, Architecture, DmtCurve,
};
pub use rate::{
    colocated_comparison, ergodic_rate_alternating, ergodic_rate_bounds, ergodic_rate_homogeneous,
    ergodic_rate_quadrature, max_mux_gain, ordered_snr_pdf, stream_rate_alternating,
    stream_rate_quadrature, HomogeneousEnsemble,
};
pub use special::{delta, exp_integral_e1, scaled_e1};

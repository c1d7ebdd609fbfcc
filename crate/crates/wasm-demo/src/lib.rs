//! Browser bindings for three closed-form views: the DMT curve, ergodic
//! rate against SNR, and a ULA beam pattern. Results come back as flat
//! `Float64Array`s with a fixed stride so the page can plot them directly.

use wasm_bindgen::prelude::*;

use dmimo::array::{coherence, ula_response, ArraySpec};
use dmimo::closedform::dmt::{Architecture, DmtCurve};
use dmimo::closedform::integer_multiplexing;
use dmimo::closedform::rate::{colocated_comparison, ergodic_rate_homogeneous, HomogeneousEnsemble};

fn js(e: dmimo::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[d, g_m, g_m_integer]` triples for a fully connected link with `l_s`
/// paths, sampled every `step` and at every breakpoint.
#[wasm_bindgen]
pub fn dmt_curve(l_s: usize, step: f64) -> Result<Vec<f64>, JsError> {
    if !(step > 0.0) {
        return Err(JsError::new("step must be > 0"));
    }
    let arch = Architecture::FullyConnected { l_s };
    arch.validate().map_err(js)?;
    let top = arch.max_diversity();
    let n = (top / step).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    let curve = DmtCurve::on_grid(arch, &grid).map_err(js)?;
    Ok(curve
        .points
        .iter()
        .flat_map(|&(d, g)| [d, g, integer_multiplexing(g)])
        .collect())
}

/// `[snr_db, rate_n_s, distributed_all_paths, colocated]` rows for
/// `K_t = K_r = k` subarrays and `l` paths per subchannel.
#[wasm_bindgen]
pub fn rate_curves(k: usize, l: usize, n_s: usize, snr_min_db: f64, snr_max_db: f64, points: usize) -> Result<Vec<f64>, JsError> {
    if points < 2 || !(snr_max_db > snr_min_db) {
        return Err(JsError::new("need at least two points and max > min"));
    }
    let l_s = k * k * l;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let db = snr_min_db + (snr_max_db - snr_min_db) * i as f64 / (points - 1) as f64;
        let g = 10f64.powf(db / 10.0);
        let rate = ergodic_rate_homogeneous(&HomogeneousEnsemble::new(l_s, n_s, g).map_err(js)?).map_err(js)?;
        let (dist, colo) = colocated_comparison(k, k, l, g).map_err(js)?;
        out.extend([db, rate, dist, colo]);
    }
    Ok(out)
}

/// `[azimuth_deg, |a(steer)^H a(az)|]` over `points` azimuths in
/// `[-90°, 90°]` for an `n`-element half-wavelength ULA.
#[wasm_bindgen]
pub fn beam_pattern(n: usize, steer_deg: f64, points: usize) -> Result<Vec<f64>, JsError> {
    if points < 2 {
        return Err(JsError::new("need at least two points"));
    }
    let spec = ArraySpec::ula(n);
    let steer = ula_response(&spec, steer_deg.to_radians()).map_err(js)?;
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let deg = -90.0 + 180.0 * i as f64 / (points - 1) as f64;
        let v = ula_response(&spec, deg.to_radians()).map_err(js)?;
        out.extend([deg, coherence(&steer, &v).map_err(js)?]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dmt_rows_span_the_curve() {
        let v = dmt_curve(12, 0.5).unwrap();
        assert_eq!(v.len() % 3, 0);
        assert_eq!(&v[..3], &[0.0, 12.0, 12.0]);
        assert_eq!(v[v.len() - 2], 0.0);
    }

    #[test]
    fn rate_rows_grow_with_snr() {
        let v = rate_curves(2, 3, 6, 0.0, 30.0, 7).unwrap();
        let rates: Vec<f64> = v.chunks(4).map(|r| r[1]).collect();
        assert!(rates.windows(2).all(|w| w[1] > w[0]));
        // All-path rate dominates the six-stream rate.
        assert!(v.chunks(4).all(|r| r[2] >= r[1]));
    }

    #[test]
    fn beam_peaks_at_the_steering_angle() {
        let v = beam_pattern(32, 30.0, 181).unwrap();
        let peak = v.chunks(2).max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
        assert!((peak[0] - 30.0).abs() <= 1.0 && (peak[1] - 1.0).abs() < 1e-3);
    }
}

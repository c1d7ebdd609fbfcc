//! Array response vectors for uniform linear and planar arrays, their
//! block-embedded counterparts in a distributed array, and coherence.

use std::f64::consts::PI;

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Default inter-element spacing in carrier wavelengths.
pub const HALF_WAVELENGTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayKind {
    Ula,
    Upa,
}

/// Geometry of one subarray. For a ULA `n_v` is 1 and `n_h` is the element count.
/// Spacings are stored as fractions of the carrier wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub kind: ArrayKind,
    pub n_h: usize,
    #[serde(default = "one")]
    pub n_v: usize,
    #[serde(default = "half")]
    pub d_h: f64,
    #[serde(default = "half")]
    pub d_v: f64,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    HALF_WAVELENGTH
}

impl ArraySpec {
    pub fn ula(n: usize) -> Self {
        ArraySpec {
            kind: ArrayKind::Ula,
            n_h: n,
            n_v: 1,
            d_h: HALF_WAVELENGTH,
            d_v: HALF_WAVELENGTH,
        }
    }

    pub fn upa(n_h: usize, n_v: usize) -> Self {
        ArraySpec {
            kind: ArrayKind::Upa,
            n_h,
            n_v,
            d_h: HALF_WAVELENGTH,
            d_v: HALF_WAVELENGTH,
        }
    }

    pub fn with_spacing(mut self, d_h: f64, d_v: f64) -> Self {
        self.d_h = d_h;
        self.d_v = d_v;
        self
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        match self.kind {
            ArrayKind::Ula => self.n_h,
            ArrayKind::Upa => self.n_h * self.n_v,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.n_h == 0 || self.n_v == 0 {
            return Err(Error::invalid(
                format!("{field}.n_h/n_v"),
                "element counts must be >= 1",
            ));
        }
        if self.kind == ArrayKind::Ula && self.n_v != 1 {
            return Err(Error::invalid(format!("{field}.n_v"), "a ULA has n_v = 1"));
        }
        for (name, d) in [("d_h", self.d_h), ("d_v", self.d_v)] {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid(
                    format!("{field}.{name}"),
                    format!("spacing must be finite and > 0, got {d}"),
                ));
            }
        }
        Ok(())
    }

    /// Response at the given angles. The elevation is ignored for a ULA.
    pub fn response(&self, azimuth: f64, elevation: f64) -> Result<SteeringVector> {
        match self.kind {
            ArrayKind::Ula => ula_response(self, azimuth),
            ArrayKind::Upa => upa_response(self, azimuth, elevation),
        }
    }
}

/// A unit-norm array response, optionally embedded into the index window of
/// one subarray (1-based `rau_index`) of a larger distributed array.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: DVector<C64>,
    pub rau_index: Option<usize>,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }
}

fn phase_ramp(n: usize, spacing: f64, angle: f64) -> impl Iterator<Item = C64> {
    let step = 2.0 * PI * spacing * angle.sin();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n).map(move |k| C64::from_polar(scale, step * k as f64))
}

fn check_angle(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("angle must be finite, got {value}")))
    }
}

/// `N`-element ULA response: entry `k` is `exp(j 2π k d sin(az)) / sqrt(N)`.
pub fn ula_response(spec: &ArraySpec, azimuth: f64) -> Result<SteeringVector> {
    if spec.kind != ArrayKind::Ula {
        return Err(Error::invalid("spec.kind", "expected a ULA"));
    }
    spec.validate("spec")?;
    check_angle("azimuth", azimuth)?;
    Ok(SteeringVector {
        entries: DVector::from_iterator(spec.n_h, phase_ramp(spec.n_h, spec.d_h, azimuth)),
        rau_index: None,
    })
}

/// UPA response: Kronecker product of the horizontal ramp at `azimuth` and
/// the vertical ramp at `elevation`.
pub fn upa_response(spec: &ArraySpec, azimuth: f64, elevation: f64) -> Result<SteeringVector> {
    if spec.kind != ArrayKind::Upa {
        return Err(Error::invalid("spec.kind", "expected a UPA"));
    }
    spec.validate("spec")?;
    check_angle("azimuth", azimuth)?;
    check_angle("elevation", elevation)?;
    let h: Vec<C64> = phase_ramp(spec.n_h, spec.d_h, azimuth).collect();
    let v: Vec<C64> = phase_ramp(spec.n_v, spec.d_v, elevation).collect();
    let entries = h.iter().flat_map(|&a| v.iter().map(move |&b| a * b));
    Ok(SteeringVector {
        entries: DVector::from_iterator(spec.n_h * spec.n_v, entries),
        rau_index: None,
    })
}

/// Places `local` into the window `((rau_index-1)·n, rau_index·n]` of a
/// vector of length `num_raus·n`; every other entry is exactly zero.
pub fn embed_response(
    local: &SteeringVector,
    rau_index: usize,
    num_raus: usize,
) -> Result<SteeringVector> {
    if rau_index == 0 || rau_index > num_raus {
        return Err(Error::IndexOutOfRange {
            index: rau_index,
            max: num_raus,
        });
    }
    let n = local.len();
    let mut entries = DVector::from_element(n * num_raus, C64::new(0.0, 0.0));
    entries.rows_mut((rau_index - 1) * n, n).copy_from(&local.entries);
    Ok(SteeringVector {
        entries,
        rau_index: Some(rau_index),
    })
}

/// `|<v1, v2>|`.
pub fn coherence(v1: &SteeringVector, v2: &SteeringVector) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::DimensionMismatch(format!(
            "coherence of vectors with lengths {} and {}",
            v1.len(),
            v2.len()
        )));
    }
    Ok(v1.entries.dotc(&v2.entries).norm())
}

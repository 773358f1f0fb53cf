//! Half-wavelength uniform linear array: steering vectors and beam correlation.
//!
//! Angles are measured from broadside (0° = boresight) and kept in degrees at
//! the API boundary.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, CVec};
use crate::{Error, Result};

/// Angle in degrees, guaranteed to lie in [-90°, 90°].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub const ZERO: AngleDeg = AngleDeg(0.0);

    pub fn new(degrees: f64) -> Result<Self> {
        if degrees.is_finite() && (-90.0..=90.0).contains(&degrees) {
            Ok(AngleDeg(degrees))
        } else {
            Err(Error::AngleOutOfRange(degrees))
        }
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    pub fn sin(self) -> f64 {
        self.radians().sin()
    }

    /// Reflection θ → −θ.
    pub fn mirrored(self) -> Self {
        AngleDeg(-self.0)
    }
}

impl TryFrom<f64> for AngleDeg {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        AngleDeg::new(v)
    }
}

impl From<AngleDeg> for f64 {
    fn from(a: AngleDeg) -> f64 {
        a.0
    }
}

impl fmt::Display for AngleDeg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}°", self.0)
    }
}

/// Unit-norm array response `a(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(CVec);

impl SteeringVector {
    pub fn as_vector(&self) -> &CVec {
        &self.0
    }

    pub fn into_vector(self) -> CVec {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_antennas(n_antennas: usize) -> Result<()> {
    if n_antennas == 0 {
        return Err(Error::Domain("array needs at least one antenna".into()));
    }
    Ok(())
}

/// `a(θ)_n = exp(j n π sin θ) / √N_a`.
pub fn steering(theta: AngleDeg, n_antennas: usize) -> Result<SteeringVector> {
    check_antennas(n_antennas)?;
    Ok(SteeringVector(steering_unchecked(theta.sin(), n_antennas)))
}

pub(crate) fn steering_unchecked(sin_theta: f64, n: usize) -> CVec {
    let scale = 1.0 / (n as f64).sqrt();
    CVec::from_fn(n, |i, _| Complex64::from_polar(scale, i as f64 * PI * sin_theta))
}

/// Columns `a(θ_k)` for a list of angles.
pub fn steering_matrix(angles: &[AngleDeg], n_antennas: usize) -> Result<CMat> {
    check_antennas(n_antennas)?;
    let mut m = CMat::zeros(n_antennas, angles.len());
    for (k, a) in angles.iter().enumerate() {
        m.set_column(k, &steering_unchecked(a.sin(), n_antennas));
    }
    Ok(m)
}

/// `|a(θ_a)^H a(θ_b)|²`, evaluated through the Dirichlet kernel.
pub fn beam_correlation(theta_a: AngleDeg, theta_b: AngleDeg, n_antennas: usize) -> Result<f64> {
    check_antennas(n_antennas)?;
    Ok(dirichlet_power((theta_a.sin() - theta_b.sin()).abs(), n_antennas))
}

/// `|Σ_n exp(j n π Δ)|² / N²` for `Δ = sin θ_a − sin θ_b`.
pub(crate) fn dirichlet_power(delta_sin: f64, n: usize) -> f64 {
    let x = PI * delta_sin.abs();
    let den = (x / 2.0).sin();
    if den.abs() < 1e-12 {
        // Δ at a multiple of 2: numerator also vanishes, limit is 1.
        return 1.0;
    }
    let r = (n as f64 * x / 2.0).sin() / (n as f64 * den);
    (r * r).min(1.0)
}

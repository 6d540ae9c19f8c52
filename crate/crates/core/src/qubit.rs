//! Closed forms for a two-level system `H = b_z σ_z` in Bloch representation.
//!
//! With `ρ = (𝟙 + R·σ)/2` the energy is `b_z R_z`; a projective measurement
//! along unit axis `n` maps `R` to `(R·n) n`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BALL_TOL: f64 = 1e-9;
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector {
    x: f64,
    y: f64,
    z: f64,
}

impl BlochVector {
    /// A vector in the closed unit ball (within `1e-9`).
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidBloch("non-finite component".into()));
        }
        let v = Self { x, y, z };
        if v.norm_sqr() > 1.0 + BALL_TOL {
            return Err(Error::InvalidBloch(format!("norm {} exceeds 1", v.norm())));
        }
        Ok(v)
    }

    /// A unit vector from its polar and azimuthal angles.
    pub fn from_angles(polar: f64, azimuth: f64) -> Self {
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Self { x: sp * ca, y: sp * sa, z: cp }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn norm_sqr(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Polar angle from the `+z` axis; `0` for the zero vector.
    pub fn polar_angle(&self) -> f64 {
        let norm = self.norm();
        if norm == 0.0 {
            0.0
        } else {
            (self.z / norm).clamp(-1.0, 1.0).acos()
        }
    }

    fn scaled(&self, s: f64) -> Self {
        Self { x: self.x * s, y: self.y * s, z: self.z * s }
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        [v.x, v.y, v.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSystem {
    bz: f64,
    r: BlochVector,
}

impl QubitSystem {
    pub fn new(bz: f64, r: BlochVector) -> Result<Self> {
        if !(bz > 0.0 && bz.is_finite()) {
            return Err(Error::InvalidParameter(format!("b_z = {bz} must be positive")));
        }
        Ok(Self { bz, r })
    }

    pub fn bz(&self) -> f64 {
        self.bz
    }

    pub fn r(&self) -> BlochVector {
        self.r
    }

    /// `Tr(Hρ) = b_z R_z`.
    pub fn energy(&self) -> f64 {
        self.bz * self.r.z
    }

    /// Energy drop `b_z (R_z − R′_z)` of a measurement along `n`.
    pub fn measurement_drop(&self, n: &BlochVector) -> Result<f64> {
        let after = project_bloch(&self.r, n)?;
        Ok(self.bz * (self.r.z - after.z))
    }
}

/// `(r·n) n` for a unit axis `n`.
pub fn project_bloch(r: &BlochVector, n: &BlochVector) -> Result<BlochVector> {
    if (n.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidBloch(format!("measurement axis has norm {}, not 1", n.norm())));
    }
    Ok(n.scaled(r.dot(n)))
}

/// `W = b_z (|R| + R_z) = b_z |R| (1 + cos θ)`.
pub fn qubit_ergotropy(q: &QubitSystem) -> f64 {
    (q.bz * (q.r.norm() + q.r.z)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitMetrotropy {
    pub value: f64,
    /// Optimal measurement axis.
    pub direction: BlochVector,
}

/// `M = W/2`, reached by measuring along polar angle `π/2 + θ/2` in the
/// plane of `R` and the z axis.
///
/// When `R` lies on the z axis the azimuth is fixed to zero; for `R = 0`
/// the axis is `(1, 0, 0)`.
pub fn qubit_metrotropy(q: &QubitSystem) -> QubitMetrotropy {
    let value = qubit_ergotropy(q) / 2.0;
    let r = q.r;
    if r.norm() == 0.0 {
        return QubitMetrotropy { value, direction: BlochVector::from_angles(FRAC_PI_2, 0.0) };
    }
    let azimuth = if r.x == 0.0 && r.y == 0.0 { 0.0 } else { r.y.atan2(r.x) };
    QubitMetrotropy { value, direction: BlochVector::from_angles(FRAC_PI_2 + r.polar_angle() / 2.0, azimuth) }
}

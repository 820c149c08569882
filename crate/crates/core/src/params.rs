//! Problem parameters shared by every module.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex dimension, damping coefficient and time horizon of the flow
/// `u_t = log det(u_{ab}) - A u + f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    n: u32,
    damping: f64,
    horizon: f64,
}

impl FlowParams {
    pub fn new(n: u32, damping: f64, horizon: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("n", "complex dimension must be at least 1"));
        }
        if !(damping >= 0.0) || !damping.is_finite() {
            return Err(Error::invalid(
                "A",
                format!("damping must be finite and >= 0, got {damping}"),
            ));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(
                "T",
                format!("horizon must be finite and > 0, got {horizon}"),
            ));
        }
        Ok(FlowParams { n, damping, horizon })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// `n` as a float, for formulas.
    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// A logarithmic pole `mass * log|z - center|` of the initial datum.
///
/// The center is a point of the complex plane. Radial runs in dimension
/// `n >= 2` only accept the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LelongAtom {
    center: Complex64,
    mass: f64,
}

impl LelongAtom {
    pub fn new(center: Complex64, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid("mass", format!("Lelong mass must be > 0, got {mass}")));
        }
        if !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::invalid("center", "atom center must be finite"));
        }
        Ok(LelongAtom { center, mass })
    }

    pub fn at_origin(mass: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, 0.0), mass)
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// True when the center lies strictly inside the disc of radius `radius`.
    pub fn is_inside_ball(&self, radius: f64) -> bool {
        self.center.norm() < radius
    }
}

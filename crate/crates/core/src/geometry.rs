//! Device geometry: the circular arcs bounding the cloaked region and the
//! disks containing the sources.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{normalize_angle, PlaneVector};

/// Relative slack accepted when checking `a >= b sin(pi/M)`.
const TANGENCY_SLACK: f64 = 1e-12;

/// Arc `{x_m + a_m e(theta) : theta1 <= theta <= theta2}` of the cloak
/// boundary belonging to source `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceArc {
    pub center: PlaneVector,
    pub radius: f64,
    /// Start angle in `[0, 2 pi)`.
    pub theta1: f64,
    /// End angle in `[0, 2 pi)`; unwrapped by `+2 pi` when below `theta1`.
    pub theta2: f64,
}

impl SourceArc {
    pub fn new(center: PlaneVector, radius: f64, theta1: f64, theta2: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGeometry(format!("arc radius must be positive, got {radius}")));
        }
        if !center.is_finite() || !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::InvalidGeometry("arc parameters must be finite".into()));
        }
        let (t1, t2) = (normalize_angle(theta1), normalize_angle(theta2));
        if t1 == t2 {
            return Err(Error::InvalidGeometry("arc end angles coincide".into()));
        }
        Ok(Self { center, radius, theta1: t1, theta2: t2 })
    }

    /// `(theta1, theta2)` with `theta2 > theta1`.
    pub fn unwrapped(&self) -> (f64, f64) {
        if self.theta2 > self.theta1 {
            (self.theta1, self.theta2)
        } else {
            (self.theta1, self.theta2 + TAU)
        }
    }

    pub fn span(&self) -> f64 {
        let (a, b) = self.unwrapped();
        b - a
    }

    pub fn point(&self, theta: f64) -> PlaneVector {
        self.center + PlaneVector::from_polar(self.radius, theta)
    }
}

/// `M` identical sources evenly spaced on a circle of radius `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricLayout {
    pub count: usize,
    pub ring_radius: f64,
    pub device_radius: f64,
}

impl SymmetricLayout {
    /// True for the tangent layout `a = b sin(pi/M)`.
    pub fn is_tangent(&self) -> bool {
        let min_a = self.ring_radius * (PI / self.count as f64).sin();
        (self.device_radius - min_a).abs() <= TANGENCY_SLACK * self.ring_radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloakConfig {
    pub arcs: Vec<SourceArc>,
    pub symmetric: Option<SymmetricLayout>,
}

impl CloakConfig {
    /// Explicit arc list with no symmetry information.
    pub fn from_arcs(arcs: Vec<SourceArc>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(Error::InvalidGeometry("at least one source arc is required".into()));
        }
        Ok(Self { arcs, symmetric: None })
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn centers(&self) -> impl Iterator<Item = PlaneVector> + '_ {
        self.arcs.iter().map(|a| a.center)
    }

    /// Largest `|x_m| + a_m`; outside this radius the far-field expansion holds.
    pub fn outer_radius(&self) -> f64 {
        self.arcs.iter().map(|a| a.center.norm() + a.radius).fold(0.0, f64::max)
    }
}

/// Symmetric configuration with sources at angles `2 pi (m-1) / M`.
///
/// `device_radius = None` selects the tangent choice `a = b sin(pi/M)`.
pub fn symmetric_config(count: usize, ring_radius: f64, device_radius: Option<f64>) -> Result<CloakConfig> {
    if count < 3 {
        return Err(Error::InvalidGeometry(format!("symmetric layouts need M >= 3, got {count}")));
    }
    if !(ring_radius > 0.0) || !ring_radius.is_finite() {
        return Err(Error::InvalidGeometry(format!("ring radius must be positive, got {ring_radius}")));
    }
    let half_sector = PI / count as f64;
    let min_a = ring_radius * half_sector.sin();
    let a = device_radius.unwrap_or(min_a);
    if !(a >= min_a * (1.0 - TANGENCY_SLACK)) {
        return Err(Error::InvalidGeometry(format!(
            "device radius {a} below the tangency bound b sin(pi/M) = {min_a}"
        )));
    }
    if !(a < ring_radius) {
        return Err(Error::InvalidGeometry(format!(
            "device radius {a} must be smaller than the ring radius {ring_radius} so the origin is outside every device"
        )));
    }
    let ratio = ((ring_radius / a) * half_sector.sin()).min(1.0);
    let half_width = (ratio.asin() - half_sector).abs();
    let arcs = (0..count)
        .map(|m| {
            let beta = TAU * m as f64 / count as f64;
            let center = PlaneVector::from_polar(ring_radius, beta);
            SourceArc::new(center, a, PI + beta - half_width, PI + beta + half_width)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CloakConfig {
        arcs,
        symmetric: Some(SymmetricLayout { count, ring_radius, device_radius: a }),
    })
}

/// Membership in the closed cloaked region of a tangent symmetric layout.
pub fn in_cloak(config: &CloakConfig, x: PlaneVector) -> Result<bool> {
    let layout = match config.symmetric {
        Some(l) if l.is_tangent() => l,
        _ => {
            return Err(Error::UnsupportedGeometry(
                "cloak membership is only available for tangent symmetric layouts".into(),
            ))
        }
    };
    let inner = layout.ring_radius * (PI / layout.count as f64).cos();
    if x.norm() > inner {
        return Ok(false);
    }
    Ok(config.arcs.iter().all(|arc| (x - arc.center).norm() >= arc.radius))
}

/// Index (0-based) of the first device disk strictly containing `x`.
pub fn in_device(config: &CloakConfig, x: PlaneVector) -> Option<usize> {
    config.arcs.iter().position(|arc| (x - arc.center).norm() < arc.radius)
}

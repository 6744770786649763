//! Device and total displacement fields on points and grids, region masks
//! and cloaking metrics.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{in_cloak, in_device, CloakConfig};
use crate::incident::{incident_displacement, IncidentField};
use crate::medium::{Material, WaveNumbers};
use crate::sources::SourceAmplitudes;
use crate::specfun::{bessel_sequences, phase, PlaneVector};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Contribution of one device's `sum_l B_l grad V_l` (P) or
/// `sum_l B_l curl V_l` (S), using
/// `d_x V_l = k (V_{l-1} - V_{l+1}) / 2` and `d_y V_l = i k (V_{l-1} + V_{l+1}) / 2`.
fn channel(
    pick: impl Fn(i32) -> Complex64,
    l_max: i32,
    k: f64,
    rel: PlaneVector,
    shear: bool,
) -> Result<[Complex64; 2]> {
    let z = k * rel;
    let seq = bessel_sequences(z.norm(), l_max as usize + 2)?;
    let theta = z.arg();
    let v = |n: i32| seq.h(n) * phase(n as f64 * theta);
    let (mut dx, mut dy) = (ZERO, ZERO);
    for l in -l_max..=l_max {
        let b = pick(l);
        if b == ZERO {
            continue;
        }
        let (lo, hi) = (v(l - 1), v(l + 1));
        dx += b * (lo - hi);
        dy += b * (lo + hi);
    }
    let dx = 0.5 * k * dx;
    let dy = Complex64::new(0.0, 0.5 * k) * dy;
    Ok(if shear { [dy, -dx] } else { [dx, dy] })
}

/// Truncated multipole field of all devices at `x`.
pub fn device_displacement(
    amps: &SourceAmplitudes,
    config: &CloakConfig,
    wn: &WaveNumbers,
    x: PlaneVector,
) -> Result<[Complex64; 2]> {
    if amps.devices() != config.len() {
        return Err(Error::InvalidArgument(format!(
            "amplitudes for {} devices but the configuration has {}",
            amps.devices(),
            config.len()
        )));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument("evaluation point must be finite".into()));
    }
    let l_max = amps.l_max() as i32;
    let mut u = [ZERO; 2];
    for (m, center) in config.centers().enumerate() {
        let rel = x - center;
        if rel.norm() == 0.0 {
            return Err(Error::SingularPoint(format!("point coincides with source {}", m + 1)));
        }
        let p = channel(|l| amps.p(m, l), l_max, wn.k_p, rel, false)?;
        let s = channel(|l| amps.s(m, l), l_max, wn.k_s, rel, true)?;
        for i in 0..2 {
            u[i] += p[i] + s[i];
        }
    }
    Ok(u)
}

/// Region tag of a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Cloak,
    /// Inside the disk of device `m` (0-based).
    Device(usize),
    Exterior,
    /// Outside every disk in a layout without a cloak-membership test.
    Unclassified,
}

impl Region {
    /// `cloak`, `device:<m>` (1-based), `exterior`, `unclassified`.
    pub fn label(&self) -> String {
        match self {
            Region::Cloak => "cloak".into(),
            Region::Device(m) => format!("device:{}", m + 1),
            Region::Exterior => "exterior".into(),
            Region::Unclassified => "unclassified".into(),
        }
    }
}

pub fn region_of(config: &CloakConfig, x: PlaneVector) -> Region {
    if let Some(m) = in_device(config, x) {
        return Region::Device(m);
    }
    match in_cloak(config, x) {
        Ok(true) => Region::Cloak,
        Ok(false) => Region::Exterior,
        Err(_) => Region::Unclassified,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridBounds {
    pub fn square(half_width: f64) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width }
    }
}

/// Sampled total field. Point `(i, j)` sits at index `j * nx + i`, with
/// `i` running along x from `x_min` and `j` along y from `y_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub bounds: GridBounds,
    pub nx: usize,
    pub ny: usize,
    pub u_x: Vec<Complex64>,
    pub u_y: Vec<Complex64>,
    pub incident_x: Vec<Complex64>,
    pub incident_y: Vec<Complex64>,
    pub mask: Vec<Region>,
    /// Wavenumber dividing the plotted displacement.
    pub normalization: f64,
}

impl FieldGrid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> PlaneVector {
        grid_point(&self.bounds, self.nx, self.ny, idx)
    }

    /// `|u| / normalization` at every point.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.u_x
            .iter()
            .zip(&self.u_y)
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt() / self.normalization)
            .collect()
    }
}

fn grid_point(b: &GridBounds, nx: usize, ny: usize, idx: usize) -> PlaneVector {
    let (i, j) = (idx % nx, idx / nx);
    let dx = (b.x_max - b.x_min) / (nx - 1) as f64;
    let dy = (b.y_max - b.y_min) / (ny - 1) as f64;
    PlaneVector::new(b.x_min + i as f64 * dx, b.y_min + j as f64 * dy)
}

/// `k_s` for a pure shear incidence, `k_p` otherwise.
pub fn normalization_for(field: &IncidentField, wn: &WaveNumbers) -> f64 {
    match field {
        IncidentField::PlaneS { .. } => wn.k_s,
        _ => wn.k_p,
    }
}

/// Incident plus device field on an `nx` by `ny` grid.
///
/// Points inside device disks are evaluated and tagged; a point exactly at a
/// source centre gets an infinite value.
pub fn total_grid(
    field: &IncidentField,
    amps: &SourceAmplitudes,
    config: &CloakConfig,
    wn: &WaveNumbers,
    bounds: GridBounds,
    resolution: (usize, usize),
) -> Result<FieldGrid> {
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!("grid resolution must be at least 2x2, got {nx}x{ny}")));
    }
    let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && a < b;
    if !ok(bounds.x_min, bounds.x_max) || !ok(bounds.y_min, bounds.y_max) {
        return Err(Error::InvalidArgument("grid bounds must be finite with min < max".into()));
    }
    field.validate()?;
    let samples: Vec<([Complex64; 2], [Complex64; 2], Region)> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(&bounds, nx, ny, idx);
            let ui = incident_displacement(field, wn, x)?;
            let ud = match device_displacement(amps, config, wn, x) {
                Err(Error::SingularPoint(_)) => [Complex64::new(f64::INFINITY, 0.0); 2],
                other => other?,
            };
            Ok(([ui[0] + ud[0], ui[1] + ud[1]], ui, region_of(config, x)))
        })
        .collect::<Result<_>>()?;
    let mut grid = FieldGrid {
        bounds,
        nx,
        ny,
        u_x: Vec::with_capacity(nx * ny),
        u_y: Vec::with_capacity(nx * ny),
        incident_x: Vec::with_capacity(nx * ny),
        incident_y: Vec::with_capacity(nx * ny),
        mask: Vec::with_capacity(nx * ny),
        normalization: normalization_for(field, wn),
    };
    for (u, ui, r) in samples {
        grid.u_x.push(u[0]);
        grid.u_y.push(u[1]);
        grid.incident_x.push(ui[0]);
        grid.incident_y.push(ui[1]);
        grid.mask.push(r);
    }
    Ok(grid)
}

/// Normalized magnitudes summarising how well a grid is cloaked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloakMetrics {
    pub cloak_max: f64,
    pub cloak_rms: f64,
    /// RMS of `|u - u_i|` over RMS of `|u_i|`, exterior points only.
    pub exterior_rel_dev: f64,
    pub exterior_median: f64,
    /// Largest finite magnitude inside the device disks (0 if none).
    pub device_max: f64,
    pub cloak_points: usize,
    pub exterior_points: usize,
}

pub fn cloak_metrics(grid: &FieldGrid) -> Result<CloakMetrics> {
    let mag = grid.magnitudes();
    let mut cloak = Vec::new();
    let mut exterior = Vec::new();
    let (mut dev_sq, mut inc_sq) = (0.0, 0.0);
    let mut device_max: f64 = 0.0;
    for (idx, region) in grid.mask.iter().enumerate() {
        match region {
            Region::Cloak => cloak.push(mag[idx]),
            Region::Exterior => {
                exterior.push(mag[idx]);
                let dx = grid.u_x[idx] - grid.incident_x[idx];
                let dy = grid.u_y[idx] - grid.incident_y[idx];
                dev_sq += dx.norm_sqr() + dy.norm_sqr();
                inc_sq += grid.incident_x[idx].norm_sqr() + grid.incident_y[idx].norm_sqr();
            }
            Region::Device(_) if mag[idx].is_finite() => device_max = device_max.max(mag[idx]),
            _ => {}
        }
    }
    if cloak.is_empty() {
        return Err(Error::InsufficientCoverage("no grid point lies in the cloaked region".into()));
    }
    if exterior.is_empty() {
        return Err(Error::InsufficientCoverage("no grid point lies in the exterior region".into()));
    }
    let cloak_max = cloak.iter().copied().fold(0.0, f64::max);
    let cloak_rms = (cloak.iter().map(|v| v * v).sum::<f64>() / cloak.len() as f64).sqrt();
    let exterior_rel_dev = if inc_sq == 0.0 { 0.0 } else { (dev_sq / inc_sq).sqrt() };
    let mut sorted = exterior.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let exterior_median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    Ok(CloakMetrics {
        cloak_max,
        cloak_rms,
        exterior_rel_dev,
        exterior_median,
        device_max,
        cloak_points: cloak.len(),
        exterior_points: exterior.len(),
    })
}

fn total_at(
    field: &IncidentField,
    amps: &SourceAmplitudes,
    config: &CloakConfig,
    wn: &WaveNumbers,
    x: PlaneVector,
) -> Result<[Complex64; 2]> {
    let ui = incident_displacement(field, wn, x)?;
    let ud = device_displacement(amps, config, wn, x)?;
    Ok([ui[0] + ud[0], ui[1] + ud[1]])
}

/// Finite-difference Navier residual of the total field at `x`:
/// `|mu lap u + (lambda + mu) grad div u + rho omega^2 u| / (mu k_s^2 s)`
/// with second-order central differences of step `h`. The scale `s` is the
/// largest total or incident magnitude on the stencil, since inside the
/// cloak the total field is a small difference of large terms.
pub fn navier_residual(
    field: &IncidentField,
    amps: &SourceAmplitudes,
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    x: PlaneVector,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if config.arcs.iter().any(|a| (x - a.center).norm() <= a.radius + 2.0 * h) {
        return Err(Error::Domain("stencil reaches into a device disk".into()));
    }
    let mut incident_scale: f64 = 0.0;
    for i in -1..=1 {
        for j in -1..=1 {
            let ui = incident_displacement(field, wn, x + PlaneVector::new(i as f64 * h, j as f64 * h))?;
            incident_scale = incident_scale.max((ui[0].norm_sqr() + ui[1].norm_sqr()).sqrt());
        }
    }
    let at = |i: i32, j: i32| total_at(field, amps, config, wn, x + PlaneVector::new(i as f64 * h, j as f64 * h));
    let c = at(0, 0)?;
    let (e, w, n, s) = (at(1, 0)?, at(-1, 0)?, at(0, 1)?, at(0, -1)?);
    let (ne, nw, se, sw) = (at(1, 1)?, at(-1, 1)?, at(1, -1)?, at(-1, -1)?);
    let h2 = h * h;
    let scale = [c, e, w, n, s, ne, nw, se, sw]
        .iter()
        .map(|u| (u[0].norm_sqr() + u[1].norm_sqr()).sqrt())
        .fold(incident_scale, f64::max);
    let mut res = [ZERO; 2];
    let ratio = material.lambda() / material.mu() + 1.0;
    for k in 0..2 {
        let dxx = (e[k] - 2.0 * c[k] + w[k]) / h2;
        let dyy = (n[k] - 2.0 * c[k] + s[k]) / h2;
        res[k] = dxx + dyy + wn.k_s * wn.k_s * c[k];
    }
    // grad div u
    let uxx = (e[0] - 2.0 * c[0] + w[0]) / h2;
    let vyy = (n[1] - 2.0 * c[1] + s[1]) / h2;
    let cross = |q: usize| (ne[q] - nw[q] - se[q] + sw[q]) / (4.0 * h2);
    res[0] += ratio * (uxx + cross(1));
    res[1] += ratio * (cross(0) + vyy);
    let norm = (res[0].norm_sqr() + res[1].norm_sqr()).sqrt();
    Ok(if scale == 0.0 { norm } else { norm / (wn.k_s * wn.k_s * scale) })
}

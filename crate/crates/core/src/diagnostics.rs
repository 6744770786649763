//! Near/far-field coefficients of the device field about the origin, the
//! residuals of the cloaking constraints, and a boundary-integral
//! evaluation of the device field.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CloakConfig, SourceArc};
use crate::incident::{displacement_from_jets, potential_jets, regular_coeffs, stress_over_mu_from_jets, IncidentField};
use crate::medium::{green_stress, green_tensor, Material, WaveNumbers};
use crate::quadrature::mapped_rule;
use crate::sources::{quadrature_nodes, SourceAmplitudes, QUADRATURE_TOL};
use crate::specfun::{bessel_sequences, phase, BesselSeq, PlaneVector};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Refinements tried by the boundary integral before giving up.
const MAX_DOUBLINGS: u32 = 6;

/// Truncated expansion coefficients about the origin and constraint residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDiagnostics {
    pub n_range: RangeInclusive<i32>,
    pub far_p: Vec<Complex64>,
    pub far_s: Vec<Complex64>,
    pub near_p: Vec<Complex64>,
    pub near_s: Vec<Complex64>,
    /// `|A_n^(p) + E_n^(p)|`
    pub residual_near_p: Vec<f64>,
    pub residual_near_s: Vec<f64>,
    /// `|F_n^(p)|`
    pub residual_far_p: Vec<f64>,
    pub residual_far_s: Vec<f64>,
}

/// `[-ceil(k_s b) - 20, ceil(k_s b) + 20]` with `b` the largest source distance.
pub fn default_n_range(config: &CloakConfig, wn: &WaveNumbers) -> RangeInclusive<i32> {
    let b = config.centers().map(|c| c.norm()).fold(0.0, f64::max);
    let w = (wn.k_s * b).ceil() as i32 + 20;
    -w..=w
}

/// Per-device Bessel data at `k |x_m|`.
struct Translation {
    seq: BesselSeq,
    theta: f64,
}

fn translations(config: &CloakConfig, k: f64, order: usize) -> Result<Vec<Translation>> {
    config
        .centers()
        .map(|c| {
            let z = k * c;
            Ok(Translation { seq: bessel_sequences(z.norm(), order)?, theta: z.arg() })
        })
        .collect()
}

/// `(F_n, E_n)` for one channel: sums of `B(m,l)` against `U_{n-l}^-` and `V_{n-l}^-`.
fn channel_sums(
    amps: &SourceAmplitudes,
    pick: impl Fn(usize, i32) -> Complex64 + Sync,
    tr: &[Translation],
    n_range: &RangeInclusive<i32>,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let l_max = amps.l_max() as i32;
    n_range
        .clone()
        .into_par_iter()
        .map(|n| {
            let (mut f, mut e) = (ZERO, ZERO);
            for (m, t) in tr.iter().enumerate() {
                let (mut fm, mut em) = (ZERO, ZERO);
                for l in -l_max..=l_max {
                    let b = pick(m, l);
                    if b == ZERO {
                        continue;
                    }
                    let o = n - l;
                    let ph = phase(-(o as f64) * t.theta);
                    fm += b * t.seq.j(o) * ph;
                    // an overflowing Hankel order only occurs once B has decayed far below it
                    let h = t.seq.h(o);
                    if h.is_finite() {
                        em += b * h * ph;
                    }
                }
                f += fm;
                e += em;
            }
            (f, e)
        })
        .unzip()
}

/// Truncated far (`F_n`) and near (`E_n`) coefficients with residuals
/// against the incident field's regular coefficients.
pub fn nearfar_coeffs(
    amps: &SourceAmplitudes,
    config: &CloakConfig,
    wn: &WaveNumbers,
    field: &IncidentField,
    n_range: RangeInclusive<i32>,
) -> Result<CoefficientDiagnostics> {
    if config.arcs.iter().any(|a| a.center.norm() <= a.radius) {
        return Err(Error::InvalidGeometry("the origin lies inside a device disk".into()));
    }
    if amps.devices() != config.len() {
        return Err(Error::InvalidArgument(format!(
            "amplitudes for {} devices but the configuration has {}",
            amps.devices(),
            config.len()
        )));
    }
    let reach = n_range.start().unsigned_abs().max(n_range.end().unsigned_abs()) as usize + amps.l_max() + 1;
    let tp = translations(config, wn.k_p, reach)?;
    let ts = translations(config, wn.k_s, reach)?;
    let (far_p, near_p) = channel_sums(amps, |m, l| amps.p(m, l), &tp, &n_range);
    let (far_s, near_s) = channel_sums(amps, |m, l| amps.s(m, l), &ts, &n_range);
    let n_hi = n_range.start().unsigned_abs().max(n_range.end().unsigned_abs()) as usize;
    let a = regular_coeffs(field, n_hi);
    let ns: Vec<i32> = n_range.clone().collect();
    let residual_near_p = ns.iter().zip(&near_p).map(|(&n, e)| (a.p(n) + e).norm()).collect();
    let residual_near_s = ns.iter().zip(&near_s).map(|(&n, e)| (a.s(n) + e).norm()).collect();
    Ok(CoefficientDiagnostics {
        residual_far_p: far_p.iter().map(|f| f.norm()).collect(),
        residual_far_s: far_s.iter().map(|f| f.norm()).collect(),
        n_range,
        far_p,
        far_s,
        near_p,
        near_s,
        residual_near_p,
        residual_near_s,
    })
}

/// One line of the constraint report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintRow {
    pub n: i32,
    pub res_near_p: f64,
    pub res_near_s: f64,
    pub res_far_p: f64,
    pub res_far_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub rows: Vec<ConstraintRow>,
    pub max_near_p: f64,
    pub max_near_s: f64,
    pub max_far_p: f64,
    pub max_far_s: f64,
}

pub fn constraint_report(diag: &CoefficientDiagnostics) -> ConstraintReport {
    let rows: Vec<ConstraintRow> = diag
        .n_range
        .clone()
        .enumerate()
        .map(|(i, n)| ConstraintRow {
            n,
            res_near_p: diag.residual_near_p[i],
            res_near_s: diag.residual_near_s[i],
            res_far_p: diag.residual_far_p[i],
            res_far_s: diag.residual_far_s[i],
        })
        .collect();
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    ConstraintReport {
        max_near_p: max(&diag.residual_near_p),
        max_near_s: max(&diag.residual_near_s),
        max_far_p: max(&diag.residual_far_p),
        max_far_s: max(&diag.residual_far_s),
        rows,
    }
}

/// Integral of `n . [u_i . Sigma(y - x) - sigma_i . G(y - x)]` over one arc
/// with the normal pointing towards the arc's centre, using `nodes` points.
/// Returns the integral and the integral of the integrand's magnitude.
fn arc_integral(
    field: &IncidentField,
    material: &Material,
    wn: &WaveNumbers,
    arc: &SourceArc,
    x: PlaneVector,
    nodes: usize,
) -> Result<([Complex64; 2], f64)> {
    let (t1, t2) = arc.unwrapped();
    let mut acc = [ZERO; 2];
    let mut mag = 0.0;
    for (theta, w) in mapped_rule(nodes, t1, t2) {
        let y = arc.point(theta);
        let normal = [-theta.cos(), -theta.sin()];
        let (p, s) = potential_jets(field, wn, y)?;
        let u = displacement_from_jets(&p, &s);
        let sig = stress_over_mu_from_jets(material, &p, &s).map(|r| r.map(|v| v * material.mu()));
        let g = green_tensor(material, wn, y - x)?;
        let big = green_stress(material, wn, y - x)?;
        let ds = w * arc.radius;
        for k in 0..2 {
            let mut v = ZERO;
            for i in 0..2 {
                for j in 0..2 {
                    v += normal[i] * (u[j] * big[i][j][k] - sig[i][j] * g[j][k]);
                }
            }
            acc[k] += ds * v;
            mag += ds * v.norm();
        }
    }
    Ok((acc, mag))
}

/// Device displacement at `x` from the boundary integral over the cloak
/// boundary, refining each arc rule until successive results agree.
///
/// Each arc contributes the field of its own source, so `x` may be any
/// point outside every closed device disk.
pub fn boundary_integral_field(
    field: &IncidentField,
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    x: PlaneVector,
) -> Result<[Complex64; 2]> {
    if !x.is_finite() {
        return Err(Error::Domain("evaluation point must be finite".into()));
    }
    if let Some(m) = config.arcs.iter().position(|a| (x - a.center).norm() <= a.radius) {
        return Err(Error::Domain(format!("point lies in or on device disk {}", m + 1)));
    }
    let mut total = [ZERO; 2];
    for arc in &config.arcs {
        let mut nodes = quadrature_nodes(wn, arc.radius);
        let (mut prev, _) = arc_integral(field, material, wn, arc, x, nodes)?;
        let mut converged = false;
        for _ in 0..MAX_DOUBLINGS {
            nodes *= 2;
            let (next, mag) = arc_integral(field, material, wn, arc, x, nodes)?;
            let diff = ((next[0] - prev[0]).norm_sqr() + (next[1] - prev[1]).norm_sqr()).sqrt();
            prev = next;
            if diff <= QUADRATURE_TOL * mag {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Accuracy(format!("boundary integral did not converge at ({}, {})", x.x, x.y)));
        }
        total[0] -= prev[0];
        total[1] -= prev[1];
    }
    Ok(total)
}

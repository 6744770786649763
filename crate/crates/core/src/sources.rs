//! Active source amplitudes `B(m, l)`: closed-form series for plane and
//! general incidence, and a direct quadrature of the boundary integral.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CloakConfig, SourceArc};
use crate::incident::{polar_trace, potentials, IncidentField, PolarTrace, RegularCoeffs};
use crate::medium::{Material, WaveNumbers};
use crate::quadrature::mapped_rule;
use crate::specfun::{bessel_sequences, i_pow, parity, phase, BesselSeq, PlaneVector};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative disagreement allowed between successive quadrature refinements.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Multipole amplitudes for every device, `|l| <= l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAmplitudes {
    devices: usize,
    l_max: usize,
    bp: Vec<Complex64>,
    bs: Vec<Complex64>,
}

impl SourceAmplitudes {
    pub fn zeros(devices: usize, l_max: usize) -> Self {
        let len = devices * (2 * l_max + 1);
        Self { devices, l_max, bp: vec![ZERO; len], bs: vec![ZERO; len] }
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    fn index(&self, m: usize, l: i32) -> usize {
        assert!(m < self.devices && l.unsigned_abs() as usize <= self.l_max, "amplitude index out of range");
        m * (2 * self.l_max + 1) + (l + self.l_max as i32) as usize
    }

    pub fn p(&self, m: usize, l: i32) -> Complex64 {
        self.bp[self.index(m, l)]
    }

    pub fn s(&self, m: usize, l: i32) -> Complex64 {
        self.bs[self.index(m, l)]
    }

    pub fn set(&mut self, m: usize, l: i32, p: Complex64, s: Complex64) {
        let i = self.index(m, l);
        self.bp[i] = p;
        self.bs[i] = s;
    }

    /// Same amplitudes restricted (or zero-padded) to `|l| <= l_max`.
    pub fn truncated(&self, l_max: usize) -> Self {
        let mut out = Self::zeros(self.devices, l_max);
        let lim = l_max.min(self.l_max) as i32;
        for m in 0..self.devices {
            for l in -lim..=lim {
                out.set(m, l, self.p(m, l), self.s(m, l));
            }
        }
        out
    }

    /// `(m, l, B_p, B_s)` in device-major order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, i32, Complex64, Complex64)> + '_ {
        let n = self.l_max as i32;
        (0..self.devices).flat_map(move |m| (-n..=n).map(move |l| (m, l, self.p(m, l), self.s(m, l))))
    }

    pub fn is_finite(&self) -> bool {
        self.bp.iter().chain(&self.bs).all(|c| c.is_finite())
    }

    /// Largest entrywise difference relative to the largest entry of `other`.
    pub fn max_relative_difference(&self, other: &Self) -> f64 {
        let scale = other.bp.iter().chain(&other.bs).map(|c| c.norm()).fold(0.0, f64::max);
        let diff = self
            .bp
            .iter()
            .zip(&other.bp)
            .chain(self.bs.iter().zip(&other.bs))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// Constants of the amplitude kernel for one device and one `(q, l)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub alpha_p: f64,
    pub alpha_s: f64,
    pub q: i32,
    pub l: i32,
}

/// `v1 = sing / (q + l) + reg`, and `v2`.
#[derive(Debug, Clone, Copy)]
struct KernelParts {
    sing: Complex64,
    reg: Complex64,
    v2: Complex64,
}

/// Kernel pieces with `a` the sequence at `alpha` and `b` at `beta`.
fn kernel_parts(a: &BesselSeq, b: &BesselSeq, alpha_p: f64, alpha_s: f64, q: i32, l: i32) -> KernelParts {
    let alpha = a.x();
    let (jl, jlp) = (a.j(l), a.jp(l));
    let (jq, jqp) = (a.j(q), a.jp(q));
    let s2 = alpha_s * alpha_s;
    let (lf, qf) = (l as f64, q as f64);
    let sing = s2 * alpha * (jlp * jq - jl * jqp);
    let reg = alpha * (-2.0 * qf * jlp * jq + 2.0 * lf * jl * jqp);
    let v2 = -I * (s2 - 2.0 * lf * qf) * b.j(l) * jq - 2.0 * I * alpha_p * alpha_s * b.jp(l) * jqp;
    KernelParts { sing: Complex64::new(sing, 0.0), reg: Complex64::new(reg, 0.0), v2 }
}

/// The kernel vector `(v1, v2)` at arguments `(alpha, beta)`.
pub fn v_kernel(params: KernelParams, alpha: f64, beta: f64) -> Result<(Complex64, Complex64)> {
    let KernelParams { alpha_p, alpha_s, q, l } = params;
    if q + l == 0 {
        return Err(Error::KernelLimit { q, l });
    }
    let order = q.unsigned_abs().max(l.unsigned_abs()) as usize + 1;
    let a = bessel_sequences(alpha, order)?;
    let b = bessel_sequences(beta, order)?;
    let k = kernel_parts(&a, &b, alpha_p, alpha_s, q, l);
    Ok((k.sing / (q + l) as f64 + k.reg, k.v2))
}

/// Arc factor `exp(-i c theta2) - exp(-i c theta1)`.
fn arc_factor(c: i32, theta1: f64, theta2: f64) -> Complex64 {
    phase(-(c as f64) * theta2) - phase(-(c as f64) * theta1)
}

/// `(D v1, D v2)` for one `q`, with the `q = -l` term taken in the limit
/// `D / (q + l) -> -i (theta2 - theta1)`.
fn arc_weighted(k: KernelParts, q: i32, l: i32, theta1: f64, theta2: f64) -> (Complex64, Complex64) {
    let c = q + l;
    if c == 0 {
        (-I * (theta2 - theta1) * k.sing, ZERO)
    } else {
        let d = arc_factor(c, theta1, theta2);
        (d * (k.sing / c as f64 + k.reg), d * k.v2)
    }
}

/// Default inner truncation `N + ceil(max k_s a_m) + 10`.
pub fn default_inner_order(config: &CloakConfig, wn: &WaveNumbers, l_max: usize) -> usize {
    let alpha = config.arcs.iter().map(|a| wn.k_s * a.radius).fold(0.0, f64::max);
    l_max + alpha.ceil() as usize + 10
}

fn check_truncation(l_max: usize, q_max: usize) -> Result<()> {
    if q_max < l_max {
        return Err(Error::InvalidTruncation(format!("inner order Q = {q_max} is below N = {l_max}")));
    }
    Ok(())
}

/// Local expansion `Phi_i(x_m + a) = sum_q P_q J_q(k_p |a|) exp(-i q arg a)`, and
/// likewise `S_q` for `Psi_i` with `k_s`; `q` runs over `[-q_max, q_max]`.
pub fn local_coeffs(
    field: &IncidentField,
    wn: &WaveNumbers,
    center: PlaneVector,
    q_max: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let qs = -(q_max as i32)..=q_max as i32;
    match field {
        IncidentField::General(c) => {
            let p = translate_regular(c.p_values(), c.n_max(), wn.k_p, center, q_max)?;
            let s = translate_regular(c.s_values(), c.n_max(), wn.k_s, center, q_max)?;
            Ok((p, s))
        }
        _ => {
            let ((_, psi_p), (_, psi_s)) = field.plane_parts().expect("plane field");
            let (phi, psi) = potentials(field, wn, center)?;
            let p = qs.clone().map(|q| phi * i_pow(q as i64) * phase(q as f64 * psi_p)).collect();
            let s = qs.map(|q| psi * i_pow(q as i64) * phase(q as f64 * psi_s)).collect();
            Ok((p, s))
        }
    }
}

/// `(-1)^q sum_n A_n U_{n+q}^+(k x_m)`.
fn translate_regular(
    coeffs: &[Complex64],
    n_max: usize,
    k: f64,
    center: PlaneVector,
    q_max: usize,
) -> Result<Vec<Complex64>> {
    let z = k * center;
    let seq = bessel_sequences(z.norm(), n_max + q_max + 1)?;
    let theta = z.arg();
    let nonzero: Vec<(i32, Complex64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != ZERO)
        .map(|(i, a)| (i as i32 - n_max as i32, *a))
        .collect();
    Ok((-(q_max as i32)..=q_max as i32)
        .map(|q| {
            let sum: Complex64 = nonzero
                .iter()
                .map(|&(n, a)| a * seq.j(n + q) * phase((n + q) as f64 * theta))
                .sum();
            parity(q as i64) * sum
        })
        .collect())
}

/// Amplitudes of one device from its local incident coefficients.
fn device_amplitudes(
    arc: &SourceArc,
    wn: &WaveNumbers,
    p_loc: &[Complex64],
    s_loc: &[Complex64],
    l_max: usize,
    q_max: usize,
) -> Result<Vec<(Complex64, Complex64)>> {
    let alpha_p = wn.k_p * arc.radius;
    let alpha_s = wn.k_s * arc.radius;
    let order = q_max.max(l_max) + 2;
    let seq_p = bessel_sequences(alpha_p, order)?;
    let seq_s = bessel_sequences(alpha_s, order)?;
    let (theta1, theta2) = arc.unwrapped();
    let pre = 1.0 / (4.0 * alpha_s * alpha_s);
    let n = l_max as i32;
    Ok((-n..=n)
        .map(|l| {
            let (mut bp, mut bs) = (ZERO, ZERO);
            for (iq, q) in (-(q_max as i32)..=q_max as i32).enumerate() {
                let (pq, sq) = (p_loc[iq], s_loc[iq]);
                if pq != ZERO {
                    let k = kernel_parts(&seq_p, &seq_s, alpha_p, alpha_s, q, l);
                    let (t1, t2) = arc_weighted(k, q, l, theta1, theta2);
                    bp += pq * t1;
                    bs += pq * t2;
                }
                if sq != ZERO {
                    let k = kernel_parts(&seq_s, &seq_p, alpha_p, alpha_s, q, l);
                    let (t1, t2) = arc_weighted(k, q, l, theta1, theta2);
                    bp -= sq * t2;
                    bs += sq * t1;
                }
            }
            (pre * bp, pre * bs)
        })
        .collect())
}

fn assemble(
    config: &CloakConfig,
    wn: &WaveNumbers,
    field: &IncidentField,
    l_max: usize,
    q_max: usize,
) -> Result<SourceAmplitudes> {
    check_truncation(l_max, q_max)?;
    let per_device = config
        .arcs
        .par_iter()
        .map(|arc| {
            let (p, s) = local_coeffs(field, wn, arc.center, q_max)?;
            device_amplitudes(arc, wn, &p, &s, l_max, q_max)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SourceAmplitudes::zeros(config.len(), l_max);
    for (m, rows) in per_device.into_iter().enumerate() {
        for (i, (bp, bs)) in rows.into_iter().enumerate() {
            out.set(m, i as i32 - l_max as i32, bp, bs);
        }
    }
    Ok(out)
}

/// Closed-form amplitudes for plane or combined plane incidence.
///
/// `q_max = None` uses [`default_inner_order`].
pub fn plane_amplitudes(
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    field: &IncidentField,
    l_max: usize,
    q_max: Option<usize>,
) -> Result<SourceAmplitudes> {
    let _ = material;
    if field.plane_parts().is_none() {
        return Err(Error::InvalidArgument("plane_amplitudes needs a plane or combined incident field".into()));
    }
    field.validate()?;
    let q = q_max.unwrap_or_else(|| default_inner_order(config, wn, l_max));
    assemble(config, wn, field, l_max, q)
}

/// Amplitudes for an incident field given by its regular-basis coefficients.
pub fn general_amplitudes(
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    coeffs: &RegularCoeffs,
    l_max: usize,
    q_max: Option<usize>,
) -> Result<SourceAmplitudes> {
    let _ = material;
    let q = q_max.unwrap_or_else(|| default_inner_order(config, wn, l_max));
    assemble(config, wn, &IncidentField::General(coeffs.clone()), l_max, q)
}

/// Closed-form amplitudes for any incident field.
pub fn amplitudes(
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    field: &IncidentField,
    l_max: usize,
    q_max: Option<usize>,
) -> Result<SourceAmplitudes> {
    match field {
        IncidentField::General(c) => general_amplitudes(config, material, wn, c, l_max, q_max),
        _ => plane_amplitudes(config, material, wn, field, l_max, q_max),
    }
}

/// Gauss-Legendre node count for an arc of radius `a`.
pub fn quadrature_nodes(wn: &WaveNumbers, radius: f64) -> usize {
    64.max(16 * (wn.k_s * radius).ceil() as usize)
}

/// Integrand pair of the boundary integral for mode `l` at one trace.
fn amplitude_integrand(
    t: &PolarTrace,
    theta: f64,
    l: i32,
    radius: f64,
    seq_p: &BesselSeq,
    seq_s: &BesselSeq,
) -> (Complex64, Complex64) {
    let (ap, as_) = (seq_p.x(), seq_s.x());
    let lf = l as f64;
    let e = phase(-lf * theta);
    let (jp, jpp) = (seq_p.j(l), seq_p.jp(l));
    let (js, jsp) = (seq_s.j(l), seq_s.jp(l));
    let (ur, ut) = (t.u_r / radius, t.u_theta / radius);
    let (srr, srt) = (t.sigma_rr_over_mu, t.sigma_rtheta_over_mu);
    let s2 = as_ * as_;
    let fp = I * ap * jpp * srr
        + lf * jp * srt
        + I * ((s2 - 2.0 * lf * lf) * jp + 2.0 * ap * jpp) * ur
        + 2.0 * lf * (jp - ap * jpp) * ut;
    let fs = -I * as_ * jsp * srt + lf * js * srr - I * ((s2 - 2.0 * lf * lf) * js + 2.0 * as_ * jsp) * ut
        + 2.0 * lf * (js - as_ * jsp) * ur;
    (e * fp, e * fs)
}

/// Quadrature of all modes `|l| <= l_max` of device `m` with `nodes` points,
/// returning the sums and the `L1` norms of the integrands.
fn quadrature_device(
    field: &IncidentField,
    material: &Material,
    wn: &WaveNumbers,
    arc: &SourceArc,
    l_max: usize,
    nodes: usize,
) -> Result<Vec<[(Complex64, f64); 2]>> {
    let alpha_p = wn.k_p * arc.radius;
    let alpha_s = wn.k_s * arc.radius;
    let seq_p = bessel_sequences(alpha_p, l_max + 2)?;
    let seq_s = bessel_sequences(alpha_s, l_max + 2)?;
    let (t1, t2) = arc.unwrapped();
    let rule = mapped_rule(nodes, t1, t2);
    let traces = rule
        .iter()
        .map(|&(theta, _)| polar_trace(field, material, wn, arc, theta))
        .collect::<Result<Vec<_>>>()?;
    let pre = 1.0 / (4.0 * wn.k_s * wn.k_s);
    let n = l_max as i32;
    Ok((-n..=n)
        .map(|l| {
            let mut acc = [(ZERO, 0.0); 2];
            for ((theta, w), t) in rule.iter().zip(&traces) {
                let (fp, fs) = amplitude_integrand(t, *theta, l, arc.radius, &seq_p, &seq_s);
                acc[0].0 += w * fp;
                acc[0].1 += w * fp.norm();
                acc[1].0 += w * fs;
                acc[1].1 += w * fs.norm();
            }
            acc.map(|(v, n)| (pre * v, pre * n))
        })
        .collect())
}

/// Direct quadrature of every amplitude of device `m`, refined once to
/// estimate the error.
fn quadrature_checked(
    field: &IncidentField,
    material: &Material,
    wn: &WaveNumbers,
    arc: &SourceArc,
    l_max: usize,
) -> Result<Vec<(Complex64, Complex64)>> {
    let nodes = quadrature_nodes(wn, arc.radius);
    let coarse = quadrature_device(field, material, wn, arc, l_max, nodes)?;
    let fine = quadrature_device(field, material, wn, arc, l_max, 2 * nodes)?;
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| {
            for ch in 0..2 {
                let diff = (c[ch].0 - f[ch].0).norm();
                if diff > QUADRATURE_TOL * f[ch].1.max(f[ch].0.norm()) {
                    return Err(Error::Accuracy(format!(
                        "amplitude quadrature refinement changed the result by {diff:e}"
                    )));
                }
            }
            Ok((f[0].0, f[1].0))
        })
        .collect()
}

/// Amplitude pair `(B_p, B_s)` of device `m` and mode `l` by direct quadrature.
pub fn quadrature_amplitudes(
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    field: &IncidentField,
    l: i32,
    m: usize,
) -> Result<(Complex64, Complex64)> {
    let arc = config
        .arcs
        .get(m)
        .ok_or_else(|| Error::InvalidArgument(format!("device index {m} out of range")))?;
    let l_max = l.unsigned_abs() as usize;
    let rows = quadrature_checked(field, material, wn, arc, l_max)?;
    Ok(rows[(l + l_max as i32) as usize])
}

/// All amplitudes `|l| <= l_max` by direct quadrature.
pub fn quadrature_amplitudes_all(
    config: &CloakConfig,
    material: &Material,
    wn: &WaveNumbers,
    field: &IncidentField,
    l_max: usize,
) -> Result<SourceAmplitudes> {
    let per_device = config
        .arcs
        .par_iter()
        .map(|arc| quadrature_checked(field, material, wn, arc, l_max))
        .collect::<Result<Vec<_>>>()?;
    let mut out = SourceAmplitudes::zeros(config.len(), l_max);
    for (m, rows) in per_device.into_iter().enumerate() {
        for (i, (bp, bs)) in rows.into_iter().enumerate() {
            out.set(m, i as i32 - l_max as i32, bp, bs);
        }
    }
    Ok(out)
}

//! Incident fields: plane P/SV waves, their combination, and general
//! expansions in the regular basis `U_n^+`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::SourceArc;
use crate::medium::{Material, WaveNumbers};
use crate::specfun::{bessel_sequences, i_pow, ladder_stencil, phase, PlaneVector};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Coefficients `A_n` for `|n| <= n_max`, stored densely from `-n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularCoeffs {
    n_max: usize,
    p: Vec<Complex64>,
    s: Vec<Complex64>,
}

impl RegularCoeffs {
    pub fn new(n_max: usize, p: Vec<Complex64>, s: Vec<Complex64>) -> Result<Self> {
        let len = 2 * n_max + 1;
        if p.len() != len || s.len() != len {
            return Err(Error::InvalidArgument(format!(
                "coefficient arrays must have length {len} for n_max = {n_max}"
            )));
        }
        if p.iter().chain(&s).any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("incident coefficients must be finite".into()));
        }
        Ok(Self { n_max, p, s })
    }

    pub fn zeros(n_max: usize) -> Self {
        let len = 2 * n_max + 1;
        Self { n_max, p: vec![ZERO; len], s: vec![ZERO; len] }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `A_n^(p)`, zero outside the stored range.
    pub fn p(&self, n: i32) -> Complex64 {
        self.index(n).map_or(ZERO, |i| self.p[i])
    }

    /// `A_n^(s)`, zero outside the stored range.
    pub fn s(&self, n: i32) -> Complex64 {
        self.index(n).map_or(ZERO, |i| self.s[i])
    }

    pub fn p_values(&self) -> &[Complex64] {
        &self.p
    }

    pub fn s_values(&self) -> &[Complex64] {
        &self.s
    }

    pub fn set_p(&mut self, n: i32, value: Complex64) -> Result<()> {
        let i = self.index(n).ok_or(Error::Range { requested: n as i64, available: self.n_max })?;
        self.p[i] = value;
        Ok(())
    }

    pub fn set_s(&mut self, n: i32, value: Complex64) -> Result<()> {
        let i = self.index(n).ok_or(Error::Range { requested: n as i64, available: self.n_max })?;
        self.s[i] = value;
        Ok(())
    }

    fn index(&self, n: i32) -> Option<usize> {
        (n.unsigned_abs() as usize <= self.n_max).then(|| (n + self.n_max as i32) as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IncidentField {
    PlaneP { amplitude: Complex64, angle: f64 },
    PlaneS { amplitude: Complex64, angle: f64 },
    Combined { p_amplitude: Complex64, p_angle: f64, s_amplitude: Complex64, s_angle: f64 },
    General(RegularCoeffs),
}

impl IncidentField {
    pub fn plane_p(amplitude: f64, angle: f64) -> Self {
        IncidentField::PlaneP { amplitude: Complex64::new(amplitude, 0.0), angle }
    }

    pub fn plane_s(amplitude: f64, angle: f64) -> Self {
        IncidentField::PlaneS { amplitude: Complex64::new(amplitude, 0.0), angle }
    }

    /// Plane components as `((A_p, psi_p), (A_s, psi_s))`; `None` for general fields.
    pub fn plane_parts(&self) -> Option<((Complex64, f64), (Complex64, f64))> {
        match *self {
            IncidentField::PlaneP { amplitude, angle } => Some(((amplitude, angle), (ZERO, 0.0))),
            IncidentField::PlaneS { amplitude, angle } => Some(((ZERO, 0.0), (amplitude, angle))),
            IncidentField::Combined { p_amplitude, p_angle, s_amplitude, s_angle } => {
                Some(((p_amplitude, p_angle), (s_amplitude, s_angle)))
            }
            IncidentField::General(_) => None,
        }
    }

    /// Same field with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Self {
        match self {
            IncidentField::PlaneP { amplitude, angle } => {
                IncidentField::PlaneP { amplitude: amplitude * factor, angle: *angle }
            }
            IncidentField::PlaneS { amplitude, angle } => {
                IncidentField::PlaneS { amplitude: amplitude * factor, angle: *angle }
            }
            IncidentField::Combined { p_amplitude, p_angle, s_amplitude, s_angle } => IncidentField::Combined {
                p_amplitude: p_amplitude * factor,
                p_angle: *p_angle,
                s_amplitude: s_amplitude * factor,
                s_angle: *s_angle,
            },
            IncidentField::General(c) => IncidentField::General(RegularCoeffs {
                n_max: c.n_max,
                p: c.p.iter().map(|v| v * factor).collect(),
                s: c.s.iter().map(|v| v * factor).collect(),
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.plane_parts() {
            Some(((ap, pp), (as_, ps))) => ap.is_finite() && as_.is_finite() && pp.is_finite() && ps.is_finite(),
            None => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("plane-wave amplitudes and angles must be finite".into()))
        }
    }
}

/// Regular-basis coefficients of `field` for `|n| <= n_max`.
///
/// A plane wave `A exp(i k e(psi).x)` has `A_n = A i^n exp(-i n psi)`.
pub fn regular_coeffs(field: &IncidentField, n_max: usize) -> RegularCoeffs {
    match field.plane_parts() {
        Some(((ap, psi_p), (as_, psi_s))) => {
            let expand = |a: Complex64, psi: f64| -> Vec<Complex64> {
                (-(n_max as i32)..=n_max as i32)
                    .map(|n| if a == ZERO { ZERO } else { a * i_pow(n as i64) * phase(-(n as f64) * psi) })
                    .collect()
            };
            RegularCoeffs { n_max, p: expand(ap, psi_p), s: expand(as_, psi_s) }
        }
        None => {
            let IncidentField::General(c) = field else { unreachable!() };
            let mut out = RegularCoeffs::zeros(n_max);
            for n in -(n_max as i32)..=n_max as i32 {
                let i = (n + n_max as i32) as usize;
                out.p[i] = c.p(n);
                out.s[i] = c.s(n);
            }
            out
        }
    }
}

/// Value, gradient and Hessian of a scalar potential at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialJet {
    pub value: Complex64,
    pub grad: [Complex64; 2],
    pub hess: [[Complex64; 2]; 2],
}

impl PotentialJet {
    pub const ZERO: PotentialJet = PotentialJet { value: ZERO, grad: [ZERO; 2], hess: [[ZERO; 2]; 2] };

    fn plane(amplitude: Complex64, angle: f64, k: f64, x: PlaneVector) -> Self {
        if amplitude == ZERO {
            return Self::ZERO;
        }
        let d = PlaneVector::unit(angle);
        let value = amplitude * phase(k * d.dot(x));
        let dir = [d.x, d.y];
        let ik = Complex64::new(0.0, k);
        let mut jet = Self { value, grad: [ZERO; 2], hess: [[ZERO; 2]; 2] };
        for i in 0..2 {
            jet.grad[i] = ik * dir[i] * value;
            for j in 0..2 {
                jet.hess[i][j] = -(k * k) * dir[i] * dir[j] * value;
            }
        }
        jet
    }

    /// Jet of `sum_n A_n U_n^+(k x)` using the ladder relations.
    fn regular_sum(coeffs: &[Complex64], n_max: usize, k: f64, x: PlaneVector) -> Result<Self> {
        if coeffs.iter().all(|c| *c == ZERO) {
            return Ok(Self::ZERO);
        }
        let kx = k * x;
        let seq = bessel_sequences(kx.norm(), n_max + 3)?;
        let theta = kx.arg();
        let u = |n: i32| seq.j(n) * phase(n as f64 * theta);
        let stencils: Vec<Vec<(i32, Complex64)>> =
            [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)].iter().map(|&(a, b)| ladder_stencil(a, b, k)).collect();
        let mut acc = [ZERO; 6];
        for (idx, &a) in coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let n = idx as i32 - n_max as i32;
            acc[0] += a * u(n);
            for (slot, st) in stencils.iter().enumerate() {
                acc[slot + 1] += a * st.iter().map(|&(s, c)| c * u(n + s)).sum::<Complex64>();
            }
        }
        Ok(Self {
            value: acc[0],
            grad: [acc[1], acc[2]],
            hess: [[acc[3], acc[4]], [acc[4], acc[5]]],
        })
    }
}

/// Jets of `(Phi_i, Psi_i)` at `x`.
pub fn potential_jets(field: &IncidentField, wn: &WaveNumbers, x: PlaneVector) -> Result<(PotentialJet, PotentialJet)> {
    match field {
        IncidentField::General(c) => Ok((
            PotentialJet::regular_sum(&c.p, c.n_max, wn.k_p, x)?,
            PotentialJet::regular_sum(&c.s, c.n_max, wn.k_s, x)?,
        )),
        _ => {
            let ((ap, pp), (as_, ps)) = field.plane_parts().expect("plane field");
            Ok((PotentialJet::plane(ap, pp, wn.k_p, x), PotentialJet::plane(as_, ps, wn.k_s, x)))
        }
    }
}

/// `(Phi_i, Psi_i)` at `x`.
pub fn potentials(field: &IncidentField, wn: &WaveNumbers, x: PlaneVector) -> Result<(Complex64, Complex64)> {
    let (p, s) = potential_jets(field, wn, x)?;
    Ok((p.value, s.value))
}

/// Displacement `grad Phi + (Psi_y, -Psi_x)`.
pub fn displacement_from_jets(p: &PotentialJet, s: &PotentialJet) -> [Complex64; 2] {
    [p.grad[0] + s.grad[1], p.grad[1] - s.grad[0]]
}

/// Displacement gradient `[i][j] = du_i/dx_j`.
fn displacement_gradient(p: &PotentialJet, s: &PotentialJet) -> [[Complex64; 2]; 2] {
    [
        [p.hess[0][0] + s.hess[1][0], p.hess[0][1] + s.hess[1][1]],
        [p.hess[1][0] - s.hess[0][0], p.hess[1][1] - s.hess[0][1]],
    ]
}

/// Cartesian stress divided by `mu`.
pub fn stress_over_mu_from_jets(material: &Material, p: &PotentialJet, s: &PotentialJet) -> [[Complex64; 2]; 2] {
    let g = displacement_gradient(p, s);
    let ratio = material.lambda() / material.mu();
    let div = g[0][0] + g[1][1];
    [
        [ratio * div + 2.0 * g[0][0], g[0][1] + g[1][0]],
        [g[0][1] + g[1][0], ratio * div + 2.0 * g[1][1]],
    ]
}

pub fn incident_displacement(field: &IncidentField, wn: &WaveNumbers, x: PlaneVector) -> Result<[Complex64; 2]> {
    let (p, s) = potential_jets(field, wn, x)?;
    Ok(displacement_from_jets(&p, &s))
}

/// Cartesian incident stress `sigma_ij`.
pub fn incident_stress(
    field: &IncidentField,
    material: &Material,
    wn: &WaveNumbers,
    x: PlaneVector,
) -> Result<[[Complex64; 2]; 2]> {
    let (p, s) = potential_jets(field, wn, x)?;
    let t = stress_over_mu_from_jets(material, &p, &s);
    Ok(t.map(|row| row.map(|v| v * material.mu())))
}

/// Displacement and traction components on an arc, in the polar frame
/// centred on the arc's source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarTrace {
    pub u_r: Complex64,
    pub u_theta: Complex64,
    pub sigma_rr_over_mu: Complex64,
    pub sigma_rtheta_over_mu: Complex64,
}

pub fn polar_trace(
    field: &IncidentField,
    material: &Material,
    wn: &WaveNumbers,
    arc: &SourceArc,
    theta: f64,
) -> Result<PolarTrace> {
    let y = arc.point(theta);
    let (p, s) = potential_jets(field, wn, y)?;
    let u = displacement_from_jets(&p, &s);
    let t = stress_over_mu_from_jets(material, &p, &s);
    let (c, sn) = (theta.cos(), theta.sin());
    let er = [c, sn];
    let et = [-sn, c];
    let mut trace = PolarTrace { u_r: ZERO, u_theta: ZERO, sigma_rr_over_mu: ZERO, sigma_rtheta_over_mu: ZERO };
    for i in 0..2 {
        trace.u_r += er[i] * u[i];
        trace.u_theta += et[i] * u[i];
        for j in 0..2 {
            trace.sigma_rr_over_mu += er[i] * t[i][j] * er[j];
            trace.sigma_rtheta_over_mu += er[i] * t[i][j] * et[j];
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{wavenumbers_for, FrequencySelector};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn aluminum() -> Material {
        Material::from_lame(5.1e10, 2.6e10, 2700.0).unwrap()
    }

    fn setup(k_p: f64) -> (Material, WaveNumbers) {
        let m = aluminum();
        let wn = wavenumbers_for(&m, FrequencySelector::KP, k_p).unwrap();
        (m, wn)
    }

    #[test]
    fn plane_coefficients() {
        let c = regular_coeffs(&IncidentField::plane_p(1.0, 0.0), 3);
        assert!(close(c.p(2), Complex64::new(-1.0, 0.0), 1e-15));
        let c = regular_coeffs(&IncidentField::plane_p(1.0, PI), 3);
        assert!(close(c.p(1), Complex64::new(0.0, -1.0), 1e-15));
        let c = regular_coeffs(&IncidentField::plane_s(0.0, 0.4), 5);
        assert!(c.s_values().iter().all(|v| *v == ZERO));
        assert_eq!(c.p(9), ZERO);
    }

    #[test]
    fn plane_potentials() {
        let (_, wn) = setup(2.0);
        let f = IncidentField::plane_p(1.0, 0.0);
        let (phi, psi) = potentials(&f, &wn, PlaneVector::ZERO).unwrap();
        assert_eq!(phi, Complex64::new(1.0, 0.0));
        assert_eq!(psi, ZERO);
        let psi_dir = 0.3;
        let f = IncidentField::plane_p(1.0, psi_dir);
        let (phi, _) = potentials(&f, &wn, 1.7 * PlaneVector::unit(psi_dir)).unwrap();
        assert!(close(phi, phase(wn.k_p * 1.7), 1e-14));
    }

    #[test]
    fn general_expansion_reproduces_plane_wave() {
        let (_, wn) = setup(2.0);
        let plane = IncidentField::plane_p(1.0, 7f64.to_radians());
        let general = IncidentField::General(regular_coeffs(&plane, 60));
        for i in 0..25 {
            let x = PlaneVector::from_polar(3.0 / wn.k_p * (i as f64 / 24.0), 0.37 * i as f64);
            let (a, _) = potential_jets(&plane, &wn, x).unwrap();
            let (b, _) = potential_jets(&general, &wn, x).unwrap();
            assert!(close(b.value, a.value, 1e-10));
            for d in 0..2 {
                assert!(close(b.grad[d], a.grad[d], 1e-10 * wn.k_p));
                for e in 0..2 {
                    assert!(close(b.hess[d][e], a.hess[d][e], 1e-10 * wn.k_p * wn.k_p));
                }
            }
        }
        let plane_s = IncidentField::plane_s(1.0, 1.1);
        let general_s = IncidentField::General(regular_coeffs(&plane_s, 60));
        let x = PlaneVector::new(0.4, -0.9);
        let a = incident_displacement(&plane_s, &wn, x).unwrap();
        let b = incident_displacement(&general_s, &wn, x).unwrap();
        for d in 0..2 {
            assert!(close(b[d], a[d], 1e-10 * wn.k_s));
        }
    }

    #[test]
    fn plane_displacements() {
        let (_, wn) = setup(2.0);
        let x = PlaneVector::new(0.6, -0.2);
        let u = incident_displacement(&IncidentField::plane_p(1.0, 0.0), &wn, x).unwrap();
        assert!(close(u[0], Complex64::new(0.0, wn.k_p) * phase(wn.k_p * 0.6), 1e-14));
        assert_eq!(u[1].norm(), 0.0);
        let u = incident_displacement(&IncidentField::plane_s(1.0, 0.0), &wn, x).unwrap();
        assert_eq!(u[0].norm(), 0.0);
        assert!(close(u[1], Complex64::new(0.0, -wn.k_s) * phase(wn.k_s * 0.6), 1e-14));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (_, wn) = setup(2.0);
        let h = 1e-6 / wn.k_s;
        let fields = [
            IncidentField::Combined {
                p_amplitude: Complex64::new(0.7, 0.2),
                p_angle: 0.3,
                s_amplitude: Complex64::new(-0.1, 1.0),
                s_angle: 2.0,
            },
            IncidentField::General(regular_coeffs(&IncidentField::plane_p(1.0, 0.9), 40)),
        ];
        for f in &fields {
            let x = PlaneVector::new(0.35, 0.8);
            let (p, s) = potential_jets(f, &wn, x).unwrap();
            for (axis, e) in [PlaneVector::new(1.0, 0.0), PlaneVector::new(0.0, 1.0)].into_iter().enumerate() {
                let (pp, sp) = potentials(f, &wn, x + h * e).unwrap();
                let (pm, sm) = potentials(f, &wn, x - h * e).unwrap();
                let scale = wn.k_s;
                assert!(((pp - pm) / (2.0 * h) - p.grad[axis]).norm() < 1e-8 * scale);
                assert!(((sp - sm) / (2.0 * h) - s.grad[axis]).norm() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let (_, wn) = setup(3.0);
        let f = IncidentField::General(regular_coeffs(
            &IncidentField::Combined {
                p_amplitude: Complex64::new(1.0, 0.0),
                p_angle: 0.5,
                s_amplitude: Complex64::new(0.3, 0.0),
                s_angle: 4.0,
            },
            50,
        ));
        let h = 1e-5 / wn.k_s;
        let x = PlaneVector::new(-0.5, 0.25);
        let (p, s) = potential_jets(&f, &wn, x).unwrap();
        for (axis, e) in [PlaneVector::new(1.0, 0.0), PlaneVector::new(0.0, 1.0)].into_iter().enumerate() {
            let (pp, sp) = potential_jets(&f, &wn, x + h * e).unwrap();
            let (pm, sm) = potential_jets(&f, &wn, x - h * e).unwrap();
            for i in 0..2 {
                let fd_p = (pp.grad[i] - pm.grad[i]) / (2.0 * h);
                let fd_s = (sp.grad[i] - sm.grad[i]) / (2.0 * h);
                assert!((fd_p - p.hess[i][axis]).norm() < 1e-6 * wn.k_s * wn.k_s);
                assert!((fd_s - s.hess[i][axis]).norm() < 1e-6 * wn.k_s * wn.k_s);
            }
        }
    }

    /// Polar trace from the textbook polar formulas, with polar derivatives
    /// of the potentials obtained from the Cartesian jets by the chain rule.
    fn polar_oracle(material: &Material, wn: &WaveNumbers, f: &IncidentField, arc: &SourceArc, theta: f64) -> PolarTrace {
        let y = arc.point(theta);
        let (p, s) = potential_jets(f, wn, y).unwrap();
        let r = arc.radius;
        let (c, sn) = (theta.cos(), theta.sin());
        // derivatives in the arc frame: d_r, d_theta, d_rr, d_rtheta, d_thetatheta
        let polar = |j: &PotentialJet| {
            let d_r = c * j.grad[0] + sn * j.grad[1];
            let d_t = r * (-sn * j.grad[0] + c * j.grad[1]);
            let d_rr = c * c * j.hess[0][0] + 2.0 * c * sn * j.hess[0][1] + sn * sn * j.hess[1][1];
            let d_rt = r * (-sn * c * j.hess[0][0] + (c * c - sn * sn) * j.hess[0][1] + sn * c * j.hess[1][1])
                + (-sn * j.grad[0] + c * j.grad[1]);
            let d_tt = r * r * (sn * sn * j.hess[0][0] - 2.0 * sn * c * j.hess[0][1] + c * c * j.hess[1][1])
                - r * d_r;
            (j.value, d_r, d_t, d_rr, d_rt, d_tt)
        };
        let (phi, phi_r, phi_t, phi_rr, phi_rt, _) = polar(&p);
        let (_, psi_r, psi_t, psi_rr, psi_rt, psi_tt) = polar(&s);
        let lm = material.lambda() / material.mu();
        PolarTrace {
            u_r: phi_r + psi_t / r,
            u_theta: phi_t / r - psi_r,
            sigma_rr_over_mu: -lm * wn.k_p * wn.k_p * phi + 2.0 * (phi_rr + psi_rt / r - psi_t / (r * r)),
            sigma_rtheta_over_mu: 2.0 * (phi_rt / r - phi_t / (r * r)) + (psi_tt / (r * r) - psi_rr + psi_r / r),
        }
    }

    #[test]
    fn trace_matches_polar_formulas() {
        let (m, wn) = setup(2.0);
        let arc = SourceArc::new(PlaneVector::new(1.0, 0.2), 0.8, 2.0, 4.0).unwrap();
        let f = IncidentField::Combined {
            p_amplitude: Complex64::new(1.0, 0.5),
            p_angle: 0.12,
            s_amplitude: Complex64::new(-0.4, 0.9),
            s_angle: 1.9,
        };
        for i in 0..9 {
            let theta = 2.0 + 0.25 * i as f64;
            let got = polar_trace(&f, &m, &wn, &arc, theta).unwrap();
            let want = polar_oracle(&m, &wn, &f, &arc, theta);
            let scale = wn.k_s * wn.k_s;
            assert!((got.u_r - want.u_r).norm() < 1e-12 * scale);
            assert!((got.u_theta - want.u_theta).norm() < 1e-12 * scale);
            assert!((got.sigma_rr_over_mu - want.sigma_rr_over_mu).norm() < 1e-11 * scale);
            assert!((got.sigma_rtheta_over_mu - want.sigma_rtheta_over_mu).norm() < 1e-11 * scale);
        }
    }

    #[test]
    fn plane_p_normal_stress_closed_form() {
        let (m, wn) = setup(2.5);
        let psi = 0.4;
        let f = IncidentField::plane_p(1.0, psi);
        let arc = SourceArc::new(PlaneVector::new(0.0, 1.0), 0.5, 3.0, 5.0).unwrap();
        for theta in [3.0, 3.7, 4.4] {
            let y = arc.point(theta);
            let phi = phase(wn.k_p * PlaneVector::unit(psi).dot(y));
            let cos = (theta - psi).cos();
            // Phi_rr = -k_p^2 cos^2(theta - psi) Phi for a plane wave
            let want = -m.lambda() * wn.k_p * wn.k_p * phi - 2.0 * m.mu() * wn.k_p * wn.k_p * cos * cos * phi;
            let got = polar_trace(&f, &m, &wn, &arc, theta).unwrap();
            assert!(close(got.sigma_rr_over_mu * m.mu(), want, 1e-12));
            let u_theta = Complex64::new(0.0, wn.k_p) * phi * (psi - theta).sin();
            assert!(close(got.u_theta, u_theta, 1e-12));
        }
    }

    #[test]
    fn zero_field_trace() {
        let (m, wn) = setup(2.0);
        let arc = SourceArc::new(PlaneVector::new(1.0, 0.0), 0.5, 2.0, 4.0).unwrap();
        let t = polar_trace(&IncidentField::General(RegularCoeffs::zeros(4)), &m, &wn, &arc, 3.0).unwrap();
        assert_eq!(t, PolarTrace { u_r: ZERO, u_theta: ZERO, sigma_rr_over_mu: ZERO, sigma_rtheta_over_mu: ZERO });
    }

    #[test]
    fn cartesian_stress_satisfies_equilibrium() {
        // div sigma = -rho omega^2 u, checked by central differences
        let (m, wn) = setup(2.0);
        let f = IncidentField::Combined {
            p_amplitude: Complex64::new(1.0, 0.0),
            p_angle: 0.7,
            s_amplitude: Complex64::new(0.0, 2.0),
            s_angle: -0.3,
        };
        let x = PlaneVector::new(0.2, 0.9);
        let h = 1e-5 / wn.k_s;
        let ex = PlaneVector::new(h, 0.0);
        let ey = PlaneVector::new(0.0, h);
        let sxp = incident_stress(&f, &m, &wn, x + ex).unwrap();
        let sxm = incident_stress(&f, &m, &wn, x - ex).unwrap();
        let syp = incident_stress(&f, &m, &wn, x + ey).unwrap();
        let sym = incident_stress(&f, &m, &wn, x - ey).unwrap();
        let u = incident_displacement(&f, &wn, x).unwrap();
        let rho_w2 = m.rho() * wn.omega * wn.omega;
        for i in 0..2 {
            let div = (sxp[i][0] - sxm[i][0]) / (2.0 * h) + (syp[i][1] - sym[i][1]) / (2.0 * h);
            assert!((div + rho_w2 * u[i]).norm() < 1e-6 * rho_w2 * u[i].norm().max(1.0));
        }
    }

    #[test]
    fn coeff_storage_checks_lengths() {
        assert!(RegularCoeffs::new(2, vec![ZERO; 5], vec![ZERO; 4]).is_err());
        let mut c = RegularCoeffs::zeros(2);
        c.set_p(-2, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(c.p(-2), Complex64::new(1.0, 0.0));
        assert!(c.set_s(3, ZERO).is_err());
    }

    proptest! {
        #[test]
        fn displacement_is_linear(a in -3.0f64..3.0, psi in 0.0f64..6.3, x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let (_, wn) = setup(2.0);
            let f = IncidentField::Combined {
                p_amplitude: Complex64::new(1.0, 0.3), p_angle: psi,
                s_amplitude: Complex64::new(0.2, -0.5), s_angle: psi + 1.0,
            };
            let p = PlaneVector::new(x, y);
            let u1 = incident_displacement(&f, &wn, p).unwrap();
            let u2 = incident_displacement(&f.scaled(Complex64::new(a, 0.0)), &wn, p).unwrap();
            for d in 0..2 {
                prop_assert!((u2[d] - a * u1[d]).norm() <= 1e-12 * (1.0 + u2[d].norm()));
            }
        }
    }
}

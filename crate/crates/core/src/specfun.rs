//! Integer-order Bessel and Hankel sequences and the cylindrical wave
//! functions built on them.
//!
//! `J_n` comes from Miller's downward recurrence normalised with
//! `J_0 + 2 * sum_k J_2k = 1`; `Y_0` and `Y_1` come from the Neumann series
//! over the same normalised `J` values, and higher `Y_n` from the (stable)
//! upward recurrence. Hankel functions are of the first kind only,
//! `H_n = J_n + i Y_n`, matching the `exp(-i omega t)` time convention.
//!
//! The wave functions use a fixed angle branch, `arg z` in `[0, 2 pi)`:
//!
//! ```text
//! U_n^{+-}(z) = J_n(|z|) exp(+-i n arg z)
//! V_n^{+-}(z) = H_n(|z|) exp(+-i n arg z)
//! ```

use std::f64::consts::{FRAC_2_PI, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_ABOVE: f64 = 1e250;

/// A point or displacement in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct PlaneVector {
    pub x: f64,
    pub y: f64,
}

impl PlaneVector {
    pub const ZERO: PlaneVector = PlaneVector { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { x: r * c, y: r * s }
    }

    /// Unit vector `(cos t, sin t)`.
    pub fn unit(theta: f64) -> Self {
        Self::from_polar(1.0, theta)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Polar angle in `[0, 2 pi)`; the zero vector maps to 0.
    pub fn arg(self) -> f64 {
        normalize_angle(self.y.atan2(self.x))
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotation about the origin by `angle` radians.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for PlaneVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for PlaneVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for PlaneVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl Mul<PlaneVector> for f64 {
    type Output = PlaneVector;
    fn mul(self, v: PlaneVector) -> PlaneVector {
        PlaneVector::new(self * v.x, self * v.y)
    }
}

/// Maps any finite angle into `[0, 2 pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// `(-1)^n` for any integer.
#[inline]
pub fn parity(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `i^n` for any integer.
#[inline]
pub fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Which cylinder function a derivative is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylKind {
    J,
    Y,
}

/// `J_0..J_max` and (for `x > 0`) `Y_0..Y_max` at a single real argument.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselSeq {
    x: f64,
    j: Vec<f64>,
    y: Option<Vec<f64>>,
}

/// Computes `J_n(x)` and `Y_n(x)` for `0 <= n <= order_max`.
///
/// At `x = 0` only the `J` sequence (a Kronecker delta) is returned.
pub fn bessel_sequences(x: f64, order_max: usize) -> Result<BesselSeq> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("Bessel argument must be finite, got {x}")));
    }
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!("Bessel argument must be non-negative, got {x}")));
    }
    if x == 0.0 {
        let mut j = vec![0.0; order_max + 1];
        j[0] = 1.0;
        return Ok(BesselSeq { x, j, y: None });
    }

    let full = miller_j(x, order_max);
    let y = neumann_y(x, &full, order_max);
    let mut j = full;
    j.truncate(order_max + 1);
    Ok(BesselSeq { x, j, y: Some(y) })
}

/// Start order for the downward recurrence. The `x^(1/3)` term covers the
/// turning-point layer, past which `J_n(x)` decays like `exp(-c d^1.5 / sqrt x)`.
fn miller_start(x: f64, order_max: usize) -> usize {
    let base = order_max.max(x.ceil() as usize);
    let start = base + 15 + (12.0 * x.cbrt()).ceil() as usize;
    start + (start % 2)
}

/// Normalised `J_0..J_start` (the tail is kept for the Neumann series).
fn miller_j(x: f64, order_max: usize) -> Vec<f64> {
    let start = miller_start(x, order_max);
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-30;
    for k in (1..=start).rev() {
        let next = (2.0 * k as f64 / x) * j[k] - j[k + 1];
        j[k - 1] = next;
        if next.abs() > RESCALE_ABOVE {
            for v in &mut j[k - 1..] {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    let mut norm = j[0];
    for v in j.iter().skip(2).step_by(2) {
        norm += 2.0 * v;
    }
    for v in &mut j {
        *v /= norm;
    }
    j
}

fn neumann_y(x: f64, j: &[f64], order_max: usize) -> Vec<f64> {
    let log_term = (x / 2.0).ln() + EULER_GAMMA;
    let last = j.len() - 2;

    // (pi/2) Y_0 = (ln(x/2) + gamma) J_0 - 2 sum_k (-1)^k J_2k / k
    let mut s0 = 0.0;
    // (pi/2) Y_1 = (ln(x/2) + gamma) J_1 - J_0 / x + sum_k (-1)^k (J_2k-1 - J_2k+1) / k
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k < last {
        let sign = parity(k as i64);
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * (log_term * j[0] - 2.0 * s0);
    let y1 = FRAC_2_PI * (log_term * j[1] - j[0] / x + s1);

    let mut y = Vec::with_capacity(order_max + 1);
    y.push(y0);
    if order_max >= 1 {
        y.push(y1);
    }
    for n in 1..order_max {
        let next = (2.0 * n as f64 / x) * y[n] - y[n - 1];
        y.push(next);
    }
    y
}

impl BesselSeq {
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn order_max(&self) -> usize {
        self.j.len() - 1
    }

    pub fn j_values(&self) -> &[f64] {
        &self.j
    }

    pub fn y_values(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    fn check(&self, n: i32) -> Result<usize> {
        let idx = n.unsigned_abs() as usize;
        if idx > self.order_max() {
            return Err(Error::Range { requested: n as i64, available: self.order_max() });
        }
        Ok(idx)
    }

    /// `J_n(x)` for any integer order within range, using `J_-n = (-1)^n J_n`.
    pub fn j(&self, n: i32) -> f64 {
        let idx = n.unsigned_abs() as usize;
        let v = self.j[idx];
        if n < 0 {
            parity(n as i64) * v
        } else {
            v
        }
    }

    /// `Y_n(x)`; panics when `x = 0` or out of range.
    pub fn y(&self, n: i32) -> f64 {
        let y = self.y.as_ref().expect("Y_n is singular at x = 0");
        let v = y[n.unsigned_abs() as usize];
        if n < 0 {
            parity(n as i64) * v
        } else {
            v
        }
    }

    pub fn try_y(&self, n: i32) -> Result<f64> {
        if self.y.is_none() {
            return Err(Error::Domain("Y_n requested at x = 0".into()));
        }
        self.check(n)?;
        Ok(self.y(n))
    }

    /// `H_n^(1)(x) = J_n + i Y_n`.
    pub fn h(&self, n: i32) -> Complex64 {
        Complex64::new(self.j(n), self.y(n))
    }

    /// `J_n'(x)`; needs `|n| + 1 <= order_max`.
    pub fn jp(&self, n: i32) -> f64 {
        0.5 * (self.j(n - 1) - self.j(n + 1))
    }

    pub fn yp(&self, n: i32) -> f64 {
        0.5 * (self.y(n - 1) - self.y(n + 1))
    }

    pub fn hp(&self, n: i32) -> Complex64 {
        0.5 * (self.h(n - 1) - self.h(n + 1))
    }

    /// Checked derivative `C_n' = (C_{n-1} - C_{n+1}) / 2`.
    pub fn derivative(&self, kind: CylKind, n: i32) -> Result<f64> {
        let idx = self.check(n)?;
        if idx + 1 > self.order_max() {
            return Err(Error::Range { requested: n as i64 + n.signum() as i64, available: self.order_max() });
        }
        match kind {
            CylKind::J => Ok(self.jp(n)),
            CylKind::Y => {
                if self.y.is_none() {
                    return Err(Error::Domain("Y_n' requested at x = 0".into()));
                }
                Ok(self.yp(n))
            }
        }
    }
}

/// Derivative of `J_n` or `Y_n` read off a precomputed sequence.
pub fn cyl_derivative(seq: &BesselSeq, kind: CylKind, n: i32) -> Result<f64> {
    seq.derivative(kind, n)
}

/// Regular (`U`) or outgoing (`V`) wave function, optionally differentiated
/// in the radial argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveKind {
    U,
    V,
    UPrime,
    VPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Evaluates `U_n^+-`, `V_n^+-` or their primed variants at `z`.
pub fn wavefun(kind: WaveKind, sign: Sign, n: i32, z: PlaneVector) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(Error::InvalidArgument("wave function argument must be finite".into()));
    }
    let r = z.norm();
    let singular = matches!(kind, WaveKind::V | WaveKind::VPrime);
    if singular && r == 0.0 {
        return Err(Error::SingularPoint("V_n evaluated at the origin".into()));
    }
    let seq = bessel_sequences(r, n.unsigned_abs() as usize + 1)?;
    let radial = match kind {
        WaveKind::U => Complex64::new(seq.j(n), 0.0),
        WaveKind::UPrime => Complex64::new(seq.jp(n), 0.0),
        WaveKind::V => seq.h(n),
        WaveKind::VPrime => seq.hp(n),
    };
    Ok(radial * phase(sign.factor() * n as f64 * z.arg()))
}

/// `exp(i t)`.
#[inline]
pub fn phase(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, t)
}

/// Coefficients of a Cartesian partial derivative in terms of shifted
/// cylinder waves.
///
/// For any cylinder function `Z`, with `W_n(x) = Z_n(k|x|) exp(i n arg x)`,
///
/// ```text
/// d_x^a d_y^b W_n = sum_(s, c) c * W_{n+s}
/// ```
///
/// follows from the ladder relations `(d_x + i d_y) W_n = -k W_{n+1}` and
/// `(d_x - i d_y) W_n = k W_{n-1}`.
pub fn ladder_stencil(a: u32, b: u32, k: f64) -> Vec<(i32, Complex64)> {
    let order = (a + b) as usize;
    // index by shift + order
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * order + 1];
    // d_x = (D+ + D-)/2 and d_y = (D+ - D-)/(2i); D+^p D-^q W_n = (-k)^p k^q W_{n+p-q}
    let pre = 0.5f64.powi(a as i32) * 0.5f64.powi(b as i32);
    let inv_i_pow_b = i_pow(-(b as i64));
    for j in 0..=a {
        for m in 0..=b {
            let p = j + m;
            let q = (a - j) + (b - m);
            let comb = binomial(a, j) * binomial(b, m) * parity((b - m) as i64);
            let mag = (-k).powi(p as i32) * k.powi(q as i32);
            let shift = p as i32 - q as i32;
            coeffs[(shift + order as i32) as usize] += Complex64::new(comb * mag * pre, 0.0) * inv_i_pow_b;
        }
    }
    coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, c)| c.norm() != 0.0)
        .map(|(i, c)| (i as i32 - order as i32, c))
        .collect()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Partial sum of the Jacobi-Anger expansion
/// `exp(i alpha cos theta) = sum_n i^n J_n(alpha) exp(i n theta)` over `|n| <= terms`.
pub fn jacobi_anger_sum(alpha: f64, theta: f64, terms: usize) -> Result<Complex64> {
    let seq = bessel_sequences(alpha.abs(), terms)?;
    let sign = if alpha < 0.0 { -1.0 } else { 1.0 };
    let mut sum = Complex64::new(0.0, 0.0);
    for n in -(terms as i32)..=terms as i32 {
        let jn = seq.j(n) * if n % 2 != 0 { sign } else { 1.0 };
        sum += i_pow(n as i64) * jn * phase(n as f64 * theta);
    }
    Ok(sum)
}

/// Right-hand side of the Graf addition theorem for `V_l^+(y - x)`,
/// truncated to `|n| <= terms`:
///
/// ```text
/// |y| > |x|:  sum_n V_n^+(y) U_{n-l}^-(x)
/// |y| < |x|:  sum_n U_n^+(y) V_{n-l}^-(x)
/// ```
pub fn graf_sum(l: i32, y: PlaneVector, x: PlaneVector, terms: usize) -> Result<Complex64> {
    let (ry, rx) = (y.norm(), x.norm());
    if ry == rx {
        return Err(Error::Domain("Graf translation needs |y| != |x|".into()));
    }
    let orders = terms + l.unsigned_abs() as usize + 1;
    let sy = bessel_sequences(ry, orders)?;
    let sx = bessel_sequences(rx, orders)?;
    let (ay, ax) = (y.arg(), x.arg());
    let mut sum = Complex64::new(0.0, 0.0);
    for n in -(terms as i32)..=terms as i32 {
        let m = n - l;
        let term = if ry > rx {
            sy.h(n) * sx.j(m)
        } else {
            sx.h(m) * sy.j(n)
        };
        sum += term * phase(n as f64 * ay - m as f64 * ax);
    }
    Ok(sum)
}

/// The Wronskian `J_n Y_n' - J_n' Y_n = 2 / (pi x)`.
pub fn wronskian_jy(x: f64) -> f64 {
    2.0 / (PI * x)
}

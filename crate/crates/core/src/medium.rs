//! Isotropic elastic medium, dispersion relations and the in-plane Green
//! tensor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{bessel_sequences, ladder_stencil, phase, PlaneVector};

/// Poisson ratios at or above this are rejected; `kappa` diverges at 1/2.
pub const NU_LIMIT: f64 = 0.4999;

/// Lamé constants and density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    lambda: f64,
    mu: f64,
    rho: f64,
}

impl Material {
    pub fn from_lame(lambda: f64, mu: f64, rho: f64) -> Result<Self> {
        if ![lambda, mu, rho].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMaterial("material constants must be finite".into()));
        }
        if mu <= 0.0 {
            return Err(Error::InvalidMaterial(format!("shear modulus must be positive, got {mu}")));
        }
        if lambda + 2.0 * mu <= 0.0 {
            return Err(Error::InvalidMaterial("lambda + 2 mu must be positive".into()));
        }
        if rho <= 0.0 {
            return Err(Error::InvalidMaterial(format!("density must be positive, got {rho}")));
        }
        let m = Self { lambda, mu, rho };
        let nu = m.nu();
        if nu <= -1.0 || nu >= NU_LIMIT {
            return Err(Error::InvalidMaterial(format!("Poisson ratio {nu} outside (-1, {NU_LIMIT})")));
        }
        Ok(m)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c_p(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho).sqrt()
    }

    pub fn c_s(&self) -> f64 {
        (self.mu / self.rho).sqrt()
    }

    /// Poisson's ratio of the plane-strain medium, `lambda / (2 (lambda + mu))`.
    pub fn nu(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }

    /// `k_s / k_p = c_p / c_s`.
    pub fn kappa(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.mu).sqrt()
    }
}

/// Builds a material from wave speeds and density.
pub fn material_from_speeds(c_p: f64, c_s: f64, rho: f64) -> Result<Material> {
    if !(c_s > 0.0) {
        return Err(Error::InvalidMaterial(format!("shear speed must be positive, got {c_s}")));
    }
    if !(c_p > c_s * (4.0f64 / 3.0).sqrt()) {
        return Err(Error::InvalidMaterial(format!(
            "c_p = {c_p} must exceed c_s * sqrt(4/3) = {}",
            c_s * (4.0f64 / 3.0).sqrt()
        )));
    }
    let mu = rho * c_s * c_s;
    let lambda = rho * (c_p * c_p - 2.0 * c_s * c_s);
    Material::from_lame(lambda, mu, rho)
}

/// Angular frequency with the two derived wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveNumbers {
    pub omega: f64,
    pub k_p: f64,
    pub k_s: f64,
}

/// Which quantity fixes the frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencySelector {
    Omega,
    KP,
    KS,
}

pub fn wavenumbers_for(material: &Material, selector: FrequencySelector, value: f64) -> Result<WaveNumbers> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(Error::InvalidArgument(format!("frequency selector value must be positive, got {value}")));
    }
    let (c_p, c_s) = (material.c_p(), material.c_s());
    let omega = match selector {
        FrequencySelector::Omega => value,
        FrequencySelector::KP => value * c_p,
        FrequencySelector::KS => value * c_s,
    };
    let kappa = material.kappa();
    let (k_p, k_s) = match selector {
        FrequencySelector::Omega => (omega / c_p, omega / c_s),
        FrequencySelector::KP => (value, kappa * value),
        FrequencySelector::KS => (value / kappa, value),
    };
    Ok(WaveNumbers { omega, k_p, k_s })
}

/// Cartesian partials `d_x^a d_y^b` of `G_alpha = H_0(k |x|) / (4i)` for all
/// `a + b <= 3`, indexed `[a][b]`.
fn scalar_green_partials(k: f64, x: PlaneVector) -> Result<[[Complex64; 4]; 4]> {
    let r = x.norm();
    let seq = bessel_sequences(k * r, 3)?;
    let theta = x.arg();
    let wave = |n: i32| seq.h(n) * phase(n as f64 * theta);
    let quarter_over_i = Complex64::new(0.0, -0.25);
    let mut out = [[Complex64::new(0.0, 0.0); 4]; 4];
    for a in 0..4u32 {
        for b in 0..(4 - a) {
            out[a as usize][b as usize] = ladder_stencil(a, b, k)
                .into_iter()
                .map(|(s, c)| c * wave(s))
                .sum::<Complex64>()
                * quarter_over_i;
        }
    }
    Ok(out)
}

/// Partial derivative index: one slot per Cartesian axis.
fn partial(p: &[[Complex64; 4]; 4], axes: &[usize]) -> Complex64 {
    let a = axes.iter().filter(|&&i| i == 0).count();
    p[a][axes.len() - a]
}

/// Green tensor `G_ik(x)` (displacement `i` due to a unit force along `k`).
pub fn green_tensor(material: &Material, wn: &WaveNumbers, x: PlaneVector) -> Result<[[Complex64; 2]; 2]> {
    if x.norm() == 0.0 {
        return Err(Error::SingularPoint("Green tensor evaluated at the source point".into()));
    }
    let gs = scalar_green_partials(wn.k_s, x)?;
    let gp = scalar_green_partials(wn.k_p, x)?;
    let scale = 1.0 / (material.mu() * wn.k_s * wn.k_s);
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            let mut v = partial(&gs, &[i, k]) - partial(&gp, &[i, k]);
            if i == k {
                v += wn.k_s * wn.k_s * gs[0][0];
            }
            g[i][k] = v * scale;
        }
    }
    Ok(g)
}

/// Stress of the Green displacement, `Sigma_ijk = C_ijpq G_pk,q`.
pub fn green_stress(material: &Material, wn: &WaveNumbers, x: PlaneVector) -> Result<[[[Complex64; 2]; 2]; 2]> {
    if x.norm() == 0.0 {
        return Err(Error::SingularPoint("Green stress evaluated at the source point".into()));
    }
    let gs = scalar_green_partials(wn.k_s, x)?;
    let gp = scalar_green_partials(wn.k_p, x)?;
    let scale = 1.0 / (material.mu() * wn.k_s * wn.k_s);
    let k2 = wn.k_s * wn.k_s;
    // G_ik,q
    let grad = |i: usize, k: usize, q: usize| -> Complex64 {
        let mut v = partial(&gs, &[i, k, q]) - partial(&gp, &[i, k, q]);
        if i == k {
            v += k2 * partial(&gs, &[q]);
        }
        v * scale
    };
    let (lambda, mu) = (material.lambda(), material.mu());
    let mut sigma = [[[Complex64::new(0.0, 0.0); 2]; 2]; 2];
    for k in 0..2 {
        let div = grad(0, k, 0) + grad(1, k, 1);
        for i in 0..2 {
            for j in 0..2 {
                let mut v = mu * (grad(i, k, j) + grad(j, k, i));
                if i == j {
                    v += lambda * div;
                }
                sigma[i][j][k] = v;
            }
        }
    }
    Ok(sigma)
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elastocloak::diagnostics::{boundary_integral_field, constraint_report, default_n_range, nearfar_coeffs};
use elastocloak::field::{cloak_metrics, device_displacement, navier_residual, total_grid, GridBounds};
use elastocloak::geometry::{in_cloak, in_device, symmetric_config, CloakConfig};
use elastocloak::incident::{regular_coeffs, IncidentField};
use elastocloak::medium::{material_from_speeds, wavenumbers_for, FrequencySelector, Material, WaveNumbers};
use elastocloak::sources::{general_amplitudes, plane_amplitudes, quadrature_amplitudes, SourceAmplitudes};
use elastocloak::specfun::{
    bessel_sequences, graf_sum, jacobi_anger_sum, parity, phase, wavefun, wronskian_jy, PlaneVector, Sign, WaveKind,
};

const PSI_DEG: f64 = 7.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn aluminum() -> Material {
    material_from_speeds(6427.0, 3112.0, 2694.0).unwrap()
}

fn setup(count: usize, sel: FrequencySelector, k: f64) -> (CloakConfig, Material, WaveNumbers) {
    let mat = aluminum();
    let wn = wavenumbers_for(&mat, sel, k).unwrap();
    (symmetric_config(count, 1.0, None).unwrap(), mat, wn)
}

fn psi() -> f64 {
    PSI_DEG.to_radians()
}

fn vec_norm(u: [Complex64; 2]) -> f64 {
    (u[0].norm_sqr() + u[1].norm_sqr()).sqrt()
}

fn special_functions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut wr: f64 = 0.0;
    let mut rec: f64 = 0.0;
    let xs: Vec<f64> = [0.1, 1.0, 10.0, 60.0].into_iter().chain((0..40).map(|_| rng.gen_range(0.05..60.0))).collect();
    for &x in &xs {
        let s = bessel_sequences(x, 121).unwrap();
        let w = wronskian_jy(x);
        for n in 0..=120 {
            // beyond f64 range for Y at small x
            if s.y(n + 1).abs() >= 1e300 {
                break;
            }
            wr = wr.max(((s.j(n) * s.yp(n) - s.jp(n) * s.y(n) - w) / w).abs());
        }
        for n in 1..=120 {
            let r = s.j(n - 1) + s.j(n + 1) - (2.0 * n as f64 / x) * s.j(n);
            rec = rec.max(r.abs() / s.j(n).abs().max(1.0));
        }
    }
    let mut refl: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(-3..=3);
        let z = PlaneVector::from_polar(rng.gen_range(0.01..8.0), rng.gen_range(0.0..TAU));
        let a = wavefun(WaveKind::U, Sign::Plus, n, -z).unwrap();
        let b = parity(n as i64) * wavefun(WaveKind::U, Sign::Plus, n, z).unwrap();
        refl = refl.max((a - b).norm());
        let va = wavefun(WaveKind::V, Sign::Plus, n, -z).unwrap();
        let vb = parity(n as i64) * wavefun(WaveKind::V, Sign::Plus, n, z).unwrap();
        refl = refl.max((va - vb).norm() / vb.norm().max(1.0));
    }
    let mut ja: f64 = 0.0;
    for _ in 0..200 {
        let alpha = rng.gen_range(0.0..10.0);
        let theta = rng.gen_range(0.0..TAU);
        ja = ja.max((jacobi_anger_sum(alpha, theta, 40).unwrap() - phase(alpha * theta.cos())).norm());
    }
    Verdict {
        pass: wr <= 1e-12 && rec <= 1e-12 && refl <= 1e-12 && ja <= 1e-10,
        detail: format!("wronskian {wr:.1e}, recurrence {rec:.1e}, reflection {refl:.1e}, jacobi-anger {ja:.1e}"),
    }
}

fn graf() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let l = rng.gen_range(-4..=4);
        // 40 terms converge like (inner / outer radius)^40
        let outer = rng.gen_range(1.0..6.0);
        let inner = outer * rng.gen_range(0.01..0.3);
        let (ry, rx) = if rng.gen_bool(0.5) { (outer, inner) } else { (inner, outer) };
        let y = PlaneVector::from_polar(ry, rng.gen_range(0.0..TAU));
        let x = PlaneVector::from_polar(rx, rng.gen_range(0.0..TAU));
        let direct = wavefun(WaveKind::V, Sign::Plus, l, y - x).unwrap();
        let sum = graf_sum(l, y, x, 40).unwrap();
        worst = worst.max((sum - direct).norm() / direct.norm().max(1.0));
    }
    Verdict { pass: worst <= 1e-9, detail: format!("max error {worst:.1e} over 200 samples") }
}

fn relative_gap(closed: &SourceAmplitudes, config: &CloakConfig, mat: &Material, wn: &WaveNumbers, f: &IncidentField) -> f64 {
    let l_max = closed.l_max() as i32;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for m in 0..config.len() {
        for l in -l_max..=l_max {
            let (qp, qs) = quadrature_amplitudes(config, mat, wn, f, l, m).unwrap();
            diff = diff.max((qp - closed.p(m, l)).norm()).max((qs - closed.s(m, l)).norm());
            scale = scale.max(qp.norm()).max(qs.norm());
        }
    }
    diff / scale
}

fn oracle_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    for count in [3, 4, 8] {
        for k_p in [2.0, 5.0] {
            let (c, mat, wn) = setup(count, FrequencySelector::KP, k_p);
            for f in [IncidentField::plane_p(1.0, psi()), IncidentField::plane_s(1.0, psi())] {
                let closed = plane_amplitudes(&c, &mat, &wn, &f, 10, None).unwrap();
                worst = worst.max(relative_gap(&closed, &c, &mat, &wn, &f));
            }
            // the general route translates regular coefficients with (-1)^q
            let plane = IncidentField::plane_p(1.0, psi());
            let coeffs = regular_coeffs(&plane, 60);
            let general = general_amplitudes(&c, &mat, &wn, &coeffs, 10, None).unwrap();
            worst = worst.max(relative_gap(&general, &c, &mat, &wn, &IncidentField::General(coeffs)));
        }
    }
    Verdict { pass: worst <= 1e-8, detail: format!("max relative gap {worst:.1e}") }
}

fn largest_passing_order(n_range: &std::ops::RangeInclusive<i32>, res: &[f64], tol: f64) -> i32 {
    let ns: Vec<i32> = n_range.clone().collect();
    let mut bound = -1;
    for w in 0.. {
        let ok = ns.iter().zip(res).filter(|(n, _)| n.abs() <= w).all(|(_, r)| *r < tol);
        if !ok || w > *n_range.end() {
            break;
        }
        bound = w;
    }
    bound
}

fn paper_residuals() -> Verdict {
    let (c, mat, wn) = setup(8, FrequencySelector::KS, 5.0);
    let range = default_n_range(&c, &wn);
    let p = IncidentField::plane_p(1.0, psi());
    let bp = plane_amplitudes(&c, &mat, &wn, &p, 100, None).unwrap();
    let dp = nearfar_coeffs(&bp, &c, &wn, &p, range.clone()).unwrap();
    let rp = constraint_report(&dp);
    let s = IncidentField::plane_s(1.0, psi());
    let bs = plane_amplitudes(&c, &mat, &wn, &s, 100, None).unwrap();
    let ds = nearfar_coeffs(&bs, &c, &wn, &s, range.clone()).unwrap();
    let rs = constraint_report(&ds);
    let longitudinal = rp.max_near_p < 1e-4 && rp.max_near_s < 1e-7;
    let transverse = (1e-2..=1.0).contains(&rs.max_near_p);
    Verdict {
        pass: longitudinal && transverse,
        detail: format!(
            "n in {}..={}: longitudinal max P {:.1e} (< 1e-4 up to |n| = {}), max S {:.1e} (< 1e-7 up to |n| = {}); transverse max P {:.1e}",
            range.start(),
            range.end(),
            rp.max_near_p,
            largest_passing_order(&range, &dp.residual_near_p, 1e-4),
            rp.max_near_s,
            largest_passing_order(&range, &dp.residual_near_s, 1e-7),
            rs.max_near_p
        ),
    }
}

fn truncation_monotone() -> Verdict {
    let (c, mat, wn) = setup(3, FrequencySelector::KP, 2.0);
    let f = IncidentField::plane_p(1.0, psi());
    let mut maxima = Vec::new();
    for n in [5, 10, 20, 50] {
        let b = plane_amplitudes(&c, &mat, &wn, &f, n, None).unwrap();
        let g = total_grid(&f, &b, &c, &wn, GridBounds::square(2.0), (200, 200)).unwrap();
        maxima.push(cloak_metrics(&g).unwrap().cloak_max);
    }
    let pass = maxima.windows(2).all(|w| w[1] <= 2.0 * w[0]);
    let shown: Vec<String> = maxima.iter().map(|v| format!("{v:.3e}")).collect();
    Verdict { pass, detail: format!("cloak max |u|/k_p for N = 5, 10, 20, 50: {}", shown.join(", ")) }
}

fn cross_route() -> Verdict {
    let (c, mat, wn) = setup(3, FrequencySelector::KP, 2.0);
    let f = IncidentField::plane_p(1.0, psi());
    let b = plane_amplitudes(&c, &mat, &wn, &f, 30, Some(50)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < 20 {
        let x = PlaneVector::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        // strictly inside, away from the arcs
        let clear = c.arcs.iter().all(|a| (x - a.center).norm() > a.radius + 1e-3);
        if !in_cloak(&c, x).unwrap() || !clear {
            continue;
        }
        taken += 1;
        let md = device_displacement(&b, &c, &wn, x).unwrap();
        let bi = boundary_integral_field(&f, &c, &mat, &wn, x).unwrap();
        worst = worst.max(vec_norm([md[0] - bi[0], md[1] - bi[1]]) / vec_norm(bi));
    }
    Verdict { pass: worst <= 1e-6, detail: format!("max relative difference {worst:.1e} at 20 cloak points") }
}

fn far_field() -> Verdict {
    let (c, mat, wn) = setup(8, FrequencySelector::KS, 5.0);
    let range = default_n_range(&c, &wn);
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, f) in [("P", IncidentField::plane_p(1.0, psi())), ("S", IncidentField::plane_s(1.0, psi()))] {
        let far = |n: usize| {
            let b = plane_amplitudes(&c, &mat, &wn, &f, n, None).unwrap();
            let r = constraint_report(&nearfar_coeffs(&b, &c, &wn, &f, range.clone()).unwrap());
            r.max_far_p.max(r.max_far_s)
        };
        let (f25, f100) = (far(25), far(100));
        pass &= f100 < 1e-3 && f100 <= 2.0 * f25;
        parts.push(format!("{label} incidence max |F| N=25 {f25:.1e}, N=100 {f100:.1e}"));
    }
    Verdict { pass, detail: parts.join("; ") }
}

fn navier() -> Verdict {
    let (c, mat, wn) = setup(3, FrequencySelector::KP, 2.0);
    let f = IncidentField::plane_p(1.0, psi());
    let b = plane_amplitudes(&c, &mat, &wn, &f, 30, None).unwrap();
    let h = 1e-3 / wn.k_s;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..25 {
        for j in 0..25 {
            let x = PlaneVector::new(-3.0 + 0.25 * i as f64, -3.0 + 0.25 * j as f64);
            let near = c.arcs.iter().any(|a| (x - a.center).norm() <= a.radius + 2.0 * h);
            if near || in_device(&c, x).is_some() {
                continue;
            }
            worst = worst.max(navier_residual(&f, &b, &c, &mat, &wn, x, h).unwrap());
            count += 1;
        }
    }
    Verdict { pass: worst <= 1e-4, detail: format!("max relative residual {worst:.1e} at {count} points") }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 8] = [
        ("special-function identities", Duration::from_secs(5), special_functions),
        ("Graf addition theorem", Duration::from_secs(5), graf),
        ("closed form and series vs quadrature", Duration::from_secs(60), oracle_equivalence),
        ("near-field residuals, M=8, k_s=5, N=100", Duration::from_secs(120), paper_residuals),
        ("cloak magnitude non-increasing in N", Duration::from_secs(120), truncation_monotone),
        ("multipole field vs boundary integral", Duration::from_secs(30), cross_route),
        ("far-field coefficients", Duration::from_secs(60), far_field),
        ("Navier residual of the total field", Duration::from_secs(30), navier),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let in_time = took <= *limit;
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let timing = if in_time { String::new() } else { format!(", over the {}s limit", limit.as_secs()) };
        println!(
            "criterion {} {}: {} ({}; {:.2}s{timing})",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use twistchan::bands::TransverseState;
use twistchan::config::RunConfig;
use twistchan::potential::CrystalModel;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// ∫_cell ψ_f* X Y ψ_i d²r with cell-centred coordinates, by tensor
/// Gauss–Legendre quadrature with `n` nodes per axis (result in units of a_p²
/// times the squared length unit of `a_p`).
pub fn xy_quadrature(si: &TransverseState, sf: &TransverseState, a_p: f64, n: usize) -> Complex64 {
    let side = 2 * si.cutoff + 1;
    let c = si.cutoff as i32;
    let (x, w) = gauss_legendre(n);
    let pts: Vec<f64> = x.iter().map(|t| 0.5 * a_p * t).collect();
    let wts: Vec<f64> = w.iter().map(|t| 0.5 * a_p * t).collect();
    let g0 = 2.0 * PI / a_p;
    // e[k][node] = exp(i g0 k x)
    let e: Vec<Vec<Complex64>> = (-c..=c)
        .map(|k| pts.iter().map(|&p| Complex64::from_polar(1.0, g0 * k as f64 * p)).collect())
        .collect();
    // ψ(x_a, y_b) via separable sums
    let field = |coeffs: &[Complex64]| {
        let mut partial = vec![Complex64::new(0.0, 0.0); side * n];
        for m in 0..side {
            for b in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..side {
                    acc += coeffs[m * side + k] * e[k][b];
                }
                partial[m * n + b] = acc;
            }
        }
        let mut psi = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..side {
                    acc += e[m][a] * partial[m * n + b];
                }
                psi[a * n + b] = acc / a_p;
            }
        }
        psi
    };
    let pi = field(&si.coeffs);
    let pf = field(&sf.coeffs);
    let mut total = Complex64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            total += pf[a * n + b].conj() * pi[a * n + b] * (pts[a] * pts[b] * wts[a] * wts[b]);
        }
    }
    total
}

/// Random normalized coefficient vector at `cutoff`.
pub fn random_state<R: Rng>(rng: &mut R, cutoff: usize, band_index: usize) -> TransverseState {
    let side = 2 * cutoff + 1;
    let mut coeffs: Vec<Complex64> = (0..side * side)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut coeffs {
        *c /= norm;
    }
    TransverseState {
        band_index,
        energy: -(band_index as f64),
        coeffs,
        k_perp: [0.0, 0.0],
        cutoff,
    }
}

/// K₀(x) from ∫₀^∞ exp(−x cosh t) dt (trapezoid, double-exponential decay).
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0, "K0 needs a positive argument, got {x}");
    let h = 0.05;
    let mut sum = 0.5 * (-x).exp();
    let mut k = 1;
    loop {
        let v = (-x * (k as f64 * h).cosh()).exp();
        sum += v;
        if v <= 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * h
}

/// I₀(z)·e^{−z} from (1/π)∫₀^π exp(z(cos θ − 1)) dθ.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    let n = 64 + (4.0 * z.sqrt() * 8.0) as usize;
    let h = PI / n as f64;
    let mut sum = 0.5 * (1.0 + (-2.0 * z).exp());
    for k in 1..n {
        sum += (z * ((k as f64 * h).cos() - 1.0)).exp();
    }
    sum * h / PI
}

/// Unsmeared Molière string potential at distance `rho` (eV).
pub fn string_potential(crystal: &CrystalModel, rho: f64) -> f64 {
    let e2 = 14.399645478425668;
    let s = &crystal.screening;
    let sum: f64 = s
        .alpha
        .iter()
        .zip(&s.beta)
        .map(|(a, b)| a * bessel_k0(b * rho / s.a_tf))
        .sum();
    -2.0 * crystal.z * e2 / crystal.d_string * sum
}

/// String potential convolved with the isotropic 2D Gaussian of width u1.
///
/// The radial convolution kernel is (ρ'/u²)·exp(−(ρ−ρ')²/2u²)·[I₀(ρρ'/u²)e^{−ρρ'/u²}];
/// the substitution ρ' = s² removes the logarithmic singularity at the axis.
pub fn smeared_string(crystal: &CrystalModel, rho: f64) -> f64 {
    let u = crystal.u1;
    if u == 0.0 {
        return string_potential(crystal, rho);
    }
    let lo = (rho - 12.0 * u).max(0.0).sqrt();
    let hi = (rho + 12.0 * u).sqrt();
    let (x, w) = gauss_legendre(24);
    let panels = 64;
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let s = a + 0.5 * width * (xi + 1.0);
            let r = s * s;
            let kernel = r / (u * u)
                * (-(rho - r).powi(2) / (2.0 * u * u)).exp()
                * bessel_i0_scaled(rho * r / (u * u));
            total += 0.5 * width * wi * kernel * string_potential(crystal, r) * 2.0 * s;
        }
    }
    total
}

/// Continuum potential at `r` (Å) summed over periodic string images.
///
/// Strings closer than 3 Å are smeared numerically; farther ones use the
/// unsmeared profile scaled by exp(k²u²/2) per screening term, which is the
/// Gaussian average of K₀(kρ) away from its source.
pub fn realspace_potential(crystal: &CrystalModel, r: [f64; 2], images: i32) -> f64 {
    let e2 = 14.399645478425668;
    let s = &crystal.screening;
    let mut total = 0.0;
    for o in &crystal.string_offsets {
        for i in -images..=images {
            for j in -images..=images {
                let dx = r[0] - (i as f64 + o[0]) * crystal.a_p;
                let dy = r[1] - (j as f64 + o[1]) * crystal.a_p;
                let rho = dx.hypot(dy);
                if rho < 3.0 {
                    total += smeared_string(crystal, rho);
                } else {
                    let sum: f64 = s
                        .alpha
                        .iter()
                        .zip(&s.beta)
                        .map(|(a, b)| {
                            let k = b / s.a_tf;
                            a * (0.5 * k * k * crystal.u1 * crystal.u1).exp() * bessel_k0(k * rho)
                        })
                        .sum();
                    total += -2.0 * crystal.z * e2 / crystal.d_string * sum;
                }
            }
        }
    }
    total
}

/// Default configuration with a coarse grid for quick end-to-end runs.
pub fn quick_config(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scan.n_omega = 6;
    cfg.scan.n_theta = 5;
    cfg.scan.map_n_theta = 4;
    cfg.scan.map_n_theta_k = 3;
    cfg.scan.tam_m_max = 6;
    cfg.output.directory = dir.join("out");
    cfg.output.cache_dir = dir.join("cache");
    cfg
}

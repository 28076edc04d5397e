//! Geometry of a twisted-photon mode.
//!
//! A twisted photon of frequency ω is a superposition of plane waves whose
//! wavevectors lie on a cone of half-angle θ_κ around the photon axis. The
//! photon axis itself points along (Θ, Φ) in the crystal frame, whose z-axis
//! is the channeling axis.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::C_LIGHT;
use crate::error::{Error, Result};

/// Photon helicity Λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    pub const BOTH: [Helicity; 2] = [Helicity::Plus, Helicity::Minus];

    pub fn value(self) -> i32 {
        match self {
            Helicity::Plus => 1,
            Helicity::Minus => -1,
        }
    }
}

/// Quantum numbers and emission geometry of a twisted photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonMode {
    /// Angular frequency ω (rad/s).
    pub omega: f64,
    /// Internal cone angle θ_κ (rad).
    pub theta_k: f64,
    /// Projection of the total angular momentum on the photon axis.
    pub m: i32,
    pub helicity: Helicity,
    /// Polar angle of the photon axis in the crystal frame (rad).
    pub theta: f64,
    /// Azimuth of the photon axis in the crystal frame (rad).
    pub phi: f64,
}

impl PhotonMode {
    pub fn new(
        omega: f64,
        theta_k: f64,
        m: i32,
        helicity: Helicity,
        theta: f64,
        phi: f64,
    ) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidMode(format!("omega must be positive, got {omega}")));
        }
        if !(theta_k > 0.0 && theta_k < PI / 2.0) {
            return Err(Error::InvalidMode(format!(
                "theta_k must lie in (0, pi/2), got {theta_k}"
            )));
        }
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidMode("emission angles must be finite".into()));
        }
        Ok(Self {
            omega,
            theta_k,
            m,
            helicity,
            theta,
            phi,
        })
    }

    /// Wavenumber κ = ω/c (1/m).
    pub fn kappa(&self) -> f64 {
        self.omega / C_LIGHT
    }

    /// Transverse wavenumber ϰ = κ sin θ_κ.
    pub fn kappa_perp(&self) -> f64 {
        self.kappa() * self.theta_k.sin()
    }

    /// Longitudinal wavenumber κ_z = κ cos θ_κ.
    pub fn kappa_z(&self) -> f64 {
        self.kappa() * self.theta_k.cos()
    }
}

/// Crystal-frame components of one plane wave of the twisted mode (1/m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedWavevector {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl RotatedWavevector {
    pub fn norm(&self) -> f64 {
        (self.kx * self.kx + self.ky * self.ky + self.kz * self.kz).sqrt()
    }
}

/// Crystal-frame wavevector of the plane wave at internal azimuth `phi_k`.
pub fn rotate_wavevector(mode: &PhotonMode, phi_k: f64) -> RotatedWavevector {
    rotate_cone_vector(
        mode.kappa_perp(),
        mode.kappa_z(),
        mode.theta,
        mode.phi,
        phi_k,
    )
}

/// Same as [`rotate_wavevector`] with the cone given by (ϰ, κ_z) directly.
pub fn rotate_cone_vector(
    kappa_perp: f64,
    kappa_z: f64,
    theta: f64,
    phi: f64,
    phi_k: f64,
) -> RotatedWavevector {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sk, ck) = phi_k.sin_cos();
    let kx = kappa_z * st * cp
        + kappa_perp * (ct - 1.0) * cp * sk * sp
        + kappa_perp * ck * (ct * cp * cp + sp * sp);
    let ky = kappa_z * st * sp
        + kappa_perp * (ct - 1.0) * cp * ck * sp
        + kappa_perp * sk * (ct * sp * sp + cp * cp);
    let kz = kappa_z * ct - kappa_perp * (phi_k - phi).cos() * st;
    RotatedWavevector { kx, ky, kz }
}

/// Spin-1 Wigner small d-matrix, indexed by (m', m) ∈ {-1, 0, 1}².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerD1(pub [[f64; 3]; 3]);

impl WignerD1 {
    /// Element d¹_{m' m}. Panics on indices outside {-1, 0, 1}.
    pub fn get(&self, m_prime: i32, m: i32) -> f64 {
        assert!(m_prime.abs() <= 1 && m.abs() <= 1, "spin-1 index out of range");
        self.0[(1 - m_prime) as usize][(1 - m) as usize]
    }

    pub fn matmul(&self, other: &WignerD1) -> WignerD1 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        WignerD1(out)
    }

    pub fn transpose(&self) -> WignerD1 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[j][i];
            }
        }
        WignerD1(out)
    }
}

/// Closed-form d¹(θ). Rows and columns run over m = +1, 0, -1.
pub fn wigner_d1(theta: f64) -> WignerD1 {
    let (s, c) = theta.sin_cos();
    let r = s * FRAC_1_SQRT_2;
    let p = 0.5 * (1.0 + c);
    let q = 0.5 * (1.0 - c);
    WignerD1([[p, -r, q], [r, c, -r], [q, r, p]])
}

/// Spherical polarization vector ε^{m_s} rotated into the crystal frame.
///
/// Built as R_z(Φ)·R_y(Θ)·χ_{m_s} with the Condon–Shortley basis
/// χ_{±1} = ∓(1, ±i, 0)/√2, χ_0 = (0, 0, 1).
pub fn polarization_vector(m_s: i32, theta: f64, phi: f64) -> Result<[Complex64; 3]> {
    let chi = match m_s {
        1 => [
            Complex64::new(-FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, -FRAC_1_SQRT_2),
            Complex64::new(0.0, 0.0),
        ],
        0 => [
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ],
        -1 => [
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(0.0, -FRAC_1_SQRT_2),
            Complex64::new(0.0, 0.0),
        ],
        other => return Err(Error::InvalidSpinProjection(other)),
    };
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    // R_y(Θ)
    let y = [
        chi[0] * ct + chi[2] * st,
        chi[1],
        -chi[0] * st + chi[2] * ct,
    ];
    // R_z(Φ)
    Ok([y[0] * cp - y[1] * sp, y[0] * sp + y[1] * cp, y[2]])
}

/// sin(x)/x with the removable singularity handled by its Taylor series.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Finite-length regularization of the longitudinal Z-integral,
/// sinc(q·L/2) for a wavevector mismatch `q_mismatch` (1/m) over `l_coh` (m).
pub fn longitudinal_factor(q_mismatch: f64, l_coh: f64) -> f64 {
    sinc(0.5 * q_mismatch * l_coh)
}

/// How the longitudinal momentum transfer Δ is tied to the photon frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeltaApprox {
    /// Δ = (ω − Ω_fi)/(βc), the full conservation law.
    Exact,
    /// Δ = ω/(βc), valid for ω ≫ Ω_fi.
    Xray,
}

/// Longitudinal momentum transfer Δ (1/m) from energy conservation.
pub fn momentum_transfer(omega: f64, omega_fi: f64, beta: f64, approx: DeltaApprox) -> f64 {
    match approx {
        DeltaApprox::Exact => (omega - omega_fi) / (beta * C_LIGHT),
        DeltaApprox::Xray => omega / (beta * C_LIGHT),
    }
}

/// Forward Doppler edges Ω_fi/(1−β), sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct DopplerEdges {
    pub edges: Vec<f64>,
    /// Number of non-positive transition frequencies that were dropped.
    pub skipped: usize,
}

pub fn doppler_edges(transitions: &[f64], beta: f64) -> DopplerEdges {
    let mut edges = Vec::with_capacity(transitions.len());
    let mut skipped = 0;
    for &omega_fi in transitions {
        if omega_fi > 0.0 {
            edges.push(omega_fi / (1.0 - beta));
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        log::warn!("doppler_edges: skipped {skipped} non-positive transition frequencies");
    }
    edges.sort_by(f64::total_cmp);
    DopplerEdges { edges, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn mode(theta: f64, phi: f64) -> PhotonMode {
        PhotonMode::new(3e19, 30f64.to_radians(), 6, Helicity::Plus, theta, phi).unwrap()
    }

    #[test]
    fn wigner_identity_at_zero() {
        let d = wigner_d1(0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.0[i][j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn wigner_antidiagonal_at_pi() {
        let d = wigner_d1(PI);
        for mp in -1..=1 {
            for m in -1..=1 {
                let expected = if mp == -m { (-1f64).powi(1 - m) } else { 0.0 };
                assert_abs_diff_eq!(d.get(mp, m), expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn wigner_half_pi_values() {
        let d = wigner_d1(PI / 2.0);
        assert_abs_diff_eq!(d.get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.get(1, 0), -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.get(0, 0), 0.0, epsilon = 1e-15);
    }

    #[test]
    #[should_panic]
    fn wigner_index_out_of_range() {
        wigner_d1(0.3).get(2, 0);
    }

    #[test]
    fn rotation_collapses_at_zero_tilt() {
        let md = mode(0.0, 0.0);
        for phi_k in [0.0, 0.7, 2.0, 5.5] {
            let k = rotate_wavevector(&md, phi_k);
            assert_abs_diff_eq!(k.kx, md.kappa_perp() * phi_k.cos(), epsilon = 1e-3);
            assert_abs_diff_eq!(k.ky, md.kappa_perp() * phi_k.sin(), epsilon = 1e-3);
            assert_abs_diff_eq!(k.kz, md.kappa_z(), epsilon = 1e-3);
        }
    }

    #[test]
    fn rotation_quarter_turn() {
        let md = mode(PI / 2.0, 0.0);
        let k = rotate_wavevector(&md, 0.0);
        let tol = 1e-12 * md.kappa();
        assert_abs_diff_eq!(k.kx, md.kappa_z(), epsilon = tol);
        assert_abs_diff_eq!(k.ky, 0.0, epsilon = tol);
        assert_abs_diff_eq!(k.kz, -md.kappa_perp(), epsilon = tol);
    }

    #[test]
    fn mode_validation() {
        assert!(PhotonMode::new(-1.0, 0.5, 3, Helicity::Plus, 0.0, 0.0).is_err());
        assert!(PhotonMode::new(1.0, 0.0, 3, Helicity::Plus, 0.0, 0.0).is_err());
        assert!(PhotonMode::new(1.0, PI / 2.0, 3, Helicity::Plus, 0.0, 0.0).is_err());
        let m = PhotonMode::new(1e19, 0.4, 3, Helicity::Minus, 0.1, 0.2).unwrap();
        let k2 = m.kappa_perp().powi(2) + m.kappa_z().powi(2);
        assert!((k2 / m.kappa().powi(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polarization_reference_vectors() {
        let e0 = polarization_vector(0, 0.0, 1.3).unwrap();
        assert_abs_diff_eq!(e0[2].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e0[0].norm() + e0[1].norm(), 0.0, epsilon = 1e-15);
        let ep = polarization_vector(1, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(ep[0].re, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(ep[1].im, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert!(matches!(
            polarization_vector(2, 0.0, 0.0),
            Err(Error::InvalidSpinProjection(2))
        ));
    }

    #[test]
    fn longitudinal_factor_values() {
        assert_eq!(longitudinal_factor(0.0, 5.0), 1.0);
        assert_abs_diff_eq!(longitudinal_factor(2.0 * PI, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(longitudinal_factor(PI, 1.0), 2.0 / PI, epsilon = 1e-15);
        // series branch and direct branch meet smoothly
        let a = sinc(0.999_999e-6);
        let b = sinc(1.000_001e-6);
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn doppler_edge_values() {
        let e = doppler_edges(&[1.0, 0.0], 0.5);
        assert_eq!(e.edges, vec![2.0]);
        assert_eq!(e.skipped, 1);

        let gamma = 1e7 / crate::constants::ELECTRON_MASS_EV;
        let beta = (1.0 - 1.0 / (gamma * gamma)).sqrt();
        let e = doppler_edges(&[1e16], beta);
        let expected = 2.0 * gamma * gamma * 1e16;
        // 1/(1-β) = γ²(1+β) ≈ 2γ² up to O(1/γ²)
        assert!((e.edges[0] / expected - 1.0).abs() < 1.0 / (gamma * gamma));
        assert!((e.edges[0] / 7.7e18 - 1.0).abs() < 0.01);
    }

    #[test]
    fn doppler_edges_sorted() {
        let e = doppler_edges(&[3.0, 1.0, 2.0, -1.0], 0.9);
        assert!(e.edges.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(e.edges.len(), 3);
    }

    #[test]
    fn xray_transfer_drops_transition_frequency() {
        let exact = momentum_transfer(10.0, 1.0, 0.5, DeltaApprox::Exact);
        let xray = momentum_transfer(10.0, 1.0, 0.5, DeltaApprox::Xray);
        assert_abs_diff_eq!(exact * 0.5 * C_LIGHT, 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xray * 0.5 * C_LIGHT, 10.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn longitudinal_factor_even_and_bounded(q in -1e3f64..1e3, l in 1e-3f64..10.0) {
            let a = longitudinal_factor(q, l);
            prop_assert!(a.abs() <= 1.0);
            prop_assert_eq!(a, longitudinal_factor(-q, l));
        }

        #[test]
        fn polarization_basis_orthonormal(theta in -PI..PI, phi in -PI..PI) {
            let vs: Vec<_> = (-1..=1).map(|ms| polarization_vector(ms, theta, phi).unwrap()).collect();
            for (i, a) in vs.iter().enumerate() {
                for (j, b) in vs.iter().enumerate() {
                    let g: Complex64 = (0..3).map(|k| a[k].conj() * b[k]).sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - expected).norm() < 1e-12);
                }
            }
            // completeness Σ ε ε† = I
            for r in 0..3 {
                for c in 0..3 {
                    let s: Complex64 = vs.iter().map(|v| v[r] * v[c].conj()).sum();
                    let expected = if r == c { 1.0 } else { 0.0 };
                    prop_assert!((s - expected).norm() < 1e-12);
                }
            }
        }
    }
}

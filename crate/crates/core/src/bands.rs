//! Transverse band structure of the channeled electron.
//!
//! The transverse Schrödinger equation in the periodic continuum potential is
//! solved in a plane-wave basis e^{i(k̄+g)·r}, |m|, |n| ≤ cutoff, with the
//! relativistic transverse mass γm_e. Capture populations follow from the
//! overlap of the incident plane wave with the Bloch states.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{ELECTRON_MASS_EV, HBAR_C_EV_A};
use crate::eigen::{eigh, HermitianMatrix};
use crate::error::{Error, Result};
use crate::potential::{well_profile, CrystalModel, PotentialTable};

/// Relative residual ‖Hv − ℰv‖/‖H‖ accepted from the eigensolver.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamModel {
    /// Total electron energy (MeV).
    pub e_total: f64,
    pub gamma: f64,
    /// Longitudinal velocity v∥/c.
    pub beta: f64,
    /// Incidence angle to the axis (rad).
    pub theta_0: f64,
    /// Critical channeling angle (rad).
    pub theta_c: f64,
}

impl BeamModel {
    /// Beam of the given energy (MeV), either total or kinetic, with both
    /// angles unset.
    pub fn from_energy(energy_mev: f64, energy_is_kinetic: bool) -> Result<Self> {
        let rest = ELECTRON_MASS_EV * 1e-6;
        let e_total = if energy_is_kinetic {
            energy_mev + rest
        } else {
            energy_mev
        };
        let gamma = e_total / rest;
        if !(gamma > 1.0) {
            return Err(Error::InvalidBands(format!(
                "electron energy {energy_mev} MeV gives gamma = {gamma} <= 1"
            )));
        }
        let beta = (1.0 - 1.0 / (gamma * gamma)).sqrt();
        Ok(Self {
            e_total,
            gamma,
            beta,
            theta_0: 0.0,
            theta_c: 0.0,
        })
    }

    /// Sets θ_C and θ₀ = `theta0_over_thetac`·θ_C.
    pub fn with_angles(mut self, theta_c: f64, theta0_over_thetac: f64) -> Result<Self> {
        if !(0.0..10.0).contains(&theta0_over_thetac) {
            return Err(Error::InvalidBands(format!(
                "theta_0/theta_C must lie in [0, 10), got {theta0_over_thetac}"
            )));
        }
        self.theta_c = theta_c;
        self.theta_0 = theta0_over_thetac * theta_c;
        Ok(self)
    }

    /// p·v = γ m_e c² β² (eV).
    pub fn pv_ev(&self) -> f64 {
        self.gamma * ELECTRON_MASS_EV * self.beta * self.beta
    }

    /// Momentum p/ħ (1/Å).
    pub fn momentum(&self) -> f64 {
        self.gamma * ELECTRON_MASS_EV * self.beta / HBAR_C_EV_A
    }

    /// ħ²/(2γm_e) (eV·Å²).
    pub fn kinetic_coefficient(&self) -> f64 {
        HBAR_C_EV_A * HBAR_C_EV_A / (2.0 * self.gamma * ELECTRON_MASS_EV)
    }
}

/// Critical angle θ_C = sqrt(2 U_max / pv).
pub fn critical_angle(crystal: &CrystalModel, beam: &BeamModel, cutoff: usize) -> Result<f64> {
    let depth = well_profile(crystal, cutoff)?.depth;
    Ok(critical_angle_from_depth(depth, beam))
}

pub fn critical_angle_from_depth(depth_ev: f64, beam: &BeamModel) -> f64 {
    (2.0 * depth_ev / beam.pv_ev()).sqrt()
}

/// Plane-wave basis ordering shared by all states of one solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub cutoff: usize,
}

impl Basis {
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, m: i32, n: i32) -> Option<usize> {
        let c = self.cutoff as i32;
        if m.abs() > c || n.abs() > c {
            return None;
        }
        Some(((m + c) as usize) * self.side() + (n + c) as usize)
    }

    pub fn indices(&self, idx: usize) -> (i32, i32) {
        let c = self.cutoff as i32;
        let side = self.side();
        ((idx / side) as i32 - c, (idx % side) as i32 - c)
    }
}

/// One transverse Bloch state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseState {
    pub band_index: usize,
    /// Transverse energy ℰ_i (eV).
    pub energy: f64,
    /// Fourier coefficients C^{m,n} in [`Basis`] order, unit norm.
    pub coeffs: Vec<Complex64>,
    /// Bloch quasi-momentum k̄ (1/Å).
    pub k_perp: [f64; 2],
    pub cutoff: usize,
}

impl TransverseState {
    pub fn basis(&self) -> Basis {
        Basis {
            cutoff: self.cutoff,
        }
    }

    pub fn coefficient(&self, m: i32, n: i32) -> Complex64 {
        self.basis()
            .index(m, n)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Which eigenstates to keep from a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandSelection {
    All,
    Lowest(usize),
    /// Every state below `energy` (eV) plus `extra` states above it.
    BelowEnergy { energy: f64, extra: usize },
}

/// Hermitian central-equation matrix for quasi-momentum `k_perp`.
pub fn central_equation(
    table: &PotentialTable,
    kinetic: f64,
    a_p: f64,
    k_perp: [f64; 2],
    basis: Basis,
) -> HermitianMatrix {
    let g0 = 2.0 * PI / a_p;
    HermitianMatrix::from_fn(basis.len(), |i, j| {
        let (mi, ni) = basis.indices(i);
        let (mj, nj) = basis.indices(j);
        let mut h = table.get(mi - mj, ni - nj);
        if i == j {
            let kx = k_perp[0] + g0 * mi as f64;
            let ky = k_perp[1] + g0 * ni as f64;
            h += kinetic * (kx * kx + ky * ky);
        }
        h
    })
}

/// Rotates a coefficient vector so its largest component is real positive.
fn fix_gauge(coeffs: &mut [Complex64]) {
    let (mut best, mut best_norm) = (0, -1.0);
    for (i, c) in coeffs.iter().enumerate() {
        // strict comparison with a relative margin keeps the choice stable
        if c.norm_sqr() > best_norm * (1.0 + 1e-9) {
            best = i;
            best_norm = c.norm_sqr();
        }
    }
    let phase = coeffs[best].conj() / coeffs[best].norm();
    for c in coeffs.iter_mut() {
        *c *= phase;
    }
}

/// Diagonalizes the central equation and returns the selected states.
pub fn solve_bands(
    crystal: &CrystalModel,
    beam: &BeamModel,
    k_perp: [f64; 2],
    cutoff: usize,
    selection: BandSelection,
) -> Result<Vec<TransverseState>> {
    crystal.validate()?;
    if cutoff < 8 {
        return Err(Error::InvalidBands(format!(
            "band cutoff must be at least 8, got {cutoff}"
        )));
    }
    let half = PI / crystal.a_p;
    if k_perp[0].abs() > half * (1.0 + 1e-12) || k_perp[1].abs() > half * (1.0 + 1e-12) {
        return Err(Error::InvalidBands(format!(
            "k_perp {k_perp:?} outside the first Brillouin zone"
        )));
    }
    let basis = Basis { cutoff };
    let table = PotentialTable::new(crystal, 2 * cutoff);
    let h = central_equation(
        &table,
        beam.kinetic_coefficient(),
        crystal.a_p,
        k_perp,
        basis,
    );
    let scale = (0..h.size()).fold(0.0f64, |acc, i| acc.max(h.get(i, i).norm()));
    if h.hermiticity_defect() > 1e-14 * scale {
        return Err(Error::InvalidBands("central-equation matrix is not Hermitian".into()));
    }
    let eig = eigh(&h).ok_or(Error::EigenNotConverged {
        size: basis.len(),
        residual: f64::NAN,
    })?;
    let values = eig.values;

    let keep = match selection {
        BandSelection::All => values.len(),
        BandSelection::Lowest(n) => n.min(values.len()),
        BandSelection::BelowEnergy { energy, extra } => {
            let below = values.iter().take_while(|&&e| e < energy).count();
            (below + extra).min(values.len())
        }
    };

    let h_norm = values
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut states = Vec::with_capacity(keep);
    for (idx, &energy) in values.iter().enumerate().take(keep) {
        let v = &eig.vectors[idx];
        let residual = h
            .apply(v)
            .iter()
            .zip(v)
            .map(|(hv, x)| (hv - x * energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(residual <= EIGEN_RESIDUAL_TOL * h_norm) {
            return Err(Error::EigenNotConverged {
                size: basis.len(),
                residual: residual / h_norm,
            });
        }
        let mut coeffs = v.clone();
        fix_gauge(&mut coeffs);
        states.push(TransverseState {
            band_index: idx,
            energy,
            coeffs,
            k_perp,
            cutoff,
        });
    }
    Ok(states)
}

/// Band solution at one quasi-momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSet {
    pub k_perp: [f64; 2],
    pub cutoff: usize,
    pub states: Vec<TransverseState>,
}

/// Incident plane wave at one beam azimuth, folded into the first zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncidencePoint {
    pub azimuth: f64,
    /// Reduced quasi-momentum k̄ (1/Å).
    pub k_bar: [f64; 2],
    /// Reciprocal lattice indices of G₀ with k_in = k̄ + G₀.
    pub g0: (i32, i32),
}

/// Splits `k` into k̄ + G₀ with k̄ in the first Brillouin zone.
pub fn fold_to_zone(k: [f64; 2], a_p: f64) -> ([f64; 2], (i32, i32)) {
    let g0 = 2.0 * PI / a_p;
    let m = (k[0] / g0).round();
    let n = (k[1] / g0).round();
    ([k[0] - m * g0, k[1] - n * g0], (m as i32, n as i32))
}

/// Incidence points for `n_azimuth` uniformly spaced beam azimuths.
pub fn incidence_points(beam: &BeamModel, a_p: f64, n_azimuth: usize) -> Vec<IncidencePoint> {
    let k_in = beam.momentum() * beam.theta_0;
    (0..n_azimuth)
        .map(|b| {
            let azimuth = 2.0 * PI * b as f64 / n_azimuth as f64;
            let k = [k_in * azimuth.cos(), k_in * azimuth.sin()];
            let (k_bar, g0) = fold_to_zone(k, a_p);
            IncidencePoint {
                azimuth,
                k_bar,
                g0,
            }
        })
        .collect()
}

fn same_k(a: [f64; 2], b: [f64; 2]) -> bool {
    let scale = a[0].abs().max(a[1].abs()).max(b[0].abs()).max(b[1].abs()).max(1e-300);
    (a[0] - b[0]).abs() <= 1e-12 * scale && (a[1] - b[1]).abs() <= 1e-12 * scale
}

/// Capture populations P_i(θ₀), indexed by band index.
///
/// `sets[b]` must be solved at the folded quasi-momentum of beam azimuth
/// b·2π/n_azimuth. P_i is the azimuthal mean of |C_i^{G₀}(k̄)|².
pub fn populations(
    sets: &[BandSet],
    beam: &BeamModel,
    a_p: f64,
    n_azimuth: usize,
) -> Result<Vec<f64>> {
    if n_azimuth == 0 || sets.len() != n_azimuth {
        return Err(Error::InvalidBands(format!(
            "expected {n_azimuth} band sets, one per beam azimuth, got {}",
            sets.len()
        )));
    }
    let points = incidence_points(beam, a_p, n_azimuth);
    let n_bands = sets.iter().map(|s| s.states.len()).min().unwrap_or(0);
    let mut pops = vec![0.0; n_bands];
    for (set, point) in sets.iter().zip(&points) {
        if !same_k(set.k_perp, point.k_bar) {
            return Err(Error::QuasiMomentumMismatch {
                have_x: set.k_perp[0],
                have_y: set.k_perp[1],
                want_x: point.k_bar[0],
                want_y: point.k_bar[1],
            });
        }
        for (p, state) in pops.iter_mut().zip(&set.states) {
            if !same_k(state.k_perp, point.k_bar) {
                return Err(Error::QuasiMomentumMismatch {
                    have_x: state.k_perp[0],
                    have_y: state.k_perp[1],
                    want_x: point.k_bar[0],
                    want_y: point.k_bar[1],
                });
            }
            *p += state.coefficient(point.g0.0, point.g0.1).norm_sqr() / n_azimuth as f64;
        }
    }
    Ok(pops)
}

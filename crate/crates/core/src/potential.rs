//! Continuum potential of an axial channel.
//!
//! Atomic strings are described by the Molière screening function, averaged
//! along the axis and smeared by thermal vibrations. The transverse potential
//! is periodic on a square cell of period `a_p`; this module produces its
//! Fourier components on the reciprocal lattice and the real-space well
//! profile reconstructed from them.
//!
//! Lengths are in Å, energies in eV.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{BOHR_A, E2_EV_A};
use crate::error::{Error, Result};

/// Molière screening coefficients and Thomas–Fermi length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Screening length a_TF (Å).
    pub a_tf: f64,
}

impl Screening {
    /// Standard Molière coefficients with a_TF = 0.8853·a_B·Z^(-1/3).
    pub fn moliere(z: f64) -> Self {
        let a_tf = if z > 0.0 {
            0.8853 * BOHR_A * z.powf(-1.0 / 3.0)
        } else {
            f64::INFINITY
        };
        Self {
            alpha: vec![0.1, 0.55, 0.35],
            beta: vec![6.0, 1.2, 0.3],
            a_tf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalModel {
    /// Atomic number.
    pub z: f64,
    /// Transverse cell period a_p (Å).
    pub a_p: f64,
    /// Atomic spacing along the string (Å).
    pub d_string: f64,
    /// Fractional positions of the strings inside the cell.
    pub string_offsets: Vec<[f64; 2]>,
    /// One-dimensional thermal vibration amplitude (Å).
    pub u1: f64,
    pub screening: Screening,
}

impl CrystalModel {
    /// Si along ⟨100⟩ at room temperature: two strings per a/2 cell.
    pub fn silicon_100() -> Self {
        Self {
            z: 14.0,
            a_p: 2.7155,
            d_string: 5.431,
            string_offsets: vec![[0.0, 0.0], [0.5, 0.5]],
            u1: 0.075,
            screening: Screening::moliere(14.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCrystal(msg));
        if !(self.a_p > 0.0) {
            return bad(format!("a_p must be positive, got {}", self.a_p));
        }
        if !(self.d_string > 0.0) {
            return bad(format!("d_string must be positive, got {}", self.d_string));
        }
        if !(self.u1 >= 0.0) {
            return bad(format!("u1 must be non-negative, got {}", self.u1));
        }
        if self.z < 0.0 {
            return bad(format!("atomic number must be non-negative, got {}", self.z));
        }
        if self.screening.alpha.len() != self.screening.beta.len() {
            return bad("screening alpha and beta lengths differ".into());
        }
        let sum: f64 = self.screening.alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("screening alphas must sum to 1, got {sum}"));
        }
        if self.screening.beta.iter().any(|b| !(*b > 0.0)) {
            return bad("screening betas must be positive".into());
        }
        if self.string_offsets.is_empty() {
            return bad("at least one string per cell is required".into());
        }
        for o in &self.string_offsets {
            if !(0.0..1.0).contains(&o[0]) || !(0.0..1.0).contains(&o[1]) {
                return bad(format!("string offset {o:?} outside [0,1)^2"));
            }
        }
        Ok(())
    }

    /// Reciprocal lattice spacing 2π/a_p (1/Å).
    pub fn g0(&self) -> f64 {
        2.0 * PI / self.a_p
    }

    /// 2D Fourier transform of one unsmeared string, Ũ(q) (eV·Å²).
    pub fn string_transform(&self, q: f64) -> f64 {
        if self.z == 0.0 {
            return 0.0;
        }
        let pref = -2.0 * self.z * E2_EV_A / self.d_string;
        let s = &self.screening;
        let sum: f64 = s
            .alpha
            .iter()
            .zip(&s.beta)
            .map(|(a, b)| {
                let k = b / s.a_tf;
                a * 2.0 * PI / (q * q + k * k)
            })
            .sum();
        pref * sum
    }

    /// Structure factor Σ_s exp(−i g·r_s) of the cell.
    pub fn structure_factor(&self, m: i32, n: i32) -> Complex64 {
        self.string_offsets
            .iter()
            .map(|o| unit_phase(-(m as f64 * o[0] + n as f64 * o[1])))
            .sum()
    }
}

/// exp(2πi·turns), exact at quarter turns so that centrosymmetric cells
/// produce exactly real coefficients.
fn unit_phase(turns: f64) -> Complex64 {
    let t = turns.rem_euclid(1.0);
    let q = 4.0 * t;
    if q == q.round() {
        return match q as i64 % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

/// Reciprocal lattice vector g = (2π/a_p)·(m, n).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocalVector {
    pub m: i32,
    pub n: i32,
    /// Cartesian components (1/Å).
    pub g: [f64; 2],
}

impl ReciprocalVector {
    pub fn new(m: i32, n: i32, a_p: f64) -> Self {
        let g0 = 2.0 * PI / a_p;
        Self {
            m,
            n,
            g: [g0 * m as f64, g0 * n as f64],
        }
    }

    pub fn norm(&self) -> f64 {
        self.g[0].hypot(self.g[1])
    }
}

/// Fourier coefficient U_g (eV) of the periodic continuum potential.
pub fn fourier_component(crystal: &CrystalModel, g: &ReciprocalVector) -> Complex64 {
    let q = g.norm();
    let damping = (-0.5 * q * q * crystal.u1 * crystal.u1).exp();
    crystal.structure_factor(g.m, g.n)
        * (crystal.string_transform(q) * damping / (crystal.a_p * crystal.a_p))
}

/// Fourier coefficients U_{(m,n)} for |m|, |n| ≤ `extent`.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    extent: i32,
    values: Vec<Complex64>,
}

impl PotentialTable {
    pub fn new(crystal: &CrystalModel, extent: usize) -> Self {
        let e = extent as i32;
        let side = 2 * e + 1;
        let mut values = Vec::with_capacity((side * side) as usize);
        for m in -e..=e {
            for n in -e..=e {
                values.push(fourier_component(
                    crystal,
                    &ReciprocalVector::new(m, n, crystal.a_p),
                ));
            }
        }
        Self { extent: e, values }
    }

    pub fn extent(&self) -> usize {
        self.extent as usize
    }

    pub fn get(&self, m: i32, n: i32) -> Complex64 {
        assert!(m.abs() <= self.extent && n.abs() <= self.extent);
        let side = 2 * self.extent + 1;
        self.values[((m + self.extent) * side + (n + self.extent)) as usize]
    }

    /// True when every coefficient has an exactly vanishing imaginary part.
    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// U at the Cartesian point `r` (Å) summed over |m|, |n| ≤ `cutoff`.
    pub fn evaluate(&self, r: [f64; 2], a_p: f64, cutoff: usize) -> f64 {
        let c = (cutoff as i32).min(self.extent);
        let g0 = 2.0 * PI / a_p;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in -c..=c {
            for n in -c..=c {
                let phase = g0 * (m as f64 * r[0] + n as f64 * r[1]);
                acc += self.get(m, n) * Complex64::from_polar(1.0, phase);
            }
        }
        acc.re
    }

    /// Potential sampled on a `grid`×`grid` lattice of fractional points
    /// (i/grid, j/grid), row-major in i. Separable in x and y.
    pub fn reconstruct_grid(&self, cutoff: usize, grid: usize) -> Vec<f64> {
        let c = (cutoff as i32).min(self.extent);
        let side = (2 * c + 1) as usize;
        let phase = |k: i32, i: usize| {
            let turns = (k as i64 * i as i64).rem_euclid(grid as i64) as f64 / grid as f64;
            unit_phase(turns)
        };
        // partial[i][n] = Σ_m U_{mn} e^{2πi m x_i}
        let mut partial = vec![Complex64::new(0.0, 0.0); grid * side];
        for i in 0..grid {
            for (jn, n) in (-c..=c).enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in -c..=c {
                    acc += self.get(m, n) * phase(m, i);
                }
                partial[i * side + jn] = acc;
            }
        }
        let mut out = vec![0.0; grid * grid];
        for i in 0..grid {
            for j in 0..grid {
                let mut acc = Complex64::new(0.0, 0.0);
                for (jn, n) in (-c..=c).enumerate() {
                    acc += partial[i * side + jn] * phase(n, j);
                }
                out[i * grid + j] = acc.re;
            }
        }
        out
    }
}

/// Extremes of the reconstructed transverse potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellProfile {
    /// U_max − U_min over the cell (eV).
    pub depth: f64,
    /// Highest potential value in the cell (eV).
    pub top: f64,
    /// Lowest potential value in the cell (eV).
    pub bottom: f64,
}

const WELL_GRID: usize = 128;

fn profile_at(table: &PotentialTable, cutoff: usize) -> WellProfile {
    let values = table.reconstruct_grid(cutoff, WELL_GRID);
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bottom = values.iter().copied().fold(f64::INFINITY, f64::min);
    WellProfile {
        depth: top - bottom,
        top,
        bottom,
    }
}

/// Well profile at `cutoff`, verified against the reconstruction at twice
/// the cutoff.
pub fn well_profile(crystal: &CrystalModel, cutoff: usize) -> Result<WellProfile> {
    crystal.validate()?;
    if cutoff < 8 {
        return Err(Error::InvalidCrystal(format!(
            "well depth cutoff must be at least 8, got {cutoff}"
        )));
    }
    let table = PotentialTable::new(crystal, 2 * cutoff);
    let low = profile_at(&table, cutoff);
    let high = profile_at(&table, 2 * cutoff);
    if low.depth == 0.0 && high.depth == 0.0 {
        return Ok(low);
    }
    if ((high.depth - low.depth) / high.depth).abs() > 0.01 {
        return Err(Error::WellDepthNotConverged {
            cutoff,
            depth_low: low.depth,
            depth_high: high.depth,
        });
    }
    Ok(low)
}

/// Depth U_max (eV) of the transverse well.
pub fn well_depth(crystal: &CrystalModel, cutoff: usize) -> Result<f64> {
    well_profile(crystal, cutoff).map(|p| p.depth)
}

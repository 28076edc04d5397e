//! Grid orchestration: azimuth-averaged intensities, population-weighted
//! transition sums, (ω, Θ) maps, fixed-Θ spectra, TAM spectra and (Θ, θ_κ)
//! maps, plus lobe and edge detection.
//!
//! Grid points are independent tasks evaluated on the rayon pool and
//! collected by index, so results do not depend on the worker count.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{kev_to_omega, C_LIGHT};
use crate::error::{Error, Result};
use crate::kinematics::{momentum_transfer, wigner_d1, Helicity};
use crate::radiation::{
    amplitude_from_harmonics, intensity_prefactor, ring_harmonics, ConeCoefficients,
    QuadratureSettings, Transition,
};

/// How the emission azimuth Φ is averaged out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhiAverage {
    /// Mean of |m^cr|² over Φ.
    Probability,
    /// |mean of m^cr over Φ|².
    Amplitude,
}

/// Which helicities enter the intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HelicityPolicy {
    Sum,
    Plus,
    Minus,
}

impl HelicityPolicy {
    pub fn helicities(self) -> &'static [Helicity] {
        match self {
            HelicityPolicy::Sum => &Helicity::BOTH,
            HelicityPolicy::Plus => &[Helicity::Plus],
            HelicityPolicy::Minus => &[Helicity::Minus],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    pub quadrature: QuadratureSettings,
    /// Number of uniformly spaced emission azimuths Φ.
    pub n_phi_avg: usize,
    pub phi_average: PhiAverage,
    pub helicity: HelicityPolicy,
}

impl ScanSettings {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        if self.n_phi_avg < 8 {
            return Err(Error::Scan(format!(
                "at least 8 emission azimuths are required, got {}",
                self.n_phi_avg
            )));
        }
        Ok(())
    }
}

/// A transition with its initial-band population P_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedTransition {
    pub transition: Transition,
    pub population: f64,
}

/// Transitions eligible for emission, each weighted by P_i.
///
/// Transitions with Ω_fi ≤ 0 are dropped, as are those whose weight
/// P_i·|⟨XY⟩|² falls below `weight_floor` times the largest weight.
pub fn weight_transitions(
    transitions: &[Transition],
    populations: &[f64],
    weight_floor: f64,
) -> Vec<WeightedTransition> {
    let weighted: Vec<WeightedTransition> = transitions
        .iter()
        .filter(|t| t.omega_fi > 0.0 && t.i < populations.len())
        .map(|t| WeightedTransition {
            transition: *t,
            population: populations[t.i],
        })
        .collect();
    let weight = |w: &WeightedTransition| w.population * w.transition.xy.norm_sqr();
    let max = weighted.iter().map(weight).fold(0.0f64, f64::max);
    weighted
        .into_iter()
        .filter(|w| max > 0.0 && weight(w) >= weight_floor * max)
        .collect()
}

fn check_tam(ms: &[i32]) -> Result<()> {
    match ms.iter().find(|m| m.abs() < 3) {
        Some(&m) => Err(Error::TamTooSmall(m)),
        None => Ok(()),
    }
}

/// Intensity Σ_fi P_i dI_fi/dθ_κdω at one (ω, Θ, θ_κ), one value per m.
///
/// All m share the ring harmonics of each transition.
pub fn point_intensity(
    transitions: &[WeightedTransition],
    beta: f64,
    omega: f64,
    theta_k: f64,
    theta: f64,
    ms: &[i32],
    settings: &ScanSettings,
) -> Result<Vec<f64>> {
    if ms.is_empty() {
        return Ok(Vec::new());
    }
    let q = &settings.quadrature;
    let kappa = omega / C_LIGHT;
    let (kappa_perp, kappa_z) = (kappa * theta_k.sin(), kappa * theta_k.cos());
    let b = 0.5 * kappa_perp * theta.sin() * q.l_coh;
    let a: Vec<f64> = transitions
        .iter()
        .map(|w| {
            let delta = momentum_transfer(omega, w.transition.omega_fi, beta, q.delta_approx);
            0.5 * (kappa_z * theta.cos() - delta) * q.l_coh
        })
        .collect();
    let k_max = ms.iter().map(|m| m.unsigned_abs() as usize).max().unwrap_or(0) + 3;
    let rings = ring_harmonics(&a, b, k_max, q)?;
    let d1 = wigner_d1(theta_k);
    let helicities = settings.helicity.helicities();
    let n_phi = settings.n_phi_avg;
    let inv = 1.0 / n_phi as f64;

    // per (m, transition, helicity)
    let slots = ms.len() * transitions.len() * helicities.len();
    let mut prob = vec![0.0; slots];
    let mut amp = vec![Complex64::new(0.0, 0.0); slots];
    for l in 0..n_phi {
        let phi = 2.0 * PI * l as f64 * inv;
        let cone = ConeCoefficients::new(kappa_perp, kappa_z, theta, phi);
        let mut slot = 0;
        for &m in ms {
            for (w, ring) in transitions.iter().zip(&rings) {
                for h in helicities {
                    let v = amplitude_from_harmonics(
                        &cone,
                        w.transition.omega_fi,
                        beta,
                        &d1,
                        m,
                        h.value(),
                        phi,
                        &ring.values,
                    );
                    prob[slot] += v.norm_sqr() * inv;
                    amp[slot] += v * inv;
                    slot += 1;
                }
            }
        }
    }
    let pref = intensity_prefactor(omega, theta_k, beta);
    let per_m = transitions.len() * helicities.len();
    Ok((0..ms.len())
        .map(|mi| {
            let mut total = 0.0;
            for (ti, w) in transitions.iter().enumerate() {
                let base = mi * per_m + ti * helicities.len();
                let avg: f64 = (base..base + helicities.len())
                    .map(|s| match settings.phi_average {
                        PhiAverage::Probability => prob[s],
                        PhiAverage::Amplitude => amp[s].norm_sqr(),
                    })
                    .sum();
                total += w.population * w.transition.xy.norm_sqr() * avg;
            }
            pref * total
        })
        .collect())
}

/// dI_fi/dθ_κdω of a single transition, averaged over Φ and summed over the
/// configured helicities.
pub fn phi_averaged_intensity(
    transition: &Transition,
    omega: f64,
    theta_k: f64,
    m: i32,
    theta: f64,
    beta: f64,
    settings: &ScanSettings,
) -> Result<f64> {
    check_tam(&[m])?;
    settings.validate()?;
    let single = [WeightedTransition {
        transition: *transition,
        population: 1.0,
    }];
    Ok(point_intensity(&single, beta, omega, theta_k, theta, &[m], settings)?[0])
}

/// Population-weighted Σ P_i|⟨XY⟩|²Σ_Λ|m^cr|² at each of `n_phi` emission
/// azimuths, for checking the Φ symmetry of the emission probability.
pub fn phi_profile(
    transitions: &[WeightedTransition],
    beta: f64,
    omega: f64,
    theta_k: f64,
    theta: f64,
    m: i32,
    n_phi: usize,
    settings: &ScanSettings,
) -> Result<Vec<f64>> {
    let q = &settings.quadrature;
    let kappa = omega / C_LIGHT;
    let (kappa_perp, kappa_z) = (kappa * theta_k.sin(), kappa * theta_k.cos());
    let b = 0.5 * kappa_perp * theta.sin() * q.l_coh;
    let a: Vec<f64> = transitions
        .iter()
        .map(|w| {
            let delta = momentum_transfer(omega, w.transition.omega_fi, beta, q.delta_approx);
            0.5 * (kappa_z * theta.cos() - delta) * q.l_coh
        })
        .collect();
    let rings = ring_harmonics(&a, b, m.unsigned_abs() as usize + 3, q)?;
    let d1 = wigner_d1(theta_k);
    Ok((0..n_phi)
        .map(|l| {
            let phi = 2.0 * PI * l as f64 / n_phi as f64;
            let cone = ConeCoefficients::new(kappa_perp, kappa_z, theta, phi);
            let mut total = 0.0;
            for (w, ring) in transitions.iter().zip(&rings) {
                for h in settings.helicity.helicities() {
                    let v = amplitude_from_harmonics(
                        &cone,
                        w.transition.omega_fi,
                        beta,
                        &d1,
                        m,
                        h.value(),
                        phi,
                        &ring.values,
                    );
                    total += w.population * w.transition.xy.norm_sqr() * v.norm_sqr();
                }
            }
            total
        })
        .collect())
}

/// A named, strictly increasing coordinate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            values,
        }
    }

    /// `n` points evenly spaced over [lo, hi].
    pub fn linspace(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        let values = match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(name, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }
}

/// Sampled intensity over one or two axes; values are row-major with the
/// first axis varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl IntensityGrid {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = axes.iter().map(Axis::len).product();
        if values.len() != expected {
            return Err(Error::Scan(format!(
                "grid holds {} values, axes need {expected}",
                values.len()
            )));
        }
        if let Some(axis) = axes.iter().find(|a| !a.is_increasing()) {
            return Err(Error::Scan(format!("axis '{}' is not strictly increasing", axis.name)));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Scan(format!("grid value {v} is not finite and non-negative")));
        }
        Ok(Self {
            axes,
            values,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    /// Value at (row, col) of a two-axis grid.
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.axes[1].len() + col]
    }

    /// One-axis slice along the second axis at fixed first-axis index.
    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.axes[1].len();
        &self.values[row * n..(row + 1) * n]
    }

    /// One-axis slice along the first axis at fixed second-axis index.
    pub fn column(&self, col: usize) -> Vec<f64> {
        let n = self.axes[1].len();
        (0..self.axes[0].len())
            .map(|r| self.values[r * n + col])
            .collect()
    }
}

fn evaluate_points<F>(count: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// (ω, Θ) intensity maps at fixed θ_κ, one grid per m.
///
/// `omega_kev` and `theta_deg` become the first and second axes.
pub fn total_intensity(
    transitions: &[WeightedTransition],
    beta: f64,
    omega_kev: &Axis,
    theta_deg: &Axis,
    theta_k: f64,
    ms: &[i32],
    settings: &ScanSettings,
) -> Result<Vec<IntensityGrid>> {
    check_tam(ms)?;
    settings.validate()?;
    if transitions.is_empty() {
        return Err(Error::NoTransitions);
    }
    let nt = theta_deg.len();
    let points = evaluate_points(omega_kev.len() * nt, |idx| {
        let omega = kev_to_omega(omega_kev.values[idx / nt]);
        let theta = theta_deg.values[idx % nt].to_radians();
        point_intensity(transitions, beta, omega, theta_k, theta, ms, settings)
    })?;
    ms.iter()
        .enumerate()
        .map(|(mi, &m)| {
            let values = points.iter().map(|p| p[mi]).collect();
            Ok(IntensityGrid::new(vec![omega_kev.clone(), theta_deg.clone()], values)?
                .with_metadata("m", m)
                .with_metadata("theta_k_deg", theta_k.to_degrees()))
        })
        .collect()
}

/// Fixed-Θ spectra over ω, one grid per m.
pub fn fixed_theta_spectra(
    transitions: &[WeightedTransition],
    beta: f64,
    omega_kev: &Axis,
    theta: f64,
    theta_k: f64,
    ms: &[i32],
    settings: &ScanSettings,
) -> Result<Vec<IntensityGrid>> {
    check_tam(ms)?;
    settings.validate()?;
    if transitions.is_empty() {
        return Err(Error::NoTransitions);
    }
    let points = evaluate_points(omega_kev.len(), |i| {
        point_intensity(
            transitions,
            beta,
            kev_to_omega(omega_kev.values[i]),
            theta_k,
            theta,
            ms,
            settings,
        )
    })?;
    ms.iter()
        .enumerate()
        .map(|(mi, &m)| {
            let values = points.iter().map(|p| p[mi]).collect();
            Ok(IntensityGrid::new(vec![omega_kev.clone()], values)?
                .with_metadata("m", m)
                .with_metadata("theta_k_deg", theta_k.to_degrees())
                .with_metadata("Theta_deg", theta.to_degrees()))
        })
        .collect()
}

/// TAM spectrum: the (ω, Θ) map integrated over its window by the trapezoid
/// rule in keV and degrees, one value per m.
pub fn tam_spectrum(
    transitions: &[WeightedTransition],
    beta: f64,
    omega_kev: &Axis,
    theta_deg: &Axis,
    theta_k: f64,
    ms: &[i32],
    settings: &ScanSettings,
) -> Result<IntensityGrid> {
    let mut sorted = ms.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let axis = Axis::new("m", sorted.iter().map(|&m| m as f64).collect());
    if sorted.is_empty() {
        return IntensityGrid::new(vec![axis], Vec::new());
    }
    let maps = total_intensity(transitions, beta, omega_kev, theta_deg, theta_k, &sorted, settings)?;
    let values = maps.iter().map(integrate_map).collect();
    Ok(IntensityGrid::new(vec![axis], values)?.with_metadata("theta_k_deg", theta_k.to_degrees()))
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// ∫∫ I over a two-axis grid (trapezoid rule in the axis units).
pub fn integrate_map(grid: &IntensityGrid) -> f64 {
    let wr = trapezoid_weights(&grid.axes[0].values);
    let wc = trapezoid_weights(&grid.axes[1].values);
    let mut total = 0.0;
    for (r, a) in wr.iter().enumerate() {
        for (c, b) in wc.iter().enumerate() {
            total += a * b * grid.at(r, c);
        }
    }
    total
}

/// Intensity of a (ω, Θ) map integrated over Θ < `split` and Θ > `split`.
///
/// The map is integrated over ω first; the Θ profile is then integrated by the
/// trapezoid rule on each side, with the crossing interval split linearly.
pub fn side_integrals(grid: &IntensityGrid, split: f64) -> (f64, f64) {
    let wr = trapezoid_weights(&grid.axes[0].values);
    let theta = &grid.axes[1].values;
    let profile: Vec<f64> = (0..theta.len())
        .map(|c| wr.iter().enumerate().map(|(r, w)| w * grid.at(r, c)).sum())
        .collect();
    let (mut below, mut above) = (0.0, 0.0);
    for i in 1..theta.len() {
        let (x0, x1) = (theta[i - 1], theta[i]);
        let (y0, y1) = (profile[i - 1], profile[i]);
        if x1 <= split {
            below += 0.5 * (y0 + y1) * (x1 - x0);
        } else if x0 >= split {
            above += 0.5 * (y0 + y1) * (x1 - x0);
        } else {
            let ys = y0 + (y1 - y0) * (split - x0) / (x1 - x0);
            below += 0.5 * (y0 + ys) * (split - x0);
            above += 0.5 * (ys + y1) * (x1 - split);
        }
    }
    (below, above)
}

/// (Θ, θ_κ) maps at fixed photon energy, one per m. Θ is the first axis.
pub fn theta_thetak_map(
    transitions: &[WeightedTransition],
    beta: f64,
    omega_kev: f64,
    theta_deg: &Axis,
    theta_k_deg: &Axis,
    ms: &[i32],
    settings: &ScanSettings,
) -> Result<Vec<IntensityGrid>> {
    check_tam(ms)?;
    settings.validate()?;
    if !(omega_kev > 0.0) {
        return Err(Error::Scan(format!("photon energy must be positive, got {omega_kev} keV")));
    }
    if transitions.is_empty() {
        return Err(Error::NoTransitions);
    }
    if let Some(tk) = theta_k_deg.values.iter().find(|v| !(**v > 0.0 && **v < 90.0)) {
        return Err(Error::Scan(format!("theta_k = {tk} deg outside (0, 90)")));
    }
    let omega = kev_to_omega(omega_kev);
    let nk = theta_k_deg.len();
    let points = evaluate_points(theta_deg.len() * nk, |idx| {
        let theta = theta_deg.values[idx / nk].to_radians();
        let theta_k = theta_k_deg.values[idx % nk].to_radians();
        point_intensity(transitions, beta, omega, theta_k, theta, ms, settings)
    })?;
    ms.iter()
        .enumerate()
        .map(|(mi, &m)| {
            let values = points.iter().map(|p| p[mi]).collect();
            Ok(
                IntensityGrid::new(vec![theta_deg.clone(), theta_k_deg.clone()], values)?
                    .with_metadata("m", m)
                    .with_metadata("omega_keV", omega_kev),
            )
        })
        .collect()
}

/// A local maximum of a two-axis grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lobe {
    /// Coordinate along the second axis (Θ for (ω, Θ) maps).
    pub theta: f64,
    /// Coordinate along the first axis (ω for (ω, Θ) maps).
    pub omega: f64,
    /// Smoothed intensity at the maximum.
    pub value: f64,
}

/// 3×3 mean, averaging only over neighbours inside the grid.
pub fn smooth3(grid: &IntensityGrid) -> Vec<f64> {
    let (nr, nc) = (grid.axes[0].len(), grid.axes[1].len());
    let mut out = vec![0.0; nr * nc];
    for r in 0..nr {
        for c in 0..nc {
            let (mut sum, mut count) = (0.0, 0.0);
            for rr in r.saturating_sub(1)..(r + 2).min(nr) {
                for cc in c.saturating_sub(1)..(c + 2).min(nc) {
                    sum += grid.at(rr, cc);
                    count += 1.0;
                }
            }
            out[r * nc + c] = sum / count;
        }
    }
    out
}

/// Local maxima of a two-axis grid after 3×3 smoothing, strongest first.
///
/// A point is a maximum when it exceeds all of its (up to eight) neighbours.
pub fn find_lobes(grid: &IntensityGrid) -> Vec<Lobe> {
    if grid.axes.len() != 2 {
        return Vec::new();
    }
    let (nr, nc) = (grid.axes[0].len(), grid.axes[1].len());
    let s = smooth3(grid);
    let mut lobes = Vec::new();
    for r in 0..nr {
        for c in 0..nc {
            let v = s[r * nc + c];
            let mut is_max = v > 0.0;
            'nb: for rr in r.saturating_sub(1)..(r + 2).min(nr) {
                for cc in c.saturating_sub(1)..(c + 2).min(nc) {
                    if (rr, cc) != (r, c) && s[rr * nc + cc] >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                lobes.push(Lobe {
                    theta: grid.axes[1].values[c],
                    omega: grid.axes[0].values[r],
                    value: v,
                });
            }
        }
    }
    lobes.sort_by(|a, b| b.value.total_cmp(&a.value));
    lobes
}

/// Strongest lobe on each side of `split` along Θ, each required to reach
/// `dominance` times the strongest lobe overall.
pub fn dominant_pair(lobes: &[Lobe], split: f64, dominance: f64) -> (Option<Lobe>, Option<Lobe>) {
    let top = lobes.first().map_or(0.0, |l| l.value);
    let pick = |below: bool| {
        lobes
            .iter()
            .find(|l| if below { l.theta < split } else { l.theta > split })
            .filter(|l| l.value >= dominance * top)
            .copied()
    };
    (pick(true), pick(false))
}

/// Sharp drops of a one-axis spectrum: runs of backward differences below
/// −`threshold`·max|ΔI|, each reported at the midpoint of its steepest step.
pub fn find_edges(spectrum: &IntensityGrid, threshold: f64) -> Vec<f64> {
    let x = &spectrum.axes[0].values;
    let y = &spectrum.values;
    if y.len() < 2 {
        return Vec::new();
    }
    let diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let max = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if max == 0.0 {
        return Vec::new();
    }
    let mut edges = Vec::new();
    let mut i = 0;
    while i < diffs.len() {
        if diffs[i] < -threshold * max {
            let mut best = i;
            while i + 1 < diffs.len() && diffs[i + 1] < -threshold * max {
                i += 1;
                if diffs[i] < diffs[best] {
                    best = i;
                }
            }
            edges.push(0.5 * (x[best] + x[best + 1]));
        }
        i += 1;
    }
    edges
}

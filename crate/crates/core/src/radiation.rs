//! Per-transition emission quantities: the ⟨XY⟩ dipole-like matrix element,
//! the reduced α̃ vector, the azimuthal cone integral m^cr and the
//! spectral-angular emission probability.
//!
//! Two evaluation paths exist for m^cr. [`emission_amplitude`] integrates the
//! full integrand over φ_κ with a doubling periodic trapezoid rule. The batched
//! path factors the integrand as a degree-2 trigonometric polynomial times the
//! even sinc ring s(φ') and only integrates the ring harmonics
//! ĥ_k = (1/2π)∫cos(kφ')s(φ')dφ' ([`ring_harmonics`]), which are shared by
//! every m, Λ and Φ at a given (ω, Θ, θ_κ).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::TransverseState;
use crate::constants::{ANGSTROM, C_LIGHT, FINE_STRUCTURE, HBAR_EV_S, HBAR_J_S};
use crate::error::{Error, Result};
use crate::kinematics::{
    momentum_transfer, polarization_vector, rotate_cone_vector, rotate_wavevector, sinc,
    wigner_d1, DeltaApprox, PhotonMode, RotatedWavevector, WignerD1,
};

/// Radiative transition i → f between two transverse states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub i: usize,
    pub f: usize,
    /// Ω_fi = (ℰ_i − ℰ_f)/ħ (rad/s).
    pub omega_fi: f64,
    /// ⟨XY⟩_fi (m²).
    pub xy: Complex64,
}

impl Transition {
    pub fn from_states(
        state_i: &TransverseState,
        state_f: &TransverseState,
        a_p: f64,
    ) -> Result<Self> {
        let xy = xy_matrix_element(state_i, state_f, a_p)? * (ANGSTROM * ANGSTROM);
        Ok(Self {
            i: state_i.band_index,
            f: state_f.band_index,
            omega_fi: (state_i.energy - state_f.energy) / HBAR_EV_S,
            xy,
        })
    }
}

/// All emission-eligible transitions (ℰ_i > ℰ_f) among `states`.
pub fn build_transitions(states: &[TransverseState], a_p: f64) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for si in states {
        for sf in states {
            if si.energy > sf.energy {
                out.push(Transition::from_states(si, sf, a_p)?);
            }
        }
    }
    Ok(out)
}

/// (−1)^p / p, or 0 at p = 0.
fn dipole_weight(p: i32) -> f64 {
    if p == 0 {
        0.0
    } else if p % 2 == 0 {
        1.0 / p as f64
    } else {
        -1.0 / p as f64
    }
}

/// ⟨XY⟩_fi in units of a_p² (Å² when `a_p` is in Å).
///
/// Uses cell-centred coordinates and ψ = a_p⁻¹ Σ C^{m,n} e^{2πi(mX+nY)/a_p}.
/// The double sum over Fourier indices separates into two one-dimensional
/// convolutions with the kernel (−1)^p/p.
pub fn xy_matrix_element(
    state_i: &TransverseState,
    state_f: &TransverseState,
    a_p: f64,
) -> Result<Complex64> {
    if state_i.cutoff != state_f.cutoff || state_i.coeffs.len() != state_f.coeffs.len() {
        return Err(Error::CutoffMismatch(state_i.cutoff, state_f.cutoff));
    }
    let side = state_i.basis().side();
    let ci = &state_i.coeffs;
    let cf = &state_f.coeffs;
    let kernel: Vec<f64> = (0..2 * side - 1)
        .map(|d| dipole_weight(d as i32 - side as i32 + 1))
        .collect();
    let w = |p: usize, q: usize| kernel[p + side - 1 - q];

    // along m: a[mf][ni] = Σ_mi w(mi − mf) C_i[mi][ni]
    let mut a = vec![Complex64::new(0.0, 0.0); side * side];
    for mf in 0..side {
        for mi in 0..side {
            let wt = w(mi, mf);
            if wt == 0.0 {
                continue;
            }
            let src = &ci[mi * side..(mi + 1) * side];
            let dst = &mut a[mf * side..(mf + 1) * side];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * wt;
            }
        }
    }
    // along n, contracted with conj(C_f)
    let mut total = Complex64::new(0.0, 0.0);
    for mf in 0..side {
        let row = &a[mf * side..(mf + 1) * side];
        for nf in 0..side {
            let mut b = Complex64::new(0.0, 0.0);
            for (ni, v) in row.iter().enumerate() {
                b += v * w(ni, nf);
            }
            total += cf[mf * side + nf].conj() * b;
        }
    }
    Ok(total * (-a_p * a_p / (4.0 * PI * PI)))
}

/// α̃ = (Ω κ_Y/c, Ω κ_X/c, β κ_X κ_Y), the α vector without its ⟨XY⟩ factor.
pub fn alpha_reduced(omega_fi: f64, k: &RotatedWavevector, beta: f64) -> [f64; 3] {
    [
        omega_fi / C_LIGHT * k.ky,
        omega_fi / C_LIGHT * k.kx,
        beta * k.kx * k.ky,
    ]
}

/// Controls for the azimuthal cone quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Longitudinal coherence length (m).
    pub l_coh: f64,
    /// Relative tolerance between successive doublings.
    pub rel_tol: f64,
    /// Smallest node count; a power of two, at least 64.
    pub n_phi: usize,
    /// Largest node count before giving up.
    pub n_phi_max: usize,
    pub delta_approx: DeltaApprox,
}

impl QuadratureSettings {
    /// Defaults with L_coh equal to 10⁴ atomic spacings `d_string` (Å).
    pub fn with_string_spacing(d_string: f64) -> Self {
        Self {
            l_coh: 1e4 * d_string * ANGSTROM,
            rel_tol: 1e-6,
            n_phi: 64,
            n_phi_max: 1 << 23,
            delta_approx: DeltaApprox::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_phi < 64 || !self.n_phi.is_power_of_two() {
            return Err(Error::InvalidQuadrature(format!(
                "n_phi must be a power of two >= 64, got {}",
                self.n_phi
            )));
        }
        if self.n_phi_max < 2 * self.n_phi {
            return Err(Error::InvalidQuadrature(format!(
                "n_phi_max = {} leaves no room to double n_phi = {}",
                self.n_phi_max, self.n_phi
            )));
        }
        if !(self.l_coh > 0.0 && self.l_coh.is_finite()) {
            return Err(Error::InvalidQuadrature(format!(
                "coherence length must be positive, got {}",
                self.l_coh
            )));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidQuadrature(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }

    /// First node count of the doubling sequence for a ring of half-width
    /// `b_scaled` = ϰ sinΘ L/2 carrying harmonics up to `k_max`.
    ///
    /// e^{iB cos φ} has negligible Fourier content beyond B + O(B^{1/3}), so
    /// fewer nodes cannot converge and are skipped.
    pub fn start_nodes(&self, b_scaled: f64, k_max: usize) -> usize {
        let bandwidth = b_scaled.abs() + 10.0 * b_scaled.abs().cbrt() + k_max as f64 + 16.0;
        let need = bandwidth.ceil() as usize;
        self.n_phi.max(need.next_power_of_two())
    }
}

/// Converged cone integral m^cr for one transition and photon mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionAmplitude {
    pub value: Complex64,
    pub mode: PhotonMode,
    pub transition: Transition,
    /// Node count of the accepted estimate.
    pub n_phi: usize,
    /// |T(n_phi) − T(n_phi/2)|.
    pub error_estimate: f64,
}

/// Integrand of m^cr at internal azimuth φ_κ.
struct AmplitudeIntegrand {
    mode: PhotonMode,
    omega_fi: f64,
    beta: f64,
    delta: f64,
    l_coh: f64,
    d1: WignerD1,
    eps: [[Complex64; 3]; 3],
}

impl AmplitudeIntegrand {
    fn new(transition: &Transition, mode: &PhotonMode, beta: f64, s: &QuadratureSettings) -> Self {
        let eps = [1, 0, -1].map(|m_s| {
            polarization_vector(m_s, mode.theta, mode.phi).expect("spin projection in range")
        });
        Self {
            mode: *mode,
            omega_fi: transition.omega_fi,
            beta,
            delta: momentum_transfer(mode.omega, transition.omega_fi, beta, s.delta_approx),
            l_coh: s.l_coh,
            d1: wigner_d1(mode.theta_k),
            eps,
        }
    }

    fn eval(&self, phi_k: f64) -> Complex64 {
        let k = rotate_wavevector(&self.mode, phi_k);
        let alpha = alpha_reduced(self.omega_fi, &k, self.beta);
        let ring = sinc(0.5 * (k.kz - self.delta) * self.l_coh);
        let lambda = self.mode.helicity.value();
        let mut total = Complex64::new(0.0, 0.0);
        for (idx, m_s) in [1, 0, -1].into_iter().enumerate() {
            let e = &self.eps[idx];
            let dot = e[0] * alpha[0] + e[1] * alpha[1] + e[2] * alpha[2];
            let phase = Complex64::from_polar(1.0, (self.mode.m - m_s) as f64 * phi_k);
            total += dot * self.d1.get(m_s, lambda) * phase;
        }
        total * ring
    }
}

/// m^cr by the doubling periodic trapezoid rule on φ_κ ∈ [0, 2π).
///
/// The i^{−m} prefactor and constant factors of the full matrix element are
/// left out; they cancel from |m^cr|² up to the prefactor of
/// [`spectral_probability`].
pub fn emission_amplitude(
    transition: &Transition,
    mode: &PhotonMode,
    beta: f64,
    settings: &QuadratureSettings,
) -> Result<EmissionAmplitude> {
    emission_amplitude_from(transition, mode, beta, settings, 0.0)
}

/// As [`emission_amplitude`] with the quadrature nodes shifted by `origin`.
pub fn emission_amplitude_from(
    transition: &Transition,
    mode: &PhotonMode,
    beta: f64,
    settings: &QuadratureSettings,
    origin: f64,
) -> Result<EmissionAmplitude> {
    settings.validate()?;
    let integrand = AmplitudeIntegrand::new(transition, mode, beta, settings);
    let b_scaled = 0.5 * mode.kappa_perp() * mode.theta.sin() * settings.l_coh;
    let mut n = settings.start_nodes(b_scaled, mode.m.unsigned_abs() as usize + 3);
    if n > settings.n_phi_max / 2 {
        return Err(Error::InvalidQuadrature(format!(
            "ring bandwidth needs {n} nodes, above half of n_phi_max = {}",
            settings.n_phi_max
        )));
    }
    let mut f_max = 0.0f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let v = integrand.eval(origin + 2.0 * PI * j as f64 / n as f64);
        f_max = f_max.max(v.norm());
        sum += v;
    }
    let mut estimate = sum * (2.0 * PI / n as f64);
    loop {
        let mut mid = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let v = integrand.eval(origin + PI * (2 * j + 1) as f64 / n as f64);
            f_max = f_max.max(v.norm());
            mid += v;
        }
        sum += mid;
        n *= 2;
        let next = sum * (2.0 * PI / n as f64);
        let err = (next - estimate).norm();
        let floor = 1e-13 * 2.0 * PI * f_max;
        if err <= settings.rel_tol * next.norm() + floor {
            return Ok(EmissionAmplitude {
                value: next,
                mode: *mode,
                transition: *transition,
                n_phi: n,
                error_estimate: err,
            });
        }
        if 2 * n > settings.n_phi_max {
            return Err(Error::QuadratureNotConverged {
                n_phi: n,
                previous: format!("{estimate}"),
                last: format!("{next}"),
            });
        }
        estimate = next;
    }
}

/// Integrand of m^cr at one internal azimuth φ_κ.
pub fn amplitude_integrand(
    transition: &Transition,
    mode: &PhotonMode,
    beta: f64,
    settings: &QuadratureSettings,
    phi_k: f64,
) -> Complex64 {
    AmplitudeIntegrand::new(transition, mode, beta, settings).eval(phi_k)
}

/// Trapezoid estimates of m^cr at n, 2n, …, n·2^(levels−1) nodes.
pub fn amplitude_estimates(
    transition: &Transition,
    mode: &PhotonMode,
    beta: f64,
    settings: &QuadratureSettings,
    n: usize,
    levels: usize,
) -> Vec<(usize, Complex64)> {
    let integrand = AmplitudeIntegrand::new(transition, mode, beta, settings);
    let mut out = Vec::with_capacity(levels);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        sum += integrand.eval(2.0 * PI * j as f64 / n as f64);
    }
    let mut n = n;
    for level in 0..levels {
        if level > 0 {
            for j in 0..n {
                sum += integrand.eval(PI * (2 * j + 1) as f64 / n as f64);
            }
            n *= 2;
        }
        out.push((n, sum * (2.0 * PI / n as f64)));
    }
    out
}

/// Cosine harmonics ĥ_k, k = 0..=k_max, of one sinc ring.
#[derive(Debug, Clone, PartialEq)]
pub struct RingHarmonics {
    pub values: Vec<f64>,
    pub n_phi: usize,
    pub error_estimate: f64,
}

/// Harmonics of s(φ) = sinc(A − B cos φ) for each A in `a_scaled`, sharing B.
///
/// The trapezoid sums Σ_j w_j s(φ_j) T_k(cos φ_j) are evaluated through the
/// exact split T_k(c)/(A − Bc) = −D_k(c)/B + T_k(A/B)/(A − Bc), where D_k is the
/// Chebyshev quotient (T_k(c) − T_k(x₀))/(c − x₀). Only the k = 0 sum then
/// depends on the ring; the others come from node moments shared by the whole
/// batch. Rings far from resonance, where T_k(A/B) exceeds 10³, accumulate
/// every harmonic directly.
///
/// Each ring runs its own doubling sequence and stops updating as soon as it
/// converges, so a ring's result does not depend on the rest of the batch.
pub fn ring_harmonics(
    a_scaled: &[f64],
    b_scaled: f64,
    k_max: usize,
    settings: &QuadratureSettings,
) -> Result<Vec<RingHarmonics>> {
    settings.validate()?;
    let nk = k_max + 1;
    let mut rings: Vec<Ring> = a_scaled.iter().map(|&a| Ring::new(a, b_scaled, nk)).collect();
    let mut kernel = NodeBlock::new(b_scaled, nk);
    let mut moments = vec![0.0; 2 * nk];
    let mut active: Vec<usize> = (0..rings.len()).collect();
    let mut results: Vec<Option<RingHarmonics>> = vec![None; rings.len()];

    let mut n = settings.start_nodes(b_scaled, k_max);
    if n > settings.n_phi_max / 2 {
        return Err(Error::InvalidQuadrature(format!(
            "ring bandwidth needs {n} nodes, above half of n_phi_max = {}",
            settings.n_phi_max
        )));
    }
    // full grid of n nodes, folded onto [0, π] by evenness
    let half = n / 2;
    let mut base = (0..=half).map(|j| {
        let w = if j == 0 || j == half { 1.0 } else { 2.0 };
        (2.0 * PI * j as f64 / n as f64, w)
    });
    kernel.sweep(&mut base, &mut rings, &active, &mut moments);
    for &t in &active {
        rings[t].previous = rings[t].harmonics(&moments, n);
    }
    loop {
        let mut mid = (0..n / 2).map(|j| (PI * (2 * j + 1) as f64 / n as f64, 2.0));
        kernel.sweep(&mut mid, &mut rings, &active, &mut moments);
        n *= 2;
        let mut still = Vec::with_capacity(active.len());
        for &t in &active {
            let ring = &mut rings[t];
            let values = ring.harmonics(&moments, n);
            let mut err = 0.0f64;
            let mut scale = 0.0f64;
            for (v, p) in values.iter().zip(&ring.previous) {
                err = err.max((v - p).abs());
                scale = scale.max(v.abs());
            }
            if err <= settings.rel_tol * scale + 1e-14 {
                results[t] = Some(RingHarmonics {
                    values,
                    n_phi: n,
                    error_estimate: err,
                });
            } else {
                ring.previous = values;
                still.push(t);
            }
        }
        active = still;
        if active.is_empty() {
            break;
        }
        if 2 * n > settings.n_phi_max {
            let t = active[0];
            return Err(Error::QuadratureNotConverged {
                n_phi: n,
                previous: format!("{:?}", rings[t].previous),
                last: format!("{:?}", rings[t].harmonics(&moments, n)),
            });
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every ring converged")).collect())
}

/// Per-ring accumulator state.
struct Ring {
    a: f64,
    sin_a: f64,
    cos_a: f64,
    b: f64,
    /// Chebyshev quotient coefficients d[k][l] and T_k(A/B); `None` when the
    /// ring accumulates every harmonic directly.
    split: Option<(Vec<f64>, Vec<f64>)>,
    /// Σ w s T_k; only k = 0 is used for split rings.
    sums: Vec<f64>,
    previous: Vec<f64>,
}

impl Ring {
    fn new(a: f64, b: f64, nk: usize) -> Self {
        let (sin_a, cos_a) = a.sin_cos();
        let x0 = a / b;
        let split = if b.abs() >= 1.0 && x0.abs() <= 2.0 {
            let (d, tk) = chebyshev_quotients(x0, nk);
            // T_k(x₀) amplifies the rounding of the k = 0 sum
            tk.iter().all(|t| t.abs() <= 1e3).then_some((d, tk))
        } else {
            None
        };
        Self {
            a,
            sin_a,
            cos_a,
            b,
            split,
            sums: vec![0.0; nk],
            previous: vec![0.0; nk],
        }
    }

    fn harmonics(&self, moments: &[f64], n: usize) -> Vec<f64> {
        let nk = self.sums.len();
        let scale = 1.0 / n as f64;
        match &self.split {
            None => self.sums.iter().map(|s| s * scale).collect(),
            Some((d, tk)) => {
                let (cm, sm) = moments.split_at(nk);
                let h0 = self.sums[0];
                (0..nk)
                    .map(|k| {
                        let mut poly = 0.0;
                        for l in 0..k {
                            poly += d[k * nk + l] * (self.sin_a * cm[l] - self.cos_a * sm[l]);
                        }
                        (tk[k] * h0 - poly / self.b) * scale
                    })
                    .collect()
            }
        }
    }
}

/// Chebyshev coefficients of D_k(c) = (T_k(c) − T_k(x₀))/(c − x₀), stored as
/// d[k·nk + l], together with T_k(x₀).
fn chebyshev_quotients(x0: f64, nk: usize) -> (Vec<f64>, Vec<f64>) {
    let mut tk = vec![0.0; nk];
    tk[0] = 1.0;
    if nk > 1 {
        tk[1] = x0;
    }
    for k in 2..nk {
        tk[k] = 2.0 * x0 * tk[k - 1] - tk[k - 2];
    }
    let mut d = vec![0.0; nk * nk];
    if nk > 1 {
        d[nk] = 1.0;
    }
    // D_{k+1} = 2c·D_k + 2T_k(x₀) − D_{k−1}, with 2c·T_l = T_{l+1} + T_{|l−1|}
    for k in 1..nk.saturating_sub(1) {
        let mut next = vec![0.0; nk];
        for l in 0..k {
            let v = d[k * nk + l];
            if l == 0 {
                next[1] += 2.0 * v;
            } else {
                next[l + 1] += v;
                next[l - 1] += v;
            }
        }
        next[0] += 2.0 * tk[k];
        for l in 0..nk {
            next[l] -= d[(k - 1) * nk + l];
        }
        d[(k + 1) * nk..(k + 2) * nk].copy_from_slice(&next);
    }
    (d, tk)
}

const BLOCK: usize = 256;
const LANES: usize = 8;

/// Fixed-order dot product over one block.
fn lane_dot(x: &[f64], y: &[f64]) -> f64 {
    let mut lanes = [0.0; LANES];
    for (xs, ys) in x.chunks_exact(LANES).zip(y.chunks_exact(LANES)) {
        for l in 0..LANES {
            lanes[l] += xs[l] * ys[l];
        }
    }
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))
}

/// Blocked node data: weights, cos φ, sin/cos(B cos φ) and Chebyshev columns.
///
/// Nodes are consumed in fixed blocks and every dot product uses the same
/// lane order, so sums never depend on which rings are active.
struct NodeBlock {
    b: f64,
    nk: usize,
    len: usize,
    weight: Vec<f64>,
    cos_phi: Vec<f64>,
    wsin_bc: Vec<f64>,
    wcos_bc: Vec<f64>,
    cheb: Vec<f64>,
    samples: Vec<f64>,
}

impl NodeBlock {
    fn new(b: f64, nk: usize) -> Self {
        Self {
            b,
            nk,
            len: 0,
            weight: vec![0.0; BLOCK],
            cos_phi: vec![0.0; BLOCK],
            wsin_bc: vec![0.0; BLOCK],
            wcos_bc: vec![0.0; BLOCK],
            cheb: vec![0.0; nk * BLOCK],
            samples: vec![0.0; BLOCK],
        }
    }

    fn load(&mut self, nodes: &mut dyn Iterator<Item = (f64, f64)>) {
        self.len = 0;
        for (phi, w) in nodes.take(BLOCK) {
            let j = self.len;
            let c = phi.cos();
            let (s, cb) = (self.b * c).sin_cos();
            self.weight[j] = w;
            self.cos_phi[j] = c;
            self.wsin_bc[j] = w * s;
            self.wcos_bc[j] = w * cb;
            self.len += 1;
        }
        // zero weights keep the lane loops branch-free
        for j in self.len..BLOCK {
            self.weight[j] = 0.0;
            self.cos_phi[j] = 0.0;
            self.wsin_bc[j] = 0.0;
            self.wcos_bc[j] = 0.0;
        }
        let (first, rest) = self.cheb.split_at_mut(BLOCK);
        first.fill(1.0);
        if self.nk > 1 {
            rest[..BLOCK].copy_from_slice(&self.cos_phi);
        }
        for k in 2..self.nk {
            let (done, todo) = self.cheb.split_at_mut(k * BLOCK);
            let prev = &done[(k - 1) * BLOCK..];
            let prev2 = &done[(k - 2) * BLOCK..(k - 1) * BLOCK];
            for (((t, p), p2), c) in todo[..BLOCK]
                .iter_mut()
                .zip(prev)
                .zip(prev2)
                .zip(&self.cos_phi)
            {
                *t = 2.0 * c * p - p2;
            }
        }
    }

    fn sweep(
        &mut self,
        nodes: &mut dyn Iterator<Item = (f64, f64)>,
        rings: &mut [Ring],
        active: &[usize],
        moments: &mut [f64],
    ) {
        let nk = self.nk;
        loop {
            self.load(nodes);
            if self.len == 0 {
                return;
            }
            for k in 0..nk {
                let col = &self.cheb[k * BLOCK..(k + 1) * BLOCK];
                moments[k] += lane_dot(&self.wcos_bc, col);
                moments[nk + k] += lane_dot(&self.wsin_bc, col);
            }
            for &t in active {
                self.samples_for(&rings[t]);
                let ring = &mut rings[t];
                let used = if ring.split.is_some() { 1 } else { nk };
                for k in 0..used {
                    let col = &self.cheb[k * BLOCK..(k + 1) * BLOCK];
                    ring.sums[k] += lane_dot(&self.samples, col);
                }
            }
        }
    }

    /// Weighted ring samples w_j·s(φ_j).
    fn samples_for(&mut self, ring: &Ring) {
        let (a, b, sa, ca) = (ring.a, self.b, ring.sin_a, ring.cos_a);
        let mut near = false;
        for (((s, c), wc), ws) in self
            .samples
            .iter_mut()
            .zip(&self.cos_phi)
            .zip(&self.wcos_bc)
            .zip(&self.wsin_bc)
        {
            let u = a - b * c;
            near |= u.abs() < 1e-3;
            *s = (sa * wc - ca * ws) / u;
        }
        if near {
            for j in 0..self.len {
                let u = a - b * self.cos_phi[j];
                if u.abs() < 1e-3 {
                    self.samples[j] = self.weight[j] * sinc(u);
                }
            }
        }
        for s in &mut self.samples[self.len..] {
            *s = 0.0;
        }
    }
}

/// Fourier coefficients in φ' = φ_κ − Φ of α̃·ε^{m_s}, split as
/// F_{m_s,j} = (Ω_fi/c)·p[m_s][j] + β·q[m_s][j], j = −2..=2.
///
/// Rows run over m_s = +1, 0, −1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeCoefficients {
    pub p: [[Complex64; 5]; 3],
    pub q: [[Complex64; 5]; 3],
}

impl ConeCoefficients {
    pub fn new(kappa_perp: f64, kappa_z: f64, theta: f64, phi: f64) -> Self {
        const NODES: usize = 8;
        let eps = [1, 0, -1]
            .map(|m_s| polarization_vector(m_s, theta, phi).expect("spin projection in range"));
        let mut p = [[Complex64::new(0.0, 0.0); 5]; 3];
        let mut q = [[Complex64::new(0.0, 0.0); 5]; 3];
        for l in 0..NODES {
            let phi_p = 2.0 * PI * l as f64 / NODES as f64;
            let k = rotate_cone_vector(kappa_perp, kappa_z, theta, phi, phi_p + phi);
            for (s, e) in eps.iter().enumerate() {
                let lin = e[0] * k.ky + e[1] * k.kx;
                let quad = e[2] * (k.kx * k.ky);
                for j in -2i32..=2 {
                    let w = Complex64::from_polar(1.0 / NODES as f64, -(j as f64) * phi_p);
                    p[s][(j + 2) as usize] += lin * w;
                    q[s][(j + 2) as usize] += quad * w;
                }
            }
        }
        Self { p, q }
    }
}

/// m^cr assembled from ring harmonics; equals the trapezoid estimate of
/// [`emission_amplitude`] on the nodes Φ + 2πj/N.
///
/// `harmonics` must reach index |m| + 3.
pub fn amplitude_from_harmonics(
    cone: &ConeCoefficients,
    omega_fi: f64,
    beta: f64,
    d1: &WignerD1,
    m: i32,
    lambda: i32,
    phi: f64,
    harmonics: &[f64],
) -> Complex64 {
    let scale = omega_fi / C_LIGHT;
    let mut total = Complex64::new(0.0, 0.0);
    for (s, m_s) in [1, 0, -1].into_iter().enumerate() {
        let d = d1.get(m_s, lambda);
        if d == 0.0 {
            continue;
        }
        let mut inner = Complex64::new(0.0, 0.0);
        for j in -2i32..=2 {
            let k = (j + m - m_s).unsigned_abs() as usize;
            let f = cone.p[s][(j + 2) as usize] * scale + cone.q[s][(j + 2) as usize] * beta;
            inner += f * harmonics[k];
        }
        total += inner * Complex64::from_polar(d, (m - m_s) as f64 * phi);
    }
    total * (2.0 * PI)
}

/// dW_fi/dθ_κdω for one helicity (per rad per rad/s).
pub fn spectral_probability(
    transition: &Transition,
    mode: &PhotonMode,
    beta: f64,
    amplitude: Complex64,
) -> f64 {
    let k = mode.kappa();
    FINE_STRUCTURE / (16.0 * HBAR_J_S * PI.powi(3) * C_LIGHT * beta)
        * mode.theta_k.sin()
        * transition.xy.norm_sqr()
        * k.powi(4)
        * amplitude.norm_sqr()
}

/// Prefactor α/(16π³β)·sinθ_κ·(ω/c)⁵ of the azimuth-averaged intensity.
pub fn intensity_prefactor(omega: f64, theta_k: f64, beta: f64) -> f64 {
    FINE_STRUCTURE / (16.0 * PI.powi(3) * beta) * theta_k.sin() * (omega / C_LIGHT).powi(5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::Basis;
    use crate::kinematics::Helicity;
    use approx::assert_relative_eq;

    fn plane_wave(cutoff: usize, m: i32, n: i32, c: Complex64) -> TransverseState {
        let basis = Basis { cutoff };
        let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
        coeffs[basis.index(m, n).unwrap()] = c;
        TransverseState {
            band_index: 0,
            energy: 0.0,
            coeffs,
            k_perp: [0.0, 0.0],
            cutoff,
        }
    }

    fn transition(omega_fi: f64) -> Transition {
        Transition {
            i: 1,
            f: 0,
            omega_fi,
            xy: Complex64::new(1e-21, 0.0),
        }
    }

    fn short_settings() -> QuadratureSettings {
        QuadratureSettings {
            l_coh: 2e-8,
            ..QuadratureSettings::with_string_spacing(5.431)
        }
    }

    #[test]
    fn single_plane_wave_has_no_xy() {
        let s = plane_wave(8, 2, -1, Complex64::new(1.0, 0.0));
        assert_eq!(xy_matrix_element(&s, &s, 2.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn unit_index_step_gives_closed_form() {
        let a = 2.7155;
        let ci = Complex64::new(0.6, 0.8);
        let cf = Complex64::new(0.0, 1.0);
        let si = plane_wave(8, 1, 1, ci);
        let sf = plane_wave(8, 0, 0, cf);
        let got = xy_matrix_element(&si, &sf, a).unwrap();
        let want = cf.conj() * ci * (-a * a / (4.0 * PI * PI));
        assert_relative_eq!(got.re, want.re, max_relative = 1e-14);
        assert_relative_eq!(got.im, want.im, max_relative = 1e-14);
    }

    #[test]
    fn mismatched_cutoffs_are_rejected() {
        let a = plane_wave(8, 0, 0, Complex64::new(1.0, 0.0));
        let b = plane_wave(9, 0, 0, Complex64::new(1.0, 0.0));
        assert!(matches!(
            xy_matrix_element(&a, &b, 1.0),
            Err(Error::CutoffMismatch(8, 9))
        ));
    }

    #[test]
    fn alpha_reduced_components() {
        let k = RotatedWavevector {
            kx: 0.0,
            ky: 3.0,
            kz: 1.0,
        };
        let a = alpha_reduced(2.0 * C_LIGHT, &k, 0.9);
        assert_eq!(a, [6.0, 0.0, 0.0]);
        let k = RotatedWavevector {
            kx: 2.0,
            ky: 3.0,
            kz: 1.0,
        };
        assert_eq!(alpha_reduced(C_LIGHT, &k, 0.0)[2], 0.0);
    }

    #[test]
    fn settings_validation() {
        let mut s = short_settings();
        s.n_phi = 48;
        assert!(s.validate().is_err());
        s.n_phi = 96;
        assert!(s.validate().is_err());
        s.n_phi = 64;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn harmonics_match_direct_trapezoid() {
        let s = short_settings();
        let mode = PhotonMode::new(
            crate::constants::kev_to_omega(20.0),
            30f64.to_radians(),
            6,
            Helicity::Plus,
            31f64.to_radians(),
            0.7,
        )
        .unwrap();
        let beta = 0.9987;
        let t = transition(crate::constants::ev_to_omega(40.0));
        let direct = emission_amplitude(&t, &mode, beta, &s).unwrap();

        let delta = momentum_transfer(mode.omega, t.omega_fi, beta, s.delta_approx);
        let a = 0.5 * (mode.kappa_z() * mode.theta.cos() - delta) * s.l_coh;
        let b = 0.5 * mode.kappa_perp() * mode.theta.sin() * s.l_coh;
        let h = ring_harmonics(&[a], b, 9, &s).unwrap();
        let cone = ConeCoefficients::new(mode.kappa_perp(), mode.kappa_z(), mode.theta, mode.phi);
        let fast = amplitude_from_harmonics(
            &cone,
            t.omega_fi,
            beta,
            &wigner_d1(mode.theta_k),
            mode.m,
            1,
            mode.phi,
            &h[0].values,
        );
        assert!(direct.value.norm() > 0.0);
        assert!((fast - direct.value).norm() <= 1e-5 * direct.value.norm());
    }

    #[test]
    fn batch_does_not_change_single_ring() {
        let s = short_settings();
        let b = 40.0;
        let alone = ring_harmonics(&[12.5], b, 10, &s).unwrap();
        let batch = ring_harmonics(&[-300.0, 12.5, 39.9], b, 10, &s).unwrap();
        assert_eq!(alone[0], batch[1]);
    }

    #[test]
    fn split_harmonics_equal_plain_trapezoid() {
        let s = short_settings();
        let b = 3000.0;
        // resonant, tangent and far rings exercise both accumulation paths
        let a = [0.3 * b, -0.999 * b, 1.7 * b, 5.0 * b];
        let h = ring_harmonics(&a, b, 15, &s).unwrap();
        for (ring, &a) in h.iter().zip(&a) {
            let n = ring.n_phi;
            let scale = ring.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (k, v) in ring.values.iter().enumerate() {
                let plain: f64 = (0..n)
                    .map(|j| {
                        let phi = 2.0 * PI * j as f64 / n as f64;
                        sinc(a - b * phi.cos()) * (k as f64 * phi).cos()
                    })
                    .sum::<f64>()
                    / n as f64;
                assert!((v - plain).abs() <= 1e-9 * scale, "k = {k}: {v} vs {plain}");
            }
        }
    }

    #[test]
    fn chebyshev_quotient_identity() {
        let (d, tk) = chebyshev_quotients(0.37, 8);
        for &c in &[-0.9, -0.2, 0.5, 0.99] {
            let t: Vec<f64> = (0..8).map(|k| (k as f64 * f64::acos(c)).cos()).collect();
            for k in 0..8 {
                let dk: f64 = (0..8).map(|l| d[k * 8 + l] * t[l]).sum();
                assert_relative_eq!(t[k], (c - 0.37) * dk + tk[k], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn ring_harmonics_of_flat_ring() {
        // B = 0: s is constant, only the k = 0 harmonic survives
        let s = short_settings();
        let h = ring_harmonics(&[0.7], 0.0, 4, &s).unwrap();
        assert_relative_eq!(h[0].values[0], sinc(0.7), max_relative = 1e-14);
        for v in &h[0].values[1..] {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn probability_scales_with_xy_squared() {
        let mode = PhotonMode::new(1e19, 0.5, 6, Helicity::Minus, 0.5, 0.0).unwrap();
        let mut t = transition(1e16);
        let amp = Complex64::new(2.0, -1.0);
        let p1 = spectral_probability(&t, &mode, 0.99, amp);
        t.xy *= 2.0;
        let p2 = spectral_probability(&t, &mode, 0.99, amp);
        assert_relative_eq!(p2, 4.0 * p1, max_relative = 1e-14);
        assert_eq!(spectral_probability(&t, &mode, 0.99, Complex64::new(0.0, 0.0)), 0.0);
    }
}

//! Physical constants (CODATA 2018) in the unit systems used across the crate.
//!
//! The crystal and band modules work in eV and Å; the photon side works in SI.

/// Speed of light (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;

/// Reduced Planck constant (eV·s).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// Reduced Planck constant (J·s).
pub const HBAR_J_S: f64 = 1.054_571_817e-34;

/// ħc (eV·Å).
pub const HBAR_C_EV_A: f64 = 1_973.269_804;

/// Electron rest energy (eV).
pub const ELECTRON_MASS_EV: f64 = 510_998.950;

/// Fine-structure constant.
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035_999_084;

/// e²/(4πε₀) (eV·Å).
pub const E2_EV_A: f64 = FINE_STRUCTURE * HBAR_C_EV_A;

/// Bohr radius (Å).
pub const BOHR_A: f64 = 0.529_177_210_903;

/// Metres per ångström.
pub const ANGSTROM: f64 = 1e-10;

/// Converts a photon energy in keV to angular frequency (rad/s).
pub fn kev_to_omega(kev: f64) -> f64 {
    kev * 1e3 / HBAR_EV_S
}

/// Converts an angular frequency (rad/s) to photon energy in keV.
pub fn omega_to_kev(omega: f64) -> f64 {
    omega * HBAR_EV_S * 1e-3
}

/// Converts an energy difference in eV to angular frequency (rad/s).
pub fn ev_to_omega(ev: f64) -> f64 {
    ev / HBAR_EV_S
}

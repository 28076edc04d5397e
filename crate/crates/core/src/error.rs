use thiserror::Error;

/// Errors raised by the simulation modules.
///
/// Every variant is tagged with the module that produced it so that CLI
/// diagnostics can be attributed without extra context.
#[derive(Debug, Error)]
pub enum Error {
    #[error("[kinematics] invalid spin projection {0}; expected -1, 0 or +1")]
    InvalidSpinProjection(i32),

    #[error("[kinematics] invalid photon mode: {0}")]
    InvalidMode(String),

    #[error("[potential] invalid crystal model: {0}")]
    InvalidCrystal(String),

    #[error(
        "[potential] well depth not converged: {depth_low:.6e} eV at cutoff {cutoff} vs {depth_high:.6e} eV at cutoff {}",
        2 * cutoff
    )]
    WellDepthNotConverged {
        cutoff: usize,
        depth_low: f64,
        depth_high: f64,
    },

    #[error("[bands] invalid input: {0}")]
    InvalidBands(String),

    #[error("[bands] eigensolver did not converge for a {size}x{size} matrix (residual {residual:.3e})")]
    EigenNotConverged { size: usize, residual: f64 },

    #[error("[bands] quasi-momentum mismatch: states solved at ({have_x:.6e}, {have_y:.6e}) but incidence folds to ({want_x:.6e}, {want_y:.6e})")]
    QuasiMomentumMismatch {
        have_x: f64,
        have_y: f64,
        want_x: f64,
        want_y: f64,
    },

    #[error("[radiation] mismatched Fourier cutoffs: {0} vs {1}")]
    CutoffMismatch(usize, usize),

    #[error("[radiation] invalid quadrature request: {0}")]
    InvalidQuadrature(String),

    #[error("[radiation] quadrature not converged at n_phi = {n_phi}: last estimates {previous} and {last}")]
    QuadratureNotConverged {
        n_phi: usize,
        previous: String,
        last: String,
    },

    #[error("[scan] {0}")]
    Scan(String),

    #[error("[scan] |m| = {0} is below 3; the azimuth-averaged intensity is undefined, use the fixed-azimuth spectral probability instead")]
    TamTooSmall(i32),

    #[error("[scan] no emission-eligible transitions")]
    NoTransitions,

    #[error("[config] line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("[cache] {0}")]
    Cache(String),

    #[error("[cli] unknown figure '{0}'; expected one of fig1, fig2, fig3, fig4, fig5-spectra, fig5-map")]
    UnknownFigure(String),

    #[error("[io] {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

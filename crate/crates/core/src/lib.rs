//! Spectral-angular distribution of twisted photons emitted by relativistic
//! electrons under axial channeling.

pub mod bands;
pub mod cache;
pub mod config;
pub mod constants;
pub mod eigen;
pub mod error;
pub mod figures;
pub mod kinematics;
pub mod model;
pub mod output;
pub mod potential;
pub mod radiation;
pub mod scan;

extern crate lapack_src;

pub use error::{Error, Result};

//! One-bit weighted SPICE for radio-frequency interference mitigation and
//! echo recovery in ultra-wideband radar that samples against a
//! time-varying threshold (CTBV sampling).
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: CPI configuration, threshold schedule, one-bit quantisation
//!   and the Fourier/pulse dictionaries.
//! - [`scene`]: synthetic echo, RFI and noise generation.
//! - [`di`]: the digital-integration baseline.
//! - [`spice_hp`]: weighted SPICE on high-precision complex data.
//! - [`spice1b`]: the one-bit majorization-minimization solver.
//! - [`eval`]: metrics, spectra, measured-data ingest and parameter sweeps.

pub mod di;
pub mod error;
pub mod eval;
pub mod model;
pub mod scene;
pub mod spice1b;
pub mod spice_hp;

pub use error::{Error, Result};
pub use nalgebra::{Complex, DMatrix, DVector};

/// Weighting rule shared by the high-precision and one-bit solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum WeightKind {
    Spice,
    Likes,
    Iaa,
}

impl WeightKind {
    pub const ALL: [WeightKind; 3] = [WeightKind::Spice, WeightKind::Likes, WeightKind::Iaa];
}

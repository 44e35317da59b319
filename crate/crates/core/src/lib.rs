//! Delay alignment modulation (DAM) for multi-IRS aided wideband links.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: scenario geometry and wideband channel realizations
//!   (array responses, path loss, Rician direct link, integer tap delays).
//! - [`dam`]: the DAM signal model. Delay pre-compensation, cascaded and
//!   delay-difference grouped channels, closed-form SINR and a time-domain
//!   Monte Carlo oracle.
//! - [`zf`], [`mrt`], [`mmse`]: the three path-based beamforming and IRS phase
//!   designs.
//! - [`asymptotic`]: closed-form analysis for many BS antennas, and the
//!   centralized versus distributed IRS comparison.
//! - [`ofdm`]: the OFDM benchmark (DFT channel, water-filling, CP overhead).
//! - [`metrics`] and [`qam`]: spectral efficiency, BER and PAPR.
//! - [`experiment`]: configuration-driven sweeps that emit CSV tables.
//!
//! Vectors and matrices are `nalgebra` types over `Complex64`. Path index `0`
//! is always the direct BS-user link and path `l >= 1` is the link reflected by
//! IRS `l`; per-IRS containers are indexed `l - 1`.

pub mod asymptotic;
pub mod channel;
pub mod dam;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod mmse;
pub mod mrt;
pub mod ofdm;
pub mod qam;
pub mod zf;

pub use num_complex::Complex64;

pub use channel::{ChannelRealization, Scenario};
pub use dam::{BeamformerSet, EffectiveChannelTable, PhaseConfig};
pub use error::{Error, Result};

/// Complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
/// Complex dense matrix.
pub type CMatrix = nalgebra::DMatrix<Complex64>;

/// Speed of light used for delay discretization (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Converts dB to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

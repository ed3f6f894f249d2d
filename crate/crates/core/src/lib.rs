//! Core library for semi-assisted GNSS spreading-code authentication.
//!
//! The pipeline has two halves. The ground side models an encrypted E6C
//! chip stream, cuts code sequences out of it at scheduled slots,
//! re-encrypts them with keys derived from a delayed-disclosure chain and
//! publishes them as `.recs` files together with `.bgd` group-delay files.
//! The receiver side records a baseband snapshot around the expected
//! arrival times, waits for key disclosure, decrypts the published
//! sequences back into chip replicas, correlates them against the
//! snapshot and checks the resulting pseudoranges for consistency.
//!
//! Modules map onto those stages:
//!
//! - [`crypto`]: key derivation, IV construction, offset randomization,
//!   sequence encryption/decryption (SHA-256 / AES-256).
//! - [`tesla`]: one-way key chain with delayed disclosure.
//! - [`recs_file`] / [`bgd_file`]: bit-exact file codecs.
//! - [`keystream`]: the encrypted chip stream model.
//! - [`ground`]: slot scheduling and `.recs`/`.bgd` generation.
//! - [`snapshot`] / [`synth`]: complex baseband snapshot container, file
//!   codec and multi-satellite signal synthesis.
//! - [`ranging`]: snapshot windows and the E1-to-E6 bias chain.
//! - [`acquire`]: snapshot correlation producing the E6C measurement.
//! - [`auth`]: variance budget, thresholds and the position verdict.
//!
//! Sample buffers and the numeric kernels are generic over the scalar
//! type (`f32` or `f64`) through [`scalar::Scalar`]; concrete aliases
//! live at the crate root. Time bookkeeping is always `f64` seconds.

pub mod acquire;
pub mod auth;
pub mod bgd_file;
pub mod crypto;
pub mod ground;
pub mod keystream;
pub mod ranging;
pub mod recs_file;
pub mod scalar;
pub mod snapshot;
pub mod synth;
pub mod tesla;

pub use num_complex::Complex;
pub use scalar::Scalar;

/// E6C chip rate, chips per second.
pub const CHIP_RATE: f64 = 5.115e6;
/// E6C chip rate as an exact integer, for chip-index arithmetic.
pub const CHIP_RATE_INT: u64 = 5_115_000;
/// E1 carrier frequency, Hz.
pub const F1_HZ: f64 = 1_575_420_000.0;
/// E6 carrier frequency, Hz.
pub const F6_HZ: f64 = 1_278_750_000.0;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Ionospheric group-delay constant: delay_m = 40.3 * TEC / f^2.
pub const IONO_CONST: f64 = 40.3;
/// Duration of one randomization offset unit, seconds (8 ms).
pub const OFFSET_UNIT_S: f64 = 0.008;
/// Chips per randomization offset unit (8 ms at 5.115 Mchip/s).
pub const CHIPS_PER_OFFSET_UNIT: u64 = 40_920;
/// Chips per millisecond.
pub const CHIPS_PER_MS: u64 = 5_115;
/// Seconds per key-chain block.
pub const BLOCK_SECONDS: u64 = 30;
/// Highest satellite ID carried in the offset allocation tables.
pub const SVID_MAX: u8 = 36;

/// Ionospheric group delay on E1 in meters for a given slant TEC
/// (electrons/m^2).
pub fn iono_delay_e1_m(tec: f64) -> f64 {
    IONO_CONST * tec / (F1_HZ * F1_HZ)
}

/// Snapshot of `f32` samples (the on-disk representation).
pub type Snapshot32 = snapshot::Snapshot<f32>;
/// Snapshot of `f64` samples (the default in-memory representation).
pub type Snapshot64 = snapshot::Snapshot<f64>;
/// Default-precision E1 estimate set.
pub type E1Estimates64 = ranging::E1Estimates<f64>;
/// Default-precision bias configuration.
pub type BiasConfig64 = ranging::BiasConfig<f64>;
/// Default-precision error budget.
pub type ErrorBudget64 = auth::ErrorBudget<f64>;

//! Receiver-side snapshot windows and the E1-to-E6 bias chain.
//!
//! All functions are pure scalar arithmetic, generic over the sample
//! scalar; the pipeline instantiates them with `f64`.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::{CHIP_RATE, F1_HZ, F6_HZ, OFFSET_UNIT_S, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RangingError {
    #[error("at least one satellite required")]
    NoSatellites,
    #[error("estimate invariant violated: {0}")]
    InvalidEstimate(String),
}

fn c<T: Scalar>(v: f64) -> T {
    T::from_f64_c(v)
}

/// Aiding measurements taken from the E1 side for one satellite.
///
/// `tau_e1` is the arrival time of the E1 code epoch aligned with the
/// slot's nominal sequence start, relative to that epoch's GST second
/// (so it carries the propagation time and both clock offsets).
/// `i_e1_hat` is the modelled part of the E1 ionospheric delay in
/// meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct E1Estimates<T = f64> {
    pub svid: u8,
    pub tau_e1: T,
    pub doppler_e1: T,
    pub dt_sat_e1: T,
    pub dt_rx_e1: T,
    pub tau_prop_hat: T,
    pub i_e1_hat: T,
}

impl<T: Scalar> E1Estimates<T> {
    pub fn validate(&self) -> Result<(), RangingError> {
        let all = [
            self.tau_e1,
            self.doppler_e1,
            self.dt_sat_e1,
            self.dt_rx_e1,
            self.tau_prop_hat,
            self.i_e1_hat,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(RangingError::InvalidEstimate(format!(
                "svid {}: non-finite field",
                self.svid
            )));
        }
        if self.tau_prop_hat < c(0.06) || self.tau_prop_hat > c(0.11) {
            return Err(RangingError::InvalidEstimate(format!(
                "svid {}: tau_prop_hat outside [0.06, 0.11]",
                self.svid
            )));
        }
        Ok(())
    }
}

/// Bias inputs for the E1-to-E6 prediction. Frequencies are the fixed
/// carrier constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasConfig<T = f64> {
    /// Published group-delay estimate, seconds.
    pub bgd_hat: T,
    /// Calibrated receiver hardware bias, seconds.
    pub hwb_hat: T,
    pub f1: T,
    pub f6: T,
}

impl<T: Scalar> BiasConfig<T> {
    pub fn new(bgd_hat: T, hwb_hat: T) -> Self {
        Self {
            bgd_hat,
            hwb_hat,
            f1: c(F1_HZ),
            f6: c(F6_HZ),
        }
    }
}

/// Extra ionospheric delay seen at E6 on top of the E1 estimate,
/// meters: `I_E1 * (f1^2/f6^2 - 1)`.
pub fn iono_excess<T: Scalar>(i_e1_hat_m: T, bias: &BiasConfig<T>) -> T {
    let ratio_sq = (bias.f1 / bias.f6) * (bias.f1 / bias.f6);
    i_e1_hat_m * (ratio_sq - T::one())
}

/// Complete E1-to-E6 time bias, seconds: group delay plus ionospheric
/// excess plus receiver hardware bias.
pub fn delta_e1e6<T: Scalar>(bias: &BiasConfig<T>, i_e1_hat_m: T) -> T {
    bias.bgd_hat + iono_excess(i_e1_hat_m, bias) / c(SPEED_OF_LIGHT) + bias.hwb_hat
}

/// Doppler expected at E6 from the E1 measurement: the exact carrier
/// ratio `f6/f1`.
pub fn doppler_e6<T: Scalar>(doppler_e1: T, bias: &BiasConfig<T>) -> T {
    doppler_e1 * bias.f6 / bias.f1
}

/// Predicted arrival of the sequence start: the E1 code phase plus the
/// bias chain.
pub fn predicted_code_phase<T: Scalar>(tau_e1: T, delta_e1e6: T) -> T {
    tau_e1 + delta_e1e6
}

/// Propagates an E1 code phase measured at `t_meas` to `epoch` using
/// the known range rate (m/s), for receivers whose measurement grid
/// does not hit the epoch exactly.
pub fn extrapolate_code_phase<T: Scalar>(
    tau_e1_at_meas: T,
    t_meas: T,
    epoch: T,
    range_rate_mps: T,
) -> T {
    tau_e1_at_meas + (epoch - t_meas) * range_rate_mps / c(SPEED_OF_LIGHT)
}

/// Per-satellite composite used by the window equations:
/// `tau_prop - dt_sat + delta_e1e6`.
fn window_offset<T: Scalar>(est: &E1Estimates<T>, bias: &BiasConfig<T>) -> T {
    est.tau_prop_hat - est.dt_sat_e1 + delta_e1e6(bias, est.i_e1_hat)
}

/// Length to keep open after the nominal start: the full randomization
/// span plus the sequence itself.
fn tail<T: Scalar>(dtau_max: u8, n_chips: u32) -> T {
    c::<T>(OFFSET_UNIT_S * f64::from(dtau_max) + f64::from(n_chips) / CHIP_RATE)
}

/// A-priori snapshot interval for a single satellite.
pub fn snapshot_window_single<T: Scalar>(
    gst_j: T,
    delta_recs_s: T,
    est: &E1Estimates<T>,
    bias: &BiasConfig<T>,
    dtau_max: u8,
    n_chips: u32,
) -> (T, T) {
    let start = gst_j + delta_recs_s + window_offset(est, bias) + est.dt_rx_e1;
    (start, start + tail(dtau_max, n_chips))
}

/// A-priori snapshot interval covering all satellites: earliest start
/// to latest end.
pub fn snapshot_window_all<T: Scalar>(
    gst_j: T,
    delta_recs_s: T,
    ests: &[E1Estimates<T>],
    biases: &[BiasConfig<T>],
    dtau_max: u8,
    n_chips: u32,
) -> Result<(T, T), RangingError> {
    if ests.is_empty() || ests.len() != biases.len() {
        return Err(RangingError::NoSatellites);
    }
    let dt_rx = ests[0].dt_rx_e1;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for (est, bias) in ests.iter().zip(biases) {
        let off = window_offset(est, bias);
        lo = lo.min(off);
        hi = hi.max(off);
    }
    let start = gst_j + delta_recs_s + lo + dt_rx;
    let end = gst_j + delta_recs_s + hi + dt_rx + tail(dtau_max, n_chips);
    Ok((start, end))
}

/// Narrowed per-satellite interval once the randomization offset is
/// known.
pub fn narrowed_window<T: Scalar>(t_start_single: T, dtau_units: u8, n_chips: u32) -> (T, T) {
    let start = t_start_single + c::<T>(OFFSET_UNIT_S * f64::from(dtau_units));
    (start, start + c(f64::from(n_chips) / CHIP_RATE))
}

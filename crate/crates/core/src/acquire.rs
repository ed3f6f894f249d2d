//! Snapshot correlation: acquire a decrypted chip sequence inside a
//! stored snapshot and produce the E6C pseudorange and Doppler.
//!
//! The search wipes the carrier at each trial frequency, runs an
//! FFT-based linear cross-correlation over integer sample lags around
//! the predicted arrival, picks the strongest cell inside the time
//! uncertainty, and refines the lag with a three-point parabolic fit on
//! the power peak. The detection metric is peak power over the median
//! off-peak power.

use num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::snapshot::Snapshot;
use crate::CHIP_RATE;

#[derive(Debug, Error, PartialEq)]
pub enum AcquireError {
    #[error("time uncertainty must be positive, frequency uncertainty non-negative")]
    InvalidSearchWindow,
    #[error("empty chip replica")]
    EmptyReplica,
    #[error(
        "snapshot [{snap_start:.6}, {snap_end:.6}] does not cover the replica span [{need_start:.6}, {need_end:.6}]"
    )]
    CoverageInsufficient {
        snap_start: f64,
        snap_end: f64,
        need_start: f64,
        need_end: f64,
    },
}

/// Time/frequency uncertainty around the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    /// Half-width of the lag search, seconds.
    pub t_max: f64,
    /// Half-width of the frequency search, Hz (0 = single bin).
    pub f_max: f64,
}

impl SearchWindow {
    pub fn validate(&self) -> Result<(), AcquireError> {
        if self.t_max > 0.0 && self.f_max >= 0.0 {
            Ok(())
        } else {
            Err(AcquireError::InvalidSearchWindow)
        }
    }

    /// Time uncertainty expressed in chips.
    pub fn from_chips(t_max_chips: f64, f_max: f64) -> Self {
        Self {
            t_max: t_max_chips / CHIP_RATE,
            f_max,
        }
    }
}

/// Detection configuration.
#[derive(Debug, Clone, Copy)]
pub struct AcqConfig {
    /// Peak-to-floor power ratio (linear) above which a correlation
    /// counts as detected.
    pub detection_threshold: f64,
}

impl AcqConfig {
    pub fn from_db(threshold_db: f64) -> Self {
        Self {
            detection_threshold: 10f64.powf(threshold_db / 10.0),
        }
    }
}

impl Default for AcqConfig {
    fn default() -> Self {
        // 13 dB keeps the false-alarm rate well under 1e-3 for
        // sequences of 5120 chips and longer.
        Self::from_db(13.0)
    }
}

/// Correlation outcome for one satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcsMeasurement {
    /// Measured arrival of the sequence start, receiver-clock seconds.
    pub tau_e6: f64,
    /// Frequency of the winning search bin, Hz.
    pub doppler_e6: f64,
    /// Peak power over median off-peak power, linear.
    pub peak_metric: f64,
    pub detected: bool,
}

/// Linear cross-correlation of `segment` against `replica` at lags
/// `0..n_lags`: `C[u] = sum_i segment[u + i] * conj(replica[i])`.
/// FFT-based; agrees with the direct sum to rounding error.
pub fn cross_correlate<T: Scalar>(
    segment: &[Complex<T>],
    replica: &[Complex<T>],
    n_lags: usize,
) -> Vec<Complex<T>> {
    let needed = segment.len().max(replica.len() + n_lags);
    let size = needed.next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(size);
    let ifft = planner.plan_fft_inverse(size);

    let zero = Complex::new(T::zero(), T::zero());
    let mut seg_f = vec![zero; size];
    seg_f[..segment.len()].copy_from_slice(segment);
    let mut rep_f = vec![zero; size];
    rep_f[..replica.len()].copy_from_slice(replica);
    fft.process(&mut seg_f);
    fft.process(&mut rep_f);

    let scale = T::from_f64_c(1.0 / size as f64);
    for (s, r) in seg_f.iter_mut().zip(&rep_f) {
        *s = *s * r.conj() * scale;
    }
    ifft.process(&mut seg_f);
    seg_f.truncate(n_lags);
    seg_f
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite powers"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Searches the snapshot for the chip sequence around the predicted
/// arrival `tau_hat` and Doppler `doppler_hat`.
///
/// The snapshot must cover the replica span at the prediction; the
/// extra `t_max` lag margins are zero-filled if they reach past either
/// edge of the buffer.
pub fn correlate_ecs<T: Scalar>(
    snapshot: &Snapshot<T>,
    chips: &[i8],
    tau_hat: f64,
    doppler_hat: f64,
    window: &SearchWindow,
    cfg: &AcqConfig,
) -> Result<EcsMeasurement, AcquireError> {
    window.validate()?;
    if chips.is_empty() {
        return Err(AcquireError::EmptyReplica);
    }
    let fs = snapshot.sample_rate;
    let duration = chips.len() as f64 / CHIP_RATE;
    if !snapshot.covers(tau_hat, tau_hat + duration) {
        return Err(AcquireError::CoverageInsufficient {
            snap_start: snapshot.start_gst(),
            snap_end: snapshot.end_gst(),
            need_start: tau_hat,
            need_end: tau_hat + duration,
        });
    }

    // Replica on the sample grid, one chip held over fs/Rc samples.
    let n_rep = (duration * fs).round() as usize;
    let chips_per_sample = CHIP_RATE / fs;
    let replica: Vec<Complex<T>> = (0..n_rep)
        .map(|i| {
            let chip = chips[((i as f64 * chips_per_sample) as usize).min(chips.len() - 1)];
            Complex::new(T::from_f64_c(f64::from(chip)), T::zero())
        })
        .collect();

    // Segment around the prediction, zero-filled beyond the buffer. The
    // margin covers the lag search plus extra chips whose correlation
    // cells only feed the noise-floor estimate.
    let samples_per_chip = (fs / CHIP_RATE).ceil() as usize;
    let search_margin = (window.t_max * fs).ceil() as usize + 2;
    let margin = search_margin.max(8 * samples_per_chip + 2);
    let k_hat = ((tau_hat - snapshot.start_gst()) * fs).round() as isize;
    let seg_len = n_rep + 2 * margin;
    let segment: Vec<Complex<T>> = (0..seg_len)
        .map(|i| snapshot.sample_or_zero(k_hat - margin as isize + i as isize))
        .collect();
    let n_lags = 2 * margin + 1;

    // Trial frequencies: single bin, or a grid no coarser than half the
    // inverse coherent integration time.
    let freqs: Vec<f64> = if window.f_max <= 0.0 {
        vec![doppler_hat]
    } else {
        let max_spacing = 0.5 / duration;
        let bins = ((2.0 * window.f_max / max_spacing).ceil() as usize).max(1) + 1;
        (0..bins)
            .map(|b| doppler_hat - window.f_max + 2.0 * window.f_max * b as f64 / (bins - 1) as f64)
            .collect()
    };

    // Lags allowed by the time uncertainty (tighter than the computed
    // margin, which includes interpolation guard cells).
    let max_lag_offset = (window.t_max * fs).floor() as usize;
    let lag_lo = margin - max_lag_offset;
    let lag_hi = margin + max_lag_offset;

    struct BinResult {
        freq: f64,
        peak_power: f64,
        peak_lag: usize,
        power: Vec<f64>,
    }
    let mut best: Option<BinResult> = None;
    let mut wiped = vec![Complex::new(T::zero(), T::zero()); seg_len];
    for &freq in &freqs {
        let w = -std::f64::consts::TAU * freq / fs;
        for (i, (out, s)) in wiped.iter_mut().zip(&segment).enumerate() {
            let (sin, cos) = (w * i as f64).sin_cos();
            let rot = Complex::new(T::from_f64_c(cos), T::from_f64_c(sin));
            *out = *s * rot;
        }
        let corr = cross_correlate(&wiped, &replica, n_lags);
        let power: Vec<f64> = corr.iter().map(|c| c.norm_sqr().to_f64_c()).collect();
        let (peak_lag, peak_power) = power[lag_lo..=lag_hi]
            .iter()
            .enumerate()
            .map(|(i, &p)| (i + lag_lo, p))
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite powers"))
            .expect("non-empty lag range");
        if best.as_ref().is_none_or(|b| peak_power > b.peak_power) {
            best = Some(BinResult {
                freq,
                peak_power,
                peak_lag,
                power,
            });
        }
    }
    let BinResult {
        freq: doppler_e6,
        peak_power,
        peak_lag,
        power,
    } = best.expect("at least one frequency bin");

    // Sub-sample refinement on the amplitude peak. The correlation of
    // rectangular chips is a triangle, for which the three-point
    // early-late fit is exact: delta = (a+ - a-) / (2 (a0 - min(a+, a-))).
    let (am, a0, ap) = (
        power[peak_lag - 1].sqrt(),
        power[peak_lag].sqrt(),
        power[peak_lag + 1].sqrt(),
    );
    let denom = 2.0 * (a0 - am.min(ap));
    let delta = if denom > f64::EPSILON * a0.max(1.0) {
        ((ap - am) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let tau_e6 = snapshot.start_gst()
        + (k_hat - margin as isize + peak_lag as isize) as f64 / fs
        + delta / fs;

    // Median off-peak floor: chip-spaced cells (mutually independent),
    // excluding one chip around the peak.
    let exclusion = samples_per_chip + 1;
    let mut off_peak: Vec<f64> = power
        .iter()
        .enumerate()
        .filter(|(u, _)| u.abs_diff(peak_lag) > exclusion && u % samples_per_chip == 0)
        .map(|(_, &p)| p)
        .collect();
    let floor = if off_peak.len() >= 4 {
        median(&mut off_peak)
    } else {
        // Degenerate search window: estimate the floor from the segment
        // energy instead.
        let seg_energy: f64 = segment.iter().map(|s| s.norm_sqr().to_f64_c()).sum();
        let rep_energy: f64 = replica.iter().map(|s| s.norm_sqr().to_f64_c()).sum();
        (seg_energy / seg_len as f64) * rep_energy
    };
    let peak_metric = if floor > 0.0 {
        peak_power / floor
    } else {
        f64::INFINITY
    };

    Ok(EcsMeasurement {
        tau_e6,
        doppler_e6,
        peak_metric,
        detected: peak_metric >= cfg.detection_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_correlation_matches_direct_sum() {
        // Small deterministic case; the heavy randomized oracle check
        // lives in the integration tests.
        let seg: Vec<Complex<f64>> = (0..64)
            .map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 0.21).cos()))
            .collect();
        let rep: Vec<Complex<f64>> = (0..16)
            .map(|i| Complex::new(if i % 3 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let fft = cross_correlate(&seg, &rep, 8);
        for (u, &c) in fft.iter().enumerate() {
            let direct: Complex<f64> = rep
                .iter()
                .enumerate()
                .map(|(i, r)| seg[u + i] * r.conj())
                .sum();
            assert!((c - direct).norm() < 1e-9, "lag {u}");
        }
    }

    #[test]
    fn search_window_validation() {
        assert!(SearchWindow {
            t_max: 0.0,
            f_max: 0.0
        }
        .validate()
        .is_err());
        assert!(SearchWindow {
            t_max: 1e-6,
            f_max: -1.0
        }
        .validate()
        .is_err());
        assert!(SearchWindow::from_chips(1.5, 0.0).validate().is_ok());
    }

    #[test]
    fn threshold_conversion() {
        let cfg = AcqConfig::from_db(13.0);
        assert!((cfg.detection_threshold - 19.952623149688797).abs() < 1e-9);
    }
}

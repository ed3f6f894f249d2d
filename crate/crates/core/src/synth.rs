//! Multi-satellite baseband snapshot synthesis.
//!
//! Each satellite contributes its keystream chips as BPSK with a total
//! arrival delay of
//!
//! ```text
//! D = tau_prop - dt_sat_e1 + bgd_true + I_E6/c + hwb_rx + dt_rx_e1 (+ extras)
//! ```
//!
//! carrier-rotated at the E6-scaled Doppler, with amplitude set by C/N0
//! against complex white Gaussian noise of unit variance. Chips are
//! rectangular (no band-limiting): the correlation model downstream is
//! pulse-shape-agnostic, and this keeps the oracle arithmetic exact.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::keystream::ChipStreamModel;
use crate::scalar::Scalar;
use crate::snapshot::{Snapshot, SnapshotError};
use crate::{iono_delay_e1_m, CHIP_RATE, F1_HZ, F6_HZ, SPEED_OF_LIGHT};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("empty or inverted window [{0}, {1}]")]
    EmptyWindow(f64, f64),
    #[error("no chip stream model for svid {0}")]
    UnknownSvid(u8),
    #[error("satellite truth out of range: {0}")]
    InvalidTruth(String),
    #[error("replay shift must be non-zero")]
    ZeroReplayShift,
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error("window start predates the chip stream origin")]
    NegativeChipIndex,
}

/// Per-satellite truth driving the synthesizer. Times in seconds,
/// Doppler in Hz, C/N0 in dB-Hz. `hwb_rx` and `dt_rx_e1` are receiver
/// properties shared across satellites.
#[derive(Debug, Clone, Copy)]
pub struct SatelliteTruth {
    pub svid: u8,
    pub tau_prop: f64,
    pub dt_sat_e1: f64,
    pub bgd_true: f64,
    /// Slant total electron content, electrons/m^2.
    pub tec: f64,
    pub doppler_e1: f64,
    pub cn0_dbhz: f64,
    pub hwb_rx: f64,
    pub dt_rx_e1: f64,
    /// Optional extra delay (multipath stand-in), seconds.
    pub mp_extra_delay: f64,
}

impl SatelliteTruth {
    fn validate(&self) -> Result<(), SynthError> {
        if !(0.06..=0.11).contains(&self.tau_prop) {
            return Err(SynthError::InvalidTruth(format!(
                "svid {}: tau_prop {} outside [0.06, 0.11]",
                self.svid, self.tau_prop
            )));
        }
        if !(20.0..=60.0).contains(&self.cn0_dbhz) {
            return Err(SynthError::InvalidTruth(format!(
                "svid {}: cn0 {} outside [20, 60] dB-Hz",
                self.svid, self.cn0_dbhz
            )));
        }
        Ok(())
    }

    /// Total signal arrival delay on the receiver clock.
    pub fn total_delay(&self) -> f64 {
        let i_e6_m = iono_delay_e1_m(self.tec) * (F1_HZ / F6_HZ) * (F1_HZ / F6_HZ);
        self.tau_prop - self.dt_sat_e1
            + self.bgd_true
            + i_e6_m / SPEED_OF_LIGHT
            + self.hwb_rx
            + self.dt_rx_e1
            + self.mp_extra_delay
    }
}

/// What the adversary (or fault) does to the snapshot content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpoofMode {
    None,
    /// Chips from an unrelated keystream.
    WrongChips,
    /// The whole ensemble replayed with a constant extra delay,
    /// seconds (non-zero).
    StaticReplayShift(f64),
    /// Nothing but noise.
    NoSignal,
}

/// Noise configuration; disabling noise models the infinite-C/N0 case.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub enabled: bool,
    pub seed: u64,
}

/// Doppler offset as applied at E6 by the generator: the exact ratio
/// of the carrier frequencies.
pub fn e6_doppler(doppler_e1: f64) -> f64 {
    doppler_e1 * (F6_HZ / F1_HZ)
}

/// Amplitude of a constant-envelope signal at `cn0_dbhz` against
/// complex noise of unit variance sampled at `sample_rate`.
pub fn amplitude_for_cn0(cn0_dbhz: f64, sample_rate: f64) -> f64 {
    (10f64.powf(cn0_dbhz / 10.0) / sample_rate).sqrt()
}

/// Synthesizes one snapshot covering `window` at `sample_rate`.
/// Deterministic given the noise seed.
pub fn synthesize<T: Scalar>(
    truths: &[SatelliteTruth],
    models: &[ChipStreamModel],
    window: (f64, f64),
    sample_rate: f64,
    spoof: SpoofMode,
    noise: NoiseSpec,
) -> Result<Snapshot<T>, SynthError> {
    let (t0, t1) = window;
    if t1 <= t0 || !t0.is_finite() || !t1.is_finite() {
        return Err(SynthError::EmptyWindow(t0, t1));
    }
    if sample_rate < 2.0 * CHIP_RATE {
        return Err(SynthError::Snapshot(SnapshotError::SampleRateTooLow(
            sample_rate,
        )));
    }
    if let SpoofMode::StaticReplayShift(shift) = spoof {
        if shift == 0.0 {
            return Err(SynthError::ZeroReplayShift);
        }
    }
    for truth in truths {
        truth.validate()?;
        if !models.iter().any(|m| m.svid() == truth.svid) {
            return Err(SynthError::UnknownSvid(truth.svid));
        }
    }

    // Anchor the snapshot on an exact nanosecond so the stored metadata
    // and the synthesis grid agree.
    let start_gst_ns = (t0 * 1e9).round() as i64;
    let n = ((t1 - t0) * sample_rate).round() as usize;

    let mut buf = vec![Complex::<f64>::new(0.0, 0.0); n];

    if spoof != SpoofMode::NoSignal {
        for truth in truths {
            let model = models
                .iter()
                .find(|m| m.svid() == truth.svid)
                .expect("validated above");
            let corrupted;
            let stream = match spoof {
                SpoofMode::WrongChips => {
                    corrupted = model.corrupted();
                    &corrupted
                }
                _ => model,
            };
            let mut delay = truth.total_delay();
            if let SpoofMode::StaticReplayShift(shift) = spoof {
                delay += shift;
            }

            let chips_per_sample = CHIP_RATE / sample_rate;
            // Split the chip position of sample 0 into an exact integer
            // part (from the nanosecond anchor) and a small fractional
            // remainder, so precision does not degrade with the epoch.
            // chips(t0) = start_ns * Rc / 1e9 = start_ns * 5115 / 1e6.
            let q = i128::from(start_gst_ns) * 5115;
            let anchor_chips = q.div_euclid(1_000_000) as i64;
            let frac_chips = q.rem_euclid(1_000_000) as f64 / 1e6;
            let c0 = frac_chips - delay * CHIP_RATE;
            let first_rel = c0.floor() as i64 - 2;
            if anchor_chips + first_rel < 0 {
                return Err(SynthError::NegativeChipIndex);
            }
            let count = (n as f64 * chips_per_sample).ceil() as usize + 5;
            let chips = stream.chips_at_index((anchor_chips + first_rel) as u64, count);

            let amp = amplitude_for_cn0(truth.cn0_dbhz, sample_rate);
            let w = std::f64::consts::TAU * e6_doppler(truth.doppler_e1) / sample_rate;
            let step = Complex::from_polar(1.0, w);
            let mut rot = Complex::new(1.0, 0.0);
            for (k, out) in buf.iter_mut().enumerate() {
                if k % 4096 == 0 {
                    rot = Complex::from_polar(1.0, w * k as f64);
                }
                let pos = c0 + k as f64 * chips_per_sample;
                let idx = (pos.floor() as i64 - first_rel) as usize;
                *out += rot * (f64::from(chips[idx]) * amp);
                rot *= step;
            }
        }
    }

    if noise.enabled {
        let mut rng = ChaCha12Rng::seed_from_u64(noise.seed);
        let sigma = 0.5f64.sqrt();
        for out in buf.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *out += Complex::new(re * sigma, im * sigma);
        }
    }

    let samples = buf
        .into_iter()
        .map(|s| Complex::new(T::from_f64_c(s.re), T::from_f64_c(s.im)))
        .collect();
    Ok(Snapshot::new(samples, sample_rate, start_gst_ns)?)
}

//! Complex baseband snapshot: sample buffer, receiver-clock anchoring
//! and the `.snap` file codec.
//!
//! File layout, all fields big-endian:
//!
//! ```text
//! "ACSN" | version u8 = 1 | sample_rate f64 | start_gst i64 (ns) |
//! sample count u64 | count x (I f32, Q f32)
//! ```

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::CHIP_RATE;

pub const SNAP_MAGIC: [u8; 4] = *b"ACSN";
pub const SNAP_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum SnapshotError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("file truncated: need {needed} octets, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("sample rate {0} Hz below twice the chip rate")]
    SampleRateTooLow(f64),
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
}

/// A stored block of complex baseband samples. `start_gst_ns` anchors
/// sample 0 on the receiver clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T: Scalar> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: f64,
    pub start_gst_ns: i64,
}

impl<T: Scalar> Snapshot<T> {
    pub fn new(
        samples: Vec<Complex<T>>,
        sample_rate: f64,
        start_gst_ns: i64,
    ) -> Result<Self, SnapshotError> {
        if sample_rate < 2.0 * CHIP_RATE {
            return Err(SnapshotError::SampleRateTooLow(sample_rate));
        }
        if let Some(idx) = samples
            .iter()
            .position(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(SnapshotError::NonFiniteSample(idx));
        }
        Ok(Self {
            samples,
            sample_rate,
            start_gst_ns,
        })
    }

    /// Receiver-clock time of sample 0, seconds.
    pub fn start_gst(&self) -> f64 {
        self.start_gst_ns as f64 * 1e-9
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// End of coverage (exclusive), seconds.
    pub fn end_gst(&self) -> f64 {
        self.start_gst() + self.duration()
    }

    /// Whether `[t0, t1]` lies inside the covered interval.
    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        t0 >= self.start_gst() && t1 <= self.end_gst()
    }

    /// Sample at the given receiver-clock time, zero outside coverage.
    pub fn sample_or_zero(&self, index: isize) -> Complex<T> {
        if index < 0 || index as usize >= self.samples.len() {
            Complex::new(T::zero(), T::zero())
        } else {
            self.samples[index as usize]
        }
    }

    /// Converts the sample scalar, e.g. to the `f32` storage type.
    pub fn convert<U: Scalar>(&self) -> Snapshot<U> {
        Snapshot {
            samples: self
                .samples
                .iter()
                .map(|s| {
                    Complex::new(
                        U::from_f64_c(s.re.to_f64_c()),
                        U::from_f64_c(s.im.to_f64_c()),
                    )
                })
                .collect(),
            sample_rate: self.sample_rate,
            start_gst_ns: self.start_gst_ns,
        }
    }
}

/// Serializes a snapshot; samples are stored as interleaved `f32` I/Q.
pub fn write_snapshot<T: Scalar>(snap: &Snapshot<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 1 + 8 + 8 + 8 + snap.samples.len() * 8);
    out.extend_from_slice(&SNAP_MAGIC);
    out.push(SNAP_VERSION);
    out.extend_from_slice(&snap.sample_rate.to_be_bytes());
    out.extend_from_slice(&snap.start_gst_ns.to_be_bytes());
    out.extend_from_slice(&(snap.samples.len() as u64).to_be_bytes());
    for s in &snap.samples {
        out.extend_from_slice(&(s.re.to_f64_c() as f32).to_be_bytes());
        out.extend_from_slice(&(s.im.to_f64_c() as f32).to_be_bytes());
    }
    out
}

/// Parses a serialized snapshot into samples of scalar type `T`.
pub fn read_snapshot<T: Scalar>(bytes: &[u8]) -> Result<Snapshot<T>, SnapshotError> {
    const HEADER: usize = 4 + 1 + 8 + 8 + 8;
    if bytes.len() < HEADER {
        return Err(SnapshotError::Truncated {
            needed: HEADER,
            available: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != SNAP_MAGIC {
        return Err(SnapshotError::BadMagic(magic));
    }
    if bytes[4] != SNAP_VERSION {
        return Err(SnapshotError::BadVersion(bytes[4]));
    }
    let sample_rate = f64::from_be_bytes(bytes[5..13].try_into().unwrap());
    let start_gst_ns = i64::from_be_bytes(bytes[13..21].try_into().unwrap());
    let count = u64::from_be_bytes(bytes[21..29].try_into().unwrap()) as usize;
    let needed = HEADER + count * 8;
    if bytes.len() != needed {
        return Err(SnapshotError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let off = HEADER + k * 8;
        let re = f32::from_be_bytes(bytes[off..off + 4].try_into().unwrap());
        let im = f32::from_be_bytes(bytes[off + 4..off + 8].try_into().unwrap());
        samples.push(Complex::new(
            T::from_f64_c(f64::from(re)),
            T::from_f64_c(f64::from(im)),
        ));
    }
    Snapshot::new(samples, sample_rate, start_gst_ns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_snapshot() -> Snapshot<f32> {
        let samples = (0..100)
            .map(|k| Complex::new(k as f32 * 0.25, -(k as f32) * 0.5))
            .collect();
        Snapshot::new(samples, 20.46e6, 1_234_567_890_123).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact_for_f32() {
        let snap = sample_snapshot();
        let blob = write_snapshot(&snap);
        let back: Snapshot<f32> = read_snapshot(&blob).unwrap();
        assert_eq!(back, snap);
        let blob2 = write_snapshot(&back);
        assert_eq!(blob, blob2);
    }

    #[test]
    fn empty_snapshot_is_valid() {
        let snap: Snapshot<f64> = Snapshot::new(Vec::new(), 20.46e6, 0).unwrap();
        let back: Snapshot<f64> = read_snapshot(&write_snapshot(&snap)).unwrap();
        assert_eq!(back.samples.len(), 0);
    }

    #[test]
    fn truncation_and_magic_errors() {
        let blob = write_snapshot(&sample_snapshot());
        assert!(matches!(
            read_snapshot::<f32>(&blob[..blob.len() - 1]),
            Err(SnapshotError::Truncated { .. })
        ));
        let mut bad = blob.clone();
        bad[0] = b'Z';
        assert!(matches!(
            read_snapshot::<f32>(&bad),
            Err(SnapshotError::BadMagic(_))
        ));
        let mut bad = blob;
        bad[4] = 7;
        assert_eq!(
            read_snapshot::<f32>(&bad).unwrap_err(),
            SnapshotError::BadVersion(7)
        );
    }

    #[test]
    fn rate_floor_enforced() {
        let err = Snapshot::<f64>::new(Vec::new(), 1.0e6, 0).unwrap_err();
        assert!(matches!(err, SnapshotError::SampleRateTooLow(_)));
    }

    #[test]
    fn coverage_queries() {
        let snap = sample_snapshot();
        let t0 = snap.start_gst();
        assert!(snap.covers(t0, t0 + 90.0 / 20.46e6));
        assert!(!snap.covers(t0 - 1e-6, t0));
        assert_eq!(snap.sample_or_zero(-1), Complex::new(0.0, 0.0));
        assert_eq!(snap.sample_or_zero(0), snap.samples[0]);
        assert_eq!(snap.sample_or_zero(100), Complex::new(0.0, 0.0));
    }
}

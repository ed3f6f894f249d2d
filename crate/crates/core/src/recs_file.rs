//! Binary codec for published sequence (`.recs`) files.
//!
//! Layout, normative and pinned by a golden file:
//!
//! ```text
//! "ACRS" | version u8 = 1 | header (26 bytes) | slots | CRC-32
//! header: start_gst u64 | duration u32 | svid u8 | recs_period u32 |
//!         n_chips u32 | recs_offset_ms u16 | slrecs_offset u16 |
//!         dtau_max u8
//! ```
//!
//! All integers big-endian. The CRC-32 (IEEE) covers every preceding
//! octet. One file carries one satellite.

use thiserror::Error;

use crate::crypto::{BitBlockSequence, SequenceRole};
use crate::{BLOCK_SECONDS, SVID_MAX};

pub const RECS_MAGIC: [u8; 4] = *b"ACRS";
pub const RECS_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 26;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    BadCrc { stored: u32, computed: u32 },
    #[error("file truncated: need {needed} octets, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("header invariant violated: {0}")]
    InvalidHeader(String),
    #[error("slot {index} has {bits} bits, expected {expected}")]
    BadSlotLength {
        index: usize,
        bits: usize,
        expected: usize,
    },
    #[error("line {line}: {msg}")]
    BgdParse { line: usize, msg: String },
}

/// Schedule and geometry parameters of one published file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecsFileHeader {
    /// First slot's GST second.
    pub start_gst: u64,
    /// Covered span in seconds; a multiple of `recs_period`.
    pub duration: u32,
    /// Satellite ID, 1..=36.
    pub svid: u8,
    /// Seconds between consecutive slots; divides 30 or is a multiple
    /// of 30.
    pub recs_period: u32,
    /// Chips per sequence; a multiple of 128.
    pub n_chips: u32,
    /// Sequence start relative to the slot's integer second,
    /// milliseconds.
    pub recs_offset_ms: u16,
    /// How many 30-second blocks later the unlocking key lives.
    pub slrecs_offset: u16,
    /// Maximum random delay in 8-ms units.
    pub dtau_max: u8,
}

impl RecsFileHeader {
    pub fn validate(&self) -> Result<(), FormatError> {
        let fail = |msg: String| Err(FormatError::InvalidHeader(msg));
        if self.svid == 0 || self.svid > SVID_MAX {
            return fail(format!("svid {} out of 1..=36", self.svid));
        }
        let period = u64::from(self.recs_period);
        if period == 0 || (!BLOCK_SECONDS.is_multiple_of(period) && period % BLOCK_SECONDS != 0) {
            return fail(format!(
                "recs_period {period} must divide 30 s or be a multiple of it"
            ));
        }
        if self.n_chips == 0 || !self.n_chips.is_multiple_of(128) {
            return fail(format!(
                "n_chips {} not a positive multiple of 128",
                self.n_chips
            ));
        }
        if self.duration == 0 || u64::from(self.duration) % period != 0 {
            return fail(format!(
                "duration {} not a positive multiple of recs_period {period}",
                self.duration
            ));
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        (self.duration / self.recs_period) as usize
    }

    /// GST second at which slot `index` starts.
    pub fn slot_gst(&self, index: usize) -> u64 {
        self.start_gst + u64::from(self.recs_period) * index as u64
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&self.start_gst.to_be_bytes());
        out[8..12].copy_from_slice(&self.duration.to_be_bytes());
        out[12] = self.svid;
        out[13..17].copy_from_slice(&self.recs_period.to_be_bytes());
        out[17..21].copy_from_slice(&self.n_chips.to_be_bytes());
        out[21..23].copy_from_slice(&self.recs_offset_ms.to_be_bytes());
        out[23..25].copy_from_slice(&self.slrecs_offset.to_be_bytes());
        out[25] = self.dtau_max;
        out
    }

    fn decode(raw: &[u8; HEADER_LEN]) -> Self {
        Self {
            start_gst: u64::from_be_bytes(raw[0..8].try_into().unwrap()),
            duration: u32::from_be_bytes(raw[8..12].try_into().unwrap()),
            svid: raw[12],
            recs_period: u32::from_be_bytes(raw[13..17].try_into().unwrap()),
            n_chips: u32::from_be_bytes(raw[17..21].try_into().unwrap()),
            recs_offset_ms: u16::from_be_bytes(raw[21..23].try_into().unwrap()),
            slrecs_offset: u16::from_be_bytes(raw[23..25].try_into().unwrap()),
            dtau_max: raw[25],
        }
    }
}

/// A parsed or to-be-published file: header plus one encrypted sequence
/// per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecsFile {
    pub header: RecsFileHeader,
    pub slots: Vec<BitBlockSequence>,
    /// CRC-32 over the serialized form; recomputed on serialization.
    pub checksum: u32,
}

impl RecsFile {
    pub fn new(header: RecsFileHeader, slots: Vec<BitBlockSequence>) -> Result<Self, FormatError> {
        header.validate()?;
        check_slots(&header, &slots)?;
        let mut file = Self {
            header,
            slots,
            checksum: 0,
        };
        file.checksum = crc32fast::hash(&body_bytes(&file));
        Ok(file)
    }
}

fn check_slots(header: &RecsFileHeader, slots: &[BitBlockSequence]) -> Result<(), FormatError> {
    if slots.len() != header.slot_count() {
        return Err(FormatError::InvalidHeader(format!(
            "{} slots, header requires {}",
            slots.len(),
            header.slot_count()
        )));
    }
    for (index, slot) in slots.iter().enumerate() {
        if slot.bit_len() != header.n_chips as usize {
            return Err(FormatError::BadSlotLength {
                index,
                bits: slot.bit_len(),
                expected: header.n_chips as usize,
            });
        }
    }
    Ok(())
}

fn body_bytes(file: &RecsFile) -> Vec<u8> {
    let slot_bytes = file.header.n_chips as usize / 8;
    let mut out = Vec::with_capacity(4 + 1 + HEADER_LEN + slot_bytes * file.slots.len());
    out.extend_from_slice(&RECS_MAGIC);
    out.push(RECS_VERSION);
    out.extend_from_slice(&file.header.encode());
    for slot in &file.slots {
        out.extend_from_slice(slot.bytes());
    }
    out
}

/// Serializes a validated file; the trailing CRC-32 is recomputed.
pub fn serialize_recs(file: &RecsFile) -> Result<Vec<u8>, FormatError> {
    file.header.validate()?;
    check_slots(&file.header, &file.slots)?;
    let mut out = body_bytes(file);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

/// Parses and validates a serialized file: magic, version, CRC and all
/// header/slot invariants.
pub fn parse_recs(bytes: &[u8]) -> Result<RecsFile, FormatError> {
    let min_len = 4 + 1 + HEADER_LEN + 4;
    if bytes.len() < min_len {
        return Err(FormatError::Truncated {
            needed: min_len,
            available: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != RECS_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    if bytes[4] != RECS_VERSION {
        return Err(FormatError::BadVersion(bytes[4]));
    }
    let raw_header: [u8; HEADER_LEN] = bytes[5..5 + HEADER_LEN].try_into().unwrap();
    let header = RecsFileHeader::decode(&raw_header);
    header.validate()?;

    let slot_bytes = header.n_chips as usize / 8;
    let n_slots = header.slot_count();
    let needed = 4 + 1 + HEADER_LEN + slot_bytes * n_slots + 4;
    if bytes.len() != needed {
        return Err(FormatError::Truncated {
            needed,
            available: bytes.len(),
        });
    }

    let body_end = needed - 4;
    let stored = u32::from_be_bytes(bytes[body_end..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(FormatError::BadCrc { stored, computed });
    }

    let mut slots = Vec::with_capacity(n_slots);
    let mut cursor = 5 + HEADER_LEN;
    for _ in 0..n_slots {
        let chunk = bytes[cursor..cursor + slot_bytes].to_vec();
        cursor += slot_bytes;
        slots.push(
            BitBlockSequence::new(chunk, SequenceRole::Recs)
                .expect("slot length validated as multiple of 128 bits"),
        );
    }
    Ok(RecsFile {
        header,
        slots,
        checksum: stored,
    })
}

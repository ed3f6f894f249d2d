//! Cryptographic primitives of the authentication scheme: decryption-key
//! derivation, IV construction, randomization-offset cyphertext and
//! sequence encryption/decryption.
//!
//! Conventions fixed here and used everywhere else:
//! - big-endian byte order, MSB-first bit order;
//! - bit 0 maps to chip +1, bit 1 to chip -1;
//! - sequences are whole numbers of 128-bit blocks.

use aes::cipher::{generic_array::GenericArray, BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes256;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::SVID_MAX;

/// AES block size in octets.
pub const BLOCK_LEN: usize = 16;
/// Seconds in one week, upper bound for the time-of-week field.
pub const SECONDS_PER_WEEK: u32 = 604_800;
/// Satellite slots carried by one triple of cyphertext blocks.
const SVIDS_PER_TRIPLE: usize = 3 * BLOCK_LEN;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("key must not be empty")]
    EmptyKey,
    #[error("time-of-week {0} out of range (must be < 604800)")]
    InvalidTimeOfWeek(u32),
    #[error("bit length {0} is not a positive multiple of 128")]
    UnalignedBitLength(usize),
    #[error("cyphertext must contain at least one block")]
    EmptyCyphertext,
    #[error("svid {0} out of range 1..=36")]
    SvidOutOfRange(u8),
    #[error("slot {slot} needs {needed} cyphertext blocks, only {available} available")]
    InsufficientBlocks {
        slot: usize,
        needed: usize,
        available: usize,
    },
    #[error("expected {expected} key octets, got {got}")]
    BadKeyLength { expected: usize, got: usize },
}

/// Chain key together with its 32-bit time tag
/// (12-bit week number followed by 20-bit time-of-week seconds).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OsnmaKey {
    bytes: Vec<u8>,
    gst_sf: u32,
}

impl OsnmaKey {
    pub fn new(bytes: Vec<u8>, gst_sf: u32) -> Result<Self, CryptoError> {
        if bytes.is_empty() {
            return Err(CryptoError::EmptyKey);
        }
        let tow = gst_sf & 0xF_FFFF;
        if tow >= SECONDS_PER_WEEK {
            return Err(CryptoError::InvalidTimeOfWeek(tow));
        }
        Ok(Self { bytes, gst_sf })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn gst_sf(&self) -> u32 {
        self.gst_sf
    }
}

/// Packs absolute GST seconds into the 32-bit week/time-of-week tag.
pub fn gst_sf_from_seconds(gst: u64) -> u32 {
    let week = (gst / u64::from(SECONDS_PER_WEEK)) & 0xFFF;
    let tow = gst % u64::from(SECONDS_PER_WEEK);
    ((week as u32) << 20) | tow as u32
}

/// 256-bit sequence decryption key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecsKey(pub [u8; 32]);

impl RecsKey {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; 32] = bytes.try_into().map_err(|_| CryptoError::BadKeyLength {
            expected: 32,
            got: bytes.len(),
        })?;
        Ok(Self(arr))
    }
}

/// 128-bit initialisation vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitVector(pub [u8; 16]);

/// Whether a bit sequence is in the clear (ECS) or re-encrypted (RECS)
/// domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceRole {
    Ecs,
    Recs,
}

/// Packed bit sequence whose length is a positive multiple of 128 bits.
/// Bits are MSB-first within each octet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlockSequence {
    bytes: Vec<u8>,
    role: SequenceRole,
}

impl BitBlockSequence {
    pub fn new(bytes: Vec<u8>, role: SequenceRole) -> Result<Self, CryptoError> {
        let bits = bytes.len() * 8;
        if bytes.is_empty() || !bits.is_multiple_of(128) {
            return Err(CryptoError::UnalignedBitLength(bits));
        }
        Ok(Self { bytes, role })
    }

    /// Packs a +1/-1 chip sequence (one chip per bit, bit 0 = +1).
    pub fn from_chips(chips: &[i8], role: SequenceRole) -> Result<Self, CryptoError> {
        if chips.is_empty() || !chips.len().is_multiple_of(128) {
            return Err(CryptoError::UnalignedBitLength(chips.len()));
        }
        let mut bytes = vec![0u8; chips.len() / 8];
        for (i, &chip) in chips.iter().enumerate() {
            if chip < 0 {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        Ok(Self { bytes, role })
    }

    /// Unpacks to +1/-1 chips.
    pub fn to_chips(&self) -> Vec<i8> {
        let mut chips = Vec::with_capacity(self.bit_len());
        for i in 0..self.bit_len() {
            let bit = (self.bytes[i / 8] >> (7 - i % 8)) & 1;
            chips.push(if bit == 0 { 1 } else { -1 });
        }
        chips
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    pub fn role(&self) -> SequenceRole {
        self.role
    }
}

/// Derives the sequence decryption key from a disclosed chain key:
/// the SHA-256 digest of the key octets. The time tag does not enter.
pub fn derive_recs_key(key: &OsnmaKey) -> RecsKey {
    let digest = Sha256::digest(key.bytes());
    RecsKey(digest.into())
}

/// 128-bit plaintext: the 32-bit time tag (big-endian) followed by 96
/// zero bits.
pub fn build_plaintext(gst_sf: u32) -> [u8; 16] {
    let mut p = [0u8; 16];
    p[..4].copy_from_slice(&gst_sf.to_be_bytes());
    p
}

/// IV = first 128 bits of SHA-256 over the plaintext.
pub fn compute_iv(plaintext: &[u8; 16]) -> InitVector {
    let digest = Sha256::digest(plaintext);
    let mut iv = [0u8; 16];
    iv.copy_from_slice(&digest[..16]);
    InitVector(iv)
}

/// Cyphertext block array from which randomization offsets are drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetCyphertext {
    blocks: Vec<[u8; 16]>,
}

impl OffsetCyphertext {
    pub fn from_blocks(blocks: Vec<[u8; 16]>) -> Result<Self, CryptoError> {
        if blocks.is_empty() {
            return Err(CryptoError::EmptyCyphertext);
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[[u8; 16]] {
        &self.blocks
    }

    /// Randomization offset for 1-based slot position `slot` within its
    /// period and satellite `svid`, as an integer count of 8-ms units in
    /// `[0, dtau_max]`.
    ///
    /// Slot `i` owns blocks `3i-2..=3i`; their 48 bytes map in ascending
    /// order to satellite IDs 1..=48 (only 1..=36 are consumed).
    pub fn offset_for(&self, slot: usize, svid: u8, dtau_max: u8) -> Result<u8, CryptoError> {
        if svid == 0 || svid > SVID_MAX {
            return Err(CryptoError::SvidOutOfRange(svid));
        }
        if slot == 0 || 3 * slot > self.blocks.len() {
            return Err(CryptoError::InsufficientBlocks {
                slot,
                needed: 3 * slot.max(1),
                available: self.blocks.len(),
            });
        }
        let lane = usize::from(svid - 1);
        debug_assert!(lane < SVIDS_PER_TRIPLE);
        let block = 3 * (slot - 1) + lane / BLOCK_LEN;
        let byte = self.blocks[block][lane % BLOCK_LEN];
        Ok((u16::from(byte) % (u16::from(dtau_max) + 1)) as u8)
    }
}

/// AES-256 OFB keystream over an all-zero plaintext of `n_blocks`
/// 128-bit blocks: the cyphertext equals the raw OFB keystream.
pub fn generate_offset_cyphertext(
    key: &RecsKey,
    iv: &InitVector,
    n_blocks: usize,
) -> Result<OffsetCyphertext, CryptoError> {
    if n_blocks == 0 {
        return Err(CryptoError::EmptyCyphertext);
    }
    let cipher = Aes256::new(GenericArray::from_slice(&key.0));
    let mut state = GenericArray::clone_from_slice(&iv.0);
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        cipher.encrypt_block(&mut state);
        let mut out = [0u8; 16];
        out.copy_from_slice(&state);
        blocks.push(out);
    }
    Ok(OffsetCyphertext { blocks })
}

/// AES-256 CBC encryption of a clear sequence into its published form.
/// Inverted exactly by [`decrypt_recs`].
pub fn encrypt_ecs(
    ecs: &BitBlockSequence,
    key: &RecsKey,
    iv: &InitVector,
) -> Result<BitBlockSequence, CryptoError> {
    let cipher = Aes256::new(GenericArray::from_slice(&key.0));
    let mut out = Vec::with_capacity(ecs.bytes().len());
    let mut prev = iv.0;
    for chunk in ecs.bytes().chunks_exact(BLOCK_LEN) {
        let mut block = [0u8; BLOCK_LEN];
        for (b, (&c, &p)) in block.iter_mut().zip(chunk.iter().zip(prev.iter())) {
            *b = c ^ p;
        }
        let ga = GenericArray::from_mut_slice(&mut block);
        cipher.encrypt_block(ga);
        prev = block;
        out.extend_from_slice(&block);
    }
    BitBlockSequence::new(out, SequenceRole::Recs)
}

/// AES-256 CBC decryption of a published sequence back into the clear
/// chip sequence. Length is preserved.
pub fn decrypt_recs(
    recs: &BitBlockSequence,
    key: &RecsKey,
    iv: &InitVector,
) -> Result<BitBlockSequence, CryptoError> {
    let cipher = Aes256::new(GenericArray::from_slice(&key.0));
    let mut out = Vec::with_capacity(recs.bytes().len());
    let mut prev = iv.0;
    for chunk in recs.bytes().chunks_exact(BLOCK_LEN) {
        let mut block: [u8; BLOCK_LEN] = chunk.try_into().expect("exact chunk");
        let ga = GenericArray::from_mut_slice(&mut block);
        cipher.decrypt_block(ga);
        for (b, &p) in block.iter_mut().zip(prev.iter()) {
            *b ^= p;
        }
        prev = chunk.try_into().expect("exact chunk");
        out.extend_from_slice(&block);
    }
    BitBlockSequence::new(out, SequenceRole::Ecs)
}

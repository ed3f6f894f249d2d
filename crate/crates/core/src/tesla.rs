//! Delayed-disclosure one-way key chain.
//!
//! Keys are generated in reverse: the last key derives from a seed and
//! each earlier key is the truncated SHA-256 of its successor, so
//! knowing the key of block `m` reveals keys of all earlier blocks but
//! none of the later ones. Block 0's key is the chain root against
//! which receivers verify disclosed keys.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::crypto::{gst_sf_from_seconds, OsnmaKey};
use crate::BLOCK_SECONDS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("chain length must be at least 1")]
    EmptyChain,
    #[error("block0 GST {0} is not a multiple of 30 s")]
    MisalignedBlock0(u64),
    #[error("GST {gst} outside chain coverage [{start}, {end})")]
    OutOfCoverage { gst: u64, start: u64, end: u64 },
    #[error("key for block {block} is not disclosed until GST {disclosure_gst} (now {now})")]
    NotYetDisclosed {
        block: usize,
        disclosure_gst: u64,
        now: u64,
    },
    #[error("empty seed")]
    EmptySeed,
    #[error("disclosure delay must be at least one block")]
    ZeroDisclosureDelay,
}

/// When the key of a block becomes public: `disclosure_delay_blocks`
/// blocks after the block itself (at least one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisclosureSchedule {
    disclosure_delay_blocks: u32,
}

impl DisclosureSchedule {
    pub fn new(disclosure_delay_blocks: u32) -> Result<Self, ChainError> {
        if disclosure_delay_blocks == 0 {
            return Err(ChainError::ZeroDisclosureDelay);
        }
        Ok(Self {
            disclosure_delay_blocks,
        })
    }

    pub fn delay_blocks(&self) -> u32 {
        self.disclosure_delay_blocks
    }
}

impl Default for DisclosureSchedule {
    fn default() -> Self {
        Self {
            disclosure_delay_blocks: 1,
        }
    }
}

/// One key per 30-second block, plus the verification root.
#[derive(Debug, Clone)]
pub struct KeyChain {
    keys: Vec<OsnmaKey>,
    block0_gst: u64,
    key_len: usize,
}

/// Truncated forward hash: the one-way step of the chain.
fn forward_hash(bytes: &[u8], key_len: usize) -> Vec<u8> {
    Sha256::digest(bytes)[..key_len].to_vec()
}

/// Builds a chain of `length` keys starting at `block0_gst` (a multiple
/// of 30 s). The key length is taken from the seed, capped at the
/// digest size.
pub fn generate_chain(seed: &[u8], length: usize, block0_gst: u64) -> Result<KeyChain, ChainError> {
    if seed.is_empty() {
        return Err(ChainError::EmptySeed);
    }
    if length == 0 {
        return Err(ChainError::EmptyChain);
    }
    if !block0_gst.is_multiple_of(BLOCK_SECONDS) {
        return Err(ChainError::MisalignedBlock0(block0_gst));
    }
    let key_len = seed.len().min(32);
    let mut raw = vec![Vec::new(); length];
    raw[length - 1] = forward_hash(seed, key_len);
    for m in (0..length - 1).rev() {
        raw[m] = forward_hash(&raw[m + 1], key_len);
    }
    let keys = raw
        .into_iter()
        .enumerate()
        .map(|(m, bytes)| {
            let gst = block0_gst + BLOCK_SECONDS * m as u64;
            OsnmaKey::new(bytes, gst_sf_from_seconds(gst)).expect("non-empty key, valid tow")
        })
        .collect();
    Ok(KeyChain {
        keys,
        block0_gst,
        key_len,
    })
}

/// True iff hashing `candidate` forward `block_index` times reproduces
/// the root.
pub fn verify_key(candidate: &OsnmaKey, block_index: usize, root: &OsnmaKey) -> bool {
    let key_len = root.bytes().len();
    let mut cur = candidate.bytes().to_vec();
    for _ in 0..block_index {
        cur = forward_hash(&cur, key_len);
    }
    cur == root.bytes()
}

impl KeyChain {
    pub fn root(&self) -> &OsnmaKey {
        &self.keys[0]
    }

    pub fn root_hex(&self) -> String {
        self.keys[0]
            .bytes()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn block0_gst(&self) -> u64 {
        self.block0_gst
    }

    pub fn key_len(&self) -> usize {
        self.key_len
    }

    pub fn key_for_block(&self, block: usize) -> Result<&OsnmaKey, ChainError> {
        self.keys.get(block).ok_or(ChainError::OutOfCoverage {
            gst: self.block0_gst + BLOCK_SECONDS * block as u64,
            start: self.block0_gst,
            end: self.end_gst(),
        })
    }

    /// Exclusive end of coverage.
    pub fn end_gst(&self) -> u64 {
        self.block0_gst + BLOCK_SECONDS * self.keys.len() as u64
    }

    /// Block index containing `gst`.
    pub fn block_of_gst(&self, gst: u64) -> Result<usize, ChainError> {
        if gst < self.block0_gst || gst >= self.end_gst() {
            return Err(ChainError::OutOfCoverage {
                gst,
                start: self.block0_gst,
                end: self.end_gst(),
            });
        }
        Ok(((gst - self.block0_gst) / BLOCK_SECONDS) as usize)
    }

    /// Start GST of a block (not range checked).
    pub fn gst_of_block(&self, block: usize) -> u64 {
        self.block0_gst + BLOCK_SECONDS * block as u64
    }

    /// The block's key together with its index and the GST at which the
    /// key becomes public.
    pub fn key_for_gst(
        &self,
        gst: u64,
        schedule: &DisclosureSchedule,
    ) -> Result<(usize, &OsnmaKey, u64), ChainError> {
        let block = self.block_of_gst(gst)?;
        let key = &self.keys[block];
        Ok((block, key, self.disclosure_gst(block, schedule)))
    }

    pub fn disclosure_gst(&self, block: usize, schedule: &DisclosureSchedule) -> u64 {
        self.block0_gst + BLOCK_SECONDS * (block as u64 + u64::from(schedule.delay_blocks()))
    }

    /// Receiver-visible view at time `now`: only keys whose disclosure
    /// GST has passed can be looked up.
    pub fn disclosed_at(&self, now: u64, schedule: DisclosureSchedule) -> DisclosedKeys<'_> {
        DisclosedKeys {
            chain: self,
            now,
            schedule,
        }
    }
}

/// Schedule-gated view of a chain, standing in for the broadcast key
/// feed.
#[derive(Debug, Clone, Copy)]
pub struct DisclosedKeys<'a> {
    chain: &'a KeyChain,
    now: u64,
    schedule: DisclosureSchedule,
}

impl DisclosedKeys<'_> {
    pub fn key_for_block(&self, block: usize) -> Result<&OsnmaKey, ChainError> {
        let key = self.chain.key_for_block(block)?;
        let disclosure_gst = self.chain.disclosure_gst(block, &self.schedule);
        if self.now < disclosure_gst {
            return Err(ChainError::NotYetDisclosed {
                block,
                disclosure_gst,
                now: self.now,
            });
        }
        Ok(key)
    }

    pub fn now(&self) -> u64 {
        self.now
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLOCK0: u64 = 1_200_000_030;

    #[test]
    fn degenerate_chain_of_one() {
        let chain = generate_chain(b"seed material 16", 1, BLOCK0).unwrap();
        assert_eq!(chain.len(), 1);
        assert_eq!(
            chain.root().bytes(),
            chain.key_for_block(0).unwrap().bytes()
        );
        assert_eq!(chain.key_len(), 16);
    }

    #[test]
    fn chain_property_holds() {
        // Forward-hash oracle: key_m must equal the truncated hash of
        // key_{m+1}, and every key must verify against the root.
        let chain = generate_chain(b"another seed!!!!", 4, BLOCK0).unwrap();
        for m in 0..3 {
            let expected = forward_hash(chain.key_for_block(m + 1).unwrap().bytes(), 16);
            assert_eq!(chain.key_for_block(m).unwrap().bytes(), &expected[..]);
        }
        for m in 0..4 {
            assert!(verify_key(chain.key_for_block(m).unwrap(), m, chain.root()));
        }
    }

    #[test]
    fn verify_rejects_wrong_index_and_tampering() {
        let chain = generate_chain(&[9u8; 16], 6, BLOCK0).unwrap();
        let k3 = chain.key_for_block(3).unwrap();
        assert!(verify_key(k3, 3, chain.root()));
        assert!(!verify_key(k3, 2, chain.root()));

        let mut tampered = k3.bytes().to_vec();
        tampered[5] ^= 0x10;
        let bad = OsnmaKey::new(tampered, k3.gst_sf()).unwrap();
        assert!(!verify_key(&bad, 3, chain.root()));

        // Root verifies against itself at index 0.
        assert!(verify_key(chain.root(), 0, chain.root()));
    }

    #[test]
    fn distinct_seeds_give_disjoint_chains() {
        let a = generate_chain(&[1u8; 16], 8, BLOCK0).unwrap();
        let b = generate_chain(&[2u8; 16], 8, BLOCK0).unwrap();
        for m in 0..8 {
            assert_ne!(
                a.key_for_block(m).unwrap().bytes(),
                b.key_for_block(m).unwrap().bytes()
            );
        }
    }

    #[test]
    fn gst_lookup() {
        let sched = DisclosureSchedule::default();
        let chain = generate_chain(&[3u8; 16], 4, BLOCK0).unwrap();
        let (j, _, d) = chain.key_for_gst(BLOCK0, &sched).unwrap();
        assert_eq!(j, 0);
        assert_eq!(d, BLOCK0 + 30);
        let (j, _, _) = chain.key_for_gst(BLOCK0 + 59, &sched).unwrap();
        assert_eq!(j, 1);
        assert!(matches!(
            chain.key_for_gst(BLOCK0 + 120, &sched),
            Err(ChainError::OutOfCoverage { .. })
        ));
        assert!(matches!(
            chain.key_for_gst(BLOCK0 - 1, &sched),
            Err(ChainError::OutOfCoverage { .. })
        ));
    }

    #[test]
    fn disclosure_gating() {
        let sched = DisclosureSchedule::default();
        let chain = generate_chain(&[4u8; 16], 4, BLOCK0).unwrap();
        let early = chain.disclosed_at(BLOCK0 + 59, sched);
        assert!(early.key_for_block(0).is_ok());
        assert!(matches!(
            early.key_for_block(1),
            Err(ChainError::NotYetDisclosed { .. })
        ));
        let later = chain.disclosed_at(BLOCK0 + 60, sched);
        assert!(later.key_for_block(1).is_ok());
    }

    #[test]
    fn invalid_construction_rejected() {
        assert_eq!(
            generate_chain(&[], 4, BLOCK0).unwrap_err(),
            ChainError::EmptySeed
        );
        assert_eq!(
            generate_chain(&[1u8; 16], 0, BLOCK0).unwrap_err(),
            ChainError::EmptyChain
        );
        assert_eq!(
            generate_chain(&[1u8; 16], 4, BLOCK0 + 7).unwrap_err(),
            ChainError::MisalignedBlock0(BLOCK0 + 7)
        );
    }

    #[test]
    fn schedule_requires_positive_delay() {
        assert_eq!(
            DisclosureSchedule::new(0).unwrap_err(),
            ChainError::ZeroDisclosureDelay
        );
        assert_eq!(DisclosureSchedule::new(2).unwrap().delay_blocks(), 2);
        assert_eq!(DisclosureSchedule::default().delay_blocks(), 1);
    }

    #[test]
    fn key_time_tags_follow_blocks() {
        let chain = generate_chain(&[5u8; 16], 3, BLOCK0).unwrap();
        for m in 0..3 {
            let gst = BLOCK0 + 30 * m as u64;
            let tag = chain.key_for_block(m).unwrap().gst_sf();
            assert_eq!(u64::from(tag & 0xF_FFFF), gst % 604_800);
            assert_eq!(u64::from(tag >> 20), (gst / 604_800) & 0xFFF);
        }
    }
}

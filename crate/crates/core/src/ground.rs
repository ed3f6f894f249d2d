//! Ground-segment generation: cut sequences out of the encrypted chip
//! stream at scheduled slots, re-encrypt them with chain-derived keys
//! and assemble the publishable files.
//!
//! The slot schedule is shared protocol logic: the receiver recomputes
//! exactly the same key block, IV and randomization offsets once the
//! chain keys are disclosed.

use thiserror::Error;

use crate::bgd_file::BgdRecord;
use crate::crypto::{
    build_plaintext, compute_iv, derive_recs_key, encrypt_ecs, generate_offset_cyphertext,
    BitBlockSequence, CryptoError, InitVector, OffsetCyphertext, RecsKey, SequenceRole,
};
use crate::keystream::ChipStreamModel;
use crate::recs_file::{FormatError, RecsFile, RecsFileHeader};
use crate::tesla::{ChainError, KeyChain};
use crate::{
    BLOCK_SECONDS, CHIPS_PER_MS, CHIPS_PER_OFFSET_UNIT, CHIP_RATE, CHIP_RATE_INT, OFFSET_UNIT_S,
    SPEED_OF_LIGHT,
};

#[derive(Debug, Error, PartialEq)]
pub enum GroundError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("slot {index} out of range, file has {count} slots")]
    SlotOutOfRange { index: usize, count: usize },
    #[error("slots would overlap: {span:.6} s exceeds the {period} s period")]
    SlotsOverlap { span: f64, period: u32 },
    #[error("header svid {header} does not match chip stream svid {model}")]
    SvidMismatch { header: u8, model: u8 },
}

/// Schedule facts for one slot, identical on both sides of the
/// protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSchedule {
    /// GST second at which the slot starts.
    pub slot_gst: u64,
    /// 30-second block the slot belongs to.
    pub period_block: usize,
    /// 1-based position of the slot within its 30-second block.
    pub position_in_period: usize,
    /// Chain block whose key unlocks this slot.
    pub key_block: usize,
}

/// Cyphertext blocks needed to randomize every slot of one 30-second
/// period.
pub fn offset_blocks_per_period(header: &RecsFileHeader) -> usize {
    let per_period = (BLOCK_SECONDS / u64::from(header.recs_period)).max(1) as usize;
    3 * per_period
}

/// Resolves slot `index` of `header` against the chain's block
/// numbering.
pub fn slot_schedule(
    header: &RecsFileHeader,
    chain: &KeyChain,
    index: usize,
) -> Result<SlotSchedule, GroundError> {
    let count = header.slot_count();
    if index >= count {
        return Err(GroundError::SlotOutOfRange { index, count });
    }
    let slot_gst = header.slot_gst(index);
    let period_block = chain.block_of_gst(slot_gst)?;
    let within = slot_gst - chain.gst_of_block(period_block);
    let position_in_period = (within / u64::from(header.recs_period)) as usize + 1;
    let key_block = period_block + usize::from(header.slrecs_offset);
    // Surface a coverage gap now rather than at key use.
    chain.key_for_block(key_block)?;
    Ok(SlotSchedule {
        slot_gst,
        period_block,
        position_in_period,
        key_block,
    })
}

/// Per-file IV: derived from the time tag of the chain block containing
/// the file's start, so one IV applies to every decryption in the file.
pub fn file_iv(header: &RecsFileHeader, chain: &KeyChain) -> Result<InitVector, GroundError> {
    let base_block = chain.block_of_gst(header.start_gst)?;
    let gst_sf = chain.key_for_block(base_block)?.gst_sf();
    Ok(compute_iv(&build_plaintext(gst_sf)))
}

/// Randomization offset in 8-ms units for one slot, given the derived
/// key of the slot's key block and the file IV.
pub fn slot_offset(
    header: &RecsFileHeader,
    schedule: &SlotSchedule,
    derived_key: &RecsKey,
    iv: &InitVector,
) -> Result<u8, GroundError> {
    if header.dtau_max == 0 {
        return Ok(0);
    }
    let cyphertext = offset_cyphertext(header, derived_key, iv)?;
    Ok(cyphertext.offset_for(schedule.position_in_period, header.svid, header.dtau_max)?)
}

/// Offset cyphertext covering all slot positions of one period.
pub fn offset_cyphertext(
    header: &RecsFileHeader,
    derived_key: &RecsKey,
    iv: &InitVector,
) -> Result<OffsetCyphertext, GroundError> {
    Ok(generate_offset_cyphertext(
        derived_key,
        iv,
        offset_blocks_per_period(header),
    )?)
}

/// First chip index of a slot's sequence: slot second, then the
/// millisecond offset, then the random delay, all in exact chip counts.
pub fn slot_first_chip(header: &RecsFileHeader, schedule: &SlotSchedule, dtau_units: u8) -> u64 {
    schedule.slot_gst * CHIP_RATE_INT
        + u64::from(header.recs_offset_ms) * CHIPS_PER_MS
        + u64::from(dtau_units) * CHIPS_PER_OFFSET_UNIT
}

/// Cuts the clear sequence for one slot out of the chip stream.
pub fn extract_ecs(
    model: &ChipStreamModel,
    header: &RecsFileHeader,
    chain: &KeyChain,
    index: usize,
    dtau_units: u8,
) -> Result<BitBlockSequence, GroundError> {
    let schedule = slot_schedule(header, chain, index)?;
    let first_chip = slot_first_chip(header, &schedule, dtau_units);
    let chips = model.chips_at_index(first_chip, header.n_chips as usize);
    Ok(BitBlockSequence::from_chips(&chips, SequenceRole::Ecs)?)
}

/// Full system-side path for one satellite: for every slot, derive the
/// key and offsets, cut the sequence and re-encrypt it.
pub fn build_recs_file(
    model: &ChipStreamModel,
    chain: &KeyChain,
    header: &RecsFileHeader,
) -> Result<RecsFile, GroundError> {
    header.validate()?;
    if header.svid != model.svid() {
        return Err(GroundError::SvidMismatch {
            header: header.svid,
            model: model.svid(),
        });
    }
    let span = f64::from(header.n_chips) / CHIP_RATE + OFFSET_UNIT_S * f64::from(header.dtau_max);
    if span > f64::from(header.recs_period) {
        return Err(GroundError::SlotsOverlap {
            span,
            period: header.recs_period,
        });
    }

    let iv = file_iv(header, chain)?;
    let mut slots = Vec::with_capacity(header.slot_count());
    for index in 0..header.slot_count() {
        let schedule = slot_schedule(header, chain, index)?;
        let derived = derive_recs_key(chain.key_for_block(schedule.key_block)?);
        let dtau = slot_offset(header, &schedule, &derived, &iv)?;
        let ecs = extract_ecs(model, header, chain, index, dtau)?;
        slots.push(encrypt_ecs(&ecs, &derived, &iv)?);
    }
    Ok(RecsFile::new(header.clone(), slots)?)
}

/// Configured truth for the group-delay prediction of one satellite.
#[derive(Debug, Clone, Copy)]
pub struct BgdPrediction {
    pub svid: u8,
    /// True group delay, seconds.
    pub bgd_true: f64,
    /// Prediction error to fold into the published value, meters.
    pub prediction_error_m: f64,
    /// Published 1-sigma accuracy, meters.
    pub sigma_m: f64,
    pub validity_start_gst: u64,
    pub validity_end_gst: u64,
}

/// Publishes the configured truth plus its configured prediction error.
pub fn predict_bgd(pred: &BgdPrediction) -> BgdRecord {
    BgdRecord {
        svid: pred.svid,
        bgd_e1_e6: pred.bgd_true + pred.prediction_error_m / SPEED_OF_LIGHT,
        sigma_bgd: pred.sigma_m / SPEED_OF_LIGHT,
        validity_start_gst: pred.validity_start_gst,
        validity_end_gst: pred.validity_end_gst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::decrypt_recs;
    use crate::keystream::EncryptionKey;
    use crate::tesla::generate_chain;

    const BLOCK0: u64 = 900_000; // multiple of 30

    fn chain(len: usize) -> KeyChain {
        generate_chain(&[0x11u8; 16], len, BLOCK0).unwrap()
    }

    fn header(svid: u8) -> RecsFileHeader {
        RecsFileHeader {
            start_gst: BLOCK0 + 30,
            duration: 120,
            svid,
            recs_period: 30,
            n_chips: 5120,
            recs_offset_ms: 500,
            slrecs_offset: 1,
            dtau_max: 3,
        }
    }

    fn model(svid: u8) -> ChipStreamModel {
        ChipStreamModel::new(&EncryptionKey([0x77; 32]), svid).unwrap()
    }

    #[test]
    fn schedule_maps_slots_to_blocks() {
        let chain = chain(8);
        let h = header(2);
        let s0 = slot_schedule(&h, &chain, 0).unwrap();
        assert_eq!(s0.slot_gst, BLOCK0 + 30);
        assert_eq!(s0.period_block, 1);
        assert_eq!(s0.position_in_period, 1);
        assert_eq!(s0.key_block, 2);
        let s3 = slot_schedule(&h, &chain, 3).unwrap();
        assert_eq!(s3.period_block, 4);
        assert_eq!(s3.key_block, 5);
        assert!(matches!(
            slot_schedule(&h, &chain, 4),
            Err(GroundError::SlotOutOfRange { .. })
        ));
    }

    #[test]
    fn sub_period_slots_get_positions() {
        let chain = chain(8);
        let mut h = header(2);
        h.recs_period = 10;
        h.duration = 60;
        assert_eq!(offset_blocks_per_period(&h), 9);
        let positions: Vec<usize> = (0..6)
            .map(|i| slot_schedule(&h, &chain, i).unwrap().position_in_period)
            .collect();
        assert_eq!(positions, vec![1, 2, 3, 1, 2, 3]);
    }

    #[test]
    fn extract_starts_at_configured_chip() {
        let chain = chain(8);
        let h = header(9);
        let m = model(9);
        let sched = slot_schedule(&h, &chain, 0).unwrap();

        // No randomization: the slice starts at the millisecond offset
        // past the slot's integer second.
        let base = sched.slot_gst * CHIP_RATE_INT + 500 * CHIPS_PER_MS;
        assert_eq!(slot_first_chip(&h, &sched, 0), base);
        // Two offset units shift the start by 16 ms = 81840 chips.
        assert_eq!(slot_first_chip(&h, &sched, 2), base + 81_840);

        let ecs = extract_ecs(&m, &h, &chain, 0, 2).unwrap();
        assert_eq!(ecs.to_chips(), m.chips_at_index(base + 81_840, 5120));
    }

    #[test]
    fn round_trip_recovers_keystream_slices() {
        let chain = chain(8);
        let h = header(4);
        let m = model(4);
        let file = build_recs_file(&m, &chain, &h).unwrap();
        assert_eq!(file.slots.len(), 4);

        let iv = file_iv(&h, &chain).unwrap();
        for index in 0..4 {
            let sched = slot_schedule(&h, &chain, index).unwrap();
            let derived = derive_recs_key(chain.key_for_block(sched.key_block).unwrap());
            let dtau = slot_offset(&h, &sched, &derived, &iv).unwrap();
            assert!(dtau <= h.dtau_max);
            let clear = decrypt_recs(&file.slots[index], &derived, &iv).unwrap();
            let expected = m.chips_at_index(slot_first_chip(&h, &sched, dtau), 5120);
            assert_eq!(clear.to_chips(), expected, "slot {index}");
        }
    }

    #[test]
    fn key_comes_from_a_later_block() {
        // With a slow-key offset of 1 the decryption key belongs to the
        // block after the slot's own block.
        let chain = chain(8);
        let h = header(4);
        let sched = slot_schedule(&h, &chain, 0).unwrap();
        assert_eq!(sched.key_block, sched.period_block + 1);
    }

    #[test]
    fn chain_coverage_gap_is_an_error() {
        let short = chain(3); // blocks 0..=2, last slot needs block 5
        let h = header(4);
        assert!(matches!(
            build_recs_file(&model(4), &short, &h),
            Err(GroundError::Chain(_))
        ));
    }

    #[test]
    fn overlapping_slots_rejected() {
        let chain = chain(8);
        let mut h = header(4);
        h.recs_period = 1;
        h.duration = 4;
        h.n_chips = 5_115_008 / 128 * 128; // just over one second of chips
        assert!(matches!(
            build_recs_file(&model(4), &chain, &h),
            Err(GroundError::SlotsOverlap { .. })
        ));
    }

    #[test]
    fn dtau_zero_when_disabled() {
        let chain = chain(8);
        let mut h = header(4);
        h.dtau_max = 0;
        let iv = file_iv(&h, &chain).unwrap();
        let sched = slot_schedule(&h, &chain, 0).unwrap();
        let derived = derive_recs_key(chain.key_for_block(sched.key_block).unwrap());
        assert_eq!(slot_offset(&h, &sched, &derived, &iv).unwrap(), 0);
    }

    #[test]
    fn bgd_prediction_folds_configured_error() {
        let pred = BgdPrediction {
            svid: 3,
            bgd_true: 1.0e-8,
            prediction_error_m: 0.5,
            sigma_m: 0.3,
            validity_start_gst: 0,
            validity_end_gst: 10,
        };
        let rec = predict_bgd(&pred);
        assert!((rec.bgd_e1_e6 - (1.0e-8 + 0.5 / SPEED_OF_LIGHT)).abs() < 1e-18);
        assert!((rec.sigma_bgd - 0.3 / SPEED_OF_LIGHT).abs() < 1e-18);

        let exact = predict_bgd(&BgdPrediction {
            prediction_error_m: 0.0,
            ..pred
        });
        assert_eq!(exact.bgd_e1_e6, 1.0e-8);
    }
}

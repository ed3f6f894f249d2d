//! Scenario file: one TOML document binding the chain, the published
//! file parameters, per-satellite truths, receiver assumptions and the
//! verification settings.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use acas_core::auth::IonoCoefMode;
use acas_core::synth::SpoofMode;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

// Deliberately incommensurate with the 5.115 Mchip/s chip rate: at an
// exact integer ratio every chip edge strikes the sample grid at the
// same phase and sub-sample delays become unrepresentable.
fn default_sample_rate() -> f64 {
    20.47e6
}
fn default_k() -> f64 {
    3.0
}
fn default_iono_fraction() -> f64 {
    0.7
}
fn default_threshold_db() -> f64 {
    13.0
}
fn default_t_max_chips() -> f64 {
    1.5
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_k")]
    pub confidence_k: f64,
    /// Which slot of the published files to authenticate.
    #[serde(default)]
    pub auth_slot: usize,
    /// Receiver time at which authentication runs; defaults to the
    /// disclosure time of the needed key.
    #[serde(default)]
    pub auth_gst: Option<u64>,
    #[serde(default)]
    pub spoof: SpoofSection,
    pub chain: ChainSection,
    pub recs: RecsSection,
    pub encryption: EncryptionSection,
    pub receiver: ReceiverSection,
    pub budget: BudgetSection,
    #[serde(default)]
    pub estimates: EstimateSection,
    #[serde(rename = "satellites")]
    pub satellites: Vec<SatelliteSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpoofSection {
    #[serde(default)]
    pub mode: SpoofKind,
    /// Extra delay for `replay-shift`, seconds.
    #[serde(default)]
    pub shift_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpoofKind {
    #[default]
    None,
    WrongChips,
    ReplayShift,
    NoSignal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub seed_hex: String,
    pub block0_gst: u64,
    pub length: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecsSection {
    pub start_gst: u64,
    pub duration_s: u32,
    pub recs_period_s: u32,
    pub n_chips: u32,
    #[serde(default)]
    pub recs_offset_ms: u16,
    #[serde(default)]
    pub slrecs_offset: u16,
    #[serde(default)]
    pub dtau_max: u8,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncryptionSection {
    pub key_hex: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    #[serde(default)]
    pub dt_rx_e1_s: f64,
    #[serde(default)]
    pub hwb_true_s: f64,
    #[serde(default)]
    pub hwb_hat_s: f64,
    #[serde(default = "default_t_max_chips")]
    pub t_max_chips: f64,
    #[serde(default)]
    pub f_max_hz: f64,
    #[serde(default = "default_threshold_db")]
    pub detection_threshold_db: f64,
    #[serde(default = "default_true")]
    pub noise: bool,
}

/// A-priori 1-sigma error contributions in meters. The group-delay
/// sigma comes from the published `.bgd` records, not from here.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    pub sigma_hwb: f64,
    pub sigma_i_e1: f64,
    pub sigma_mp_e6: f64,
    pub sigma_mp_e1: f64,
    pub sigma_n_e6: f64,
    pub sigma_n_e1: f64,
    #[serde(default)]
    pub iono_mode: IonoMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IonoMode {
    #[default]
    Squared,
    Literal,
}

impl From<IonoMode> for IonoCoefMode {
    fn from(m: IonoMode) -> Self {
        match m {
            IonoMode::Squared => IonoCoefMode::Squared,
            IonoMode::Literal => IonoCoefMode::Literal,
        }
    }
}

/// 1-sigma magnitudes of the simulated E1-side estimation errors.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    /// Fraction of the true ionospheric delay corrected by the model.
    pub iono_fraction: f64,
    pub sigma_mp_e1_m: f64,
    pub sigma_n_e1_m: f64,
    /// Extra multipath-like delay drawn into the E6 signal itself.
    pub sigma_mp_e6_m: f64,
    pub sigma_tau_prop_m: f64,
    pub doppler_err_hz: f64,
    /// E1 measurements are taken this long before the epoch and
    /// extrapolated forward by range rate.
    pub e1_epoch_offset_s: f64,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            iono_fraction: default_iono_fraction(),
            sigma_mp_e1_m: 0.0,
            sigma_n_e1_m: 0.0,
            sigma_mp_e6_m: 0.0,
            sigma_tau_prop_m: 0.0,
            doppler_err_hz: 0.0,
            e1_epoch_offset_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteSection {
    pub svid: u8,
    pub tau_prop_s: f64,
    #[serde(default)]
    pub dt_sat_e1_s: f64,
    #[serde(default)]
    pub bgd_true_s: f64,
    /// Error folded into the published group-delay prediction, meters.
    #[serde(default)]
    pub bgd_error_m: f64,
    /// Published group-delay accuracy, meters.
    #[serde(default)]
    pub sigma_bgd_m: f64,
    #[serde(default)]
    pub tec: f64,
    #[serde(default)]
    pub doppler_e1_hz: f64,
    pub cn0_dbhz: f64,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.satellites.is_empty() {
            return fail("at least one satellite required".into());
        }
        let mut svids: Vec<u8> = self.satellites.iter().map(|s| s.svid).collect();
        svids.sort_unstable();
        svids.dedup();
        if svids.len() != self.satellites.len() {
            return fail("satellite svids must be unique".into());
        }
        if self.confidence_k <= 0.0 {
            return fail(format!("confidence_k {} must be > 0", self.confidence_k));
        }
        if !(0.0..=1.0).contains(&self.estimates.iono_fraction) {
            return fail("iono_fraction must be within [0, 1]".into());
        }
        if self.spoof.mode == SpoofKind::ReplayShift && self.spoof.shift_s == 0.0 {
            return fail("replay-shift spoofing needs a non-zero shift_s".into());
        }
        if hex_bytes(&self.chain.seed_hex).is_err() {
            return fail("chain.seed_hex is not valid hex".into());
        }
        match hex_bytes(&self.encryption.key_hex) {
            Ok(k) if k.len() == 32 => {}
            _ => return fail("encryption.key_hex must be 32 octets of hex".into()),
        }
        if self.auth_slot >= self.header().slot_count().max(1) {
            return fail(format!(
                "auth_slot {} outside the {} slots of the published files",
                self.auth_slot,
                self.header().slot_count()
            ));
        }
        // f64 receiver-time arithmetic keeps centimetre precision only
        // for epochs of a few weeks; scenario GSTs are seconds from a
        // nearby epoch (e.g. the week start), not a multi-year count.
        const GST_LIMIT: u64 = 2_000_000;
        let last = self.recs.start_gst + u64::from(self.recs.duration_s);
        if last > GST_LIMIT || self.chain.block0_gst > GST_LIMIT {
            return fail(format!(
                "scenario GST values must stay below {GST_LIMIT} s; express times \
                 relative to a nearby epoch"
            ));
        }
        Ok(())
    }

    /// Published-file header shared by all satellites (svid filled per
    /// satellite).
    pub fn header(&self) -> acas_core::recs_file::RecsFileHeader {
        acas_core::recs_file::RecsFileHeader {
            start_gst: self.recs.start_gst,
            duration: self.recs.duration_s,
            svid: 1,
            recs_period: self.recs.recs_period_s,
            n_chips: self.recs.n_chips,
            recs_offset_ms: self.recs.recs_offset_ms,
            slrecs_offset: self.recs.slrecs_offset,
            dtau_max: self.recs.dtau_max,
        }
    }

    pub fn header_for(&self, svid: u8) -> acas_core::recs_file::RecsFileHeader {
        acas_core::recs_file::RecsFileHeader {
            svid,
            ..self.header()
        }
    }

    pub fn chain_seed(&self) -> Vec<u8> {
        hex_bytes(&self.chain.seed_hex).expect("validated")
    }

    pub fn encryption_key(&self) -> acas_core::keystream::EncryptionKey {
        let bytes = hex_bytes(&self.encryption.key_hex).expect("validated");
        acas_core::keystream::EncryptionKey::from_slice(&bytes).expect("validated length")
    }

    pub fn spoof_mode(&self) -> SpoofMode {
        match self.spoof.mode {
            SpoofKind::None => SpoofMode::None,
            SpoofKind::WrongChips => SpoofMode::WrongChips,
            SpoofKind::ReplayShift => SpoofMode::StaticReplayShift(self.spoof.shift_s),
            SpoofKind::NoSignal => SpoofMode::NoSignal,
        }
    }
}

fn hex_bytes(s: &str) -> Result<Vec<u8>, hex::FromHexError> {
    hex::decode(s.trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
seed = 42
confidence_k = 3.0

[chain]
seed_hex = "0f1e2d3c4b5a69788796a5b4c3d2e1f0"
block0_gst = 1230000
length = 8

[recs]
start_gst = 1230030
duration_s = 60
recs_period_s = 30
n_chips = 5120
recs_offset_ms = 400
slrecs_offset = 1
dtau_max = 3

[encryption]
key_hex = "00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff"

[receiver]
dt_rx_e1_s = 5.0e-5
hwb_true_s = 2.0e-9
hwb_hat_s = 2.0e-9

[budget]
sigma_hwb = 0.3
sigma_i_e1 = 1.0
sigma_mp_e6 = 0.5
sigma_mp_e1 = 0.5
sigma_n_e6 = 0.5
sigma_n_e1 = 0.3

[[satellites]]
svid = 5
tau_prop_s = 0.081
cn0_dbhz = 48.0

[[satellites]]
svid = 12
tau_prop_s = 0.093
cn0_dbhz = 47.0
"#;

    #[test]
    fn parses_and_validates() {
        let sc = Scenario::parse(SAMPLE).unwrap();
        assert_eq!(sc.satellites.len(), 2);
        assert_eq!(sc.sample_rate_hz, 20.47e6);
        assert_eq!(sc.header_for(5).svid, 5);
        assert_eq!(sc.header().slot_count(), 2);
        assert_eq!(sc.spoof_mode(), SpoofMode::None);
    }

    #[test]
    fn rejects_duplicate_svids() {
        let text = SAMPLE.replace("svid = 12", "svid = 5");
        assert!(matches!(
            Scenario::parse(&text),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn rejects_zero_replay_shift() {
        let text = format!("{SAMPLE}\n[spoof]\nmode = \"replay-shift\"\n");
        assert!(Scenario::parse(&text).is_err());
        let text = format!("{SAMPLE}\n[spoof]\nmode = \"replay-shift\"\nshift_s = 1e-5\n");
        let sc = Scenario::parse(&text).unwrap();
        assert_eq!(sc.spoof_mode(), SpoofMode::StaticReplayShift(1e-5));
    }

    #[test]
    fn rejects_bad_key_material() {
        let text = SAMPLE.replace(
            "key_hex = \"00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff\"",
            "key_hex = \"0011\"",
        );
        assert!(Scenario::parse(&text).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = format!("{SAMPLE}\nbogus_field = 1\n");
        assert!(matches!(
            Scenario::parse(&text),
            Err(ScenarioError::Toml(_))
        ));
    }
}

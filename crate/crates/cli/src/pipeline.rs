//! The four pipeline stages behind the CLI subcommands: publish the
//! per-satellite files, record the snapshot, run the receiver-side
//! verification, or all three chained.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use acas_core::acquire::{correlate_ecs, AcqConfig, AcquireError, SearchWindow};
use acas_core::auth::{sigma_auth_default, AuthError, AuthReport, ErrorBudget, SatCheck};
use acas_core::bgd_file::{parse_bgd, serialize_bgd, BgdRecord};
use acas_core::crypto::{decrypt_recs, derive_recs_key, CryptoError};
use acas_core::ground::{
    build_recs_file, file_iv, predict_bgd, slot_offset, slot_schedule, BgdPrediction, GroundError,
};
use acas_core::keystream::ChipStreamModel;
use acas_core::ranging::{
    delta_e1e6, doppler_e6, extrapolate_code_phase, predicted_code_phase, snapshot_window_all,
    BiasConfig, E1Estimates, RangingError,
};
use acas_core::recs_file::{parse_recs, serialize_recs, FormatError, RecsFile};
use acas_core::snapshot::{read_snapshot, write_snapshot, SnapshotError};
use acas_core::synth::{synthesize, NoiseSpec, SatelliteTruth, SynthError};
use acas_core::tesla::{generate_chain, verify_key, ChainError, DisclosureSchedule, KeyChain};
use acas_core::{iono_delay_e1_m, Snapshot64, F1_HZ, OFFSET_UNIT_S, SPEED_OF_LIGHT};

use crate::scenario::{Scenario, ScenarioError, SpoofKind};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Ranging(#[from] RangingError),
    #[error(transparent)]
    Acquire(#[from] AcquireError),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("missing published file: {0}")]
    MissingFile(PathBuf),
    #[error("published chain root does not match the receiver's root")]
    RootMismatch,
    #[error("disclosed key for block {0} failed verification against the chain root")]
    KeyVerificationFailed(usize),
    #[error("no group-delay record for svid {svid} valid at GST {gst}")]
    BgdNotValid { svid: u8, gst: u64 },
    #[error(transparent)]
    Keystream(#[from] acas_core::keystream::KeystreamError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// splitmix64, used to key per-satellite and per-purpose RNG streams.
fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x9E3779B97F4A7C15u64;
    for &p in parts {
        let mut z = h ^ p;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        h = z ^ (z >> 31);
    }
    h
}

const PURPOSE_ESTIMATES: u64 = 1;
const PURPOSE_NOISE: u64 = 2;
const PURPOSE_MP_E6: u64 = 3;

pub fn recs_file_name(svid: u8) -> String {
    format!("E{svid:02}.recs")
}
pub const BGD_FILE_NAME: &str = "acas.bgd";
pub const ROOT_FILE_NAME: &str = "chain_root.txt";
pub const SNAPSHOT_FILE_NAME: &str = "snapshot.snap";

fn chain_of(sc: &Scenario) -> Result<KeyChain, PipelineError> {
    Ok(generate_chain(
        &sc.chain_seed(),
        sc.chain.length,
        sc.chain.block0_gst,
    )?)
}

fn bgd_prediction(sc: &Scenario, sat: &crate::scenario::SatelliteSection) -> BgdPrediction {
    BgdPrediction {
        svid: sat.svid,
        bgd_true: sat.bgd_true_s,
        prediction_error_m: sat.bgd_error_m,
        sigma_m: sat.sigma_bgd_m,
        validity_start_gst: sc.chain.block0_gst,
        validity_end_gst: sc.recs.start_gst + u64::from(sc.recs.duration_s) + 86_400,
    }
}

/// Per-satellite estimates and bias chains, in scenario order.
pub type EstimateSet = (Vec<E1Estimates<f64>>, Vec<BiasConfig<f64>>);

/// E1-side estimates and bias chain for one slot, drawn
/// deterministically from the scenario seed.
pub fn derive_estimates(sc: &Scenario, slot_gst: u64) -> Result<EstimateSet, PipelineError> {
    let est_cfg = &sc.estimates;
    let mut ests = Vec::with_capacity(sc.satellites.len());
    let mut biases = Vec::with_capacity(sc.satellites.len());
    for sat in &sc.satellites {
        let mut rng = ChaCha12Rng::seed_from_u64(mix(&[
            sc.seed,
            u64::from(sat.svid),
            slot_gst,
            PURPOSE_ESTIMATES,
        ]));
        let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

        let i_e1_true_m = iono_delay_e1_m(sat.tec);
        let i_e1_hat_m = est_cfg.iono_fraction * i_e1_true_m;
        // The raw code phase carries the full ionospheric delay; the
        // model estimate enters only through the E1-to-E6 excess term.
        let eps_m = i_e1_true_m + est_cfg.sigma_mp_e1_m * gauss() + est_cfg.sigma_n_e1_m * gauss();

        let tau_e1_at_epoch =
            sat.tau_prop_s + sc.receiver.dt_rx_e1_s - sat.dt_sat_e1_s + eps_m / SPEED_OF_LIGHT;
        // The E1 measurement grid may miss the epoch; the receiver
        // extrapolates the nearest measurement forward by range rate.
        let range_rate_mps = -sat.doppler_e1_hz * SPEED_OF_LIGHT / F1_HZ;
        let offset = est_cfg.e1_epoch_offset_s;
        let tau_e1_measured = tau_e1_at_epoch - offset * range_rate_mps / SPEED_OF_LIGHT;
        let tau_e1 = extrapolate_code_phase(tau_e1_measured, -offset, 0.0, range_rate_mps);

        let tau_prop_hat = sat.tau_prop_s + est_cfg.sigma_tau_prop_m * gauss() / SPEED_OF_LIGHT;
        let doppler_e1 = sat.doppler_e1_hz + est_cfg.doppler_err_hz * gauss();

        let est = E1Estimates {
            svid: sat.svid,
            tau_e1,
            doppler_e1,
            dt_sat_e1: sat.dt_sat_e1_s,
            dt_rx_e1: sc.receiver.dt_rx_e1_s,
            tau_prop_hat,
            i_e1_hat: i_e1_hat_m,
        };
        est.validate()?;
        ests.push(est);
        biases.push(BiasConfig::new(
            sat.bgd_true_s + sat.bgd_error_m / SPEED_OF_LIGHT,
            sc.receiver.hwb_hat_s,
        ));
    }
    Ok((ests, biases))
}

fn truths_for(sc: &Scenario, slot_gst: u64) -> Vec<SatelliteTruth> {
    sc.satellites
        .iter()
        .map(|sat| {
            let mp_extra = if sc.estimates.sigma_mp_e6_m > 0.0 {
                let mut rng = ChaCha12Rng::seed_from_u64(mix(&[
                    sc.seed,
                    u64::from(sat.svid),
                    slot_gst,
                    PURPOSE_MP_E6,
                ]));
                let g: f64 = StandardNormal.sample(&mut rng);
                sc.estimates.sigma_mp_e6_m * g / SPEED_OF_LIGHT
            } else {
                0.0
            };
            SatelliteTruth {
                svid: sat.svid,
                tau_prop: sat.tau_prop_s,
                dt_sat_e1: sat.dt_sat_e1_s,
                bgd_true: sat.bgd_true_s,
                tec: sat.tec,
                doppler_e1: sat.doppler_e1_hz,
                cn0_dbhz: sat.cn0_dbhz,
                hwb_rx: sc.receiver.hwb_true_s,
                dt_rx_e1: sc.receiver.dt_rx_e1_s,
                mp_extra_delay: mp_extra,
            }
        })
        .collect()
}

#[derive(Debug)]
pub struct GenerateOutput {
    pub recs_paths: Vec<PathBuf>,
    pub bgd_path: PathBuf,
    pub root_path: PathBuf,
}

/// Publishes one `.recs` file per satellite plus the group-delay file
/// and the chain root, all under `out_dir`.
pub fn cmd_generate(sc: &Scenario, out_dir: &Path) -> Result<GenerateOutput, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let chain = chain_of(sc)?;
    let key = sc.encryption_key();

    let mut recs_paths = Vec::new();
    let mut bgd_records = Vec::new();
    for sat in &sc.satellites {
        let header = sc.header_for(sat.svid);
        let model = ChipStreamModel::new(&key, sat.svid)?;
        let file = build_recs_file(&model, &chain, &header)?;
        let blob = serialize_recs(&file)?;
        let path = out_dir.join(recs_file_name(sat.svid));
        std::fs::write(&path, blob).map_err(io_err(&path))?;
        recs_paths.push(path);
        bgd_records.push(predict_bgd(&bgd_prediction(sc, sat)));
    }

    let bgd_path = out_dir.join(BGD_FILE_NAME);
    std::fs::write(&bgd_path, serialize_bgd(&bgd_records)).map_err(io_err(&bgd_path))?;
    let root_path = out_dir.join(ROOT_FILE_NAME);
    std::fs::write(&root_path, format!("{}\n", chain.root_hex())).map_err(io_err(&root_path))?;
    Ok(GenerateOutput {
        recs_paths,
        bgd_path,
        root_path,
    })
}

#[derive(Debug)]
pub struct SimulateOutput {
    pub snapshot_path: PathBuf,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Records the snapshot for the scenario's authentication slot.
pub fn cmd_simulate(sc: &Scenario, out_dir: &Path) -> Result<SimulateOutput, PipelineError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let header = sc.header();
    let slot_gst = header.slot_gst(sc.auth_slot);
    let (ests, biases) = derive_estimates(sc, slot_gst)?;
    let window = snapshot_window_all(
        slot_gst as f64,
        f64::from(sc.recs.recs_offset_ms) / 1000.0,
        &ests,
        &biases,
        sc.recs.dtau_max,
        sc.recs.n_chips,
    )?;

    let key = sc.encryption_key();
    let models: Vec<ChipStreamModel> = sc
        .satellites
        .iter()
        .map(|sat| ChipStreamModel::new(&key, sat.svid))
        .collect::<Result<_, _>>()?;
    let truths = truths_for(sc, slot_gst);
    let snap: Snapshot64 = synthesize(
        &truths,
        &models,
        window,
        sc.sample_rate_hz,
        sc.spoof_mode(),
        NoiseSpec {
            enabled: sc.receiver.noise,
            seed: mix(&[sc.seed, slot_gst, PURPOSE_NOISE]),
        },
    )?;

    let snapshot_path = out_dir.join(SNAPSHOT_FILE_NAME);
    let stored = snap.convert::<f32>();
    std::fs::write(&snapshot_path, write_snapshot(&stored)).map_err(io_err(&snapshot_path))?;
    Ok(SimulateOutput {
        snapshot_path,
        window,
        samples: stored.samples.len(),
    })
}

/// Everything the report renderer needs about one verification run.
#[derive(Debug)]
pub struct FullReport {
    pub report: AuthReport<f64>,
    pub slot_gst: u64,
    pub auth_gst: u64,
    pub slot_index: usize,
    pub sigma_auth_m: Vec<f64>,
    pub dtau_units: Vec<u8>,
}

/// Receiver-side verification: decrypt the published slots with
/// disclosed keys, correlate against the snapshot and test every
/// pseudorange residual.
pub fn cmd_authenticate(
    sc: &Scenario,
    recs_dir: &Path,
    snapshot_path: &Path,
    auth_gst_override: Option<u64>,
) -> Result<FullReport, PipelineError> {
    // Receiver-side chain: the broadcast key feed stand-in, anchored to
    // the published root.
    let chain = chain_of(sc)?;
    let root_path = recs_dir.join(ROOT_FILE_NAME);
    if root_path.exists() {
        let text = std::fs::read_to_string(&root_path).map_err(io_err(&root_path))?;
        if text.trim() != chain.root_hex() {
            return Err(PipelineError::RootMismatch);
        }
    }

    let snap_bytes = std::fs::read(snapshot_path).map_err(io_err(snapshot_path))?;
    let snapshot: Snapshot64 = read_snapshot(&snap_bytes)?;

    let bgd_path = recs_dir.join(BGD_FILE_NAME);
    if !bgd_path.exists() {
        return Err(PipelineError::MissingFile(bgd_path));
    }
    let bgd_text = std::fs::read_to_string(&bgd_path).map_err(io_err(&bgd_path))?;
    let bgd_records = parse_bgd(&bgd_text)?;

    let mut files: BTreeMap<u8, RecsFile> = BTreeMap::new();
    for sat in &sc.satellites {
        let path = recs_dir.join(recs_file_name(sat.svid));
        if !path.exists() {
            return Err(PipelineError::MissingFile(path));
        }
        let blob = std::fs::read(&path).map_err(io_err(&path))?;
        files.insert(sat.svid, parse_recs(&blob)?);
    }

    let slot_index = sc.auth_slot;
    let schedule = DisclosureSchedule::default();
    let shared_header = sc.header();
    let slot_gst = shared_header.slot_gst(slot_index);

    // Default verification time: when the slowest needed key becomes
    // public.
    let needed_block = slot_schedule(&shared_header, &chain, slot_index)?.key_block;
    let auth_gst = auth_gst_override
        .or(sc.auth_gst)
        .unwrap_or_else(|| chain.disclosure_gst(needed_block, &schedule));
    let disclosed = chain.disclosed_at(auth_gst, schedule);

    let (ests, _) = derive_estimates(sc, slot_gst)?;
    let search = SearchWindow::from_chips(sc.receiver.t_max_chips, sc.receiver.f_max_hz);
    let acq = AcqConfig::from_db(sc.receiver.detection_threshold_db);

    let mut entries = Vec::new();
    let mut sigma_auth_m = Vec::new();
    let mut dtau_units = Vec::new();
    for (sat, est) in sc.satellites.iter().zip(&ests) {
        let file = &files[&sat.svid];
        let header = &file.header;
        let sched = slot_schedule(header, &chain, slot_index)?;

        let key = disclosed.key_for_block(sched.key_block)?;
        if !verify_key(key, sched.key_block, chain.root()) {
            return Err(PipelineError::KeyVerificationFailed(sched.key_block));
        }
        let derived = derive_recs_key(key);
        let iv = file_iv(header, &chain)?;
        let dtau = slot_offset(header, &sched, &derived, &iv)?;
        let chips = decrypt_recs(&file.slots[slot_index], &derived, &iv)?.to_chips();

        let record = bgd_records
            .iter()
            .find(|r| r.svid == sat.svid && r.valid_at(sched.slot_gst))
            .ok_or(PipelineError::BgdNotValid {
                svid: sat.svid,
                gst: sched.slot_gst,
            })?;
        let bias = BiasConfig::new(record.bgd_e1_e6, sc.receiver.hwb_hat_s);

        let tau_hat_rel = predicted_code_phase(est.tau_e1, delta_e1e6(&bias, est.i_e1_hat));
        let tau_hat_abs = sched.slot_gst as f64
            + f64::from(header.recs_offset_ms) / 1000.0
            + tau_hat_rel
            + OFFSET_UNIT_S * f64::from(dtau);
        let doppler_hat = doppler_e6(est.doppler_e1, &bias);

        let meas = correlate_ecs(&snapshot, &chips, tau_hat_abs, doppler_hat, &search, &acq)?;

        let budget = budget_for(sc, record);
        let sigma = sigma_auth_default(&budget, sc.budget.iono_mode.into());
        sigma_auth_m.push(sigma);
        dtau_units.push(dtau);
        entries.push(SatCheck::evaluate(
            sat.svid,
            &meas,
            tau_hat_abs,
            sigma,
            sc.confidence_k,
        ));
    }

    let report = AuthReport::new(entries, sc.confidence_k)?;
    Ok(FullReport {
        report,
        slot_gst,
        auth_gst,
        slot_index,
        sigma_auth_m,
        dtau_units,
    })
}

/// Per-satellite budget: the published group-delay accuracy joins the
/// scenario-wide contributions unchanged.
fn budget_for(sc: &Scenario, record: &BgdRecord) -> ErrorBudget<f64> {
    ErrorBudget {
        sigma_hwb: sc.budget.sigma_hwb,
        sigma_bgd: record.sigma_bgd * SPEED_OF_LIGHT,
        sigma_i_e1: sc.budget.sigma_i_e1,
        sigma_mp_e6: sc.budget.sigma_mp_e6,
        sigma_mp_e1: sc.budget.sigma_mp_e1,
        sigma_n_e6: sc.budget.sigma_n_e6,
        sigma_n_e1: sc.budget.sigma_n_e1,
    }
}

/// All three stages against one output directory.
pub fn cmd_e2e(sc: &Scenario, out_dir: &Path) -> Result<FullReport, PipelineError> {
    cmd_generate(sc, out_dir)?;
    let sim = cmd_simulate(sc, out_dir)?;
    cmd_authenticate(sc, out_dir, &sim.snapshot_path, None)
}

/// True when the spoof section leaves the signal untouched.
pub fn is_nominal(sc: &Scenario) -> bool {
    sc.spoof.mode == SpoofKind::None
}

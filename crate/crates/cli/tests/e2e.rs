//! End-to-end pipeline tests through the library entry points: file
//! cardinality, determinism, spoof rejection, disclosure gating and the
//! operational error paths.

use std::path::Path;

use acas_cli::pipeline::{
    cmd_authenticate, cmd_e2e, cmd_generate, cmd_simulate, PipelineError, BGD_FILE_NAME,
    ROOT_FILE_NAME,
};
use acas_cli::report::{render_text, to_json};
use acas_cli::scenario::Scenario;

fn nominal_scenario_text() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/nominal.toml");
    std::fs::read_to_string(path).expect("example scenario present")
}

fn nominal() -> Scenario {
    Scenario::parse(&nominal_scenario_text()).unwrap()
}

fn with_spoof(mode_lines: &str) -> Scenario {
    let text = nominal_scenario_text().replace("mode = \"none\"", mode_lines);
    Scenario::parse(&text).unwrap()
}

#[test]
fn generate_publishes_one_file_per_satellite() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_generate(&nominal(), dir.path()).unwrap();
    assert_eq!(out.recs_paths.len(), 6);
    for svid in [3u8, 7, 12, 19, 25, 33] {
        assert!(dir.path().join(format!("E{svid:02}.recs")).exists());
    }
    assert!(dir.path().join(BGD_FILE_NAME).exists());
    let root = std::fs::read_to_string(dir.path().join(ROOT_FILE_NAME)).unwrap();
    assert_eq!(root.trim().len(), 32); // 16-octet root in hex
}

#[test]
fn generate_is_deterministic() {
    let sc = nominal();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    cmd_generate(&sc, d1.path()).unwrap();
    cmd_generate(&sc, d2.path()).unwrap();
    for name in ["E03.recs", "E33.recs", BGD_FILE_NAME, ROOT_FILE_NAME] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn simulate_window_matches_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let sc = nominal();
    let sim = cmd_simulate(&sc, dir.path()).unwrap();
    let expected = (sim.window.1 - sim.window.0) * sc.sample_rate_hz;
    assert!(
        (sim.samples as f64 - expected).abs() <= 1.0,
        "{} samples vs window {:.1}",
        sim.samples,
        expected
    );
    // Seeded runs reproduce bit-identical snapshots.
    let d2 = tempfile::tempdir().unwrap();
    let sim2 = cmd_simulate(&sc, d2.path()).unwrap();
    assert_eq!(
        std::fs::read(sim.snapshot_path).unwrap(),
        std::fs::read(sim2.snapshot_path).unwrap()
    );
}

#[test]
fn nominal_scenario_authenticates_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sc = nominal();
    let full = cmd_e2e(&sc, dir.path()).unwrap();
    assert!(full.report.position_authenticated);
    assert_eq!(full.report.entries.len(), 6);
    for e in &full.report.entries {
        assert!(e.detected, "svid {} not detected", e.svid);
        assert!(e.xi);
    }

    let dir2 = tempfile::tempdir().unwrap();
    let full2 = cmd_e2e(&sc, dir2.path()).unwrap();
    assert_eq!(render_text(&full), render_text(&full2));
    assert_eq!(
        serde_json::to_string(&to_json(&full)).unwrap(),
        serde_json::to_string(&to_json(&full2)).unwrap()
    );
}

#[test]
fn report_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let full = cmd_e2e(&nominal(), dir.path()).unwrap();
    let golden = include_str!("golden/nominal_report.txt");
    assert_eq!(render_text(&full), golden);
}

#[test]
fn wrong_chips_rejects_every_satellite() {
    let dir = tempfile::tempdir().unwrap();
    let sc = with_spoof("mode = \"wrong-chips\"");
    let full = cmd_e2e(&sc, dir.path()).unwrap();
    assert!(!full.report.position_authenticated);
    for e in &full.report.entries {
        assert!(!e.xi, "svid {} unexpectedly authenticated", e.svid);
        assert!(e.note.is_some());
    }
}

#[test]
fn replay_shift_rejects_position() {
    let dir = tempfile::tempdir().unwrap();
    let sc = with_spoof("mode = \"replay-shift\"\nshift_s = 5.0e-7");
    let full = cmd_e2e(&sc, dir.path()).unwrap();
    assert!(!full.report.position_authenticated);
}

#[test]
fn no_signal_rejects_position() {
    let dir = tempfile::tempdir().unwrap();
    let sc = with_spoof("mode = \"no-signal\"");
    let full = cmd_e2e(&sc, dir.path()).unwrap();
    assert!(!full.report.position_authenticated);
    for e in &full.report.entries {
        assert!(!e.detected);
    }
}

#[test]
fn authentication_before_disclosure_is_gated() {
    let dir = tempfile::tempdir().unwrap();
    let sc = nominal();
    cmd_generate(&sc, dir.path()).unwrap();
    let sim = cmd_simulate(&sc, dir.path()).unwrap();

    // Slot 0 sits in chain block 1; with the slow-key offset of 1 the
    // needed key is block 2, disclosed at block0 + 30 * 3.
    let too_early = sc.chain.block0_gst + 89;
    let err = cmd_authenticate(&sc, dir.path(), &sim.snapshot_path, Some(too_early)).unwrap_err();
    assert!(
        matches!(
            err,
            PipelineError::Chain(acas_core::tesla::ChainError::NotYetDisclosed { .. })
        ),
        "{err:?}"
    );

    let on_time = sc.chain.block0_gst + 90;
    let full = cmd_authenticate(&sc, dir.path(), &sim.snapshot_path, Some(on_time)).unwrap();
    assert!(full.report.position_authenticated);
}

#[test]
fn missing_published_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let sc = nominal();
    cmd_generate(&sc, dir.path()).unwrap();
    let sim = cmd_simulate(&sc, dir.path()).unwrap();

    std::fs::remove_file(dir.path().join("E07.recs")).unwrap();
    let err = cmd_authenticate(&sc, dir.path(), &sim.snapshot_path, None).unwrap_err();
    assert!(matches!(err, PipelineError::MissingFile(_)), "{err:?}");
}

#[test]
fn tampered_chain_root_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sc = nominal();
    cmd_generate(&sc, dir.path()).unwrap();
    let sim = cmd_simulate(&sc, dir.path()).unwrap();

    let root_path = dir.path().join(ROOT_FILE_NAME);
    let mut root = std::fs::read_to_string(&root_path).unwrap();
    root = root.replace(&root[..1], if &root[..1] == "0" { "1" } else { "0" });
    std::fs::write(&root_path, root).unwrap();
    let err = cmd_authenticate(&sc, dir.path(), &sim.snapshot_path, None).unwrap_err();
    assert!(matches!(err, PipelineError::RootMismatch), "{err:?}");
}

#[test]
fn corrupted_recs_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sc = nominal();
    cmd_generate(&sc, dir.path()).unwrap();
    let sim = cmd_simulate(&sc, dir.path()).unwrap();

    let path = dir.path().join("E12.recs");
    let mut blob = std::fs::read(&path).unwrap();
    let mid = blob.len() / 2;
    blob[mid] ^= 0x40;
    std::fs::write(&path, blob).unwrap();
    let err = cmd_authenticate(&sc, dir.path(), &sim.snapshot_path, None).unwrap_err();
    assert!(matches!(err, PipelineError::Format(_)), "{err:?}");
}

#[test]
fn invalid_chip_count_fails_validation() {
    let text = nominal_scenario_text().replace("n_chips = 5120", "n_chips = 5115");
    let sc = Scenario::parse(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_generate(&sc, dir.path()).unwrap_err();
    assert!(matches!(err, PipelineError::Ground(_)), "{err:?}");
}

#[test]
fn two_satellite_window_has_derived_length() {
    // Propagation times 77 and 97 ms, 500 ms sequence offset, three
    // offset units maximum, 5120 chips: the snapshot spans
    // [GST_j + 0.577, GST_j + 0.597 + 0.024 + 0.001001] and the file
    // carries that many samples to within one.
    let text = r#"
seed = 1
[chain]
seed_hex = "000102030405060708090a0b0c0d0e0f"
block0_gst = 1230000
length = 8
[recs]
start_gst = 1230030
duration_s = 30
recs_period_s = 30
n_chips = 5120
recs_offset_ms = 500
slrecs_offset = 1
dtau_max = 3
[encryption]
key_hex = "00112233445566778899aabbccddeeff00112233445566778899aabbccddeeff"
[receiver]
noise = false
[budget]
sigma_hwb = 0.3
sigma_i_e1 = 1.0
sigma_mp_e6 = 0.5
sigma_mp_e1 = 0.5
sigma_n_e6 = 5.0
sigma_n_e1 = 0.3
[estimates]
iono_fraction = 1.0
[[satellites]]
svid = 1
tau_prop_s = 0.077
cn0_dbhz = 45.0
[[satellites]]
svid = 2
tau_prop_s = 0.097
cn0_dbhz = 45.0
"#;
    let sc = Scenario::parse(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sim = cmd_simulate(&sc, dir.path()).unwrap();
    let gst_j = 1230030.0;
    assert!((sim.window.0 - (gst_j + 0.577)).abs() < 1e-9);
    let expected_end = gst_j + 0.597 + 0.024 + 5120.0 / 5.115e6;
    assert!((sim.window.1 - expected_end).abs() < 1e-9);
    let expected_samples = (sim.window.1 - sim.window.0) * sc.sample_rate_hz;
    assert!((sim.samples as f64 - expected_samples).abs() <= 1.0);
}

#[test]
fn binary_exit_codes_follow_the_verdict() {
    let bin = env!("CARGO_BIN_EXE_acas");
    let dir = tempfile::tempdir().unwrap();
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/nominal.toml");

    let ok = std::process::Command::new(bin)
        .args(["e2e", "--scenario"])
        .arg(&scenario)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{ok:?}");
    assert!(dir.path().join("report.json").exists());

    let spoofed_path = dir.path().join("spoofed.toml");
    std::fs::write(
        &spoofed_path,
        nominal_scenario_text().replace("mode = \"none\"", "mode = \"wrong-chips\""),
    )
    .unwrap();
    let spoofed = std::process::Command::new(bin)
        .args(["e2e", "--scenario"])
        .arg(&spoofed_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(spoofed.status.code(), Some(3), "{spoofed:?}");

    let broken = std::process::Command::new(bin)
        .args(["e2e", "--scenario", "/nonexistent.toml", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(broken.status.code(), Some(1), "{broken:?}");
}

#[test]
fn epoch_offset_extrapolation_keeps_authentication() {
    // E1 measurements taken 20 ms before the epoch, extrapolated by
    // range rate: the verdict must be unaffected.
    let text =
        nominal_scenario_text().replace("e1_epoch_offset_s = 0.0", "e1_epoch_offset_s = 0.02");
    let sc = Scenario::parse(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let full = cmd_e2e(&sc, dir.path()).unwrap();
    assert!(full.report.position_authenticated);
}

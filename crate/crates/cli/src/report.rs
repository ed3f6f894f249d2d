//! Report rendering: a human-readable table and a machine-readable
//! JSON document.

use serde::Serialize;

use crate::pipeline::FullReport;

#[derive(Debug, Serialize)]
pub struct JsonReport {
    pub slot_index: usize,
    pub slot_gst: u64,
    pub auth_gst: u64,
    pub confidence_k: f64,
    pub position_authenticated: bool,
    pub satellites: Vec<JsonSatellite>,
}

#[derive(Debug, Serialize)]
pub struct JsonSatellite {
    pub svid: u8,
    pub tau_e6_s: f64,
    pub tau_hat_e6_s: f64,
    pub residual_m: f64,
    pub gamma_auth_m: f64,
    pub sigma_auth_m: f64,
    pub peak_metric_db: f64,
    pub detected: bool,
    pub dtau_units: u8,
    pub xi: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn to_json(full: &FullReport) -> JsonReport {
    JsonReport {
        slot_index: full.slot_index,
        slot_gst: full.slot_gst,
        auth_gst: full.auth_gst,
        confidence_k: full.report.k,
        position_authenticated: full.report.position_authenticated,
        satellites: full
            .report
            .entries
            .iter()
            .zip(full.sigma_auth_m.iter().zip(&full.dtau_units))
            .map(|(e, (&sigma, &dtau))| JsonSatellite {
                svid: e.svid,
                tau_e6_s: e.tau_e6,
                tau_hat_e6_s: e.tau_hat_e6,
                residual_m: e.residual_m,
                gamma_auth_m: e.gamma_auth_m,
                sigma_auth_m: sigma,
                peak_metric_db: 10.0 * e.peak_metric.log10(),
                detected: e.detected,
                dtau_units: dtau,
                xi: e.xi,
                note: e.note.map(str::to_string),
            })
            .collect(),
    }
}

pub fn render_text(full: &FullReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "slot {} (GST {}), verified at GST {}, K = {}\n",
        full.slot_index, full.slot_gst, full.auth_gst, full.report.k
    ));
    out.push_str("svid  dtau  peak[dB]  det  residual[m]  gamma[m]  xi\n");
    for (e, &dtau) in full.report.entries.iter().zip(&full.dtau_units) {
        out.push_str(&format!(
            "{:>4}  {:>4}  {:>8.1}  {:>3}  {:>11.3}  {:>8.3}  {:>2}\n",
            e.svid,
            dtau,
            10.0 * e.peak_metric.log10(),
            if e.detected { "yes" } else { "no" },
            e.residual_m,
            e.gamma_auth_m,
            if e.xi { "1" } else { "0" },
        ));
    }
    out.push_str(&format!(
        "position authenticated: {}\n",
        if full.report.position_authenticated {
            "YES"
        } else {
            "NO"
        }
    ));
    out
}

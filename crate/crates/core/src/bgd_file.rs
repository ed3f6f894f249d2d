//! Text codec for broadcast group delay (`.bgd`) files.
//!
//! One record per line: `svid,bgd_e1_e6,sigma_bgd,validity_start,validity_end`
//! with delays in seconds (15 significant digits) and validity bounds as
//! integer GST seconds. `#` starts a comment.

use crate::recs_file::FormatError;
use crate::SVID_MAX;

/// Predicted satellite E1/E6 group delay and its accuracy over a
/// validity interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BgdRecord {
    pub svid: u8,
    /// Predicted group delay, seconds.
    pub bgd_e1_e6: f64,
    /// 1-sigma accuracy of the prediction, seconds.
    pub sigma_bgd: f64,
    pub validity_start_gst: u64,
    pub validity_end_gst: u64,
}

impl BgdRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.svid == 0 || self.svid > SVID_MAX {
            return Err(format!("svid {} out of 1..=36", self.svid));
        }
        if !self.sigma_bgd.is_finite() || self.sigma_bgd < 0.0 {
            return Err(format!("sigma_bgd {} must be >= 0", self.sigma_bgd));
        }
        if !self.bgd_e1_e6.is_finite() {
            return Err("bgd is not finite".to_string());
        }
        if self.validity_start_gst >= self.validity_end_gst {
            return Err(format!(
                "empty validity interval [{}, {})",
                self.validity_start_gst, self.validity_end_gst
            ));
        }
        Ok(())
    }

    pub fn valid_at(&self, gst: u64) -> bool {
        (self.validity_start_gst..self.validity_end_gst).contains(&gst)
    }
}

pub fn serialize_bgd(records: &[BgdRecord]) -> String {
    let mut out =
        String::from("# svid,bgd_e1_e6_s,sigma_bgd_s,validity_start_gst,validity_end_gst\n");
    for r in records {
        out.push_str(&format!(
            "{},{:.14e},{:.14e},{},{}\n",
            r.svid, r.bgd_e1_e6, r.sigma_bgd, r.validity_start_gst, r.validity_end_gst
        ));
    }
    out
}

pub fn parse_bgd(text: &str) -> Result<Vec<BgdRecord>, FormatError> {
    let mut records = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(FormatError::BgdParse {
                line: line_no,
                msg: format!("expected 5 comma-separated fields, got {}", fields.len()),
            });
        }
        let err = |msg: String| FormatError::BgdParse { line: line_no, msg };
        let record = BgdRecord {
            svid: fields[0].parse().map_err(|e| err(format!("svid: {e}")))?,
            bgd_e1_e6: fields[1].parse().map_err(|e| err(format!("bgd: {e}")))?,
            sigma_bgd: fields[2].parse().map_err(|e| err(format!("sigma: {e}")))?,
            validity_start_gst: fields[3]
                .parse()
                .map_err(|e| err(format!("validity start: {e}")))?,
            validity_end_gst: fields[4]
                .parse()
                .map_err(|e| err(format!("validity end: {e}")))?,
        };
        record.validate().map_err(err)?;
        records.push(record);
    }
    Ok(records)
}

//! Line-delimited JSON metrics: one record per training step, plus one record
//! per evaluation.
//!
//! Only values that are a pure function of the configuration and seed are
//! written, so two identical runs produce byte-identical files.

use std::io::Write;

use hccr_core::train::StepRecord;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsLine {
    pub step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ce_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recognition_rate: Option<f64>,
}

impl MetricsLine {
    pub fn step(r: &StepRecord) -> Self {
        Self {
            step: r.step,
            total_loss: Some(r.total_loss),
            ce_loss: Some(r.ce_loss),
            sim_loss: Some(r.sim_loss),
            recognition_rate: None,
        }
    }

    pub fn eval(step: usize, rate: f64) -> Self {
        Self { step, total_loss: None, ce_loss: None, sim_loss: None, recognition_rate: Some(rate) }
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, self)?;
        out.write_all(b"\n")
    }
}

pub fn parse_metrics(text: &str) -> serde_json::Result<Vec<MetricsLine>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

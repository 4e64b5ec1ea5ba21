//! Output schema: the per-sample throughput trace (CSV), the run summary
//! (JSON, embedding the fully-resolved config), and the closed-form
//! analysis rows (CSV).
//!
//! Formatting is deliberately rigid — fixed column order, floats printed
//! with six decimals — so that identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::LinkClass;
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

/// Stable column order of the throughput trace. Ground-truth columns are
/// suffixed `_truth`; everything else is what the system itself can see.
pub const TRACE_COLUMNS: [&str; 8] = [
    "t_s",
    "link_id",
    "throughput_mbps",
    "rate_mbps",
    "cca_dbm",
    "jammer_active_truth",
    "detector_jammed",
    "policy",
];

fn fmt_float(value: f64) -> String {
    format!("{value:.6}")
}

fn fmt_bool(value: bool) -> &'static str {
    if value {
        "1"
    } else {
        "0"
    }
}

/// One sampling-period observation of one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_s: f64,
    pub link_id: String,
    /// Goodput averaged over the sampling period.
    pub throughput_mbps: f64,
    /// Rate in force at the end of the period.
    pub rate_mbps: f64,
    /// Transmitter CCA threshold at the end of the period.
    pub cca_dbm: f64,
    /// Whether any jammer audible on this link was truly active at the
    /// sampling instant.
    pub jammer_active_truth: bool,
    /// Detector belief at the sampling instant.
    pub detector_jammed: bool,
    /// Active policy label: "fixed", "ladder" or "mrc".
    pub policy: String,
}

impl TraceSample {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt_float(self.t_s),
            self.link_id,
            fmt_float(self.throughput_mbps),
            fmt_float(self.rate_mbps),
            fmt_float(self.cca_dbm),
            fmt_bool(self.jammer_active_truth),
            fmt_bool(self.detector_jammed),
            self.policy,
        )
    }
}

/// Full per-run trace, sample-major (time ascending, links in config order
/// within one sampling instant).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThroughputTrace {
    pub samples: Vec<TraceSample>,
}

impl ThroughputTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.samples.len() * 64);
        out.push_str(&TRACE_COLUMNS.join(","));
        out.push('\n');
        for sample in &self.samples {
            out.push_str(&sample.csv_row());
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(Error::from)
    }

    /// Samples of one link, in time order.
    pub fn link_samples<'a>(&'a self, link_id: &'a str) -> impl Iterator<Item = &'a TraceSample> {
        self.samples.iter().filter(move |s| s.link_id == link_id)
    }
}

/// Closed-form model output for one fixed rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub rate_mbps: f64,
    pub t_fixed_mbps: f64,
    pub t_adapt_mbps: f64,
    pub pdr_threshold: f64,
    /// Whether the threshold is a real fixed/adaptive crossing.
    pub crossing: bool,
    pub class: LinkClass,
}

pub const ANALYSIS_COLUMNS: [&str; 6] = [
    "rate_mbps",
    "t_fixed_mbps",
    "t_adapt_mbps",
    "pdr_threshold",
    "crossing",
    "class",
];

fn class_label(class: LinkClass) -> &'static str {
    match class {
        LinkClass::Lossless => "lossless",
        LinkClass::Lossy => "lossy",
    }
}

pub fn analysis_to_csv(rows: &[AnalysisRow]) -> String {
    let mut out = String::new();
    out.push_str(&ANALYSIS_COLUMNS.join(","));
    out.push('\n');
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(row.rate_mbps),
            fmt_float(row.t_fixed_mbps),
            fmt_float(row.t_adapt_mbps),
            fmt_float(row.pdr_threshold),
            fmt_bool(row.crossing),
            class_label(row.class),
        );
    }
    out
}

/// Detector scoring against ground truth, per link.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectorScore {
    /// True jammer phase changes within the run.
    pub true_transitions: u64,
    /// Debounced detector transitions.
    pub detected_transitions: u64,
    /// Detector windows that flagged a jammer while none was active.
    pub false_positive_windows: u64,
    /// Seconds from each true change to the detector transition that
    /// confirmed it (only scored changes).
    pub mean_latency_s: Option<f64>,
    pub max_latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub link_id: String,
    pub mean_throughput_mbps: f64,
    /// Mean over samples taken while a jammer was truly active.
    pub mean_jammed_mbps: f64,
    /// Mean over samples taken while every jammer slept.
    pub mean_sleep_mbps: f64,
    pub final_rate_mbps: f64,
    pub final_cca_dbm: f64,
    pub detector: DetectorScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub route_id: String,
    /// End-to-end goodput under the shared-airtime chain model.
    pub mean_throughput_mbps: f64,
}

/// Distributed/centralized power-control outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    /// Gossip rounds until every node knew every link, if reached.
    pub rounds_to_converge: Option<u64>,
    pub converged: bool,
    /// Seconds from activation to convergence, if reached.
    pub convergence_s: Option<f64>,
    /// Final CCA per node, in `node_ids` order.
    pub final_cca_dbm: Vec<f64>,
}

/// One controller decision, timestamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerEvent {
    pub t_s: f64,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub duration_s: f64,
    pub links: Vec<LinkSummary>,
    pub routes: Vec<RouteSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerSummary>,
    pub controller_events: Vec<ControllerEvent>,
    /// Fully-resolved configuration; re-running it reproduces the trace.
    pub config: ScenarioConfig,
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(Error::from)
    }
}

//! Scenario configuration: the TOML schema the CLI and engine consume.
//!
//! A scenario either simulates (`[[links]]` present) or evaluates the
//! closed-form model over a rate grid (`[analysis]` present) — or both.
//! Unknown keys are rejected everywhere; validation failures enumerate the
//! offending fields with dotted paths so they can be reported
//! machine-readably.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::JammerMoments;
use crate::controller::{ControllerConfig, RateModuleKind};
use crate::detect::DetectorConfig;
use crate::error::{Error, Result, ValidationReport};
use crate::jammer::{
    JammerKind, JammerProfile, MobilityTrace, UniformRange, DEFAULT_JAM_PACKET_BYTES,
    DEFAULT_JAM_RATE_MBPS,
};
use crate::phy::{RadioConfig, RateTable, DEFAULT_TX_POWER_DBM};
use crate::power::{PowerControlConfig, PowerControlMode};
use crate::rate::DwellProfile;

pub const DEFAULT_SLOT_S: f64 = 0.001;
pub const DEFAULT_SAMPLE_PERIOD_S: f64 = 0.5;

fn default_slot() -> f64 {
    DEFAULT_SLOT_S
}

fn default_sample_period() -> f64 {
    DEFAULT_SAMPLE_PERIOD_S
}

fn default_pdr() -> f64 {
    1.0
}

fn default_rescan() -> u32 {
    30
}

/// Standing rate policy of a link (before the controller intervenes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PolicySpec {
    /// Pin one rate from the table.
    Fixed { rate_mbps: f64 },
    /// Dwell-timer ladder starting at the lowest rate.
    Ladder,
    /// Ladder with jam-cycle memory and periodic rescans.
    Mrc {
        #[serde(default = "default_rescan")]
        rescan_every: u32,
    },
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::Ladder
    }
}

/// The two legitimate legs of a link's RSSI picture; jammer legs come from
/// each jammer's per-link entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegitRssi {
    /// Transmitter as heard at the receiver.
    pub tr: f64,
    /// Receiver as heard at the transmitter.
    pub rt: f64,
}

/// Radio settings at both ends of a link.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioPair {
    pub tx: RadioConfig,
    pub rx: RadioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub id: String,
    /// Offered application load; `None` means saturated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_a_mbps: Option<f64>,
    #[serde(default)]
    pub policy: PolicySpec,
    /// Channel delivery ratio applied at every rate (unless overridden
    /// per rate below).
    #[serde(default = "default_pdr")]
    pub base_pdr: f64,
    /// Per-rate delivery ratios, keyed by nominal rate ("54" or "6.0").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_pdr_by_rate: Option<BTreeMap<String, f64>>,
    /// Force the jammed-phase goodput instead of letting it emerge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_override_mbps: Option<f64>,
    pub rssi: LegitRssi,
    #[serde(default)]
    pub radios: RadioPair,
    /// Endpoint names; required when power control builds a node graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_node: Option<String>,
}

impl LinkConfig {
    /// Delivery ratio for one rate, honouring the per-rate override map.
    pub fn pdr_at(&self, rate_mbps: f64) -> f64 {
        if let Some(map) = &self.base_pdr_by_rate {
            for (key, &value) in map {
                if let Ok(parsed) = key.parse::<f64>() {
                    if (parsed - rate_mbps).abs() < 1e-9 {
                        return value;
                    }
                }
            }
        }
        self.base_pdr
    }
}

/// Jammer legs of the RSSI picture for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamRssi {
    /// Jammer as heard at the link's transmitter.
    pub jt: f64,
    /// Jammer as heard at the link's receiver.
    pub jr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerConfig {
    /// Named profile: "balanced", "rare", "frequent", "balanced-validation".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<JammerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sleep: Option<UniformRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<UniformRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_bytes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_mbps: Option<f64>,
    /// Transmit power at which the `rssi` entries were observed. When set,
    /// every entry shifts by `tx_power_dbm − power_ref_dbm`, so power
    /// sweeps only need to touch `tx_power_dbm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_ref_dbm: Option<f64>,
    /// Per-link RSSI contributions, keyed by link id.
    pub rssi: BTreeMap<String, JamRssi>,
    /// Piecewise-linear RSSI offset over time (a moving jammer).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mobility: Option<MobilityTrace>,
}

impl JammerConfig {
    /// Materialise the full profile from preset and overrides.
    pub fn resolve(&self) -> Result<JammerProfile> {
        let zero = UniformRange::new(0.0, 0.0).expect("degenerate range");
        let mut profile = match (&self.preset, self.kind) {
            (Some(name), _) => JammerProfile::preset(name)?,
            (None, Some(kind)) => JammerProfile {
                kind,
                sleep: zero,
                active: zero,
                tx_power_dbm: DEFAULT_TX_POWER_DBM,
                packet_bytes: DEFAULT_JAM_PACKET_BYTES,
                rate_mbps: DEFAULT_JAM_RATE_MBPS,
            },
            (None, None) => {
                return Err(Error::InvalidInput(
                    "jammer needs either a preset or a kind".into(),
                ))
            }
        };
        if let Some(kind) = self.kind {
            profile.kind = kind;
        }
        if let Some(sleep) = self.sleep {
            profile.sleep = sleep;
        }
        if let Some(active) = self.active {
            profile.active = active;
        }
        if let Some(p) = self.tx_power_dbm {
            profile.tx_power_dbm = p;
        }
        if let Some(b) = self.packet_bytes {
            profile.packet_bytes = b;
        }
        if let Some(r) = self.rate_mbps {
            profile.rate_mbps = r;
        }
        Ok(profile)
    }

    /// dB shift applied to all of this jammer's RSSI entries.
    pub fn power_shift_db(&self, profile: &JammerProfile) -> f64 {
        match self.power_ref_dbm {
            Some(reference) => profile.tx_power_dbm - reference,
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    /// Saturated UDP: every link always has a packet ready.
    pub udp_saturated: bool,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            udp_saturated: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    #[default]
    Wlan,
    Mesh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteConfig {
    pub id: String,
    /// Link ids in hop order; links on one route share airtime equally.
    pub links: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub routes: Vec<RouteConfig>,
}

/// Calibration inputs for the analytic rate module: the rungs' dwell times
/// and (optionally) explicit jammer moments and jammed-phase goodput.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub dwell: DwellProfile,
    /// Defaults to the first cycling jammer's phase means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<JammerMoments>,
    #[serde(default)]
    pub f_mbps: f64,
    /// Defaults to the link's delivery ratio at its fixed rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pdr_f: Option<f64>,
}

/// Closed-form evaluation over a grid of fixed rates; emitted as its own
/// CSV next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Fixed rates to evaluate; defaults to every rate in the table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(default = "default_pdr")]
    pub pdr: f64,
    #[serde(default)]
    pub f_mbps: f64,
    pub dwell: DwellProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<JammerMoments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub slot_s: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub sample_period_s: f64,
    /// Rate table; defaults to the built-in 802.11a one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<RateTable>,
    pub links: Vec<LinkConfig>,
    pub jammers: Vec<JammerConfig>,
    pub traffic: TrafficConfig,
    pub topology: TopologyConfig,
    pub power: PowerControlConfig,
    pub detector: DetectorConfig,
    pub controller: ControllerConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            slot_s: default_slot(),
            duration_s: 0.0,
            seed: 0,
            sample_period_s: default_sample_period(),
            rates: None,
            links: Vec::new(),
            jammers: Vec::new(),
            traffic: TrafficConfig::default(),
            topology: TopologyConfig::default(),
            power: PowerControlConfig::default(),
            detector: DetectorConfig::default(),
            controller: ControllerConfig::default(),
            calibration: None,
            analysis: None,
        }
    }
}

fn is_multiple_of(value: f64, quantum: f64) -> bool {
    if quantum <= 0.0 || value <= 0.0 {
        return false;
    }
    let ratio = value / quantum;
    (ratio - ratio.round()).abs() < 1e-6
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parse and validate in one step.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg = Self::from_toml_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn rate_table(&self) -> RateTable {
        self.rates
            .clone()
            .unwrap_or_else(RateTable::default_80211a)
    }

    pub fn simulates(&self) -> bool {
        !self.links.is_empty()
    }

    /// Explicit moments, else the first cycling jammer's.
    pub fn moments_or_default(&self, explicit: Option<JammerMoments>) -> Result<JammerMoments> {
        if let Some(m) = explicit {
            return JammerMoments::new(m.e_sleep_s, m.e_active_s);
        }
        for jammer in &self.jammers {
            let profile = jammer.resolve()?;
            if profile.kind == JammerKind::Random {
                return JammerMoments::from_profile(&profile);
            }
        }
        Err(Error::InvalidInput(
            "no explicit jammer moments and no cycling jammer to take them from".into(),
        ))
    }

    /// Sorted distinct endpoint names; empty when links omit node names.
    pub fn node_ids(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for link in &self.links {
            if let Some(n) = &link.tx_node {
                set.insert(n.clone());
            }
            if let Some(n) = &link.rx_node {
                set.insert(n.clone());
            }
        }
        set.into_iter().collect()
    }

    fn validate_links(&self, table: &RateTable, report: &mut ValidationReport) {
        let mut seen = BTreeSet::new();
        for (i, link) in self.links.iter().enumerate() {
            let path = format!("links[{i}]");
            if link.id.is_empty() {
                report.push(format!("{path}.id"), "link id cannot be empty");
            } else if !link
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                // Ids land verbatim in CSV rows; keep them plain tokens.
                report.push(
                    format!("{path}.id"),
                    "link id may only use letters, digits, '_' and '-'",
                );
            }
            if !seen.insert(link.id.clone()) {
                report.push(format!("{path}.id"), format!("duplicate link id '{}'", link.id));
            }
            if !(0.0..=1.0).contains(&link.base_pdr) {
                report.push(format!("{path}.base_pdr"), "delivery ratio must lie in [0, 1]");
            }
            if let Some(map) = &link.base_pdr_by_rate {
                for (key, &value) in map {
                    let field = format!("{path}.base_pdr_by_rate.{key}");
                    match key.parse::<f64>() {
                        Ok(rate) if table.index_of(rate).is_ok() => {}
                        Ok(rate) => {
                            report.push(field.clone(), format!("rate {rate} is not in the table"))
                        }
                        Err(_) => report.push(field.clone(), "key must be a rate in Mbit/s"),
                    }
                    if !(0.0..=1.0).contains(&value) {
                        report.push(field, "delivery ratio must lie in [0, 1]");
                    }
                }
            }
            if let Some(r_a) = link.r_a_mbps {
                if !(r_a >= 0.0) {
                    report.push(format!("{path}.r_a_mbps"), "offered load must be non-negative");
                }
            }
            if let Some(f) = link.f_override_mbps {
                if !(f >= 0.0) {
                    report.push(
                        format!("{path}.f_override_mbps"),
                        "jammed-phase goodput must be non-negative",
                    );
                }
            }
            match link.policy {
                PolicySpec::Fixed { rate_mbps } => {
                    if table.index_of(rate_mbps).is_err() {
                        report.push(
                            format!("{path}.policy.rate_mbps"),
                            format!("rate {rate_mbps} is not in the table"),
                        );
                    }
                }
                PolicySpec::Mrc { rescan_every } => {
                    if rescan_every == 0 {
                        report.push(
                            format!("{path}.policy.rescan_every"),
                            "rescan interval must be at least 1",
                        );
                    }
                }
                PolicySpec::Ladder => {}
            }
            if !self.traffic.udp_saturated && link.r_a_mbps.is_none() {
                report.push(
                    format!("{path}.r_a_mbps"),
                    "unsaturated traffic needs an offered load",
                );
            }
            if self.power.mode != PowerControlMode::Off
                && (link.tx_node.is_none() || link.rx_node.is_none())
            {
                report.push(
                    format!("{path}.tx_node"),
                    "power control needs tx_node and rx_node on every link",
                );
            }
        }
    }

    fn validate_jammers(&self, report: &mut ValidationReport) {
        let link_ids: BTreeSet<&str> = self.links.iter().map(|l| l.id.as_str()).collect();
        for (i, jammer) in self.jammers.iter().enumerate() {
            let path = format!("jammers[{i}]");
            match jammer.resolve() {
                Ok(profile) => {
                    profile.validate(&path, report);
                    if profile.kind == JammerKind::Random
                        && jammer.preset.is_none()
                        && (jammer.sleep.is_none() || jammer.active.is_none())
                    {
                        report.push(
                            format!("{path}.sleep"),
                            "a cycling jammer without a preset needs sleep and active ranges",
                        );
                    }
                }
                Err(e) => report.push(path.clone(), e.to_string()),
            }
            if jammer.rssi.is_empty() {
                report.push(
                    format!("{path}.rssi"),
                    "jammer must reference at least one link",
                );
            }
            for key in jammer.rssi.keys() {
                if !link_ids.contains(key.as_str()) {
                    report.push(
                        format!("{path}.rssi.{key}"),
                        format!("unknown link id '{key}'"),
                    );
                }
            }
        }
    }

    fn validate_topology(&self, report: &mut ValidationReport) {
        let link_ids: BTreeSet<&str> = self.links.iter().map(|l| l.id.as_str()).collect();
        let mut route_ids = BTreeSet::new();
        let mut claimed_links = BTreeSet::new();
        for (i, route) in self.topology.routes.iter().enumerate() {
            let path = format!("topology.routes[{i}]");
            if !route_ids.insert(route.id.clone()) {
                report.push(
                    format!("{path}.id"),
                    format!("duplicate route id '{}'", route.id),
                );
            }
            if route.links.is_empty() {
                report.push(format!("{path}.links"), "route needs at least one link");
            }
            for link in &route.links {
                if !link_ids.contains(link.as_str()) {
                    report.push(
                        format!("{path}.links"),
                        format!("unknown link id '{link}'"),
                    );
                }
                if !claimed_links.insert(link.clone()) {
                    // Airtime shares are per route; overlapping routes
                    // would make them ambiguous.
                    report.push(
                        format!("{path}.links"),
                        format!("link '{link}' already belongs to another route"),
                    );
                }
            }
        }
    }

    fn validate_grid(&self, report: &mut ValidationReport) {
        if !(self.slot_s > 0.0) {
            report.push("slot_s", "slot must be positive");
            return;
        }
        if self.simulates() {
            if !(self.duration_s > 0.0) {
                report.push("duration_s", "simulation needs a positive duration");
            } else if !is_multiple_of(self.duration_s, self.slot_s) {
                report.push("duration_s", "duration must be a whole number of slots");
            }
            if !is_multiple_of(self.sample_period_s, self.slot_s) {
                report.push(
                    "sample_period_s",
                    "sampling period must be a whole number of slots",
                );
            }
            if !is_multiple_of(self.detector.window_s, self.slot_s) {
                report.push(
                    "detector.window_s",
                    "detector window must be a whole number of slots",
                );
            }
            if self.power.mode == PowerControlMode::Distributed
                && !is_multiple_of(self.power.beacon_period_s, self.slot_s)
            {
                report.push(
                    "power.beacon_period_s",
                    "beacon period must be a whole number of slots",
                );
            }
        }
    }

    pub fn validation_report(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let table = self.rate_table();

        if !self.simulates() && self.analysis.is_none() {
            report.push(
                "links",
                "scenario needs [[links]] to simulate or an [analysis] block",
            );
        }
        self.validate_grid(&mut report);
        self.validate_links(&table, &mut report);
        self.validate_jammers(&mut report);
        self.validate_topology(&mut report);
        self.detector.validate("detector", &mut report);
        self.power.validate("power", &mut report);
        self.controller.validate("controller", &mut report);

        if self.controller.enabled
            && self.controller.rate_module == RateModuleKind::Analytic
            && self.simulates()
            && self.calibration.is_none()
        {
            report.push(
                "controller.rate_module",
                "the analytic rate module needs a [calibration] block",
            );
        }
        if let Some(cal) = &self.calibration {
            if let Some(pdr) = cal.pdr_f {
                if !(0.0..=1.0).contains(&pdr) {
                    report.push("calibration.pdr_f", "delivery ratio must lie in [0, 1]");
                }
            }
            if !(cal.f_mbps >= 0.0) {
                report.push("calibration.f_mbps", "goodput must be non-negative");
            }
            if let Err(e) = self.moments_or_default(cal.moments) {
                report.push("calibration.moments", e.to_string());
            }
        }
        if let Some(analysis) = &self.analysis {
            if !(0.0..=1.0).contains(&analysis.pdr) {
                report.push("analysis.pdr", "delivery ratio must lie in [0, 1]");
            }
            if !(analysis.f_mbps >= 0.0) {
                report.push("analysis.f_mbps", "goodput must be non-negative");
            }
            if let Some(rates) = &analysis.rates {
                for &rate in rates {
                    if table.index_of(rate).is_err() {
                        report.push(
                            "analysis.rates",
                            format!("rate {rate} is not in the table"),
                        );
                    }
                }
            }
            if let Err(e) = self.moments_or_default(analysis.moments) {
                report.push("analysis.moments", e.to_string());
            }
        }
        report
    }

    pub fn validate(&self) -> Result<()> {
        self.validation_report().into_result()
    }
}

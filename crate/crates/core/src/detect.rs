//! Jamming detection from windowed delivery and ambient-signal statistics.
//!
//! A window reads as jammed only when *both* hold: the delivery ratio is
//! extremely low **and** the ambient RSSI sits well above the factory CCA
//! threshold. Either symptom alone is explained by benign causes (a weak or
//! fading link, or a loud neighbor that does not actually break delivery);
//! the conjunction separates jamming from ordinary loss. Verdict changes are
//! debounced: `confirm_count` consecutive contradicting windows are required
//! before the state flips, so one odd window never toggles the detector.
//!
//! Detection latency is therefore bounded by `confirm_count × window_s`,
//! measured from the first window boundary at or after the true change.

use serde::{Deserialize, Serialize};

use crate::error::ValidationReport;
use crate::phy::DEFAULT_CCA_DBM;

/// Detector tuning. Defaults: 500 ms windows, delivery ≤ 0.1, ambient RSSI
/// ≥ factory CCA + 20 dB, two confirming windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub window_s: f64,
    /// Delivery ratio at or below this reads as "starved".
    pub pdr_low: f64,
    /// Ambient RSSI must exceed the factory CCA by this margin.
    pub rssi_margin_db: f64,
    /// Factory CCA threshold the margin is measured against.
    pub default_cca_dbm: f64,
    /// Consecutive contradicting windows required to flip the verdict.
    pub confirm_count: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_s: 0.5,
            pdr_low: 0.1,
            rssi_margin_db: 20.0,
            default_cca_dbm: DEFAULT_CCA_DBM,
            confirm_count: 2,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self, path: &str, report: &mut ValidationReport) {
        if !(self.window_s > 0.0) {
            report.push(format!("{path}.window_s"), "window must be positive");
        }
        if !(0.0..=1.0).contains(&self.pdr_low) {
            report.push(format!("{path}.pdr_low"), "must be within [0, 1]");
        }
        if self.confirm_count == 0 {
            report.push(format!("{path}.confirm_count"), "must be at least 1");
        }
    }
}

/// Detector verdict change, as seen from the jammer's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamTransition {
    /// The link just became jammed.
    SleepToActive,
    /// The jammer just went quiet.
    ActiveToSleep,
}

/// Debounced per-link detector state.
#[derive(Debug, Clone, Copy, Default)]
pub struct DetectorState {
    jammed: bool,
    /// Consecutive windows contradicting the current verdict.
    streak: u32,
    windows_processed: u64,
}

impl DetectorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn jammed(&self) -> bool {
        self.jammed
    }

    pub fn windows_processed(&self) -> u64 {
        self.windows_processed
    }

    /// Feeds one completed window; returns a transition when the debounced
    /// verdict flips at this window boundary.
    pub fn update(
        &mut self,
        window_pdr: f64,
        window_rssi_dbm: f64,
        cfg: &DetectorConfig,
    ) -> Option<JamTransition> {
        self.windows_processed += 1;
        let raw_jammed = window_pdr <= cfg.pdr_low
            && window_rssi_dbm >= cfg.default_cca_dbm + cfg.rssi_margin_db;
        if raw_jammed == self.jammed {
            self.streak = 0;
            return None;
        }
        self.streak += 1;
        if self.streak < cfg.confirm_count {
            return None;
        }
        self.streak = 0;
        self.jammed = raw_jammed;
        Some(if raw_jammed {
            JamTransition::SleepToActive
        } else {
            JamTransition::ActiveToSleep
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JAMMED: (f64, f64) = (0.0, -50.0); // starved and loud
    const CLEAN: (f64, f64) = (1.0, -95.0);

    #[test]
    fn flips_after_confirm_count_windows() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        assert_eq!(d.update(JAMMED.0, JAMMED.1, &cfg), None);
        assert_eq!(
            d.update(JAMMED.0, JAMMED.1, &cfg),
            Some(JamTransition::SleepToActive)
        );
        assert!(d.jammed());
        // Steady state: no further events.
        assert_eq!(d.update(JAMMED.0, JAMMED.1, &cfg), None);
        // Recovery needs the same confirmation.
        assert_eq!(d.update(CLEAN.0, CLEAN.1, &cfg), None);
        assert_eq!(
            d.update(CLEAN.0, CLEAN.1, &cfg),
            Some(JamTransition::ActiveToSleep)
        );
        assert!(!d.jammed());
    }

    #[test]
    fn starvation_alone_is_not_jamming() {
        // A terrible but quiet link: low delivery, ambient at the noise floor.
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        for _ in 0..100 {
            assert_eq!(d.update(0.05, -95.0, &cfg), None);
        }
        assert!(!d.jammed());
    }

    #[test]
    fn loudness_alone_is_not_jamming() {
        // Delivery fine despite a strong ambient signal (tuned-CCA regime).
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        for _ in 0..100 {
            assert_eq!(d.update(0.97, -45.0, &cfg), None);
        }
        assert!(!d.jammed());
    }

    #[test]
    fn flapping_windows_never_flip_the_verdict() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new();
        for _ in 0..50 {
            assert_eq!(d.update(JAMMED.0, JAMMED.1, &cfg), None);
            assert_eq!(d.update(CLEAN.0, CLEAN.1, &cfg), None);
        }
        assert!(!d.jammed());
    }

    #[test]
    fn confirm_count_one_flips_immediately() {
        let cfg = DetectorConfig {
            confirm_count: 1,
            ..DetectorConfig::default()
        };
        let mut d = DetectorState::new();
        assert_eq!(
            d.update(JAMMED.0, JAMMED.1, &cfg),
            Some(JamTransition::SleepToActive)
        );
        assert_eq!(
            d.update(CLEAN.0, CLEAN.1, &cfg),
            Some(JamTransition::ActiveToSleep)
        );
    }

    #[test]
    fn boundary_values_use_inclusive_comparisons() {
        let cfg = DetectorConfig {
            confirm_count: 1,
            ..DetectorConfig::default()
        };
        let mut d = DetectorState::new();
        // Exactly pdr_low and exactly cca + margin both count.
        assert_eq!(
            d.update(cfg.pdr_low, cfg.default_cca_dbm + cfg.rssi_margin_db, &cfg),
            Some(JamTransition::SleepToActive)
        );
    }
}

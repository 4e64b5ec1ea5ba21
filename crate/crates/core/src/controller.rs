//! Reactive mitigation controller.
//!
//! The controller stays completely passive on benign links — a lossy channel
//! alone never triggers it. When the detector confirms a jammer it applies
//! the cheapest remedy first: carrier-sense (CCA) tuning, which keeps full
//! rate if the jammer is weak enough. After a short settling period it
//! measures the residual throughput deficit against the link's jam-free
//! baseline and, if the deficit persists, escalates by activating the rate
//! module. When the detector confirms the jammer has left, a hold-down
//! period guards against flapping before defaults are restored.
//!
//! The controller emits *actions*; the simulation engine owns the actual
//! CCA assignment and rate-policy plumbing.

use serde::{Deserialize, Serialize};

use crate::detect::JamTransition;
use crate::error::ValidationReport;

/// Which rate module the controller activates when CCA tuning alone leaves
/// a throughput deficit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RateModuleKind {
    /// Never touch the rate policy.
    Off,
    /// Memory/rescan ladder adaptation.
    Mrc {
        /// Rescan every `rescan_every` jam cycles; 1 = plain ladder.
        rescan_every: u32,
    },
    /// Model-driven advice (fixed vs adaptive by predicted throughput).
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub enabled: bool,
    /// Whether the hardware exposes a tunable CCA threshold.
    pub cca_tunable: bool,
    /// Whether nodes cooperate on a network-wide assignment; CCA tuning
    /// needs it, so `false` routes straight to the rate module.
    pub cooperation: bool,
    pub rate_module: RateModuleKind,
    /// Residual deficit that triggers escalation: windowed throughput below
    /// `(1 - tolerance) ×` the jam-free baseline.
    pub deficit_tolerance: f64,
    /// Detector windows to wait after CCA tuning before judging the deficit.
    pub settle_windows: u32,
    /// Consecutive benign detector windows before defaults are restored.
    pub hold_down_windows: u32,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            enabled: true,
            cca_tunable: true,
            cooperation: true,
            rate_module: RateModuleKind::Mrc { rescan_every: 30 },
            deficit_tolerance: 0.1,
            settle_windows: 2,
            hold_down_windows: 10,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self, path: &str, report: &mut ValidationReport) {
        if !(0.0..=1.0).contains(&self.deficit_tolerance) {
            report.push(
                format!("{path}.deficit_tolerance"),
                "tolerance must lie in [0, 1]",
            );
        }
        if let RateModuleKind::Mrc { rescan_every } = self.rate_module {
            if rescan_every == 0 {
                report.push(
                    format!("{path}.rate_module.rescan_every"),
                    "rescan interval must be at least 1",
                );
            }
        }
    }
}

/// What the controller wants the engine to do, in emission order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerAction {
    /// Run power control and apply the resulting CCA/power assignment.
    ApplyCca,
    /// Switch the link to the configured rate module.
    ActivateRateModule,
    /// Jammer gone: restore default CCA/power and the standing rate policy.
    RestoreDefaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Benign,
    Jammed,
    HoldDown,
}

/// One detector window's worth of evidence for the controller.
#[derive(Debug, Clone, Copy)]
pub struct WindowObservation {
    /// Debounced detector transition confirmed in this window, if any.
    pub transition: Option<JamTransition>,
    /// Detector's current belief after this window.
    pub jammed: bool,
    /// True when no link heard ambient energy at or above the detector's
    /// evidence bar this window. Mitigations can mask the delivery-ratio
    /// symptom, so the hold-down trusts the air, not the belief, before
    /// rolling anything back.
    pub air_quiet: bool,
    /// Throughput measured over this window.
    pub throughput_mbps: f64,
    /// Jam-free throughput baseline for the same link.
    pub baseline_mbps: f64,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    phase: Phase,
    cca_applied: bool,
    rate_active: bool,
    windows_since_cca: u32,
    benign_streak: u32,
}

impl Default for ControllerState {
    fn default() -> Self {
        ControllerState {
            phase: Phase::Benign,
            cca_applied: false,
            rate_active: false,
            windows_since_cca: 0,
            benign_streak: 0,
        }
    }
}

impl ControllerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mitigating(&self) -> bool {
        self.cca_applied || self.rate_active
    }

    pub fn rate_module_active(&self) -> bool {
        self.rate_active
    }

    fn deficit_persists(&self, cfg: &ControllerConfig, obs: &WindowObservation) -> bool {
        obs.throughput_mbps < (1.0 - cfg.deficit_tolerance) * obs.baseline_mbps
    }

    fn enter_jammed(&mut self, cfg: &ControllerConfig, actions: &mut Vec<ControllerAction>) {
        self.phase = Phase::Jammed;
        self.benign_streak = 0;
        if cfg.cca_tunable && cfg.cooperation && !self.cca_applied {
            self.cca_applied = true;
            self.windows_since_cca = 0;
            actions.push(ControllerAction::ApplyCca);
        } else if !self.cca_applied {
            // No CCA knob (or no cooperation): go straight to the rate module.
            self.activate_rate(cfg, actions);
        }
    }

    fn activate_rate(&mut self, cfg: &ControllerConfig, actions: &mut Vec<ControllerAction>) {
        if self.rate_active || cfg.rate_module == RateModuleKind::Off {
            return;
        }
        self.rate_active = true;
        actions.push(ControllerAction::ActivateRateModule);
    }

    /// Advance by one detector window.
    pub fn step(&mut self, cfg: &ControllerConfig, obs: &WindowObservation) -> Vec<ControllerAction> {
        let mut actions = Vec::new();
        if !cfg.enabled {
            return actions;
        }
        match obs.transition {
            Some(JamTransition::SleepToActive) => self.enter_jammed(cfg, &mut actions),
            Some(JamTransition::ActiveToSleep) => {
                if self.mitigating() {
                    self.phase = Phase::HoldDown;
                    self.benign_streak = 0;
                } else {
                    self.phase = Phase::Benign;
                }
            }
            None => {}
        }
        // The window whose transition confirmed the jammer does not count
        // toward settling: the threshold change only takes effect from the
        // next window onward.
        let entering = matches!(obs.transition, Some(JamTransition::SleepToActive));
        match self.phase {
            Phase::Benign => {}
            Phase::Jammed => {
                if self.cca_applied && !self.rate_active && !entering {
                    self.windows_since_cca = self.windows_since_cca.saturating_add(1);
                    if self.windows_since_cca > cfg.settle_windows && self.deficit_persists(cfg, obs)
                    {
                        self.activate_rate(cfg, &mut actions);
                    }
                }
            }
            Phase::HoldDown => {
                if obs.jammed {
                    // Detector re-confirmed the jammer before the hold-down
                    // elapsed: keep mitigations in place.
                    self.phase = Phase::Jammed;
                    self.benign_streak = 0;
                } else if !obs.air_quiet {
                    // Delivery recovered but the air is still hot: the
                    // mitigation is working, not the jammer gone. Restoring
                    // defaults now would hand the link straight back to the
                    // jammer, so the quiet streak starts over.
                    self.benign_streak = 0;
                } else {
                    self.benign_streak += 1;
                    if self.benign_streak >= cfg.hold_down_windows {
                        self.phase = Phase::Benign;
                        self.cca_applied = false;
                        self.rate_active = false;
                        self.benign_streak = 0;
                        actions.push(ControllerAction::RestoreDefaults);
                    }
                }
            }
        }
        actions
    }
}

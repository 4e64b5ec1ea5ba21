//! Jammer behaviors: constant, deceptive, random, and reactive.
//!
//! * **constant** — continuous unstructured energy; never silent.
//! * **deceptive** — back-to-back valid-looking packets with only the
//!   mandatory inter-frame gap between them; never sleeps.
//! * **random** — alternates sleep and active phases with uniformly
//!   distributed durations; while active it behaves like the deceptive
//!   jammer.
//! * **reactive** — silent until it senses a legitimate transmission, then
//!   fires at it; modeled per-packet by a hit probability.
//!
//! Jammers ignore carrier sense entirely (their CCA is pinned to 0 dBm), so
//! they never defer to legitimate traffic. The phase machine reports the
//! fraction of each time step spent active so renewal averages stay exact
//! even when a phase boundary falls inside a step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 802.11a DIFS: the idle gap a compliant sender must observe.
pub const DIFS_80211A_S: f64 = 34e-6;
/// Minimum contention backoff added to the gap (zero slots for the model).
pub const MIN_BACKOFF_S: f64 = 0.0;
/// Jammers carrier-sense nothing: CCA pinned at 0 dBm.
pub const JAMMER_CCA_DBM: f64 = 0.0;

/// Jam-packet defaults used by the named presets.
pub const DEFAULT_JAM_PACKET_BYTES: u32 = 1500;
pub const DEFAULT_JAM_RATE_MBPS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JammerKind {
    Constant,
    Deceptive,
    Random,
    Reactive,
}

/// Closed uniform range of durations in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct UniformRange {
    pub lo: f64,
    pub hi: f64,
}

impl UniformRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0) || !(hi >= lo) {
            return Err(Error::Parse(format!(
                "invalid duration range [{lo}, {hi}]: need 0 <= lo <= hi"
            )));
        }
        Ok(UniformRange { lo, hi })
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.hi > self.lo {
            self.lo + rng.gen::<f64>() * (self.hi - self.lo)
        } else {
            self.lo
        }
    }
}

impl TryFrom<[f64; 2]> for UniformRange {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        UniformRange::new(v[0], v[1])
    }
}

impl From<UniformRange> for [f64; 2] {
    fn from(r: UniformRange) -> Self {
        [r.lo, r.hi]
    }
}

/// Static description of one jammer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerProfile {
    pub kind: JammerKind,
    /// Sleep-phase duration range (random kind only).
    pub sleep: UniformRange,
    /// Active-phase duration range (random kind only).
    pub active: UniformRange,
    pub tx_power_dbm: f64,
    /// Size of each jam packet (drives the packetized gap model).
    pub packet_bytes: u32,
    /// Rate the jam packets are sent at (drives their airtime).
    pub rate_mbps: f64,
}

impl JammerProfile {
    fn cycling(sleep: UniformRange, active: UniformRange) -> Self {
        JammerProfile {
            kind: JammerKind::Random,
            sleep,
            active,
            tx_power_dbm: crate::phy::DEFAULT_TX_POWER_DBM,
            packet_bytes: DEFAULT_JAM_PACKET_BYTES,
            rate_mbps: DEFAULT_JAM_RATE_MBPS,
        }
    }

    /// Sleep U[1,8] / active U[1,5]: comparable time in both modes.
    pub fn balanced() -> Self {
        Self::cycling(
            UniformRange::new(1.0, 8.0).unwrap(),
            UniformRange::new(1.0, 5.0).unwrap(),
        )
    }

    /// Sleep U[1,5] / active U[1,2]: mostly dormant.
    pub fn rare() -> Self {
        Self::cycling(
            UniformRange::new(1.0, 5.0).unwrap(),
            UniformRange::new(1.0, 2.0).unwrap(),
        )
    }

    /// Sleep U[1,2] / active U[1,15]: mostly jamming.
    pub fn frequent() -> Self {
        Self::cycling(
            UniformRange::new(1.0, 2.0).unwrap(),
            UniformRange::new(1.0, 15.0).unwrap(),
        )
    }

    /// Sleep U[0,4] / active U[1,6]: the distribution the analytical
    /// threshold table was validated under.
    pub fn balanced_validation() -> Self {
        Self::cycling(
            UniformRange::new(0.0, 4.0).unwrap(),
            UniformRange::new(1.0, 6.0).unwrap(),
        )
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "balanced" => Ok(Self::balanced()),
            "rare" => Ok(Self::rare()),
            "frequent" => Ok(Self::frequent()),
            "balanced-validation" => Ok(Self::balanced_validation()),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// Mean sleep duration; zero for kinds that never sleep.
    pub fn mean_sleep_s(&self) -> f64 {
        match self.kind {
            JammerKind::Random => self.sleep.mean(),
            _ => 0.0,
        }
    }

    /// Mean active duration; for non-cycling kinds this is undefined and
    /// reported as zero.
    pub fn mean_active_s(&self) -> f64 {
        match self.kind {
            JammerKind::Random => self.active.mean(),
            _ => 0.0,
        }
    }

    /// Long-run fraction of time spent active.
    pub fn duty_cycle(&self) -> f64 {
        match self.kind {
            JammerKind::Constant | JammerKind::Deceptive => 1.0,
            JammerKind::Reactive => 0.0,
            JammerKind::Random => {
                let c = self.sleep.mean() + self.active.mean();
                if c > 0.0 {
                    self.active.mean() / c
                } else {
                    1.0
                }
            }
        }
    }

    /// Airtime of one jam packet.
    pub fn packet_airtime_s(&self) -> f64 {
        self.packet_bytes as f64 * 8.0 / (self.rate_mbps * 1e6)
    }

    /// Structural checks; `path` prefixes any reported field.
    pub fn validate(&self, path: &str, report: &mut crate::error::ValidationReport) {
        if self.kind == JammerKind::Random && self.active.lo <= 0.0 {
            report.push(
                format!("{path}.active"),
                "random jammers need a strictly positive minimum active duration",
            );
        }
        if !(self.rate_mbps > 0.0) {
            report.push(format!("{path}.rate_mbps"), "jam rate must be positive");
        }
        if self.packet_bytes == 0 {
            report.push(format!("{path}.packet_bytes"), "jam packets cannot be empty");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sleeping,
    Active,
}

/// Mutable phase-machine state of one jammer.
#[derive(Debug, Clone, Copy)]
pub struct JammerState {
    pub phase: Phase,
    /// Time left in the current phase.
    pub remaining_s: f64,
    /// Completed sleep+active cycles.
    pub cycles_completed: u64,
}

impl JammerState {
    /// Initial state: cycling jammers begin asleep with a drawn duration,
    /// always-on kinds begin active, reactive stays structurally silent.
    pub fn init(profile: &JammerProfile, rng: &mut impl Rng) -> Self {
        match profile.kind {
            JammerKind::Constant | JammerKind::Deceptive => JammerState {
                phase: Phase::Active,
                remaining_s: f64::INFINITY,
                cycles_completed: 0,
            },
            JammerKind::Reactive => JammerState {
                phase: Phase::Sleeping,
                remaining_s: f64::INFINITY,
                cycles_completed: 0,
            },
            JammerKind::Random => JammerState {
                phase: Phase::Sleeping,
                remaining_s: profile.sleep.sample(rng),
                cycles_completed: 0,
            },
        }
    }
}

/// What happened to a jammer during one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    /// Fraction of the step the jammer was emitting (0..=1).
    pub active_fraction: f64,
    /// An active→sleep boundary fell inside this step.
    pub entered_sleep: bool,
    /// A sleep→active boundary fell inside this step.
    pub entered_active: bool,
}

/// Advances the phase machine by `dt_s`, consuming phase boundaries as they
/// occur. Multiple boundaries inside one step are handled (short phases are
/// legal); the active fraction integrates exactly across them.
pub fn advance(
    state: &mut JammerState,
    profile: &JammerProfile,
    dt_s: f64,
    rng: &mut impl Rng,
) -> Advance {
    match profile.kind {
        JammerKind::Constant | JammerKind::Deceptive => Advance {
            active_fraction: 1.0,
            entered_sleep: false,
            entered_active: false,
        },
        JammerKind::Reactive => Advance {
            active_fraction: 0.0,
            entered_sleep: false,
            entered_active: false,
        },
        JammerKind::Random => {
            let mut left = dt_s;
            let mut active_time = 0.0;
            let mut entered_sleep = false;
            let mut entered_active = false;
            while left > 0.0 {
                if state.remaining_s > left {
                    if state.phase == Phase::Active {
                        active_time += left;
                    }
                    state.remaining_s -= left;
                    break;
                }
                if state.phase == Phase::Active {
                    active_time += state.remaining_s;
                }
                left -= state.remaining_s;
                match state.phase {
                    Phase::Sleeping => {
                        state.phase = Phase::Active;
                        state.remaining_s = profile.active.sample(rng);
                        entered_active = true;
                    }
                    Phase::Active => {
                        state.phase = Phase::Sleeping;
                        state.remaining_s = profile.sleep.sample(rng);
                        state.cycles_completed += 1;
                        entered_sleep = true;
                    }
                }
            }
            Advance {
                active_fraction: (active_time / dt_s).clamp(0.0, 1.0),
                entered_sleep,
                entered_active,
            }
        }
    }
}

/// What a jammer puts on the air while active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    /// Unbroken energy: no gaps for anyone else.
    Continuous,
    /// Back-to-back packets separated by the mandatory idle gap.
    Packetized { gap_s: f64, packet_airtime_s: f64 },
    /// Nothing until stimulated (reactive with no traffic).
    Silent,
}

impl Emission {
    /// Probability that a deferring legitimate sender wins the medium during
    /// one contention opportunity.
    pub fn sender_win_probability(&self) -> f64 {
        match *self {
            Emission::Continuous => 0.0,
            Emission::Packetized {
                gap_s,
                packet_airtime_s,
            } => gap_s / (gap_s + packet_airtime_s),
            Emission::Silent => 1.0,
        }
    }
}

/// Emission pattern of a profile while in its active phase.
pub fn emission_pattern(profile: &JammerProfile) -> Emission {
    match profile.kind {
        JammerKind::Constant => Emission::Continuous,
        JammerKind::Deceptive | JammerKind::Random => Emission::Packetized {
            gap_s: DIFS_80211A_S + MIN_BACKOFF_S,
            packet_airtime_s: profile.packet_airtime_s(),
        },
        JammerKind::Reactive => Emission::Silent,
    }
}

/// Probability that a reactive jammer corrupts one packet: the sensing delay
/// bound is one DIFS, so only the flight-time fraction of it is vulnerable.
/// Clamped to [0, 1]; long or slow packets are always caught.
pub fn reactive_jam_probability(packet_bytes: u32, rate_mbps: f64, difs_s: f64) -> f64 {
    let flight_s = packet_bytes as f64 * 8.0 / (rate_mbps * 1e6);
    (flight_s / difs_s).clamp(0.0, 1.0)
}

/// One Bernoulli draw against [`reactive_jam_probability`].
pub fn reactive_jam_success(
    packet_bytes: u32,
    rate_mbps: f64,
    difs_s: f64,
    rng: &mut impl Rng,
) -> bool {
    rng.gen::<f64>() < reactive_jam_probability(packet_bytes, rate_mbps, difs_s)
}

/// Piecewise-linear RSSI offset versus time, for jammers that move.
///
/// Breakpoints must have strictly increasing timestamps; the offset is held
/// constant before the first and after the last breakpoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<MobilityPoint>", into = "Vec<MobilityPoint>")]
pub struct MobilityTrace {
    points: Vec<MobilityPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityPoint {
    pub t_s: f64,
    pub offset_db: f64,
}

impl TryFrom<Vec<MobilityPoint>> for MobilityTrace {
    type Error = Error;
    fn try_from(points: Vec<MobilityPoint>) -> Result<Self> {
        MobilityTrace::new(points)
    }
}

impl From<MobilityTrace> for Vec<MobilityPoint> {
    fn from(t: MobilityTrace) -> Self {
        t.points
    }
}

impl MobilityTrace {
    pub fn new(points: Vec<MobilityPoint>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].t_s <= w[0].t_s {
                return Err(Error::Parse(
                    "mobility breakpoints must have strictly increasing timestamps".into(),
                ));
            }
        }
        Ok(MobilityTrace { points })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// RSSI offset at time `t_s` (0 dB when the trace is empty).
    pub fn offset_at(&self, t_s: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return 0.0;
        }
        if t_s <= pts[0].t_s {
            return pts[0].offset_db;
        }
        if t_s >= pts[pts.len() - 1].t_s {
            return pts[pts.len() - 1].offset_db;
        }
        let i = pts.partition_point(|p| p.t_s <= t_s);
        let (a, b) = (&pts[i - 1], &pts[i]);
        let w = (t_s - a.t_s) / (b.t_s - a.t_s);
        a.offset_db + w * (b.offset_db - a.offset_db)
    }
}

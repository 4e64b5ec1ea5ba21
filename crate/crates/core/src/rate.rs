//! Rate control: a stepwise probing ladder and a jam-aware memory variant.
//!
//! The **ladder** starts at the table floor, dwells `y(rate)` seconds at each
//! rung under sustained good feedback before stepping up one rung, and steps
//! down one rung immediately on bad feedback (resetting the dwell timer).
//! Climb time from the floor to a target rate is therefore `Σ y(rung)` over
//! the rungs below it.
//!
//! The **memory controller** wraps the ladder. It remembers the highest rate
//! the ladder sustained while the channel was benign and re-applies it
//! immediately when the detector reports the jammer went back to sleep,
//! skipping the climb. Every `K` detected sleep transitions it instead lets
//! the ladder rescan from where it stands so stale memories cannot persist;
//! `K = 1` degenerates to the plain ladder, step for step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytics::LinkClass;
use crate::detect::JamTransition;
use crate::error::{Error, Result};
use crate::phy::RateTable;

/// Dwell used for any rung a profile does not name explicitly.
pub const DEFAULT_DWELL_S: f64 = 1.25;

/// Seconds the ladder spends at each rung before probing the next one.
///
/// A profile is a per-rate map plus a uniform fallback; the stock profile is
/// a flat 1.25 s per rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDwell", into = "RawDwell")]
pub struct DwellProfile {
    uniform_s: f64,
    per_rate: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDwell {
    #[serde(skip_serializing_if = "Option::is_none")]
    uniform_s: Option<f64>,
    /// Keys are nominal rates in Mbps, rendered as strings for the config
    /// format ("6", "0.05", ...).
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<BTreeMap<String, f64>>,
}

impl TryFrom<RawDwell> for DwellProfile {
    type Error = Error;
    fn try_from(raw: RawDwell) -> Result<Self> {
        let mut per_rate = Vec::new();
        if let Some(map) = raw.y {
            for (k, v) in map {
                let rate: f64 = k
                    .parse()
                    .map_err(|_| Error::InvalidDwell(format!("bad rate key '{k}'")))?;
                per_rate.push((rate, v));
            }
        }
        DwellProfile::new(raw.uniform_s.unwrap_or(DEFAULT_DWELL_S), per_rate)
    }
}

impl From<DwellProfile> for RawDwell {
    fn from(d: DwellProfile) -> Self {
        let y = if d.per_rate.is_empty() {
            None
        } else {
            Some(
                d.per_rate
                    .iter()
                    .map(|&(r, v)| (format!("{r}"), v))
                    .collect(),
            )
        };
        RawDwell {
            uniform_s: Some(d.uniform_s),
            y,
        }
    }
}

impl Default for DwellProfile {
    fn default() -> Self {
        Self::uniform(DEFAULT_DWELL_S)
    }
}

impl DwellProfile {
    /// Flat profile: the same dwell at every rung.
    pub fn uniform(y_s: f64) -> Self {
        DwellProfile::new(y_s, Vec::new()).expect("non-negative uniform dwell")
    }

    /// Profile with per-rate overrides over a uniform fallback.
    pub fn new(uniform_s: f64, mut per_rate: Vec<(f64, f64)>) -> Result<Self> {
        if !(uniform_s >= 0.0) {
            return Err(Error::InvalidDwell(format!(
                "uniform dwell must be non-negative, got {uniform_s}"
            )));
        }
        for &(rate, y) in &per_rate {
            if !(y >= 0.0) {
                return Err(Error::InvalidDwell(format!(
                    "dwell at {rate} Mbps must be non-negative, got {y}"
                )));
            }
        }
        per_rate.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite rates"));
        Ok(DwellProfile { uniform_s, per_rate })
    }

    /// Dwell for one rung.
    pub fn y_for(&self, rate_mbps: f64) -> f64 {
        self.per_rate
            .iter()
            .find(|(r, _)| (r - rate_mbps).abs() < 1e-9)
            .map(|&(_, y)| y)
            .unwrap_or(self.uniform_s)
    }

    /// Climb time from the ladder floor to `target`: `Σ y` over the rungs
    /// strictly below it.
    pub fn convergence_time_s(&self, table: &RateTable, target_mbps: f64) -> Result<f64> {
        Ok(table
            .rates_below(target_mbps)?
            .iter()
            .map(|e| self.y_for(e.nominal_mbps))
            .sum())
    }
}

/// Per-interval delivery verdict fed to the rate controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feedback {
    Good,
    Bad,
}

/// Probing-ladder state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderState {
    rate_mbps: f64,
    /// Continuous good time spent at the current rung.
    dwell_s: f64,
}

impl LadderState {
    /// New ladder at the table floor.
    pub fn new(table: &RateTable) -> Self {
        LadderState {
            rate_mbps: table.lowest(),
            dwell_s: 0.0,
        }
    }

    pub fn rate_mbps(&self) -> f64 {
        self.rate_mbps
    }
}

/// One feedback interval of the ladder.
///
/// Good feedback accrues dwell and climbs one rung once the rung's dwell is
/// served; bad feedback drops one rung immediately. Both directions clamp at
/// the table edges and reset the dwell timer on any rung change.
pub fn ladder_step(
    state: &mut LadderState,
    feedback: Feedback,
    dt_s: f64,
    dwell: &DwellProfile,
    table: &RateTable,
) {
    match feedback {
        Feedback::Bad => {
            let down = table
                .step_down(state.rate_mbps)
                .expect("ladder rate stays in table");
            state.rate_mbps = down;
            state.dwell_s = 0.0;
        }
        Feedback::Good => {
            state.dwell_s += dt_s;
            if state.rate_mbps < table.highest() && state.dwell_s >= dwell.y_for(state.rate_mbps) {
                state.rate_mbps = table
                    .step_up(state.rate_mbps)
                    .expect("ladder rate stays in table");
                state.dwell_s = 0.0;
            }
        }
    }
}

/// Memory controller state wrapping an inner ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrcState {
    inner: LadderState,
    /// Highest rate sustained since the last rescan.
    remembered_mbps: f64,
    /// Detected sleep transitions since the last rescan.
    cycles_since_rescan: u32,
    /// Rescan period in detected sleep transitions (≥ 1).
    k: u32,
}

impl MrcState {
    pub fn new(table: &RateTable, k: u32) -> Self {
        MrcState {
            inner: LadderState::new(table),
            remembered_mbps: table.lowest(),
            cycles_since_rescan: 0,
            k: k.max(1),
        }
    }

    pub fn rate_mbps(&self) -> f64 {
        self.inner.rate_mbps()
    }

    pub fn remembered_mbps(&self) -> f64 {
        self.remembered_mbps
    }
}

/// One feedback interval of the memory controller.
///
/// `transition` carries the detector's verdict for this interval, if any.
/// On a detected active→sleep boundary the controller either re-applies the
/// remembered rate or — every `K`-th time — leaves the ladder alone and lets
/// it rescan, re-seeding the memory from wherever the ladder stands.
pub fn mrc_step(
    state: &mut MrcState,
    transition: Option<JamTransition>,
    feedback: Feedback,
    dt_s: f64,
    dwell: &DwellProfile,
    table: &RateTable,
) {
    if transition == Some(JamTransition::ActiveToSleep) {
        state.cycles_since_rescan += 1;
        if state.cycles_since_rescan >= state.k {
            // Rescan cycle: do not touch the ladder; forget the old peak so
            // this cycle's climb re-derives it.
            state.cycles_since_rescan = 0;
            state.remembered_mbps = state.inner.rate_mbps();
        } else {
            state.inner.rate_mbps = state.remembered_mbps;
            state.inner.dwell_s = 0.0;
        }
    }
    ladder_step(&mut state.inner, feedback, dt_s, dwell, table);
    // Track the peak sustained rate; non-decreasing between rescans.
    if state.inner.rate_mbps() > state.remembered_mbps {
        state.remembered_mbps = state.inner.rate_mbps();
    }
}

/// A link's transmission-rate policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RatePolicy {
    /// Pinned at one rate.
    Fixed { rate_mbps: f64 },
    /// Plain probing ladder.
    Ladder(LadderState),
    /// Memory controller.
    Mrc(MrcState),
}

impl RatePolicy {
    pub fn current_rate(&self) -> f64 {
        match self {
            RatePolicy::Fixed { rate_mbps } => *rate_mbps,
            RatePolicy::Ladder(s) => s.rate_mbps(),
            RatePolicy::Mrc(s) => s.rate_mbps(),
        }
    }

    /// Short label for traces.
    pub fn label(&self) -> &'static str {
        match self {
            RatePolicy::Fixed { .. } => "fixed",
            RatePolicy::Ladder(_) => "ladder",
            RatePolicy::Mrc(_) => "mrc",
        }
    }

    pub fn step(
        &mut self,
        transition: Option<JamTransition>,
        feedback: Feedback,
        dt_s: f64,
        dwell: &DwellProfile,
        table: &RateTable,
    ) {
        match self {
            RatePolicy::Fixed { .. } => {}
            RatePolicy::Ladder(s) => ladder_step(s, feedback, dt_s, dwell, table),
            RatePolicy::Mrc(s) => mrc_step(s, transition, feedback, dt_s, dwell, table),
        }
    }
}

/// Maps a link classification to its recommended policy: lossy links adapt
/// (ladder from the floor), lossless links pin the lowest rate that carries
/// the offered load.
pub fn choose_policy(class: LinkClass, r_a_mbps: f64, table: &RateTable) -> Result<RatePolicy> {
    match class {
        LinkClass::Lossy => Ok(RatePolicy::Ladder(LadderState::new(table))),
        LinkClass::Lossless => Ok(RatePolicy::Fixed {
            rate_mbps: table.fixed_rate_for(r_a_mbps)?,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table() -> RateTable {
        RateTable::default_80211a()
    }

    #[test]
    fn ladder_climbs_one_rung_per_served_dwell() {
        let t = table();
        let dwell = DwellProfile::uniform(1.0);
        let mut s = LadderState::new(&t);
        let dt = 0.001;
        let mut reached_top_at = None;
        for step in 1..=8000 {
            ladder_step(&mut s, Feedback::Good, dt, &dwell, &t);
            if s.rate_mbps() == 54.0 && reached_top_at.is_none() {
                reached_top_at = Some(step as f64 * dt);
            }
        }
        // Seven rungs below the top at 1 s each.
        assert_relative_eq!(reached_top_at.unwrap(), 7.0, epsilon = 1e-9);
        // Stays pinned at the top under continued good feedback.
        assert_eq!(s.rate_mbps(), 54.0);
    }

    #[test]
    fn bad_feedback_drops_immediately_and_resets_dwell() {
        let t = table();
        let dwell = DwellProfile::uniform(1.0);
        let mut s = LadderState::new(&t);
        for _ in 0..2000 {
            ladder_step(&mut s, Feedback::Good, 0.001, &dwell, &t);
        }
        assert_eq!(s.rate_mbps(), 12.0);
        // Accrue most of a dwell, then fail once: down a rung, timer cleared.
        for _ in 0..900 {
            ladder_step(&mut s, Feedback::Good, 0.001, &dwell, &t);
        }
        ladder_step(&mut s, Feedback::Bad, 0.001, &dwell, &t);
        assert_eq!(s.rate_mbps(), 9.0);
        // The full dwell must be served again before the next climb.
        for _ in 0..999 {
            ladder_step(&mut s, Feedback::Good, 0.001, &dwell, &t);
        }
        assert_eq!(s.rate_mbps(), 9.0);
        ladder_step(&mut s, Feedback::Good, 0.001, &dwell, &t);
        assert_eq!(s.rate_mbps(), 12.0);
        // And the floor clamps.
        let mut f = LadderState::new(&t);
        ladder_step(&mut f, Feedback::Bad, 0.001, &dwell, &t);
        assert_eq!(f.rate_mbps(), 6.0);
    }

    #[test]
    fn zero_dwell_climbs_every_interval() {
        let t = table();
        let dwell = DwellProfile::uniform(0.0);
        let mut s = LadderState::new(&t);
        for _ in 0..7 {
            ladder_step(&mut s, Feedback::Good, 0.001, &dwell, &t);
        }
        assert_eq!(s.rate_mbps(), 54.0);
    }

    #[test]
    fn mrc_k1_is_bitwise_the_ladder() {
        let t = table();
        let dwell = DwellProfile::uniform(0.05);
        let mut ladder = LadderState::new(&t);
        let mut mrc = MrcState::new(&t, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..20_000 {
            let fb = if rng.gen::<f64>() < 0.8 {
                Feedback::Good
            } else {
                Feedback::Bad
            };
            let tr = if i % 700 == 0 {
                Some(JamTransition::ActiveToSleep)
            } else if i % 700 == 350 {
                Some(JamTransition::SleepToActive)
            } else {
                None
            };
            ladder_step(&mut ladder, fb, 0.001, &dwell, &t);
            mrc_step(&mut mrc, tr, fb, 0.001, &dwell, &t);
            assert_eq!(mrc.rate_mbps(), ladder.rate_mbps(), "diverged at step {i}");
        }
    }

    #[test]
    fn mrc_jumps_to_remembered_rate_and_rescans_every_k() {
        let t = table();
        let dwell = DwellProfile::uniform(0.01);
        let mut mrc = MrcState::new(&t, 3);
        let climb = |m: &mut MrcState, n: usize| {
            for _ in 0..n {
                mrc_step(m, None, Feedback::Good, 0.001, &dwell, &t);
            }
        };
        let fall = |m: &mut MrcState, n: usize| {
            for _ in 0..n {
                mrc_step(m, None, Feedback::Bad, 0.001, &dwell, &t);
            }
        };
        let wake = |m: &mut MrcState| {
            mrc_step(
                m,
                Some(JamTransition::ActiveToSleep),
                Feedback::Good,
                0.001,
                &dwell,
                &t,
            );
        };
        // Cycle 1 (counter 1 < 3): jump lands on the initial floor memory,
        // then the ladder climbs to the top and the peak is remembered.
        wake(&mut mrc);
        climb(&mut mrc, 200);
        assert_eq!(mrc.rate_mbps(), 54.0);
        fall(&mut mrc, 50);
        assert_eq!(mrc.rate_mbps(), 6.0);
        // Cycle 2 (counter 2 < 3): the remembered top is applied immediately.
        wake(&mut mrc);
        assert_eq!(mrc.rate_mbps(), 54.0);
        climb(&mut mrc, 100);
        fall(&mut mrc, 50);
        // Cycle 3 (counter 3 >= 3): rescan — no jump, ladder climbs from the
        // floor and the memory is re-seeded from the ladder.
        wake(&mut mrc);
        assert_eq!(mrc.rate_mbps(), 6.0);
        assert_eq!(mrc.remembered_mbps(), 6.0);
        climb(&mut mrc, 200);
        assert_eq!(mrc.remembered_mbps(), 54.0);
    }

    #[test]
    fn policy_choice_follows_classification() {
        let t = table();
        match choose_policy(LinkClass::Lossless, 40.5, &t).unwrap() {
            RatePolicy::Fixed { rate_mbps } => assert_eq!(rate_mbps, 48.0),
            other => panic!("expected fixed, got {other:?}"),
        }
        match choose_policy(LinkClass::Lossy, 40.5, &t).unwrap() {
            RatePolicy::Ladder(s) => assert_eq!(s.rate_mbps(), 6.0),
            other => panic!("expected ladder, got {other:?}"),
        }
        assert!(choose_policy(LinkClass::Lossless, 55.0, &t).is_err());
    }

    #[test]
    fn dwell_profile_lookup_and_convergence_time() {
        let t = table();
        let d = DwellProfile::new(1.0, vec![(6.0, 0.5), (48.0, 2.0)]).unwrap();
        assert_eq!(d.y_for(6.0), 0.5);
        assert_eq!(d.y_for(9.0), 1.0);
        assert_eq!(d.y_for(48.0), 2.0);
        // 0.5 + 1·5 + 2 over the seven rungs below the top.
        assert_relative_eq!(d.convergence_time_s(&t, 54.0).unwrap(), 7.5);
        assert_relative_eq!(
            DwellProfile::uniform(1.0).convergence_time_s(&t, 54.0).unwrap(),
            7.0
        );
        assert_relative_eq!(d.convergence_time_s(&t, 6.0).unwrap(), 0.0);
        assert!(DwellProfile::new(-0.1, vec![]).is_err());
        assert!(DwellProfile::new(1.0, vec![(6.0, -1.0)]).is_err());
    }

    #[test]
    fn dwell_profile_survives_config_round_trip() {
        let d = DwellProfile::new(1.25, vec![(0.05, 0.336), (6.0, 5.0)]).unwrap();
        let text = toml::to_string(&d).unwrap();
        let back: DwellProfile = toml::from_str(&text).unwrap();
        assert_eq!(back, d);
    }

    proptest! {
        #[test]
        fn prop_ladder_moves_one_rung_at_most(seed in 0u64..1000) {
            let t = table();
            let dwell = DwellProfile::uniform(0.002);
            let mut s = LadderState::new(&t);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut prev = t.index_of(s.rate_mbps()).unwrap();
            for _ in 0..500 {
                let fb = if rng.gen::<f64>() < 0.7 { Feedback::Good } else { Feedback::Bad };
                ladder_step(&mut s, fb, 0.001, &dwell, &t);
                let now = t.index_of(s.rate_mbps()).unwrap();
                prop_assert!(now.abs_diff(prev) <= 1);
                prev = now;
            }
        }
    }
}

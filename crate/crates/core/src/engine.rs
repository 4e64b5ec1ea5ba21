//! Deterministic discrete-time simulation engine.
//!
//! Time advances in fixed slots. Jammer phase machines are integrated
//! *exactly* across slot boundaries (a slot knows which fraction of it each
//! jammer spent active), and per-slot goodput is an expected value over the
//! jammers' active/sleeping combinations rather than a sampled coin flip —
//! so coarse slots lose no accuracy on phase averages, only on rate-ladder
//! timing granularity.
//!
//! Per slot and link, delivery quality `q ∈ [0, 1]` combines:
//! carrier-sense deferral at the transmitter (incident jam energy vs. CCA,
//! with packetized jammers leaving winnable gaps), capture at the receiver
//! (SINR vs. the rate's decode threshold, desired signal vs. the receiver
//! CCA), the link's base delivery ratio, and reactive corruption. Goodput is
//! `saturated_rate × q`, scaled by the link's route airtime share and capped
//! by the offered load.
//!
//! Randomness comes from per-subsystem streams derived from the scenario
//! seed, so enabling or disabling one subsystem never shifts another's
//! draws; identical configs produce byte-identical traces.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytics::{self, AnalyticInputs};
use crate::controller::{ControllerAction, ControllerState, RateModuleKind, WindowObservation};
use crate::detect::{DetectorState, JamTransition};
use crate::error::{Error, Result};
use crate::jammer::{
    self, reactive_jam_probability, Advance, JammerKind, JammerProfile, JammerState,
    MobilityTrace, Phase, DIFS_80211A_S,
};
use crate::phy::{can_capture, dbm_to_mw, mw_to_dbm, RadioConfig, RateTable};
use crate::power::{
    centralized_assign, distributed_round, CcaAssignment, DistributedState, PowerControlMode,
};
use crate::rate::{DwellProfile, Feedback, LadderState, MrcState, RatePolicy, DEFAULT_DWELL_S};
use crate::scenario::{JamRssi, PolicySpec, ScenarioConfig};
use crate::trace::{
    AnalysisRow, ControllerEvent, DetectorScore, LinkSummary, PowerSummary, RouteSummary,
    RunSummary, ThroughputTrace, TraceSample,
};

/// Slot delivery quality at or above which rate-control feedback reads Good.
pub const GOOD_FEEDBACK_QUALITY: f64 = 0.9;

/// Payload size assumed for legitimate traffic (drives reactive-jammer hit
/// probability via time-on-air).
pub const TRAFFIC_PACKET_BYTES: u32 = 1500;

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: ThroughputTrace,
    pub summary: RunSummary,
    /// Closed-form rows, when the scenario carries an `[analysis]` block.
    pub analysis: Option<Vec<AnalysisRow>>,
}

/// Independent RNG stream per subsystem: FNV-1a over the tag, XORed into
/// the seed, so streams are decorrelated and config toggles in one
/// subsystem cannot shift another's draws.
fn stream_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

/// Evaluate the closed-form model over the scenario's `[analysis]` grid.
pub fn run_analysis(cfg: &ScenarioConfig) -> Result<Vec<AnalysisRow>> {
    let analysis = cfg
        .analysis
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("scenario has no [analysis] block".into()))?;
    let table = cfg.rate_table();
    let moments = cfg.moments_or_default(analysis.moments)?;
    let rates: Vec<f64> = match &analysis.rates {
        Some(r) => r.clone(),
        None => table.entries().iter().map(|e| e.nominal_mbps).collect(),
    };
    let mut rows = Vec::with_capacity(rates.len());
    for rate in rates {
        let inputs = AnalyticInputs {
            moments,
            r_a_mbps: rate,
            pdr_f: analysis.pdr,
            f_mbps: analysis.f_mbps,
            dwell: &analysis.dwell,
            table: &table,
        };
        let threshold = analytics::pdr_threshold(&inputs)?;
        rows.push(AnalysisRow {
            rate_mbps: rate,
            t_fixed_mbps: analytics::t_fixed(&inputs)?,
            t_adapt_mbps: analytics::t_adapt(&inputs)?,
            pdr_threshold: threshold.pdr,
            crossing: threshold.crossing,
            class: analytics::classify_link(&inputs)?,
        });
    }
    Ok(rows)
}

struct JammerRuntime {
    profile: JammerProfile,
    state: JammerState,
    rng: ChaCha8Rng,
    /// Per link index: this jammer's legs on that link, if audible there.
    legs: Vec<Option<JamRssi>>,
    mobility: Option<MobilityTrace>,
    /// Sender win probability in this jammer's emission gaps.
    gap_win: f64,
    /// Strongest static leg per node (power shift folded in).
    node_rssi: Vec<f64>,
    /// What happened during the current slot.
    advance: Advance,
    /// Active seconds since the last beacon boundary.
    beacon_active_s: f64,
}

impl JammerRuntime {
    fn offset_db(&self, t_s: f64) -> f64 {
        match &self.mobility {
            Some(trace) => trace.offset_at(t_s),
            None => 0.0,
        }
    }
}

struct LinkRuntime {
    policy: RatePolicy,
    standing: RatePolicy,
    module: Option<RatePolicy>,
    module_active: bool,
    cca_tx_dbm: f64,
    cca_rx_dbm: f64,
    detector: DetectorState,
    /// Detector transition awaiting delivery to the rate policy.
    pending_transition: Option<JamTransition>,
    /// Last rate confirmed healthy while undetected; anchors the jam-free
    /// throughput baseline.
    benign_rate_mbps: f64,
    airtime_share: f64,
    truth_active: bool,
    // Window accumulators.
    win_q_sum: f64,
    win_tput_sum: f64,
    win_jam_mw_sum: f64,
    win_slots: u64,
    win_any_active: bool,
    // Sampling-period accumulators.
    samp_tput_sum: f64,
    samp_slots: u64,
    // Whole-run aggregates.
    run_tput_sum: f64,
    run_slots: u64,
    jammed_sample_sum: f64,
    jammed_samples: u64,
    sleep_sample_sum: f64,
    sleep_samples: u64,
    truth_transitions: Vec<(f64, JamTransition)>,
    detector_transitions: Vec<(f64, JamTransition)>,
    false_positive_windows: u64,
}

struct PcRuntime {
    active: bool,
    distributed: Option<DistributedState>,
    rng: ChaCha8Rng,
    rounds_to_converge: Option<u64>,
    convergence_s: Option<f64>,
    activation_s: f64,
    last_assignment: Option<CcaAssignment>,
}

/// One scenario, compiled and ready to run.
pub struct Engine {
    cfg: ScenarioConfig,
    table: RateTable,
    dwell: DwellProfile,
    node_ids: Vec<String>,
}

impl Engine {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let table = cfg.rate_table();
        let dwell = match &cfg.calibration {
            Some(cal) => cal.dwell.clone(),
            None => DwellProfile::uniform(DEFAULT_DWELL_S),
        };
        let node_ids = cfg.node_ids();
        Ok(Engine {
            cfg,
            table,
            dwell,
            node_ids,
        })
    }

    fn node_index(&self, name: &Option<String>) -> Option<usize> {
        let name = name.as_ref()?;
        self.node_ids.iter().position(|n| n == name)
    }

    fn standing_policy(&self, spec: &PolicySpec) -> RatePolicy {
        match *spec {
            PolicySpec::Fixed { rate_mbps } => RatePolicy::Fixed { rate_mbps },
            PolicySpec::Ladder => RatePolicy::Ladder(LadderState::new(&self.table)),
            PolicySpec::Mrc { rescan_every } => {
                RatePolicy::Mrc(MrcState::new(&self.table, rescan_every))
            }
        }
    }

    /// Policy the controller installs on escalation, per link.
    fn module_policy(&self, link_idx: usize) -> Result<Option<RatePolicy>> {
        if !self.cfg.controller.enabled {
            return Ok(None);
        }
        let link = &self.cfg.links[link_idx];
        match self.cfg.controller.rate_module {
            RateModuleKind::Off => Ok(None),
            RateModuleKind::Mrc { rescan_every } => Ok(Some(RatePolicy::Mrc(MrcState::new(
                &self.table,
                rescan_every,
            )))),
            RateModuleKind::Analytic => {
                let cal = self.cfg.calibration.as_ref().ok_or_else(|| {
                    Error::InvalidInput("analytic rate module needs a [calibration] block".into())
                })?;
                let moments = self.cfg.moments_or_default(cal.moments)?;
                let r_a = link.r_a_mbps.unwrap_or_else(|| self.table.highest());
                let fixed_rate = self.table.fixed_rate_for(r_a)?;
                let pdr_f = cal.pdr_f.unwrap_or_else(|| link.pdr_at(fixed_rate));
                let inputs = AnalyticInputs {
                    moments,
                    r_a_mbps: r_a,
                    pdr_f,
                    f_mbps: cal.f_mbps,
                    dwell: &cal.dwell,
                    table: &self.table,
                };
                let class = analytics::classify_link(&inputs)?;
                Ok(Some(crate::rate::choose_policy(class, r_a, &self.table)?))
            }
        }
    }

    pub fn run(&self) -> Result<RunOutput> {
        let analysis = if self.cfg.analysis.is_some() {
            Some(run_analysis(&self.cfg)?)
        } else {
            None
        };
        let (trace, summary) = if self.cfg.simulates() {
            self.simulate()?
        } else {
            (
                ThroughputTrace::default(),
                RunSummary {
                    seed: self.cfg.seed,
                    duration_s: self.cfg.duration_s,
                    links: Vec::new(),
                    routes: Vec::new(),
                    power: None,
                    controller_events: Vec::new(),
                    config: self.cfg.clone(),
                },
            )
        };
        Ok(RunOutput {
            trace,
            summary,
            analysis,
        })
    }

    fn build_jammers(&self) -> Result<Vec<JammerRuntime>> {
        let mut out = Vec::with_capacity(self.cfg.jammers.len());
        for (j, jam_cfg) in self.cfg.jammers.iter().enumerate() {
            let profile = jam_cfg.resolve()?;
            let power_shift = jam_cfg.power_shift_db(&profile);
            let mut legs = vec![None; self.cfg.links.len()];
            for (link_id, leg) in &jam_cfg.rssi {
                if let Some(i) = self.cfg.links.iter().position(|l| &l.id == link_id) {
                    legs[i] = Some(JamRssi {
                        jt: leg.jt + power_shift,
                        jr: leg.jr + power_shift,
                    });
                }
            }
            let mut node_rssi = vec![f64::NEG_INFINITY; self.node_ids.len()];
            for (i, link) in self.cfg.links.iter().enumerate() {
                if let Some(leg) = legs[i] {
                    if let Some(n) = self.node_index(&link.tx_node) {
                        node_rssi[n] = node_rssi[n].max(leg.jt);
                    }
                    if let Some(n) = self.node_index(&link.rx_node) {
                        node_rssi[n] = node_rssi[n].max(leg.jr);
                    }
                }
            }
            let mut rng = stream_rng(self.cfg.seed, &format!("jammer/{j}"));
            let state = JammerState::init(&profile, &mut rng);
            let gap_win = jammer::emission_pattern(&profile).sender_win_probability();
            out.push(JammerRuntime {
                profile,
                state,
                rng,
                legs,
                mobility: jam_cfg.mobility.clone(),
                gap_win,
                node_rssi,
                advance: Advance {
                    active_fraction: 0.0,
                    entered_sleep: false,
                    entered_active: false,
                },
                beacon_active_s: 0.0,
            });
        }
        Ok(out)
    }

    fn build_links(&self) -> Result<Vec<LinkRuntime>> {
        let mut shares = vec![1.0; self.cfg.links.len()];
        for route in &self.cfg.topology.routes {
            let hops = route.links.len().max(1) as f64;
            for id in &route.links {
                if let Some(i) = self.cfg.links.iter().position(|l| &l.id == id) {
                    shares[i] = 1.0 / hops;
                }
            }
        }
        let mut out = Vec::with_capacity(self.cfg.links.len());
        for (i, link) in self.cfg.links.iter().enumerate() {
            let standing = self.standing_policy(&link.policy);
            out.push(LinkRuntime {
                policy: standing,
                standing,
                module: self.module_policy(i)?,
                module_active: false,
                cca_tx_dbm: link.radios.tx.cca_threshold_dbm,
                cca_rx_dbm: link.radios.rx.cca_threshold_dbm,
                detector: DetectorState::default(),
                pending_transition: None,
                benign_rate_mbps: standing.current_rate(),
                airtime_share: shares[i],
                truth_active: false,
                win_q_sum: 0.0,
                win_tput_sum: 0.0,
                win_jam_mw_sum: 0.0,
                win_slots: 0,
                win_any_active: false,
                samp_tput_sum: 0.0,
                samp_slots: 0,
                run_tput_sum: 0.0,
                run_slots: 0,
                jammed_sample_sum: 0.0,
                jammed_samples: 0,
                sleep_sample_sum: 0.0,
                sleep_samples: 0,
                truth_transitions: Vec::new(),
                detector_transitions: Vec::new(),
                false_positive_windows: 0,
            });
        }
        Ok(out)
    }

    /// Jam-free goodput estimate for one link at its benign-anchored rate.
    fn baseline_mbps(&self, idx: usize, link: &LinkRuntime) -> Result<f64> {
        let cfg = &self.cfg.links[idx];
        let rate = link.benign_rate_mbps;
        let mut estimate =
            self.table.saturated(rate)? * cfg.pdr_at(rate) * link.airtime_share;
        if !self.cfg.traffic.udp_saturated {
            if let Some(r_a) = cfg.r_a_mbps {
                estimate = estimate.min(r_a);
            }
        }
        Ok(estimate)
    }

    /// Delivery quality of one link for one slot: expectation over the
    /// audible jammers' active/sleeping combinations.
    fn slot_quality(
        &self,
        idx: usize,
        link: &LinkRuntime,
        jammers: &[JammerRuntime],
        t_s: f64,
        scratch: &mut Vec<f64>,
    ) -> Result<(f64, f64)> {
        let cfg = &self.cfg.links[idx];
        let rate = link.policy.current_rate();
        let base_pdr = cfg.pdr_at(rate);
        let rx_radio = RadioConfig {
            cca_threshold_dbm: link.cca_rx_dbm,
            ..cfg.radios.rx
        };

        // Partition audible jammers: cycling/always-on contribute phase
        // combinations; reactive ones corrupt multiplicatively.
        let mut phased: Vec<(f64, f64, f64, f64)> = Vec::new(); // (f, jt, jr, win)
        let mut reactive_factor = 1.0;
        let mut jam_mw_at_rx = 0.0;
        for jam in jammers {
            let Some(leg) = jam.legs[idx] else { continue };
            let offset = jam.offset_db(t_s);
            let jt = leg.jt + offset;
            let jr = leg.jr + offset;
            match jam.profile.kind {
                JammerKind::Reactive => {
                    let hit = reactive_jam_probability(
                        TRAFFIC_PACKET_BYTES,
                        rate,
                        DIFS_80211A_S,
                    );
                    let corrupts = !can_capture(&rx_radio, cfg.rssi.tr, &[jr], rate, &self.table)?;
                    if corrupts {
                        reactive_factor *= 1.0 - hit;
                    }
                }
                _ => {
                    let f = jam.advance.active_fraction;
                    jam_mw_at_rx += f * dbm_to_mw(jr);
                    if f > 0.0 {
                        phased.push((f, jt, jr, jam.gap_win));
                    }
                }
            }
        }

        let quality_off = if can_capture(&rx_radio, cfg.rssi.tr, &[], rate, &self.table)? {
            base_pdr
        } else {
            0.0
        };

        // Forced jammed-phase goodput: replaces the computed on-phase
        // quality whenever any phased jammer is active.
        if let Some(f_over) = cfg.f_override_mbps {
            let p_off: f64 = phased.iter().map(|&(f, ..)| 1.0 - f).product();
            let q_on = (f_over / self.table.saturated(rate)?).min(1.0);
            let q = p_off * quality_off + (1.0 - p_off) * q_on;
            return Ok((q * reactive_factor, jam_mw_at_rx));
        }

        let mut q = 0.0;
        for mask in 0..(1u32 << phased.len()) {
            let mut p = 1.0;
            let mut jt_mw = 0.0;
            let mut win = 1.0;
            scratch.clear();
            for (bit, &(f, jt, jr, w)) in phased.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    p *= f;
                    jt_mw += dbm_to_mw(jt);
                    win *= w;
                    scratch.push(jr);
                } else {
                    p *= 1.0 - f;
                }
            }
            if p <= 0.0 {
                continue;
            }
            let q_set = if scratch.is_empty() {
                quality_off
            } else {
                let captured = can_capture(&rx_radio, cfg.rssi.tr, scratch, rate, &self.table)?;
                let mut q_set = if captured { base_pdr } else { 0.0 };
                if q_set > 0.0 && mw_to_dbm(jt_mw) >= link.cca_tx_dbm {
                    // Transmitter reads busy: only the jammers' emission
                    // gaps remain winnable.
                    q_set *= win;
                }
                q_set
            };
            q += p * q_set;
        }
        Ok((q * reactive_factor, jam_mw_at_rx))
    }

    fn simulate(&self) -> Result<(ThroughputTrace, RunSummary)> {
        let cfg = &self.cfg;
        let slot_s = cfg.slot_s;
        let total_slots = (cfg.duration_s / slot_s).round() as u64;
        let window_slots = (cfg.detector.window_s / slot_s).round().max(1.0) as u64;
        let sample_slots = (cfg.sample_period_s / slot_s).round().max(1.0) as u64;
        let beacon_slots = (cfg.power.beacon_period_s / slot_s).round().max(1.0) as u64;
        let distributed = cfg.power.mode == PowerControlMode::Distributed;

        let mut jammers = self.build_jammers()?;
        let mut links = self.build_links()?;
        let mut controller = ControllerState::new();
        let mut network_jammed = false;
        let mut pc = PcRuntime {
            active: false,
            distributed: None,
            rng: stream_rng(cfg.seed, "power/beacons"),
            rounds_to_converge: None,
            convergence_s: None,
            activation_s: 0.0,
            last_assignment: None,
        };
        let mut events: Vec<ControllerEvent> = Vec::new();
        let mut trace = ThroughputTrace::default();

        // Route bookkeeping: per route, member link indices plus the
        // accumulated per-sample bottleneck throughput.
        let mut routes: Vec<(String, Vec<usize>, f64, u64)> = cfg
            .topology
            .routes
            .iter()
            .map(|r| {
                let idxs = r
                    .links
                    .iter()
                    .filter_map(|id| cfg.links.iter().position(|l| &l.id == id))
                    .collect();
                (r.id.clone(), idxs, 0.0, 0u64)
            })
            .collect();

        let mut scratch: Vec<f64> = Vec::new();

        for slot in 1..=total_slots {
            let t_s = slot as f64 * slot_s;

            // 1. Advance every jammer's phase machine.
            for jam in jammers.iter_mut() {
                let profile = jam.profile.clone();
                jam.advance = jammer::advance(&mut jam.state, &profile, slot_s, &mut jam.rng);
                jam.beacon_active_s += jam.advance.active_fraction * slot_s;
            }

            // 2. Per link: quality, goodput, accumulation, policy feedback.
            for (idx, link) in links.iter_mut().enumerate() {
                let link_cfg = &cfg.links[idx];
                let (q, jam_mw) = self.slot_quality(idx, link, &jammers, t_s, &mut scratch)?;
                let rate = link.policy.current_rate();
                let mut goodput = self.table.saturated(rate)? * q * link.airtime_share;
                if !cfg.traffic.udp_saturated {
                    if let Some(r_a) = link_cfg.r_a_mbps {
                        goodput = goodput.min(r_a);
                    }
                }

                link.win_q_sum += q;
                link.win_tput_sum += goodput;
                link.win_jam_mw_sum += jam_mw;
                link.win_slots += 1;
                link.samp_tput_sum += goodput;
                link.samp_slots += 1;
                link.run_tput_sum += goodput;
                link.run_slots += 1;

                // Ground-truth jammer phase on this link, end of slot.
                let active_now = jammers.iter().any(|j| {
                    j.legs[idx].is_some()
                        && j.profile.kind != JammerKind::Reactive
                        && j.state.phase == Phase::Active
                });
                if jammers
                    .iter()
                    .any(|j| j.legs[idx].is_some() && j.advance.active_fraction > 0.0)
                {
                    link.win_any_active = true;
                }
                if active_now != link.truth_active {
                    let direction = if active_now {
                        JamTransition::SleepToActive
                    } else {
                        JamTransition::ActiveToSleep
                    };
                    link.truth_transitions.push((t_s, direction));
                    link.truth_active = active_now;
                }

                // Rate-policy feedback for this slot.
                let feedback = if q >= GOOD_FEEDBACK_QUALITY {
                    Feedback::Good
                } else {
                    Feedback::Bad
                };
                let transition = link.pending_transition.take();
                link.policy
                    .step(transition, feedback, slot_s, &self.dwell, &self.table);
            }

            // 3. Detector window boundary.
            if slot % window_slots == 0 {
                let mut window_tput = 0.0;
                let mut window_baseline = 0.0;
                let evidence_bar = cfg.detector.default_cca_dbm + cfg.detector.rssi_margin_db;
                let mut air_hot = false;
                for (idx, link) in links.iter_mut().enumerate() {
                    let slots = link.win_slots.max(1) as f64;
                    let window_pdr = link.win_q_sum / slots;
                    let noise_mw = dbm_to_mw(cfg.links[idx].radios.rx.noise_floor_dbm);
                    let window_rssi = mw_to_dbm(link.win_jam_mw_sum / slots + noise_mw);
                    air_hot |= window_rssi >= evidence_bar;
                    if let Some(transition) =
                        link.detector.update(window_pdr, window_rssi, &cfg.detector)
                    {
                        link.detector_transitions.push((t_s, transition));
                        link.pending_transition = Some(transition);
                    }
                    if link.detector.jammed() && !link.win_any_active {
                        link.false_positive_windows += 1;
                    }
                    if !link.detector.jammed() && window_pdr >= GOOD_FEEDBACK_QUALITY {
                        link.benign_rate_mbps = link.policy.current_rate();
                    }
                    window_tput += link.win_tput_sum / slots;
                    link.win_q_sum = 0.0;
                    link.win_tput_sum = 0.0;
                    link.win_jam_mw_sum = 0.0;
                    link.win_slots = 0;
                    link.win_any_active = false;
                }
                for (idx, link) in links.iter().enumerate() {
                    window_baseline += self.baseline_mbps(idx, link)?;
                }

                // 4. Controller tick on the freshly closed window.
                let now_jammed = links.iter().any(|l| l.detector.jammed());
                let transition = match (network_jammed, now_jammed) {
                    (false, true) => Some(JamTransition::SleepToActive),
                    (true, false) => Some(JamTransition::ActiveToSleep),
                    _ => None,
                };
                network_jammed = now_jammed;
                let obs = WindowObservation {
                    transition,
                    jammed: now_jammed,
                    air_quiet: !air_hot,
                    throughput_mbps: window_tput,
                    baseline_mbps: window_baseline,
                };
                for action in controller.step(&cfg.controller, &obs) {
                    self.execute_action(action, t_s, &mut links, &mut pc, &mut events)?;
                }
            }

            // 5. Gossip beacons for distributed power control.
            if distributed && slot % beacon_slots == 0 {
                if pc.active && pc.rounds_to_converge.is_none() {
                    if let Some(state) = pc.distributed.as_mut() {
                        let period = beacon_slots as f64 * slot_s;
                        let loss: Vec<f64> = (0..self.node_ids.len())
                            .map(|n| {
                                let mut survive = 1.0;
                                for jam in &jammers {
                                    let rssi = jam.node_rssi[n] + jam.offset_db(t_s);
                                    if rssi >= cfg.power.default_cca_dbm {
                                        let duty =
                                            (jam.beacon_active_s / period).clamp(0.0, 1.0);
                                        survive *= 1.0 - duty;
                                    }
                                }
                                1.0 - survive
                            })
                            .collect();
                        let (assignment, converged) =
                            distributed_round(state, &loss, &cfg.power, &mut pc.rng);
                        apply_assignment(&assignment, &self.node_idx_map(), cfg, &mut links);
                        if converged {
                            pc.rounds_to_converge = Some(state.rounds());
                            pc.convergence_s = Some(t_s - pc.activation_s);
                        }
                        pc.last_assignment = Some(assignment);
                    }
                }
                for jam in jammers.iter_mut() {
                    jam.beacon_active_s = 0.0;
                }
            }

            // 6. Trace sample boundary.
            if slot % sample_slots == 0 {
                for (idx, link) in links.iter_mut().enumerate() {
                    let slots = link.samp_slots.max(1) as f64;
                    let tput = link.samp_tput_sum / slots;
                    trace.samples.push(TraceSample {
                        t_s,
                        link_id: cfg.links[idx].id.clone(),
                        throughput_mbps: tput,
                        rate_mbps: link.policy.current_rate(),
                        cca_dbm: link.cca_tx_dbm,
                        jammer_active_truth: link.truth_active,
                        detector_jammed: link.detector.jammed(),
                        policy: link.policy.label().to_string(),
                    });
                    if link.truth_active {
                        link.jammed_sample_sum += tput;
                        link.jammed_samples += 1;
                    } else {
                        link.sleep_sample_sum += tput;
                        link.sleep_samples += 1;
                    }
                    link.samp_tput_sum = 0.0;
                    link.samp_slots = 0;
                }
                for (_, idxs, sum, count) in routes.iter_mut() {
                    let bottleneck = idxs
                        .iter()
                        .filter_map(|&i| {
                            trace
                                .samples
                                .iter()
                                .rev()
                                .find(|s| s.link_id == cfg.links[i].id)
                                .map(|s| s.throughput_mbps)
                        })
                        .fold(f64::INFINITY, f64::min);
                    if bottleneck.is_finite() {
                        *sum += bottleneck;
                        *count += 1;
                    }
                }
            }
        }

        let summary = self.summarize(&links, &routes, &pc, events, cfg)?;
        Ok((trace, summary))
    }

    fn node_idx_map(&self) -> BTreeMap<&str, usize> {
        self.node_ids
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect()
    }

    fn execute_action(
        &self,
        action: ControllerAction,
        t_s: f64,
        links: &mut [LinkRuntime],
        pc: &mut PcRuntime,
        events: &mut Vec<ControllerEvent>,
    ) -> Result<()> {
        let cfg = &self.cfg;
        let label = match action {
            ControllerAction::ApplyCca => "apply_cca",
            ControllerAction::ActivateRateModule => "activate_rate_module",
            ControllerAction::RestoreDefaults => "restore_defaults",
        };
        events.push(ControllerEvent {
            t_s,
            action: label.to_string(),
        });
        match action {
            ControllerAction::ApplyCca => match cfg.power.mode {
                PowerControlMode::Off => {}
                PowerControlMode::Centralized => {
                    let matrices: Vec<crate::phy::RssiMatrix> = cfg
                        .links
                        .iter()
                        .map(|l| crate::phy::RssiMatrix {
                            tr: l.rssi.tr,
                            rt: l.rssi.rt,
                            jt: f64::NEG_INFINITY,
                            jr: f64::NEG_INFINITY,
                        })
                        .collect();
                    let assignment =
                        centralized_assign(&matrices, self.node_ids.len(), &cfg.power)?;
                    apply_assignment(&assignment, &self.node_idx_map(), cfg, links);
                    pc.active = true;
                    pc.activation_s = t_s;
                    pc.rounds_to_converge = Some(0);
                    pc.convergence_s = Some(0.0);
                    pc.last_assignment = Some(assignment);
                }
                PowerControlMode::Distributed => {
                    let node_idx = self.node_idx_map();
                    let mut link_triples = Vec::with_capacity(cfg.links.len());
                    let mut adjacency = vec![Vec::new(); self.node_ids.len()];
                    for link in &cfg.links {
                        let (Some(a), Some(b)) = (
                            link.tx_node.as_deref().and_then(|n| node_idx.get(n)),
                            link.rx_node.as_deref().and_then(|n| node_idx.get(n)),
                        ) else {
                            continue;
                        };
                        link_triples.push((*a, *b, link.rssi.tr.min(link.rssi.rt)));
                        if !adjacency[*a].contains(b) {
                            adjacency[*a].push(*b);
                        }
                        if !adjacency[*b].contains(a) {
                            adjacency[*b].push(*a);
                        }
                    }
                    let state =
                        DistributedState::new(self.node_ids.len(), &link_triples, adjacency)?;
                    // Nodes start from their local views immediately.
                    let assignment = state.assignment(&cfg.power);
                    apply_assignment(&assignment, &node_idx, cfg, links);
                    pc.active = true;
                    pc.activation_s = t_s;
                    pc.rounds_to_converge = if state.converged() { Some(0) } else { None };
                    pc.convergence_s = if state.converged() { Some(0.0) } else { None };
                    pc.last_assignment = Some(assignment);
                    pc.distributed = Some(state);
                }
            },
            ControllerAction::ActivateRateModule => {
                for link in links.iter_mut() {
                    if link.detector.jammed() && !link.module_active {
                        if let Some(module) = link.module {
                            link.policy = module;
                            link.module_active = true;
                        }
                    }
                }
            }
            ControllerAction::RestoreDefaults => {
                for (idx, link) in links.iter_mut().enumerate() {
                    link.cca_tx_dbm = cfg.links[idx].radios.tx.cca_threshold_dbm;
                    link.cca_rx_dbm = cfg.links[idx].radios.rx.cca_threshold_dbm;
                    if link.module_active {
                        link.policy = link.standing;
                        link.module_active = false;
                    }
                }
                pc.active = false;
                pc.distributed = None;
            }
        }
        Ok(())
    }

    fn summarize(
        &self,
        links: &[LinkRuntime],
        routes: &[(String, Vec<usize>, f64, u64)],
        pc: &PcRuntime,
        events: Vec<ControllerEvent>,
        cfg: &ScenarioConfig,
    ) -> Result<RunSummary> {
        let link_summaries = links
            .iter()
            .enumerate()
            .map(|(idx, link)| {
                let mean = if link.run_slots > 0 {
                    link.run_tput_sum / link.run_slots as f64
                } else {
                    0.0
                };
                LinkSummary {
                    link_id: cfg.links[idx].id.clone(),
                    mean_throughput_mbps: mean,
                    mean_jammed_mbps: if link.jammed_samples > 0 {
                        link.jammed_sample_sum / link.jammed_samples as f64
                    } else {
                        0.0
                    },
                    mean_sleep_mbps: if link.sleep_samples > 0 {
                        link.sleep_sample_sum / link.sleep_samples as f64
                    } else {
                        0.0
                    },
                    final_rate_mbps: link.policy.current_rate(),
                    final_cca_dbm: link.cca_tx_dbm,
                    detector: score_detector(
                        &link.truth_transitions,
                        &link.detector_transitions,
                        cfg.detector.window_s,
                        link.false_positive_windows,
                    ),
                }
            })
            .collect();
        let route_summaries = routes
            .iter()
            .map(|(id, _, sum, count)| RouteSummary {
                route_id: id.clone(),
                mean_throughput_mbps: if *count > 0 { sum / *count as f64 } else { 0.0 },
            })
            .collect();
        let power = pc.last_assignment.as_ref().map(|assignment| PowerSummary {
            rounds_to_converge: pc.rounds_to_converge,
            converged: pc.rounds_to_converge.is_some(),
            convergence_s: pc.convergence_s,
            final_cca_dbm: assignment.per_node.iter().map(|s| s.cca_dbm).collect(),
        });
        Ok(RunSummary {
            seed: cfg.seed,
            duration_s: cfg.duration_s,
            links: link_summaries,
            routes: route_summaries,
            power,
            controller_events: events,
            config: cfg.clone(),
        })
    }
}

fn apply_assignment(
    assignment: &CcaAssignment,
    node_idx: &BTreeMap<&str, usize>,
    cfg: &ScenarioConfig,
    links: &mut [LinkRuntime],
) {
    for (i, link_cfg) in cfg.links.iter().enumerate() {
        if let Some(&n) = link_cfg
            .tx_node
            .as_deref()
            .and_then(|name| node_idx.get(name))
        {
            if let Some(setting) = assignment.per_node.get(n) {
                links[i].cca_tx_dbm = setting.cca_dbm;
            }
        }
        if let Some(&n) = link_cfg
            .rx_node
            .as_deref()
            .and_then(|name| node_idx.get(name))
        {
            if let Some(setting) = assignment.per_node.get(n) {
                links[i].cca_rx_dbm = setting.cca_dbm;
            }
        }
    }
}

/// Detector scoring: each true phase change is matched to the next
/// detector transition in the same direction; latency is measured from the
/// first window boundary at or after the change (the earliest instant the
/// windowed detector could react).
fn score_detector(
    truth: &[(f64, JamTransition)],
    detected: &[(f64, JamTransition)],
    window_s: f64,
    false_positive_windows: u64,
) -> DetectorScore {
    let mut used = vec![false; detected.len()];
    let mut latencies = Vec::new();
    for (k, &(t, direction)) in truth.iter().enumerate() {
        let boundary = ((t - 1e-9) / window_s).ceil() * window_s;
        // A flip only counts for this transition if it lands before the truth
        // state changes again; later flips describe the next episode.
        let horizon = truth.get(k + 1).map_or(f64::INFINITY, |&(next, _)| next);
        let hit = detected.iter().enumerate().find(|(i, (dt, dd))| {
            !used[*i] && *dd == direction && *dt >= t - 1e-9 && *dt < horizon + window_s
        });
        if let Some((i, (dt, _))) = hit {
            used[i] = true;
            latencies.push((dt - boundary).max(0.0));
        }
    }
    let mean = if latencies.is_empty() {
        None
    } else {
        Some(latencies.iter().sum::<f64>() / latencies.len() as f64)
    };
    let max = latencies.iter().cloned().fold(None, |acc: Option<f64>, l| {
        Some(acc.map_or(l, |a| a.max(l)))
    });
    DetectorScore {
        true_transitions: truth.len() as u64,
        detected_transitions: detected.len() as u64,
        false_positive_windows,
        mean_latency_s: mean,
        max_latency_s: max,
    }
}

/// Convenience wrapper: compile and run in one call.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    Engine::new(cfg.clone())?.run()
}

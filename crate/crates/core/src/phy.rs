//! Radio-layer model: RSSI bookkeeping, SINR capture, clear-channel
//! assessment, and the rate table.
//!
//! All signal powers are carried in dBm and combined in the linear (mW)
//! domain. The capture model is SINR-only: a frame is decodable when the
//! desired signal clears the receiver's CCA threshold *and* the SINR clears
//! the per-rate decode threshold. There is no preamble-timing component.
//!
//! The default [`RateTable`] is the 802.11a ladder with measured saturation
//! goodputs (MAC overhead caps the top rates near 27 Mbps) and per-rate SINR
//! decode thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default receiver noise floor.
pub const DEFAULT_NOISE_FLOOR_DBM: f64 = -95.0;
/// Factory CCA (carrier-sense) threshold used before any tuning.
pub const DEFAULT_CCA_DBM: f64 = -80.0;
/// Default transmit power.
pub const DEFAULT_TX_POWER_DBM: f64 = 18.0;

/// Converts dBm to linear milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Converts linear milliwatts back to dBm.
#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Signal-to-interference-plus-noise ratio in dB.
///
/// The denominator is the linear sum of the noise floor and every interferer;
/// an empty interferer list degenerates to plain SNR.
pub fn sinr_db(signal_dbm: f64, interferers_dbm: &[f64], noise_floor_dbm: f64) -> f64 {
    let mut denom_mw = dbm_to_mw(noise_floor_dbm);
    for &i in interferers_dbm {
        denom_mw += dbm_to_mw(i);
    }
    mw_to_dbm(dbm_to_mw(signal_dbm) / denom_mw)
}

/// One rung of the rate ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    /// Nominal PHY rate in Mbps (the value a driver would configure).
    pub nominal_mbps: f64,
    /// Long-run saturation goodput at this rate on a clean channel.
    pub saturated_mbps: f64,
    /// Minimum SINR (dB) at which frames at this rate decode.
    pub sinr_threshold_db: f64,
}

/// Ordered rate ladder with saturation goodputs and decode thresholds.
///
/// Invariants (enforced on construction and deserialization): at least one
/// entry, nominal rates strictly increasing, saturated goodputs and SINR
/// thresholds non-decreasing, and `saturated ≤ nominal` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRateTable", into = "RawRateTable")]
pub struct RateTable {
    entries: Vec<RateEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRateTable {
    entries: Vec<RateEntry>,
}

impl TryFrom<RawRateTable> for RateTable {
    type Error = Error;
    fn try_from(raw: RawRateTable) -> Result<Self> {
        RateTable::new(raw.entries)
    }
}

impl From<RateTable> for RawRateTable {
    fn from(t: RateTable) -> Self {
        RawRateTable { entries: t.entries }
    }
}

impl Default for RateTable {
    fn default() -> Self {
        Self::default_80211a()
    }
}

impl RateTable {
    /// Builds a table after checking the ladder invariants.
    pub fn new(entries: Vec<RateEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidTable("table has no entries".into()));
        }
        for e in &entries {
            if !(e.nominal_mbps > 0.0) || !(e.saturated_mbps > 0.0) {
                return Err(Error::InvalidTable(format!(
                    "rates must be positive (got nominal {} / saturated {})",
                    e.nominal_mbps, e.saturated_mbps
                )));
            }
            if e.saturated_mbps > e.nominal_mbps {
                return Err(Error::InvalidTable(format!(
                    "saturated goodput {} exceeds nominal rate {}",
                    e.saturated_mbps, e.nominal_mbps
                )));
            }
        }
        for w in entries.windows(2) {
            if w[1].nominal_mbps <= w[0].nominal_mbps {
                return Err(Error::InvalidTable(
                    "nominal rates must be strictly increasing".into(),
                ));
            }
            if w[1].saturated_mbps < w[0].saturated_mbps {
                return Err(Error::InvalidTable(
                    "saturated goodputs must be non-decreasing".into(),
                ));
            }
            if w[1].sinr_threshold_db < w[0].sinr_threshold_db {
                return Err(Error::InvalidTable(
                    "SINR thresholds must be non-decreasing".into(),
                ));
            }
        }
        Ok(RateTable { entries })
    }

    /// The 802.11a ladder: nominal / saturation / SINR decode threshold.
    pub fn default_80211a() -> Self {
        let rows = [
            (6.0, 6.0, 6.0),
            (9.0, 9.0, 7.8),
            (12.0, 12.0, 9.0),
            (18.0, 18.0, 10.8),
            (24.0, 24.0, 17.0),
            (36.0, 26.0, 18.8),
            (48.0, 27.0, 24.0),
            (54.0, 27.0, 24.6),
        ];
        RateTable {
            entries: rows
                .iter()
                .map(|&(n, s, t)| RateEntry {
                    nominal_mbps: n,
                    saturated_mbps: s,
                    sinr_threshold_db: t,
                })
                .collect(),
        }
    }

    pub fn entries(&self) -> &[RateEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of a nominal rate, or `Error::UnknownRate`.
    pub fn index_of(&self, nominal_mbps: f64) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| (e.nominal_mbps - nominal_mbps).abs() < 1e-9)
            .ok_or(Error::UnknownRate(nominal_mbps))
    }

    pub fn entry(&self, nominal_mbps: f64) -> Result<&RateEntry> {
        Ok(&self.entries[self.index_of(nominal_mbps)?])
    }

    pub fn saturated(&self, nominal_mbps: f64) -> Result<f64> {
        Ok(self.entry(nominal_mbps)?.saturated_mbps)
    }

    pub fn sinr_threshold(&self, nominal_mbps: f64) -> Result<f64> {
        Ok(self.entry(nominal_mbps)?.sinr_threshold_db)
    }

    /// Lowest nominal rate (the ladder floor).
    pub fn lowest(&self) -> f64 {
        self.entries[0].nominal_mbps
    }

    /// Highest nominal rate (the ladder top).
    pub fn highest(&self) -> f64 {
        self.entries[self.entries.len() - 1].nominal_mbps
    }

    /// Next rung up; saturates at the top of the ladder.
    pub fn step_up(&self, nominal_mbps: f64) -> Result<f64> {
        let i = self.index_of(nominal_mbps)?;
        Ok(self.entries[(i + 1).min(self.entries.len() - 1)].nominal_mbps)
    }

    /// Next rung down; saturates at the floor.
    pub fn step_down(&self, nominal_mbps: f64) -> Result<f64> {
        let i = self.index_of(nominal_mbps)?;
        Ok(self.entries[i.saturating_sub(1)].nominal_mbps)
    }

    /// Lowest nominal rate that can carry an offered load: `min{R ≥ load}`.
    pub fn fixed_rate_for(&self, offered_mbps: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| e.nominal_mbps >= offered_mbps)
            .map(|e| e.nominal_mbps)
            .ok_or(Error::NoRateForLoad(offered_mbps))
    }

    /// Entries strictly below a nominal rate, in ascending order.
    pub fn rates_below(&self, nominal_mbps: f64) -> Result<&[RateEntry]> {
        let i = self.index_of(nominal_mbps)?;
        Ok(&self.entries[..i])
    }
}

/// Static radio parameters of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    /// Carrier-sense threshold: energy at or above this defers transmission.
    pub cca_threshold_dbm: f64,
    pub noise_floor_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            tx_power_dbm: DEFAULT_TX_POWER_DBM,
            cca_threshold_dbm: DEFAULT_CCA_DBM,
            noise_floor_dbm: DEFAULT_NOISE_FLOOR_DBM,
        }
    }
}

/// RSSI observations for one link/jammer triple, all in dBm.
///
/// `tr`/`rt` are the two directions of the legitimate link; `jt`/`jr` are the
/// jammer as heard at the transmitter and at the receiver. RSSI values are
/// inputs to the model, not derived from geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RssiMatrix {
    /// Transmitter as heard at the receiver.
    pub tr: f64,
    /// Receiver as heard at the transmitter.
    pub rt: f64,
    /// Jammer as heard at the transmitter.
    pub jt: f64,
    /// Jammer as heard at the receiver.
    pub jr: f64,
}

impl RssiMatrix {
    /// Weakest direction of the legitimate link.
    pub fn min_legit(&self) -> f64 {
        self.tr.min(self.rt)
    }

    /// Strongest jammer observation on either end.
    pub fn max_jam(&self) -> f64 {
        self.jt.max(self.jr)
    }
}

/// Carrier-sense verdict: energy at or above the CCA threshold reads busy.
///
/// A radio with its CCA forced to 0 dBm is effectively deaf and never defers
/// to any realistic incident power.
pub fn medium_busy(radio: &RadioConfig, incident_rssi_dbm: f64) -> bool {
    incident_rssi_dbm >= radio.cca_threshold_dbm
}

/// Whether a frame at `rate` is captured at the receiver.
///
/// Requires the desired signal to clear the receiver CCA threshold and the
/// SINR (against the given interferers plus the noise floor) to clear the
/// per-rate decode threshold.
pub fn can_capture(
    receiver: &RadioConfig,
    desired_dbm: f64,
    interferers_dbm: &[f64],
    rate_mbps: f64,
    table: &RateTable,
) -> Result<bool> {
    let threshold = table.sinr_threshold(rate_mbps)?;
    if desired_dbm < receiver.cca_threshold_dbm {
        return Ok(false);
    }
    Ok(sinr_db(desired_dbm, interferers_dbm, receiver.noise_floor_dbm) >= threshold)
}

/// Decode probability with an optional logistic smoothing width (dB).
///
/// A width of 0 is the hard step used by [`can_capture`]; positive widths
/// soften the transition around the threshold (0.5 exactly at the threshold).
pub fn decode_prob(sinr_db: f64, threshold_db: f64, smoothing_db: f64) -> f64 {
    if smoothing_db <= 0.0 {
        if sinr_db >= threshold_db {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 / (1.0 + (-(sinr_db - threshold_db) / smoothing_db).exp())
    }
}

/// Packet delivery ratio of a slot: the link's base PDR gated by capture.
pub fn pdr(base_pdr: f64, captured: bool) -> f64 {
    if captured {
        base_pdr
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn dbm_round_trip_is_exact_enough() {
        for dbm in [-120.0, -95.0, -60.0, -1.0, 0.0, 18.0, 30.0] {
            assert_relative_eq!(mw_to_dbm(dbm_to_mw(dbm)), dbm, epsilon = 1e-9);
        }
    }

    #[test]
    fn sinr_matches_linear_domain_oracle() {
        // 50-digit decimal evaluation of 1e-6 / (1e-7 + 10^-9.5).
        let got = sinr_db(-60.0, &[-70.0], -95.0);
        assert_relative_eq!(got, 9.986288071673165, epsilon = 1e-9);
    }

    #[test]
    fn sinr_without_interferers_is_snr() {
        assert_relative_eq!(sinr_db(-60.0, &[], -95.0), 35.0, epsilon = 1e-9);
    }

    #[test]
    fn default_table_matches_published_ladder() {
        let t = RateTable::default_80211a();
        assert_eq!(t.len(), 8);
        assert_eq!(t.lowest(), 6.0);
        assert_eq!(t.highest(), 54.0);
        assert_eq!(t.saturated(36.0).unwrap(), 26.0);
        assert_eq!(t.saturated(54.0).unwrap(), 27.0);
        assert_eq!(t.sinr_threshold(36.0).unwrap(), 18.8);
        assert_eq!(t.sinr_threshold(54.0).unwrap(), 24.6);
    }

    #[test]
    fn fixed_rate_selection_rounds_up() {
        let t = RateTable::default_80211a();
        assert_eq!(t.fixed_rate_for(40.5).unwrap(), 48.0);
        assert_eq!(t.fixed_rate_for(54.0).unwrap(), 54.0);
        assert_eq!(t.fixed_rate_for(0.1).unwrap(), 6.0);
        assert!(matches!(
            t.fixed_rate_for(55.0),
            Err(Error::NoRateForLoad(_))
        ));
    }

    #[test]
    fn ladder_steps_clamp_at_both_ends() {
        let t = RateTable::default_80211a();
        assert_eq!(t.step_up(54.0).unwrap(), 54.0);
        assert_eq!(t.step_up(6.0).unwrap(), 9.0);
        assert_eq!(t.step_down(6.0).unwrap(), 6.0);
        assert_eq!(t.step_down(54.0).unwrap(), 48.0);
    }

    #[test]
    fn table_invariants_are_enforced() {
        let bad = vec![
            RateEntry {
                nominal_mbps: 12.0,
                saturated_mbps: 12.0,
                sinr_threshold_db: 9.0,
            },
            RateEntry {
                nominal_mbps: 6.0,
                saturated_mbps: 6.0,
                sinr_threshold_db: 6.0,
            },
        ];
        assert!(RateTable::new(bad).is_err());
        assert!(RateTable::new(vec![]).is_err());
        let sat_above_nominal = vec![RateEntry {
            nominal_mbps: 6.0,
            saturated_mbps: 7.0,
            sinr_threshold_db: 6.0,
        }];
        assert!(RateTable::new(sat_above_nominal).is_err());
    }

    #[test]
    fn deaf_radio_never_defers() {
        let jammer_radio = RadioConfig {
            cca_threshold_dbm: 0.0,
            ..RadioConfig::default()
        };
        // -1 dBm incident is already an extreme over-the-air power.
        assert!(!medium_busy(&jammer_radio, -1.0));
        let stock = RadioConfig::default();
        assert!(medium_busy(&stock, -70.0));
        assert!(!medium_busy(&stock, -90.0));
    }

    #[test]
    fn capture_needs_both_cca_and_sinr() {
        let t = RateTable::default_80211a();
        let rx = RadioConfig::default();
        // SINR ≈ 2 dB: below every decode threshold.
        assert!(!can_capture(&rx, -50.0, &[-52.0], 54.0, &t).unwrap());
        assert!(!can_capture(&rx, -50.0, &[-52.0], 6.0, &t).unwrap());
        // Clean 30 dB margin decodes the top rate.
        assert!(can_capture(&rx, -40.0, &[-70.0], 54.0, &t).unwrap());
        // Strong SINR but below the CCA threshold: not captured.
        assert!(!can_capture(&rx, -85.0, &[], 6.0, &t).unwrap());
        assert!(can_capture(&rx, -79.0, &[], 6.0, &t).unwrap());
    }

    #[test]
    fn decode_prob_step_and_logistic() {
        assert_eq!(decode_prob(10.0, 9.0, 0.0), 1.0);
        assert_eq!(decode_prob(8.9, 9.0, 0.0), 0.0);
        assert_relative_eq!(decode_prob(9.0, 9.0, 2.0), 0.5, epsilon = 1e-12);
        assert!(decode_prob(30.0, 9.0, 2.0) > 0.999);
        assert!(decode_prob(-10.0, 9.0, 2.0) < 0.001);
    }

    #[test]
    fn pdr_gates_on_capture() {
        assert_eq!(pdr(0.8, true), 0.8);
        assert_eq!(pdr(0.8, false), 0.0);
    }

    proptest! {
        #[test]
        fn prop_dbm_round_trip(dbm in -120.0f64..30.0) {
            prop_assert!((mw_to_dbm(dbm_to_mw(dbm)) - dbm).abs() < 1e-9);
        }

        #[test]
        fn prop_interference_only_hurts(
            sig in -90.0f64..-30.0,
            intf in -95.0f64..-30.0,
        ) {
            let clean = sinr_db(sig, &[], DEFAULT_NOISE_FLOOR_DBM);
            let dirty = sinr_db(sig, &[intf], DEFAULT_NOISE_FLOOR_DBM);
            prop_assert!(dirty < clean);
        }

        #[test]
        fn prop_capture_monotone_in_rate(
            sig in -79.0f64..-30.0,
            intf in -95.0f64..-30.0,
            hi in 0usize..8,
            lo in 0usize..8,
        ) {
            prop_assume!(lo <= hi);
            let t = RateTable::default_80211a();
            let rx = RadioConfig::default();
            let r_hi = t.entries()[hi].nominal_mbps;
            let r_lo = t.entries()[lo].nominal_mbps;
            if can_capture(&rx, sig, &[intf], r_hi, &t).unwrap() {
                prop_assert!(can_capture(&rx, sig, &[intf], r_lo, &t).unwrap());
            }
        }
    }
}

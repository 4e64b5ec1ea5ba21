//! Closed-form throughput model for a link under a cycling jammer, and the
//! break-even PDR analysis built on it.
//!
//! The jammer alternates sleep phases (mean `E[t_s]`) and active phases
//! (mean `E[t_j]`); `F` is the goodput the link still achieves while the
//! jammer is on. Long-run throughputs over one mean cycle:
//!
//! * **Fixed policy** at the lowest rate carrying the offered load:
//!   `(E[t_s]·PDR_f·R_s + E[t_j]·F) / (E[t_s]+E[t_j])`, with `R_s` the
//!   saturation goodput of the chosen rate.
//! * **Adaptive policy**: after every active phase the ladder restarts at the
//!   floor and climbs. If the climb (`x = Σ y`) completes inside the sleep
//!   phase the remainder runs at the converged goodput `R_s`; otherwise the
//!   sleep phase ends mid-climb and the partial rung sequence is summed.
//!   Intermediate rungs are weighted by their saturation goodput times the
//!   link's PDR at that rung (1.0 below the chosen rate under the hard-step
//!   margin model). The converged term is `R_s` bare: a converged adaptive
//!   sender settles on a rate it can sustain.
//!
//! Both expressions share the `E[t_j]·F` term, so the break-even PDR
//! (below which adaptation wins) reduces to the adaptive sleep-phase goodput
//! relative to `E[t_s]·R_s`; it is found by bisection to 1e-4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jammer::JammerProfile;
use crate::phy::RateTable;
use crate::rate::DwellProfile;

/// Mean phase durations of a cycling jammer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerMoments {
    pub e_sleep_s: f64,
    pub e_active_s: f64,
}

impl JammerMoments {
    pub fn new(e_sleep_s: f64, e_active_s: f64) -> Result<Self> {
        if !(e_sleep_s >= 0.0) || !(e_active_s >= 0.0) || e_sleep_s + e_active_s <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "phase means must be non-negative with a positive cycle (got sleep {e_sleep_s}, active {e_active_s})"
            )));
        }
        Ok(JammerMoments {
            e_sleep_s,
            e_active_s,
        })
    }

    /// Moments of a cycling profile; always-on or reactive kinds have no
    /// cycle and are rejected.
    pub fn from_profile(profile: &JammerProfile) -> Result<Self> {
        Self::new(profile.mean_sleep_s(), profile.mean_active_s())
    }

    pub fn cycle_s(&self) -> f64 {
        self.e_sleep_s + self.e_active_s
    }
}

/// Everything the closed forms need about one (link, jammer) pair.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticInputs<'a> {
    pub moments: JammerMoments,
    /// Offered application load; the fixed policy pins `min{R ≥ R_a}`.
    pub r_a_mbps: f64,
    /// Link PDR at the fixed rate.
    pub pdr_f: f64,
    /// Goodput while the jammer is active.
    pub f_mbps: f64,
    pub dwell: &'a DwellProfile,
    pub table: &'a RateTable,
}

impl AnalyticInputs<'_> {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pdr_f) {
            return Err(Error::InvalidInput(format!(
                "pdr_f must be within [0, 1], got {}",
                self.pdr_f
            )));
        }
        if !(self.f_mbps >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "jammed-phase goodput must be non-negative, got {}",
                self.f_mbps
            )));
        }
        Ok(())
    }

    /// The fixed rate and its saturation goodput.
    fn fixed(&self) -> Result<(f64, f64)> {
        let rate = self.table.fixed_rate_for(self.r_a_mbps)?;
        Ok((rate, self.table.saturated(rate)?))
    }
}

/// Link classification against the break-even PDR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// Fixed rate is at least as good: keep the pinned rate.
    Lossless,
    /// Loss at the fixed rate is high enough that adaptation wins.
    Lossy,
}

/// Break-even PDR plus whether the two curves genuinely cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub pdr: f64,
    /// False when the policies coincide for every PDR (degenerate ladder).
    pub crossing: bool,
}

/// Long-run throughput of the fixed policy.
pub fn t_fixed(inputs: &AnalyticInputs) -> Result<f64> {
    inputs.validate()?;
    let (_, r_s) = inputs.fixed()?;
    let m = inputs.moments;
    Ok((m.e_sleep_s * inputs.pdr_f * r_s + m.e_active_s * inputs.f_mbps) / m.cycle_s())
}

/// Adaptive sleep-phase goodput integrated over one mean sleep phase.
///
/// Returns `None` when the ladder has no rungs below the fixed rate (the
/// degenerate case where adaptation cannot differ from the fixed policy).
fn adaptive_sleep_part(inputs: &AnalyticInputs) -> Result<Option<f64>> {
    let (fixed_rate, r_s) = inputs.fixed()?;
    let rungs = inputs.table.rates_below(fixed_rate)?;
    if rungs.is_empty() {
        return Ok(None);
    }
    let e_s = inputs.moments.e_sleep_s;
    // Intermediate goodput: saturation × PDR at the rung; below the fixed
    // rate the hard-step margin model gives PDR 1.
    let goodputs: Vec<f64> = rungs.iter().map(|e| e.saturated_mbps).collect();
    let dwells: Vec<f64> = rungs
        .iter()
        .map(|e| inputs.dwell.y_for(e.nominal_mbps))
        .collect();
    let x: f64 = dwells.iter().sum();

    let sleep_part = if x < e_s {
        // Climb completes: remainder of the sleep phase at the converged
        // goodput R_s.
        let climb: f64 = dwells.iter().zip(&goodputs).map(|(y, g)| y * g).sum();
        (e_s - x) * r_s + climb
    } else {
        // Sleep ends mid-climb: full rungs while they fit, the residual time
        // at the next rung (or at R_s if every rung fit exactly).
        let mut served = 0.0;
        let mut part = 0.0;
        let mut idx = 0;
        while idx < dwells.len() && served + dwells[idx] <= e_s {
            part += dwells[idx] * goodputs[idx];
            served += dwells[idx];
            idx += 1;
        }
        let next_goodput = if idx < goodputs.len() {
            goodputs[idx]
        } else {
            r_s
        };
        part + (e_s - served) * next_goodput
    };
    Ok(Some(sleep_part))
}

/// Long-run throughput of the adaptive policy (restart-and-climb after every
/// active phase). Degenerates to [`t_fixed`] when the ladder has no rungs
/// below the fixed rate.
pub fn t_adapt(inputs: &AnalyticInputs) -> Result<f64> {
    inputs.validate()?;
    match adaptive_sleep_part(inputs)? {
        None => t_fixed(inputs),
        Some(sleep_part) => {
            let m = inputs.moments;
            Ok((sleep_part + m.e_active_s * inputs.f_mbps) / m.cycle_s())
        }
    }
}

/// Break-even PDR at the fixed rate: below it adaptation outperforms the
/// pinned rate. Found by bisection to an absolute resolution of 1e-4.
///
/// The `pdr_f` field of the inputs is ignored (it is the unknown).
pub fn pdr_threshold(inputs: &AnalyticInputs) -> Result<ThresholdResult> {
    if adaptive_sleep_part(inputs)?.is_none() {
        // Adaptation cannot differ from fixed: no crossing, fixed preferred.
        return Ok(ThresholdResult {
            pdr: 0.0,
            crossing: false,
        });
    }
    let diff = |p: f64| -> Result<f64> {
        let probe = AnalyticInputs {
            pdr_f: p,
            ..*inputs
        };
        Ok(t_fixed(&probe)? - t_adapt(&probe)?)
    };
    // t_fixed is increasing in PDR while t_adapt is constant, so the sign
    // change (if any) is bracketed by [0, 1].
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if diff(hi)? < 0.0 {
        return Ok(ThresholdResult {
            pdr: 1.0,
            crossing: false,
        });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if diff(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        pdr: 0.5 * (lo + hi),
        crossing: true,
    })
}

/// Classifies a link at its measured `pdr_f`: lossy when the fixed policy
/// does not beat adaptation (ties go to adaptation), except in the
/// degenerate no-rungs case where the two policies coincide and the simpler
/// fixed policy is preferred.
pub fn classify_link(inputs: &AnalyticInputs) -> Result<LinkClass> {
    if adaptive_sleep_part(inputs)?.is_none() {
        return Ok(LinkClass::Lossless);
    }
    if t_fixed(inputs)? <= t_adapt(inputs)? {
        Ok(LinkClass::Lossy)
    } else {
        Ok(LinkClass::Lossless)
    }
}

//! Discrete-time simulator of 802.11 links under jamming, with a
//! measurement-driven anti-jamming controller.
//!
//! The crate is organised bottom-up:
//!
//! - [`phy`] — dB/linear conversions, SINR, rate tables, carrier sense and
//!   capture.
//! - [`jammer`] — jammer profiles (constant, deceptive, random, reactive),
//!   phase machines, emission patterns and mobility offsets.
//! - [`detect`] — the windowed starvation+loudness jamming detector.
//! - [`rate`] — dwell profiles, the probing rate ladder and the
//!   memory/rescan controller built on top of it.
//! - [`analytics`] — closed-form fixed vs. adaptive throughput under a
//!   cycling jammer and the PDR threshold that separates the two regimes.
//! - [`power`] — CCA/power tuning: the single-link rule, the network-wide
//!   centralized assignment and the gossip-based distributed variant.
//! - [`controller`] — the reactive mitigation state machine (power first,
//!   rate module on residual deficit, hold-down restore).
//! - [`scenario`] — the TOML scenario schema with strict validation.
//! - [`engine`] — the deterministic slot-based simulation loop.
//! - [`trace`] — CSV/JSON output schemas with byte-stable formatting.

pub mod analytics;
pub mod controller;
pub mod detect;
pub mod engine;
pub mod error;
pub mod jammer;
pub mod phy;
pub mod power;
pub mod rate;
pub mod scenario;
pub mod trace;

pub use error::{Error, Result};

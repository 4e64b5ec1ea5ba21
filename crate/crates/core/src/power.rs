//! Power / carrier-sense control: raising the CCA threshold above the
//! jammer so legitimate senders stop deferring to it.
//!
//! The single-link rule: when the strongest jammer observation sits at least
//! `Δ` below the weakest leg of the link, the CCA can be raised to
//! `min(RSSI_TR, RSSI_RT) − Δ` — above the jammer, below the link. When the
//! jammer clears that weakest leg by `2Δ`, the tuned threshold additionally
//! exceeds the jammer by `≥ Δ`, which is the fully jamming-free regime.
//!
//! Network-wide, the **centralized** assignment picks the highest CCA that
//! keeps *every* link connected (the minimum over links of the per-link
//! value) and pins transmit power to the maximum, keeping `P + CCA` uniform.
//! The **distributed** variant reaches the same fixed point by gossip: every
//! beacon period each node re-broadcasts the link observations it knows, and
//! each beacon is independently lost with a per-receiver probability (driven
//! by how loud and how busy the jammer is at that receiver). CCA values are
//! only ever raised, never pushed below the radio default.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};
use crate::phy::{RssiMatrix, DEFAULT_CCA_DBM, DEFAULT_TX_POWER_DBM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerControlMode {
    Off,
    Centralized,
    Distributed,
}

/// Tuning for the power-control module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerControlConfig {
    pub mode: PowerControlMode,
    /// Safety margin Δ between the tuned CCA and the link RSSI.
    pub delta_db: f64,
    /// Transmit power every node is pinned to while tuned.
    pub max_power_dbm: f64,
    /// Factory CCA threshold; tuning never goes below it.
    pub default_cca_dbm: f64,
    /// Gossip period of the distributed variant.
    pub beacon_period_s: f64,
}

impl Default for PowerControlConfig {
    fn default() -> Self {
        PowerControlConfig {
            mode: PowerControlMode::Off,
            delta_db: 5.0,
            max_power_dbm: DEFAULT_TX_POWER_DBM,
            default_cca_dbm: DEFAULT_CCA_DBM,
            beacon_period_s: 0.1,
        }
    }
}

impl PowerControlConfig {
    pub fn validate(&self, path: &str, report: &mut ValidationReport) {
        if !(self.delta_db > 0.0) {
            report.push(format!("{path}.delta_db"), "margin must be positive");
        }
        if !(self.beacon_period_s > 0.0) {
            report.push(format!("{path}.beacon_period_s"), "period must be positive");
        }
    }
}

/// Single-link CCA rule. Returns the tuned threshold when the jammer guard
/// passes, otherwise leaves the current threshold untouched.
pub fn cca_rule(rssi: &RssiMatrix, delta_db: f64, current_cca_dbm: f64) -> f64 {
    let candidate = rssi.min_legit() - delta_db;
    if rssi.max_jam() <= candidate {
        candidate
    } else {
        current_cca_dbm
    }
}

/// One node's tuned operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSetting {
    pub cca_dbm: f64,
    pub tx_power_dbm: f64,
}

/// Per-node CCA/power assignment for one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaAssignment {
    pub per_node: Vec<NodeSetting>,
}

impl CcaAssignment {
    pub fn uniform(node_count: usize, setting: NodeSetting) -> Self {
        CcaAssignment {
            per_node: vec![setting; node_count],
        }
    }

    /// Whether `P + CCA` (in dB) is uniform across nodes — the invariant the
    /// network-wide assignment maintains once converged.
    pub fn power_cca_sum_uniform(&self) -> bool {
        let mut sums = self
            .per_node
            .iter()
            .map(|s| s.tx_power_dbm + s.cca_dbm);
        match sums.next() {
            None => true,
            Some(first) => sums.all(|s| (s - first).abs() < 1e-9),
        }
    }
}

/// Network-wide assignment with global knowledge: the highest CCA that keeps
/// every link connected, uniform across nodes, power pinned to the maximum.
pub fn centralized_assign(
    links: &[RssiMatrix],
    node_count: usize,
    cfg: &PowerControlConfig,
) -> Result<CcaAssignment> {
    if links.is_empty() {
        return Err(Error::InvalidInput(
            "centralized assignment needs at least one link".into(),
        ));
    }
    let weakest = links
        .iter()
        .map(|m| m.min_legit())
        .fold(f64::INFINITY, f64::min);
    let cca = (weakest - cfg.delta_db).max(cfg.default_cca_dbm);
    Ok(CcaAssignment::uniform(
        node_count,
        NodeSetting {
            cca_dbm: cca,
            tx_power_dbm: cfg.max_power_dbm,
        },
    ))
}

/// Gossip state of the distributed assignment: which link observations each
/// node has heard so far.
#[derive(Debug, Clone)]
pub struct DistributedState {
    link_min_rssi: Vec<f64>,
    /// `views[node][link]`: node knows that link's observation.
    views: Vec<Vec<bool>>,
    /// Beacon reachability graph (who hears whose beacons).
    adjacency: Vec<Vec<usize>>,
    rounds: u64,
}

impl DistributedState {
    /// `links` are `(node_a, node_b, min_legit_rssi)` triples; each endpoint
    /// starts out knowing its own links. `adjacency[n]` lists the nodes that
    /// hear node `n`'s beacons.
    pub fn new(
        node_count: usize,
        links: &[(usize, usize, f64)],
        adjacency: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if adjacency.len() != node_count {
            return Err(Error::InvalidInput(format!(
                "adjacency has {} rows for {} nodes",
                adjacency.len(),
                node_count
            )));
        }
        let mut views = vec![vec![false; links.len()]; node_count];
        for (i, &(a, b, _)) in links.iter().enumerate() {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidInput(format!(
                    "link {i} references a node outside 0..{node_count}"
                )));
            }
            views[a][i] = true;
            views[b][i] = true;
        }
        Ok(DistributedState {
            link_min_rssi: links.iter().map(|&(_, _, r)| r).collect(),
            views,
            adjacency,
            rounds: 0,
        })
    }

    /// Fully connected beacon graph over `n` nodes.
    pub fn full_mesh_adjacency(n: usize) -> Vec<Vec<usize>> {
        (0..n)
            .map(|u| (0..n).filter(|&v| v != u).collect())
            .collect()
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Whether every node has heard every link observation.
    pub fn converged(&self) -> bool {
        self.views.iter().all(|v| v.iter().all(|&k| k))
    }

    fn node_setting(&self, node: usize, cfg: &PowerControlConfig) -> NodeSetting {
        let weakest = self.views[node]
            .iter()
            .zip(&self.link_min_rssi)
            .filter(|(known, _)| **known)
            .map(|(_, &r)| r)
            .fold(f64::INFINITY, f64::min);
        let cca = if weakest.is_finite() {
            (weakest - cfg.delta_db).max(cfg.default_cca_dbm)
        } else {
            cfg.default_cca_dbm
        };
        NodeSetting {
            cca_dbm: cca,
            tx_power_dbm: cfg.max_power_dbm,
        }
    }

    /// Current per-node assignment from each node's partial view.
    pub fn assignment(&self, cfg: &PowerControlConfig) -> CcaAssignment {
        CcaAssignment {
            per_node: (0..self.views.len())
                .map(|n| self.node_setting(n, cfg))
                .collect(),
        }
    }
}

/// One synchronous gossip round. Every node broadcasts its start-of-round
/// view; the beacon toward each neighbor is independently lost with the
/// receiver's loss probability. Returns the post-round assignment and
/// whether the network has converged to the global view.
pub fn distributed_round(
    state: &mut DistributedState,
    beacon_loss: &[f64],
    cfg: &PowerControlConfig,
    rng: &mut impl Rng,
) -> (CcaAssignment, bool) {
    let old = state.views.clone();
    for u in 0..old.len() {
        for &v in &state.adjacency[u] {
            let loss = beacon_loss.get(v).copied().unwrap_or(0.0);
            if rng.gen::<f64>() < loss {
                continue;
            }
            for i in 0..state.link_min_rssi.len() {
                if old[u][i] {
                    state.views[v][i] = true;
                }
            }
        }
    }
    state.rounds += 1;
    (state.assignment(cfg), state.converged())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> PowerControlConfig {
        PowerControlConfig {
            mode: PowerControlMode::Distributed,
            ..PowerControlConfig::default()
        }
    }

    #[test]
    fn cca_rule_tunes_when_jammer_clears_the_margin() {
        let m = RssiMatrix {
            tr: -40.0,
            rt: -42.0,
            jt: -60.0,
            jr: -65.0,
        };
        assert_relative_eq!(cca_rule(&m, 5.0, DEFAULT_CCA_DBM), -47.0);
    }

    #[test]
    fn cca_rule_refuses_when_jammer_is_too_close() {
        let m = RssiMatrix {
            tr: -40.0,
            rt: -42.0,
            jt: -44.0,
            jr: -65.0,
        };
        // -44 > -47: tuning would not clear the jammer; keep the current value.
        assert_relative_eq!(cca_rule(&m, 5.0, DEFAULT_CCA_DBM), DEFAULT_CCA_DBM);
    }

    #[test]
    fn two_delta_clearance_puts_cca_above_jammer_by_delta() {
        let delta = 5.0;
        for jam in [-90.0f64, -70.0, -52.0] {
            let m = RssiMatrix {
                tr: -40.0,
                rt: -42.0,
                jt: jam,
                jr: jam - 3.0,
            };
            if m.max_jam() <= m.min_legit() - 2.0 * delta {
                let tuned = cca_rule(&m, delta, DEFAULT_CCA_DBM);
                assert!(tuned - m.max_jam() >= delta);
            }
        }
    }

    #[test]
    fn centralized_uses_the_weakest_link() {
        let links = [
            RssiMatrix { tr: -47.0, rt: -45.0, jt: -70.0, jr: -70.0 },
            RssiMatrix { tr: -53.0, rt: -55.0, jt: -70.0, jr: -70.0 },
        ];
        let a = centralized_assign(&links, 4, &cfg()).unwrap();
        assert_eq!(a.per_node.len(), 4);
        for s in &a.per_node {
            assert_relative_eq!(s.cca_dbm, -60.0);
        }
        assert!(a.power_cca_sum_uniform());
    }

    #[test]
    fn centralized_never_lowers_below_default() {
        // A link weaker than the factory CCA cannot drag the threshold down.
        let links = [RssiMatrix { tr: -90.0, rt: -90.0, jt: -99.0, jr: -99.0 }];
        let a = centralized_assign(&links, 2, &cfg()).unwrap();
        assert_relative_eq!(a.per_node[0].cca_dbm, DEFAULT_CCA_DBM);
        assert!(centralized_assign(&[], 2, &cfg()).is_err());
    }

    /// Chain of nodes 0-1-2-3-4 with one link per hop.
    fn chain_state() -> DistributedState {
        let links: Vec<(usize, usize, f64)> = (0..4).map(|i| (i, i + 1, -50.0 - i as f64)).collect();
        let mut adjacency = vec![Vec::new(); 5];
        for i in 0..4 {
            adjacency[i].push(i + 1);
            adjacency[i + 1].push(i);
        }
        DistributedState::new(5, &links, adjacency).unwrap()
    }

    #[test]
    fn lossless_gossip_reaches_centralized_fixed_point_in_hop_depth_rounds() {
        let cfg = cfg();
        let mut s = chain_state();
        let loss = vec![0.0; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut converged_at = None;
        for round in 1..=10 {
            let (_, done) = distributed_round(&mut s, &loss, &cfg, &mut rng);
            if done {
                converged_at = Some(round);
                break;
            }
        }
        // Each link observation starts at both endpoints, so the last node to
        // learn the far end of the chain is 3 hops from the nearer endpoint.
        assert_eq!(converged_at, Some(3));
        let final_assignment = s.assignment(&cfg);
        let links: Vec<RssiMatrix> = (0..4)
            .map(|i| RssiMatrix {
                tr: -50.0 - i as f64,
                rt: -40.0,
                jt: -99.0,
                jr: -99.0,
            })
            .collect();
        let central = centralized_assign(&links, 5, &cfg).unwrap();
        assert_eq!(final_assignment, central);
        assert!(final_assignment.power_cca_sum_uniform());
    }

    #[test]
    fn total_beacon_loss_blocks_convergence() {
        let cfg = cfg();
        let mut s = chain_state();
        // Node 4 never receives a beacon.
        let loss = vec![0.0, 0.0, 0.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..32 {
            let (_, done) = distributed_round(&mut s, &loss, &cfg, &mut rng);
            assert!(!done);
        }
    }

    #[test]
    fn access_point_chain_with_clients_converges_in_tenths_of_seconds() {
        // Five chained APs, two leaf clients each. The slowest spread is an
        // end AP's client link reaching the opposite end's clients: the AP
        // endpoint is 5 hops from them (observations seed both endpoints).
        let mut links: Vec<(usize, usize, f64)> = (0..4).map(|i| (i, i + 1, -55.0)).collect();
        let mut adjacency = vec![Vec::new(); 15];
        for i in 0..4 {
            adjacency[i].push(i + 1);
            adjacency[i + 1].push(i);
        }
        for c in 0..10 {
            let ap = c / 2;
            let client = 5 + c;
            links.push((ap, client, -60.0));
            adjacency[ap].push(client);
            adjacency[client].push(ap);
        }
        let mut s = DistributedState::new(15, &links, adjacency).unwrap();
        let cfg = cfg();
        let loss = vec![0.0; 15];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rounds = 0;
        for round in 1..=30 {
            let (_, done) = distributed_round(&mut s, &loss, &cfg, &mut rng);
            if done {
                rounds = round;
                break;
            }
        }
        assert_eq!(rounds, 5);
        // At a 100 ms beacon period this is order-of-magnitude ~1 s.
        let seconds = rounds as f64 * cfg.beacon_period_s;
        assert!((0.4..=2.0).contains(&seconds), "convergence {seconds} s");
    }

    proptest! {
        #[test]
        fn prop_tuned_cca_never_below_current_default_regime(
            legit in -80.0f64..-30.0,
            jam_gap in 0.0f64..40.0,
        ) {
            let m = RssiMatrix {
                tr: legit,
                rt: legit - 1.0,
                jt: legit - 1.0 - jam_gap,
                jr: legit - 3.0 - jam_gap,
            };
            let tuned = cca_rule(&m, 5.0, DEFAULT_CCA_DBM);
            // Either untouched or strictly above the strongest jammer leg.
            prop_assert!(tuned == DEFAULT_CCA_DBM || tuned > m.max_jam() - 5.0);
        }
    }
}

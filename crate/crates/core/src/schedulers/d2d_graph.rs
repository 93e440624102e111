//! Conflict graph over D2D candidate transmissions. A vertex is one
//! (transmitter, rate, receiver, file) association; edges mark pairs that
//! cannot coexist, so independent sets are feasible joint D2D plans.

use crate::graphs::{Semantics, WeightedGraph};
use crate::model::{NetworkInstance, SideState};
use crate::nc::D2dKind;
use crate::sets::{FileSet, UserSet};

#[derive(Debug, Clone)]
pub struct D2dVertex {
    pub tx: usize,
    pub rate: f64,
    pub rx: usize,
    pub file: usize,
    pub kind: D2dKind,
    /// Smallest adopted rate that keeps this transmission feasible (the
    /// caller's floor, raised to B/budget for idle-time relays); the
    /// post-selection interference clamp re-checks against it.
    pub min_rate: f64,
}

/// A scheduled user that may relay during its eRRH's idle window.
#[derive(Debug, Clone)]
pub struct IdleTransmitter {
    pub user: usize,
    pub host_errh: usize,
    /// Slack behind the slowest eRRH, seconds.
    pub budget: f64,
    /// Files it can relay: held at slot start plus the one decoded from its
    /// host earlier in the slot.
    pub relayable: FileSet,
}

pub struct D2dGraphParams {
    /// Minimum adopted rate for any vertex (bits/s).
    pub rate_floor: f64,
    /// Users that may be scheduled as receivers (wanting, not scheduled to
    /// any eRRH).
    pub receivers: UserSet,
    /// Users free to transmit for the whole slot.
    pub free_transmitters: UserSet,
    /// Scheduled users that may relay inside their eRRH's idle time;
    /// ascending user order expected for deterministic vertex ids.
    pub idle_transmitters: Vec<IdleTransmitter>,
}

/// Vertex generation per transmitter: one vertex per receiver in the
/// transmitter's zone, per wanted file it holds, per candidate rate. The
/// candidate rates of transmitter k are the distinct positive entries of its
/// capacity row, kept when they meet the floor and do not exceed the pair
/// capacity; an idle-time relay additionally needs rate * budget >= B.
///
/// Conflict edges: non-decodable combination under the same transmitter,
/// unequal rates of the same transmitter, one receiver claimed by two
/// transmitters, and half-duplex (a transmitter that is another vertex's
/// receiver).
///
/// Vertex weight: |zone members still wanting a held file| * rate / B.
pub fn build_d2d_conflict_graph(
    inst: &NetworkInstance,
    side: &SideState,
    csm: &[Vec<f64>],
    zones: &[UserSet],
    params: &D2dGraphParams,
) -> WeightedGraph<D2dVertex> {
    let b = inst.file_size_bits;
    let mut verts: Vec<(D2dVertex, f64)> = Vec::new();

    let mut push_vertices = |tx: usize, relayable: FileSet, kind: D2dKind, min_rate: f64| {
        let mut row_rates: Vec<f64> = csm[tx].iter().copied().filter(|&r| r > 0.0).collect();
        row_rates.sort_by(|a, b| b.total_cmp(a));
        row_rates.dedup();
        if row_rates.is_empty() {
            return;
        }
        // Audience size: zone members with a non-empty Wants set requesting
        // something the transmitter holds.
        let audience = zones[tx]
            .intersect(params.receivers)
            .iter()
            .filter(|&u| !side.wants[u].intersect(relayable).is_empty())
            .count() as f64;
        for rx in zones[tx].intersect(params.receivers).iter() {
            let pair_cap = csm[tx][rx];
            if pair_cap <= 0.0 {
                continue;
            }
            for file in relayable.intersect(side.wants[rx]).iter() {
                for &rate in &row_rates {
                    if rate > pair_cap || rate < min_rate {
                        continue;
                    }
                    let weight = audience * rate / b;
                    verts.push((D2dVertex { tx, rate, rx, file, kind, min_rate }, weight));
                }
            }
        }
    };

    for tx in params.free_transmitters.iter() {
        push_vertices(tx, side.has[tx], D2dKind::FreeStanding, params.rate_floor);
    }
    for idle in &params.idle_transmitters {
        // C3: the relay must complete within the host's idle window.
        let min_rate = if idle.budget > 0.0 {
            params.rate_floor.max(b / idle.budget)
        } else {
            f64::INFINITY
        };
        if min_rate.is_finite() {
            push_vertices(
                idle.user,
                idle.relayable,
                D2dKind::IdleTime { host_errh: idle.host_errh },
                min_rate,
            );
        }
    }

    let has = side.has.clone();
    WeightedGraph::from_pairwise(Semantics::Conflict, verts, move |a, b| {
        let same_tx = a.tx == b.tx;
        // Coding conflict: same transmitter, different files, and the two
        // receivers do not hold each other's file.
        let cc1 = same_tx
            && a.file != b.file
            && !(has[a.rx].contains(b.file) && has[b.rx].contains(a.file));
        let cc2 = same_tx && a.rate != b.rate;
        let cc3 = !same_tx && a.rx == b.rx;
        let cc4 = a.tx == b.rx || b.tx == a.rx;
        cc1 || cc2 || cc3 || cc4
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::graphs::WeightMode;
    use crate::model::generate_scenario;
    use crate::sets::FileSet;

    fn fs(files: &[usize]) -> FileSet {
        files.iter().copied().collect()
    }

    fn toy_instance(n: usize, f: usize) -> NetworkInstance {
        let cfg = ScenarioConfig {
            num_errhs: 1,
            num_users: n,
            num_files: f,
            cache_ratio: 1.0,
            fading: false,
            ..Default::default()
        };
        let (inst, _) = generate_scenario(&cfg, 0);
        inst
    }

    fn full_zones(n: usize) -> Vec<UserSet> {
        (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect()
    }

    #[test]
    fn one_pair_one_file_gives_one_vertex_per_rate() {
        // Transmitter 0 holds f0 wanted by user 1; row rates {5, 2}.
        let side = SideState::new(FileSet::full(2), vec![fs(&[0]), fs(&[1]), fs(&[0, 1])]);
        let inst = toy_instance(3, 2);
        let csm = vec![
            vec![0.0, 5.0, 2.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ];
        let params = D2dGraphParams {
            rate_floor: 0.0,
            receivers: [1usize, 2].into_iter().collect(),
            free_transmitters: UserSet::singleton(0),
            idle_transmitters: Vec::new(),
        };
        let g = build_d2d_conflict_graph(&inst, &side, &csm, &full_zones(3), &params);
        // (0, r, 1, f0) for r in {5.0, 2.0}; both conflict via the rate rule.
        assert_eq!(g.len(), 2);
        assert!(g.adjacent(0, 1));
        let is = g.greedy_max_weight_independent_set(WeightMode::Modified);
        assert_eq!(is.len(), 1);
    }

    #[test]
    fn conflict_rules_cover_all_four_cases() {
        let side = SideState::new(
            FileSet::full(4),
            vec![fs(&[0, 1]), fs(&[0, 2]), fs(&[1, 3]), fs(&[0, 3])],
        );
        let inst = toy_instance(4, 4);
        let mut csm = vec![vec![0.0; 4]; 4];
        csm[0][2] = 4.0;
        csm[0][3] = 4.0;
        csm[1][2] = 4.0;
        csm[1][0] = 4.0;
        let params = D2dGraphParams {
            rate_floor: 0.0,
            receivers: [0usize, 2, 3].into_iter().collect(),
            free_transmitters: [0usize, 1].into_iter().collect(),
            idle_transmitters: Vec::new(),
        };
        let g = build_d2d_conflict_graph(&inst, &side, &csm, &full_zones(4), &params);
        let find = |tx: usize, rx: usize, file: usize| {
            (0..g.len())
                .find(|&v| {
                    let p = g.payload(v);
                    p.tx == tx && p.rx == rx && p.file == file
                })
                .unwrap()
        };
        // Mutually decodable files under one transmitter: u2 holds f1 and
        // u3 holds f0, so (f0 -> u2, f1 -> u3) carries no CC1 edge.
        let a = find(0, 2, 0);
        let b = find(0, 3, 1);
        assert!(!g.adjacent(a, b), "mutually decodable pair must not conflict");
        // CC1: same transmitter, same receiver, two different files.
        let c1 = find(1, 2, 0);
        let c2 = find(1, 2, 2);
        assert!(g.adjacent(c1, c2));
        // CC3: one receiver claimed by two transmitters.
        assert!(g.adjacent(a, c1));
        // CC4: u1 -> u0 conflicts with every vertex transmitted by u0.
        let d = find(1, 0, 2);
        assert!(g.adjacent(a, d));
    }

    #[test]
    fn idle_window_filters_rates() {
        // Idle transmitter with budget 1 s and B = 10 bits needs rate >= 10.
        let side = SideState::new(FileSet::full(2), vec![fs(&[0]), fs(&[1])]);
        let mut inst = toy_instance(2, 2);
        inst.file_size_bits = 10.0;
        let csm = vec![vec![0.0, 5.0], vec![0.0, 0.0]];
        let mk = |budget: f64| D2dGraphParams {
            rate_floor: 0.0,
            receivers: UserSet::singleton(1),
            free_transmitters: UserSet::EMPTY,
            idle_transmitters: vec![IdleTransmitter {
                user: 0,
                host_errh: 0,
                budget,
                relayable: fs(&[0]),
            }],
        };
        let g = build_d2d_conflict_graph(&inst, &side, &csm, &full_zones(2), &mk(1.0));
        assert!(g.is_empty(), "rate 5 cannot push 10 bits through a 1 s window");
        let g = build_d2d_conflict_graph(&inst, &side, &csm, &full_zones(2), &mk(2.0));
        assert_eq!(g.len(), 1);
        let g = build_d2d_conflict_graph(&inst, &side, &csm, &full_zones(2), &mk(0.0));
        assert!(g.is_empty(), "zero budget admits nothing");
    }
}

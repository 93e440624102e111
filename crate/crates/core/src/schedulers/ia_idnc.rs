//! Compatibility graph over per-eRRH (combination, rate) schedules. Each
//! vertex is one eRRH's candidate transmission; edges join vertices of
//! different eRRHs whose targeted sets are disjoint, so cliques are feasible
//! joint downlink plans (at most one vertex per eRRH).

use crate::graphs::{Semantics, WeightedGraph};
use crate::model::{NetworkInstance, SideState};
use crate::nc::{enumerate_idnc_combinations, served_users};
use crate::sets::{FileSet, UserSet};

#[derive(Debug, Clone)]
pub struct ErrhVertex {
    pub errh: usize,
    pub files: FileSet,
    pub rate: f64,
    pub targeted: UserSet,
}

/// Enumerate every vertex (eRRH, IDNC combination, candidate rate) whose
/// targeted set is non-empty. Candidate rates are the capacities of the
/// instantly served users, filtered by the rate floor; the targeted set at
/// rate r keeps the served users whose capacity is at least r, so the
/// adopted rate equals the minimum targeted capacity.
///
/// Vertex weight: |targeted| * rate / B — per-user contribution toward
/// shrinking this slot's duration.
pub fn build_errh_schedule_graph(
    inst: &NetworkInstance,
    side: &SideState,
    caps: &[Vec<f64>],
    combo_cap: usize,
    rate_floor: f64,
) -> WeightedGraph<ErrhVertex> {
    let b = inst.file_size_bits;
    let mut verts: Vec<(ErrhVertex, f64)> = Vec::new();
    for e in 0..inst.num_errhs {
        for files in enumerate_idnc_combinations(side, inst.caches[e], combo_cap) {
            let served = served_users(files, side);
            let mut rates: Vec<f64> = served
                .iter()
                .map(|u| caps[e][u])
                .filter(|&r| r >= rate_floor && r > 0.0)
                .collect();
            rates.sort_by(|a, b| b.total_cmp(a));
            rates.dedup();
            for rate in rates {
                let targeted: UserSet = served.iter().filter(|&u| caps[e][u] >= rate).collect();
                debug_assert!(!targeted.is_empty());
                let weight = targeted.len() as f64 * rate / b;
                verts.push((ErrhVertex { errh: e, files, rate, targeted }, weight));
            }
        }
    }
    WeightedGraph::from_pairwise(Semantics::Compatibility, verts, |a, b| {
        a.errh != b.errh && a.targeted.is_disjoint(b.targeted)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::model::generate_scenario;
    use crate::nc::is_instantly_decodable;
    use crate::sets::FileSet;

    fn fs(files: &[usize]) -> FileSet {
        files.iter().copied().collect()
    }

    #[test]
    fn single_errh_single_wanted_file_gives_singleton_vertices() {
        let frame = FileSet::full(2);
        let side = SideState::new(frame, vec![fs(&[0])]);
        let inst = toy_instance(1, 1, 2);
        let caps = vec![vec![3.0]];
        let g = build_errh_schedule_graph(&inst, &side, &caps, 2, 0.0);
        // Valid combinations: {f1} and {f0,f1}; one feasible rate each.
        assert_eq!(g.len(), 2);
        for v in 0..g.len() {
            assert_eq!(g.payload(v).targeted, UserSet::singleton(0));
            assert_eq!(g.payload(v).rate, 3.0);
        }
    }

    #[test]
    fn vertex_set_matches_brute_force_enumeration() {
        // Tiny instance: every (combination, rate) pair with a non-empty
        // targeted set must appear exactly once.
        let cfg = ScenarioConfig {
            num_errhs: 2,
            num_users: 4,
            num_files: 4,
            cache_ratio: 0.75,
            fading: false,
            ..Default::default()
        };
        let (inst, side) = generate_scenario(&cfg, 11);
        let caps: Vec<Vec<f64>> = (0..2).map(|e| (0..4).map(|u| (1 + e + u) as f64).collect()).collect();
        let g = build_errh_schedule_graph(&inst, &side, &caps, 4, 0.0);

        let mut expected = 0usize;
        for e in 0..2 {
            for mask in 1u64..1 << 4 {
                let files = FileSet(mask);
                if !files.is_subset_of(inst.caches[e]) {
                    continue;
                }
                let mut rates: Vec<f64> = (0..4)
                    .filter(|&u| !side.wants[u].is_empty() && is_instantly_decodable(files, u, &side))
                    .map(|u| caps[e][u])
                    .collect();
                rates.sort_by(|a, b| a.total_cmp(b));
                rates.dedup();
                expected += rates.len();
            }
        }
        assert_eq!(g.len(), expected);

        // Structural edge property: same-eRRH vertices never adjacent,
        // different-eRRH vertices adjacent iff targets are disjoint.
        for a in 0..g.len() {
            for b in a + 1..g.len() {
                let (va, vb) = (g.payload(a), g.payload(b));
                let want = va.errh != vb.errh && va.targeted.is_disjoint(vb.targeted);
                assert_eq!(g.adjacent(a, b), want);
            }
        }
    }

    #[test]
    fn rate_floor_filters_vertices() {
        let frame = FileSet::full(2);
        let side = SideState::new(frame, vec![fs(&[0]), fs(&[0])]);
        let inst = toy_instance(1, 2, 2);
        let caps = vec![vec![5.0, 1.0]];
        let g = build_errh_schedule_graph(&inst, &side, &caps, 1, 2.0);
        // Only the rate-5 vertex survives; it targets just the fast user.
        assert_eq!(g.len(), 1);
        assert_eq!(g.payload(0).rate, 5.0);
        assert_eq!(g.payload(0).targeted, UserSet::singleton(0));
    }

    fn toy_instance(k: usize, n: usize, f: usize) -> NetworkInstance {
        let cfg = ScenarioConfig {
            num_errhs: k,
            num_users: n,
            num_files: f,
            cache_ratio: 1.0,
            fading: false,
            ..Default::default()
        };
        let (inst, _) = generate_scenario(&cfg, 0);
        inst
    }
}

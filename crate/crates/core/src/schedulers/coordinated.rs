//! Coordinated per-slot scheduler. Powers stay fixed at P_max. Stage one
//! schedules D2D links first, prioritizing receivers with the weakest eRRH
//! capacities (primary weight) and serving them at the best rate (secondary
//! weight). Stage two covers everyone else with per-eRRH rate-aware coding
//! as a greedy independent set of the coordinated scheduling graph.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelState;
use crate::graphs::{Semantics, WeightedGraph, WeightMode};
use crate::model::{NetworkInstance, SideState};
use crate::nc::{Combination, Source, TransmissionPlan};
use crate::sets::{FileSet, UserSet};
use crate::schedulers::d2d_graph::{build_d2d_conflict_graph, D2dGraphParams};
use crate::schedulers::joint::assemble_d2d_plans;
use crate::schedulers::{DecisionMeta, Scheme, SlotDecision, SlotTrace};

/// Stage-two vertex: one (eRRH, user, file, rate) association.
#[derive(Debug, Clone)]
pub struct CoordVertex {
    pub errh: usize,
    pub user: usize,
    pub file: usize,
    pub rate: f64,
}

pub fn coordinated_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut SlotTrace>,
) -> SlotDecision {
    let b = inst.file_size_bits;
    let mut decision = SlotDecision::empty(DecisionMeta::for_scheme(Scheme::Coordinated), inst.num_errhs);

    // Stage one: D2D-first scheduling over all wanting users.
    let wanting = side.wanting_users();
    let params = D2dGraphParams {
        rate_floor: inst.rate_threshold,
        receivers: wanting,
        free_transmitters: inst.all_users(),
        idle_transmitters: Vec::new(),
    };
    let graph = build_d2d_conflict_graph(inst, side, &channel.csm, &channel.zones, &params);

    // Primary weight of a vertex: B over its receiver's best-case eRRH
    // capacity floor; large when every eRRH serves that user poorly.
    let primary: Vec<f64> = (0..graph.len())
        .map(|v| {
            let rx = graph.payload(v).rx;
            let min_cap = (0..inst.num_errhs)
                .map(|e| channel.errh_caps[e][rx])
                .fold(f64::INFINITY, f64::min);
            if min_cap > 0.0 {
                b / min_cap
            } else {
                f64::INFINITY
            }
        })
        .collect();

    // Greedy two-layer selection: max primary, then max secondary (rate),
    // ties resolved by a seeded random choice.
    let mut alive: Vec<usize> = (0..graph.len()).collect();
    let mut selected: Vec<usize> = Vec::new();
    while !alive.is_empty() {
        let best_primary = alive.iter().map(|&v| primary[v]).fold(f64::NEG_INFINITY, f64::max);
        let tier: Vec<usize> = alive.iter().copied().filter(|&v| primary[v] == best_primary).collect();
        let best_rate = tier
            .iter()
            .map(|&v| graph.payload(v).rate)
            .fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = tier
            .into_iter()
            .filter(|&v| graph.payload(v).rate == best_rate)
            .collect();
        let pick = tied[rng.gen_range(0..tied.len())];
        selected.push(pick);
        alive.retain(|&u| u != pick && !graph.adjacent(pick, u));
    }

    decision.d2d_plans = assemble_d2d_plans(inst, channel, &graph, &selected);

    if let Some(t) = trace.as_deref_mut() {
        t.d2d_graph = Some((graph, selected));
    }

    // Stage two: rate-aware eRRH coding for users not touched by stage one.
    let d2d_served = decision.all_targeted();
    let transmitting = decision.transmitting_users();
    let eligible = wanting.minus(d2d_served).minus(transmitting);
    let r_min = decision
        .d2d_plans
        .iter()
        .map(|p| p.adopted_rate)
        .fold(f64::INFINITY, f64::min);
    let stage2_floor = if r_min.is_finite() { r_min } else { inst.rate_threshold };

    let mut coord = build_coord_graph(inst, side, &channel.errh_caps, eligible, stage2_floor);
    if coord.is_empty() && !eligible.is_empty() && stage2_floor > inst.rate_threshold {
        // The D2D rate floor can exceed every eRRH capacity; retry at the
        // base QoS floor rather than leaving the eRRHs silent.
        coord = build_coord_graph(inst, side, &channel.errh_caps, eligible, inst.rate_threshold);
        decision.meta.stage2_floor_fallback = true;
    }
    let is = coord.greedy_max_weight_independent_set(WeightMode::Original);

    for e in 0..inst.num_errhs {
        let mine: Vec<&CoordVertex> = {
            let mut v: Vec<usize> = is.iter().copied().filter(|&v| coord.payload(v).errh == e).collect();
            v.sort_unstable();
            v.into_iter().map(|v| coord.payload(v)).collect()
        };
        if mine.is_empty() {
            continue;
        }
        let rate = mine[0].rate;
        debug_assert!(mine.iter().all(|v| v.rate == rate));
        let files: FileSet = mine.iter().map(|v| v.file).collect();
        let targeted: UserSet = mine.iter().map(|v| v.user).collect();
        decision.errh_plans[e] = Some(TransmissionPlan {
            combination: Combination { files, source: Source::Errh(e) },
            adopted_rate: rate,
            targeted,
            power: Some(inst.errh_max_power_w),
            d2d_kind: None,
        });
    }

    if let Some(t) = trace.as_deref_mut() {
        t.coord_graph = Some((coord, is));
    }

    // The adopted rates were planned against the uniform-P_max capacity
    // matrix; the realized transmission set is usually smaller, so each
    // plan's rate rises to the true minimum capacity of its users.
    super::rederive_errh_rates(inst, channel, &mut decision);

    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

/// Coordinated scheduling graph: a vertex per (eRRH, user, wanted cached
/// file, candidate rate); same-eRRH vertices conflict unless they share the
/// rate and their associations are mutually decodable; vertices of different
/// eRRHs conflict when they claim the same user. Weight: rate / B.
fn build_coord_graph(
    inst: &NetworkInstance,
    side: &SideState,
    caps: &[Vec<f64>],
    eligible: UserSet,
    rate_floor: f64,
) -> WeightedGraph<CoordVertex> {
    let b = inst.file_size_bits;
    let mut verts: Vec<(CoordVertex, f64)> = Vec::new();
    for e in 0..inst.num_errhs {
        let mut candidate_rates: Vec<f64> = eligible
            .iter()
            .map(|u| caps[e][u])
            .filter(|&r| r >= rate_floor && r > 0.0)
            .collect();
        candidate_rates.sort_by(|a, b| b.total_cmp(a));
        candidate_rates.dedup();
        for user in eligible.iter() {
            for file in side.wants[user].intersect(inst.caches[e]).iter() {
                for &rate in &candidate_rates {
                    if rate <= caps[e][user] {
                        verts.push((CoordVertex { errh: e, user, file, rate }, rate / b));
                    }
                }
            }
        }
    }
    let has = side.has.clone();
    WeightedGraph::from_pairwise(Semantics::Conflict, verts, move |a, b| {
        if a.errh == b.errh {
            if a.user == b.user {
                return true;
            }
            let coding_ok =
                a.file == b.file || (has[a.user].contains(b.file) && has[b.user].contains(a.file));
            a.rate != b.rate || !coding_ok
        } else {
            a.user == b.user
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::model::generate_scenario;
    use crate::schedulers::validate_decision;
    use rand::SeedableRng;

    #[test]
    fn coordinated_decision_validates_on_random_instances() {
        let cfg = ScenarioConfig {
            num_users: 8,
            num_files: 6,
            cache_ratio: 0.5,
            coverage_radius_m: 300.0,
            rate_threshold: 0.01,
            ..Default::default()
        };
        for seed in 0..5 {
            let (inst, side) = generate_scenario(&cfg, seed);
            let channel = ChannelState::for_slot(&inst, seed, 1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = coordinated_schedule(&inst, &channel, &side, &mut rng, None);
            validate_decision(&inst, &channel, &side, &d).unwrap();
        }
    }

    #[test]
    fn no_d2d_degenerates_to_pure_errh_scheduling() {
        // Zones too small for any D2D link: stage one selects nothing and
        // stage two must still produce eRRH plans for wanting users.
        let cfg = ScenarioConfig {
            num_users: 6,
            num_files: 6,
            cache_ratio: 0.5,
            coverage_radius_m: 1e-6,
            rate_threshold: 0.0,
            fading: false,
            ..Default::default()
        };
        let (inst, side) = generate_scenario(&cfg, 1);
        let channel = ChannelState::for_slot(&inst, 1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = coordinated_schedule(&inst, &channel, &side, &mut rng, None);
        assert!(d.d2d_plans.is_empty());
        assert!(d.errh_plan_iter().count() > 0);
        validate_decision(&inst, &channel, &side, &d).unwrap();
    }

    #[test]
    fn weak_errh_user_with_strong_neighbor_goes_d2d() {
        // Fixed-capacity scenario: user 2 has near-zero eRRH capacity but a
        // strong link from user 0, so stage one schedules it on D2D.
        let cfg = ScenarioConfig {
            num_errhs: 1,
            num_users: 3,
            num_files: 2,
            cache_ratio: 1.0,
            bandwidth_hz: 1.0,
            rate_threshold: 0.5,
            ..Default::default()
        };
        let fixed = crate::config::FixedScenario {
            errh_caps: vec![vec![5.0, 5.0, 1e-6]],
            csm: vec![
                vec![0.0, 0.0, 4.0],
                vec![0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0],
            ],
            caches: vec![vec![0, 1]],
            has: vec![vec![0, 1], vec![0], vec![1]],
        };
        let (inst, side) = crate::model::replay_scenario(&cfg, &fixed);
        let channel = ChannelState::for_slot(&inst, 0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = coordinated_schedule(&inst, &channel, &side, &mut rng, None);
        assert_eq!(d.d2d_plans.len(), 1);
        assert_eq!(d.d2d_plans[0].targeted, UserSet::singleton(2));
        validate_decision(&inst, &channel, &side, &d).unwrap();
    }
}

//! Joint per-slot scheduler. Stage one picks the eRRH transmissions as a
//! greedy maximum-weight clique of the per-eRRH schedule graph, re-solving
//! the power allocation for every candidate partial schedule and clamping
//! adopted rates at the final powers. Stage two fills the remaining users
//! over D2D links as a greedy maximum-weight independent set of the conflict
//! graph under modified weights, then runs one interference fixed-point pass
//! over the selected transmitters.

use std::collections::HashMap;

use crate::channel::{errh_rate, ChannelState};
use crate::graphs::WeightMode;
use crate::model::{NetworkInstance, SideState};
use crate::nc::{decoded_file, Combination, Source, TransmissionPlan};
use crate::power::optimize_powers;
use crate::sets::UserSet;
use crate::schedulers::d2d_graph::{build_d2d_conflict_graph, D2dGraphParams, D2dVertex, IdleTransmitter};
use crate::schedulers::ia_idnc::{build_errh_schedule_graph, ErrhVertex};
use crate::schedulers::{DecisionMeta, Scheme, SlotDecision, SlotTrace};

pub fn joint_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    mut trace: Option<&mut SlotTrace>,
) -> SlotDecision {
    let b = inst.file_size_bits;
    let mut decision = SlotDecision::empty(DecisionMeta::for_scheme(Scheme::Joint), inst.num_errhs);

    // Stage one: eRRH scheduling on capacities at uniform P_max.
    let graph = build_errh_schedule_graph(inst, side, &channel.errh_caps, inst.combo_cap, inst.rate_threshold);

    let clique = if channel.fixed {
        // Replay capacities are authoritative; no power dimension exists.
        graph.greedy_max_weight_clique(None)
    } else {
        let mut reweigh = |chosen: &[usize], candidates: &[usize]| -> Vec<f64> {
            // Candidates sharing (eRRH, targeted set) yield the same power
            // problem; memoize per greedy iteration.
            let mut memo: HashMap<(usize, u64), f64> = HashMap::new();
            candidates
                .iter()
                .map(|&v| {
                    let cand = graph.payload(v);
                    *memo.entry((cand.errh, cand.targeted.0)).or_insert_with(|| {
                        let mut schedule: Vec<Option<UserSet>> = vec![None; inst.num_errhs];
                        for &c in chosen {
                            let p = graph.payload(c);
                            schedule[p.errh] = Some(p.targeted);
                        }
                        schedule[cand.errh] = Some(cand.targeted);
                        let alloc =
                            optimize_powers(&schedule, &channel.errh_gains, inst.errh_max_power_w, inst.noise_power_w, b);
                        let min_cap = cand
                            .targeted
                            .iter()
                            .map(|u| {
                                errh_rate(&alloc.powers, &channel.errh_gains[u], cand.errh, inst.noise_power_w, inst.bandwidth_hz)
                            })
                            .fold(f64::INFINITY, f64::min);
                        cand.targeted.len() as f64 * min_cap / b
                    })
                })
                .collect()
        };
        graph.greedy_max_weight_clique(Some(&mut reweigh))
    };

    // Final powers for the selected schedule, then rate clamping.
    let powers = if channel.fixed || clique.is_empty() {
        vec![inst.errh_max_power_w; inst.num_errhs]
    } else {
        let mut schedule: Vec<Option<UserSet>> = vec![None; inst.num_errhs];
        for &v in &clique {
            let p = graph.payload(v);
            schedule[p.errh] = Some(p.targeted);
        }
        optimize_powers(&schedule, &channel.errh_gains, inst.errh_max_power_w, inst.noise_power_w, b).powers
    };
    let caps_final = channel.errh_caps_at(inst, &powers);

    for &v in &clique {
        let vert: &ErrhVertex = graph.payload(v);
        if let Some(plan) = clamp_errh_plan(inst, vert, &caps_final, powers[vert.errh]) {
            decision.errh_plans[vert.errh] = Some(plan);
        }
    }

    if let Some(t) = trace.as_deref_mut() {
        t.errh_graph = Some((graph.clone(), clique.clone()));
    }

    // Stage two: D2D for everyone the eRRHs leave out.
    let errh_targeted = decision.all_targeted();
    let t_star = decision.errh_max_duration(b);
    let rate_floor = match t_star {
        Some(t) => inst.rate_threshold.max(b / t),
        None => inst.rate_threshold,
    };
    let receivers = side.wanting_users().minus(errh_targeted);
    let free_transmitters = inst.all_users().minus(errh_targeted);

    let mut idle_transmitters = Vec::new();
    if let Some(t_star) = t_star {
        for (e, plan) in decision.errh_plan_iter() {
            let budget = t_star - plan.duration(b);
            if budget <= 0.0 {
                continue;
            }
            for u in plan.targeted.iter() {
                let mut relayable = side.has[u];
                if let Some(f) = decoded_file(plan.combination.files, u, side) {
                    relayable.insert(f);
                }
                idle_transmitters.push(IdleTransmitter { user: u, host_errh: e, budget, relayable });
            }
        }
        idle_transmitters.sort_by_key(|t| t.user);
    }

    let params = D2dGraphParams {
        rate_floor,
        receivers,
        free_transmitters,
        idle_transmitters,
    };
    let d2d = build_d2d_conflict_graph(inst, side, &channel.csm, &channel.zones, &params);
    let is = d2d.greedy_max_weight_independent_set(WeightMode::Modified);
    decision.d2d_plans = assemble_d2d_plans(inst, channel, &d2d, &is);

    if let Some(t) = trace.as_deref_mut() {
        t.d2d_graph = Some((d2d, is));
    }

    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

/// Re-derive a selected vertex's adopted rate at the final powers: the rate
/// becomes the recomputed minimum capacity over its targeted users (usually
/// higher, since unselected eRRHs fall silent). If that minimum dropped
/// below the floor, shed the users that fell behind the original rate
/// instead; drop the plan when nothing feasible remains.
fn clamp_errh_plan(
    inst: &NetworkInstance,
    vert: &ErrhVertex,
    caps: &[Vec<f64>],
    power: f64,
) -> Option<TransmissionPlan> {
    let min_cap = vert
        .targeted
        .iter()
        .map(|u| caps[vert.errh][u])
        .fold(f64::INFINITY, f64::min);
    let (rate, targeted) = if min_cap >= inst.rate_threshold {
        (min_cap, vert.targeted)
    } else {
        let survivors: UserSet = vert.targeted.iter().filter(|&u| caps[vert.errh][u] >= vert.rate).collect();
        (vert.rate, survivors)
    };
    if targeted.is_empty() || rate < inst.rate_threshold || rate <= 0.0 {
        return None;
    }
    Some(TransmissionPlan {
        combination: Combination { files: vert.files, source: Source::Errh(vert.errh) },
        adopted_rate: rate,
        targeted,
        power: Some(power),
        d2d_kind: None,
    })
}

/// Group selected conflict-graph vertices into per-transmitter plans and run
/// the one-pass interference clamp over the final transmitter set.
pub(super) fn assemble_d2d_plans(
    inst: &NetworkInstance,
    channel: &ChannelState,
    graph: &crate::graphs::WeightedGraph<D2dVertex>,
    selected: &[usize],
) -> Vec<TransmissionPlan> {
    let mut by_tx: Vec<(usize, Vec<&D2dVertex>)> = Vec::new();
    let mut order: Vec<usize> = selected.to_vec();
    order.sort_unstable();
    for v in order {
        let p = graph.payload(v);
        match by_tx.iter_mut().find(|(tx, _)| *tx == p.tx) {
            Some((_, list)) => list.push(p),
            None => by_tx.push((p.tx, vec![p])),
        }
    }

    let mut plans: Vec<(TransmissionPlan, f64)> = Vec::new();
    for (tx, verts) in by_tx {
        let rate = verts[0].rate;
        debug_assert!(verts.iter().all(|v| v.rate == rate), "rate conflict edges failed");
        let files = verts.iter().map(|v| v.file).collect();
        let targeted: UserSet = verts.iter().map(|v| v.rx).collect();
        let plan = TransmissionPlan {
            combination: Combination { files, source: Source::User(tx) },
            adopted_rate: rate,
            targeted,
            power: None,
            d2d_kind: Some(verts[0].kind),
        };
        plans.push((plan, verts[0].min_rate));
    }

    if channel.fixed {
        return plans.into_iter().map(|(p, _)| p).collect();
    }

    // One fixed-point pass: recompute pair rates under the full selected
    // transmitter set, clamp each adopted rate down to the recomputed
    // minimum, and drop transmitters whose clamped rate falls below their
    // feasibility floor. Drops only reduce interference, so the survivors'
    // true rates can only be better than the clamped values.
    let active: UserSet = plans
        .iter()
        .map(|(p, _)| match p.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        })
        .collect();
    let mut kept = Vec::new();
    for (mut plan, min_rate) in plans {
        let tx = match plan.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        };
        let true_cap = plan
            .targeted
            .iter()
            .map(|u| channel.d2d_rate_with(inst, active, tx, u))
            .fold(f64::INFINITY, f64::min);
        let clamped = plan.adopted_rate.min(true_cap);
        if clamped >= min_rate && clamped > 0.0 {
            plan.adopted_rate = clamped;
            kept.push(plan);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::model::generate_scenario;
    use crate::schedulers::validate_decision;

    #[test]
    fn joint_decision_validates_on_random_instances() {
        let cfg = ScenarioConfig {
            num_users: 8,
            num_files: 6,
            cache_ratio: 0.5,
            coverage_radius_m: 300.0,
            rate_threshold: 0.01,
            fading: true,
            ..Default::default()
        };
        for seed in 0..5 {
            let (inst, side) = generate_scenario(&cfg, seed);
            let channel = ChannelState::for_slot(&inst, seed, 1);
            let d = joint_schedule(&inst, &channel, &side, None);
            validate_decision(&inst, &channel, &side, &d).unwrap();
        }
    }

    #[test]
    fn all_complete_means_empty_decision() {
        let cfg = ScenarioConfig {
            num_users: 3,
            num_files: 3,
            cache_ratio: 1.0,
            num_errhs: 1,
            has_fraction_lo: 1.0,
            has_fraction_hi: 1.0,
            ..Default::default()
        };
        let (inst, side) = generate_scenario(&cfg, 2);
        assert!(side.all_complete());
        let channel = ChannelState::for_slot(&inst, 2, 1);
        let d = joint_schedule(&inst, &channel, &side, None);
        assert!(d.is_empty());
    }
}

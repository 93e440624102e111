//! Baseline schemes. None of them honor the QoS rate floor (they predate
//! it); each emits decisions that still satisfy user-disjointness,
//! containment, half-duplex and capacity consistency.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelState;
use crate::model::{NetworkInstance, SideState};
use crate::nc::{enumerate_idnc_combinations, served_users, Combination, D2dKind, Source, TransmissionPlan};
use crate::sets::{FileSet, UserSet};
use crate::schedulers::{DecisionMeta, Scheme, SlotDecision};

/// Generation accounting for random linear coding: a user assigned to an
/// eRRH decodes everything that eRRH caches for it once its received coded
/// symbols from that eRRH reach the number of initially unknown cached
/// files. No field arithmetic; only completion timing matters here.
pub struct RlncState {
    /// N x K: coded receptions needed per (user, eRRH).
    generation: Vec<Vec<usize>>,
    /// N x K: coded receptions banked so far.
    received: Vec<Vec<usize>>,
}

impl RlncState {
    pub fn new(inst: &NetworkInstance, side: &SideState) -> Self {
        let generation = (0..inst.num_users)
            .map(|u| {
                (0..inst.num_errhs)
                    .map(|e| inst.caches[e].intersect(side.wants[u]).len())
                    .collect()
            })
            .collect();
        Self {
            generation,
            received: vec![vec![0; inst.num_errhs]; inst.num_users],
        }
    }
}

pub fn rlnc_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    state: &mut RlncState,
) -> SlotDecision {
    let caps = &channel.errh_caps;
    let mut decision = SlotDecision::empty(DecisionMeta::for_scheme(Scheme::Rlnc), inst.num_errhs);

    // Each wanting user attaches to its maximum-capacity eRRH, whatever that
    // eRRH happens to cache; coverage of the whole frame relies on the
    // assignment changing between slots (fading or movement).
    let mut assigned: Vec<UserSet> = vec![UserSet::EMPTY; inst.num_errhs];
    for u in side.wanting_users().iter() {
        let mut best = 0usize;
        for e in 1..inst.num_errhs {
            if caps[e][u] > caps[best][u] {
                best = e;
            }
        }
        assigned[best].insert(u);
    }

    for e in 0..inst.num_errhs {
        if assigned[e].is_empty() {
            continue;
        }
        let rate = assigned[e].iter().map(|u| caps[e][u]).fold(f64::INFINITY, f64::min);
        if rate <= 0.0 {
            continue;
        }
        decision.errh_plans[e] = Some(TransmissionPlan {
            combination: Combination { files: inst.caches[e], source: Source::Errh(e) },
            adopted_rate: rate,
            targeted: assigned[e],
            power: Some(inst.errh_max_power_w),
            d2d_kind: None,
        });
        // Bank one coded symbol per scheduled user; decode on completion.
        for u in assigned[e].iter() {
            state.received[u][e] += 1;
            if state.generation[u][e] > 0 && state.received[u][e] >= state.generation[u][e] {
                for f in inst.caches[e].intersect(side.wants[u]).iter() {
                    decision.deliveries.push((u, f));
                }
            }
        }
    }
    rederive_errh_rates(inst, channel, &mut decision);
    decision
}

/// Network-layer coding only: maximize the number of served users per
/// transmitter, then pay for it with the minimum capacity among them.
pub fn classical_idnc_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
) -> SlotDecision {
    let caps = &channel.errh_caps;
    let mut decision = SlotDecision::empty(DecisionMeta::for_scheme(Scheme::ClassicalIdnc), inst.num_errhs);
    let mut pool = side.wanting_users();

    for e in 0..inst.num_errhs {
        let Some((files, targeted)) = best_combo(inst, side, inst.caches[e], pool, |_| true) else {
            continue;
        };
        let rate = targeted.iter().map(|u| caps[e][u]).fold(f64::INFINITY, f64::min);
        if rate <= 0.0 {
            continue;
        }
        pool = pool.minus(targeted);
        decision.errh_plans[e] = Some(TransmissionPlan {
            combination: Combination { files, source: Source::Errh(e) },
            adopted_rate: rate,
            targeted,
            power: Some(inst.errh_max_power_w),
            d2d_kind: None,
        });
    }

    // Rate-blind D2D for the leftovers: transmitters picked by served count,
    // rates set afterwards to the worst pair capacity.
    let errh_targeted = decision.all_targeted();
    let mut busy = errh_targeted;
    let mut transmitters = UserSet::EMPTY;
    loop {
        let mut best: Option<(usize, FileSet, UserSet)> = None;
        for tx in 0..inst.num_users {
            if busy.contains(tx) || transmitters.contains(tx) {
                continue;
            }
            let reachable = channel.zones[tx].intersect(pool);
            if reachable.is_empty() {
                continue;
            }
            if let Some((files, targeted)) = best_combo(inst, side, side.has[tx], reachable, |u| {
                channel.csm[tx][u] > 0.0
            }) {
                if best.as_ref().map_or(true, |(_, _, t)| targeted.len() > t.len()) {
                    best = Some((tx, files, targeted));
                }
            }
        }
        let Some((tx, files, targeted)) = best else { break };
        transmitters.insert(tx);
        busy = busy.union(targeted);
        pool = pool.minus(targeted).minus(UserSet::singleton(tx));
        let rate = targeted.iter().map(|u| channel.csm[tx][u]).fold(f64::INFINITY, f64::min);
        decision.d2d_plans.push(TransmissionPlan {
            combination: Combination { files, source: Source::User(tx) },
            adopted_rate: rate,
            targeted,
            power: None,
            d2d_kind: Some(D2dKind::FreeStanding),
        });
    }
    rederive_errh_rates(inst, channel, &mut decision);
    clamp_d2d_rates(inst, channel, &mut decision.d2d_plans);

    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

/// One user per eRRH at its own full rate, D2D unicast for the rest.
pub fn uncoded_unicast_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
) -> SlotDecision {
    let caps = &channel.errh_caps;
    let mut decision = SlotDecision::empty(DecisionMeta::for_scheme(Scheme::UncodedUnicast), inst.num_errhs);
    let mut taken = UserSet::EMPTY;

    for e in 0..inst.num_errhs {
        let mut best: Option<(usize, f64)> = None;
        for u in side.wanting_users().minus(taken).iter() {
            if side.wants[u].intersect(inst.caches[e]).is_empty() || caps[e][u] <= 0.0 {
                continue;
            }
            if best.map_or(true, |(_, c)| caps[e][u] > c) {
                best = Some((u, caps[e][u]));
            }
        }
        let Some((u, rate)) = best else { continue };
        let file = side.wants[u].intersect(inst.caches[e]).iter().next().unwrap();
        taken.insert(u);
        decision.errh_plans[e] = Some(TransmissionPlan {
            combination: Combination { files: FileSet::singleton(file), source: Source::Errh(e) },
            adopted_rate: rate,
            targeted: UserSet::singleton(u),
            power: Some(inst.errh_max_power_w),
            d2d_kind: None,
        });
    }

    // Uncoded D2D pairs for untargeted users, best pair capacity first.
    let mut transmitters = UserSet::EMPTY;
    let mut receivers = UserSet::EMPTY;
    loop {
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for tx in 0..inst.num_users {
            if taken.contains(tx) || transmitters.contains(tx) || receivers.contains(tx) {
                continue;
            }
            for rx in channel.zones[tx].iter() {
                if taken.contains(rx) || transmitters.contains(rx) || receivers.contains(rx) {
                    continue;
                }
                if side.wants[rx].is_empty() || channel.csm[tx][rx] <= 0.0 {
                    continue;
                }
                let wanted = side.has[tx].intersect(side.wants[rx]);
                if let Some(f) = wanted.iter().next() {
                    if best.map_or(true, |(_, _, _, r)| channel.csm[tx][rx] > r) {
                        best = Some((tx, rx, f, channel.csm[tx][rx]));
                    }
                }
            }
        }
        let Some((tx, rx, f, rate)) = best else { break };
        transmitters.insert(tx);
        receivers.insert(rx);
        decision.d2d_plans.push(TransmissionPlan {
            combination: Combination { files: FileSet::singleton(f), source: Source::User(tx) },
            adopted_rate: rate,
            targeted: UserSet::singleton(rx),
            power: None,
            d2d_kind: Some(D2dKind::FreeStanding),
        });
    }
    rederive_errh_rates(inst, channel, &mut decision);
    clamp_d2d_rates(inst, channel, &mut decision.d2d_plans);

    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

/// Every eRRH broadcasts one uncoded file per slot to the wanting users that
/// hear it best, working through the frame one file at a time, each at the
/// slowest listener's rate.
pub fn uncoded_broadcast_fran_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
) -> SlotDecision {
    let caps = &channel.errh_caps;
    let mut decision =
        SlotDecision::empty(DecisionMeta::for_scheme(Scheme::UncodedBroadcastFran), inst.num_errhs);

    // Each wanting user listens to its maximum-capacity eRRH.
    let mut listeners: Vec<UserSet> = vec![UserSet::EMPTY; inst.num_errhs];
    for u in side.wanting_users().iter() {
        let mut best = 0usize;
        for e in 1..inst.num_errhs {
            if caps[e][u] > caps[best][u] {
                best = e;
            }
        }
        listeners[best].insert(u);
    }

    for e in 0..inst.num_errhs {
        // Broadcast the cached file its listeners miss the most.
        let mut best: Option<(usize, UserSet)> = None;
        for f in inst.caches[e].iter() {
            let wanters: UserSet = listeners[e].iter().filter(|&u| side.wants[u].contains(f)).collect();
            if wanters.is_empty() {
                continue;
            }
            if best.as_ref().map_or(true, |(_, w)| wanters.len() > w.len()) {
                best = Some((f, wanters));
            }
        }
        let Some((f, wanters)) = best else { continue };
        let rate = wanters.iter().map(|u| caps[e][u]).fold(f64::INFINITY, f64::min);
        if rate <= 0.0 {
            continue;
        }
        decision.errh_plans[e] = Some(TransmissionPlan {
            combination: Combination { files: FileSet::singleton(f), source: Source::Errh(e) },
            adopted_rate: rate,
            targeted: wanters,
            power: Some(inst.errh_max_power_w),
            d2d_kind: None,
        });
    }
    rederive_errh_rates(inst, channel, &mut decision);
    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

/// A randomly drawn set of users broadcasts the uncoded file most missed by
/// their neighbors; every transmission runs at the single slowest scheduled
/// pair's true rate under the full mutual interference. Rate-blind by
/// design: one unlucky geometry drags the whole slot.
pub fn uncoded_broadcast_d2d_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    rng: &mut ChaCha8Rng,
) -> SlotDecision {
    let mut decision =
        SlotDecision::empty(DecisionMeta::for_scheme(Scheme::UncodedBroadcastD2d), inst.num_errhs);
    let mut order: Vec<usize> = (0..inst.num_users).collect();
    order.shuffle(rng);

    let mut transmitters = UserSet::EMPTY;
    let mut receivers = UserSet::EMPTY;
    let mut chosen: Vec<(usize, usize, UserSet)> = Vec::new();
    let mut storm = UserSet::EMPTY;
    for tx in order {
        if receivers.contains(tx) {
            continue;
        }
        // Random selection: roughly half the users transmit this slot,
        // whether or not anyone near them can use it.
        if rng.gen_bool(0.5) || side.has[tx].is_empty() {
            continue;
        }
        // The held file missing at the most neighbors still free this slot.
        let mut best: Option<(usize, UserSet)> = None;
        for f in side.has[tx].iter() {
            let wanters: UserSet = channel.zones[tx]
                .iter()
                .filter(|&u| {
                    side.wants[u].contains(f)
                        && !transmitters.contains(u)
                        && !storm.contains(u)
                        && !receivers.contains(u)
                        && channel.csm[tx][u] > 0.0
                })
                .collect();
            if wanters.is_empty() {
                continue;
            }
            if best.as_ref().map_or(true, |(_, w)| wanters.len() > w.len()) {
                best = Some((f, wanters));
            }
        }
        match best {
            Some((f, wanters)) => {
                transmitters.insert(tx);
                receivers = receivers.union(wanters);
                chosen.push((tx, f, wanters));
            }
            // Nothing useful to send: broadcast anyway, adding interference
            // and giving up this slot's own reception.
            None => storm.insert(tx),
        }
    }
    if chosen.is_empty() {
        return decision;
    }
    // Receivers must not themselves be storm transmitters.
    decision.extra_interferers = storm.minus(receivers);
    let active = transmitters.union(decision.extra_interferers);

    // One common rate: the minimum true pair rate over every scheduled
    // receiver, interference from every transmitting user included.
    let mut rate = f64::INFINITY;
    for &(tx, _, wanters) in &chosen {
        for u in wanters.iter() {
            rate = rate.min(channel.d2d_rate_with(inst, active, tx, u));
        }
    }
    if !rate.is_finite() || rate <= 0.0 {
        return decision;
    }
    for (tx, f, wanters) in chosen {
        decision.d2d_plans.push(TransmissionPlan {
            combination: Combination { files: FileSet::singleton(f), source: Source::User(tx) },
            adopted_rate: rate,
            targeted: wanters,
            power: None,
            d2d_kind: Some(D2dKind::FreeStanding),
        });
    }

    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

/// Rate-aware coding with a single shared transmission rate and fixed
/// powers: scan the candidate common rates, greedily fill every eRRH and the
/// same-rate D2D layer at each, and keep the rate maximizing served users
/// times rate. Synchronization then holds every concurrent transmitter to
/// that single planning rate (the scheme's structural handicap); a slot with
/// one lone transmitter has nobody to synchronize with and carries its true
/// rate.
pub fn ra_idnc_schedule(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
) -> SlotDecision {
    let caps = &channel.errh_caps;
    let wanting = side.wanting_users();

    let mut candidate_rates: Vec<f64> = Vec::new();
    for e in 0..inst.num_errhs {
        for u in wanting.iter() {
            if caps[e][u] > 0.0 {
                candidate_rates.push(caps[e][u]);
            }
        }
    }
    candidate_rates.sort_by(|a, b| b.total_cmp(a));
    candidate_rates.dedup();

    let mut best: Option<(f64, SlotDecision)> = None;
    for &rate in &candidate_rates {
        let decision = ra_idnc_at_rate(inst, channel, side, rate);
        let served = decision.all_targeted().len();
        if served == 0 {
            continue;
        }
        let score = served as f64 * rate;
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, decision));
        }
    }
    let mut decision = match best {
        Some((_, d)) => d,
        None => SlotDecision::empty(DecisionMeta::for_scheme(Scheme::RaIdnc), inst.num_errhs),
    };

    let num_transmitters = decision.errh_plan_iter().count() + decision.d2d_plans.len();
    if num_transmitters == 1 {
        // No synchronization partner: the lone transmission runs at its true
        // (interference-free on its band) rate.
        synchronize_common_rate(inst, channel, &mut decision);
    } else {
        // Concurrent transmitters stay at the committed planning rate; D2D
        // rates still may not exceed the true pair rates under the selected
        // set's interference.
        let common = decision
            .errh_plan_iter()
            .map(|(_, p)| p.adopted_rate)
            .chain(decision.d2d_plans.iter().map(|p| p.adopted_rate))
            .fold(f64::INFINITY, f64::min);
        let active = decision.transmitting_users();
        let mut d2d_min = f64::INFINITY;
        for plan in &decision.d2d_plans {
            let tx = match plan.combination.source {
                Source::User(k) => k,
                Source::Errh(_) => unreachable!(),
            };
            for u in plan.targeted.iter() {
                d2d_min = d2d_min.min(channel.d2d_rate_with(inst, active, tx, u));
            }
        }
        let common = common.min(d2d_min);
        if common.is_finite() && common > 0.0 {
            for plan in decision.errh_plans.iter_mut().flatten() {
                plan.adopted_rate = common;
            }
            for plan in &mut decision.d2d_plans {
                plan.adopted_rate = common;
            }
        }
    }
    decision.deliveries = super::idnc_deliveries(&decision, side);
    decision
}

fn ra_idnc_at_rate(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    rate: f64,
) -> SlotDecision {
    let caps = &channel.errh_caps;
    let mut decision = SlotDecision::empty(DecisionMeta::for_scheme(Scheme::RaIdnc), inst.num_errhs);
    let mut pool = side.wanting_users();

    for e in 0..inst.num_errhs {
        let Some((files, targeted)) = best_combo(inst, side, inst.caches[e], pool, |u| caps[e][u] >= rate)
        else {
            continue;
        };
        pool = pool.minus(targeted);
        decision.errh_plans[e] = Some(TransmissionPlan {
            combination: Combination { files, source: Source::Errh(e) },
            adopted_rate: rate,
            targeted,
            power: Some(inst.errh_max_power_w),
            d2d_kind: None,
        });
    }

    let mut busy = decision.all_targeted();
    let mut transmitters = UserSet::EMPTY;
    loop {
        let mut found: Option<(usize, FileSet, UserSet)> = None;
        for tx in 0..inst.num_users {
            if busy.contains(tx) || transmitters.contains(tx) {
                continue;
            }
            let reachable = channel.zones[tx].intersect(pool);
            if reachable.is_empty() {
                continue;
            }
            if let Some((files, targeted)) = best_combo(inst, side, side.has[tx], reachable, |u| {
                channel.csm[tx][u] >= rate
            }) {
                if found.as_ref().map_or(true, |(_, _, t)| targeted.len() > t.len()) {
                    found = Some((tx, files, targeted));
                }
            }
        }
        let Some((tx, files, targeted)) = found else { break };
        transmitters.insert(tx);
        busy = busy.union(targeted);
        pool = pool.minus(targeted).minus(UserSet::singleton(tx));
        decision.d2d_plans.push(TransmissionPlan {
            combination: Combination { files, source: Source::User(tx) },
            adopted_rate: rate,
            targeted,
            power: None,
            d2d_kind: Some(D2dKind::FreeStanding),
        });
    }
    decision
}

use crate::schedulers::rederive_errh_rates;

/// The synchronized rate: the minimum true capacity over every scheduled
/// user, cellular and D2D alike, imposed on every transmitter in the slot.
fn synchronize_common_rate(inst: &NetworkInstance, channel: &ChannelState, decision: &mut SlotDecision) {
    rederive_errh_rates(inst, channel, decision);
    let active: UserSet = decision.transmitting_users();
    let mut common = f64::INFINITY;
    for (_, plan) in decision.errh_plan_iter() {
        common = common.min(plan.adopted_rate);
    }
    for plan in &decision.d2d_plans {
        let tx = match plan.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        };
        for u in plan.targeted.iter() {
            common = common.min(channel.d2d_rate_with(inst, active, tx, u));
        }
    }
    if !common.is_finite() || common <= 0.0 {
        return;
    }
    for plan in decision.errh_plans.iter_mut().flatten() {
        plan.adopted_rate = common;
    }
    for plan in &mut decision.d2d_plans {
        plan.adopted_rate = common;
    }
}

/// Clamp adopted D2D rates down to the worst true pair rate under the
/// selected transmitter set (rate-blind schemes keep every transmitter).
fn clamp_d2d_rates(inst: &NetworkInstance, channel: &ChannelState, plans: &mut [TransmissionPlan]) {
    if channel.fixed || plans.is_empty() {
        return;
    }
    let active: UserSet = plans
        .iter()
        .map(|p| match p.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        })
        .collect();
    for plan in plans.iter_mut() {
        let tx = match plan.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        };
        let true_cap = plan
            .targeted
            .iter()
            .map(|u| channel.d2d_rate_with(inst, active, tx, u))
            .fold(f64::INFINITY, f64::min);
        plan.adopted_rate = plan.adopted_rate.min(true_cap);
    }
}

/// Highest-coverage IDNC combination from `source_files` for the users in
/// `pool` passing `eligible`; ties go to the earliest combination.
fn best_combo(
    inst: &NetworkInstance,
    side: &SideState,
    source_files: FileSet,
    pool: UserSet,
    eligible: impl Fn(usize) -> bool,
) -> Option<(FileSet, UserSet)> {
    let mut best: Option<(FileSet, UserSet)> = None;
    for files in enumerate_idnc_combinations(side, source_files, inst.combo_cap) {
        let targeted: UserSet = served_users(files, side)
            .intersect(pool)
            .iter()
            .filter(|&u| eligible(u))
            .collect();
        if targeted.is_empty() {
            continue;
        }
        if best.as_ref().map_or(true, |(_, t)| targeted.len() > t.len()) {
            best = Some((files, targeted));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::model::generate_scenario;
    use crate::schedulers::{validate_decision, SchemeState};
    use rand::SeedableRng;

    fn setup(seed: u64) -> (NetworkInstance, SideState, ChannelState) {
        let cfg = ScenarioConfig {
            num_users: 10,
            num_files: 8,
            cache_ratio: 0.5,
            coverage_radius_m: 400.0,
            ..Default::default()
        };
        let (inst, side) = generate_scenario(&cfg, seed);
        let channel = ChannelState::for_slot(&inst, seed, 1);
        (inst, side, channel)
    }

    #[test]
    fn unicast_targets_one_user_per_errh() {
        let (inst, side, channel) = setup(4);
        let d = uncoded_unicast_schedule(&inst, &channel, &side);
        for (_, plan) in d.errh_plan_iter() {
            assert_eq!(plan.targeted.len(), 1);
            assert_eq!(plan.combination.files.len(), 1);
        }
        assert_eq!(d.errh_plan_iter().count(), inst.num_errhs);
        validate_decision(&inst, &channel, &side, &d).unwrap();
    }

    #[test]
    fn classical_idnc_pays_minimum_capacity() {
        let (inst, side, channel) = setup(5);
        let d = classical_idnc_schedule(&inst, &channel, &side);
        for (e, plan) in d.errh_plan_iter() {
            let min_cap = plan
                .targeted
                .iter()
                .map(|u| channel.errh_caps[e][u])
                .fold(f64::INFINITY, f64::min);
            assert!((plan.adopted_rate - min_cap).abs() <= 1e-9 * min_cap);
        }
        validate_decision(&inst, &channel, &side, &d).unwrap();
    }

    #[test]
    fn ra_idnc_uses_one_common_rate() {
        let (inst, side, channel) = setup(6);
        let d = ra_idnc_schedule(&inst, &channel, &side);
        let mut rates: Vec<f64> = d.errh_plan_iter().map(|(_, p)| p.adopted_rate).collect();
        rates.extend(d.d2d_plans.iter().map(|p| p.adopted_rate));
        assert!(!rates.is_empty());
        for r in &rates {
            assert_eq!(*r, rates[0], "all transmitters must share one rate");
        }
        validate_decision(&inst, &channel, &side, &d).unwrap();
    }

    #[test]
    fn broadcast_fran_is_single_errh_interference_free() {
        let (inst, side, channel) = setup(7);
        let d = uncoded_broadcast_fran_schedule(&inst, &channel, &side);
        assert_eq!(d.errh_plan_iter().count(), 1);
        let (_, plan) = d.errh_plan_iter().next().unwrap();
        assert_eq!(plan.combination.files.len(), 1);
        validate_decision(&inst, &channel, &side, &d).unwrap();
    }

    #[test]
    fn rlnc_decodes_a_full_generation_at_once() {
        let cfg = ScenarioConfig {
            num_errhs: 1,
            num_users: 2,
            num_files: 4,
            cache_ratio: 1.0,
            fading: false,
            ..Default::default()
        };
        let (inst, mut side, _) = {
            let (i, s) = generate_scenario(&cfg, 9);
            let ch = ChannelState::for_slot(&i, 9, 1);
            (i, s, ch)
        };
        let mut state = RlncState::new(&inst, &side);
        let needed: Vec<usize> = (0..2).map(|u| side.wants[u].len()).collect();
        let mut slots = 0;
        while !side.all_complete() && slots < 20 {
            slots += 1;
            let channel = ChannelState::for_slot(&inst, 9, slots);
            let d = rlnc_schedule(&inst, &channel, &side, &mut state);
            validate_decision(&inst, &channel, &side, &d).unwrap();
            let recipients: UserSet = d.deliveries.iter().map(|&(u, _)| u).collect();
            let idle = side.wanting_users().minus(recipients);
            let t = d.t_max(inst.file_size_bits);
            crate::model::apply_deliveries(&mut side, &d.deliveries, t, idle, inst.file_size_bits).unwrap();
        }
        assert!(side.all_complete());
        // Every user decoded in exactly its generation length.
        for u in 0..2 {
            assert_eq!(state.received[u][0], needed[u]);
        }
    }

    #[test]
    fn broadcast_d2d_is_seed_deterministic() {
        let cfg = ScenarioConfig {
            num_users: 10,
            num_files: 6,
            cache_ratio: 0.5,
            coverage_radius_m: 500.0,
            ..Default::default()
        };
        let (inst, side) = generate_scenario(&cfg, 10);
        let channel = ChannelState::for_slot(&inst, 10, 1);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = uncoded_broadcast_d2d_schedule(&inst, &channel, &side, &mut rng);
            validate_decision(&inst, &channel, &side, &d).unwrap();
            d.d2d_plans
                .iter()
                .map(|p| (p.combination.files.0, p.targeted.0, p.adopted_rate))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
    }

    #[test]
    fn all_schemes_handle_a_complete_side_state() {
        let cfg = ScenarioConfig {
            num_users: 4,
            num_files: 4,
            cache_ratio: 0.75,
            has_fraction_lo: 1.0,
            has_fraction_hi: 1.0,
            ..Default::default()
        };
        let (inst, side) = generate_scenario(&cfg, 2);
        let channel = ChannelState::for_slot(&inst, 2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for scheme in Scheme::ALL {
            let mut st = SchemeState::new(scheme, &inst, &side);
            let d = crate::schedulers::schedule_slot(
                scheme, &inst, &channel, &side, &mut st, &mut rng, None,
            );
            assert!(d.is_empty(), "{scheme} transmitted with nothing to send");
        }
    }
}

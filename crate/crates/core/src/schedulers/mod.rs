//! Per-slot decision makers: the joint approach, the coordinated approach,
//! the six baseline schemes, and the constraint checker every decision must
//! pass before the simulator applies it.

mod baselines;
mod coordinated;
mod d2d_graph;
mod ia_idnc;
mod joint;

pub use baselines::RlncState;
pub use coordinated::{coordinated_schedule, CoordVertex};
pub use d2d_graph::{build_d2d_conflict_graph, D2dGraphParams, D2dVertex, IdleTransmitter};
pub use ia_idnc::{build_errh_schedule_graph, ErrhVertex};
pub use joint::joint_schedule;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::ChannelState;
use crate::graphs::WeightedGraph;
use crate::model::{NetworkInstance, SideState};
use crate::nc::{decoded_file, D2dKind, Source, TransmissionPlan};
use crate::sets::UserSet;

/// Stable scheme identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Joint,
    Coordinated,
    Rlnc,
    ClassicalIdnc,
    UncodedUnicast,
    UncodedBroadcastFran,
    UncodedBroadcastD2d,
    RaIdnc,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::Joint,
        Scheme::Coordinated,
        Scheme::Rlnc,
        Scheme::ClassicalIdnc,
        Scheme::UncodedUnicast,
        Scheme::UncodedBroadcastFran,
        Scheme::UncodedBroadcastD2d,
        Scheme::RaIdnc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Joint => "joint",
            Scheme::Coordinated => "coordinated",
            Scheme::Rlnc => "rlnc",
            Scheme::ClassicalIdnc => "classical-idnc",
            Scheme::UncodedUnicast => "uncoded-unicast",
            Scheme::UncodedBroadcastFran => "uncoded-broadcast-fran",
            Scheme::UncodedBroadcastD2d => "uncoded-broadcast-d2d",
            Scheme::RaIdnc => "ra-idnc",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scheme::ALL
            .iter()
            .find(|sch| sch.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which optional checks apply to this decision, plus per-slot diagnostics.
#[derive(Debug, Clone)]
pub struct DecisionMeta {
    pub scheme: Scheme,
    /// C6/C7: every adopted rate must meet the QoS floor.
    pub enforce_rate_floor: bool,
    /// Free-standing D2D transmissions must fit within the slowest eRRH's
    /// duration (joint decomposition only).
    pub enforce_d2d_within_errh: bool,
    /// Deliveries come from generation-complete coded decoding rather than
    /// per-slot XOR decoding.
    pub rlnc_coded: bool,
    /// The coordinated second stage had to fall back to the base floor.
    pub stage2_floor_fallback: bool,
}

impl DecisionMeta {
    pub fn for_scheme(scheme: Scheme) -> Self {
        let proposed = matches!(scheme, Scheme::Joint | Scheme::Coordinated);
        Self {
            scheme,
            enforce_rate_floor: proposed,
            enforce_d2d_within_errh: scheme == Scheme::Joint,
            rlnc_coded: scheme == Scheme::Rlnc,
            stage2_floor_fallback: false,
        }
    }
}

/// Everything transmitted in one slot plus the files it delivers.
#[derive(Debug, Clone)]
pub struct SlotDecision {
    /// Indexed by eRRH id; at most one plan per eRRH.
    pub errh_plans: Vec<Option<TransmissionPlan>>,
    pub d2d_plans: Vec<TransmissionPlan>,
    /// Users transmitting on the D2D band without reaching any receiver
    /// (rate-blind broadcast storms); pure interference sources that also
    /// forfeit their own reception.
    pub extra_interferers: UserSet,
    /// (user, file) pairs that land this slot.
    pub deliveries: Vec<(usize, usize)>,
    pub meta: DecisionMeta,
}

impl SlotDecision {
    pub fn empty(meta: DecisionMeta, num_errhs: usize) -> Self {
        Self {
            errh_plans: vec![None; num_errhs],
            d2d_plans: Vec::new(),
            extra_interferers: UserSet::EMPTY,
            deliveries: Vec::new(),
            meta,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.errh_plans.iter().all(|p| p.is_none()) && self.d2d_plans.is_empty()
    }

    pub fn errh_plan_iter(&self) -> impl Iterator<Item = (usize, &TransmissionPlan)> {
        self.errh_plans
            .iter()
            .enumerate()
            .filter_map(|(e, p)| p.as_ref().map(|p| (e, p)))
    }

    /// Longest eRRH transmission this slot, if any eRRH transmits.
    pub fn errh_max_duration(&self, b: f64) -> Option<f64> {
        self.errh_plan_iter()
            .map(|(_, p)| p.duration(b))
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
    }

    /// Slot duration: the longest of all eRRH transmissions and
    /// free-standing D2D transmissions. Idle-time relays fit inside the
    /// slowest eRRH's window and never extend the slot.
    pub fn t_max(&self, b: f64) -> f64 {
        let mut t = self.errh_max_duration(b).unwrap_or(0.0);
        for p in &self.d2d_plans {
            if matches!(p.d2d_kind, Some(D2dKind::FreeStanding)) {
                t = t.max(p.duration(b));
            }
        }
        t
    }

    /// Every user targeted by any plan.
    pub fn all_targeted(&self) -> UserSet {
        let mut t = UserSet::EMPTY;
        for (_, p) in self.errh_plan_iter() {
            t = t.union(p.targeted);
        }
        for p in &self.d2d_plans {
            t = t.union(p.targeted);
        }
        t
    }

    pub fn transmitting_users(&self) -> UserSet {
        let planned: UserSet = self
            .d2d_plans
            .iter()
            .map(|p| match p.combination.source {
                Source::User(k) => k,
                Source::Errh(_) => unreachable!("d2d plan with eRRH source"),
            })
            .collect();
        planned.union(self.extra_interferers)
    }
}

/// Re-derive every eRRH plan's adopted rate as the minimum capacity of its
/// targeted users under the slot's actual transmission set: silent eRRHs
/// add no interference, so rates planned against the uniform-P_max matrix
/// are only a lower bound on what the transmission truly carries.
pub(crate) fn rederive_errh_rates(
    inst: &NetworkInstance,
    channel: &ChannelState,
    decision: &mut SlotDecision,
) {
    let mut powers = vec![0.0; inst.num_errhs];
    for (e, _) in decision.errh_plan_iter() {
        powers[e] = inst.errh_max_power_w;
    }
    let caps = channel.errh_caps_at(inst, &powers);
    for e in 0..inst.num_errhs {
        if let Some(plan) = decision.errh_plans[e].as_mut() {
            let rate = plan.targeted.iter().map(|u| caps[e][u]).fold(f64::INFINITY, f64::min);
            if rate > plan.adopted_rate {
                plan.adopted_rate = rate;
            }
        }
    }
}

/// Per-episode scheduler state (only coded baselines need any).
pub enum SchemeState {
    Stateless,
    Rlnc(RlncState),
}

impl SchemeState {
    pub fn new(scheme: Scheme, inst: &NetworkInstance, side: &SideState) -> Self {
        match scheme {
            Scheme::Rlnc => SchemeState::Rlnc(RlncState::new(inst, side)),
            _ => SchemeState::Stateless,
        }
    }
}

/// Internal graphs and chosen vertex ids of one slot, for debugging and for
/// verification against the exhaustive search oracles.
#[derive(Default)]
pub struct SlotTrace {
    pub errh_graph: Option<(WeightedGraph<ErrhVertex>, Vec<usize>)>,
    pub d2d_graph: Option<(WeightedGraph<D2dVertex>, Vec<usize>)>,
    pub coord_graph: Option<(WeightedGraph<CoordVertex>, Vec<usize>)>,
}

/// Produce one slot's decision under the given scheme.
pub fn schedule_slot(
    scheme: Scheme,
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    state: &mut SchemeState,
    rng: &mut ChaCha8Rng,
    trace: Option<&mut SlotTrace>,
) -> SlotDecision {
    match scheme {
        Scheme::Joint => joint::joint_schedule(inst, channel, side, trace),
        Scheme::Coordinated => coordinated::coordinated_schedule(inst, channel, side, rng, trace),
        Scheme::Rlnc => match state {
            SchemeState::Rlnc(st) => baselines::rlnc_schedule(inst, channel, side, st),
            _ => unreachable!("rlnc scheduler without rlnc state"),
        },
        Scheme::ClassicalIdnc => baselines::classical_idnc_schedule(inst, channel, side),
        Scheme::UncodedUnicast => baselines::uncoded_unicast_schedule(inst, channel, side),
        Scheme::UncodedBroadcastFran => baselines::uncoded_broadcast_fran_schedule(inst, channel, side),
        Scheme::UncodedBroadcastD2d => baselines::uncoded_broadcast_d2d_schedule(inst, channel, side, rng),
        Scheme::RaIdnc => baselines::ra_idnc_schedule(inst, channel, side),
    }
}

const REL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum Violation {
    #[error("eRRH {errh}: combination not contained in its cache")]
    CacheContainment { errh: usize },
    #[error("D2D transmitter {tx}: combination not contained in its Has set")]
    HasContainment { tx: usize },
    #[error("plan has an empty combination or empty targeted set")]
    EmptyPlan,
    #[error("targeted sets are not pairwise disjoint (user {user})")]
    OverlappingTargets { user: usize },
    #[error("user {user} transmits and is targeted in the same slot")]
    HalfDuplex { user: usize },
    #[error("duplicate D2D transmitter {tx}")]
    DuplicateTransmitter { tx: usize },
    #[error("eRRH {errh} power {power} outside [0, {p_max}]")]
    PowerBox { errh: usize, power: f64, p_max: f64 },
    #[error("idle-time plan of user {tx} does not fit the host idle window")]
    IdleWindow { tx: usize },
    #[error("idle-time transmitter {tx} is not targeted by its host eRRH")]
    IdleHostMismatch { tx: usize },
    #[error("free-standing D2D duration exceeds the slowest eRRH duration (tx {tx})")]
    D2dTooSlow { tx: usize },
    #[error("adopted rate {rate} below the QoS floor {floor}")]
    RateFloor { rate: f64, floor: f64 },
    #[error("adopted rate {rate} exceeds capacity {cap} of targeted user {user}")]
    RateAboveCapacity { user: usize, rate: f64, cap: f64 },
    #[error("targeted user {user} cannot instantly decode the combination")]
    NotDecodable { user: usize },
    #[error("delivery ({user}, {file}) is not justified by any plan")]
    UnjustifiedDelivery { user: usize, file: usize },
    #[error("targeted user {user} has an empty Wants set")]
    TargetNotWanting { user: usize },
}

/// Validate a slot decision against the full constraint set: disjoint user
/// scheduling, cache/Has containment, power boxes, rate floors, idle-window
/// and duration bounds, half-duplex, decodability, and rate-vs-capacity
/// consistency at the decision's own powers and transmitter set.
pub fn validate_decision(
    inst: &NetworkInstance,
    channel: &ChannelState,
    side: &SideState,
    decision: &SlotDecision,
) -> Result<(), Violation> {
    let b = inst.file_size_bits;
    let meta = &decision.meta;

    // Plan shape, containment, power boxes.
    let mut powers = vec![0.0; inst.num_errhs];
    for (e, plan) in decision.errh_plan_iter() {
        if plan.combination.files.is_empty() || plan.targeted.is_empty() || plan.adopted_rate <= 0.0 {
            return Err(Violation::EmptyPlan);
        }
        debug_assert!(matches!(plan.combination.source, Source::Errh(se) if se == e));
        if !plan.combination.files.is_subset_of(inst.caches[e]) {
            return Err(Violation::CacheContainment { errh: e });
        }
        let p = plan.power.unwrap_or(inst.errh_max_power_w);
        if !(0.0..=inst.errh_max_power_w * (1.0 + REL)).contains(&p) {
            return Err(Violation::PowerBox { errh: e, power: p, p_max: inst.errh_max_power_w });
        }
        powers[e] = p;
    }

    let t_star = decision.errh_max_duration(b);

    let mut transmitters = UserSet::EMPTY;
    for plan in &decision.d2d_plans {
        if plan.combination.files.is_empty() || plan.targeted.is_empty() || plan.adopted_rate <= 0.0 {
            return Err(Violation::EmptyPlan);
        }
        let tx = match plan.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => return Err(Violation::EmptyPlan),
        };
        if transmitters.contains(tx) {
            return Err(Violation::DuplicateTransmitter { tx });
        }
        transmitters.insert(tx);

        let kind = plan.d2d_kind.expect("d2d plan without kind");
        let mut relayable = side.has[tx];
        if let D2dKind::IdleTime { host_errh } = kind {
            let host = decision.errh_plans[host_errh]
                .as_ref()
                .ok_or(Violation::IdleHostMismatch { tx })?;
            if !host.targeted.contains(tx) {
                return Err(Violation::IdleHostMismatch { tx });
            }
            if let Some(f) = decoded_file(host.combination.files, tx, side) {
                relayable.insert(f);
            }
            let budget = t_star.unwrap_or(0.0) - host.duration(b);
            if plan.adopted_rate * budget < b * (1.0 - REL) {
                return Err(Violation::IdleWindow { tx });
            }
        } else if meta.enforce_d2d_within_errh {
            if let Some(t_star) = t_star {
                if plan.duration(b) > t_star * (1.0 + REL) {
                    return Err(Violation::D2dTooSlow { tx });
                }
            }
        }
        if !plan.combination.files.is_subset_of(relayable) {
            return Err(Violation::HasContainment { tx });
        }
    }

    // C1/C2: all targeted sets pairwise disjoint.
    let mut seen = UserSet::EMPTY;
    let all_plans = decision
        .errh_plan_iter()
        .map(|(_, p)| p)
        .chain(decision.d2d_plans.iter());
    for plan in all_plans {
        if !seen.is_disjoint(plan.targeted) {
            let user = seen.intersect(plan.targeted).iter().next().unwrap();
            return Err(Violation::OverlappingTargets { user });
        }
        seen = seen.union(plan.targeted);
    }

    // Half-duplex: a transmitter may appear only in its own host's targeted
    // set (idle-time relays receive first, then transmit in the slack).
    for plan in &decision.d2d_plans {
        let tx = match plan.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        };
        let host = match plan.d2d_kind {
            Some(D2dKind::IdleTime { host_errh }) => Some(host_errh),
            _ => None,
        };
        for (e, ep) in decision.errh_plan_iter() {
            if ep.targeted.contains(tx) && Some(e) != host {
                return Err(Violation::HalfDuplex { user: tx });
            }
        }
        for other in &decision.d2d_plans {
            if other.targeted.contains(tx) {
                return Err(Violation::HalfDuplex { user: tx });
            }
        }
    }
    for tx in decision.extra_interferers.iter() {
        if transmitters.contains(tx) {
            return Err(Violation::DuplicateTransmitter { tx });
        }
        if seen.contains(tx) {
            return Err(Violation::HalfDuplex { user: tx });
        }
    }
    let transmitters = transmitters.union(decision.extra_interferers);

    // Rate floor (C6/C7) where the scheme honors it.
    if meta.enforce_rate_floor {
        let floor = inst.rate_threshold;
        for plan in decision
            .errh_plan_iter()
            .map(|(_, p)| p)
            .chain(decision.d2d_plans.iter())
        {
            if plan.adopted_rate < floor * (1.0 - REL) {
                return Err(Violation::RateFloor { rate: plan.adopted_rate, floor });
            }
        }
    }

    // Rate vs. capacity at the decision's own powers / transmitter set.
    let caps = channel.errh_caps_at(inst, &powers);
    for (e, plan) in decision.errh_plan_iter() {
        for u in plan.targeted.iter() {
            if side.wants[u].is_empty() {
                return Err(Violation::TargetNotWanting { user: u });
            }
            if caps[e][u] < plan.adopted_rate * (1.0 - REL) {
                return Err(Violation::RateAboveCapacity { user: u, rate: plan.adopted_rate, cap: caps[e][u] });
            }
        }
    }
    for plan in &decision.d2d_plans {
        let tx = match plan.combination.source {
            Source::User(k) => k,
            Source::Errh(_) => unreachable!(),
        };
        for u in plan.targeted.iter() {
            if side.wants[u].is_empty() {
                return Err(Violation::TargetNotWanting { user: u });
            }
            let cap = channel.d2d_rate_with(inst, transmitters, tx, u);
            if cap < plan.adopted_rate * (1.0 - REL) {
                return Err(Violation::RateAboveCapacity { user: u, rate: plan.adopted_rate, cap });
            }
        }
    }

    // Decodability and delivery consistency.
    let mut justified: Vec<(usize, usize)> = Vec::new();
    for plan in decision
        .errh_plan_iter()
        .map(|(_, p)| p)
        .chain(decision.d2d_plans.iter())
    {
        let coded = meta.rlnc_coded && matches!(plan.combination.source, Source::Errh(_));
        for u in plan.targeted.iter() {
            if coded {
                continue;
            }
            match decoded_file(plan.combination.files, u, side) {
                Some(f) => justified.push((u, f)),
                None => return Err(Violation::NotDecodable { user: u }),
            }
        }
    }
    for &(u, f) in &decision.deliveries {
        if !side.wants[u].contains(f) {
            return Err(Violation::UnjustifiedDelivery { user: u, file: f });
        }
        let ok = justified.contains(&(u, f))
            || (meta.rlnc_coded && decision.errh_plan_iter().any(|(_, p)| p.targeted.contains(u)));
        if !ok {
            return Err(Violation::UnjustifiedDelivery { user: u, file: f });
        }
    }
    // Every instantly-decodable targeted reception must actually deliver.
    for (u, f) in justified {
        if !decision.deliveries.contains(&(u, f)) {
            return Err(Violation::UnjustifiedDelivery { user: u, file: f });
        }
    }

    Ok(())
}

/// Deliveries implied by a set of IDNC plans: the unique wanted file each
/// targeted user decodes. Order follows plan order, then user id.
pub fn idnc_deliveries(decision: &SlotDecision, side: &SideState) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for plan in decision
        .errh_plan_iter()
        .map(|(_, p)| p)
        .chain(decision.d2d_plans.iter())
    {
        for u in plan.targeted.iter() {
            let f = decoded_file(plan.combination.files, u, side)
                .expect("targeted user cannot decode its plan");
            out.push((u, f));
        }
    }
    out
}

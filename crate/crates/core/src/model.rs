//! Domain types for scenarios, caches and side information, plus scenario
//! generation and per-slot state updates.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel;
use crate::config::{FixedScenario, ScenarioConfig};
use crate::sets::{FileSet, UserSet};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("file {file} delivered to user {user} is already in its Has set")]
    AlreadyHas { user: usize, file: usize },
    #[error("file {file} delivered to user {user} is not in its Wants set")]
    NotWanted { user: usize, file: usize },
    #[error("user {user} is listed both as recipient and as unserved")]
    RecipientMarkedUnserved { user: usize },
}

/// Fixed per-episode capacities used by replay scenarios. Rates are in
/// bits/s; zone membership is derived from `csm > 0`.
#[derive(Debug, Clone)]
pub struct FixedRates {
    /// K x N capacities from each eRRH to each user.
    pub errh_caps: Vec<Vec<f64>>,
    /// N x N device-to-device capacity status matrix, zero diagonal.
    pub csm: Vec<Vec<f64>>,
}

/// A static scenario: geometry, caches, channel geometry and all scalars.
/// Immutable for the duration of an episode (position redraw, when enabled,
/// lives in the per-slot channel state).
#[derive(Debug, Clone)]
pub struct NetworkInstance {
    pub num_errhs: usize,
    pub num_users: usize,
    pub num_files: usize,
    pub file_size_bits: f64,
    pub cache_ratio: f64,
    /// QoS floor in bits/s.
    pub rate_threshold: f64,
    pub errh_max_power_w: f64,
    pub user_power_w: f64,
    pub noise_power_w: f64,
    pub bandwidth_hz: f64,
    pub cell_radius_m: f64,
    pub coverage_radius_m: f64,
    pub errh_positions: Vec<(f64, f64)>,
    pub user_positions: Vec<(f64, f64)>,
    /// Per-eRRH cached file subset; the union covers the whole frame.
    pub caches: Vec<FileSet>,
    /// N x K linear path gains |h|^2 (path loss only; fading multiplies these).
    pub errh_gains: Vec<Vec<f64>>,
    /// N x N linear path gains for D2D links.
    pub d2d_gains: Vec<Vec<f64>>,
    pub fading: bool,
    pub redraw_positions_per_slot: bool,
    pub combo_cap: usize,
    pub max_slots: usize,
    pub stall_patience: usize,
    /// Present for replay scenarios; bypasses the channel model.
    pub fixed: Option<FixedRates>,
}

impl NetworkInstance {
    pub fn frame(&self) -> FileSet {
        FileSet::full(self.num_files)
    }

    pub fn all_users(&self) -> UserSet {
        UserSet::full(self.num_users)
    }

    /// True when per-slot channel draws can change anything; a slot with no
    /// feasible transmission is then worth retrying.
    pub fn channel_varies(&self) -> bool {
        self.fixed.is_none() && (self.fading || self.redraw_positions_per_slot)
    }
}

/// Per-user side information and completion-time accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct SideState {
    pub has: Vec<FileSet>,
    pub wants: Vec<FileSet>,
    pub initial_wants_size: Vec<usize>,
    /// Accumulated waiting time in seconds (slots spent with a non-empty
    /// Wants set and nothing received).
    pub delay: Vec<f64>,
    /// Sum of reciprocal effective rates over served slots; together with
    /// `recv_count` this carries the harmonic-mean rate.
    pub inv_rate_sum: Vec<f64>,
    /// Files received in instantly usable form so far.
    pub recv_count: Vec<usize>,
}

impl SideState {
    pub fn new(frame: FileSet, has: Vec<FileSet>) -> Self {
        let wants: Vec<FileSet> = has.iter().map(|h| frame.minus(*h)).collect();
        let initial_wants_size = wants.iter().map(|w| w.len()).collect();
        let n = has.len();
        Self {
            has,
            wants,
            initial_wants_size,
            delay: vec![0.0; n],
            inv_rate_sum: vec![0.0; n],
            recv_count: vec![0; n],
        }
    }

    pub fn num_users(&self) -> usize {
        self.has.len()
    }

    /// Users whose Wants set is still non-empty.
    pub fn wanting_users(&self) -> UserSet {
        self.wants
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_empty())
            .map(|(u, _)| u)
            .collect()
    }

    pub fn all_complete(&self) -> bool {
        self.wants.iter().all(|w| w.is_empty())
    }

    pub fn check_invariants(&self, frame: FileSet) {
        for u in 0..self.num_users() {
            assert!(self.has[u].is_disjoint(self.wants[u]), "Has/Wants overlap for user {u}");
            assert_eq!(self.has[u].union(self.wants[u]), frame, "Has/Wants do not partition the frame");
            assert_eq!(
                self.recv_count[u] + self.wants[u].len(),
                self.initial_wants_size[u],
                "reception count out of sync for user {u}"
            );
        }
    }
}

/// Harmonic mean of `count` rates whose reciprocals sum to `inv_sum`.
pub fn harmonic_mean(count: usize, inv_sum: f64) -> f64 {
    if count == 0 || inv_sum <= 0.0 {
        f64::INFINITY
    } else {
        count as f64 / inv_sum
    }
}

/// Move delivered files into Has sets, update reception accumulators at the
/// effective slot rate, and charge `t_max` of waiting time to every unserved
/// user that still wants something.
///
/// `delivered` holds (user, file) pairs; `idle_or_unserved` must be exactly
/// the users that received nothing this slot (not targeted by anything, or
/// busy transmitting).
pub fn apply_deliveries(
    state: &mut SideState,
    delivered: &[(usize, usize)],
    t_max: f64,
    idle_or_unserved: UserSet,
    file_size_bits: f64,
) -> Result<(), ModelError> {
    let mut recipients = UserSet::EMPTY;
    for &(user, file) in delivered {
        if state.has[user].contains(file) {
            return Err(ModelError::AlreadyHas { user, file });
        }
        if !state.wants[user].contains(file) {
            return Err(ModelError::NotWanted { user, file });
        }
        if idle_or_unserved.contains(user) {
            return Err(ModelError::RecipientMarkedUnserved { user });
        }
        state.wants[user].remove(file);
        state.has[user].insert(file);
        state.recv_count[user] += 1;
        recipients.insert(user);
    }
    // One slot's worth of reception time per served user, regardless of how
    // many files arrived: the effective rate is bits-delivered / t_max, so
    // the reciprocal contributions collapse to t_max / B per slot.
    for user in recipients.iter() {
        state.inv_rate_sum[user] += t_max / file_size_bits;
    }
    for user in idle_or_unserved.iter() {
        if !state.wants[user].is_empty() {
            state.delay[user] += t_max;
        }
    }
    Ok(())
}

/// Completion-time estimate from the running accumulators: how long this
/// user's frame takes if its average reception pace holds up.
pub fn anticipated_completion(state: &SideState, user: usize, file_size_bits: f64) -> f64 {
    if state.recv_count[user] == 0 {
        if state.wants[user].is_empty() {
            return state.delay[user];
        }
        return f64::INFINITY;
    }
    let r = harmonic_mean(state.recv_count[user], state.inv_rate_sum[user]);
    file_size_bits * state.initial_wants_size[user] as f64 / r + state.delay[user]
}

/// Uniform point in a flat-top hexagon of circumradius `r`, by rejection.
fn hexagon_point(rng: &mut impl Rng, r: f64) -> (f64, f64) {
    let h = r * 3f64.sqrt() / 2.0;
    loop {
        let x = rng.gen_range(-r..=r);
        let y = rng.gen_range(-h..=h);
        if y.abs() <= 3f64.sqrt() * (r - x.abs()) && y.abs() <= h {
            return (x, y);
        }
    }
}

/// Default eRRH layout: one at the cell center, the rest on a ring of radius
/// cell_radius/2 (K = 3 uses +-120 degrees).
pub fn default_errh_positions(k: usize, cell_radius: f64) -> Vec<(f64, f64)> {
    let mut pos = vec![(0.0, 0.0)];
    if k == 1 {
        return pos;
    }
    let ring = cell_radius / 2.0;
    if k == 3 {
        for ang in [2.0 * std::f64::consts::PI / 3.0, -2.0 * std::f64::consts::PI / 3.0] {
            pos.push((ring * ang.cos(), ring * ang.sin()));
        }
        return pos;
    }
    for j in 0..k - 1 {
        let ang = 2.0 * std::f64::consts::PI * j as f64 / (k - 1) as f64;
        pos.push((ring * ang.cos(), ring * ang.sin()));
    }
    pos
}

/// Build an instance plus initial side information from a config and a seed.
/// Deterministic: the same (config, seed) yields a bit-identical scenario.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> (NetworkInstance, SideState) {
    generate_scenario_inner(cfg, None, seed)
}

/// Replay variant: geometry and channel come from the fixed section.
pub fn replay_scenario(cfg: &ScenarioConfig, fixed: &FixedScenario) -> (NetworkInstance, SideState) {
    generate_scenario_inner(cfg, Some(fixed), 0)
}

fn generate_scenario_inner(
    cfg: &ScenarioConfig,
    fixed: Option<&FixedScenario>,
    seed: u64,
) -> (NetworkInstance, SideState) {
    cfg.validate().expect("invalid scenario config");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce9_a51_0);
    let (k, n, f) = (cfg.num_errhs, cfg.num_users, cfg.num_files);
    let frame = FileSet::full(f);

    let errh_positions = cfg
        .errh_positions
        .clone()
        .unwrap_or_else(|| default_errh_positions(k, cfg.cell_radius_m));
    let user_positions: Vec<(f64, f64)> =
        (0..n).map(|_| hexagon_point(&mut rng, cfg.cell_radius_m)).collect();

    let caches = match fixed {
        Some(fx) => fx.caches.iter().map(|c| c.iter().copied().collect()).collect(),
        None => generate_caches(&mut rng, k, f, cfg.cache_ratio),
    };

    let has: Vec<FileSet> = match fixed {
        Some(fx) => fx.has.iter().map(|h| h.iter().copied().collect()).collect(),
        None => {
            let lo = (cfg.has_fraction_lo * f as f64).ceil() as usize;
            let hi = ((cfg.has_fraction_hi * f as f64).floor() as usize).min(f).max(lo);
            (0..n)
                .map(|_| {
                    let size = rng.gen_range(lo..=hi);
                    let mut files: Vec<usize> = (0..f).collect();
                    files.shuffle(&mut rng);
                    files[..size].iter().copied().collect()
                })
                .collect()
        }
    };

    let errh_gains = channel::pathloss_gain_matrix(&user_positions, &errh_positions);
    let mut d2d_gains = channel::pathloss_gain_matrix(&user_positions, &user_positions);
    for (i, row) in d2d_gains.iter_mut().enumerate() {
        row[i] = 0.0; // a device never transmits to itself
    }

    let instance = NetworkInstance {
        num_errhs: k,
        num_users: n,
        num_files: f,
        file_size_bits: cfg.file_size_bits,
        cache_ratio: cfg.cache_ratio,
        rate_threshold: cfg.rate_threshold_bps(),
        errh_max_power_w: cfg.errh_max_power_w(),
        user_power_w: cfg.user_power_w(),
        noise_power_w: cfg.noise_power_w(),
        bandwidth_hz: cfg.bandwidth_hz,
        cell_radius_m: cfg.cell_radius_m,
        coverage_radius_m: cfg.coverage_radius_m,
        errh_positions,
        user_positions,
        caches,
        errh_gains,
        d2d_gains,
        fading: cfg.fading && fixed.is_none(),
        redraw_positions_per_slot: cfg.redraw_positions_per_slot && fixed.is_none(),
        combo_cap: cfg.combo_cap,
        max_slots: cfg.max_slots,
        stall_patience: cfg.stall_patience,
        fixed: fixed.map(|fx| FixedRates {
            errh_caps: fx.errh_caps.clone(),
            csm: fx.csm.clone(),
        }),
    };
    let side = SideState::new(frame, has);
    side.check_invariants(frame);
    (instance, side)
}

/// Deal the frame round-robin so the union constraint holds, then fill each
/// cache to round(mu*F) with uniformly chosen distinct files.
fn generate_caches(rng: &mut impl Rng, k: usize, f: usize, mu: f64) -> Vec<FileSet> {
    let cache_size = (mu * f as f64).round() as usize;
    let mut caches = vec![FileSet::EMPTY; k];
    let mut files: Vec<usize> = (0..f).collect();
    files.shuffle(rng);
    for (i, &file) in files.iter().enumerate() {
        caches[i % k].insert(file);
    }
    for cache in caches.iter_mut() {
        let mut rest: Vec<usize> = (0..f).filter(|&x| !cache.contains(x)).collect();
        rest.shuffle(rng);
        for &file in rest.iter().take(cache_size.saturating_sub(cache.len())) {
            cache.insert(file);
        }
        assert_eq!(cache.len(), cache_size, "cache fill failed; K too small for mu");
    }
    caches
}

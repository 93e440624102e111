//! Path loss, fading, SINR, achievable rates, and the D2D capacity status
//! matrix. Everything here is a pure function of its inputs; per-slot
//! randomness enters only through `ChannelState::for_slot`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::NetworkInstance;
use crate::sets::UserSet;

/// Minimum distance used when a transmitter and receiver coincide.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Path loss in dB at `distance_km`; distances are clamped to 1 m.
pub fn path_loss_db(distance_km: f64) -> f64 {
    let d = distance_km.max(MIN_DISTANCE_M / 1000.0);
    148.0 + 40.0 * d.log10()
}

/// Linear power gain |h|^2 implied by the path-loss law.
pub fn path_gain_linear(distance_m: f64) -> f64 {
    10f64.powf(-path_loss_db(distance_m / 1000.0) / 10.0)
}

/// Matrix of linear path gains, rows indexed by `rx`, columns by `tx`.
pub fn pathloss_gain_matrix(rx: &[(f64, f64)], tx: &[(f64, f64)]) -> Vec<Vec<f64>> {
    rx.iter()
        .map(|&(xr, yr)| {
            tx.iter()
                .map(|&(xt, yt)| path_gain_linear(((xr - xt).powi(2) + (yr - yt).powi(2)).sqrt()))
                .collect()
        })
        .collect()
}

/// Achievable rate (bits/s) from eRRH `e` to the user whose per-eRRH gains
/// are `gains_row`, with the given transmit powers. eRRHs at zero power add
/// no interference and a zero-power source yields rate zero.
pub fn errh_rate(powers: &[f64], gains_row: &[f64], e: usize, noise_w: f64, bandwidth_hz: f64) -> f64 {
    let signal = powers[e] * gains_row[e];
    let interference: f64 = powers
        .iter()
        .zip(gains_row)
        .enumerate()
        .filter(|(j, _)| *j != e)
        .map(|(_, (p, g))| p * g)
        .sum();
    bandwidth_hz * (1.0 + signal / (noise_w + interference)).log2()
}

/// Achievable D2D rate (bits/s) from transmitter `k` to receiver `i` when
/// the users in `active` transmit simultaneously at power `q`. Zero outside
/// the transmitter's coverage zone.
pub fn d2d_rate(
    q_w: f64,
    d2d_gains: &[Vec<f64>],
    zones: &[UserSet],
    active: UserSet,
    k: usize,
    i: usize,
    noise_w: f64,
    bandwidth_hz: f64,
) -> f64 {
    debug_assert!(active.contains(k));
    if k == i || !zones[k].contains(i) {
        return 0.0;
    }
    let signal = q_w * d2d_gains[i][k];
    let interference: f64 = active
        .iter()
        .filter(|&kp| kp != k && kp != i)
        .map(|kp| q_w * d2d_gains[i][kp])
        .sum();
    bandwidth_hz * (1.0 + signal / (noise_w + interference)).log2()
}

/// Coverage zones from positions: `j` is in `Z_i` iff the distance is at
/// most the coverage radius (self excluded).
pub fn coverage_zones(positions: &[(f64, f64)], radius_m: f64) -> Vec<UserSet> {
    let n = positions.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| {
                    j != i && {
                        let (dx, dy) = (positions[i].0 - positions[j].0, positions[i].1 - positions[j].1);
                        (dx * dx + dy * dy).sqrt() <= radius_m
                    }
                })
                .collect()
        })
        .collect()
}

/// One slot's channel realization. For replay scenarios this is constant and
/// copied from the fixture; otherwise gains are path loss times a unit-mean
/// exponential fading draw (when fading is enabled), redrawn every slot.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub user_positions: Vec<(f64, f64)>,
    /// Per-user coverage zone, self excluded.
    pub zones: Vec<UserSet>,
    /// N x K linear gains |h|^2 for eRRH links.
    pub errh_gains: Vec<Vec<f64>>,
    /// N x N linear gains for D2D links, zero diagonal.
    pub d2d_gains: Vec<Vec<f64>>,
    /// K x N capacities (bits/s) with every eRRH at P_max.
    pub errh_caps: Vec<Vec<f64>>,
    /// N x N capacity status matrix (bits/s): interference-free pair rates,
    /// zero diagonal and outside coverage zones.
    pub csm: Vec<Vec<f64>>,
    /// True when rates come from a fixture and must not be recomputed.
    pub fixed: bool,
}

/// Stable per-slot seed derivation. Scheme-independent, so every scheme sees
/// the same channel draws under paired seeding.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn slot_seed(episode_seed: u64, slot: usize) -> u64 {
    splitmix64(episode_seed ^ splitmix64(slot as u64 ^ 0x0C5A_11ED))
}

impl ChannelState {
    pub fn for_slot(inst: &NetworkInstance, episode_seed: u64, slot: usize) -> Self {
        if let Some(fx) = &inst.fixed {
            let n = inst.num_users;
            let zones: Vec<UserSet> = (0..n)
                .map(|k| (0..n).filter(|&i| i != k && fx.csm[k][i] > 0.0).collect())
                .collect();
            return Self {
                user_positions: inst.user_positions.clone(),
                zones,
                errh_gains: inst.errh_gains.clone(),
                d2d_gains: inst.d2d_gains.clone(),
                errh_caps: fx.errh_caps.clone(),
                csm: fx.csm.clone(),
                fixed: true,
            };
        }

        let mut rng = ChaCha8Rng::seed_from_u64(slot_seed(episode_seed, slot));
        let (n, k) = (inst.num_users, inst.num_errhs);

        let (user_positions, mut errh_gains, mut d2d_gains) = if inst.redraw_positions_per_slot {
            let pos: Vec<(f64, f64)> = (0..n).map(|_| hexagon_point(&mut rng, inst.cell_radius_m)).collect();
            let eg = pathloss_gain_matrix(&pos, &inst.errh_positions);
            let dg = pathloss_gain_matrix(&pos, &pos);
            (pos, eg, dg)
        } else {
            (inst.user_positions.clone(), inst.errh_gains.clone(), inst.d2d_gains.clone())
        };

        if inst.fading {
            for row in errh_gains.iter_mut() {
                for g in row.iter_mut() {
                    *g *= exp_unit(&mut rng);
                }
            }
            for row in d2d_gains.iter_mut() {
                for g in row.iter_mut() {
                    *g *= exp_unit(&mut rng);
                }
            }
        }
        for (i, row) in d2d_gains.iter_mut().enumerate() {
            row[i] = 0.0;
        }

        let zones = coverage_zones(&user_positions, inst.coverage_radius_m);
        let pmax = vec![inst.errh_max_power_w; k];
        let errh_caps: Vec<Vec<f64>> = (0..k)
            .map(|e| {
                (0..n)
                    .map(|u| errh_rate(&pmax, &errh_gains[u], e, inst.noise_power_w, inst.bandwidth_hz))
                    .collect()
            })
            .collect();
        let csm = build_csm(inst, &d2d_gains, &zones);

        Self {
            user_positions,
            zones,
            errh_gains,
            d2d_gains,
            errh_caps,
            csm,
            fixed: false,
        }
    }

    /// Capacities of every eRRH link at an arbitrary power vector. Fixture
    /// capacities are returned verbatim in replay mode.
    pub fn errh_caps_at(&self, inst: &NetworkInstance, powers: &[f64]) -> Vec<Vec<f64>> {
        if self.fixed {
            return self.errh_caps.clone();
        }
        (0..inst.num_errhs)
            .map(|e| {
                (0..inst.num_users)
                    .map(|u| errh_rate(powers, &self.errh_gains[u], e, inst.noise_power_w, inst.bandwidth_hz))
                    .collect()
            })
            .collect()
    }

    /// True pair rate once the transmitter set is known (one fixed-point pass
    /// over the interference). Replay mode keeps the fixture rate.
    pub fn d2d_rate_with(&self, inst: &NetworkInstance, active: UserSet, k: usize, i: usize) -> f64 {
        if self.fixed {
            return self.csm[k][i];
        }
        d2d_rate(
            inst.user_power_w,
            &self.d2d_gains,
            &self.zones,
            active,
            k,
            i,
            inst.noise_power_w,
            inst.bandwidth_hz,
        )
    }
}

fn exp_unit(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln()
}

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

/// Interference-free pair rates: what each transmitter could offer each zone
/// member if it transmitted alone. Zero diagonal and out-of-zone entries.
pub fn build_csm(inst: &NetworkInstance, d2d_gains: &[Vec<f64>], zones: &[UserSet]) -> Vec<Vec<f64>> {
    let n = inst.num_users;
    (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    if i == k || !zones[k].contains(i) {
                        0.0
                    } else {
                        d2d_rate(
                            inst.user_power_w,
                            d2d_gains,
                            zones,
                            UserSet::singleton(k),
                            k,
                            i,
                            inst.noise_power_w,
                            inst.bandwidth_hz,
                        )
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::model::generate_scenario;

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1.0) - 148.0).abs() < 1e-12);
        assert!((path_loss_db(0.1) - 108.0).abs() < 1e-12);
        assert!((path_loss_db(0.9) - 146.1697).abs() < 1e-3);
        // Zero distance clamps to 1 m instead of blowing up.
        assert!(path_loss_db(0.0).is_finite());
        assert!((path_loss_db(0.0) - path_loss_db(0.001)).abs() < 1e-12);
    }

    #[test]
    fn single_active_errh_is_interference_free() {
        let powers = [2.0, 0.0];
        let gains = [1e-9, 5e-10];
        let n0 = 1e-12;
        let r = errh_rate(&powers, &gains, 0, n0, 1.0);
        let expected = (1.0 + 2.0 * 1e-9 / n0).log2();
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_power_means_zero_rate() {
        let r = errh_rate(&[0.0, 1.0], &[1e-9, 1e-10], 0, 1e-12, 1e6);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn two_errh_sinr_hand_computed() {
        // SINR = 1e-9 / (1e-12 + 1e-10) ~= 9.901, rate ~= 3.447 * bandwidth.
        let r = errh_rate(&[1.0, 1.0], &[1e-9, 1e-10], 0, 1e-12, 1.0);
        assert!((r - 3.447).abs() < 1e-3);
    }

    #[test]
    fn d2d_single_transmitter_and_zone_rule() {
        let gains = vec![vec![0.0, 1e-10], vec![1e-10, 0.0]];
        let zones = vec![UserSet::singleton(1), UserSet::EMPTY];
        let r = d2d_rate(0.5, &gains, &zones, UserSet::singleton(0), 0, 1, 1e-12, 1.0);
        let expected = (1.0f64 + 0.5 * 1e-10 / 1e-12).log2();
        assert!((r - expected).abs() < 1e-12);
        // Receiver outside the transmitter's zone.
        let r0 = d2d_rate(0.5, &gains, &zones, UserSet::singleton(1), 1, 0, 1e-12, 1.0);
        assert_eq!(r0, 0.0);
    }

    #[test]
    fn symmetric_simultaneous_transmitters() {
        // Users 0 and 1 transmit to 2 and 3 with mirror-image gains.
        let g = 1e-10;
        let cross = 2e-11;
        let gains = vec![
            vec![0.0; 4],
            vec![0.0; 4],
            vec![g, cross, 0.0, 0.0],
            vec![cross, g, 0.0, 0.0],
        ];
        let zones = vec![UserSet::singleton(2), UserSet::singleton(3), UserSet::EMPTY, UserSet::EMPTY];
        let active: UserSet = [0usize, 1].into_iter().collect();
        let r02 = d2d_rate(0.5, &gains, &zones, active, 0, 2, 1e-12, 1.0);
        let r13 = d2d_rate(0.5, &gains, &zones, active, 1, 3, 1e-12, 1.0);
        assert!((r02 - r13).abs() < 1e-12);
    }

    #[test]
    fn rate_monotonicity() {
        let n0 = 1e-12;
        let gains = [1e-9, 1e-10, 3e-10];
        let base = errh_rate(&[1.0, 1.0, 1.0], &gains, 0, n0, 1.0);
        // Lowering an interferer's power cannot decrease the rate.
        let less_interf = errh_rate(&[1.0, 0.2, 1.0], &gains, 0, n0, 1.0);
        assert!(less_interf >= base);
        // Raising own power cannot decrease the rate.
        let more_own = errh_rate(&[1.5, 1.0, 1.0], &gains, 0, n0, 1.0);
        assert!(more_own >= base);
    }

    #[test]
    fn csm_invariants_on_generated_instance() {
        let cfg = ScenarioConfig {
            num_users: 8,
            coverage_radius_m: 600.0,
            fading: false,
            ..Default::default()
        };
        let (inst, _) = generate_scenario(&cfg, 3);
        let ch = ChannelState::for_slot(&inst, 3, 1);
        for k in 0..8 {
            assert_eq!(ch.csm[k][k], 0.0);
            for i in 0..8 {
                if i != k && !ch.zones[k].contains(i) {
                    assert_eq!(ch.csm[k][i], 0.0);
                }
                if i != k && ch.zones[k].contains(i) {
                    assert!(ch.csm[k][i] > 0.0);
                }
            }
        }
    }

    #[test]
    fn single_user_csm_is_zero() {
        let cfg = ScenarioConfig {
            num_users: 1,
            num_errhs: 1,
            num_files: 2,
            cache_ratio: 1.0,
            ..Default::default()
        };
        let (inst, _) = generate_scenario(&cfg, 1);
        let ch = ChannelState::for_slot(&inst, 1, 1);
        assert_eq!(ch.csm, vec![vec![0.0]]);
    }

    #[test]
    fn out_of_zone_users_give_zero_matrix() {
        let cfg = ScenarioConfig {
            num_users: 5,
            coverage_radius_m: 1e-6,
            ..Default::default()
        };
        let (inst, _) = generate_scenario(&cfg, 9);
        let ch = ChannelState::for_slot(&inst, 9, 1);
        assert!(ch.csm.iter().flatten().all(|&r| r == 0.0));
    }

    #[test]
    fn slot_draws_are_deterministic_and_slot_dependent() {
        let cfg = ScenarioConfig::default();
        let (inst, _) = generate_scenario(&cfg, 5);
        let a = ChannelState::for_slot(&inst, 5, 1);
        let b = ChannelState::for_slot(&inst, 5, 1);
        assert_eq!(a.errh_gains, b.errh_gains);
        let c = ChannelState::for_slot(&inst, 5, 2);
        assert_ne!(a.errh_gains, c.errh_gains);
    }
}

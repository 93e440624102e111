//! Local power allocation for a fixed eRRH schedule: maximize the weighted
//! sum of worst-case scheduled-user rates under per-eRRH box constraints.
//!
//! The objective is non-convex and non-smooth (a min over users per eRRH),
//! so a derivative-free cyclic coordinate ascent is used: per-eRRH grid scan
//! over [0, P_max] followed by a golden-section refinement around the best
//! grid cell, swept until the objective stops improving.

use crate::sets::UserSet;

pub const DEFAULT_REL_TOL: f64 = 1e-6;
pub const MAX_SWEEPS: usize = 50;
const GRID_POINTS: usize = 17;
const GOLDEN_ITERS: usize = 24;

#[derive(Debug, Clone)]
pub struct PowerAllocation {
    /// Per-eRRH transmit power in watts; unassigned eRRHs are pinned to 0.
    pub powers: Vec<f64>,
    pub objective: f64,
}

/// Weighted sum-rate of the schedule at a given power vector:
/// sum over assigned eRRHs of |targets| / B * min over targets of
/// log2(1 + SINR). eRRHs without targets contribute nothing (and, at zero
/// power, no interference).
pub fn schedule_objective(
    schedule: &[Option<UserSet>],
    errh_gains: &[Vec<f64>],
    powers: &[f64],
    noise_w: f64,
    file_size_bits: f64,
) -> f64 {
    let mut total = 0.0;
    for (e, targets) in schedule.iter().enumerate() {
        let Some(targets) = targets else { continue };
        if targets.is_empty() {
            continue;
        }
        let mut worst = f64::INFINITY;
        for u in targets.iter() {
            let gains = &errh_gains[u];
            let signal = powers[e] * gains[e];
            let interference: f64 = powers
                .iter()
                .zip(gains)
                .enumerate()
                .filter(|(j, _)| *j != e)
                .map(|(_, (p, g))| p * g)
                .sum();
            worst = worst.min((1.0 + signal / (noise_w + interference)).log2());
        }
        total += targets.len() as f64 / file_size_bits * worst;
    }
    total
}

/// Power allocation by cyclic coordinate ascent, run from a small set of
/// deterministic starting points (uniform P_max plus each assigned eRRH
/// alone at P_max) to escape poor local optima of the min-rate landscape.
/// Never returns a worse objective than the uniform-P_max starting point.
pub fn optimize_powers(
    schedule: &[Option<UserSet>],
    errh_gains: &[Vec<f64>],
    p_max: f64,
    noise_w: f64,
    file_size_bits: f64,
) -> PowerAllocation {
    let k = schedule.len();
    let assigned: Vec<usize> = (0..k)
        .filter(|&e| schedule[e].map_or(false, |t| !t.is_empty()))
        .collect();
    if assigned.is_empty() {
        return PowerAllocation { powers: vec![0.0; k], objective: 0.0 };
    }

    let uniform: Vec<f64> = (0..k)
        .map(|e| if assigned.contains(&e) { p_max } else { 0.0 })
        .collect();
    let mut starts: Vec<Vec<f64>> = vec![uniform];
    if assigned.len() > 1 {
        for &solo in &assigned {
            let mut s = vec![0.0; k];
            s[solo] = p_max;
            starts.push(s);
        }
    }

    let mut best: Option<PowerAllocation> = None;
    for start in starts {
        let out = ascend(schedule, errh_gains, p_max, noise_w, file_size_bits, &assigned, start);
        if best.as_ref().map_or(true, |b| out.objective > b.objective) {
            best = Some(out);
        }
    }
    best.unwrap()
}

fn ascend(
    schedule: &[Option<UserSet>],
    errh_gains: &[Vec<f64>],
    p_max: f64,
    noise_w: f64,
    file_size_bits: f64,
    assigned: &[usize],
    mut powers: Vec<f64>,
) -> PowerAllocation {
    let eval = |powers: &[f64]| schedule_objective(schedule, errh_gains, powers, noise_w, file_size_bits);
    let mut best = eval(&powers);

    for _ in 0..MAX_SWEEPS {
        let before = best;
        for &e in assigned {
            let mut scan_best = (powers[e], best);
            // Coarse scan: the per-coordinate slice need not be unimodal.
            for i in 0..GRID_POINTS {
                let p = p_max * i as f64 / (GRID_POINTS - 1) as f64;
                powers[e] = p;
                let obj = eval(&powers);
                if obj > scan_best.1 {
                    scan_best = (p, obj);
                }
            }
            // Golden-section refinement in the bracketing grid cells.
            let cell = p_max / (GRID_POINTS - 1) as f64;
            let mut lo = (scan_best.0 - cell).max(0.0);
            let mut hi = (scan_best.0 + cell).min(p_max);
            let phi = (5f64.sqrt() - 1.0) / 2.0;
            let mut x1 = hi - phi * (hi - lo);
            let mut x2 = lo + phi * (hi - lo);
            powers[e] = x1;
            let mut f1 = eval(&powers);
            powers[e] = x2;
            let mut f2 = eval(&powers);
            for _ in 0..GOLDEN_ITERS {
                if f1 < f2 {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    powers[e] = x2;
                    f2 = eval(&powers);
                } else {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    powers[e] = x1;
                    f1 = eval(&powers);
                }
            }
            let refined = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
            let (p, obj) = if refined.1 > scan_best.1 { refined } else { scan_best };
            powers[e] = p;
            best = obj;
        }
        if best - before <= DEFAULT_REL_TOL * before.abs().max(1e-300) {
            break;
        }
    }
    PowerAllocation { powers, objective: best }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_errh_returns_p_max() {
        // No interference: the objective is monotone in the single power.
        let schedule = vec![Some(UserSet::singleton(0))];
        let gains = vec![vec![1e-10]];
        let out = optimize_powers(&schedule, &gains, 0.05, 1e-14, 10.0);
        assert!((out.powers[0] - 0.05).abs() < 1e-6 * 0.05);
    }

    #[test]
    fn empty_schedule_is_all_zero() {
        let schedule = vec![None, None];
        let gains = vec![vec![1e-10, 1e-10]];
        let out = optimize_powers(&schedule, &gains, 0.05, 1e-14, 10.0);
        assert_eq!(out.powers, vec![0.0, 0.0]);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn unassigned_errh_stays_silent() {
        let schedule = vec![Some(UserSet::singleton(0)), None];
        let gains = vec![vec![1e-10, 5e-11], vec![2e-11, 1e-10]];
        let out = optimize_powers(&schedule, &gains, 0.05, 1e-14, 10.0);
        assert_eq!(out.powers[1], 0.0);
    }

    fn random_case(rng: &mut impl Rng, k: usize, n: usize) -> (Vec<Option<UserSet>>, Vec<Vec<f64>>) {
        let gains: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| 10f64.powf(rng.gen_range(-14.0..-9.0))).collect())
            .collect();
        // Partition a random subset of users across the eRRHs.
        let mut schedule = vec![UserSet::EMPTY; k];
        for u in 0..n {
            schedule[rng.gen_range(0..k)].insert(u);
        }
        let schedule = schedule
            .into_iter()
            .map(|t| if t.is_empty() { None } else { Some(t) })
            .collect();
        (schedule, gains)
    }

    #[test]
    fn beats_uniform_pmax_and_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p_max = 0.055;
        let n0 = 4e-15;
        for case in 0..30 {
            let k = 2 + case % 2;
            let (schedule, gains) = random_case(&mut rng, k, 5);
            let out = optimize_powers(&schedule, &gains, p_max, n0, 1e6);
            let uniform: Vec<f64> = (0..k)
                .map(|e| if schedule[e].is_some() { p_max } else { 0.0 })
                .collect();
            let base = schedule_objective(&schedule, &gains, &uniform, n0, 1e6);
            assert!(out.objective >= base - 1e-9 * base.abs());
            // 100-point random sample as a lower-bound oracle.
            for _ in 0..100 {
                let sample: Vec<f64> = (0..k)
                    .map(|e| if schedule[e].is_some() { rng.gen_range(0.0..=p_max) } else { 0.0 })
                    .collect();
                let s = schedule_objective(&schedule, &gains, &sample, n0, 1e6);
                assert!(
                    out.objective >= s - 1e-6 * s.abs(),
                    "sampled vector beat the optimizer: {s} > {}",
                    out.objective
                );
            }
            // Box feasibility.
            assert!(out.powers.iter().all(|&p| (0.0..=p_max * (1.0 + 1e-12)).contains(&p)));
        }
    }
}

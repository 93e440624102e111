//! IDNC side-information logic: decodability, targeted-user computation and
//! combination enumeration.
//!
//! A combination is a non-empty set of files XORed together. A user is
//! *instantly served* by it when exactly one constituent file is in its
//! Wants set and every other constituent is already in its Has set, so the
//! received XOR re-XORed with held files yields the one missing file.

use crate::model::SideState;
use crate::sets::{FileSet, UserSet};

/// Who emits a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Errh(usize),
    User(usize),
}

/// A non-empty XOR combination and its source. eRRH combinations must come
/// from the source cache, user combinations from the transmitter's Has set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Combination {
    pub files: FileSet,
    pub source: Source,
}

/// How a D2D transmission is hosted within the slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D2dKind {
    /// Runs for its own duration alongside the eRRH transmissions.
    FreeStanding,
    /// Squeezed into the slack its transmitter's eRRH leaves behind the
    /// slowest eRRH; the transmitter first receives from `host_errh`.
    IdleTime { host_errh: usize },
}

/// One scheduled transmission: combination, adopted rate, recipients.
#[derive(Debug, Clone)]
pub struct TransmissionPlan {
    pub combination: Combination,
    /// bits/s; at most the capacity of every targeted user from this source.
    pub adopted_rate: f64,
    pub targeted: UserSet,
    /// Transmit power in watts (eRRH plans only).
    pub power: Option<f64>,
    pub d2d_kind: Option<D2dKind>,
}

impl TransmissionPlan {
    pub fn duration(&self, file_size_bits: f64) -> f64 {
        file_size_bits / self.adopted_rate
    }
}

/// True iff exactly one constituent file is wanted and the rest are held.
pub fn is_instantly_decodable(files: FileSet, user: usize, side: &SideState) -> bool {
    let wanted = files.intersect(side.wants[user]);
    wanted.len() == 1 && files.minus(wanted).is_subset_of(side.has[user])
}

/// The file a served user decodes from the combination.
pub fn decoded_file(files: FileSet, user: usize, side: &SideState) -> Option<usize> {
    let wanted = files.intersect(side.wants[user]);
    if wanted.len() == 1 && files.minus(wanted).is_subset_of(side.has[user]) {
        Some(wanted.only())
    } else {
        None
    }
}

/// All users (restricted to `zone` when given) that are instantly served by
/// the combination and whose capacity from the source supports the adopted
/// rate. `capacity` maps a user to its rate from the plan's source.
pub fn targeted_users(
    files: FileSet,
    adopted_rate: f64,
    capacity: impl Fn(usize) -> f64,
    side: &SideState,
    zone: Option<UserSet>,
) -> UserSet {
    debug_assert!(adopted_rate > 0.0);
    let mut out = UserSet::EMPTY;
    for user in 0..side.num_users() {
        if let Some(z) = zone {
            if !z.contains(user) {
                continue;
            }
        }
        if side.wants[user].is_empty() {
            continue;
        }
        if is_instantly_decodable(files, user, side) && capacity(user) >= adopted_rate {
            out.insert(user);
        }
    }
    out
}

/// Users instantly served by a combination, ignoring rates and zones.
pub fn served_users(files: FileSet, side: &SideState) -> UserSet {
    (0..side.num_users())
        .filter(|&u| !side.wants[u].is_empty() && is_instantly_decodable(files, u, side))
        .collect()
}

/// Every subset of `cache` with at most `max_size` files that instantly
/// serves at least one user with a non-empty Wants set. Subsets are emitted
/// in ascending mask order, which downstream tie-breaking relies on.
pub fn enumerate_idnc_combinations(side: &SideState, cache: FileSet, max_size: usize) -> Vec<FileSet> {
    let files: Vec<usize> = cache.iter().collect();
    let mut out = Vec::new();
    // Iterate subsets of the cache via the compact index mask, then map back
    // to file ids so the output order follows the file-set mask order.
    let total = 1u64 << files.len();
    let mut masks: Vec<FileSet> = Vec::new();
    for m in 1..total {
        if (m as u64).count_ones() as usize > max_size {
            continue;
        }
        let mut fs = FileSet::EMPTY;
        for (idx, &file) in files.iter().enumerate() {
            if m >> idx & 1 == 1 {
                fs.insert(file);
            }
        }
        masks.push(fs);
    }
    masks.sort();
    for fs in masks {
        if !served_users(fs, side).is_empty() {
            out.push(fs);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::FileSet;

    fn side(has: Vec<FileSet>, num_files: usize) -> SideState {
        SideState::new(FileSet::full(num_files), has)
    }

    fn fs(files: &[usize]) -> FileSet {
        files.iter().copied().collect()
    }

    #[test]
    fn xor_pair_decodes_for_holder_of_other_file() {
        // User wants {f0, f1}, has {f2, f3}; combination f0 xor f3 decodes f0.
        let s = side(vec![fs(&[2, 3])], 4);
        assert!(is_instantly_decodable(fs(&[0, 3]), 0, &s));
        assert_eq!(decoded_file(fs(&[0, 3]), 0, &s), Some(0));
    }

    #[test]
    fn singleton_wanted_file_is_decodable() {
        let s = side(vec![fs(&[1])], 2);
        assert!(is_instantly_decodable(fs(&[0]), 0, &s));
    }

    #[test]
    fn two_wanted_files_are_not_decodable() {
        let s = side(vec![fs(&[2])], 3);
        assert!(!is_instantly_decodable(fs(&[0, 1]), 0, &s));
    }

    #[test]
    fn missing_side_information_blocks_decoding() {
        // Wants f0, but does not hold f1.
        let s = side(vec![fs(&[2])], 3);
        assert!(!is_instantly_decodable(fs(&[0, 1]), 0, &s));
    }

    #[test]
    fn targeted_users_respects_rate_and_zone() {
        // Users 0,1 want f0; capacities 5 and 2.
        let s = side(vec![fs(&[1]), fs(&[1])], 2);
        let caps = [5.0, 2.0];
        let t = targeted_users(fs(&[0]), 3.0, |u| caps[u], &s, None);
        assert_eq!(t, UserSet::singleton(0));
        let t = targeted_users(fs(&[0]), 2.0, |u| caps[u], &s, None);
        assert_eq!(t.len(), 2);
        let t = targeted_users(fs(&[0]), 7.0, |u| caps[u], &s, None);
        assert!(t.is_empty());
        let t = targeted_users(fs(&[0]), 1.0, |u| caps[u], &s, Some(UserSet::singleton(1)));
        assert_eq!(t, UserSet::singleton(1));
    }

    #[test]
    fn same_file_serves_two_requesters() {
        let s = side(vec![fs(&[1]), fs(&[1])], 2);
        let combos = enumerate_idnc_combinations(&s, fs(&[0]), 1);
        assert_eq!(combos, vec![fs(&[0])]);
        assert_eq!(served_users(fs(&[0]), &s).len(), 2);
    }

    #[test]
    fn cross_has_pair_is_enumerated() {
        // u0 wants f2 has f3; u1 wants f3 has f2 -> {f2, f3} is valid.
        let s = side(vec![fs(&[0, 1, 3]), fs(&[0, 1, 2])], 4);
        let combos = enumerate_idnc_combinations(&s, fs(&[1, 2, 3]), 3);
        assert!(combos.contains(&fs(&[2, 3])));
    }

    #[test]
    fn enumeration_matches_exhaustive_subset_oracle() {
        // Tiny instance: brute force over all subsets of the cache, keeping
        // those serving at least one user, must equal the enumeration with
        // an unrestricted size cap.
        let s = side(vec![fs(&[0, 1]), fs(&[1, 2]), fs(&[0, 2])], 3);
        let cache = fs(&[0, 1, 2]);
        let enumerated = enumerate_idnc_combinations(&s, cache, 3);
        let mut oracle = Vec::new();
        for m in 1u64..8 {
            let combo = FileSet(m);
            if !combo.is_subset_of(cache) {
                continue;
            }
            let serves = (0..3).any(|u| is_instantly_decodable(combo, u, &s));
            if serves {
                oracle.push(combo);
            }
        }
        assert_eq!(enumerated, oracle);
    }

    #[test]
    fn decode_replay_recovers_exactly_one_wanted_file() {
        // XOR replay at the accounting level: for every enumerated
        // combination and every served user, the decoded file is wanted and
        // all other constituents are held.
        let s = side(vec![fs(&[0, 3]), fs(&[1, 2]), fs(&[2, 3])], 4);
        for combo in enumerate_idnc_combinations(&s, FileSet::full(4), 4) {
            let served = served_users(combo, &s);
            assert!(!served.is_empty());
            for u in served.iter() {
                let f = decoded_file(combo, u, &s).unwrap();
                assert!(s.wants[u].contains(f));
                assert!(combo.minus(FileSet::singleton(f)).is_subset_of(s.has[u]));
            }
        }
    }
}

//! Multicast groups, XOR-coded messages, orthogonal and concurrent schedules,
//! and an end-to-end decode replay.
//!
//! Users are indexed in ascending gain order, so the smallest index in a
//! multicast set is its weakest member and fixes the group that serves it.
//! A message sent to group `j` is decodable by every user `i ≥ j`: stronger
//! receivers can always peel off the weaker layers.

mod coding;
mod decode;
mod schedule;

pub use coding::{coded_message, delivery_plan, CodedMessage, Constituent, PlannedGroup};
pub use decode::{simulate_decode, DecodeReport, UserDecode};
pub use schedule::{
    concurrent_schedule, orthogonal_schedule, schedule_for, transmission_time, DeliverySchedule,
    ScheduleEntry,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{binomial, subsets_of_size, PlacementMode, SystemParams, UserSet};

/// A set of users served by one coded transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticastSet {
    pub members: UserSet,
    /// Zero-based index of the weakest member.
    pub worst: usize,
    /// Payload size as a fraction of one file.
    pub payload_fraction: f64,
}

impl MulticastSet {
    /// `None` for the empty set.
    pub fn new(members: UserSet, payload_fraction: f64) -> Option<Self> {
        members.min().map(|worst| MulticastSet {
            members,
            worst,
            payload_fraction,
        })
    }
}

/// All `(t+1)`-subsets of users, bucketed by weakest member. Group `i`
/// (zero-based) holds the `C(K−1−i, t)` sets whose minimum is `i`.
pub fn build_groups_centralized(params: &SystemParams) -> Result<Vec<Vec<MulticastSet>>> {
    let t = params.require_integer_t()?;
    let k = params.users;
    if t >= k {
        return Ok(Vec::new());
    }
    let fraction = 1.0 / binomial(k as u64, t as u64)? as f64;
    let mut groups: Vec<Vec<MulticastSet>> = vec![Vec::new(); k - t];
    for set in subsets_of_size(k, t + 1) {
        let ms = MulticastSet::new(set, fraction).expect("t+1 >= 1 members");
        groups[ms.worst].push(ms);
    }
    Ok(groups)
}

/// All nonempty subsets of users, bucketed by weakest member. The payload of
/// set `S` is the expected exclusivity-class size `q^{|S|−1} (1−q)^{K−|S|+1}`.
pub fn build_groups_decentralized(params: &SystemParams) -> Vec<Vec<MulticastSet>> {
    let k = params.users;
    let q = params.q_f64();
    if q >= 1.0 {
        return Vec::new();
    }
    (0..k)
        .map(|worst| {
            let others = UserSet::full(k).bits() & !UserSet::full(worst + 1).bits();
            // Enumerate subsets of the stronger users and add the worst one.
            let mut sets = Vec::new();
            let mut sub = others;
            loop {
                let members = UserSet::from_bits(sub).with(worst);
                let size = members.len() as i32;
                let fraction = q.powi(size - 1) * (1.0 - q).powi(k as i32 - size + 1);
                sets.push(MulticastSet::new(members, fraction).expect("nonempty"));
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & others;
            }
            sets.sort_by_key(|s| (s.members.len(), s.members.one_based()));
            sets
        })
        .collect()
}

pub fn build_groups(params: &SystemParams, mode: PlacementMode) -> Result<Vec<Vec<MulticastSet>>> {
    match mode {
        PlacementMode::Centralized => build_groups_centralized(params),
        PlacementMode::Decentralized => Ok(build_groups_decentralized(params)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::group_loads_decentralized;
    use num_rational::Ratio;

    fn labels(group: &[MulticastSet]) -> Vec<String> {
        group.iter().map(|s| s.members.to_string()).collect()
    }

    #[test]
    fn centralized_groups_example() {
        let p = SystemParams::new(4, 4, Ratio::from_integer(2)).unwrap();
        let groups = build_groups_centralized(&p).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(labels(&groups[0]), ["{1,2,3}", "{1,2,4}", "{1,3,4}"]);
        assert_eq!(labels(&groups[1]), ["{2,3,4}"]);
        assert!((groups[0][0].payload_fraction - 1.0 / 6.0).abs() < 1e-16);
    }

    #[test]
    fn centralized_groups_small_cases() {
        let p = SystemParams::new(2, 2, Ratio::from_integer(1)).unwrap();
        let groups = build_groups_centralized(&p).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(labels(&groups[0]), ["{1,2}"]);

        let p = SystemParams::new(5, 5, Ratio::from_integer(4)).unwrap();
        let groups = build_groups_centralized(&p).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 1);
        assert_eq!(groups[0][0].members, UserSet::full(5));

        let p = SystemParams::new(3, 3, Ratio::from_integer(3)).unwrap();
        assert!(build_groups_centralized(&p).unwrap().is_empty());
    }

    #[test]
    fn centralized_group_sizes() {
        for k in 1..=10usize {
            for t in 0..k {
                let p = SystemParams::new(k, k, Ratio::from_integer(t as i64)).unwrap();
                let groups = build_groups_centralized(&p).unwrap();
                assert_eq!(groups.len(), k - t);
                for (i, g) in groups.iter().enumerate() {
                    assert_eq!(
                        g.len() as u64,
                        binomial((k - 1 - i) as u64, t as u64).unwrap()
                    );
                    assert!(g.iter().all(|s| s.members.len() == t + 1 && s.worst == i));
                }
            }
        }
    }

    #[test]
    fn decentralized_groups_sum_to_loads() {
        for k in 1..=7usize {
            let p = SystemParams::new(k, 3 * k, Ratio::from_integer(k as i64)).unwrap();
            let groups = build_groups_decentralized(&p);
            let loads = group_loads_decentralized(&p).unwrap();
            assert_eq!(groups.len(), k);
            for (i, g) in groups.iter().enumerate() {
                assert_eq!(g.len(), 1 << (k - 1 - i));
                let total: f64 = g.iter().map(|s| s.payload_fraction).sum();
                assert!((total - loads.loads()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decentralized_groups_example() {
        let p = SystemParams::new(2, 2, Ratio::from_integer(1)).unwrap();
        let groups = build_groups_decentralized(&p);
        assert_eq!(labels(&groups[0]), ["{1}", "{1,2}"]);
        assert_eq!(labels(&groups[1]), ["{2}"]);
    }
}

use serde::{Deserialize, Serialize};

use crate::delivery::MulticastSet;
use crate::error::{Error, Result};
use crate::gbc::{power_from_rates, region_lhs, single_user_capacity, RateVector};
use crate::model::{
    ChannelState, LoadProfile, PlacementMode, Scheme, SystemParams, UserSet, MIN_GAIN,
};
use crate::placement::group_loads;
use crate::solver::{boundary_from_loads, solve_boundary, DEFAULT_REL_TOL};

/// Relative headroom on the orthogonal time when it is used as the upper
/// bracket; at equal gains the two times coincide and rounding can land on
/// either side of the root.
const HINT_HEADROOM: f64 = 1e-9;

/// One multicast group's transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    /// One-based index of the weakest user served.
    pub group: usize,
    pub sets: Vec<UserSet>,
    /// Payload as a fraction of one file.
    pub load: f64,
    /// Bits per slot per unit bandwidth.
    pub rate: f64,
    pub duration: f64,
}

/// Serialized as
/// `{scheme, total_time, entries:[{group, sets, load, rate, duration}], power_shares, per_user_finish}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliverySchedule {
    pub scheme: Scheme,
    pub total_time: f64,
    pub entries: Vec<ScheduleEntry>,
    /// Superposition power split; `None` for orthogonal delivery.
    pub power_shares: Option<Vec<f64>>,
    /// Time at which each user (gain order) holds everything it needs.
    pub per_user_finish: Vec<f64>,
}

impl DeliverySchedule {
    fn empty(scheme: Scheme, users: usize) -> Self {
        DeliverySchedule {
            scheme,
            total_time: 0.0,
            entries: Vec::new(),
            power_shares: (scheme == Scheme::Concurrent).then(Vec::new),
            per_user_finish: vec![0.0; users],
        }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.rate).collect()
    }

    /// Transmission load: total payload in files.
    pub fn total_load(&self) -> f64 {
        self.entries.iter().map(|e| e.load).sum()
    }

    /// `|region_lhs(rates) − 1|` for concurrent schedules.
    pub fn region_residual(&self, channel: &ChannelState) -> Result<Option<f64>> {
        if self.scheme != Scheme::Concurrent || self.entries.is_empty() {
            return Ok(None);
        }
        let rates = RateVector::new(self.rates())?;
        let gains = channel.prefix(rates.len())?;
        Ok(Some((region_lhs(&rates, gains)? - 1.0).abs()))
    }

    /// Largest relative deviation of a group duration from the total time.
    pub fn duration_spread(&self) -> f64 {
        if self.total_time == 0.0 {
            return 0.0;
        }
        self.entries
            .iter()
            .map(|e| (e.duration - self.total_time).abs() / self.total_time)
            .fold(0.0, f64::max)
    }

    /// Fills each entry's multicast sets from `groups` (indexed like entries).
    pub fn attach_sets(&mut self, groups: &[Vec<MulticastSet>]) {
        for entry in &mut self.entries {
            if let Some(g) = groups.get(entry.group - 1) {
                entry.sets = g.iter().map(|s| s.members).collect();
            }
        }
    }
}

fn check_fits(loads: &LoadProfile, channel: &ChannelState) -> Result<()> {
    if loads.group_count() > channel.len() {
        return Err(Error::LengthMismatch {
            expected: loads.group_count(),
            found: channel.len(),
        });
    }
    Ok(())
}

/// Groups served one after another, group `i` at `log2(1 + γ_i)`.
pub fn orthogonal_schedule(
    loads: &LoadProfile,
    channel: &ChannelState,
) -> Result<DeliverySchedule> {
    check_fits(loads, channel)?;
    let users = channel.len();
    if loads.is_empty() {
        return Ok(DeliverySchedule::empty(Scheme::Orthogonal, users));
    }
    let gains = channel.gains();
    let mut entries = Vec::with_capacity(loads.group_count());
    let mut elapsed = 0.0;
    let mut finish_by_group = Vec::with_capacity(loads.group_count());
    for (i, &load) in loads.loads().iter().enumerate() {
        if gains[i] <= MIN_GAIN {
            return Err(Error::ZeroGain {
                index: i,
                gain: gains[i],
            });
        }
        let rate = single_user_capacity(gains[i]);
        let duration = load / rate;
        elapsed += duration;
        finish_by_group.push(elapsed);
        entries.push(ScheduleEntry {
            group: i + 1,
            sets: Vec::new(),
            load,
            rate,
            duration,
        });
    }
    let last = finish_by_group.len() - 1;
    Ok(DeliverySchedule {
        scheme: Scheme::Orthogonal,
        total_time: elapsed,
        entries,
        power_shares: None,
        per_user_finish: (0..users).map(|u| finish_by_group[u.min(last)]).collect(),
    })
}

/// All groups at once with equal completion times on the region boundary.
pub fn concurrent_schedule(
    loads: &LoadProfile,
    channel: &ChannelState,
) -> Result<DeliverySchedule> {
    check_fits(loads, channel)?;
    let users = channel.len();
    if loads.is_empty() {
        return Ok(DeliverySchedule::empty(Scheme::Concurrent, users));
    }
    let orthogonal = orthogonal_schedule(loads, channel)?.total_time;
    let f = boundary_from_loads(loads, channel)?;
    let total_time = solve_boundary(&f, orthogonal * (1.0 + HINT_HEADROOM), DEFAULT_REL_TOL)?;

    let rates: Vec<f64> = loads.loads().iter().map(|l| l / total_time).collect();
    let rate_vec = RateVector::new(rates)?;
    let shares = power_from_rates(&rate_vec, f.gains())?;

    let entries: Vec<ScheduleEntry> = loads
        .loads()
        .iter()
        .zip(rate_vec.as_slice())
        .enumerate()
        .map(|(i, (&load, &rate))| ScheduleEntry {
            group: i + 1,
            sets: Vec::new(),
            load,
            rate,
            duration: load / rate,
        })
        .collect();
    let mut running = 0.0f64;
    let finish_by_group: Vec<f64> = entries
        .iter()
        .map(|e| {
            running = running.max(e.duration);
            running
        })
        .collect();
    let last = finish_by_group.len() - 1;
    Ok(DeliverySchedule {
        scheme: Scheme::Concurrent,
        total_time,
        entries,
        power_shares: Some(shares.into_vec()),
        per_user_finish: (0..users).map(|u| finish_by_group[u.min(last)]).collect(),
    })
}

/// Schedule for `params` under the given placement mode and scheme.
pub fn schedule_for(
    params: &SystemParams,
    mode: PlacementMode,
    scheme: Scheme,
    channel: &ChannelState,
) -> Result<DeliverySchedule> {
    if channel.len() != params.users {
        return Err(Error::LengthMismatch {
            expected: params.users,
            found: channel.len(),
        });
    }
    let loads = group_loads(params, mode)?;
    match scheme {
        Scheme::Orthogonal => orthogonal_schedule(&loads, channel),
        Scheme::Concurrent => concurrent_schedule(&loads, channel),
    }
}

/// Total delivery time only.
pub fn transmission_time(
    params: &SystemParams,
    mode: PlacementMode,
    scheme: Scheme,
    channel: &ChannelState,
) -> Result<f64> {
    schedule_for(params, mode, scheme, channel).map(|s| s.total_time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbc::FEASIBILITY_TOL;
    use crate::model::binomial;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn lp(l: &[f64]) -> LoadProfile {
        LoadProfile::new(l.to_vec()).unwrap()
    }

    fn ch(g: &[f64]) -> ChannelState {
        ChannelState::new(g.to_vec()).unwrap()
    }

    #[test]
    fn orthogonal_examples() {
        let s = orthogonal_schedule(&lp(&[0.5, 1.0 / 6.0]), &ch(&[1.0, 3.0])).unwrap();
        assert!((s.total_time - 7.0 / 12.0).abs() <= 1e-12 * 7.0 / 12.0);
        assert_eq!(s.rates(), vec![1.0, 2.0]);
        assert!(s.power_shares.is_none());

        let s = orthogonal_schedule(&lp(&[0.5, 0.25]), &ch(&[1.0, 1.0])).unwrap();
        assert!((s.total_time - 0.75).abs() < 1e-15);
        assert_eq!(s.per_user_finish, vec![0.5, 0.75]);

        let s = orthogonal_schedule(&lp(&[]), &ch(&[1.0, 2.0])).unwrap();
        assert_eq!(s.total_time, 0.0);
        assert!(s.entries.is_empty());
    }

    #[test]
    fn concurrent_examples() {
        let s = concurrent_schedule(&lp(&[0.5]), &ch(&[1.0])).unwrap();
        assert!((s.total_time - 0.5).abs() < 1e-9);
        assert!((s.rates()[0] - 1.0).abs() < 1e-9);

        let c = 1.7;
        let loads = lp(&[0.5, 1.0 / 6.0]);
        let eq = ch(&[c, c]);
        let o = orthogonal_schedule(&loads, &eq).unwrap().total_time;
        let p = concurrent_schedule(&loads, &eq).unwrap().total_time;
        assert!((p - o).abs() <= 1e-9 * o);

        let s = concurrent_schedule(&loads, &ch(&[1.0, 3.0])).unwrap();
        let t = s.total_time;
        assert!((s.rates()[0] - 1.0 / (2.0 * t)).abs() < 1e-12);
        assert!((s.rates()[1] - 1.0 / (6.0 * t)).abs() < 1e-12);
        assert!(t < 7.0 / 12.0);
        let shares = s.power_shares.as_ref().unwrap();
        assert!((shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concurrent_empty() {
        let s = concurrent_schedule(&lp(&[]), &ch(&[1.0])).unwrap();
        assert_eq!(s.total_time, 0.0);
        assert_eq!(s.power_shares, Some(vec![]));
    }

    #[test]
    fn too_many_groups() {
        assert!(matches!(
            orthogonal_schedule(&lp(&[0.5, 0.4]), &ch(&[1.0])),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let mut s =
            concurrent_schedule(&lp(&[0.5, 1.0 / 6.0]), &ch(&[1.0, 3.0, 5.0, 7.0])).unwrap();
        let p = SystemParams::new(4, 4, Ratio::from_integer(2)).unwrap();
        s.attach_sets(&crate::delivery::build_groups_centralized(&p).unwrap());
        let v = serde_json::to_value(&s).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "entries",
                "per_user_finish",
                "power_shares",
                "scheme",
                "total_time"
            ]
        );
        assert_eq!(v["scheme"], "concurrent");
        assert_eq!(v["entries"][0]["sets"][0], serde_json::json!([1, 2, 3]));
        let back: DeliverySchedule = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    // Closed forms written straight from the binomial / power-series sums.
    fn closed_form_centralized(k: usize, t: usize, gains: &[f64]) -> f64 {
        let denom = binomial(k as u64, t as u64).unwrap() as f64;
        (1..=k - t)
            .map(|i| {
                binomial((k - i) as u64, t as u64).unwrap() as f64 / (1.0 + gains[i - 1]).log2()
            })
            .sum::<f64>()
            / denom
    }

    fn closed_form_decentralized(q: f64, gains: &[f64]) -> f64 {
        gains
            .iter()
            .enumerate()
            .map(|(i, g)| (1.0 - q).powi(i as i32 + 1) / (1.0 + g).log2())
            .sum()
    }

    fn instance() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
        (1usize..=10).prop_flat_map(|k| (Just(k), 0..=k, prop::collection::vec(1e-3f64..30.0, k)))
    }

    proptest! {
        #[test]
        fn orthogonal_matches_closed_forms((k, t, gains) in instance()) {
            let channel = ChannelState::new(gains).unwrap();
            let p = SystemParams::new(k, k, Ratio::from_integer(t as i64)).unwrap();
            let got = transmission_time(&p, PlacementMode::Centralized, Scheme::Orthogonal, &channel).unwrap();
            let want = if t == k { 0.0 } else { closed_form_centralized(k, t, channel.gains()) };
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(f64::MIN_POSITIVE));

            let got = transmission_time(&p, PlacementMode::Decentralized, Scheme::Orthogonal, &channel).unwrap();
            let want = if t == k { 0.0 } else { closed_form_decentralized(p.q_f64(), channel.gains()) };
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn concurrent_certificate((k, t, gains) in instance(), decentralized in any::<bool>()) {
            let channel = ChannelState::new(gains).unwrap();
            let p = SystemParams::new(k, k, Ratio::from_integer(t as i64)).unwrap();
            let mode = if decentralized { PlacementMode::Decentralized } else { PlacementMode::Centralized };
            let s = schedule_for(&p, mode, Scheme::Concurrent, &channel).unwrap();
            let o = transmission_time(&p, mode, Scheme::Orthogonal, &channel).unwrap();
            prop_assert!(s.total_time <= o * (1.0 + 1e-9));
            if let Some(res) = s.region_residual(&channel).unwrap() {
                prop_assert!(res <= FEASIBILITY_TOL);
            }
            prop_assert!(s.duration_spread() <= 1e-6);
        }

        // Shift rate between two groups, rescale to the boundary, and check
        // the worst completion time never improves.
        #[test]
        fn concurrent_is_locally_min_max((k, t, gains) in instance(), from in 0usize..10, to in 0usize..10) {
            let channel = ChannelState::new(gains).unwrap();
            let p = SystemParams::new(k, k, Ratio::from_integer(t as i64)).unwrap();
            let loads = group_loads(&p, PlacementMode::Decentralized).unwrap();
            prop_assume!(loads.group_count() >= 2);
            let g = loads.group_count();
            let (i, j) = (from % g, to % g);
            prop_assume!(i != j);
            let s = concurrent_schedule(&loads, &channel).unwrap();
            let mut rates = s.rates();
            let eps = 1e-4f64.min(rates[i] * 0.5);
            rates[i] -= eps;
            rates[j] += eps;
            // Scale onto the boundary by bisection on a common factor.
            let gains = channel.prefix(g).unwrap();
            let lhs = |c: f64| region_lhs(&RateVector::new(rates.iter().map(|r| r * c).collect()).unwrap(), gains).unwrap();
            let (mut lo, mut hi) = (0.0, 4.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if lhs(mid) <= 1.0 { lo = mid } else { hi = mid }
            }
            let worst = loads.loads().iter().zip(&rates).map(|(l, r)| l / (r * lo)).fold(0.0, f64::max);
            prop_assert!(worst >= s.total_time * (1.0 - 1e-9), "{} < {}", worst, s.total_time);
        }
    }
}

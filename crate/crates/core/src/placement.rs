//! Cache placement, both analytic (per-group load profiles) and bit-level.
//!
//! Centralized placement splits every file into `C(K, t)` equal segments, one
//! per `t`-subset of users, and user `k` stores the segments whose label
//! contains `k`. Decentralized placement has every user store a uniformly
//! random subset of `M F / N` bits of every file.
//!
//! Bit-level randomness uses `ChaCha8Rng::seed_from_u64(seed)` from
//! `rand_chacha`, drawing user-major then file-major with
//! `rand::seq::index::sample`, so traces are identical on every platform.

use std::collections::BTreeMap;
use std::ops::Range;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    binomial, ratio_to_f64, subsets_of_size, validate_params, LoadProfile, PlacementMode,
    SystemParams, UserSet,
};

/// Contents of the file library, one bit vector per file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    files: Vec<Vec<bool>>,
}

impl Library {
    /// `files` random files of `bits` bits each.
    pub fn random(files: usize, bits: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Library {
            files: (0..files)
                .map(|_| (0..bits).map(|_| rng.gen::<bool>()).collect())
                .collect(),
        }
    }

    pub fn from_files(files: Vec<Vec<bool>>) -> Self {
        Library { files }
    }

    pub fn file(&self, index: usize) -> &[bool] {
        &self.files[index]
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    /// Segment label and bit range, identical for every file.
    Segments(Vec<(UserSet, Range<usize>)>),
    /// Per file: exact caching set -> sorted bit positions.
    Classes(Vec<BTreeMap<UserSet, Vec<usize>>>),
}

/// Which bits of which file each user holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementState {
    mode: PlacementMode,
    params: SystemParams,
    file_bits: usize,
    // cached[user][file][bit]
    cached: Vec<Vec<Vec<bool>>>,
    layout: Layout,
    warnings: Vec<String>,
}

impl PlacementState {
    pub fn mode(&self) -> PlacementMode {
        self.mode
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_cached(&self, user: usize, file: usize, bit: usize) -> bool {
        self.cached[user][file][bit]
    }

    pub fn cache_mask(&self, user: usize, file: usize) -> &[bool] {
        &self.cached[user][file]
    }

    /// Bits of `file` held by `user`.
    pub fn cached_count(&self, user: usize, file: usize) -> usize {
        self.cached[user][file].iter().filter(|&&b| b).count()
    }

    /// Total bits held by `user` across the library.
    pub fn occupancy(&self, user: usize) -> usize {
        (0..self.params.files)
            .map(|f| self.cached_count(user, f))
            .sum()
    }

    /// Bit range of centralized segment `W_{file, label}`; the same for every file.
    pub fn segment(&self, label: UserSet) -> Option<Range<usize>> {
        match &self.layout {
            Layout::Segments(segs) => segs
                .iter()
                .find(|(l, _)| *l == label)
                .map(|(_, r)| r.clone()),
            Layout::Classes(_) => None,
        }
    }

    /// Centralized segment labels in layout order.
    pub fn segment_labels(&self) -> Vec<UserSet> {
        match &self.layout {
            Layout::Segments(segs) => segs.iter().map(|(l, _)| *l).collect(),
            Layout::Classes(_) => Vec::new(),
        }
    }

    /// Bits of `file` held by exactly the users in `holders` and nobody else.
    pub fn class_bits(&self, file: usize, holders: UserSet) -> Vec<usize> {
        match &self.layout {
            Layout::Segments(segs) => segs
                .iter()
                .find(|(l, _)| *l == holders)
                .map(|(_, r)| r.clone().collect())
                .unwrap_or_default(),
            Layout::Classes(per_file) => per_file[file].get(&holders).cloned().unwrap_or_default(),
        }
    }

    /// Size of every nonempty exclusivity class of `file`.
    pub fn class_sizes(&self, file: usize) -> BTreeMap<UserSet, usize> {
        match &self.layout {
            Layout::Segments(segs) => segs.iter().map(|(l, r)| (*l, r.len())).collect(),
            Layout::Classes(per_file) => {
                per_file[file].iter().map(|(s, b)| (*s, b.len())).collect()
            }
        }
    }
}

/// Deterministic centralized placement over `file_bits`-bit files.
pub fn centralized_place(params: &SystemParams, file_bits: usize) -> Result<PlacementState> {
    let params = validate_params(params, PlacementMode::Centralized)?;
    let t = params.require_integer_t()?;
    let k = params.users;
    let segments = binomial(k as u64, t as u64)?;
    if file_bits == 0 || !(file_bits as u64).is_multiple_of(segments) {
        return Err(Error::Divisibility {
            bits: file_bits,
            segments,
        });
    }
    let width = file_bits / segments as usize;
    let layout: Vec<(UserSet, Range<usize>)> = subsets_of_size(k, t)
        .into_iter()
        .enumerate()
        .map(|(i, label)| (label, i * width..(i + 1) * width))
        .collect();

    let mut mask = vec![false; file_bits];
    let cached = (0..k)
        .map(|user| {
            mask.iter_mut().for_each(|b| *b = false);
            for (label, range) in &layout {
                if label.contains(user) {
                    mask[range.clone()].iter_mut().for_each(|b| *b = true);
                }
            }
            vec![mask.clone(); params.files]
        })
        .collect();

    Ok(PlacementState {
        mode: PlacementMode::Centralized,
        params,
        file_bits,
        cached,
        layout: Layout::Segments(layout),
        warnings: Vec::new(),
    })
}

/// Random placement: each user independently keeps `floor(M F / N)` distinct
/// bits of every file, chosen uniformly without replacement.
#[allow(clippy::needless_range_loop)]
pub fn decentralized_place(
    params: &SystemParams,
    file_bits: usize,
    seed: u64,
) -> Result<PlacementState> {
    let params = validate_params(params, PlacementMode::Decentralized)?;
    if file_bits == 0 {
        return Err(Error::Range {
            field: "file-bits",
            reason: "files need at least one bit".into(),
        });
    }
    let exact = params.q() * Ratio::from_integer(file_bits as i64);
    let mut warnings = Vec::new();
    if !exact.is_integer() {
        warnings.push(format!(
            "M*F/N = {exact} is not an integer; each user caches {} bits per file",
            exact.floor()
        ));
    }
    let per_file = exact.floor().to_integer() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cached = Vec::with_capacity(params.users);
    for _ in 0..params.users {
        let mut files = Vec::with_capacity(params.files);
        for _ in 0..params.files {
            let mut mask = vec![false; file_bits];
            for bit in rand::seq::index::sample(&mut rng, file_bits, per_file) {
                mask[bit] = true;
            }
            files.push(mask);
        }
        cached.push(files);
    }

    let classes = (0..params.files)
        .map(|file| {
            let mut map: BTreeMap<UserSet, Vec<usize>> = BTreeMap::new();
            for bit in 0..file_bits {
                let holders =
                    UserSet::from_users((0..params.users).filter(|&u| cached[u][file][bit]));
                map.entry(holders).or_default().push(bit);
            }
            map
        })
        .collect();

    Ok(PlacementState {
        mode: PlacementMode::Decentralized,
        params,
        file_bits,
        cached,
        layout: Layout::Classes(classes),
        warnings,
    })
}

/// Exact per-group loads `C(K−i, t) / C(K, t)` for `i = 1..K−t`.
pub fn group_loads_centralized_exact(params: &SystemParams) -> Result<Vec<Ratio<i128>>> {
    let t = params.require_integer_t()?;
    let k = params.users as u64;
    let denom = binomial(k, t as u64)? as i128;
    (1..=k.saturating_sub(t as u64))
        .map(|i| Ok(Ratio::new(binomial(k - i, t as u64)? as i128, denom)))
        .collect()
}

/// Centralized load profile; empty when `t = K`.
pub fn group_loads_centralized(params: &SystemParams) -> Result<LoadProfile> {
    LoadProfile::from_exact(group_loads_centralized_exact(params)?)
}

/// Decentralized load profile `(1−q)^i` for `i = 1..K`; empty when `q = 1`.
pub fn group_loads_decentralized(params: &SystemParams) -> Result<LoadProfile> {
    let miss = 1.0 - params.q_f64();
    LoadProfile::new((1..=params.users as i32).map(|i| miss.powi(i)).collect())
}

/// Load profile for either placement mode.
pub fn group_loads(params: &SystemParams, mode: PlacementMode) -> Result<LoadProfile> {
    match mode {
        PlacementMode::Centralized => group_loads_centralized(params),
        PlacementMode::Decentralized => group_loads_decentralized(params),
    }
}

/// Expected fraction of a file cached by exactly one particular set of
/// `holders` users: `q^s (1−q)^{K−s}`.
pub fn expected_class_size(params: &SystemParams, holders: usize) -> Result<f64> {
    if holders > params.users {
        return Err(Error::Range {
            field: "s",
            reason: format!("subset size {holders} exceeds K = {}", params.users),
        });
    }
    let q = ratio_to_f64(params.q());
    Ok(q.powi(holders as i32) * (1.0 - q).powi((params.users - holders) as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rational;

    fn params(k: usize, n: usize, m: Rational) -> SystemParams {
        SystemParams::new(k, n, m).unwrap()
    }

    fn int(m: i64) -> Rational {
        Ratio::from_integer(m)
    }

    #[test]
    fn centralized_example_caches() {
        let p = params(4, 4, int(2));
        let st = centralized_place(&p, 6).unwrap();
        let labels: Vec<String> = st.segment_labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(
            labels,
            ["{1,2}", "{1,3}", "{1,4}", "{2,3}", "{2,4}", "{3,4}"]
        );
        // User 1 holds {1,2},{1,3},{1,4}: the first three one-bit segments.
        for file in 0..4 {
            assert_eq!(
                st.cache_mask(0, file),
                &[true, true, true, false, false, false]
            );
            assert_eq!(
                st.cache_mask(3, file),
                &[false, false, true, false, true, true]
            );
        }
        for user in 0..4 {
            assert_eq!(st.occupancy(user), 4 * 3);
        }
    }

    #[test]
    fn centralized_extremes() {
        let full = centralized_place(&params(2, 2, int(2)), 2).unwrap();
        assert!((0..2).all(|u| (0..2).all(|f| full.cached_count(u, f) == 2)));
        let empty = centralized_place(&params(2, 2, int(0)), 2).unwrap();
        assert!((0..2).all(|u| (0..2).all(|f| empty.cached_count(u, f) == 0)));
        assert_eq!(empty.segment(UserSet::EMPTY), Some(0..2));
    }

    #[test]
    fn centralized_divisibility() {
        let err = centralized_place(&params(4, 4, int(2)), 10).unwrap_err();
        assert_eq!(
            err,
            Error::Divisibility {
                bits: 10,
                segments: 6
            }
        );
        let err = centralized_place(&params(4, 4, Ratio::new(3, 2)), 12).unwrap_err();
        assert!(matches!(err, Error::NonIntegerT { .. }));
    }

    #[test]
    fn decentralized_exact_cache_size() {
        let p = params(2, 2, int(1));
        let st = decentralized_place(&p, 4, 7).unwrap();
        for user in 0..2 {
            for file in 0..2 {
                assert_eq!(st.cached_count(user, file), 2);
            }
        }
        assert!(st.warnings().is_empty());
        // Classes partition every file.
        for file in 0..2 {
            assert_eq!(st.class_sizes(file).values().sum::<usize>(), 4);
        }
    }

    #[test]
    fn decentralized_extremes() {
        let none = decentralized_place(&params(3, 3, int(0)), 10, 1).unwrap();
        assert_eq!(none.class_bits(0, UserSet::EMPTY).len(), 10);
        let all = decentralized_place(&params(3, 3, int(3)), 10, 1).unwrap();
        assert_eq!(all.class_bits(2, UserSet::full(3)).len(), 10);
    }

    #[test]
    fn decentralized_floor_warning() {
        let st = decentralized_place(&params(2, 3, int(1)), 10, 3).unwrap();
        assert_eq!(st.cached_count(0, 0), 3);
        assert_eq!(st.warnings().len(), 1);
    }

    #[test]
    fn decentralized_is_seed_deterministic() {
        let p = params(3, 3, int(1));
        assert_eq!(
            decentralized_place(&p, 30, 9).unwrap(),
            decentralized_place(&p, 30, 9).unwrap()
        );
        assert_ne!(
            decentralized_place(&p, 30, 9).unwrap(),
            decentralized_place(&p, 30, 10).unwrap()
        );
    }

    #[test]
    fn centralized_loads() {
        let lp = group_loads_centralized(&params(4, 4, int(2))).unwrap();
        assert_eq!(lp.loads(), &[0.5, 1.0 / 6.0]);
        let lp = group_loads_centralized(&params(2, 2, int(1))).unwrap();
        assert_eq!(lp.loads(), &[0.5]);
        assert!(group_loads_centralized(&params(3, 3, int(3)))
            .unwrap()
            .is_empty());
        // Sum identity: Σ_i C(K−i,t) = C(K,t+1).
        for k in 1..=12u64 {
            for t in 0..k {
                let p = params(k as usize, k as usize, int(t as i64));
                let total: Ratio<i128> =
                    group_loads_centralized_exact(&p).unwrap().into_iter().sum();
                let want = Ratio::new(
                    binomial(k, t + 1).unwrap() as i128,
                    binomial(k, t).unwrap() as i128,
                );
                assert_eq!(total, want);
            }
        }
    }

    #[test]
    fn decentralized_loads() {
        let lp = group_loads_decentralized(&params(2, 2, int(1))).unwrap();
        assert_eq!(lp.loads(), &[0.5, 0.25]);
        let lp = group_loads_decentralized(&params(4, 4, int(0))).unwrap();
        assert_eq!(lp.loads(), &[1.0; 4]);
        let lp = group_loads_decentralized(&params(3, 3, int(1))).unwrap();
        for (got, want) in lp.loads().iter().zip([2.0 / 3.0, 4.0 / 9.0, 8.0 / 27.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(group_loads_decentralized(&params(3, 3, int(3)))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn class_size_expectation() {
        assert_eq!(expected_class_size(&params(2, 2, int(1)), 1).unwrap(), 0.25);
        assert_eq!(expected_class_size(&params(2, 2, int(0)), 0).unwrap(), 1.0);
        let v = expected_class_size(&params(3, 3, int(1)), 2).unwrap();
        assert!((v - 2.0 / 27.0).abs() < 1e-16);
        assert!(expected_class_size(&params(3, 3, int(1)), 4).is_err());
    }

    // Oracle: enumerate every (t+1)-subset, bucket by weakest member.
    #[test]
    fn centralized_loads_match_subset_enumeration() {
        for k in 1..=10usize {
            for t in 0..k {
                let p = params(k, k, int(t as i64));
                let denom = binomial(k as u64, t as u64).unwrap() as i128;
                let mut buckets = vec![Ratio::<i128>::from_integer(0); k];
                for s in subsets_of_size(k, t + 1) {
                    buckets[s.min().unwrap()] += Ratio::new(1, denom);
                }
                while buckets.last().is_some_and(|b| *b == Ratio::from_integer(0)) {
                    buckets.pop();
                }
                assert_eq!(
                    group_loads_centralized_exact(&p).unwrap(),
                    buckets,
                    "K={k} t={t}"
                );
            }
        }
    }

    // Oracle: Σ over S with min(S)=i of C(K−i, |S|−1) q^{|S|−1} (1−q)^{K−|S|+1}.
    #[test]
    fn decentralized_loads_match_subset_enumeration() {
        for k in 1..=8usize {
            for tenth in 1..=9 {
                let q = tenth as f64 / 10.0;
                let p = params(k, 10 * k, int((tenth * k) as i64));
                assert!((p.q_f64() - q).abs() < 1e-15);
                let lp = group_loads_decentralized(&p).unwrap();
                for i in 1..=k {
                    let mut sum = 0.0;
                    for size in 1..=k - i + 1 {
                        let ways = binomial((k - i) as u64, (size - 1) as u64).unwrap() as f64;
                        sum +=
                            ways * q.powi(size as i32 - 1) * (1.0 - q).powi((k - size + 1) as i32);
                    }
                    assert!((sum - lp.loads()[i - 1]).abs() < 1e-12, "K={k} q={q} i={i}");
                }
            }
        }
    }

    #[test]
    fn empirical_class_sizes_converge() {
        let p = params(3, 3, int(1));
        let bits = 100_000;
        let st = decentralized_place(&p, bits, 2024).unwrap();
        for file in 0..3 {
            let sizes = st.class_sizes(file);
            for mask in 0..8u64 {
                let set = UserSet::from_bits(mask);
                let prob = expected_class_size(&p, set.len()).unwrap();
                let mean = prob * bits as f64;
                let sd = (bits as f64 * prob * (1.0 - prob)).sqrt();
                let got = sizes.get(&set).copied().unwrap_or(0) as f64;
                assert!(
                    (got - mean).abs() <= 3.0 * sd,
                    "file {file} class {set}: {got} vs {mean}±{sd}"
                );
            }
        }
    }
}

//! Shared domain types: system parameters, channel state, request vectors,
//! load profiles and user subsets.
//!
//! Transmit power, noise power and bandwidth are all fixed to 1, so rates are
//! in bits per slot per unit bandwidth and times are in slots per file.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains below this floor are rejected.
pub const MIN_GAIN: f64 = 1e-12;

/// Exact rational used for the cache size and its derived ratios.
pub type Rational = Ratio<i64>;

/// Largest `n` accepted by [`binomial`].
pub const MAX_BINOMIAL_N: u64 = 64;

/// Exact `n` choose `k`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if n > MAX_BINOMIAL_N {
        return Err(Error::Range {
            field: "n",
            reason: format!("binomial argument {n} exceeds {MAX_BINOMIAL_N}"),
        });
    }
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    // Each partial product is itself a binomial coefficient, so the division is exact.
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    Ok(acc as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementMode {
    Centralized,
    Decentralized,
}

impl PlacementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlacementMode::Centralized => "centralized",
            PlacementMode::Decentralized => "decentralized",
        }
    }
}

impl fmt::Display for PlacementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlacementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "centralized" => Ok(PlacementMode::Centralized),
            "decentralized" => Ok(PlacementMode::Decentralized),
            other => Err(Error::Range {
                field: "mode",
                reason: format!("unknown placement mode {other:?}"),
            }),
        }
    }
}

/// How multicast groups share the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// One group at a time, each at its weakest member's capacity.
    Orthogonal,
    /// All groups at once by superposition, rates on the region boundary.
    Concurrent,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Orthogonal => "orthogonal",
            Scheme::Concurrent => "concurrent",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(Scheme::Orthogonal),
            "concurrent" => Ok(Scheme::Concurrent),
            other => Err(Error::Range {
                field: "scheme",
                reason: format!("unknown delivery scheme {other:?}"),
            }),
        }
    }
}

/// Parses a cache size written as an integer, a decimal (`1.5`) or a
/// fraction (`3/2`) into an exact rational.
pub fn parse_cache_size(text: &str) -> Result<Rational> {
    let bad = || Error::Range {
        field: "M",
        reason: format!("cannot parse {text:?} as a number"),
    };
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || frac.len() > 12 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int: i64 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let scale = 10i64.pow(frac.len() as u32);
        let frac: i64 = frac.parse().map_err(|_| bad())?;
        let magnitude = int.abs() * scale + frac;
        let num = if negative { -magnitude } else { magnitude };
        return Ok(Ratio::new(num, scale));
    }
    text.parse::<i64>()
        .map(Ratio::from_integer)
        .map_err(|_| bad())
}

/// Number of users `K`, files `N` and the per-user cache size `M` (in files).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemParams {
    pub users: usize,
    pub files: usize,
    pub cache: Rational,
}

impl SystemParams {
    /// Builds parameters and checks the mode-independent ranges.
    pub fn new(users: usize, files: usize, cache: Rational) -> Result<Self> {
        validate_params(
            &SystemParams {
                users,
                files,
                cache,
            },
            PlacementMode::Decentralized,
        )
    }

    /// Aggregate cache size `t = K M / N`.
    pub fn t(&self) -> Rational {
        self.cache * Ratio::from_integer(self.users as i64) / Ratio::from_integer(self.files as i64)
    }

    /// Fraction of each file held by each user, `q = M / N`.
    pub fn q(&self) -> Rational {
        self.cache / Ratio::from_integer(self.files as i64)
    }

    pub fn q_f64(&self) -> f64 {
        ratio_to_f64(self.q())
    }

    pub fn cache_f64(&self) -> f64 {
        ratio_to_f64(self.cache)
    }

    /// `t` when it is an integer.
    pub fn integer_t(&self) -> Option<usize> {
        let t = self.t();
        t.is_integer().then(|| t.to_integer() as usize)
    }

    /// `t`, or [`Error::NonIntegerT`].
    pub fn require_integer_t(&self) -> Result<usize> {
        self.integer_t().ok_or_else(|| Error::NonIntegerT {
            k: self.users,
            n: self.files,
            m: self.cache.to_string(),
        })
    }
}

pub(crate) fn ratio_to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Validates `params` for `mode` and returns them with `M` in lowest terms.
pub fn validate_params(params: &SystemParams, mode: PlacementMode) -> Result<SystemParams> {
    if params.users == 0 {
        return Err(Error::Range {
            field: "K",
            reason: "at least one user is required".into(),
        });
    }
    if params.users > MAX_BINOMIAL_N as usize {
        return Err(Error::Range {
            field: "K",
            reason: format!("at most {MAX_BINOMIAL_N} users are supported"),
        });
    }
    if params.files < params.users {
        return Err(Error::Range {
            field: "N",
            reason: format!(
                "N = {} must be at least K = {} (distinct worst-case requests)",
                params.files, params.users
            ),
        });
    }
    let cache = params.cache.reduced();
    if cache < Ratio::zero() || cache > Ratio::from_integer(params.files as i64) {
        return Err(Error::Range {
            field: "M",
            reason: format!("M = {cache} must lie in [0, {}]", params.files),
        });
    }
    let checked = SystemParams { cache, ..*params };
    if mode == PlacementMode::Centralized {
        checked.require_integer_t()?;
    }
    Ok(checked)
}

/// Squared channel gains sorted ascending, plus the permutation back to the
/// caller's user order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    gains: Vec<f64>,
    order: Vec<usize>,
}

impl ChannelState {
    /// Sorts `gains` ascending and records `order[sorted] = caller`.
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::Range {
                field: "gains",
                reason: "at least one gain is required".into(),
            });
        }
        for (index, &gain) in gains.iter().enumerate() {
            if !gain.is_finite() {
                return Err(Error::Range {
                    field: "gains",
                    reason: format!("gain at position {index} is not finite"),
                });
            }
            if gain < MIN_GAIN {
                return Err(Error::ZeroGain { index, gain });
            }
        }
        let mut order: Vec<usize> = (0..gains.len()).collect();
        order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
        let sorted = order.iter().map(|&i| gains[i]).collect();
        Ok(ChannelState {
            gains: sorted,
            order,
        })
    }

    /// `count` copies of the same gain.
    pub fn uniform(count: usize, gain: f64) -> Result<Self> {
        Self::new(vec![gain; count])
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// The `len` weakest gains.
    pub fn prefix(&self, len: usize) -> Result<&[f64]> {
        self.gains.get(..len).ok_or(Error::LengthMismatch {
            expected: len,
            found: self.gains.len(),
        })
    }

    /// `original_order()[i]` is the caller index of the i-th weakest user.
    pub fn original_order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// File requested by each user (1-based file indices, users in gain order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestVector(Vec<usize>);

impl RequestVector {
    pub fn new(params: &SystemParams, files: Vec<usize>) -> Result<Self> {
        if files.len() != params.users {
            return Err(Error::LengthMismatch {
                expected: params.users,
                found: files.len(),
            });
        }
        if let Some(bad) = files.iter().find(|&&f| f == 0 || f > params.files) {
            return Err(Error::Range {
                field: "requests",
                reason: format!("file index {bad} is outside [1, {}]", params.files),
            });
        }
        Ok(RequestVector(files))
    }

    /// Worst case: user k asks for file k.
    pub fn distinct(params: &SystemParams) -> Self {
        RequestVector((1..=params.users).collect())
    }

    /// Zero-based file index requested by zero-based user `user`.
    pub fn file_of(&self, user: usize) -> usize {
        self.0[user] - 1
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Reorders requests given in caller order into gain order.
    pub fn to_gain_order(&self, channel: &ChannelState) -> Result<Self> {
        if channel.len() != self.0.len() {
            return Err(Error::LengthMismatch {
                expected: self.0.len(),
                found: channel.len(),
            });
        }
        Ok(RequestVector(
            channel
                .original_order()
                .iter()
                .map(|&c| self.0[c])
                .collect(),
        ))
    }
}

/// Per-group normalized payloads (fractions of one file) and their running
/// sums. Group `i` is served at the rate limited by the `i`-th weakest user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    loads: Vec<f64>,
    cumulative: Vec<f64>,
    #[serde(skip)]
    exact: Option<Vec<Ratio<i128>>>,
}

impl LoadProfile {
    /// Trailing zero loads are dropped; the rest must be positive and
    /// nonincreasing.
    pub fn new(mut loads: Vec<f64>) -> Result<Self> {
        while loads.last() == Some(&0.0) {
            loads.pop();
        }
        for (i, &l) in loads.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidLoads(format!(
                    "load {l} of group {} is not positive",
                    i + 1
                )));
            }
        }
        if loads.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidLoads("loads must be nonincreasing".into()));
        }
        let cumulative = loads
            .iter()
            .scan(0.0, |acc, &l| {
                *acc += l;
                Some(*acc)
            })
            .collect();
        Ok(LoadProfile {
            loads,
            cumulative,
            exact: None,
        })
    }

    /// Builds a profile from exact loads; running sums are formed exactly
    /// before rounding.
    pub fn from_exact(mut exact: Vec<Ratio<i128>>) -> Result<Self> {
        while exact.last().is_some_and(|l| l.is_zero()) {
            exact.pop();
        }
        let to_f64 = |r: &Ratio<i128>| r.to_f64().unwrap_or(f64::NAN);
        let mut profile = Self::new(exact.iter().map(to_f64).collect())?;
        let mut acc = Ratio::zero();
        profile.cumulative = exact
            .iter()
            .map(|l| {
                acc += *l;
                to_f64(&acc)
            })
            .collect();
        profile.exact = Some(exact);
        Ok(profile)
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Exact loads, when the profile was built from rationals.
    pub fn exact(&self) -> Option<&[Ratio<i128>]> {
        self.exact.as_deref()
    }

    /// Exact running sums, when available.
    pub fn exact_cumulative(&self) -> Option<Vec<Ratio<i128>>> {
        let mut acc = Ratio::zero();
        self.exact.as_ref().map(|ls| {
            ls.iter()
                .map(|l| {
                    acc += *l;
                    acc
                })
                .collect()
        })
    }

    pub fn group_count(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    /// Transmission load `R`: total payload in files.
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// A subset of users, stored as a bitmask over zero-based gain-order indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct UserSet(u64);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_bits(bits: u64) -> Self {
        UserSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Users `0..count`.
    pub fn full(count: usize) -> Self {
        if count >= 64 {
            UserSet(u64::MAX)
        } else {
            UserSet((1u64 << count) - 1)
        }
    }

    pub fn from_users<I: IntoIterator<Item = usize>>(users: I) -> Self {
        UserSet(users.into_iter().fold(0, |acc, u| acc | (1u64 << u)))
    }

    pub fn contains(self, user: usize) -> bool {
        user < 64 && self.0 & (1u64 << user) != 0
    }

    pub fn with(self, user: usize) -> Self {
        UserSet(self.0 | (1u64 << user))
    }

    pub fn without(self, user: usize) -> Self {
        UserSet(self.0 & !(1u64 << user))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Weakest member (smallest index).
    pub fn min(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Members in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let u = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(u)
        })
    }

    /// One-based member labels, as printed in traces.
    pub fn one_based(self) -> Vec<usize> {
        self.iter().map(|u| u + 1).collect()
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, u) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", u + 1)?;
        }
        f.write_str("}")
    }
}

impl Serialize for UserSet {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(|u| u + 1))
    }
}

impl<'de> Deserialize<'de> for UserSet {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(deserializer)?;
        if members.iter().any(|&u| u == 0 || u > 64) {
            return Err(serde::de::Error::custom("user labels must be in 1..=64"));
        }
        Ok(UserSet::from_users(members.into_iter().map(|u| u - 1)))
    }
}

/// All `size`-subsets of `0..count` in lexicographic order.
pub fn subsets_of_size(count: usize, size: usize) -> Vec<UserSet> {
    let mut out = Vec::new();
    if size > count {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(UserSet::from_users(idx.iter().copied()));
        // Advance the rightmost index that still has room.
        let Some(i) = (0..size).rev().find(|&i| idx[i] < count - size + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Spreadsheet-style file label: `A`, `B`, ... for the first 26 files,
/// `W27`, `W28`, ... beyond.
pub fn file_label(file: usize) -> String {
    if file < 26 {
        char::from(b'A' + file as u8).to_string()
    } else {
        format!("W{}", file + 1)
    }
}

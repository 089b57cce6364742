//! Seeded Monte Carlo over Rayleigh-faded channels.
//!
//! Trial `i` draws its channel from seed `base_seed + i` (wrapping), using
//! `ChaCha8Rng::seed_from_u64` and inverse-CDF exponential draws
//! `γ = −ln(1 − u)`. Trials run in parallel and are reduced in trial order,
//! so every result is a pure function of the configuration.

use std::fmt::Write as _;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::delivery::{schedule_for, DeliverySchedule};
use crate::error::{Error, Result};
use crate::gbc::FEASIBILITY_TOL;
use crate::model::{
    ratio_to_f64, validate_params, ChannelState, PlacementMode, Rational, Scheme, SystemParams,
    MIN_GAIN,
};

/// Slack on the inequality and equality checks, relative to the orthogonal time.
pub const REL_SLACK: f64 = 1e-9;

/// Largest decentralized/centralized orthogonal time ratio.
pub const GAP_BOUND: f64 = 1.5;

/// Counterexamples kept per suite; the failure count is always exact.
const MAX_RECORDED_FAILURES: usize = 16;

/// Unit-mean exponential gains (squared Rayleigh magnitudes), sorted.
pub fn sample_channel(users: usize, seed: u64) -> ChannelState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gains = (0..users)
        .map(|_| {
            let u: f64 = rng.gen();
            (-(-u).ln_1p()).max(MIN_GAIN)
        })
        .collect();
    ChannelState::new(gains).expect("draws are finite and floored")
}

/// Cache sizes giving every integer `t` from 0 to `K`.
pub fn integer_t_grid(users: usize, files: usize) -> Vec<Rational> {
    (0..=users)
        .map(|j| Ratio::new((j * files) as i64, users as i64))
        .collect()
}

/// Sweep and verification settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub users: usize,
    pub files: usize,
    pub cache_grid: Vec<Rational>,
    pub trials: usize,
    pub base_seed: u64,
    pub modes: Vec<PlacementMode>,
    pub schemes: Vec<Scheme>,
    /// Use these gains in every trial instead of Rayleigh draws.
    pub fixed_gains: Option<Vec<f64>>,
    /// Upper bound asserted on the gap ratio.
    pub gap_bound: f64,
}

impl TrialConfig {
    /// All modes and schemes over the integer-`t` grid.
    pub fn new(users: usize, files: usize, trials: usize, base_seed: u64) -> Self {
        TrialConfig {
            users,
            files,
            cache_grid: integer_t_grid(users, files),
            trials,
            base_seed,
            modes: vec![PlacementMode::Centralized, PlacementMode::Decentralized],
            schemes: vec![Scheme::Orthogonal, Scheme::Concurrent],
            fixed_gains: None,
            gap_bound: GAP_BOUND,
        }
    }

    pub fn with_grid(mut self, grid: Vec<Rational>) -> Self {
        self.cache_grid = grid;
        self
    }

    /// Parameters for every grid entry. Fractional `t` is rejected only when
    /// centralized placement is the sole mode; otherwise those grid points
    /// simply have no centralized rows.
    pub fn validate(&self) -> Result<Vec<SystemParams>> {
        if let Some(g) = &self.fixed_gains {
            if g.len() != self.users {
                return Err(Error::LengthMismatch {
                    expected: self.users,
                    found: g.len(),
                });
            }
            ChannelState::new(g.clone())?;
        }
        let strict = self.modes == [PlacementMode::Centralized];
        self.cache_grid
            .iter()
            .map(|&cache| {
                let p = SystemParams {
                    users: self.users,
                    files: self.files,
                    cache,
                };
                let mode = if strict {
                    PlacementMode::Centralized
                } else {
                    PlacementMode::Decentralized
                };
                validate_params(&p, mode)
            })
            .collect()
    }

    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn channel(&self, trial: usize) -> ChannelState {
        match &self.fixed_gains {
            Some(g) => ChannelState::new(g.clone()).expect("validated"),
            None => sample_channel(self.users, self.seed(trial)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cache: f64,
    pub mode: PlacementMode,
    pub scheme: Scheme,
    pub mean_time: f64,
    pub stderr_time: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub cache: f64,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub min_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub gaps: Vec<GapRow>,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepResult {
    /// `M,mode,scheme,mean_time,stderr_time,trials`, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("M,mode,scheme,mean_time,stderr_time,trials\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(r.cache),
                r.mode,
                r.scheme,
                fmt_f64(r.mean_time),
                fmt_f64(r.stderr_time),
                r.trials
            );
        }
        out
    }

    /// `M,metric,value` with metrics `max_ratio`, `mean_ratio`, `min_ratio`.
    pub fn gaps_to_csv(&self) -> String {
        let mut out = String::from("M,metric,value\n");
        for g in &self.gaps {
            for (name, v) in [
                ("max_ratio", g.max_ratio),
                ("mean_ratio", g.mean_ratio),
                ("min_ratio", g.min_ratio),
            ] {
                let _ = writeln!(out, "{},{},{}", fmt_f64(g.cache), name, fmt_f64(v));
            }
        }
        out
    }

    pub fn row(&self, cache: f64, mode: PlacementMode, scheme: Scheme) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.cache == cache && r.mode == mode && r.scheme == scheme)
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Decentralized over centralized orthogonal time; 1 when both are zero.
fn gap_ratio(decentralized: f64, centralized: f64) -> f64 {
    if centralized == 0.0 && decentralized == 0.0 {
        1.0
    } else {
        decentralized / centralized
    }
}

fn run_trials<T, F>(cfg: &TrialConfig, per_trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &ChannelState) -> Result<T> + Sync,
{
    (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let channel = cfg.channel(trial);
            per_trial(trial, &channel).map_err(|e| Error::Trial {
                seed: cfg.seed(trial),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean and standard error of every requested (M, mode, scheme) time, plus
/// gap rows when both orthogonal times are available.
pub fn run_sweep(cfg: &TrialConfig) -> Result<SweepResult> {
    let params = cfg.validate()?;
    let mut cells = Vec::new();
    for (m, p) in params.iter().enumerate() {
        for &mode in &cfg.modes {
            if mode == PlacementMode::Centralized && p.integer_t().is_none() {
                continue;
            }
            for &scheme in &cfg.schemes {
                cells.push((m, *p, mode, scheme));
            }
        }
    }
    let per_trial = run_trials(cfg, |_, channel| {
        cells
            .iter()
            .map(|(_, p, mode, scheme)| Ok(schedule_for(p, *mode, *scheme, channel)?.total_time))
            .collect::<Result<Vec<f64>>>()
    })?;

    let mut result = SweepResult::default();
    let mut column = Vec::with_capacity(cfg.trials);
    for (c, (_, p, mode, scheme)) in cells.iter().enumerate() {
        column.clear();
        column.extend(per_trial.iter().map(|times| times[c]));
        let (mean_time, stderr_time) = mean_and_stderr(&column);
        result.rows.push(SweepRow {
            cache: p.cache_f64(),
            mode: *mode,
            scheme: *scheme,
            mean_time,
            stderr_time,
            trials: cfg.trials,
        });
    }

    let find = |m: usize, mode| {
        cells
            .iter()
            .position(|&(cm, _, cmode, cs)| cm == m && cmode == mode && cs == Scheme::Orthogonal)
    };
    for (m, p) in params.iter().enumerate() {
        if let (Some(c), Some(d)) = (
            find(m, PlacementMode::Centralized),
            find(m, PlacementMode::Decentralized),
        ) {
            let ratios: Vec<f64> = per_trial.iter().map(|t| gap_ratio(t[d], t[c])).collect();
            result.gaps.push(summarize_gap(p.cache_f64(), &ratios));
        }
    }
    Ok(result)
}

fn summarize_gap(cache: f64, ratios: &[f64]) -> GapRow {
    GapRow {
        cache,
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_ratio: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Per-trial ratio of decentralized to centralized orthogonal time over the
/// integer-`t` part of the grid; any ratio outside `[1, gap_bound]` (with
/// [`REL_SLACK`]) is a [`Error::Violation`] naming the trial seed.
pub fn gap_report(cfg: &TrialConfig) -> Result<Vec<GapRow>> {
    let grid: Vec<SystemParams> = cfg
        .cache_grid
        .iter()
        .filter_map(|&cache| {
            validate_params(
                &SystemParams {
                    users: cfg.users,
                    files: cfg.files,
                    cache,
                },
                PlacementMode::Centralized,
            )
            .ok()
        })
        .collect();
    let bound = cfg.gap_bound;
    let per_trial = run_trials(cfg, |trial, channel| {
        grid.iter()
            .map(|p| {
                let c = schedule_for(p, PlacementMode::Centralized, Scheme::Orthogonal, channel)?
                    .total_time;
                let d = schedule_for(p, PlacementMode::Decentralized, Scheme::Orthogonal, channel)?
                    .total_time;
                let ratio = gap_ratio(d, c);
                if !(ratio >= 1.0 - REL_SLACK && ratio <= bound + REL_SLACK) {
                    return Err(Error::Violation {
                        seed: cfg.seed(trial),
                        cache: p.cache.to_string(),
                        what: "gap ratio bound",
                        value: ratio,
                    });
                }
                Ok(ratio)
            })
            .collect::<Result<Vec<f64>>>()
    })
    .map_err(|e| match e {
        // Violations already carry their seed.
        Error::Trial { source, .. } if matches!(*source, Error::Violation { .. }) => *source,
        other => other,
    })?;

    Ok(grid
        .iter()
        .enumerate()
        .map(|(m, p)| {
            let ratios: Vec<f64> = per_trial.iter().map(|t| t[m]).collect();
            summarize_gap(p.cache_f64(), &ratios)
        })
        .collect())
}

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    /// Trial seed, or `None` for deterministic instances.
    pub seed: Option<u64>,
    pub cache: String,
    pub mode: PlacementMode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub failed: usize,
    pub counterexamples: Vec<Counterexample>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        SuiteResult {
            name,
            checks: 0,
            failed: 0,
            counterexamples: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    fn record(&mut self, ok: bool, fail: impl FnOnce() -> Counterexample) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.counterexamples.len() < MAX_RECORDED_FAILURES {
                self.counterexamples.push(fail());
            }
        }
    }

    fn merge(&mut self, other: SuiteResult) {
        self.checks += other.checks;
        self.failed += other.failed;
        let room = MAX_RECORDED_FAILURES.saturating_sub(self.counterexamples.len());
        self.counterexamples
            .extend(other.counterexamples.into_iter().take(room));
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct VerificationReport {
    pub suites: Vec<SuiteResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

pub const SUITE_CENTRALIZED: &str = "concurrent_le_orthogonal_centralized";
pub const SUITE_DECENTRALIZED: &str = "concurrent_le_orthogonal_decentralized";
pub const SUITE_EQUALITY: &str = "equal_gains_equality";
pub const SUITE_STRICT: &str = "distinct_gains_strict";
pub const SUITE_GAP: &str = "orthogonal_gap_bound";
pub const SUITE_CERTIFICATE: &str = "concurrent_boundary_certificate";

const SUITE_NAMES: [&str; 6] = [
    SUITE_CENTRALIZED,
    SUITE_DECENTRALIZED,
    SUITE_EQUALITY,
    SUITE_STRICT,
    SUITE_GAP,
    SUITE_CERTIFICATE,
];

/// Scales used for the deterministic strictly increasing gain ladders.
const LADDER_SCALES: [f64; 3] = [0.1, 1.0, 10.0];

struct Checker<'a> {
    cfg: &'a TrialConfig,
    suites: Vec<SuiteResult>,
}

impl<'a> Checker<'a> {
    fn new(cfg: &'a TrialConfig) -> Self {
        Checker {
            cfg,
            suites: SUITE_NAMES.iter().map(|n| SuiteResult::new(n)).collect(),
        }
    }

    fn suite(&mut self, name: &str) -> &mut SuiteResult {
        self.suites
            .iter_mut()
            .find(|s| s.name == name)
            .expect("known suite")
    }

    /// Orthogonal and concurrent schedules, with the concurrent one run
    /// through the boundary certificate.
    fn pair(
        &mut self,
        p: &SystemParams,
        mode: PlacementMode,
        channel: &ChannelState,
        seed: Option<u64>,
        suite: &'static str,
    ) -> Option<(DeliverySchedule, DeliverySchedule)> {
        let ce = |detail: String| Counterexample {
            seed,
            cache: p.cache.to_string(),
            mode,
            detail,
        };
        let o = schedule_for(p, mode, Scheme::Orthogonal, channel);
        let c = schedule_for(p, mode, Scheme::Concurrent, channel);
        match (o, c) {
            (Ok(o), Ok(c)) => {
                let residual = c.region_residual(channel).ok().flatten().unwrap_or(0.0);
                let spread = c.duration_spread();
                self.suite(SUITE_CERTIFICATE).record(
                    residual <= FEASIBILITY_TOL && spread <= 1e-6,
                    || {
                        ce(format!(
                            "region residual {residual:e}, duration spread {spread:e}"
                        ))
                    },
                );
                Some((o, c))
            }
            (o, c) => {
                let err = o.err().or(c.err()).expect("one side failed");
                self.suite(suite)
                    .record(false, || ce(format!("schedule failed: {err}")));
                None
            }
        }
    }

    fn random_trial(&mut self, trial: usize, params: &[SystemParams]) {
        let seed = Some(self.cfg.seed(trial));
        let channel = self.cfg.channel(trial);
        let mean_gain = channel.gains().iter().sum::<f64>() / channel.len() as f64;
        let flat = ChannelState::uniform(channel.len(), mean_gain).expect("positive mean");

        for p in params {
            let centralized = p.integer_t().is_some();
            let mut orthogonal = [None, None];
            for (slot, mode) in [PlacementMode::Centralized, PlacementMode::Decentralized]
                .into_iter()
                .enumerate()
            {
                if mode == PlacementMode::Centralized && !centralized {
                    continue;
                }
                let suite = if slot == 0 {
                    SUITE_CENTRALIZED
                } else {
                    SUITE_DECENTRALIZED
                };
                let ce = |detail: String| Counterexample {
                    seed,
                    cache: p.cache.to_string(),
                    mode,
                    detail,
                };
                if let Some((o, c)) = self.pair(p, mode, &channel, seed, suite) {
                    let (to, tc) = (o.total_time, c.total_time);
                    self.suite(suite).record(tc <= to * (1.0 + REL_SLACK), || {
                        ce(format!("concurrent {tc} > orthogonal {to}"))
                    });
                    orthogonal[slot] = Some(to);
                }
                if let Some((o, c)) = self.pair(p, mode, &flat, seed, SUITE_EQUALITY) {
                    let (to, tc) = (o.total_time, c.total_time);
                    self.suite(SUITE_EQUALITY)
                        .record((tc - to).abs() <= REL_SLACK * to, || {
                            ce(format!(
                                "equal gains {mean_gain}: concurrent {tc} vs orthogonal {to}"
                            ))
                        });
                }
            }
            if let [Some(c), Some(d)] = orthogonal {
                self.check_gap(p, seed, c, d);
                let flat_c = schedule_for(p, PlacementMode::Centralized, Scheme::Orthogonal, &flat);
                let flat_d =
                    schedule_for(p, PlacementMode::Decentralized, Scheme::Orthogonal, &flat);
                if let (Ok(c), Ok(d)) = (flat_c, flat_d) {
                    self.check_gap(p, seed, c.total_time, d.total_time);
                }
            }
        }
    }

    fn check_gap(
        &mut self,
        p: &SystemParams,
        seed: Option<u64>,
        centralized: f64,
        decentralized: f64,
    ) {
        let ratio = gap_ratio(decentralized, centralized);
        let bound = self.cfg.gap_bound;
        self.suite(SUITE_GAP).record(
            ratio >= 1.0 - REL_SLACK && ratio <= bound + REL_SLACK,
            || Counterexample {
                seed,
                cache: p.cache.to_string(),
                mode: PlacementMode::Decentralized,
                detail: format!("ratio {ratio} outside [1, {bound}]"),
            },
        );
    }

    /// Gains `c, 2c, …, Kc`: concurrent delivery must strictly win whenever
    /// at least two groups are active.
    fn ladders(&mut self, params: &[SystemParams]) {
        for scale in LADDER_SCALES {
            let channel =
                ChannelState::new((1..=self.cfg.users).map(|i| scale * i as f64).collect())
                    .expect("positive");
            for p in params {
                for mode in [PlacementMode::Centralized, PlacementMode::Decentralized] {
                    if mode == PlacementMode::Centralized && p.integer_t().is_none() {
                        continue;
                    }
                    let Some((o, c)) = self.pair(p, mode, &channel, None, SUITE_STRICT) else {
                        continue;
                    };
                    if o.entries.len() < 2 {
                        continue;
                    }
                    let (to, tc) = (o.total_time, c.total_time);
                    self.suite(SUITE_STRICT)
                        .record(tc < to * (1.0 - REL_SLACK), || Counterexample {
                            seed: None,
                            cache: p.cache.to_string(),
                            mode,
                            detail: format!(
                                "gain ladder x{scale}: concurrent {tc} not below orthogonal {to}"
                            ),
                        });
                }
            }
        }
    }
}

/// Runs every property suite over the configured grid and trials. Failures
/// are reported as data; an empty grid yields an empty report.
pub fn verify_properties(cfg: &TrialConfig) -> Result<VerificationReport> {
    if cfg.cache_grid.is_empty() {
        return Ok(VerificationReport::default());
    }
    let params: Vec<SystemParams> = cfg
        .cache_grid
        .iter()
        .map(|&cache| {
            validate_params(
                &SystemParams {
                    users: cfg.users,
                    files: cfg.files,
                    cache,
                },
                PlacementMode::Decentralized,
            )
        })
        .collect::<Result<_>>()?;
    if let Some(g) = &cfg.fixed_gains {
        if g.len() != cfg.users {
            return Err(Error::LengthMismatch {
                expected: cfg.users,
                found: g.len(),
            });
        }
        ChannelState::new(g.clone())?;
    }

    let partials: Vec<Vec<SuiteResult>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut checker = Checker::new(cfg);
            checker.random_trial(trial, &params);
            checker.suites
        })
        .collect();

    let mut checker = Checker::new(cfg);
    checker.ladders(&params);
    let mut suites = checker.suites;
    for partial in partials {
        for (acc, part) in suites.iter_mut().zip(partial) {
            acc.merge(part);
        }
    }
    Ok(VerificationReport { suites })
}

/// Cache-size grid value as a double, for reports.
pub fn cache_value(cache: Rational) -> f64 {
    ratio_to_f64(cache)
}

//! Min-max completion time for concurrent delivery.
//!
//! With every group finishing at the same time `s`, group `i` runs at rate
//! `l_i / s` and the capacity-region boundary becomes a scalar equation in `s`:
//!
//! ```text
//! g(s) = Σ_{i<G} (1/γ_i − 1/γ_{i+1}) 2^{L_i/s} + (1/γ_G) 2^{L_G/s} − 1/γ_1 − 1 = 0
//! ```
//!
//! where `L_i` are cumulative loads. `g` is strictly decreasing from `+∞` to
//! `−1` on `(0, ∞)`, so its unique root is found by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbc::{exp2_m1, layer_weights};
use crate::model::{ChannelState, LoadProfile};

/// Exponents beyond this are reported as `+∞` rather than overflowing.
pub const EXPONENT_CAP: f64 = 1020.0;

/// Default relative bracket width for [`solve_boundary`].
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Bisection step limit.
pub const MAX_BISECTIONS: usize = 200;

/// Halving steps allowed while searching for the lower end of the bracket.
const MAX_HALVINGS: usize = 2100;

/// The boundary function `g` for a given load profile and channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    cumulative: Vec<f64>,
    gains: Vec<f64>,
}

impl BoundaryFunction {
    pub fn new(cumulative: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        if cumulative.is_empty() {
            return Err(Error::InvalidLoads(
                "boundary function needs at least one group".into(),
            ));
        }
        if gains.len() != cumulative.len() {
            return Err(Error::LengthMismatch {
                expected: cumulative.len(),
                found: gains.len(),
            });
        }
        let increasing = cumulative[0] > 0.0 && cumulative.windows(2).all(|w| w[1] > w[0]);
        if !increasing {
            return Err(Error::InvalidLoads(
                "cumulative loads must be positive and strictly increasing".into(),
            ));
        }
        if !cumulative.iter().all(|l| l.is_finite()) {
            return Err(Error::InvalidLoads(
                "cumulative loads must be finite".into(),
            ));
        }
        if gains.iter().any(|g| !(g.is_finite() && *g > 0.0))
            || gains.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::Range {
                field: "gains",
                reason: "gains must be positive and ascending".into(),
            });
        }
        Ok(BoundaryFunction { cumulative, gains })
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn group_count(&self) -> usize {
        self.cumulative.len()
    }
}

/// `g(s)`; `+∞` once `L_G / s` exceeds [`EXPONENT_CAP`].
pub fn g_eval(f: &BoundaryFunction, s: f64) -> Result<f64> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::Range {
            field: "s",
            reason: format!("g is defined for s > 0, got {s}"),
        });
    }
    if s.is_infinite() {
        return Ok(-1.0);
    }
    let last = *f.cumulative.last().expect("nonempty by construction");
    if last / s > EXPONENT_CAP {
        return Ok(f64::INFINITY);
    }
    // Same telescoping rewrite as region_lhs: weights sum to 1/γ_1.
    let sum: f64 = layer_weights(&f.gains)
        .zip(&f.cumulative)
        .map(|(w, &l)| w * exp2_m1(l / s))
        .sum();
    Ok(sum - 1.0)
}

/// Root of `g`, bracketed above by `upper_hint` (which must satisfy
/// `g(upper_hint) ≤ 0`) and below by repeated halving. Returns the upper end
/// of the final bracket, so the implied rates are always feasible.
pub fn solve_boundary(f: &BoundaryFunction, upper_hint: f64, rel_tol: f64) -> Result<f64> {
    if !(upper_hint > 0.0 && upper_hint.is_finite()) {
        return Err(Error::BadBracket {
            hint: upper_hint,
            value: f64::NAN,
        });
    }
    let at_hint = g_eval(f, upper_hint)?;
    if at_hint > 0.0 {
        return Err(Error::BadBracket {
            hint: upper_hint,
            value: at_hint,
        });
    }
    let mut hi = upper_hint;
    let mut lo = upper_hint;
    let mut found = false;
    for _ in 0..MAX_HALVINGS {
        lo *= 0.5;
        if g_eval(f, lo)? > 0.0 {
            found = true;
            break;
        }
        hi = lo;
    }
    if !found {
        return Err(Error::MaxIterations {
            iterations: MAX_HALVINGS,
        });
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= rel_tol * hi {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Bracket is down to adjacent floats.
            return Ok(hi);
        }
        if g_eval(f, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::MaxIterations {
        iterations: MAX_BISECTIONS,
    })
}

/// Boundary function for `loads` over the `G` weakest users of `channel`.
pub fn boundary_from_loads(
    loads: &LoadProfile,
    channel: &ChannelState,
) -> Result<BoundaryFunction> {
    if loads.is_empty() {
        return Err(Error::InvalidLoads("no groups to serve".into()));
    }
    let gains = channel.prefix(loads.group_count())?.to_vec();
    BoundaryFunction::new(loads.cumulative().to_vec(), gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{binomial, SystemParams};
    use crate::placement::{group_loads_centralized, group_loads_decentralized};
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn bf(l: &[f64], g: &[f64]) -> BoundaryFunction {
        BoundaryFunction::new(l.to_vec(), g.to_vec()).unwrap()
    }

    #[test]
    fn g_examples() {
        let f = bf(&[0.5], &[1.0]);
        assert!(g_eval(&f, 0.5).unwrap().abs() < 1e-15);
        assert_eq!(g_eval(&f, f64::INFINITY).unwrap(), -1.0);
        assert!((g_eval(&f, 1e12).unwrap() + 1.0).abs() < 1e-9);
        assert_eq!(g_eval(&f, 1e-6).unwrap(), f64::INFINITY);
        assert!(g_eval(&f, 0.0).is_err());
    }

    #[test]
    fn equal_gains_reduce_to_single_term() {
        let two = bf(&[0.3, 0.7], &[2.0, 2.0]);
        let one = bf(&[0.7], &[2.0]);
        for s in [0.1, 0.5, 1.0, 3.0] {
            assert!((g_eval(&two, s).unwrap() - g_eval(&one, s).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_printed_expression() {
        let l = [0.4, 0.9, 1.2];
        let g = [0.2, 1.5, 4.0];
        let f = bf(&l, &g);
        for s in [0.3, 0.8, 2.5] {
            let printed = (1.0 / g[0] - 1.0 / g[1]) * 2f64.powf(l[0] / s)
                + (1.0 / g[1] - 1.0 / g[2]) * 2f64.powf(l[1] / s)
                + (1.0 / g[2]) * 2f64.powf(l[2] / s)
                - 1.0 / g[0]
                - 1.0;
            assert!((g_eval(&f, s).unwrap() - printed).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_examples() {
        // K=2, t=1, gain 1: g(s) = 2^{1/(2s)} − 2.
        let f = bf(&[0.5], &[1.0]);
        let root = solve_boundary(&f, 1.0, DEFAULT_REL_TOL).unwrap();
        assert!((root - 0.5).abs() < 1e-9);

        // Decentralized K=1, q=1/2: single load 1/2.
        let p = SystemParams::new(1, 2, Ratio::from_integer(1)).unwrap();
        let lp = group_loads_decentralized(&p).unwrap();
        let f = boundary_from_loads(&lp, &ChannelState::new(vec![1.0]).unwrap()).unwrap();
        let root = solve_boundary(&f, 1.0, DEFAULT_REL_TOL).unwrap();
        assert!((root - 0.5).abs() < 1e-9);

        // Equal gains: root = total load / log2(1+c).
        let c: f64 = 2.5;
        let f = bf(&[0.5, 0.8, 0.9], &[c, c, c]);
        let want = 0.9 / c.ln_1p() * std::f64::consts::LN_2;
        let root = solve_boundary(&f, want * 1.5, DEFAULT_REL_TOL).unwrap();
        assert!((root - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn bad_bracket() {
        let f = bf(&[0.5], &[1.0]);
        assert!(matches!(
            solve_boundary(&f, 0.25, DEFAULT_REL_TOL),
            Err(Error::BadBracket { .. })
        ));
        assert!(matches!(
            solve_boundary(&f, -1.0, DEFAULT_REL_TOL),
            Err(Error::BadBracket { .. })
        ));
    }

    #[test]
    fn boundary_from_loads_examples() {
        let ch = ChannelState::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = SystemParams::new(4, 4, Ratio::from_integer(2)).unwrap();
        let f = boundary_from_loads(&group_loads_centralized(&p).unwrap(), &ch).unwrap();
        assert_eq!(f.cumulative(), &[0.5, 2.0 / 3.0]);
        assert_eq!(f.gains(), &[1.0, 2.0]);

        let p = SystemParams::new(2, 2, Ratio::from_integer(1)).unwrap();
        let ch2 = ChannelState::new(vec![1.0, 3.0]).unwrap();
        let f = boundary_from_loads(&group_loads_decentralized(&p).unwrap(), &ch2).unwrap();
        assert_eq!(f.cumulative(), &[0.5, 0.75]);

        let lp = LoadProfile::new(vec![0.3]).unwrap();
        assert_eq!(boundary_from_loads(&lp, &ch).unwrap().cumulative(), &[0.3]);

        let too_many = LoadProfile::new(vec![0.3; 5]).unwrap();
        assert!(matches!(
            boundary_from_loads(&too_many, &ch),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(boundary_from_loads(&LoadProfile::new(vec![]).unwrap(), &ch).is_err());
    }

    #[test]
    fn centralized_cumulative_closed_form_exact() {
        for k in 2..=12u64 {
            for t in 1..k {
                let p = SystemParams::new(k as usize, k as usize, Ratio::from_integer(t as i64))
                    .unwrap();
                let lp = group_loads_centralized(&p).unwrap();
                let exact = lp.exact_cumulative().unwrap();
                let denom = binomial(k, t).unwrap() as i128;
                let top = binomial(k, t + 1).unwrap() as i128;
                for (i, got) in exact.iter().enumerate() {
                    let i = i as u64 + 1;
                    let want = Ratio::new(top - binomial(k - i, t + 1).unwrap() as i128, denom);
                    assert_eq!(*got, want, "K={k} t={t} i={i}");
                    let want_f64 = (want.numer().to_owned() as f64) / (*want.denom() as f64);
                    assert_eq!(lp.cumulative()[i as usize - 1], want_f64);
                }
            }
        }
    }

    #[test]
    fn decentralized_cumulative_closed_form() {
        for k in 1..=10usize {
            for tenth in 1..10 {
                let q = tenth as f64 / 10.0;
                let p =
                    SystemParams::new(k, 10 * k, Ratio::from_integer((tenth * k) as i64)).unwrap();
                let lp = group_loads_decentralized(&p).unwrap();
                for (i, &got) in lp.cumulative().iter().enumerate() {
                    let i = i as i32 + 1;
                    let want = (1.0 - q) * (1.0 - (1.0 - q).powi(i)) / q;
                    assert!((got - want).abs() < 1e-12);
                }
            }
        }
    }

    fn random_function() -> impl Strategy<Value = BoundaryFunction> {
        (1usize..=8)
            .prop_flat_map(|g| {
                (
                    prop::collection::vec(0.01f64..1.0, g),
                    prop::collection::vec(1e-3f64..50.0, g),
                )
            })
            .prop_map(|(loads, mut gains)| {
                gains.sort_by(f64::total_cmp);
                let cumulative = loads
                    .iter()
                    .scan(0.0, |acc, l| {
                        *acc += l;
                        Some(*acc)
                    })
                    .collect();
                BoundaryFunction::new(cumulative, gains).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn g_strictly_decreasing(f in random_function(), a in -2.0f64..2.0, gap in 1e-3f64..1.0) {
            let s1 = 10f64.powf(a);
            let s2 = s1 * (1.0 + gap);
            let (g1, g2) = (g_eval(&f, s1).unwrap(), g_eval(&f, s2).unwrap());
            prop_assert!(g1 > g2 || (g1.is_infinite() && g2.is_infinite()), "g({})={} g({})={}", s1, g1, s2, g2);
        }

        #[test]
        fn root_is_bracketed(f in random_function()) {
            let upper = f.cumulative().iter().sum::<f64>() / crate::gbc::single_user_capacity(f.gains()[0]) * 10.0;
            let root = solve_boundary(&f, upper, DEFAULT_REL_TOL).unwrap();
            let eps = 1e-8 * root;
            prop_assert!(g_eval(&f, root - eps).unwrap() > 0.0);
            prop_assert!(g_eval(&f, root + eps).unwrap() < 0.0);
            prop_assert!(g_eval(&f, root).unwrap() <= 0.0);
        }
    }
}

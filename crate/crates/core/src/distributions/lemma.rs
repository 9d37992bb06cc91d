//! Greedy construction of the sparse distribution `p`, checkpoints `n_i` and
//! block sizes `k_i` used by the slow-rate lower bound.
//!
//! The construction picks
//!
//! ```text
//! n_1     = min { n : R(n) < 1 }
//! n_{i+1} = min { n > 2 n_i : R(n) <= min(R(n_i) / 2, R(n_1) / (2 n_i)) }
//! k_i     = max(n_i, k_{i-1} + 1)
//! p_{k_i} = C R(n_i),   C = 1 / sum_{i <= depth} R(n_i)
//! ```
//!
//! Halving keeps `sum R(n_i) <= 2 R(n_1) < 2`, so `C >= 1/2`; the `1/(2 n_i)`
//! cap bounds every tail by `C R(n_1) / n_i <= 1 / n_i`; `k_i >= n_i` together
//! with `p <= 1` gives `n_i p_{k_i} <= k_i`. The infinite sequence is
//! truncated at `depth` and renormalised.
//!
//! The `1/(2 n_i)` cap forces `n_{i+1} >~ 1 / R^{-1}(1/n_i)`, so the
//! checkpoints grow doubly exponentially for power rates and as a tower for
//! logarithmic ones. Checkpoints are exact `u64`s; a depth whose next
//! checkpoint does not fit is reported as a construction failure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rate function `R : N -> (0, 1)` with `R(n) -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateFn {
    /// `1 / ceil(log2(n + 2))`.
    InverseLog {},
    /// `n^(-exponent)`.
    Power { exponent: f64 },
    /// Constant `value`; violates `R -> 0`, useful for negative tests.
    Constant { value: f64 },
}

impl RateFn {
    pub fn inverse_sqrt() -> Self {
        RateFn::Power { exponent: 0.5 }
    }

    pub fn inverse_fourth_root() -> Self {
        RateFn::Power { exponent: 0.25 }
    }

    pub fn eval(&self, n: u64) -> f64 {
        match self {
            RateFn::InverseLog {} => {
                // ceil(log2(n + 2)) without going through floats
                let m = n as u128 + 2;
                let bits = 128 - (m - 1).leading_zeros();
                1.0 / bits as f64
            }
            RateFn::Power { exponent } => (n as f64).powf(-exponent),
            RateFn::Constant { value } => *value,
        }
    }
}

impl fmt::Display for RateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::InverseLog {} => write!(f, "inverse-log"),
            RateFn::Power { exponent } if *exponent == 0.5 => write!(f, "inverse-sqrt"),
            RateFn::Power { exponent } if *exponent == 0.25 => write!(f, "inverse-fourth-root"),
            RateFn::Power { exponent } => write!(f, "power:{exponent}"),
            RateFn::Constant { value } => write!(f, "constant:{value}"),
        }
    }
}

impl FromStr for RateFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number in rate '{s}'")))
        };
        match s {
            "inverse-log" => Ok(RateFn::InverseLog {}),
            "inverse-sqrt" => Ok(RateFn::inverse_sqrt()),
            "inverse-fourth-root" => Ok(RateFn::inverse_fourth_root()),
            _ => {
                if let Some(v) = s.strip_prefix("power:") {
                    Ok(RateFn::Power { exponent: parse_num(v)? })
                } else if let Some(v) = s.strip_prefix("constant:") {
                    Ok(RateFn::Constant { value: parse_num(v)? })
                } else {
                    Err(Error::Config(format!(
                        "unknown rate '{s}' (expected inverse-log, inverse-sqrt, inverse-fourth-root, power:<e>, constant:<c>)"
                    )))
                }
            }
        }
    }
}

/// Output of [`lemma512_construct`]. Vectors are indexed from 0 for `i = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma512Artifacts {
    pub rate: RateFn,
    pub depth: usize,
    pub n: Vec<u64>,
    pub k: Vec<u64>,
    /// `p_{k_i}`; all remaining mass of `p` is zero.
    pub p: Vec<f64>,
    pub c: f64,
    /// `sigma_0 = 0, sigma_i = k_1 + ... + k_i`; length `depth + 1`.
    pub sigma: Vec<u64>,
    /// The lemma's `C <= 1` does not hold for this truncation.
    pub c_exceeds_one: bool,
    /// Always true: the infinite sequence is cut at `depth` and renormalised.
    pub truncated: bool,
}

/// Per-index results of checking the three lemma inequalities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    /// `sum_{k > k_i} p_k <= 1 / n_i`.
    pub tail_bound: Vec<bool>,
    /// `n_i p_{k_i} <= k_i`.
    pub mass_vs_index: Vec<bool>,
    /// `p_{k_i} = C R(n_i) > 0`.
    pub proportional: Vec<bool>,
    pub increasing: bool,
    pub c_at_least_half: bool,
    pub normalized: bool,
}

impl PropertyReport {
    pub fn all_hold(&self) -> bool {
        self.tail_bound.iter().all(|b| *b)
            && self.mass_vs_index.iter().all(|b| *b)
            && self.proportional.iter().all(|b| *b)
            && self.increasing
            && self.c_at_least_half
            && self.normalized
    }
}

const N1_SCAN_LIMIT: u64 = 1_000_000;
const MAX_PROBES: usize = 512;

fn checked_rate(rate: &RateFn, n: u64) -> Result<f64> {
    let v = rate.eval(n);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidRate { n, value: v })
    }
}

/// Smallest `n >= lo` with `R(n) <= threshold`, assuming `R` is nonincreasing
/// past `lo` (galloping then bisection). For other `R` the returned point still
/// satisfies the threshold but need not be the smallest.
fn search_checkpoint(rate: &RateFn, lo: u64, threshold: f64, index: usize) -> Result<u64> {
    let fail = |reason: String| Error::ConstructionFailure { index, reason };
    if checked_rate(rate, lo)? <= threshold {
        return Ok(lo);
    }
    let mut below = lo;
    let mut step = 1u64;
    let mut probes = 0;
    let hi = loop {
        probes += 1;
        if probes > MAX_PROBES {
            return Err(fail(format!("no n with R(n) <= {threshold:e} within the search budget")));
        }
        let candidate = lo.saturating_add(step);
        if checked_rate(rate, candidate)? <= threshold {
            break candidate;
        }
        if candidate == u64::MAX {
            return Err(fail(format!(
                "next checkpoint needs R(n) <= {threshold:e}, which no n <= u64::MAX reaches"
            )));
        }
        below = candidate;
        step = step.checked_mul(2).unwrap_or(u64::MAX - lo);
    };
    let (mut a, mut b) = (below, hi);
    while b - a > 1 {
        let mid = a + (b - a) / 2;
        if checked_rate(rate, mid)? <= threshold {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

/// Builds the first `depth` checkpoints and the renormalised sparse mass.
pub fn lemma512_construct(rate: RateFn, depth: usize) -> Result<Lemma512Artifacts> {
    if depth == 0 {
        return Err(Error::Config("depth must be >= 1".into()));
    }
    let n1 = (1..=N1_SCAN_LIMIT)
        .find_map(|n| match checked_rate(&rate, n) {
            Ok(v) if v < 1.0 => Some(Ok(n)),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        })
        .unwrap_or_else(|| {
            Err(Error::ConstructionFailure {
                index: 1,
                reason: format!("R(n) >= 1 for all n <= {N1_SCAN_LIMIT}"),
            })
        })?;

    let r1 = checked_rate(&rate, n1)?;
    let mut n = vec![n1];
    let mut r = vec![r1];
    while n.len() < depth {
        let i = n.len();
        let last = n[i - 1];
        let threshold = (r[i - 1] / 2.0).min(r1 / (2.0 * last as f64));
        let lo = last.checked_mul(2).and_then(|v| v.checked_add(1)).ok_or_else(|| {
            Error::ConstructionFailure { index: i + 1, reason: "2 n_i + 1 overflows u64".into() }
        })?;
        let next = search_checkpoint(&rate, lo, threshold, i + 1)?;
        r.push(checked_rate(&rate, next)?);
        n.push(next);
    }
    if depth > 1 && r[depth - 1] >= r[0] {
        return Err(Error::ConstructionFailure {
            index: depth,
            reason: "rate did not decrease along the checkpoints".into(),
        });
    }

    let mut k = Vec::with_capacity(depth);
    for (i, ni) in n.iter().enumerate() {
        let ki = if i == 0 { *ni } else { (*ni).max(k[i - 1] + 1) };
        k.push(ki);
    }
    let mut sigma = vec![0u64];
    for ki in &k {
        let next = sigma.last().unwrap().checked_add(*ki).ok_or_else(|| Error::ConstructionFailure {
            index: sigma.len(),
            reason: "sigma overflows u64".into(),
        })?;
        sigma.push(next);
    }

    let total = neumaier_sum(r.iter().copied());
    let c = 1.0 / total;
    let p: Vec<f64> = r.iter().map(|ri| c * ri).collect();
    Ok(Lemma512Artifacts {
        rate,
        depth,
        n,
        k,
        p,
        c,
        sigma,
        c_exceeds_one: c > 1.0,
        truncated: true,
    })
}

impl Lemma512Artifacts {
    /// Checks the three lemma inequalities at every constructed index.
    pub fn verify(&self) -> PropertyReport {
        let d = self.p.len();
        // tails[i] = sum_{j > i} p_j, accumulated from the smallest terms
        let mut tails = vec![0.0; d];
        for i in (0..d.saturating_sub(1)).rev() {
            tails[i] = neumaier_sum(self.p[i + 1..].iter().rev().copied());
        }
        let tail_bound = (0..d)
            .map(|i| tails[i] <= (1.0 / self.n[i] as f64) * (1.0 + 1e-12))
            .collect();
        let mass_vs_index = (0..d)
            .map(|i| self.n[i] as f64 * self.p[i] <= self.k[i] as f64)
            .collect();
        let proportional = (0..d)
            .map(|i| {
                let target = self.c * self.rate.eval(self.n[i]);
                self.p[i] > 0.0 && (self.p[i] - target).abs() <= 1e-15 * target.max(f64::MIN_POSITIVE)
            })
            .collect();
        let increasing = self.n.windows(2).all(|w| w[0] < w[1]) && self.k.windows(2).all(|w| w[0] < w[1]);
        PropertyReport {
            tail_bound,
            mass_vs_index,
            proportional,
            increasing,
            c_at_least_half: self.c >= 0.5,
            normalized: (neumaier_sum(self.p.iter().copied()) - 1.0).abs() <= 1e-12,
        }
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_values() {
        assert_eq!(RateFn::InverseLog {}.eval(1), 0.5); // ceil(log2 3) = 2
        assert_eq!(RateFn::InverseLog {}.eval(2), 0.5); // ceil(log2 4) = 2
        assert_eq!(RateFn::InverseLog {}.eval(3), 1.0 / 3.0);
        assert_eq!(RateFn::inverse_sqrt().eval(4), 0.5);
        for s in ["inverse-log", "inverse-sqrt", "inverse-fourth-root", "power:0.3", "constant:0.5"] {
            let r: RateFn = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert!("bogus".parse::<RateFn>().is_err());
    }

    #[test]
    fn inverse_sqrt_checkpoints() {
        let art = lemma512_construct(RateFn::inverse_sqrt(), 4).unwrap();
        assert_eq!(art.n[0], 2);
        // R(n_2) <= R(2)/4 forces n_2 >= 32; R(n_3) <= R(2)/64 forces n_3 >= 8192
        assert!((32..=33).contains(&art.n[1]), "{:?}", art.n);
        assert!((8192..=8193).contains(&art.n[2]), "{:?}", art.n);
        assert!(art.verify().all_hold());
        assert!(art.c >= 0.5);
        assert_eq!(art.sigma[0], 0);
        assert_eq!(art.sigma[4], art.k.iter().sum::<u64>());
    }

    #[test]
    fn constant_rate_fails_to_construct() {
        let err = lemma512_construct(RateFn::Constant { value: 0.5 }, 3).unwrap_err();
        assert!(matches!(err, Error::ConstructionFailure { index: 2, .. }), "{err}");
    }

    #[test]
    fn invalid_rate_rejected() {
        assert!(matches!(
            lemma512_construct(RateFn::Constant { value: -0.1 }, 2),
            Err(Error::InvalidRate { .. })
        ));
        assert!(matches!(
            lemma512_construct(RateFn::Constant { value: f64::NAN }, 2),
            Err(Error::InvalidRate { .. })
        ));
    }

    #[test]
    fn inverse_log_grows_past_u64_quickly() {
        // n_1 = 1, n_2 = 7 and n_3 = 2^27 - 1; n_4 needs ceil(log2(n+2)) >= ~5.4e8.
        let art = lemma512_construct(RateFn::InverseLog {}, 3).unwrap();
        assert_eq!(art.n, vec![1, 7, (1 << 27) - 1]);
        assert!(art.verify().all_hold());
        let err = lemma512_construct(RateFn::InverseLog {}, 4).unwrap_err();
        assert!(matches!(err, Error::ConstructionFailure { index: 4, .. }), "{err}");
    }

    #[test]
    fn neumaier_beats_naive() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(v), 2.0);
    }
}

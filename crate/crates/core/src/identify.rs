//! Identification from a sample: the ERM baseline and the margin-window rule.
//!
//! Both algorithms only look at how often each distinct string occurs, which
//! is what lets `eval` compute their expected error exactly by enumerating
//! frequency compositions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::languages::{Collection, Language};
use crate::universe::UniverseIndex;

/// An i.i.d. sample `x_1, ..., x_n` with its multiplicity view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    items: Vec<UniverseIndex>,
    counts: BTreeMap<UniverseIndex, u64>,
}

impl Sample {
    pub fn new(items: Vec<UniverseIndex>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Config("a sample needs at least one item".into()));
        }
        let mut counts = BTreeMap::new();
        for x in &items {
            *counts.entry(*x).or_insert(0) += 1;
        }
        Ok(Sample { items, counts })
    }

    /// Sample with the given multiplicities, items listed in index order.
    pub fn from_counts(counts: impl IntoIterator<Item = (UniverseIndex, u64)>) -> Result<Self> {
        let mut items = Vec::new();
        for (k, c) in counts {
            items.extend(std::iter::repeat_n(k, c as usize));
        }
        Sample::new(items)
    }

    pub fn len(&self) -> u64 {
        self.items.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[UniverseIndex] {
        &self.items
    }

    pub fn count(&self, k: UniverseIndex) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<UniverseIndex, u64> {
        &self.counts
    }

    pub fn contains(&self, k: UniverseIndex) -> bool {
        self.counts.contains_key(&k)
    }

    pub fn distinct(&self) -> impl Iterator<Item = UniverseIndex> + '_ {
        self.counts.keys().copied()
    }
}

/// Window size `f(n)`: positive, nondecreasing, unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindowFn {
    /// `ceil(n^(1/degree))`.
    Root { degree: u32 },
    /// Fixed size; not unbounded, offered for ablations.
    Constant { size: u64 },
}

impl Default for WindowFn {
    fn default() -> Self {
        WindowFn::Root { degree: 4 }
    }
}

impl WindowFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            WindowFn::Root { degree: 0 } => Err(Error::Config("window root degree must be >= 1".into())),
            WindowFn::Constant { size: 0 } => Err(Error::Config("window size must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, n: u64) -> u64 {
        match *self {
            WindowFn::Constant { size } => size.max(1),
            WindowFn::Root { degree } => ceil_root(n.max(1), degree.max(1)),
        }
    }
}

/// Smallest `r >= 1` with `r^d >= n`.
fn ceil_root(n: u64, d: u32) -> u64 {
    let reaches = |r: u64| r.checked_pow(d).is_none_or(|p| p >= n);
    let mut r = (n as f64).powf(1.0 / d as f64).ceil().max(1.0) as u64;
    while r > 1 && reaches(r - 1) {
        r -= 1;
    }
    while !reaches(r) {
        r += 1;
    }
    r
}

/// `#{j : x_j ∉ L}`.
pub fn empirical_miss_count(language: &Language, sample: &Sample) -> u64 {
    sample
        .counts
        .iter()
        .filter(|(k, _)| !language.member(**k))
        .map(|(_, c)| c)
        .sum()
}

fn window_misses(collection: &Collection, sample: &Sample, f: u64) -> Vec<u64> {
    let size = usize::try_from(f).unwrap_or(usize::MAX);
    collection
        .window(size)
        .iter()
        .map(|l| empirical_miss_count(l, sample))
        .collect()
}

/// First minimiser of the miss count among `L_1..L_{f(n)}`.
pub fn erm_identify(collection: &Collection, sample: &Sample, f: &WindowFn) -> usize {
    let misses = window_misses(collection, sample, f.evaluate(sample.len()));
    let best = misses.iter().min().expect("window is nonempty");
    misses.iter().position(|m| m == best).unwrap() + 1
}

/// Core of the margin rule on precomputed miss counts: the largest `i` such
/// that `(miss_j - miss_i) * f > 2n` for every `j < i`.
pub fn margin_select(misses: &[u64], n: u64, f: u64) -> usize {
    let threshold = 2 * n as u128;
    let f = f as u128;
    let mut best = 1;
    for i in 1..misses.len() {
        let mi = misses[i];
        let beats_all = misses[..i]
            .iter()
            .all(|mj| *mj > mi && (*mj - mi) as u128 * f > threshold);
        if beats_all {
            best = i + 1;
        }
    }
    best
}

pub fn margin_identify(collection: &Collection, sample: &Sample, f: &WindowFn) -> usize {
    let n = sample.len();
    let fn_ = f.evaluate(n);
    margin_select(&window_misses(collection, sample, fn_), n, fn_)
}

/// `min(1, 2 f(n) exp(-n / (2 f(n)^2)))`.
pub fn theoretical_id_bound(n: u64, f: &WindowFn) -> f64 {
    let fv = f.evaluate(n) as f64;
    (2.0 * fv * (-(n as f64) / (2.0 * fv * fv)).exp()).clamp(0.0, 1.0)
}

/// Identification algorithms addressable from configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IdAlgorithm {
    Erm {
        #[serde(default)]
        window: WindowFn,
    },
    Margin {
        #[serde(default)]
        window: WindowFn,
    },
    /// Always answers `index`; a reference point for evaluators.
    Constant { index: usize },
}

impl IdAlgorithm {
    pub fn margin() -> Self {
        IdAlgorithm::Margin { window: WindowFn::default() }
    }

    pub fn erm() -> Self {
        IdAlgorithm::Erm { window: WindowFn::default() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            IdAlgorithm::Erm { .. } => "erm",
            IdAlgorithm::Margin { .. } => "margin",
            IdAlgorithm::Constant { .. } => "constant",
        }
    }

    pub fn window(&self) -> Option<WindowFn> {
        match self {
            IdAlgorithm::Erm { window } | IdAlgorithm::Margin { window } => Some(*window),
            IdAlgorithm::Constant { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            IdAlgorithm::Constant { index: 0 } => Err(Error::Config("constant index must be >= 1".into())),
            IdAlgorithm::Constant { .. } => Ok(()),
            IdAlgorithm::Erm { window } | IdAlgorithm::Margin { window } => window.validate(),
        }
    }

    pub fn identify(&self, collection: &Collection, sample: &Sample) -> usize {
        match self {
            IdAlgorithm::Erm { window } => erm_identify(collection, sample, window),
            IdAlgorithm::Margin { window } => margin_identify(collection, sample, window),
            IdAlgorithm::Constant { index } => *index,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::languages::{residue_collection, signature_collection};
    use proptest::prelude::*;

    fn idx(k: u64) -> UniverseIndex {
        UniverseIndex::new(k).unwrap()
    }

    fn sig_sample(s0: u64, s1: u64) -> Sample {
        Sample::from_counts([(idx(1), s0), (idx(2), s1)].into_iter().filter(|(_, c)| *c > 0)).unwrap()
    }

    #[test]
    fn miss_count_examples() {
        let c = signature_collection(0);
        let l = c.language(1).unwrap();
        let lp = c.language(2).unwrap();
        assert_eq!(empirical_miss_count(&l, &sig_sample(2, 2)), 2);
        assert_eq!(empirical_miss_count(&lp, &sig_sample(7, 3)), 7);
        let odds = residue_collection(2).language(2).unwrap();
        let s = Sample::new(vec![idx(1), idx(3), idx(5)]).unwrap();
        assert_eq!(empirical_miss_count(&odds, &s), 0);
    }

    #[test]
    fn sample_views() {
        let s = Sample::new(vec![idx(3), idx(1), idx(3)]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.count(idx(3)), 2);
        assert_eq!(s.distinct().collect::<Vec<_>>(), vec![idx(1), idx(3)]);
        assert!(Sample::new(vec![]).is_err());
    }

    #[test]
    fn window_values() {
        let f = WindowFn::default();
        assert_eq!(f.evaluate(1), 1);
        assert_eq!(f.evaluate(16), 2);
        assert_eq!(f.evaluate(17), 3);
        assert_eq!(f.evaluate(256), 4);
        assert_eq!(f.evaluate(4096), 8);
        assert_eq!(WindowFn::Root { degree: 2 }.evaluate(10), 4);
        assert_eq!(WindowFn::Root { degree: 4 }.evaluate(u64::MAX), 65536);
        let mut prev = 1;
        for n in 1..=10_000 {
            let v = f.evaluate(n);
            assert!(v >= prev && v >= 1);
            prev = v;
        }
    }

    #[test]
    fn erm_examples() {
        let c = signature_collection(1);
        assert_eq!(erm_identify(&c, &sig_sample(3, 3), &WindowFn::Constant { size: 1 }), 1);
        assert_eq!(erm_identify(&c, &sig_sample(10, 0), &WindowFn::Constant { size: 3 }), 1);
        assert_eq!(erm_identify(&c, &sig_sample(0, 10), &WindowFn::Constant { size: 3 }), 2);
        // ties go to the smallest index
        assert_eq!(erm_identify(&c, &sig_sample(5, 5), &WindowFn::Constant { size: 3 }), 1);
    }

    #[test]
    fn margin_select_examples() {
        assert_eq!(margin_select(&[15, 5], 25, 5), 1);
        assert_eq!(margin_select(&[18, 5, 3], 25, 5), 2);
        assert_eq!(margin_select(&[4, 0, 9], 25, 1), 1);
        assert_eq!(margin_select(&[7], 25, 5), 1);
    }

    #[test]
    fn margin_window_of_one() {
        let c = signature_collection(2);
        let s = sig_sample(0, 30);
        assert_eq!(margin_identify(&c, &s, &WindowFn::Constant { size: 1 }), 1);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(theoretical_id_bound(1, &WindowFn::default()), 1.0);
        let b = theoretical_id_bound(4096, &WindowFn::default());
        assert!((b - 16.0 * (-32f64).exp()).abs() < 1e-25);
        assert!((b - 2.03e-13).abs() < 0.01e-13);
        let f = WindowFn::Constant { size: 3 };
        let mut prev = 1.0;
        for n in 1..500 {
            let v = theoretical_id_bound(n, &f);
            assert!(v <= prev);
            prev = v;
        }
    }

    /// Deterministic core of the upper bound: every window error estimated to
    /// within 1/f(n) forces the margin rule onto the best language.
    #[test]
    fn margin_recovers_best_when_estimates_are_close() {
        let c = signature_collection(2);
        let f = WindowFn::Constant { size: 8 };
        let fv = 8.0;
        let truth = [0.25, 0.75, 1.0, 1.0];
        for n in [64u64, 100, 256, 1000] {
            for s1 in 0..=n {
                let s = sig_sample(n - s1, s1);
                let close = c
                    .window(4)
                    .iter()
                    .zip(truth)
                    .all(|(l, t)| ((empirical_miss_count(l, &s) as f64 / n as f64) - t).abs() <= 1.0 / fv);
                if close {
                    assert_eq!(margin_identify(&c, &s, &f), 1, "n={n} s1={s1}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn outputs_stay_in_window(s0 in 0u64..40, s1 in 0u64..40, extra in 0u64..40, size in 1u64..6) {
            prop_assume!(s0 + s1 + extra > 0);
            let c = signature_collection(3);
            let counts = [(idx(1), s0), (idx(2), s1), (idx(3), extra)];
            let s = Sample::from_counts(counts.into_iter().filter(|(_, k)| *k > 0)).unwrap();
            let f = WindowFn::Constant { size };
            prop_assert!(erm_identify(&c, &s, &f) as u64 <= size);
            prop_assert!(margin_identify(&c, &s, &f) as u64 <= size);
        }

        #[test]
        fn duplication_invariance(s0 in 0u64..30, s1 in 0u64..30, size in 1u64..5) {
            prop_assume!(s0 + s1 > 0);
            let c = signature_collection(2);
            let f = WindowFn::Constant { size };
            let once = sig_sample(s0, s1);
            let twice = sig_sample(2 * s0, 2 * s1);
            prop_assert_eq!(erm_identify(&c, &once, &f), erm_identify(&c, &twice, &f));
            prop_assert_eq!(margin_identify(&c, &once, &f), margin_identify(&c, &twice, &f));
        }

        #[test]
        fn order_does_not_matter(mut items in proptest::collection::vec(1u64..7, 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let c = signature_collection(2);
            let f = WindowFn::Constant { size: 3 };
            let a = Sample::new(items.iter().map(|k| idx(*k)).collect()).unwrap();
            items.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = Sample::new(items.iter().map(|k| idx(*k)).collect()).unwrap();
            prop_assert_eq!(margin_identify(&c, &a, &f), margin_identify(&c, &b, &f));
            prop_assert_eq!(erm_identify(&c, &a, &f), erm_identify(&c, &b, &f));
        }

        #[test]
        fn margin_is_one_without_margin(misses in proptest::collection::vec(0u64..50, 1..8), n in 50u64..200) {
            // with f = 1 no difference can exceed 2n
            prop_assert_eq!(margin_select(&misses, n, 1), 1);
        }
    }
}

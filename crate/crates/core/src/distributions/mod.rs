//! Distributions over universe indices: exact pmf, support queries and
//! seeded sampling.
//!
//! All samplers take a caller-owned RNG. Label sequences `z` are realised
//! lazily: the label of coordinate `w` is drawn from its own ChaCha stream
//! keyed by `(seed, w)`, so a `LabelSource` is a pure function of `w`.

mod lemma;

use std::collections::HashMap;
use std::sync::Arc;

use num_integer::Integer;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use lemma::{lemma512_construct, neumaier_sum, Lemma512Artifacts, PropertyReport, RateFn};

use crate::error::{Error, Result};
use crate::languages::{Language, PeriodicSet};
use crate::universe::{UString, UniverseIndex, UniverseSpec};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Inverse-CDF lookup over a cumulative table; the last slot absorbs rounding.
fn inverse_cdf(cumulative: &[f64], u: f64) -> usize {
    let i = cumulative.partition_point(|c| *c <= u);
    i.min(cumulative.len() - 1)
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Finitely many atoms with explicit probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSupport {
    atoms: Vec<(UniverseIndex, f64)>,
    cumulative: Vec<f64>,
    lookup: HashMap<UniverseIndex, f64>,
}

impl FiniteSupport {
    pub fn new(atoms: Vec<(UniverseIndex, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut lookup = HashMap::with_capacity(atoms.len());
        for (k, p) in &atoms {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::InvalidDistribution(format!("atom {k} has probability {p}")));
            }
            if lookup.insert(*k, *p).is_some() {
                return Err(Error::InvalidDistribution(format!("duplicate atom {k}")));
            }
        }
        let total = neumaier_sum(atoms.iter().map(|a| a.1));
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("atoms sum to {total}, not 1")));
        }
        let cumulative = cumulative(atoms.iter().map(|a| a.1));
        Ok(FiniteSupport { atoms, cumulative, lookup })
    }

    pub fn atoms(&self) -> &[(UniverseIndex, f64)] {
        &self.atoms
    }
}

/// `pmf(first + stride * (j - 1)) = 2^-j` for `j >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeometricProgression {
    pub first: u64,
    pub stride: u64,
}

impl GeometricProgression {
    fn rank(&self, k: u64) -> Option<u64> {
        (k >= self.first && (k - self.first).is_multiple_of(self.stride)).then(|| (k - self.first) / self.stride + 1)
    }

    fn count_le(&self, w: u64) -> u64 {
        if w < self.first {
            0
        } else {
            (w - self.first) / self.stride + 1
        }
    }

    /// Number of fair-coin flips up to and including the first head.
    fn sample_rank<R: Rng + ?Sized>(rng: &mut R) -> u64 {
        let mut j = 1;
        loop {
            let bits: u64 = rng.gen();
            if bits != 0 {
                return j + bits.trailing_zeros() as u64;
            }
            j += 64;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    components: Vec<(f64, Distribution)>,
    cumulative: Vec<f64>,
}

impl Mixture {
    pub fn new(components: Vec<(f64, Distribution)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidDistribution("empty mixture".into()));
        }
        if components.iter().any(|(w, _)| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidDistribution("mixture weights must be positive".into()));
        }
        let total = neumaier_sum(components.iter().map(|c| c.0));
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("mixture weights sum to {total}")));
        }
        let cumulative = cumulative(components.iter().map(|c| c.0));
        Ok(Mixture { components, cumulative })
    }

    pub fn components(&self) -> &[(f64, Distribution)] {
        &self.components
    }
}

/// Block distribution over `N`: block `i` covers `2 sigma_{i-1} + 1 ..= 2 sigma_i`
/// and each of its `2 k_i` points has mass `p_{k_i} / (2 k_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockBase {
    k: Vec<u64>,
    p: Vec<f64>,
    /// `2 sigma_i` for `i = 0..=depth`.
    bounds: Vec<u64>,
    cumulative: Vec<f64>,
}

impl BlockBase {
    pub fn new(k: Vec<u64>, p: Vec<f64>) -> Result<Self> {
        if k.is_empty() || k.len() != p.len() {
            return Err(Error::InvalidDistribution("block sizes and masses must align".into()));
        }
        if k.contains(&0) || p.iter().any(|pi| !(pi.is_finite() && *pi > 0.0)) {
            return Err(Error::InvalidDistribution("blocks need k_i >= 1 and p_i > 0".into()));
        }
        let total = neumaier_sum(p.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("block masses sum to {total}")));
        }
        let mut bounds = vec![0u64];
        for ki in &k {
            let next = ki
                .checked_mul(2)
                .and_then(|b| bounds.last().unwrap().checked_add(b))
                .ok_or_else(|| Error::IndexOverflow("block bounds exceed u64".into()))?;
            bounds.push(next);
        }
        let cumulative = cumulative(p.iter().copied());
        Ok(BlockBase { k, p, bounds, cumulative })
    }

    /// 1-based block containing `w`, or `None` past the truncation depth.
    pub fn block_of(&self, w: u64) -> Option<usize> {
        if w == 0 || w > *self.bounds.last().unwrap() {
            return None;
        }
        Some(self.bounds.partition_point(|b| *b < w))
    }

    /// `(first, last)` point of block `i`.
    pub fn block_range(&self, i: usize) -> (u64, u64) {
        (self.bounds[i - 1] + 1, self.bounds[i])
    }

    pub fn depth(&self) -> usize {
        self.k.len()
    }

    /// Points beyond the last constructed block carry no mass.
    pub fn is_truncated(&self, w: u64) -> bool {
        w > *self.bounds.last().unwrap()
    }

    fn pmf_at(&self, w: u64) -> f64 {
        match self.block_of(w) {
            Some(i) => self.p[i - 1] / (2 * self.k[i - 1]) as f64,
            None => 0.0,
        }
    }

    fn tail_mass(&self, w: u64) -> f64 {
        match self.block_of(w) {
            None if w == 0 => 1.0,
            None => 0.0,
            Some(i) => {
                let (_, last) = self.block_range(i);
                let partial = (last - w) as f64 * self.pmf_at(w);
                partial + neumaier_sum(self.p[i..].iter().rev().copied())
            }
        }
    }
}

/// Label sequence `z` indexed by the first coordinate `w >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LabelSource {
    /// `z_w = labels[(w - 1) mod len]`.
    ExplicitPrefix { labels: Vec<i64> },
    /// `z_w` uniform over `offset ..= offset + count - 1`, from the ChaCha
    /// stream `w` of `seed`.
    SeededRandom { seed: u64, label_count: u64, label_offset: i64 },
}

impl LabelSource {
    pub fn uniform(seed: u64, label_count: u64, label_offset: i64) -> Self {
        assert!(label_count >= 1);
        LabelSource::SeededRandom { seed, label_count, label_offset }
    }

    pub fn query(&self, w: u64) -> i64 {
        match self {
            LabelSource::ExplicitPrefix { labels } => labels[((w - 1) % labels.len() as u64) as usize],
            LabelSource::SeededRandom { seed, label_count, label_offset } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(w);
                label_offset + rng.gen_range(0..*label_count) as i64
            }
        }
    }

    /// Every label the source can produce.
    pub fn range(&self) -> Vec<i64> {
        match self {
            LabelSource::ExplicitPrefix { labels } => {
                let mut v = labels.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            LabelSource::SeededRandom { label_count, label_offset, .. } => {
                (0..*label_count as i64).map(|c| label_offset + c).collect()
            }
        }
    }
}

/// `D_z`: draw `w` from a base over `N`, emit `(w, z_w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    base: Arc<Distribution>,
    labels: LabelSource,
    universe: UniverseSpec,
}

impl Labeled {
    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn labels(&self) -> &LabelSource {
        &self.labels
    }

    pub fn universe(&self) -> &UniverseSpec {
        &self.universe
    }

    fn point(&self, k: UniverseIndex) -> Option<(u64, i64)> {
        match self.universe.decode(k) {
            UString::Pair(w, y) => Some((w, y)),
            UString::Nat(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Finite(FiniteSupport),
    Geometric(GeometricProgression),
    Mixture(Mixture),
    Block(BlockBase),
    Labeled(Labeled),
}

/// Atoms `(k, p)` with `p` summing to one.
pub fn finite_support(atoms: Vec<(UniverseIndex, f64)>) -> Result<Distribution> {
    FiniteSupport::new(atoms).map(Distribution::Finite)
}

/// `pmf(w) = 2^-w` over `N`.
pub fn geometric_base() -> Distribution {
    Distribution::Geometric(GeometricProgression { first: 1, stride: 1 })
}

pub fn geometric_progression(first: u64, stride: u64) -> Result<Distribution> {
    if first == 0 || stride == 0 {
        return Err(Error::InvalidDistribution("progression needs first, stride >= 1".into()));
    }
    Ok(Distribution::Geometric(GeometricProgression { first, stride }))
}

pub fn mixture(components: Vec<(f64, Distribution)>) -> Result<Distribution> {
    Mixture::new(components).map(Distribution::Mixture)
}

/// `D_N` of the slow-rate construction.
pub fn block_base_distribution(art: &Lemma512Artifacts) -> Result<Distribution> {
    BlockBase::new(art.k.clone(), art.p.clone()).map(Distribution::Block)
}

/// `D_z` over a pair universe whose label set contains the range of `z`.
pub fn labeled_distribution(base: Arc<Distribution>, z: LabelSource, universe: UniverseSpec) -> Result<Distribution> {
    if universe.label_count().is_none() {
        return Err(Error::InvalidDistribution("labeled distribution needs a pair universe".into()));
    }
    if let Some(bad) = z.range().into_iter().find(|y| !universe.has_label(*y)) {
        return Err(Error::InvalidDistribution(format!("label {bad} not in {}", universe.describe())));
    }
    Ok(Distribution::Labeled(Labeled { base, labels: z, universe }))
}

impl Distribution {
    pub fn pmf(&self, k: UniverseIndex) -> f64 {
        match self {
            Distribution::Finite(f) => f.lookup.get(&k).copied().unwrap_or(0.0),
            Distribution::Geometric(g) => match g.rank(k.get()) {
                Some(j) => 0.5f64.powi(j.min(i32::MAX as u64) as i32),
                None => 0.0,
            },
            Distribution::Mixture(m) => m.components.iter().map(|(w, d)| w * d.pmf(k)).sum(),
            Distribution::Block(b) => b.pmf_at(k.get()),
            Distribution::Labeled(l) => match l.point(k) {
                Some((w, y)) if l.labels.query(w) == y => l.base.pmf(UniverseIndex::from_raw(w)),
                _ => 0.0,
            },
        }
    }

    pub fn in_support(&self, k: UniverseIndex) -> bool {
        match self {
            Distribution::Finite(f) => f.lookup.contains_key(&k),
            Distribution::Geometric(g) => g.rank(k.get()).is_some(),
            Distribution::Mixture(m) => m.components.iter().any(|(_, d)| d.in_support(k)),
            Distribution::Block(b) => b.block_of(k.get()).is_some(),
            Distribution::Labeled(l) => match l.point(k) {
                Some((w, y)) => l.labels.query(w) == y && l.base.in_support(UniverseIndex::from_raw(w)),
                None => false,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UniverseIndex {
        match self {
            Distribution::Finite(f) => f.atoms[inverse_cdf(&f.cumulative, rng.gen::<f64>())].0,
            Distribution::Geometric(g) => {
                let j = GeometricProgression::sample_rank(rng);
                UniverseIndex::from_raw(g.first + g.stride * (j - 1))
            }
            Distribution::Mixture(m) => {
                let c = inverse_cdf(&m.cumulative, rng.gen::<f64>());
                m.components[c].1.sample(rng)
            }
            Distribution::Block(b) => {
                let i = inverse_cdf(&b.cumulative, rng.gen::<f64>()) + 1;
                let (lo, hi) = b.block_range(i);
                UniverseIndex::from_raw(rng.gen_range(lo..=hi))
            }
            Distribution::Labeled(l) => {
                let w = l.base.sample(rng).get();
                l.universe
                    .pair_index(w, l.labels.query(w))
                    .expect("labeled universe too small for sampled coordinate")
            }
        }
    }

    /// Draws `n` i.i.d. points.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Vec<UniverseIndex> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Explicit atoms for finite-support distributions.
    pub fn atoms(&self) -> Option<&[(UniverseIndex, f64)]> {
        match self {
            Distribution::Finite(f) => Some(f.atoms()),
            _ => None,
        }
    }

    /// The support is a finite set (explicit atoms or truncated blocks).
    pub fn has_finite_support(&self) -> bool {
        match self {
            Distribution::Finite(_) | Distribution::Block(_) => true,
            Distribution::Geometric(_) => false,
            Distribution::Mixture(m) => m.components.iter().all(|(_, d)| d.has_finite_support()),
            Distribution::Labeled(l) => l.base.has_finite_support(),
        }
    }

    /// `P[X > w]` for distributions over `N`, where an exact formula exists.
    pub fn tail_mass(&self, w: u64) -> Option<f64> {
        match self {
            Distribution::Finite(f) => {
                Some(neumaier_sum(f.atoms.iter().filter(|(k, _)| k.get() > w).map(|a| a.1)))
            }
            Distribution::Geometric(g) => Some(0.5f64.powf(g.count_le(w) as f64)),
            Distribution::Mixture(m) => {
                let mut acc = Vec::with_capacity(m.components.len());
                for (weight, d) in &m.components {
                    acc.push(weight * d.tail_mass(w)?);
                }
                Some(neumaier_sum(acc))
            }
            Distribution::Block(b) => Some(b.tail_mass(w)),
            Distribution::Labeled(_) => None,
        }
    }

    /// Support as a union of eventually periodic sets, when it has that shape.
    fn support_shape(&self) -> Option<Vec<PeriodicSet>> {
        match self {
            Distribution::Finite(f) => {
                let mut head: Vec<u64> = f.atoms.iter().map(|a| a.0.get()).collect();
                head.sort_unstable();
                // an empty progression: first beyond every atom, never reached
                Some(vec![PeriodicSet { head, first: u64::MAX, stride: 1 }])
            }
            Distribution::Geometric(g) => Some(vec![PeriodicSet { head: vec![], first: g.first, stride: g.stride }]),
            Distribution::Mixture(m) => {
                let mut parts = Vec::new();
                for (_, d) in &m.components {
                    parts.extend(d.support_shape()?);
                }
                Some(parts)
            }
            Distribution::Block(_) | Distribution::Labeled(_) => None,
        }
    }

    /// Decides `L ⊆ supp(D)` when that can be certified: always `false` for
    /// finite supports (languages are infinite), exact for periodic supports,
    /// `None` otherwise.
    pub fn certify_contains(&self, language: &Language) -> Option<bool> {
        if self.has_finite_support() {
            return Some(false);
        }
        let parts = self.support_shape()?;
        let lang = language.periodic_form();
        // Past every head element and every progression start, membership in
        // each set is periodic in k with period P = lcm of the strides, so
        // checking L's members up to M + P decides containment.
        let finite_starts = parts.iter().map(|p| p.first).filter(|f| *f != u64::MAX);
        let m = lang
            .head
            .iter()
            .chain(parts.iter().flat_map(|p| p.head.iter()))
            .copied()
            .chain(finite_starts)
            .chain(std::iter::once(lang.first))
            .max()
            .unwrap_or(1);
        let period = parts
            .iter()
            .filter(|p| p.first != u64::MAX)
            .fold(lang.stride, |acc, p| acc.lcm(&p.stride));
        let limit = m.checked_add(period)?;
        if language.count_le(limit) > 10_000_000 {
            return None;
        }
        let inside = |k: u64| parts.iter().any(|p| p.contains(k));
        Some(
            language
                .members()
                .take_while(|k| k.get() <= limit)
                .all(|k| inside(k.get())),
        )
    }

    pub fn as_labeled(&self) -> Option<&Labeled> {
        match self {
            Distribution::Labeled(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_block(&self) -> Option<&BlockBase> {
        match self {
            Distribution::Block(b) => Some(b),
            _ => None,
        }
    }
}

/// Named distribution constructors as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    Finite { atoms: Vec<(u64, f64)> },
    Geometric {},
    GeometricProgression { first: u64, stride: u64 },
    Mixture { components: Vec<(f64, DistributionSpec)> },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<Distribution> {
        match self {
            DistributionSpec::Finite { atoms } => {
                let atoms = atoms
                    .iter()
                    .map(|(k, p)| UniverseIndex::new(*k).map(|k| (k, *p)))
                    .collect::<Result<Vec<_>>>()?;
                finite_support(atoms)
            }
            DistributionSpec::Geometric {} => Ok(geometric_base()),
            DistributionSpec::GeometricProgression { first, stride } => geometric_progression(*first, *stride),
            DistributionSpec::Mixture { components } => {
                let built = components
                    .iter()
                    .map(|(w, spec)| spec.build().map(|d| (*w, d)))
                    .collect::<Result<Vec<_>>>()?;
                mixture(built)
            }
        }
    }
}

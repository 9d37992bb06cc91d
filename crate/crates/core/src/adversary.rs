//! Instances behind each lower and upper bound: collection, distribution (or
//! a family indexed by a random label sequence), the analytic facts the
//! evaluators rely on, and the theoretical bound curve.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{
    block_base_distribution, finite_support, geometric_base, geometric_progression, labeled_distribution,
    lemma512_construct, mixture, Distribution, LabelSource, Lemma512Artifacts, RateFn,
};
use crate::error::{Error, Result};
use crate::eval::true_error;
use crate::generate::{analytic_gen_constants, witness_index, GenConstants, WitnessIndex};
use crate::languages::{
    finite_intersection_collection, prefix_labeled_collection, residue_collection, signature_collection,
    universe_and_columns, Collection, IntersectionLayout, Language, LanguageKind,
};
use crate::universe::{UniverseIndex, UniverseSpec};

/// Private atoms used when spreading leftover mass over a language's tail.
pub const DEFAULT_TAIL_ATOMS: usize = 12;
/// Window for brute-force checks of analytic facts.
pub const BRUTE_FORCE_WINDOW: usize = 64;
/// Scan limit for witness searches on built-in instances.
pub const WITNESS_SCAN_LIMIT: u64 = 1 << 20;

/// Labeled distributions `D_z` for a random `z`, one per label seed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFamily {
    pub base: Arc<Distribution>,
    pub universe: UniverseSpec,
    pub label_count: u64,
    pub label_offset: i64,
}

impl LabelFamily {
    pub fn labels(&self, seed: u64) -> LabelSource {
        LabelSource::uniform(seed, self.label_count, self.label_offset)
    }

    pub fn realize(&self, seed: u64) -> Distribution {
        labeled_distribution(self.base.clone(), self.labels(seed), self.universe.clone())
            .expect("family labels fit the universe by construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Fixed(Arc<Distribution>),
    Family(LabelFamily),
}

impl Source {
    pub fn fixed(&self) -> Option<&Distribution> {
        match self {
            Source::Fixed(d) => Some(d),
            Source::Family(_) => None,
        }
    }
}

/// Theoretical curve attached to an instance, clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    None,
    /// `base^(n + shift)`.
    Power { base: f64, shift: i32 },
    /// `scale * exp(-rate * n)`.
    ExpDecay { rate: f64, scale: f64 },
    Constant(f64),
    /// `R(n) / divisor`.
    RateFraction { rate: RateFn, divisor: f64 },
    GenUpper(GenConstants),
}

impl Bound {
    pub fn eval(&self, n: u64) -> Option<f64> {
        let v = match self {
            Bound::None => return None,
            Bound::Power { base, shift } => base.powf(n as f64 + *shift as f64),
            Bound::ExpDecay { rate, scale } => scale * (-rate * n as f64).exp(),
            Bound::Constant(c) => *c,
            Bound::RateFraction { rate, divisor } => rate.eval(n) / divisor,
            Bound::GenUpper(k) => k.bound(n),
        };
        Some(v.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analytic {
    /// `inf_{L ∈ C} P_D[x ∉ L]`, when the instance defines it.
    pub inf_error: Option<f64>,
    /// 1-based index attaining the infimum; `None` when not attained.
    pub best_index: Option<usize>,
    pub i_cd: Option<WitnessIndex>,
    pub gen: Option<GenConstants>,
    /// Sample sizes where the bound is claimed (slow-rate checkpoints).
    pub checkpoints: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub collection: Collection,
    pub source: Source,
    pub analytic: Analytic,
    pub bound: Bound,
}

impl Instance {
    pub fn universe(&self) -> &UniverseSpec {
        self.collection.universe()
    }

    /// Languages the generator loops over.
    pub fn gen_window(&self) -> Result<usize> {
        self.collection
            .len()
            .ok_or_else(|| Error::Config(format!("{} is countable; generation needs a finite collection", self.name)))
    }

    /// Recomputes the analytic infimum over the first
    /// [`BRUTE_FORCE_WINDOW`] languages and compares.
    pub fn verify(&self) -> Result<()> {
        let (Source::Fixed(d), Some(inf)) = (&self.source, self.analytic.inf_error) else {
            return Ok(());
        };
        let (brute, arg) = brute_force_inf(&self.collection, d)?;
        if (brute - inf).abs() > 1e-9 {
            return Err(Error::AnalyticsMismatch(format!("{}: inf {inf} but brute force gives {brute}", self.name)));
        }
        if let Some(best) = self.analytic.best_index {
            let err = true_error(&self.collection.language(best).unwrap(), d)?;
            if (err - inf).abs() > 1e-9 {
                return Err(Error::AnalyticsMismatch(format!(
                    "{}: L_{best} has error {err}, not the infimum (brute force argmin L_{arg})",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// `(min error, first argmin)` over the first [`BRUTE_FORCE_WINDOW`] languages.
pub fn brute_force_inf(collection: &Collection, dist: &Distribution) -> Result<(f64, usize)> {
    let mut best = (f64::INFINITY, 0);
    for (i, l) in collection.window(BRUTE_FORCE_WINDOW).iter().enumerate() {
        let e = true_error(l, dist)?;
        if e < best.0 {
            best = (e, i + 1);
        }
    }
    Ok(best)
}

/// Which member of a `(D_0, D_1)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    D0,
    D1,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::D0 => 0,
            Side::D1 => 1,
        }
    }
}

fn idx(k: u64) -> UniverseIndex {
    UniverseIndex::new(k).expect("built-in indices are positive")
}

/// Signature instances: `D_0 = {s_0: 3/4, s_1: 1/4}` and its mirror `D_1`.
pub fn build_id_lower(distractors: usize) -> Result<[Instance; 2]> {
    let collection = signature_collection(distractors);
    let build = |side: Side| -> Result<Instance> {
        let (p0, p1) = match side {
            Side::D0 => (0.75, 0.25),
            Side::D1 => (0.25, 0.75),
        };
        let d = finite_support(vec![(idx(1), p0), (idx(2), p1)])?;
        let inst = Instance {
            name: format!("signature(d={distractors}, {side:?})"),
            collection: collection.clone(),
            source: Source::Fixed(Arc::new(d)),
            analytic: Analytic {
                inf_error: Some(0.25),
                best_index: Some(side.index() + 1),
                i_cd: None,
                gen: None,
                checkpoints: vec![],
            },
            bound: Bound::Power { base: 0.25, shift: 2 },
        };
        inst.verify()?;
        Ok(inst)
    };
    Ok([build(Side::D0)?, build(Side::D1)?])
}

/// Slow-rate family over `N x {-1,0,1}` with `z ∈ {0,1}^N` uniform.
pub fn build_slow_rate(rate: RateFn, depth: usize) -> Result<(Instance, Lemma512Artifacts)> {
    let art = lemma512_construct(rate, depth)?;
    let base = Arc::new(block_base_distribution(&art)?);
    let universe = UniverseSpec::signed_ternary();
    let family = LabelFamily { base: base.clone(), universe: universe.clone(), label_count: 2, label_offset: 0 };
    // 2 sigma_depth must stay encodable as a pair index
    universe.pair_index(2 * art.sigma[depth], 1)?;
    certify_unattained(&family, &art)?;
    let inst = Instance {
        name: format!("slow-rate({rate}, depth={depth})"),
        collection: prefix_labeled_collection(),
        source: Source::Family(family),
        analytic: Analytic {
            inf_error: Some(0.0),
            best_index: None,
            i_cd: None,
            gen: None,
            checkpoints: art.n.clone(),
        },
        bound: Bound::RateFraction { rate, divisor: 8.0 },
    };
    Ok((inst, art))
}

/// The prefixes `z_{1:2 sigma_i}` strictly improve with `i`, so no language
/// attains the infimum below the truncation depth.
fn certify_unattained(family: &LabelFamily, art: &Lemma512Artifacts) -> Result<()> {
    let d = family.realize(0);
    let tails: Vec<f64> = (1..=art.depth)
        .map(|i| family.base.tail_mass(2 * art.sigma[i]).unwrap())
        .collect();
    for i in 1..art.depth {
        if !(tails[i] < tails[i - 1] && tails[i - 1] > 0.0) {
            return Err(Error::AnalyticsMismatch(format!("prefix {i} does not improve on its predecessor")));
        }
    }
    // spot-check the tail formula against the generic evaluator on block 1
    let z = family.labels(0);
    let len = 2 * art.sigma[1];
    let prefix: Vec<u8> = (1..=len).map(|w| z.query(w) as u8).collect();
    let lang = Language::new(0, LanguageKind::PrefixLabeled { prefix }, "z prefix");
    let generic = true_error(&lang, &d)?;
    if (generic - tails[0]).abs() > 1e-12 {
        return Err(Error::AnalyticsMismatch(format!("prefix error {generic} vs tail {}", tails[0])));
    }
    Ok(())
}

/// `m = ceil(1/epsilon)`, guarding against `1/epsilon` landing a hair above
/// an integer.
pub fn nfl_label_count(epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let inv = 1.0 / epsilon;
    let r = inv.round();
    Ok(if (inv - r).abs() < 1e-9 { r as u64 } else { inv.ceil() as u64 })
}

/// No-free-lunch family: `[U, columns...]` over `N x {1..m}`, geometric base.
pub fn build_gen_nfl(epsilon: f64) -> Result<Instance> {
    let m = nfl_label_count(epsilon)?;
    let collection = universe_and_columns(m, 1);
    let family = LabelFamily {
        base: Arc::new(geometric_base()),
        universe: collection.universe().clone(),
        label_count: m,
        label_offset: 1,
    };
    Ok(Instance {
        name: format!("nfl(epsilon={epsilon}, m={m})"),
        collection,
        source: Source::Family(family),
        analytic: Analytic { inf_error: None, best_index: None, i_cd: None, gen: None, checkpoints: vec![] },
        bound: Bound::Constant(1.0 - epsilon),
    })
}

/// `mass` over `count` atoms, halving, the last absorbing the remainder.
fn halving(mass: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut left = mass;
    for j in 0..count {
        if j + 1 == count {
            out.push(left);
        } else {
            let p = mass * 0.5f64.powi(j as i32 + 1);
            out.push(p);
            left -= p;
        }
    }
    out
}

/// Distributions for the generation lower bound over two languages sharing
/// `m` strings.
pub fn build_gen_lower(m: u64, tail_atoms: usize) -> Result<[Instance; 2]> {
    if tail_atoms == 0 {
        return Err(Error::Config("tail_atoms must be >= 1".into()));
    }
    let collection = finite_intersection_collection(m);
    let layout = IntersectionLayout { m };
    let build = |side: Side| -> Result<Instance> {
        let mut atoms = Vec::new();
        let tail_mass = if m == 0 {
            atoms.push((layout.outside(), 0.5));
            0.5
        } else {
            let eps = 1.0 / (16.0 * m as f64);
            atoms.extend(layout.common().map(|k| (k, (1.0 - eps) / m as f64)));
            eps
        };
        let first = layout.tail_first(side.index());
        for (j, p) in halving(tail_mass, tail_atoms).into_iter().enumerate() {
            atoms.push((idx(first + 2 * j as u64), p));
        }
        let d = finite_support(atoms)?;
        let languages = collection.window(2);
        let i_cd = witness_index(&languages, &d, WITNESS_SCAN_LIMIT);
        let (inf, best) = brute_force_inf(&collection, &d)?;
        let inst = Instance {
            name: format!("gen-lower(m={m}, {side:?})"),
            collection: collection.clone(),
            source: Source::Fixed(Arc::new(d)),
            analytic: Analytic { inf_error: Some(inf), best_index: Some(best), i_cd: Some(i_cd), gen: None, checkpoints: vec![] },
            bound: if m == 0 {
                Bound::ExpDecay { rate: 2.0, scale: 1.0 }
            } else {
                Bound::ExpDecay { rate: 2.0, scale: 0.25 }
            },
        };
        inst.verify()?;
        Ok(inst)
    };
    Ok([build(Side::D0)?, build(Side::D1)?])
}

/// Evens and odds over `N` with `D` = half on `{1, 3}`, half geometric over
/// the evens: the evens lie inside `supp(D)`, the odds are refuted at 5.
pub fn build_gen_upper() -> Result<Instance> {
    let collection = residue_collection(2);
    let d = mixture(vec![
        (0.5, finite_support(vec![(idx(1), 0.5), (idx(3), 0.5)])?),
        (0.5, geometric_progression(2, 2)?),
    ])?;
    custom_instance("gen-upper".into(), collection, d, Some(1))
}

/// Instance from an arbitrary finite collection and distribution. Facts are
/// computed by brute force; `designated` names the language assumed inside
/// `supp(D)` for the generation constants.
pub fn custom_instance(name: String, collection: Collection, d: Distribution, designated: Option<usize>) -> Result<Instance> {
    let languages = collection.window(BRUTE_FORCE_WINDOW);
    let i_cd = witness_index(&languages, &d, WITNESS_SCAN_LIMIT);
    let gen = designated
        .map(|m| analytic_gen_constants(&languages, &d, m, WITNESS_SCAN_LIMIT))
        .transpose()?;
    let (inf_error, best_index) = match brute_force_inf(&collection, &d) {
        Ok((inf, best)) => (Some(inf), Some(best)),
        Err(Error::NoTailFormula(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let bound = gen.clone().map_or(Bound::None, Bound::GenUpper);
    Ok(Instance {
        name,
        collection,
        source: Source::Fixed(Arc::new(d)),
        analytic: Analytic { inf_error, best_index, i_cd: Some(i_cd), gen, checkpoints: vec![] },
        bound,
    })
}

/// `(1 - 2^-i)^n / i`.
pub fn reference_value(i: u64, n: u64) -> f64 {
    (n as f64 * (-(0.5f64.powi(i as i32))).ln_1p()).exp() / i as f64
}

/// Maximiser of [`reference_value`] over `i`, scanning
/// `1..=4 ceil(log2((n ln 2)^2 + 1))`.
pub fn best_reference_index(n: u64) -> (u64, f64) {
    assert!(n >= 1);
    let x = n as f64 * std::f64::consts::LN_2;
    let limit = (4.0 * (x * x + 1.0).log2().ceil()).max(1.0) as u64;
    let mut best = (1, reference_value(1, n));
    for i in 2..=limit {
        let v = reference_value(i, n);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// `[log2(n ln 2), log2((n ln 2)^2 + 1)]`.
pub fn reference_interval(n: u64) -> (f64, f64) {
    let x = n as f64 * std::f64::consts::LN_2;
    (x.log2(), (x * x + 1.0).log2())
}

/// Config-facing instance names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSpec {
    Signature {
        #[serde(default = "default_distractors")]
        distractors: usize,
        #[serde(default = "default_side")]
        side: Side,
    },
    SlowRate {
        rate: RateFn,
        depth: usize,
    },
    Nfl {
        epsilon: f64,
    },
    GenLower {
        m: u64,
        #[serde(default = "default_side")]
        side: Side,
        #[serde(default = "default_tail_atoms")]
        tail_atoms: usize,
    },
    GenUpper {},
    Custom {
        collection: crate::languages::CollectionSpec,
        distribution: crate::distributions::DistributionSpec,
        #[serde(default)]
        designated: Option<usize>,
    },
}

fn default_distractors() -> usize {
    2
}

fn default_side() -> Side {
    Side::D0
}

fn default_tail_atoms() -> usize {
    DEFAULT_TAIL_ATOMS
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Instance> {
        match self {
            InstanceSpec::Signature { distractors, side } => {
                Ok(pick(build_id_lower(*distractors)?, *side))
            }
            InstanceSpec::SlowRate { rate, depth } => build_slow_rate(*rate, *depth).map(|(i, _)| i),
            InstanceSpec::Nfl { epsilon } => build_gen_nfl(*epsilon),
            InstanceSpec::GenLower { m, side, tail_atoms } => {
                Ok(pick(build_gen_lower(*m, *tail_atoms)?, *side))
            }
            InstanceSpec::GenUpper {} => build_gen_upper(),
            InstanceSpec::Custom { collection, distribution, designated } => {
                let c = collection.build()?;
                if !c.is_finite() {
                    return Err(Error::Config("custom instances need a finite collection".into()));
                }
                custom_instance("custom".into(), c, distribution.build()?, *designated)
            }
        }
    }
}

fn pick(pair: [Instance; 2], side: Side) -> Instance {
    let [d0, d1] = pair;
    match side {
        Side::D0 => d0,
        Side::D1 => d1,
    }
}

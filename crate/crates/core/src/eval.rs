//! Exact and Monte Carlo evaluation of identification and generation error.
//!
//! Exact identification enumerates frequency compositions with multinomial
//! weights; exact generation enumerates distinct-sets with inclusion-exclusion
//! in integer arithmetic. Monte Carlo runs trials in parallel, each with its
//! own ChaCha stream derived from `(seed, n, trial)`, and reduces them in
//! trial order so reruns are bit-identical.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{Instance, Source};
use crate::distributions::{neumaier_sum, Distribution};
use crate::error::{Error, Result};
use crate::generate::{generate, generate_from, witness_index, WitnessIndex};
use crate::identify::{IdAlgorithm, Sample};
use crate::languages::{Language, LanguageKind};
use crate::universe::UniverseIndex;

/// Largest composition count exact identification will enumerate.
pub const COMPOSITION_BUDGET: u128 = 1_000_000;
/// Largest number of window atoms exact generation will enumerate.
pub const MAX_GEN_ATOMS: usize = 20;
const EXCESS_TOL: f64 = 1e-12;
const DRIFT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    IdErr,
    GenErr,
    SelectProb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: u64,
    pub metric: Metric,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: Option<f64>,
    pub method: Method,
    pub trials: u64,
}

/// `P_D[x ∉ L]` where it has a closed form: finite supports, and labeled
/// distributions whose labels never hit `-1` against prefix languages.
pub fn true_error(language: &Language, dist: &Distribution) -> Result<f64> {
    if let Some(atoms) = dist.atoms() {
        return Ok(neumaier_sum(atoms.iter().filter(|(k, _)| !language.member(*k)).map(|a| a.1)));
    }
    let no_formula = || Error::NoTailFormula(format!("{} against this distribution", language.description));
    let labeled = dist.as_labeled().ok_or_else(no_formula)?;
    let base = labeled.base();
    if let Some(atoms) = base.atoms() {
        let universe = labeled.universe();
        let mut missed = Vec::new();
        for (w, p) in atoms {
            let k = universe.pair_index(w.get(), labeled.labels().query(w.get()))?;
            if !language.member(k) {
                missed.push(*p);
            }
        }
        return Ok(neumaier_sum(missed));
    }
    let (LanguageKind::PrefixLabeled { prefix }, Some(tail)) = (&language.kind, base.tail_mass(prefix_len(language)))
    else {
        return Err(no_formula());
    };
    if labeled.labels().range().contains(&-1) || *labeled.universe() != crate::universe::UniverseSpec::signed_ternary() {
        return Err(no_formula());
    }
    let mut terms: Vec<f64> = prefix
        .iter()
        .enumerate()
        .filter(|(j, bit)| labeled.labels().query(*j as u64 + 1) != i64::from(**bit))
        .map(|(j, _)| base.pmf(UniverseIndex::new(j as u64 + 1).unwrap()))
        .collect();
    terms.push(tail);
    Ok(neumaier_sum(terms))
}

fn prefix_len(language: &Language) -> u64 {
    language.prefix().map_or(0, |p| p.len() as u64)
}

/// `true_error - inf_error`, clamped at 0 within tolerance.
pub fn excess_error(language: &Language, dist: &Distribution, inf_error: f64) -> Result<f64> {
    let e = true_error(language, dist)? - inf_error;
    if e < -EXCESS_TOL {
        return Err(Error::AnalyticsMismatch(format!(
            "{} has error below the stated infimum by {}",
            language.description, -e
        )));
    }
    Ok(e.max(0.0))
}

/// Exact `IdErr(n)` and the probability of selecting the best index.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactId {
    pub id_err: RatePoint,
    pub select_prob: Option<RatePoint>,
}

/// `C(n + a - 1, a - 1)`, or `None` once it passes `cap`.
fn compositions_count(n: u64, a: u64, cap: u128) -> Option<u128> {
    let mut c: u128 = 1;
    for j in 1..a as u128 {
        c = c * (n as u128 + j) / j;
        if c > cap {
            return None;
        }
    }
    Some(c)
}

/// `ln k!` for `k = 0..=n`, accumulated with compensation.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    table.push(0.0);
    for k in 1..=n {
        let x = (k as f64).ln();
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
        table.push(sum + comp);
    }
    table
}

/// Visits every composition of `n` into `parts` nonnegative parts.
fn for_each_composition(n: u64, parts: usize, mut visit: impl FnMut(&[u64]) -> Result<()>) -> Result<()> {
    let mut c = vec![0u64; parts];
    c[parts - 1] = n;
    loop {
        visit(&c)?;
        // next composition in colex order: move one unit leftwards
        let Some(j) = (0..parts).rev().find(|&j| j > 0 && c[j] > 0) else {
            return Ok(());
        };
        let moved = c[j];
        c[j] = 0;
        c[j - 1] += 1;
        c[parts - 1] = moved - 1;
    }
}

pub fn exact_id_err(alg: &IdAlgorithm, instance: &Instance, n: u64) -> Result<ExactId> {
    if n == 0 {
        return Err(Error::Config("n must be >= 1".into()));
    }
    let dist = instance
        .source
        .fixed()
        .ok_or_else(|| Error::BudgetExceeded("random label family".into()))?;
    let atoms = dist
        .atoms()
        .ok_or_else(|| Error::BudgetExceeded("distribution has infinite support".into()))?;
    let inf = instance
        .analytic
        .inf_error
        .ok_or_else(|| Error::AnalyticsMismatch(format!("{} has no infimum", instance.name)))?;
    if compositions_count(n, atoms.len() as u64, COMPOSITION_BUDGET).is_none() {
        return Err(Error::BudgetExceeded(format!(
            "C(n + a - 1, a - 1) > {COMPOSITION_BUDGET} for n = {n}, a = {}",
            atoms.len()
        )));
    }
    let lnf = ln_factorials(n);
    let lnp: Vec<f64> = atoms.iter().map(|a| a.1.ln()).collect();
    let mut excess: HashMap<usize, f64> = HashMap::new();
    let (mut weights, mut losses, mut hits) = (Vec::new(), Vec::new(), Vec::new());
    for_each_composition(n, atoms.len(), |c| {
        let mut lw = lnf[n as usize];
        for (ci, lp) in c.iter().zip(&lnp) {
            if *ci > 0 {
                lw += *ci as f64 * lp - lnf[*ci as usize];
            }
        }
        let w = lw.exp();
        let sample = Sample::from_counts(atoms.iter().zip(c).filter(|(_, ci)| **ci > 0).map(|((k, _), ci)| (*k, *ci)))?;
        let chosen = alg.identify(&instance.collection, &sample);
        let e = match excess.get(&chosen) {
            Some(e) => *e,
            None => {
                let l = instance
                    .collection
                    .language(chosen)
                    .ok_or_else(|| Error::Config(format!("algorithm chose L_{chosen}, outside the collection")))?;
                let e = excess_error(&l, dist, inf)?;
                excess.insert(chosen, e);
                e
            }
        };
        weights.push(w);
        losses.push(w * e);
        if Some(chosen) == instance.analytic.best_index {
            hits.push(w);
        }
        Ok(())
    })?;
    let total = neumaier_sum(weights);
    if (total - 1.0).abs() > DRIFT_TOL {
        return Err(Error::AnalyticsMismatch(format!("multinomial weights sum to {total}")));
    }
    let point = |metric, estimate: f64, bound| RatePoint {
        n,
        metric,
        estimate: estimate.clamp(0.0, 1.0),
        std_error: 0.0,
        bound,
        method: Method::Exact,
        trials: 0,
    };
    Ok(ExactId {
        id_err: point(Metric::IdErr, neumaier_sum(losses) / total, instance.bound.eval(n)),
        select_prob: instance
            .analytic
            .best_index
            .map(|_| point(Metric::SelectProb, neumaier_sum(hits) / total, None)),
    })
}

/// `value = mantissa * 2^exp` with a nonnegative integer mantissa.
fn dyadic(value: f64) -> (u64, i32) {
    let (mantissa, exp, sign) = Float::integer_decode(value);
    debug_assert!(sign > 0 || mantissa == 0);
    (mantissa, exp as i32)
}

/// Atoms of `supp(D)` inside the window `1..=t` that decides generation,
/// with masses scaled to integers over a common denominator.
struct GenWindow {
    atoms: Vec<UniverseIndex>,
    masses: Vec<BigInt>,
    rest: BigInt,
    denominator: BigInt,
}

/// Outside the window `W = 1..=T`, `T` the largest first witness of a
/// language not contained in `supp(D)`, the outcome cannot change: a
/// non-contained language's pointer never passes its first witness, which
/// is never sampled, so which language wins and whether its output lies in
/// the support depends on `S ∩ W` alone.
fn gen_window(instance: &Instance, dist: &Distribution) -> Result<GenWindow> {
    let languages = instance.collection.window(instance.gen_window()?);
    let t = match witness_index(&languages, dist, crate::adversary::WITNESS_SCAN_LIMIT) {
        WitnessIndex::Finite(t) => t,
        WitnessIndex::Unknown => return Err(Error::BudgetExceeded("i(C,D) unknown within the scan limit".into())),
    };
    let mut atoms = Vec::new();
    for k in 1..=t {
        let k = UniverseIndex::new(k)?;
        if dist.in_support(k) {
            atoms.push(k);
            if atoms.len() > MAX_GEN_ATOMS {
                return Err(Error::BudgetExceeded(format!("more than {MAX_GEN_ATOMS} support atoms in the window")));
            }
        }
    }
    let parts: Vec<(u64, i32)> = atoms.iter().map(|k| dyadic(dist.pmf(*k))).collect();
    let everything: Option<Vec<(u64, i32)>> = dist.atoms().map(|a| a.iter().map(|(_, p)| dyadic(*p)).collect());
    let min_exp = parts
        .iter()
        .chain(everything.iter().flatten())
        .map(|p| p.1)
        .chain(std::iter::once(0))
        .min()
        .unwrap();
    let scale = |(m, e): (u64, i32)| BigInt::from(m) << (e - min_exp) as usize;
    let masses: Vec<BigInt> = parts.iter().copied().map(scale).collect();
    let denominator = match &everything {
        Some(all) => all.iter().copied().map(scale).sum(),
        None => BigInt::from(1u8) << (-min_exp) as usize,
    };
    let rest = &denominator - masses.iter().sum::<BigInt>();
    if rest < BigInt::zero() {
        return Err(Error::AnalyticsMismatch("window atoms carry more than total mass".into()));
    }
    Ok(GenWindow { atoms, masses, rest, denominator })
}

/// Exact `GenErr(n)` by inclusion-exclusion over distinct-sets of the window.
pub fn exact_gen_err(instance: &Instance, n: u64) -> Result<RatePoint> {
    let dist = instance
        .source
        .fixed()
        .ok_or_else(|| Error::BudgetExceeded("random label family".into()))?;
    let w = gen_window(instance, dist)?;
    let a = w.atoms.len();
    let size = 1usize << a;
    let exponent = u32::try_from(n).map_err(|_| Error::BudgetExceeded(format!("n = {n}")))?;
    // g(B) = (mass(B) + rest)^n; Möbius inversion gives P[S ∩ W = A]
    let mut mass = vec![w.rest.clone(); size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        mass[mask] = &mass[mask & (mask - 1)] + &w.masses[low];
    }
    let mut prob: Vec<BigInt> = mass.into_iter().map(|m| num_traits::pow(m, exponent as usize)).collect();
    for bit in 0..a {
        for mask in 0..size {
            if mask >> bit & 1 == 1 {
                let lower = prob[mask ^ (1 << bit)].clone();
                prob[mask] -= lower;
            }
        }
    }
    let languages = instance.collection.window(instance.gen_window()?);
    let mut error = BigInt::zero();
    let mut total = BigInt::zero();
    for (mask, p) in prob.iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        total += p;
        let seen = |k: UniverseIndex| w.atoms.iter().enumerate().any(|(i, a)| *a == k && mask >> i & 1 == 1);
        let out = generate_from(&languages, seen);
        if !dist.in_support(out.output) {
            error += p;
        }
    }
    let denom = num_traits::pow(w.denominator.clone(), exponent as usize);
    if total != denom {
        return Err(Error::AnalyticsMismatch("distinct-set probabilities do not sum to one".into()));
    }
    let estimate = BigRational::new(error, denom)
        .to_f64()
        .ok_or_else(|| Error::AnalyticsMismatch("GenErr not representable".into()))?;
    Ok(RatePoint {
        n,
        metric: Metric::GenErr,
        estimate: estimate.clamp(0.0, 1.0),
        std_error: 0.0,
        bound: instance.bound.eval(n),
        method: Method::Exact,
        trials: 0,
    })
}

/// What a Monte Carlo trial measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Identify(IdAlgorithm),
    Generate,
}

/// Per-trial generator: key `(seed, n)`, stream `trial`.
pub fn trial_rng(seed: u64, n: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&n.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

fn trial_loss(task: &Task, instance: &Instance, n: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let realized;
    let dist: &Distribution = match &instance.source {
        Source::Fixed(d) => d,
        Source::Family(f) => {
            realized = f.realize(rng.gen());
            &realized
        }
    };
    let sample = Sample::new(dist.sample_n(n, rng))?;
    match task {
        Task::Identify(alg) => {
            let inf = instance
                .analytic
                .inf_error
                .ok_or_else(|| Error::AnalyticsMismatch(format!("{} has no infimum", instance.name)))?;
            let chosen = alg.identify(&instance.collection, &sample);
            let l = instance
                .collection
                .language(chosen)
                .ok_or_else(|| Error::Config(format!("algorithm chose L_{chosen}, outside the collection")))?;
            excess_error(&l, dist, inf)
        }
        Task::Generate => {
            let out = generate(&instance.collection, &sample, instance.gen_window()?);
            let valid = dist.in_support(out.output) && !sample.contains(out.output);
            Ok(if valid { 0.0 } else { 1.0 })
        }
    }
}

/// Monte Carlo estimate at each `n`, `std_error = sd / sqrt(trials)`.
pub fn mc_rate(task: &Task, instance: &Instance, n_grid: &[u64], trials: u64, seed: u64) -> Result<Vec<RatePoint>> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    if let Task::Generate = task {
        instance.gen_window()?;
    }
    n_grid
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Config("n must be >= 1".into()));
            }
            let losses: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| trial_loss(task, instance, n, &mut trial_rng(seed, n, t)))
                .collect::<Result<_>>()?;
            let mean = neumaier_sum(losses.iter().copied()) / trials as f64;
            let std_error = if trials > 1 {
                let ss = neumaier_sum(losses.iter().map(|x| (x - mean) * (x - mean)));
                (ss / (trials - 1) as f64).sqrt() / (trials as f64).sqrt()
            } else {
                0.0
            };
            Ok(RatePoint {
                n,
                metric: match task {
                    Task::Identify(_) => Metric::IdErr,
                    Task::Generate => Metric::GenErr,
                },
                estimate: mean.clamp(0.0, 1.0),
                std_error,
                bound: instance.bound.eval(n),
                method: Method::Mc,
                trials,
            })
        })
        .collect()
}

pub const CSV_HEADER: &str = "n,metric,estimate,std_error,bound,method,trials";

pub fn write_csv(points: &[RatePoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        let metric = match p.metric {
            Metric::IdErr => "IdErr",
            Metric::GenErr => "GenErr",
            Metric::SelectProb => "SelectProb",
        };
        let method = match p.method {
            Method::Exact => "exact",
            Method::Mc => "mc",
        };
        let bound = p.bound.map(|b| format!("{b:e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{metric},{:e},{:e},{bound},{method},{}",
            p.n, p.estimate, p.std_error, p.trials
        );
    }
    out
}

/// JSON document with the points and an echo of the configuration.
pub fn write_json(points: &[RatePoint], config: &serde_json::Value) -> Result<String> {
    let doc = serde_json::json!({ "config": config, "points": points });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{build_gen_lower, build_gen_upper, build_id_lower, build_slow_rate, DEFAULT_TAIL_ATOMS};
    use crate::distributions::{finite_support, RateFn};
    use crate::identify::WindowFn;
    use crate::languages::residue_collection;
    use proptest::prelude::*;

    fn idx(k: u64) -> UniverseIndex {
        UniverseIndex::new(k).unwrap()
    }

    #[test]
    fn true_error_examples() {
        let [d0, _] = build_id_lower(1).unwrap();
        let d = d0.source.fixed().unwrap();
        assert_eq!(true_error(&d0.collection.language(1).unwrap(), d).unwrap(), 0.25);
        assert_eq!(true_error(&d0.collection.language(3).unwrap(), d).unwrap(), 1.0);
        let evens = residue_collection(2).language(1).unwrap();
        let on_evens = finite_support(vec![(idx(2), 0.5), (idx(4), 0.5)]).unwrap();
        assert_eq!(true_error(&evens, &on_evens).unwrap(), 0.0);
        let geo = crate::distributions::geometric_base();
        assert!(matches!(true_error(&evens, &geo), Err(Error::NoTailFormula(_))));
    }

    #[test]
    fn slow_rate_prefix_error_is_a_tail_sum() {
        let (inst, art) = build_slow_rate(RateFn::inverse_sqrt(), 4).unwrap();
        let Source::Family(fam) = &inst.source else { panic!() };
        let d = fam.realize(11);
        let z = fam.labels(11);
        let len = 2 * art.sigma[2];
        let prefix: Vec<u8> = (1..=len).map(|w| z.query(w) as u8).collect();
        let l = Language::new(0, LanguageKind::PrefixLabeled { prefix }, "z prefix");
        let expected = neumaier_sum(art.p[2..].iter().copied());
        assert!((true_error(&l, &d).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn excess_error_checks() {
        let [d0, _] = build_id_lower(1).unwrap();
        let d = d0.source.fixed().unwrap();
        assert_eq!(excess_error(&d0.collection.language(1).unwrap(), d, 0.25).unwrap(), 0.0);
        assert_eq!(excess_error(&d0.collection.language(2).unwrap(), d, 0.25).unwrap(), 0.5);
        assert!(excess_error(&d0.collection.language(3).unwrap(), d, 0.25).unwrap() >= 0.5);
        assert!(matches!(
            excess_error(&d0.collection.language(1).unwrap(), d, 0.5),
            Err(Error::AnalyticsMismatch(_))
        ));
    }

    #[test]
    fn constant_algorithm_exact() {
        let [d0, d1] = build_id_lower(0).unwrap();
        let alg = IdAlgorithm::Constant { index: 1 };
        assert_eq!(exact_id_err(&alg, &d0, 7).unwrap().id_err.estimate, 0.0);
        let r = exact_id_err(&alg, &d1, 7).unwrap();
        assert!((r.id_err.estimate - 0.5).abs() < 1e-12);
        assert_eq!(r.select_prob.unwrap().estimate, 0.0);
    }

    #[test]
    fn compositions_are_complete() {
        let mut seen = Vec::new();
        for_each_composition(3, 3, |c| {
            seen.push(c.to_vec());
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 10);
        assert!(seen.iter().all(|c| c.iter().sum::<u64>() == 3));
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 10);
        assert_eq!(compositions_count(3, 3, 100), Some(10));
        assert_eq!(compositions_count(10_000, 4, 1_000_000), None);
    }

    #[test]
    fn ln_factorial_table() {
        let t = ln_factorials(20);
        let direct: f64 = (1..=20u64).product::<u64>() as f64;
        assert!((t[20] - direct.ln()).abs() < 1e-12);
    }

    /// Oracle: exact IdErr on two atoms by summing binomial terms directly.
    fn binomial_oracle(alg: &IdAlgorithm, inst: &Instance, n: u64) -> f64 {
        let d = inst.source.fixed().unwrap();
        let (p0, p1) = (d.pmf(idx(1)), d.pmf(idx(2)));
        let mut total = 0.0;
        let mut choose = 1.0f64;
        for s0 in 0..=n {
            if s0 > 0 {
                choose = choose * (n - s0 + 1) as f64 / s0 as f64;
            }
            let prob = choose * p0.powi(s0 as i32) * p1.powi((n - s0) as i32);
            let counts = [(idx(1), s0), (idx(2), n - s0)];
            let s = Sample::from_counts(counts.into_iter().filter(|c| c.1 > 0)).unwrap();
            let l = inst.collection.language(alg.identify(&inst.collection, &s)).unwrap();
            total += prob * (true_error(&l, d).unwrap() - 0.25);
        }
        total
    }

    #[test]
    fn exact_matches_binomial_oracle() {
        let pair = build_id_lower(2).unwrap();
        for alg in [IdAlgorithm::margin(), IdAlgorithm::erm(), IdAlgorithm::Margin { window: WindowFn::Constant { size: 4 } }] {
            for inst in &pair {
                for n in [1u64, 2, 5, 8, 13, 40] {
                    let exact = exact_id_err(&alg, inst, n).unwrap().id_err.estimate;
                    let oracle = binomial_oracle(&alg, inst, n);
                    assert!((exact - oracle).abs() < 1e-12, "{} n={n}: {exact} vs {oracle}", inst.name);
                }
            }
        }
    }

    #[test]
    fn composition_budget_enforced() {
        let d = finite_support((1..=8).map(|k| (idx(k), 0.125)).collect()).unwrap();
        let inst =
            crate::adversary::custom_instance("wide".into(), residue_collection(3), d, None).unwrap();
        assert!(matches!(exact_id_err(&IdAlgorithm::erm(), &inst, 200), Err(Error::BudgetExceeded(_))));
    }

    /// Oracle: enumerate all n-tuples over the support for tiny cases.
    fn tuple_oracle(inst: &Instance, n: u32) -> f64 {
        let d = inst.source.fixed().unwrap();
        let atoms = d.atoms().unwrap();
        let a = atoms.len();
        let mut total = 0.0;
        for code in 0..(a as u64).pow(n) {
            let mut c = code;
            let mut items = Vec::new();
            let mut p = 1.0;
            for _ in 0..n {
                let (k, pk) = atoms[(c % a as u64) as usize];
                c /= a as u64;
                items.push(k);
                p *= pk;
            }
            let s = Sample::new(items).unwrap();
            let out = generate(&inst.collection, &s, 2);
            if !d.in_support(out.output) {
                total += p;
            }
        }
        total
    }

    #[test]
    fn exact_gen_matches_tuple_oracle() {
        for inst in build_gen_lower(0, 3).unwrap().iter().chain(build_gen_lower(1, 2).unwrap().iter()) {
            for n in 1..=5u32 {
                let exact = exact_gen_err(inst, n as u64).unwrap().estimate;
                let oracle = tuple_oracle(inst, n);
                assert!((exact - oracle).abs() < 1e-12, "{} n={n}: {exact} vs {oracle}", inst.name);
            }
        }
    }

    #[test]
    fn gen_lower_m0_n3() {
        let pair = build_gen_lower(0, DEFAULT_TAIL_ATOMS).unwrap();
        let worst = pair.iter().map(|i| exact_gen_err(i, 3).unwrap().estimate).fold(0.0, f64::max);
        assert!(worst >= 1.0 / 16.0);
    }

    #[test]
    fn gen_upper_closed_form() {
        // error iff {1,3} ⊆ S and {2,4} ⊄ S, with pmf 1/4 on 1, 2, 3 and 1/8 on 4
        let inst = build_gen_upper().unwrap();
        for n in 1..=30u64 {
            let p = |m: f64| (1.0 - m).powi(n as i32);
            // P[1,3 ∈ S] = 1 - 2 p(1/4) + p(1/2)
            let both13 = 1.0 - 2.0 * p(0.25) + p(0.5);
            // P[1,2,3,4 ∈ S] by inclusion-exclusion over the four atoms
            let masses = [0.25, 0.25, 0.25, 0.125];
            let mut all4 = 0.0;
            for mask in 0u32..16 {
                let missing: f64 = (0..4).filter(|b| mask >> b & 1 == 1).map(|b| masses[b]).sum();
                let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                all4 += sign * p(missing);
            }
            let expected = both13 - all4;
            let exact = exact_gen_err(&inst, n).unwrap().estimate;
            assert!((exact - expected).abs() < 1e-12, "n={n}: {exact} vs {expected}");
        }
    }

    #[test]
    fn mc_is_reproducible_and_single_trial_works() {
        let [d0, _] = build_id_lower(2).unwrap();
        let task = Task::Identify(IdAlgorithm::erm());
        let a = mc_rate(&task, &d0, &[3, 5], 200, 9).unwrap();
        let b = mc_rate(&task, &d0, &[3, 5], 200, 9).unwrap();
        assert_eq!(a, b);
        let one = mc_rate(&task, &d0, &[4], 1, 1).unwrap();
        assert_eq!(one[0].std_error, 0.0);
        assert_eq!(one, mc_rate(&task, &d0, &[4], 1, 1).unwrap());
        assert!(mc_rate(&task, &d0, &[4], 0, 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let pts = vec![RatePoint {
            n: 4,
            metric: Metric::GenErr,
            estimate: 0.5,
            std_error: 0.0,
            bound: None,
            method: Method::Exact,
            trials: 0,
        }];
        assert_eq!(write_csv(&pts), "n,metric,estimate,std_error,bound,method,trials\n4,GenErr,5e-1,0e0,,exact,0\n");
    }

    proptest! {
        #[test]
        fn exact_estimates_are_probabilities(n in 1u64..60, side in 0usize..2, margin in any::<bool>()) {
            let pair = build_id_lower(2).unwrap();
            let alg = if margin { IdAlgorithm::margin() } else { IdAlgorithm::erm() };
            let r = exact_id_err(&alg, &pair[side], n).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.id_err.estimate));
            prop_assert!((0.0..=1.0).contains(&r.select_prob.unwrap().estimate));
        }
    }
}

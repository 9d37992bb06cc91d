//! Witness-elimination generation and the constants that control its error.

use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::identify::Sample;
use crate::languages::{Collection, Language};
use crate::universe::UniverseIndex;

/// Pointers after the elimination pass, the chosen language and its output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenOutcome {
    /// `r_i` for `i = 1..=window`.
    pub pointers: Vec<UniverseIndex>,
    /// 1-based index of the chosen language.
    pub chosen: usize,
    pub output: UniverseIndex,
}

/// For each language, skip past members seen in `S`; answer with the
/// furthest pointer, ties to the smallest index.
pub fn generate(collection: &Collection, sample: &Sample, window: usize) -> GenOutcome {
    generate_from(&collection.window(window), |k| sample.contains(k))
}

/// [`generate`] against an arbitrary seen-set predicate.
pub fn generate_from(languages: &[Language], seen: impl Fn(UniverseIndex) -> bool) -> GenOutcome {
    assert!(!languages.is_empty(), "generation needs at least one language");
    let pointers: Vec<UniverseIndex> = languages
        .iter()
        .map(|l| {
            let mut r = l.first_member();
            while seen(r) {
                r = l.next_member(r);
            }
            r
        })
        .collect();
    let mut chosen = 0;
    for (i, r) in pointers.iter().enumerate() {
        if *r > pointers[chosen] {
            chosen = i;
        }
    }
    GenOutcome { output: pointers[chosen], chosen: chosen + 1, pointers }
}

/// Value of `i(C, D)` when it can be established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessIndex {
    Finite(u64),
    Unknown,
}

/// Smallest `i` by which every language not contained in `supp(D)` has a
/// witness `u_k ∉ supp(D)`, `k <= i`. Containment is certified analytically
/// where the distribution allows it, otherwise only refuted by scanning.
pub fn witness_index(languages: &[Language], dist: &Distribution, scan_limit: u64) -> WitnessIndex {
    let mut worst = 1;
    for l in languages {
        let certified = dist.certify_contains(l);
        if certified == Some(true) {
            continue;
        }
        let witness = l
            .members()
            .take_while(|k| k.get() <= scan_limit)
            .find(|k| !dist.in_support(*k));
        match witness {
            Some(k) => worst = worst.max(k.get()),
            None => return WitnessIndex::Unknown,
        }
    }
    WitnessIndex::Finite(worst)
}

/// `(i★, I★, p★, c, Cexp)` with `GenErr(n) <= c * exp(-Cexp * n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenConstants {
    pub i_cd: u64,
    pub i_star: u64,
    pub i_star_set: Vec<u64>,
    pub p_star: f64,
    pub c: u64,
    pub c_exp: f64,
}

impl GenConstants {
    /// `c (1 - p★)^n`, clamped to a probability.
    pub fn bound(&self, n: u64) -> f64 {
        (self.c as f64 * (-self.c_exp * n as f64).exp()).clamp(0.0, 1.0)
    }
}

/// Constants for the designated language `L_m ⊆ supp(D)` (1-based `m`).
pub fn analytic_gen_constants(
    languages: &[Language],
    dist: &Distribution,
    designated: usize,
    scan_limit: u64,
) -> Result<GenConstants> {
    let lm = designated
        .checked_sub(1)
        .and_then(|i| languages.get(i))
        .ok_or_else(|| Error::HypothesisViolated(format!("no language {designated} in the window")))?;
    if dist.certify_contains(lm) != Some(true) {
        return Err(Error::HypothesisViolated(format!(
            "{} is not certified to lie inside supp(D)",
            lm.description
        )));
    }
    let i_cd = match witness_index(languages, dist, scan_limit) {
        WitnessIndex::Finite(i) => i,
        WitnessIndex::Unknown => {
            return Err(Error::HypothesisViolated(format!("i(C,D) not found below {scan_limit}")))
        }
    };
    let start = UniverseIndex::new(i_cd)?;
    let i_star = if lm.member(start) { start } else { lm.next_member(start) };
    let i_star_set: Vec<u64> = lm.members().take_while(|k| *k <= i_star).map(|k| k.get()).collect();
    let p_star = i_star_set
        .iter()
        .map(|k| dist.pmf(UniverseIndex::new(*k).unwrap()))
        .fold(f64::INFINITY, f64::min);
    Ok(GenConstants {
        i_cd,
        i_star: i_star.get(),
        c: i_star_set.len() as u64,
        i_star_set,
        p_star,
        c_exp: -(-p_star).ln_1p(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{finite_support, geometric_progression, mixture};
    use crate::languages::residue_collection;
    use proptest::prelude::*;

    fn idx(k: u64) -> UniverseIndex {
        UniverseIndex::new(k).unwrap()
    }

    fn sample(items: &[u64]) -> Sample {
        Sample::new(items.iter().map(|k| idx(*k)).collect()).unwrap()
    }

    fn evens_odds_upper() -> Distribution {
        mixture(vec![
            (0.5, finite_support(vec![(idx(1), 0.5), (idx(3), 0.5)]).unwrap()),
            (0.5, geometric_progression(2, 2).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn hand_trace() {
        let c = residue_collection(2);
        let out = generate(&c, &sample(&[2, 4]), 2);
        assert_eq!(out.pointers, vec![idx(6), idx(1)]);
        assert_eq!(out.chosen, 1);
        assert_eq!(out.output, idx(6));
    }

    #[test]
    fn no_advances_picks_largest_first_member() {
        let c = residue_collection(3);
        let out = generate(&c, &sample(&[100]), 3);
        assert_eq!(out.output, idx(3));
        assert_eq!(out.chosen, 1);
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let c = residue_collection(1);
        let twice = Collection::finite(
            "dup",
            c.universe().clone(),
            vec![c.language(1).unwrap(), c.language(1).unwrap()],
        );
        let out = generate(&twice, &sample(&[1, 2]), 2);
        assert_eq!(out.chosen, 1);
        assert_eq!(out.output, idx(3));
    }

    #[test]
    fn witness_index_examples() {
        let c = residue_collection(2);
        let evens = geometric_progression(2, 2).unwrap();
        assert_eq!(witness_index(&c.window(2), &evens, 100), WitnessIndex::Finite(1));
        let both = mixture(vec![(0.5, evens.clone()), (0.5, geometric_progression(1, 2).unwrap())]).unwrap();
        assert_eq!(witness_index(&c.window(2), &both, 100), WitnessIndex::Finite(1));
        let upper = evens_odds_upper();
        assert_eq!(witness_index(&c.window(2), &upper, 100), WitnessIndex::Finite(5));
        assert_eq!(witness_index(&c.window(2), &upper, 4), WitnessIndex::Unknown);
    }

    #[test]
    fn constants_examples() {
        let c = residue_collection(2);
        let evens = geometric_progression(2, 2).unwrap();
        let k = analytic_gen_constants(&c.window(2), &evens, 1, 100).unwrap();
        assert_eq!((k.i_cd, k.i_star, k.c), (1, 2, 1));
        assert_eq!(k.p_star, 0.5);
        assert_eq!(k.bound(0), 1.0);

        let k = analytic_gen_constants(&c.window(2), &evens_odds_upper(), 1, 100).unwrap();
        assert_eq!((k.i_cd, k.i_star), (5, 6));
        assert_eq!(k.i_star_set, vec![2, 4, 6]);
        assert_eq!(k.p_star, 0.0625);
        assert!((k.c_exp - (16.0f64 / 15.0).ln()).abs() < 1e-15);

        let point = finite_support(vec![(idx(2), 1.0)]).unwrap();
        assert!(matches!(
            analytic_gen_constants(&c.window(2), &point, 1, 100),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn seeing_i_star_forces_valid_output() {
        let c = residue_collection(2);
        let d = evens_odds_upper();
        let k = analytic_gen_constants(&c.window(2), &d, 1, 100).unwrap();
        let atoms: Vec<u64> = (1..=12).filter(|k| d.in_support(idx(*k))).collect();
        for mask in 0u32..(1 << atoms.len()) {
            let set: Vec<u64> = atoms.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, k)| *k).collect();
            if set.is_empty() || !k.i_star_set.iter().all(|x| set.contains(x)) {
                continue;
            }
            let out = generate(&c, &sample(&set), 2);
            assert!(d.in_support(out.output) && !set.contains(&out.output.get()), "{set:?}");
        }
    }

    proptest! {
        #[test]
        fn structural_properties(items in proptest::collection::vec(1u64..40, 1..30), q in 1u64..5) {
            let c = residue_collection(q);
            let s = sample(&items);
            let out = generate(&c, &s, q as usize);
            prop_assert!(!s.contains(out.output));
            prop_assert!(c.language(out.chosen).unwrap().member(out.output));
            for (i, r) in out.pointers.iter().enumerate() {
                let l = c.language(i + 1).unwrap();
                prop_assert!(l.member(*r));
                prop_assert!(*r >= l.first_member());
            }
            // only the distinct set matters
            let mut dedup = items.clone();
            dedup.sort_unstable();
            dedup.dedup();
            dedup.reverse();
            prop_assert_eq!(generate(&c, &sample(&dedup), q as usize), out);
        }

        #[test]
        fn late_choice_is_contained(items in proptest::collection::vec(1u64..20, 1..25)) {
            let c = residue_collection(2);
            let d = evens_odds_upper();
            let items: Vec<u64> = items.into_iter().filter(|k| d.in_support(idx(*k))).collect();
            prop_assume!(!items.is_empty());
            let s = sample(&items);
            let out = generate(&c, &s, 2);
            if out.pointers[out.chosen - 1].get() > 5 {
                prop_assert_eq!(d.certify_contains(&c.language(out.chosen).unwrap()), Some(true));
            }
        }
    }
}

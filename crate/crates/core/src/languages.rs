//! Languages as decidable, infinite subsets of a universe, and the ordered
//! collections the algorithms index into.
//!
//! Every built-in language is an eventually periodic set of universe indices,
//! which keeps `member`, `nth_member` and `next_member` O(1) and lets
//! distributions with structured supports certify containment exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::universe::{UniverseIndex, UniverseSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LanguageKind {
    /// Every string of the universe.
    All,
    /// `{first + stride * j : j >= 0}`.
    Progression { first: u64, stride: u64 },
    /// `L_I` over `N x {-1, 0, 1}`: `(j, I_j)` for `j <= |I|`, then `(j, -1)`.
    PrefixLabeled { prefix: Vec<u8> },
    /// `head_len` consecutive indices from `head_first`, then every second
    /// index from `tail_first`. The head lies strictly below the tail.
    SplitTail { head_first: u64, head_len: u64, tail_first: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Language {
    pub id: u64,
    pub kind: LanguageKind,
    pub description: String,
}

/// `head ∪ {first + stride * j : j >= 0}`; the shape shared by every built-in
/// language and by the supports of the structured distributions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicSet {
    pub head: Vec<u64>,
    pub first: u64,
    pub stride: u64,
}

impl PeriodicSet {
    pub fn contains(&self, k: u64) -> bool {
        self.head.contains(&k) || (k >= self.first && (k - self.first).is_multiple_of(self.stride))
    }
}

const PREFIX_LABELS: u64 = 3;

fn prefix_nth(prefix: &[u8], j: u64) -> u64 {
    let column = match prefix.get((j - 1) as usize) {
        Some(bit) => *bit as u64 + 1,
        None => 0,
    };
    PREFIX_LABELS * (j - 1) + column + 1
}

impl Language {
    pub fn new(id: u64, kind: LanguageKind, description: impl Into<String>) -> Self {
        if let LanguageKind::Progression { stride, first } = &kind {
            assert!(*stride >= 1 && *first >= 1, "degenerate progression");
        }
        if let LanguageKind::SplitTail { head_first, head_len, tail_first } = &kind {
            assert!(*head_first >= 1 && head_first + head_len <= *tail_first, "head must precede tail");
        }
        if let LanguageKind::PrefixLabeled { prefix } = &kind {
            assert!(prefix.iter().all(|b| *b <= 1), "prefix must be a bit string");
        }
        Language { id, kind, description: description.into() }
    }

    pub fn member(&self, k: UniverseIndex) -> bool {
        let k = k.get();
        match &self.kind {
            LanguageKind::All => true,
            LanguageKind::Progression { first, stride } => k >= *first && (k - first).is_multiple_of(*stride),
            LanguageKind::PrefixLabeled { prefix } => {
                let w = (k - 1) / PREFIX_LABELS + 1;
                prefix_nth(prefix, w) == k
            }
            LanguageKind::SplitTail { head_first, head_len, tail_first } => {
                (k >= *head_first && k < head_first + head_len)
                    || (k >= *tail_first && (k - tail_first).is_multiple_of(2))
            }
        }
    }

    /// The `j`-th smallest member, `j >= 1`.
    pub fn nth_member(&self, j: u64) -> UniverseIndex {
        assert!(j >= 1, "nth_member is 1-based");
        let k = match &self.kind {
            LanguageKind::All => j,
            LanguageKind::Progression { first, stride } => first + stride * (j - 1),
            LanguageKind::PrefixLabeled { prefix } => prefix_nth(prefix, j),
            LanguageKind::SplitTail { head_first, head_len, tail_first } => {
                if j <= *head_len {
                    head_first + j - 1
                } else {
                    tail_first + 2 * (j - head_len - 1)
                }
            }
        };
        UniverseIndex::from_raw(k)
    }

    /// Number of members `<= k`.
    pub fn count_le(&self, k: u64) -> u64 {
        let progression = |first: u64, stride: u64| if k < first { 0 } else { (k - first) / stride + 1 };
        match &self.kind {
            LanguageKind::All => k,
            LanguageKind::Progression { first, stride } => progression(*first, *stride),
            LanguageKind::PrefixLabeled { prefix } => {
                if k == 0 {
                    return 0;
                }
                let w = (k - 1) / PREFIX_LABELS + 1;
                (w - 1) + u64::from(prefix_nth(prefix, w) <= k)
            }
            LanguageKind::SplitTail { head_first, head_len, tail_first } => {
                let head = if k < *head_first { 0 } else { (k - head_first + 1).min(*head_len) };
                head + progression(*tail_first, 2)
            }
        }
    }

    pub fn first_member(&self) -> UniverseIndex {
        self.nth_member(1)
    }

    /// Smallest member strictly greater than `k`; `k` need not be a member.
    pub fn next_member(&self, k: UniverseIndex) -> UniverseIndex {
        self.nth_member(self.count_le(k.get()) + 1)
    }

    pub fn prefix(&self) -> Option<&[u8]> {
        match &self.kind {
            LanguageKind::PrefixLabeled { prefix } => Some(prefix),
            _ => None,
        }
    }

    pub fn periodic_form(&self) -> PeriodicSet {
        match &self.kind {
            LanguageKind::All => PeriodicSet { head: vec![], first: 1, stride: 1 },
            LanguageKind::Progression { first, stride } => {
                PeriodicSet { head: vec![], first: *first, stride: *stride }
            }
            LanguageKind::PrefixLabeled { prefix } => PeriodicSet {
                head: (1..=prefix.len() as u64).map(|j| prefix_nth(prefix, j)).collect(),
                first: prefix_nth(prefix, prefix.len() as u64 + 1),
                stride: PREFIX_LABELS,
            },
            LanguageKind::SplitTail { head_first, head_len, tail_first } => PeriodicSet {
                head: (*head_first..head_first + head_len).collect(),
                first: *tail_first,
                stride: 2,
            },
        }
    }

    /// Iterator over members in increasing order, starting at the first.
    pub fn members(&self) -> impl Iterator<Item = UniverseIndex> + '_ {
        (1u64..).map(move |j| self.nth_member(j))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CollectionKind {
    Finite(Vec<Language>),
    PrefixLabeled,
}

/// An ordered collection `L_1, L_2, ...`. Index `i` is always 1-based and
/// refers to this order.
#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    name: String,
    universe: UniverseSpec,
    kind: Arc<CollectionKind>,
}

impl Collection {
    pub fn finite(name: impl Into<String>, universe: UniverseSpec, languages: Vec<Language>) -> Self {
        assert!(!languages.is_empty(), "empty collection");
        Collection { name: name.into(), universe, kind: Arc::new(CollectionKind::Finite(languages)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> &UniverseSpec {
        &self.universe
    }

    pub fn is_finite(&self) -> bool {
        matches!(*self.kind, CollectionKind::Finite(_))
    }

    pub fn len(&self) -> Option<usize> {
        match &*self.kind {
            CollectionKind::Finite(v) => Some(v.len()),
            CollectionKind::PrefixLabeled => None,
        }
    }

    pub fn language(&self, i: usize) -> Option<Language> {
        if i == 0 {
            return None;
        }
        match &*self.kind {
            CollectionKind::Finite(v) => v.get(i - 1).cloned(),
            CollectionKind::PrefixLabeled => Some(prefix_language(i as u64, prefix_from_index(i as u64))),
        }
    }

    /// The first `size` languages, truncated at the end of a finite collection.
    pub fn window(&self, size: usize) -> Vec<Language> {
        assert!(size >= 1, "window size must be positive");
        match &*self.kind {
            CollectionKind::Finite(v) => v.iter().take(size).cloned().collect(),
            CollectionKind::PrefixLabeled => (1..=size)
                .map(|i| prefix_language(i as u64, prefix_from_index(i as u64)))
                .collect(),
        }
    }
}

fn prefix_language(id: u64, prefix: Vec<u8>) -> Language {
    let bits: String = prefix.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
    Language::new(id, LanguageKind::PrefixLabeled { prefix }, format!("L_{bits}"))
}

/// Position of `L_I` in the prefix-labeled collection: by length, then
/// lexicographically. `(0) -> 1`, `(1) -> 2`, `(0,0) -> 3`, ...
pub fn prefix_index(prefix: &[u8]) -> u64 {
    assert!(!prefix.is_empty() && prefix.len() < 63, "prefix length out of range");
    let rank = prefix.iter().fold(0u64, |acc, b| (acc << 1) | u64::from(*b));
    (1u64 << prefix.len()) - 1 + rank
}

pub fn prefix_from_index(i: u64) -> Vec<u8> {
    assert!(i >= 1);
    // lengths 1..=len occupy indices 1 ..= 2^(len+1) - 2
    let mut len = 1u32;
    while (1u64 << (len + 1)) - 2 < i {
        len += 1;
    }
    let rank = i - ((1u64 << len) - 1);
    (0..len).rev().map(|b| ((rank >> b) & 1) as u8).collect()
}

/// `L_i = {w : w ≡ i (mod q)}` for `i = 0..q`, over `N`.
pub fn residue_collection(q: u64) -> Collection {
    assert!(q >= 1);
    let languages = (0..q)
        .map(|r| {
            let first = if r == 0 { q } else { r };
            Language::new(
                r + 1,
                LanguageKind::Progression { first, stride: q },
                format!("w = {r} mod {q}"),
            )
        })
        .collect();
    Collection::finite(format!("residue({q})"), UniverseSpec::Naturals {}, languages)
}

/// Pairwise-disjoint label columns over `N x {0, ..., d+1}`. Column 0 is `L`
/// (signature `s_0 = (1,0)`), column 1 is `L'` (signature `s_1 = (1,1)`), the
/// remaining `d` columns are distractors.
pub fn signature_collection(distractors: usize) -> Collection {
    let m = distractors as u64 + 2;
    let universe = UniverseSpec::pairs(m, 0);
    let languages = (0..m)
        .map(|c| {
            let name = match c {
                0 => "L (signature s_0)".to_string(),
                1 => "L' (signature s_1)".to_string(),
                _ => format!("distractor {}", c - 1),
            };
            Language::new(c + 1, LanguageKind::Progression { first: c + 1, stride: m }, name)
        })
        .collect();
    Collection::finite(format!("signature({distractors})"), universe, languages)
}

/// The countable collection `{L_I : I ∈ {0,1}^i, i >= 1}` over `N x {-1,0,1}`.
pub fn prefix_labeled_collection() -> Collection {
    Collection {
        name: "prefix-labeled".into(),
        universe: UniverseSpec::signed_ternary(),
        kind: Arc::new(CollectionKind::PrefixLabeled),
    }
}

/// Layout of [`finite_intersection_collection`]: string 1 lies outside both
/// languages, `2..=m+1` are shared, and the tail from `m+2` alternates
/// between `L` (even offsets) and `L'` (odd offsets).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntersectionLayout {
    pub m: u64,
}

impl IntersectionLayout {
    pub fn outside(&self) -> UniverseIndex {
        UniverseIndex::from_raw(1)
    }

    pub fn common(&self) -> impl Iterator<Item = UniverseIndex> {
        (2..self.m + 2).map(UniverseIndex::from_raw)
    }

    pub fn tail_first(&self, which: usize) -> u64 {
        self.m + 2 + which as u64
    }
}

/// Two languages `L, L'` over `N` with `|L ∩ L'| = m` and string 1 in neither.
pub fn finite_intersection_collection(m: u64) -> Collection {
    let layout = IntersectionLayout { m };
    let languages = (0..2)
        .map(|which| {
            Language::new(
                which as u64 + 1,
                LanguageKind::SplitTail { head_first: 2, head_len: m, tail_first: layout.tail_first(which) },
                if which == 0 { "L" } else { "L'" },
            )
        })
        .collect();
    Collection::finite(format!("finite-intersection({m})"), UniverseSpec::Naturals {}, languages)
}

/// `[U, column_1, ..., column_m]` over a pair universe with `label_count`
/// labels: the whole universe followed by one language per label.
pub fn universe_and_columns(label_count: u64, label_offset: i64) -> Collection {
    let universe = UniverseSpec::pairs(label_count, label_offset);
    let mut languages = vec![Language::new(1, LanguageKind::All, "U")];
    for c in 0..label_count {
        languages.push(Language::new(
            c + 2,
            LanguageKind::Progression { first: c + 1, stride: label_count },
            format!("column y={}", label_offset + c as i64),
        ));
    }
    Collection::finite(format!("universe+columns({label_count})"), universe, languages)
}

/// Named collection constructors as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CollectionSpec {
    Residue { q: u64 },
    Signature { distractors: usize },
    PrefixLabeled {},
    FiniteIntersection { m: u64 },
    UniverseAndColumns { label_count: u64, label_offset: i64 },
}

impl CollectionSpec {
    pub fn build(&self) -> Result<Collection> {
        match self {
            CollectionSpec::Residue { q } if *q == 0 => Err(Error::Config("residue modulus must be >= 1".into())),
            CollectionSpec::Residue { q } => Ok(residue_collection(*q)),
            CollectionSpec::Signature { distractors } => Ok(signature_collection(*distractors)),
            CollectionSpec::PrefixLabeled {} => Ok(prefix_labeled_collection()),
            CollectionSpec::FiniteIntersection { m } => Ok(finite_intersection_collection(*m)),
            CollectionSpec::UniverseAndColumns { label_count: 0, .. } => {
                Err(Error::Config("need at least one label".into()))
            }
            CollectionSpec::UniverseAndColumns { label_count, label_offset } => {
                Ok(universe_and_columns(*label_count, *label_offset))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn idx(k: u64) -> UniverseIndex {
        UniverseIndex::new(k).unwrap()
    }

    fn builtins() -> Vec<Language> {
        let mut all = Vec::new();
        all.extend(residue_collection(2).window(2));
        all.extend(residue_collection(5).window(5));
        all.extend(signature_collection(3).window(5));
        all.extend(prefix_labeled_collection().window(30));
        all.extend(finite_intersection_collection(0).window(2));
        all.extend(finite_intersection_collection(3).window(2));
        all.extend(universe_and_columns(4, 1).window(5));
        all
    }

    // Independent oracle: linear scan of membership.
    fn scan_next(l: &Language, k: u64) -> u64 {
        (k + 1..).find(|&c| l.member(idx(c))).unwrap()
    }

    #[test]
    fn first_member_examples() {
        let evens = residue_collection(2).language(1).unwrap();
        assert_eq!(evens.first_member(), idx(2));

        let u = UniverseSpec::signed_ternary();
        let l0 = prefix_labeled_collection().language(1).unwrap();
        assert_eq!(l0.prefix(), Some(&[0u8][..]));
        let brute = (1..100).find(|&k| l0.member(idx(k))).unwrap();
        assert_eq!(l0.first_member().get(), brute);
        assert_eq!(l0.first_member(), u.pair_index(1, 0).unwrap());

        let sig = signature_collection(2);
        let l = sig.language(1).unwrap();
        let s0 = sig.universe().pair_index(1, 0).unwrap();
        let brute = (1..100).find(|&k| l.member(idx(k))).unwrap();
        assert_eq!(brute, s0.get());
        assert_eq!(l.first_member(), s0);
    }

    #[test]
    fn next_member_examples() {
        let evens = residue_collection(2).language(1).unwrap();
        assert_eq!(evens.next_member(idx(2)), idx(4));
        assert_eq!(evens.next_member(idx(3)), idx(4));

        let u = UniverseSpec::signed_ternary();
        let l0 = prefix_labeled_collection().language(1).unwrap();
        let start = u.pair_index(1, 0).unwrap();
        let brute = scan_next(&l0, start.get());
        assert_eq!(l0.next_member(start).get(), brute);
        assert_eq!(l0.next_member(start), u.pair_index(2, -1).unwrap());
    }

    #[test]
    fn window_examples() {
        let c = finite_intersection_collection(1);
        assert_eq!(c.window(5).len(), 2);
        let sig = signature_collection(1);
        assert_eq!(sig.window(5).len(), 3);

        let p = prefix_labeled_collection().window(2);
        assert_eq!(p[0].prefix(), Some(&[0u8][..]));
        assert_eq!(p[1].prefix(), Some(&[1u8][..]));

        let r = residue_collection(4).window(2);
        assert_eq!(r[0].kind, LanguageKind::Progression { first: 4, stride: 4 });
        assert_eq!(r[1].kind, LanguageKind::Progression { first: 1, stride: 4 });
    }

    #[test]
    fn prefix_enumeration_order() {
        let expected: Vec<Vec<u8>> = vec![
            vec![0],
            vec![1],
            vec![0, 0],
            vec![0, 1],
            vec![1, 0],
            vec![1, 1],
            vec![0, 0, 0],
        ];
        for (i, prefix) in expected.iter().enumerate() {
            assert_eq!(prefix_from_index(i as u64 + 1), *prefix);
            assert_eq!(prefix_index(prefix), i as u64 + 1);
        }
        for i in 1..2000 {
            assert_eq!(prefix_index(&prefix_from_index(i)), i);
        }
    }

    #[test]
    fn builtin_languages_are_increasing_and_consistent() {
        for l in builtins() {
            for j in 1..=200u64 {
                let a = l.nth_member(j);
                let b = l.nth_member(j + 1);
                assert!(a < b, "{} not increasing at {j}", l.description);
                assert!(l.member(a), "{} nth({j}) not a member", l.description);
                assert_eq!(l.count_le(a.get()), j);
                assert_eq!(l.next_member(a), b);
            }
            assert_eq!(l.next_member(l.first_member()), l.nth_member(2));
            for k in 1..300u64 {
                assert_eq!(l.next_member(idx(k)).get(), scan_next(&l, k), "{}", l.description);
                assert_eq!(l.periodic_form().contains(k), l.member(idx(k)));
            }
        }
    }

    #[test]
    fn prefix_labeled_membership_matches_definition() {
        let u = UniverseSpec::signed_ternary();
        for l in prefix_labeled_collection().window(62) {
            let prefix = l.prefix().unwrap().to_vec();
            for j in 1..=12u64 {
                let minus = u.pair_index(j, -1).unwrap();
                assert_eq!(l.member(minus), j > prefix.len() as u64);
                if let Some(bit) = prefix.get(j as usize - 1) {
                    let own = u.pair_index(j, *bit as i64).unwrap();
                    let other = u.pair_index(j, 1 - *bit as i64).unwrap();
                    assert!(l.member(own));
                    assert!(!l.member(other));
                } else {
                    assert!(!l.member(u.pair_index(j, 0).unwrap()));
                    assert!(!l.member(u.pair_index(j, 1).unwrap()));
                }
            }
        }
    }

    #[test]
    fn signature_strings_are_private() {
        let c = signature_collection(3);
        let langs = c.window(10);
        for (i, l) in langs.iter().enumerate().take(2) {
            let s = l.first_member();
            for (j, other) in langs.iter().enumerate() {
                assert_eq!(other.member(s), i == j);
            }
        }
    }

    #[test]
    fn finite_intersection_layout() {
        for m in 0..5u64 {
            let c = finite_intersection_collection(m);
            let (l, lp) = (c.language(1).unwrap(), c.language(2).unwrap());
            let shared: Vec<u64> = (1..200).filter(|&k| l.member(idx(k)) && lp.member(idx(k))).collect();
            assert_eq!(shared.len() as u64, m);
            assert!(!l.member(idx(1)) && !lp.member(idx(1)));
        }
    }

    #[test]
    fn collection_spec_json() {
        let spec: CollectionSpec = serde_json::from_str(r#"{"name":"residue","q":3}"#).unwrap();
        assert_eq!(spec.build().unwrap().len(), Some(3));
        assert!(serde_json::from_str::<CollectionSpec>(r#"{"name":"residue","q":3,"z":1}"#).is_err());
        let spec: CollectionSpec = serde_json::from_str(r#"{"name":"prefix-labeled"}"#).unwrap();
        assert!(!spec.build().unwrap().is_finite());
    }

    proptest! {
        #[test]
        fn next_member_is_strictly_greater_member(q in 1u64..12, r in 0u64..12, k in 1u64..10_000) {
            let r = r % q;
            let l = residue_collection(q).language(r as usize + 1).unwrap();
            let n = l.next_member(idx(k));
            prop_assert!(n.get() > k);
            prop_assert!(l.member(n));
            prop_assert_eq!(l.count_le(n.get() - 1), l.count_le(k));
        }
    }
}

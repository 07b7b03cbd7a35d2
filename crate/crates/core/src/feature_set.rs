//! Sets of feature indices.
//!
//! A [`FeatureSet`] is a growable bitset. Sets over at most 128 features live
//! inline without allocation; wider sets spill to the heap. Trailing zero
//! words are always trimmed so that equality and hashing are semantic.

use std::fmt;

use smallvec::SmallVec;

const WORD: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSet {
    words: SmallVec<[u64; 2]>,
}

impl FeatureSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `{0, 1, ..., n - 1}`
    pub fn full(n: usize) -> Self {
        let mut words: SmallVec<[u64; 2]> = SmallVec::from_elem(u64::MAX, n / WORD);
        if !n.is_multiple_of(WORD) {
            words.push((1u64 << (n % WORD)) - 1);
        }
        Self { words }
    }

    pub fn singleton(i: usize) -> Self {
        let mut s = Self::empty();
        s.insert(i);
        s
    }

    /// Builds the set from the low `n` bits of `mask`.
    pub fn from_mask(mask: u64) -> Self {
        let mut s = Self::empty();
        if mask != 0 {
            s.words.push(mask);
        }
        s
    }

    /// The set as a single word. `None` when a member is ≥ 64.
    pub fn as_mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn insert(&mut self, i: usize) {
        let w = i / WORD;
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1u64 << (i % WORD);
    }

    pub fn remove(&mut self, i: usize) {
        let w = i / WORD;
        if w < self.words.len() {
            self.words[w] &= !(1u64 << (i % WORD));
            self.trim();
        }
    }

    pub fn with(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn without(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.remove(i);
        s
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words
            .get(i / WORD)
            .is_some_and(|w| w & (1u64 << (i % WORD)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// One past the largest member, or 0 for the empty set.
    pub fn bound(&self) -> usize {
        match self.words.last() {
            None => 0,
            Some(&w) => (self.words.len() - 1) * WORD + (WORD - w.leading_zeros() as usize),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let (long, short) = if self.words.len() >= other.words.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut words = long.words.clone();
        for (w, o) in words.iter_mut().zip(short.words.iter()) {
            *w |= o;
        }
        Self { words }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let mut s = Self {
            words: self
                .words
                .iter()
                .zip(other.words.iter())
                .map(|(a, b)| a & b)
                .collect(),
        };
        s.trim();
        s
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut s = Self {
            words: self
                .words
                .iter()
                .enumerate()
                .map(|(i, a)| a & !other.words.get(i).copied().unwrap_or(0))
                .collect(),
        };
        s.trim();
        s
    }

    /// `{0..n} \ self`
    pub fn complement(&self, n: usize) -> Self {
        Self::full(n).difference(self)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, a)| a & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(a, b)| a & b == 0)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> Members<'_> {
        Members {
            words: &self.words,
            index: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Maps a local mask over `members` (bit `k` selects `members[k]`) to a set.
    pub fn from_local_mask(members: &[usize], mask: u64) -> Self {
        let mut s = Self::empty();
        let mut m = mask;
        while m != 0 {
            let k = m.trailing_zeros() as usize;
            s.insert(members[k]);
            m &= m - 1;
        }
        s
    }

    /// Raw words, least significant first. Used for keyed hashing.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl FromIterator<usize> for FeatureSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = Self::empty();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl<'a> IntoIterator for &'a FeatureSet {
    type Item = usize;
    type IntoIter = Members<'a>;

    fn into_iter(self) -> Members<'a> {
        self.iter()
    }
}

pub struct Members<'a> {
    words: &'a [u64],
    index: usize,
    current: u64,
}

impl Iterator for Members<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.index * WORD + bit);
            }
            self.index += 1;
            if self.index >= self.words.len() {
                return None;
            }
            self.current = self.words[self.index];
        }
    }
}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_and_complement() {
        assert_eq!(FeatureSet::full(0), FeatureSet::empty());
        assert_eq!(FeatureSet::full(3).to_vec(), vec![0, 1, 2]);
        assert_eq!(FeatureSet::full(64).len(), 64);
        assert_eq!(FeatureSet::full(130).len(), 130);
        let s: FeatureSet = [1, 70].into_iter().collect();
        assert_eq!(s.complement(72).len(), 70);
        assert!(!s.complement(72).contains(70));
    }

    #[test]
    fn removal_trims_words() {
        let mut s = FeatureSet::singleton(100);
        s.remove(100);
        assert_eq!(s, FeatureSet::empty());
        assert_eq!(s.bound(), 0);
    }

    #[test]
    fn local_mask_maps_members() {
        let members = [3, 5, 9];
        let s = FeatureSet::from_local_mask(&members, 0b101);
        assert_eq!(s.to_vec(), vec![3, 9]);
    }

    fn arb_set() -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(0usize..200, 0..20)
    }

    proptest! {
        #[test]
        fn set_algebra_matches_btreeset(a in arb_set(), b in arb_set()) {
            use std::collections::BTreeSet;
            let (sa, sb): (FeatureSet, FeatureSet) =
                (a.iter().copied().collect(), b.iter().copied().collect());
            let (ba, bb): (BTreeSet<usize>, BTreeSet<usize>) =
                (a.iter().copied().collect(), b.iter().copied().collect());
            prop_assert_eq!(sa.union(&sb).to_vec(), ba.union(&bb).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.intersection(&sb).to_vec(), ba.intersection(&bb).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.difference(&sb).to_vec(), ba.difference(&bb).copied().collect::<Vec<_>>());
            prop_assert_eq!(sa.is_subset(&sb), ba.is_subset(&bb));
            prop_assert_eq!(sa.is_disjoint(&sb), ba.is_disjoint(&bb));
            prop_assert_eq!(sa.len(), ba.len());
            prop_assert_eq!(sa.bound(), ba.iter().next_back().map_or(0, |m| m + 1));
        }
    }
}

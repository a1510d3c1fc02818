//! Permutations of the four type labels `{1, 2, 3, 4}`.
//!
//! Every structural object in this crate (type vectors, strength tables,
//! kernel patterns) is indexed by one of four labels, so the only group we
//! need is S4. Elements are stored in image form with 1-based semantics:
//! `image[i] = σ(i + 1)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of labels a core input line can carry.
pub const LABELS: usize = 4;

/// A bijection on `{1, 2, 3, 4}`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: [u8; LABELS],
}

impl Permutation {
    pub const IDENTITY: Permutation = Permutation { image: [1, 2, 3, 4] };

    /// Builds a permutation from its one-line image form, e.g. `[2, 1, 4, 3]`.
    pub fn new(image: [u8; LABELS]) -> Result<Self> {
        let mut seen = [false; LABELS];
        for &v in &image {
            if !(1..=LABELS as u8).contains(&v) || seen[(v - 1) as usize] {
                return Err(Error::InvalidPermutation(image.to_vec()));
            }
            seen[(v - 1) as usize] = true;
        }
        Ok(Self { image })
    }

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Transposition of two labels.
    pub fn swap(a: u8, b: u8) -> Result<Self> {
        let mut image = Self::IDENTITY.image;
        check_label(a)?;
        check_label(b)?;
        image.swap((a - 1) as usize, (b - 1) as usize);
        Ok(Self { image })
    }

    /// The cycle `1 → 2 → 3 → 4 → 1`.
    pub fn four_cycle() -> Self {
        Self { image: [2, 3, 4, 1] }
    }

    pub fn image(&self) -> [u8; LABELS] {
        self.image
    }

    /// Applies the permutation to a label in `1..=4`.
    ///
    /// Panics on labels outside `1..=4`; callers validate labels at the
    /// boundary (see [`check_label`]).
    #[inline]
    pub fn apply(&self, label: u8) -> u8 {
        self.image[(label - 1) as usize]
    }

    /// `compose(p, q)(x) = p(q(x))`.
    pub fn compose(&self, q: &Permutation) -> Permutation {
        let mut image = [0u8; LABELS];
        for (x, slot) in image.iter_mut().enumerate() {
            *slot = self.apply(q.image[x]);
        }
        Permutation { image }
    }

    pub fn inverse(&self) -> Permutation {
        let mut image = [0u8; LABELS];
        for (x, &y) in self.image.iter().enumerate() {
            image[(y - 1) as usize] = x as u8 + 1;
        }
        Permutation { image }
    }

    /// k-fold self-composition; `power(0)` is the identity.
    pub fn power(&self, k: u64) -> Permutation {
        // The order of any element of S4 divides 12.
        let k = k % 12;
        let mut acc = Permutation::IDENTITY;
        for _ in 0..k {
            acc = self.compose(&acc);
        }
        acc
    }

    pub fn commutes(&self, q: &Permutation) -> bool {
        self.compose(q) == q.compose(self)
    }

    /// Smallest positive k with `power(k) == identity`.
    pub fn order(&self) -> u64 {
        let mut acc = *self;
        let mut k = 1;
        while acc != Permutation::IDENTITY {
            acc = self.compose(&acc);
            k += 1;
        }
        k
    }

    pub fn is_identity(&self) -> bool {
        *self == Permutation::IDENTITY
    }

    /// All 24 elements of S4 in lexicographic order of their images.
    pub fn all() -> Vec<Permutation> {
        let mut out = Vec::with_capacity(24);
        for a in 1..=4u8 {
            for b in 1..=4u8 {
                for c in 1..=4u8 {
                    for d in 1..=4u8 {
                        if let Ok(p) = Permutation::new([a, b, c, d]) {
                            out.push(p);
                        }
                    }
                }
            }
        }
        out
    }
}

impl Default for Permutation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

pub(crate) fn check_label(label: u8) -> Result<()> {
    if (1..=LABELS as u8).contains(&label) {
        Ok(())
    } else {
        Err(Error::InvalidLabel(label as i64))
    }
}

/// Every ordered pair `(p, q)` of S4 × S4 with `pq = qp`, lexicographic on
/// `(p.image, q.image)`.
///
/// Includes `(p, p)` and both orientations of each pair, giving 120 pairs.
pub fn enumerate_commuting_pairs() -> Vec<(Permutation, Permutation)> {
    let all = Permutation::all();
    let mut pairs = Vec::with_capacity(120);
    for p in &all {
        for q in &all {
            if p.commutes(q) {
                pairs.push((*p, *q));
            }
        }
    }
    pairs
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.image;
        write!(f, "[{a},{b},{c},{d}]")
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("permutation must look like [2,1,4,3], got {s:?}")))?;
        let values = inner
            .split(',')
            .map(|t| t.trim().parse::<u8>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("bad permutation entry in {s:?}: {e}")))?;
        let image: [u8; LABELS] = values
            .as_slice()
            .try_into()
            .map_err(|_| Error::Parse(format!("permutation needs 4 entries, got {}", values.len())))?;
        Permutation::new(image)
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.image.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let image = <[u8; LABELS]>::deserialize(deserializer)?;
        Permutation::new(image).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(image: [u8; 4]) -> Permutation {
        Permutation::new(image).unwrap()
    }

    fn double_swap() -> Permutation {
        Permutation::swap(1, 2)
            .unwrap()
            .compose(&Permutation::swap(3, 4).unwrap())
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new([1, 1, 3, 4]).is_err());
        assert!(Permutation::new([0, 1, 2, 3]).is_err());
        assert!(Permutation::new([1, 2, 3, 5]).is_err());
        assert!(Permutation::swap(1, 5).is_err());
    }

    #[test]
    fn compose_examples() {
        let q = p([3, 1, 4, 2]);
        assert_eq!(Permutation::IDENTITY.compose(&q), q);
        assert_eq!(double_swap().compose(&double_swap()), Permutation::IDENTITY);
        let c = Permutation::four_cycle();
        assert_eq!(c.compose(&c), p([3, 4, 1, 2]));
    }

    #[test]
    fn compose_applies_right_first() {
        let a = p([2, 3, 1, 4]);
        let b = p([4, 3, 2, 1]);
        let ab = a.compose(&b);
        for x in 1..=4 {
            assert_eq!(ab.apply(x), a.apply(b.apply(x)));
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Permutation::IDENTITY.inverse(), Permutation::IDENTITY);
        assert_eq!(Permutation::four_cycle().inverse(), p([4, 1, 2, 3]));
        let s = Permutation::swap(1, 2).unwrap();
        assert_eq!(s.inverse(), s);
    }

    #[test]
    fn power_examples() {
        let c = Permutation::four_cycle();
        assert_eq!(c.power(0), Permutation::IDENTITY);
        assert_eq!(c.power(4), Permutation::IDENTITY);
        let s = Permutation::swap(1, 2).unwrap();
        assert_eq!(s.power(3), s);
        assert_eq!(c.power(13), c);
    }

    #[test]
    fn commutes_examples() {
        let c = Permutation::four_cycle();
        let s = Permutation::swap(1, 2).unwrap();
        assert!(Permutation::IDENTITY.commutes(&s));
        assert!(c.commutes(&c));
        assert!(!s.commutes(&c));
    }

    #[test]
    fn group_axioms_exhaustive() {
        let all = Permutation::all();
        assert_eq!(all.len(), 24);
        for a in &all {
            assert_eq!(a.compose(&a.inverse()), Permutation::IDENTITY);
            assert_eq!(a.inverse().compose(a), Permutation::IDENTITY);
            assert_eq!(Permutation::IDENTITY.compose(a), *a);
            assert_eq!(a.compose(&Permutation::IDENTITY), *a);
            assert_eq!(a.power(a.order()), Permutation::IDENTITY);
            for b in &all {
                for c in &all {
                    assert_eq!(a.compose(&b.compose(c)), a.compose(b).compose(c));
                }
            }
        }
    }

    #[test]
    fn commuting_pairs_count_and_order() {
        let pairs = enumerate_commuting_pairs();
        assert_eq!(pairs.len(), 120);
        assert_eq!(pairs[0], (Permutation::IDENTITY, Permutation::IDENTITY));
        assert!(pairs.iter().all(|(a, b)| a.commutes(b)));
        assert!(pairs
            .windows(2)
            .all(|w| (w[0].0.image, w[0].1.image) < (w[1].0.image, w[1].1.image)));
    }

    #[test]
    fn text_form() {
        let q = p([2, 1, 4, 3]);
        assert_eq!(q.to_string(), "[2,1,4,3]");
        assert_eq!("[2, 1, 4, 3]".parse::<Permutation>().unwrap(), q);
        assert!("[2,1,4]".parse::<Permutation>().is_err());
        assert!("2,1,4,3".parse::<Permutation>().is_err());
        assert_eq!(serde_json::to_string(&q).unwrap(), "[2,1,4,3]");
        assert!(serde_json::from_str::<Permutation>("[2,2,4,3]").is_err());
    }

    fn any_perm() -> impl Strategy<Value = Permutation> {
        (0usize..24).prop_map(|i| Permutation::all()[i])
    }

    proptest! {
        #[test]
        fn power_adds_exponents(a in any_perm(), j in 0u64..30, k in 0u64..30) {
            prop_assert_eq!(a.power(j).compose(&a.power(k)), a.power(j + k));
        }

        #[test]
        fn display_parse_roundtrip(a in any_perm()) {
            prop_assert_eq!(a.to_string().parse::<Permutation>().unwrap(), a);
        }
    }
}

//! Sets of items as 64-bit masks.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest item count a [`Bundle`] can address.
pub const MAX_ITEMS: usize = 64;

/// A subset of the items `{0, .., m-1}`, bit `g` set iff item `g` is a member.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bundle(u64);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub fn from_bits(bits: u64) -> Self {
        Bundle(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// All items `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_ITEMS, "at most {MAX_ITEMS} items");
        if m == MAX_ITEMS {
            Bundle(u64::MAX)
        } else {
            Bundle((1u64 << m) - 1)
        }
    }

    pub fn singleton(item: usize) -> Self {
        assert!(item < MAX_ITEMS);
        Bundle(1u64 << item)
    }

    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> Self {
        items.into_iter().fold(Bundle::EMPTY, |b, g| b.with(g))
    }

    pub fn contains(self, item: usize) -> bool {
        item < MAX_ITEMS && self.0 >> item & 1 == 1
    }

    /// `Z + g`
    pub fn with(self, item: usize) -> Self {
        Bundle(self.0 | Bundle::singleton(item).0)
    }

    /// `Z - g`
    pub fn without(self, item: usize) -> Self {
        Bundle(self.0 & !Bundle::singleton(item).0)
    }

    pub fn union(self, other: Bundle) -> Self {
        Bundle(self.0 | other.0)
    }

    pub fn intersection(self, other: Bundle) -> Self {
        Bundle(self.0 & other.0)
    }

    pub fn difference(self, other: Bundle) -> Self {
        Bundle(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Bundle) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Largest member index plus one, or zero for the empty bundle.
    pub fn span(self) -> usize {
        MAX_ITEMS - self.0.leading_zeros() as usize
    }

    /// Members in increasing order.
    pub fn items(self) -> Items {
        Items(self.0)
    }

    /// Every subset of `self` (including the empty set and `self`), in
    /// increasing mask order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            of: self.0,
            next: Some(0),
        }
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.items()).finish()
    }
}

impl FromIterator<usize> for Bundle {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Bundle::from_items(iter)
    }
}

pub struct Items(u64);

impl Iterator for Items {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let g = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(g)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Items {}

pub struct Subsets {
    of: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = Bundle;

    fn next(&mut self) -> Option<Bundle> {
        let current = self.next?;
        self.next = if current == self.of {
            None
        } else {
            // standard submask successor: increment within the bits of `of`
            Some((current | !self.of).wrapping_add(1) & self.of)
        };
        Some(Bundle(current))
    }
}

impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.items())
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(deserializer)?;
        if let Some(bad) = items.iter().find(|&&g| g >= MAX_ITEMS) {
            return Err(D::Error::custom(format!("item index {bad} out of range")));
        }
        Ok(Bundle::from_items(items))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn subsets_enumerates_all_submasks() {
        let b = Bundle::from_items([1, 3, 4]);
        let subs: Vec<_> = b.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|s| s.is_subset(b)));
        assert_eq!(subs[0], Bundle::EMPTY);
        assert_eq!(*subs.last().unwrap(), b);
        assert_eq!(Bundle::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn items_in_order() {
        let b = Bundle::from_items([5, 0, 2]);
        assert_eq!(b.items().collect::<Vec<_>>(), vec![0, 2, 5]);
        assert_eq!(b.len(), 3);
        assert_eq!(b.span(), 6);
        assert_eq!(Bundle::full(3), Bundle::from_items([0, 1, 2]));
        assert_eq!(Bundle::full(64).len(), 64);
    }

    #[test]
    fn json_is_item_list() {
        let b = Bundle::from_items([2, 0]);
        assert_eq!(serde_json::to_string(&b).unwrap(), "[0,2]");
        let back: Bundle = serde_json::from_str("[2,0]").unwrap();
        assert_eq!(back, b);
        assert!(serde_json::from_str::<Bundle>("[64]").is_err());
    }

    proptest! {
        #[test]
        fn remove_then_add_restores(bits in any::<u64>(), pick in 0usize..64) {
            let z = Bundle::from_bits(bits);
            if let Some(g) = z.items().nth(pick % z.len().max(1)) {
                prop_assert_eq!(z.without(g).with(g), z);
                prop_assert!(!z.without(g).contains(g));
            }
        }

        #[test]
        fn difference_and_union_partition(a in any::<u64>(), b in any::<u64>()) {
            let (a, b) = (Bundle::from_bits(a), Bundle::from_bits(b));
            prop_assert!(a.difference(b).is_disjoint(b));
            prop_assert_eq!(a.difference(b).union(a.intersection(b)), a);
        }
    }
}

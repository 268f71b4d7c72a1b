//! Allocations and Nash welfare.
//!
//! Nash welfare is the geometric mean of the agents' values. It is never
//! materialized here: every comparison is made on the product of values
//! (its `n`-th power), which preserves order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, MAX_ITEMS};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::ratio::Ratio;

/// `n` pairwise-disjoint bundles over `m` items; possibly partial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Allocation {
    m: usize,
    bundles: Vec<Bundle>,
}

impl Allocation {
    pub fn new(m: usize, bundles: Vec<Bundle>) -> Result<Self> {
        if m > MAX_ITEMS {
            return Err(Error::Malformed(format!("m = {m} exceeds {MAX_ITEMS}")));
        }
        let items = Bundle::full(m);
        let mut seen = Bundle::EMPTY;
        for (agent, &b) in bundles.iter().enumerate() {
            if !b.is_subset(items) {
                return Err(Error::Malformed(format!(
                    "bundle of agent {agent} has items outside 0..{m}"
                )));
            }
            if !b.is_disjoint(seen) {
                return Err(Error::Malformed(format!(
                    "bundle of agent {agent} overlaps an earlier bundle on {:?}",
                    b.intersection(seen)
                )));
            }
            seen = seen.union(b);
        }
        Ok(Allocation { m, bundles })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Allocation {
            m,
            bundles: vec![Bundle::EMPTY; n],
        }
    }

    /// Allocation from an item → agent vector.
    pub fn from_assignment(n: usize, assignment: &[usize]) -> Self {
        let mut bundles = vec![Bundle::EMPTY; n];
        for (item, &agent) in assignment.iter().enumerate() {
            if agent < n {
                bundles[agent] = bundles[agent].with(item);
            }
        }
        Allocation {
            m: assignment.len(),
            bundles,
        }
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.bundles
    }

    pub fn bundle(&self, agent: usize) -> Bundle {
        self.bundles[agent]
    }

    pub fn allocated(&self) -> Bundle {
        self.bundles.iter().fold(Bundle::EMPTY, |acc, &b| acc.union(b))
    }

    pub fn unallocated(&self) -> Bundle {
        Bundle::full(self.m).difference(self.allocated())
    }

    pub fn is_complete(&self) -> bool {
        self.unallocated().is_empty()
    }

    /// Checks agent and item counts against `instance`.
    pub fn check_fits(&self, instance: &Instance) -> Result<()> {
        if self.n() != instance.n() || self.m != instance.m() {
            return Err(Error::Malformed(format!(
                "allocation is {}x{} but the instance has n = {}, m = {}",
                self.n(),
                self.m,
                instance.n(),
                instance.m()
            )));
        }
        Ok(())
    }

    pub fn values(&self, instance: &Instance) -> Vec<Ratio> {
        self.bundles
            .iter()
            .enumerate()
            .map(|(i, &b)| instance.value(i, b))
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: AllocationFile = serde_json::from_str(text)?;
        Allocation::new(file.m, file.bundles)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Allocation::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// `{"m": 3, "bundles": [[0, 1], [2]]}`
#[derive(Deserialize)]
struct AllocationFile {
    m: usize,
    bundles: Vec<Bundle>,
}

/// `∏_i v_i(X_i)`, the `n`-th power of the Nash welfare.
pub fn nash_product(instance: &Instance, allocation: &Allocation) -> Ratio {
    allocation.values(instance).into_iter().product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GeneratorSpec};
    use proptest::prelude::*;

    fn alloc(m: usize, bundles: &[&[usize]]) -> Allocation {
        Allocation::new(m, bundles.iter().map(|b| Bundle::from_items(b.iter().copied())).collect())
            .unwrap()
    }

    #[test]
    fn example1_products() {
        let inst = generate(&GeneratorSpec::Example1).unwrap();
        assert_eq!(nash_product(&inst, &alloc(3, &[&[0], &[1, 2]])), Ratio::from_integer(3));
        assert_eq!(nash_product(&inst, &alloc(3, &[&[0, 1], &[2]])), Ratio::from_integer(4));
        assert_eq!(nash_product(&inst, &Allocation::empty(2, 3)), Ratio::zero());
    }

    #[test]
    fn overlapping_bundles_rejected() {
        let bad = Allocation::new(3, vec![Bundle::from_items([0, 1]), Bundle::from_items([1])]);
        assert!(matches!(bad, Err(Error::Malformed(_))));
        let outside = Allocation::new(2, vec![Bundle::from_items([2])]);
        assert!(outside.is_err());
    }

    #[test]
    fn completeness() {
        let partial = alloc(3, &[&[0], &[2]]);
        assert!(!partial.is_complete());
        assert_eq!(partial.unallocated(), Bundle::singleton(1));
        assert!(alloc(3, &[&[0, 1], &[2]]).is_complete());
        assert!(Allocation::empty(2, 0).is_complete());
    }

    #[test]
    fn json_format() {
        let a = Allocation::from_json_str(r#"{"m":3,"bundles":[[0,1],[2]]}"#).unwrap();
        assert_eq!(a, alloc(3, &[&[0, 1], &[2]]));
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"m":3,"bundles":[[0,1],[2]]}"#);
        assert!(Allocation::from_json_str(r#"{"m":3,"bundles":[[0,1],[1]]}"#).is_err());
    }

    proptest! {
        #[test]
        fn additive_value_splits_over_disjoint_sets(
            values in proptest::collection::vec(0i64..50, 8),
            a in 0u64..256, b in 0u64..256,
        ) {
            let inst = Instance::additive_from_integers(&[values]).unwrap();
            let s = Bundle::from_bits(a);
            let t = Bundle::from_bits(b).difference(s);
            prop_assert_eq!(inst.value(0, s.union(t)), inst.value(0, s) + inst.value(0, t));
        }

        #[test]
        fn product_is_permutation_covariant(
            rows in proptest::collection::vec(proptest::collection::vec(0i64..10, 5), 3),
            assignment in proptest::collection::vec(0usize..4, 5),
            rotate in 1usize..3,
        ) {
            let inst = Instance::additive_from_integers(&rows).unwrap();
            let x = Allocation::from_assignment(3, &assignment);
            let perm: Vec<usize> = (0..3).map(|i| (i + rotate) % 3).collect();
            let permuted_rows: Vec<Vec<i64>> = perm.iter().map(|&p| rows[p].clone()).collect();
            let permuted_inst = Instance::additive_from_integers(&permuted_rows).unwrap();
            let permuted_x = Allocation::new(5, perm.iter().map(|&p| x.bundle(p)).collect()).unwrap();
            prop_assert_eq!(nash_product(&inst, &x), nash_product(&permuted_inst, &permuted_x));
        }
    }
}

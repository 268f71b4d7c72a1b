//! Exhaustive engines: maximum Nash welfare, the best Nash product among
//! α-EFX partial allocations, and certificates for the impossibility
//! families.

use std::cell::RefCell;
use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::allocation::Allocation;
use crate::bundle::Bundle;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::instances::{generate_with_caps, GeneratorSpec};
use crate::ratio::Ratio;
use crate::verify::alpha_efx_violation;

/// `(agents with positive value, product of the positive values)`, compared
/// lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct WelfareKey {
    positive: usize,
    product: Ratio,
}

impl WelfareKey {
    fn of<'a>(values: impl IntoIterator<Item = &'a Ratio>) -> Self {
        let mut key = WelfareKey {
            positive: 0,
            product: Ratio::one(),
        };
        for v in values.into_iter().filter(|v| v.is_positive()) {
            key.positive += 1;
            key.product *= v;
        }
        key
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MnwResult {
    pub allocation: Allocation,
    /// `∏ v_i(X_i)`; zero unless the instance is NW-positive.
    pub product: Ratio,
    pub positive_agent_count: usize,
    /// Number of complete allocations attaining the optimum.
    pub ties: u64,
    /// Every agent gets positive value.
    pub nw_positive: bool,
}

impl MnwResult {
    fn new(instance: &Instance, assignment: &[usize], ties: u64) -> Self {
        let allocation = Allocation::from_assignment(instance.n(), assignment);
        let values = allocation.values(instance);
        let positive_agent_count = values.iter().filter(|v| v.is_positive()).count();
        MnwResult {
            product: values.into_iter().product(),
            allocation,
            positive_agent_count,
            ties,
            nw_positive: positive_agent_count == instance.n(),
        }
    }
}

/// Shared depth-first walk over item → agent assignments in lexicographic
/// order. `choices` is `n` for complete allocations and `n + 1` when the
/// extra label means "unallocated".
struct Walk<'a> {
    instance: &'a Instance,
    choices: usize,
    assignment: Vec<usize>,
    bundles: Vec<Bundle>,
}

impl<'a> Walk<'a> {
    fn new(instance: &'a Instance, choices: usize) -> Self {
        Walk {
            instance,
            choices,
            assignment: vec![0; instance.m()],
            bundles: vec![Bundle::EMPTY; instance.n()],
        }
    }

    fn values(&self) -> Vec<Ratio> {
        self.bundles
            .iter()
            .enumerate()
            .map(|(i, &b)| self.instance.value(i, b))
            .collect()
    }

    /// Values each agent could still reach: `v_i(current ∪ remaining)`.
    /// Valid for any monotone valuation.
    fn optimistic_values(&self, next: usize) -> Vec<Ratio> {
        let remaining = self.instance.items().difference(Bundle::full(next));
        self.bundles
            .iter()
            .enumerate()
            .map(|(i, &b)| self.instance.value(i, b.union(remaining)))
            .collect()
    }

    /// Visits assignments; `prune(walk, next)` returning true skips the subtree.
    fn run(
        &mut self,
        next: usize,
        prune: &mut dyn FnMut(&Walk, usize) -> bool,
        leaf: &mut dyn FnMut(&Walk),
    ) {
        if next == self.instance.m() {
            leaf(self);
            return;
        }
        if prune(self, next) {
            return;
        }
        for agent in 0..self.choices {
            self.assignment[next] = agent;
            if agent < self.bundles.len() {
                self.bundles[agent] = self.bundles[agent].with(next);
            }
            self.run(next + 1, prune, leaf);
            if agent < self.bundles.len() {
                self.bundles[agent] = self.bundles[agent].without(next);
            }
        }
    }
}

struct Best {
    key: WelfareKey,
    assignment: Vec<usize>,
    ties: u64,
}

fn record(best: &mut Option<Best>, key: WelfareKey, assignment: &[usize]) {
    match best.as_mut().map(|b| key.cmp(&b.key)) {
        None | Some(Ordering::Greater) => {
            *best = Some(Best {
                key,
                assignment: assignment.to_vec(),
                ties: 1,
            })
        }
        Some(Ordering::Equal) => best.as_mut().expect("present").ties += 1,
        Some(Ordering::Less) => {}
    }
}

/// Complete allocation maximizing `(positive-agent count, product of
/// positive values)`, by branch and bound. Ties go to the lexicographically
/// smallest item → agent vector.
pub fn exact_mnw(instance: &Instance, caps: &Caps) -> Result<MnwResult> {
    caps.check_power("maximum Nash welfare enumeration", instance.n() as u64, instance.m())?;
    let best = RefCell::new(None::<Best>);
    Walk::new(instance, instance.n()).run(
        0,
        &mut |w, next| match best.borrow().as_ref() {
            // only strictly worse subtrees are cut so ties stay countable
            Some(b) => WelfareKey::of(&w.optimistic_values(next)) < b.key,
            None => false,
        },
        &mut |w| record(&mut best.borrow_mut(), WelfareKey::of(&w.values()), &w.assignment),
    );
    let best = best.into_inner().expect("at least one complete allocation");
    Ok(MnwResult::new(instance, &best.assignment, best.ties))
}

/// [`exact_mnw`] by plain enumeration of all `n^m` assignments.
pub fn exact_mnw_enumerate(instance: &Instance, caps: &Caps) -> Result<MnwResult> {
    caps.check_power("maximum Nash welfare enumeration", instance.n() as u64, instance.m())?;
    let mut best: Option<Best> = None;
    Walk::new(instance, instance.n()).run(0, &mut |_, _| false, &mut |w| {
        record(&mut best, WelfareKey::of(&w.values()), &w.assignment)
    });
    let best = best.expect("at least one complete allocation");
    Ok(MnwResult::new(instance, &best.assignment, best.ties))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfxOptimum {
    pub alpha: Ratio,
    /// Largest `∏ v_i(Z_i)` over α-EFX partial allocations.
    pub product: Ratio,
    /// Lexicographically first partial allocation attaining `product`.
    pub allocation: Allocation,
}

/// Best Nash product over all `(n+1)^m` partial allocations that are α-EFX.
pub fn best_alpha_efx_product(instance: &Instance, alpha: &Ratio, caps: &Caps) -> Result<EfxOptimum> {
    let n = instance.n();
    caps.check_power("alpha-EFX partial allocation enumeration", n as u64 + 1, instance.m())?;
    let best = RefCell::new(None::<(Ratio, Vec<usize>)>);
    Walk::new(instance, n + 1).run(
        0,
        &mut |w, next| match best.borrow().as_ref() {
            Some((product, _)) => w.optimistic_values(next).into_iter().product::<Ratio>() < *product,
            None => false,
        },
        &mut |w| {
            let product: Ratio = w.values().into_iter().product();
            let mut best = best.borrow_mut();
            if best.as_ref().is_some_and(|(b, _)| product <= *b) {
                return;
            }
            if alpha_efx_violation(instance, &w.bundles, alpha).is_none() {
                *best = Some((product, w.assignment.clone()));
            }
        },
    );
    // the all-unallocated assignment is always α-EFX
    let (product, assignment) = best.into_inner().expect("empty allocation qualifies");
    Ok(EfxOptimum {
        alpha: alpha.clone(),
        product,
        allocation: Allocation::from_assignment(n, &assignment),
    })
}

/// Complete allocation with the smallest positive Nash product, or `None`
/// when no complete allocation gives every agent positive value.
pub fn worst_positive_allocation(instance: &Instance, caps: &Caps) -> Result<Option<(Allocation, Ratio)>> {
    caps.check_power("complete allocation enumeration", instance.n() as u64, instance.m())?;
    let mut worst: Option<(Ratio, Vec<usize>)> = None;
    Walk::new(instance, instance.n()).run(0, &mut |_, _| false, &mut |w| {
        let values = w.values();
        if values.iter().all(Ratio::is_positive) {
            let product: Ratio = values.into_iter().product();
            if worst.as_ref().is_none_or(|(p, _)| product < *p) {
                worst = Some((product, w.assignment.clone()));
            }
        }
    });
    Ok(worst.map(|(p, a)| (Allocation::from_assignment(instance.n(), &a), p)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImpossibilityFamily {
    Theorem4 { alpha: Ratio, epsilon: Ratio, n: usize },
    Theorem5 {
        #[serde(rename = "N", alias = "big_n")]
        big_n: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImpossibilityCertificate {
    pub family: ImpossibilityFamily,
    /// The EFX factor tested: `alpha` for theorem4, `2/√N` for theorem5.
    pub alpha: Ratio,
    pub mnw: MnwResult,
    pub best_efx: EfxOptimum,
    /// `best_efx.product / mnw.product`; no α-EFX allocation is β-MNW once
    /// `β^n` exceeds it.
    pub product_ratio: Ratio,
    /// Closed forms from the construction: theorem4 predicts both products
    /// exactly; theorem5 predicts the MNW product and an upper bound on the
    /// best α-EFX product.
    pub predicted_mnw_product: Ratio,
    pub predicted_efx_product: Ratio,
    /// Whether the brute-force values agree with the closed forms.
    pub matches_prediction: bool,
}

pub fn certify_impossibility(family: &ImpossibilityFamily, caps: &Caps) -> Result<ImpossibilityCertificate> {
    let (spec, alpha, predicted_mnw, predicted_efx) = match family {
        ImpossibilityFamily::Theorem4 { alpha, epsilon, n } => {
            let a = alpha.recip() + epsilon;
            let k = n.saturating_sub(1) as u32;
            (
                GeneratorSpec::Theorem4 {
                    alpha: alpha.clone(),
                    epsilon: epsilon.clone(),
                    n: *n,
                },
                alpha.clone(),
                (Ratio::one() + &a).pow(k),
                a.pow(k),
            )
        }
        ImpossibilityFamily::Theorem5 { big_n } => {
            let spec = GeneratorSpec::Theorem5 { big_n: *big_n };
            let instance = generate_with_caps(&spec, caps)?;
            // v(3) = √N
            let root = instance.value(0, Bundle::full(3));
            (spec, Ratio::from_integer(2) / &root, Ratio::from(*big_n), root)
        }
    };
    let instance = generate_with_caps(&spec, caps)?;
    let mnw = exact_mnw(&instance, caps)?;
    let best_efx = best_alpha_efx_product(&instance, &alpha, caps)?;
    if mnw.product.is_zero() {
        return Err(Error::Precondition(format!("{spec} has no NW-positive allocation")));
    }
    let matches_prediction = match family {
        ImpossibilityFamily::Theorem4 { .. } => {
            mnw.product == predicted_mnw && best_efx.product == predicted_efx
        }
        ImpossibilityFamily::Theorem5 { .. } => {
            mnw.product == predicted_mnw && best_efx.product <= predicted_efx
        }
    };
    Ok(ImpossibilityCertificate {
        family: family.clone(),
        alpha,
        product_ratio: &best_efx.product / &mnw.product,
        mnw,
        best_efx,
        predicted_mnw_product: predicted_mnw,
        predicted_efx_product: predicted_efx,
        matches_prediction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::nash_product;
    use crate::instances::generate;
    use crate::verify::{is_alpha_efx, is_ef1};
    use proptest::prelude::*;

    fn caps() -> Caps {
        Caps::default()
    }

    fn theorem4(alpha: Ratio, n: usize) -> Instance {
        generate(&GeneratorSpec::Theorem4 {
            alpha,
            epsilon: Ratio::new(1, 100),
            n,
        })
        .unwrap()
    }

    #[test]
    fn example1_mnw() {
        let inst = generate(&GeneratorSpec::Example1).unwrap();
        let r = exact_mnw(&inst, &caps()).unwrap();
        assert_eq!(r.product, Ratio::from_integer(4));
        assert_eq!(r.allocation.bundles(), &[Bundle::from_items([0, 1]), Bundle::from_items([2])]);
        assert!(r.nw_positive);
        // ({a,b},{c}) and ({c},{a,b})
        assert_eq!(r.ties, 2);
        assert_eq!(r, exact_mnw_enumerate(&inst, &caps()).unwrap());
    }

    #[test]
    fn no_items() {
        let inst = Instance::additive_from_integers(&[vec![], vec![]]).unwrap();
        let r = exact_mnw(&inst, &caps()).unwrap();
        assert_eq!(r.product, Ratio::zero());
        assert_eq!(r.allocation, Allocation::empty(2, 0));
        assert!(!r.nw_positive);
    }

    #[test]
    fn theorem4_mnw_and_best_efx() {
        let inst = theorem4(Ratio::new(1, 2), 2);
        let r = exact_mnw(&inst, &caps()).unwrap();
        assert_eq!(r.product, Ratio::new(301, 100));
        assert_eq!(r.allocation.bundles(), &[Bundle::from_items([0, 1]), Bundle::from_items([2])]);
        let best = best_alpha_efx_product(&inst, &Ratio::new(1, 2), &caps()).unwrap();
        assert_eq!(best.product, Ratio::new(201, 100));
        assert!(is_alpha_efx(&inst, &best.allocation, &Ratio::new(1, 2)).passed());
        assert_eq!(nash_product(&inst, &best.allocation), best.product);
    }

    #[test]
    fn alpha_zero_best_equals_mnw() {
        let inst = theorem4(Ratio::new(1, 2), 3);
        let best = best_alpha_efx_product(&inst, &Ratio::zero(), &caps()).unwrap();
        assert_eq!(best.product, exact_mnw(&inst, &caps()).unwrap().product);
    }

    #[test]
    fn capacity_error() {
        let inst = Instance::additive_from_integers(&[vec![1; 10], vec![1; 10]]).unwrap();
        let tiny = Caps {
            enumeration: 1000,
            ..Caps::default()
        };
        assert!(matches!(exact_mnw(&inst, &tiny), Err(Error::Capacity { .. })));
        assert!(matches!(
            best_alpha_efx_product(&inst, &Ratio::one(), &tiny),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn certificates() {
        let c = certify_impossibility(
            &ImpossibilityFamily::Theorem4 {
                alpha: Ratio::new(1, 2),
                epsilon: Ratio::new(1, 100),
                n: 2,
            },
            &caps(),
        )
        .unwrap();
        assert_eq!(c.product_ratio, Ratio::new(201, 301));
        assert!(c.matches_prediction);

        let c = certify_impossibility(
            &ImpossibilityFamily::Theorem4 {
                alpha: Ratio::one(),
                epsilon: Ratio::new(1, 100),
                n: 2,
            },
            &caps(),
        )
        .unwrap();
        assert_eq!(c.product_ratio, Ratio::new(101, 201));

        let c = certify_impossibility(&ImpossibilityFamily::Theorem5 { big_n: 16 }, &caps()).unwrap();
        assert_eq!(c.mnw.product, Ratio::from_integer(16));
        assert_eq!(c.best_efx.product, Ratio::from_integer(4));
        assert_eq!(c.alpha, Ratio::new(1, 2));
        assert!(c.matches_prediction);
    }

    #[test]
    fn worst_positive() {
        let inst = generate(&GeneratorSpec::Example1).unwrap();
        let (alloc, product) = worst_positive_allocation(&inst, &caps()).unwrap().unwrap();
        assert_eq!(product, Ratio::from_integer(3));
        assert_eq!(nash_product(&inst, &alloc), product);
        let zero = Instance::additive_from_integers(&[vec![1, 1], vec![0, 0]]).unwrap();
        assert!(worst_positive_allocation(&zero, &caps()).unwrap().is_none());
    }

    fn random_additive() -> impl Strategy<Value = Instance> {
        (2usize..4, 1usize..7).prop_flat_map(|(n, m)| {
            proptest::collection::vec(proptest::collection::vec(0i64..=10, m), n)
                .prop_map(|rows| Instance::additive_from_integers(&rows).unwrap())
        })
    }

    proptest! {
        #[test]
        fn branch_and_bound_matches_enumeration(inst in random_additive()) {
            prop_assert_eq!(exact_mnw(&inst, &caps()).unwrap(), exact_mnw_enumerate(&inst, &caps()).unwrap());
        }

        #[test]
        fn mnw_is_ef1_when_positive(inst in random_additive()) {
            let r = exact_mnw(&inst, &caps()).unwrap();
            if r.nw_positive {
                prop_assert!(is_ef1(&inst, &r.allocation).passed());
            }
        }

        #[test]
        fn best_efx_non_increasing_in_alpha(inst in random_additive(), a in 0i64..=4, b in 0i64..=4) {
            prop_assume!(inst.m() <= 5);
            let (lo, hi) = (Ratio::new(a.min(b), 4), Ratio::new(a.max(b), 4));
            let p_lo = best_alpha_efx_product(&inst, &lo, &caps()).unwrap().product;
            let p_hi = best_alpha_efx_product(&inst, &hi, &caps()).unwrap().product;
            prop_assert!(p_hi <= p_lo);
        }
    }
}

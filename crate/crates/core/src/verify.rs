//! Exact checkers for envy relaxations, Nash-welfare fractions, separation
//! and the maximin-share family.
//!
//! Every checker returns a [`GuaranteeReport`]. A failing report carries a
//! [`Witness`] that [`GuaranteeReport::witness_is_violation`] can replay
//! against the defining inequality.

use serde::Serialize;

use crate::allocation::{nash_product, Allocation};
use crate::bundle::Bundle;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::ratio::Ratio;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Property {
    AlphaEfx { alpha: Ratio },
    Ef1,
    BetaMnw { beta: Ratio, reference_product: Ratio },
    GammaSeparation { gamma: Ratio },
    AlphaMms { alpha: Ratio },
    AlphaPmms { alpha: Ratio },
    AlphaGmms { alpha: Ratio },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `own_value < alpha * reduced_value`, with `reduced_value = v_i(X_j - g)`.
    Envy {
        envious: usize,
        owner: usize,
        item: usize,
        own_value: Ratio,
        reduced_value: Ratio,
    },
    /// Every single-item removal from `X_j` still leaves `own_value <
    /// best_reduced_value` (the smallest `v_i(X_j - g)`).
    Ef1 {
        envious: usize,
        owner: usize,
        own_value: Ratio,
        best_reduced_value: Ratio,
    },
    /// `gamma * own_value < item_value` for an unallocated `item`.
    Separation {
        agent: usize,
        item: usize,
        own_value: Ratio,
        item_value: Ratio,
    },
    /// `product * q^n < p^n * reference_product` for `beta = p/q`.
    Welfare { product: Ratio, required: Ratio },
    /// `own_value < alpha * share`, share computed over `group`'s bundles.
    Share {
        agent: usize,
        group: Vec<usize>,
        own_value: Ratio,
        share: Ratio,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GuaranteeReport {
    pub property: Property,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
}

impl GuaranteeReport {
    fn from_witness(property: Property, witness: Option<Witness>) -> Self {
        GuaranteeReport {
            verdict: if witness.is_some() {
                Verdict::Fail
            } else {
                Verdict::Pass
            },
            property,
            witness,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Recomputes the witness from scratch and confirms it breaks the
    /// property. `Ok(false)` for passing reports.
    pub fn witness_is_violation(&self, instance: &Instance, allocation: &Allocation) -> Result<bool> {
        let Some(witness) = &self.witness else {
            return Ok(false);
        };
        let x = allocation.bundles();
        Ok(match (&self.property, witness) {
            (
                Property::AlphaEfx { alpha },
                Witness::Envy {
                    envious,
                    owner,
                    item,
                    ..
                },
            ) => {
                x[*owner].contains(*item)
                    && instance.value(*envious, x[*envious])
                        < alpha * instance.value(*envious, x[*owner].without(*item))
            }
            (Property::Ef1, Witness::Ef1 { envious, owner, .. }) => {
                let own = instance.value(*envious, x[*envious]);
                !x[*owner].is_empty()
                    && x[*owner]
                        .items()
                        .all(|g| own < instance.value(*envious, x[*owner].without(g)))
            }
            (Property::GammaSeparation { gamma }, Witness::Separation { agent, item, .. }) => {
                allocation.unallocated().contains(*item)
                    && gamma * instance.value(*agent, x[*agent])
                        < instance.value(*agent, Bundle::singleton(*item))
            }
            (
                Property::BetaMnw {
                    beta,
                    reference_product,
                },
                Witness::Welfare { .. },
            ) => {
                let n = instance.n() as u32;
                nash_product(instance, allocation) < beta.pow(n) * reference_product
            }
            (Property::AlphaMms { alpha }, Witness::Share { agent, .. }) => {
                let share = mms_share(instance, *agent, instance.n(), instance.items(), &Caps::default())?;
                instance.value(*agent, x[*agent]) < alpha * share
            }
            (
                Property::AlphaPmms { alpha } | Property::AlphaGmms { alpha },
                Witness::Share { agent, group, .. },
            ) => {
                let pool = group.iter().fold(Bundle::EMPTY, |acc, &j| acc.union(x[j]));
                let share = mms_share(instance, *agent, group.len(), pool, &Caps::default())?;
                group.contains(agent) && instance.value(*agent, x[*agent]) < alpha * share
            }
            _ => false,
        })
    }
}

/// `alpha^2 + alpha <= 1`, i.e. `alpha <= φ - 1` for non-negative `alpha`.
pub fn within_golden_threshold(alpha: &Ratio) -> bool {
    alpha.pow(2) + alpha <= Ratio::one()
}

/// First `(i, j, g)` with `v_i(X_i) < alpha * v_i(X_j - g)`, scanning `i`,
/// then `j`, then `g` in increasing order.
pub fn alpha_efx_violation(instance: &Instance, bundles: &[Bundle], alpha: &Ratio) -> Option<Witness> {
    let n = bundles.len();
    for i in 0..n {
        let own = instance.value(i, bundles[i]);
        for j in (0..n).filter(|&j| j != i) {
            for g in bundles[j].items() {
                let reduced = instance.value(i, bundles[j].without(g));
                if own < alpha * &reduced {
                    return Some(Witness::Envy {
                        envious: i,
                        owner: j,
                        item: g,
                        own_value: own,
                        reduced_value: reduced,
                    });
                }
            }
        }
    }
    None
}

/// Passes iff `v_i(X_i) >= alpha * v_i(X_j - g)` for all `i`, `j`, `g ∈ X_j`.
pub fn is_alpha_efx(instance: &Instance, allocation: &Allocation, alpha: &Ratio) -> GuaranteeReport {
    GuaranteeReport::from_witness(
        Property::AlphaEfx {
            alpha: alpha.clone(),
        },
        alpha_efx_violation(instance, allocation.bundles(), alpha),
    )
}

pub fn is_ef1(instance: &Instance, allocation: &Allocation) -> GuaranteeReport {
    let x = allocation.bundles();
    let mut witness = None;
    'outer: for i in 0..x.len() {
        let own = instance.value(i, x[i]);
        for j in (0..x.len()).filter(|&j| j != i && !x[j].is_empty()) {
            let best = x[j]
                .items()
                .map(|g| instance.value(i, x[j].without(g)))
                .min()
                .expect("non-empty bundle");
            if own < best {
                witness = Some(Witness::Ef1 {
                    envious: i,
                    owner: j,
                    own_value: own,
                    best_reduced_value: best,
                });
                break 'outer;
            }
        }
    }
    GuaranteeReport::from_witness(Property::Ef1, witness)
}

/// Passes iff `gamma * v_i(Z_i) >= v_i({x})` for every agent and unallocated item.
pub fn is_gamma_separated(instance: &Instance, allocation: &Allocation, gamma: &Ratio) -> GuaranteeReport {
    let unallocated = allocation.unallocated();
    let mut witness = None;
    'outer: for i in 0..allocation.n() {
        let own = instance.value(i, allocation.bundle(i));
        let scaled = gamma * &own;
        for x in unallocated.items() {
            let item_value = instance.value(i, Bundle::singleton(x));
            if scaled < item_value {
                witness = Some(Witness::Separation {
                    agent: i,
                    item: x,
                    own_value: own,
                    item_value,
                });
                break 'outer;
            }
        }
    }
    GuaranteeReport::from_witness(
        Property::GammaSeparation {
            gamma: gamma.clone(),
        },
        witness,
    )
}

/// `NW(Z) >= beta * NW(X*)` in product form: `∏ v_i(Z_i) >= beta^n * reference_product`.
pub fn is_beta_mnw(
    instance: &Instance,
    allocation: &Allocation,
    beta: &Ratio,
    reference_product: &Ratio,
) -> Result<GuaranteeReport> {
    if !beta.is_positive() {
        return Err(Error::Precondition(format!("beta must be positive, got {beta}")));
    }
    let product = nash_product(instance, allocation);
    let required = beta.pow(instance.n() as u32) * reference_product;
    let witness = (product < required).then(|| Witness::Welfare {
        product: product.clone(),
        required,
    });
    Ok(GuaranteeReport::from_witness(
        Property::BetaMnw {
            beta: beta.clone(),
            reference_product: reference_product.clone(),
        },
        witness,
    ))
}

/// Maximin share `μ_agent(k, pool)`: the best over all partitions of `pool`
/// into `k` parts of the agent's least valued part.
///
/// Enumerates canonical labelings (each new part opened by the smallest
/// unlabeled item), so every unordered partition is visited once.
pub fn mms_share(instance: &Instance, agent: usize, k: usize, pool: Bundle, caps: &Caps) -> Result<Ratio> {
    if k == 0 {
        return Err(Error::Precondition("maximin share needs k >= 1".into()));
    }
    if k == 1 {
        return Ok(instance.value(agent, pool));
    }
    let items: Vec<usize> = pool.items().collect();
    if items.len() < k {
        // some part is empty
        return Ok(Ratio::zero());
    }
    caps.check_power("maximin share partitions", k as u64, items.len() - 1)?;

    struct Search<'a> {
        instance: &'a Instance,
        agent: usize,
        k: usize,
        items: &'a [usize],
        parts: Vec<Bundle>,
        best: Option<Ratio>,
    }

    impl Search<'_> {
        fn run(&mut self, next: usize, used: usize) {
            let remaining = self.items.len() - next;
            if remaining < self.k - used {
                return;
            }
            if next == self.items.len() {
                let worst = self
                    .parts
                    .iter()
                    .map(|&p| self.instance.value(self.agent, p))
                    .min()
                    .expect("k >= 2");
                if self.best.as_ref().is_none_or(|b| worst > *b) {
                    self.best = Some(worst);
                }
                return;
            }
            let g = self.items[next];
            let limit = (used + 1).min(self.k);
            for part in 0..limit {
                self.parts[part] = self.parts[part].with(g);
                self.run(next + 1, used.max(part + 1));
                self.parts[part] = self.parts[part].without(g);
            }
        }
    }

    let mut search = Search {
        instance,
        agent,
        k,
        items: &items,
        parts: vec![Bundle::EMPTY; k],
        best: None,
    };
    search.run(0, 0);
    Ok(search.best.unwrap_or_else(Ratio::zero))
}

fn share_check(
    instance: &Instance,
    allocation: &Allocation,
    alpha: &Ratio,
    agent: usize,
    group: &[usize],
    pool: Bundle,
    caps: &Caps,
) -> Result<Option<Witness>> {
    let share = mms_share(instance, agent, group.len(), pool, caps)?;
    let own = instance.value(agent, allocation.bundle(agent));
    Ok((own < alpha * &share).then(|| Witness::Share {
        agent,
        group: group.to_vec(),
        own_value: own,
        share,
    }))
}

/// `v_i(X_i) >= alpha * μ_i(n, M)` for every agent, with `M` all items.
pub fn is_alpha_mms(instance: &Instance, allocation: &Allocation, alpha: &Ratio, caps: &Caps) -> Result<GuaranteeReport> {
    let everyone: Vec<usize> = (0..instance.n()).collect();
    let mut witness = None;
    for i in 0..instance.n() {
        witness = share_check(instance, allocation, alpha, i, &everyone, instance.items(), caps)?;
        if witness.is_some() {
            break;
        }
    }
    Ok(GuaranteeReport::from_witness(
        Property::AlphaMms {
            alpha: alpha.clone(),
        },
        witness,
    ))
}

/// `v_i(X_i) >= alpha * μ_i(2, X_i ∪ X_j)` for every ordered pair `i != j`.
pub fn is_alpha_pmms(instance: &Instance, allocation: &Allocation, alpha: &Ratio, caps: &Caps) -> Result<GuaranteeReport> {
    let x = allocation.bundles();
    let mut witness = None;
    'outer: for i in 0..x.len() {
        for j in (0..x.len()).filter(|&j| j != i) {
            witness = share_check(instance, allocation, alpha, i, &[i, j], x[i].union(x[j]), caps)?;
            if witness.is_some() {
                break 'outer;
            }
        }
    }
    Ok(GuaranteeReport::from_witness(
        Property::AlphaPmms {
            alpha: alpha.clone(),
        },
        witness,
    ))
}

/// For every non-empty group `I` and `i ∈ I`:
/// `v_i(X_i) >= alpha * μ_i(|I|, ∪_{j∈I} X_j)`. Limited to
/// `caps.gmms_agents` agents.
pub fn is_alpha_gmms(instance: &Instance, allocation: &Allocation, alpha: &Ratio, caps: &Caps) -> Result<GuaranteeReport> {
    let n = allocation.n();
    if n > caps.gmms_agents {
        return Err(Error::Capacity {
            what: "groupwise maximin share over all agent subsets".into(),
            needed: format!("2^{n}"),
            cap: 1 << caps.gmms_agents,
        });
    }
    let x = allocation.bundles();
    let mut witness = None;
    'outer: for mask in 1u64..(1 << n) {
        let group: Vec<usize> = Bundle::from_bits(mask).items().collect();
        let pool = group.iter().fold(Bundle::EMPTY, |acc, &j| acc.union(x[j]));
        for &i in &group {
            witness = share_check(instance, allocation, alpha, i, &group, pool, caps)?;
            if witness.is_some() {
                break 'outer;
            }
        }
    }
    Ok(GuaranteeReport::from_witness(
        Property::AlphaGmms {
            alpha: alpha.clone(),
        },
        witness,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GeneratorSpec};
    use proptest::prelude::*;

    fn example1() -> Instance {
        generate(&GeneratorSpec::Example1).unwrap()
    }

    fn alloc(m: usize, bundles: &[&[usize]]) -> Allocation {
        Allocation::new(m, bundles.iter().map(|b| Bundle::from_items(b.iter().copied())).collect())
            .unwrap()
    }

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    #[test]
    fn efx_fails_on_example1_split() {
        let inst = example1();
        let x = alloc(3, &[&[A], &[B, C]]);
        let report = is_alpha_efx(&inst, &x, &Ratio::one());
        assert!(!report.passed());
        match &report.witness {
            Some(Witness::Envy { envious, owner, item, .. }) => {
                assert_eq!((*envious, *owner, *item), (0, 1, B));
            }
            other => panic!("unexpected witness {other:?}"),
        }
        assert!(report.witness_is_violation(&inst, &x).unwrap());
        assert!(is_alpha_efx(&inst, &x, &Ratio::new(1, 2)).passed());
    }

    #[test]
    fn empty_allocation_is_efx() {
        let inst = example1();
        assert!(is_alpha_efx(&inst, &Allocation::empty(2, 3), &Ratio::one()).passed());
    }

    #[test]
    fn ef1_cases() {
        let inst = example1();
        assert!(is_ef1(&inst, &alloc(3, &[&[A], &[B, C]])).passed());
        let x = alloc(3, &[&[], &[A, B, C]]);
        let report = is_ef1(&inst, &x);
        assert!(!report.passed());
        assert!(report.witness_is_violation(&inst, &x).unwrap());
        let single = Instance::additive_from_integers(&[vec![1, 2, 3]]).unwrap();
        assert!(is_ef1(&single, &alloc(3, &[&[0]])).passed());
    }

    #[test]
    fn separation_cases() {
        let inst = example1();
        let one = Ratio::one();
        assert!(is_gamma_separated(&inst, &alloc(3, &[&[A, B], &[C]]), &Ratio::zero()).passed());
        assert!(is_gamma_separated(&inst, &alloc(3, &[&[A], &[C]]), &one).passed());
        let x = alloc(3, &[&[A], &[B]]);
        let report = is_gamma_separated(&inst, &x, &one);
        assert_eq!(
            report.witness,
            Some(Witness::Separation {
                agent: 0,
                item: C,
                own_value: Ratio::one(),
                item_value: Ratio::from_integer(2)
            })
        );
        assert!(report.witness_is_violation(&inst, &x).unwrap());
    }

    #[test]
    fn beta_mnw_product_form() {
        let inst = example1();
        let x = alloc(3, &[&[A], &[B, C]]);
        let r = is_beta_mnw(&inst, &x, &Ratio::new(3, 4), &Ratio::from_integer(4)).unwrap();
        assert!(r.passed());
        assert!(is_beta_mnw(&inst, &x, &Ratio::zero(), &Ratio::from_integer(4)).is_err());

        let t4 = generate(&GeneratorSpec::Theorem4 {
            alpha: Ratio::new(1, 2),
            epsilon: Ratio::new(1, 100),
            n: 2,
        })
        .unwrap();
        // items a_1, b_1, b_2
        let z = alloc(3, &[&[0], &[2]]);
        let reference = Ratio::new(301, 100);
        assert!(is_beta_mnw(&t4, &z, &Ratio::new(2, 3), &reference).unwrap().passed());
        // beta^2 must exceed 201/301 to fail; (9/10)^2 = 81/100 does
        let fail = is_beta_mnw(&t4, &z, &Ratio::new(9, 10), &reference).unwrap();
        assert!(!fail.passed());
        assert!(fail.witness_is_violation(&t4, &z).unwrap());
    }

    #[test]
    fn mms_shares_on_example1() {
        let inst = example1();
        let caps = Caps::default();
        let all = inst.items();
        assert_eq!(mms_share(&inst, 0, 2, all, &caps).unwrap(), Ratio::from_integer(2));
        assert_eq!(mms_share(&inst, 0, 1, all, &caps).unwrap(), Ratio::from_integer(4));
        assert_eq!(mms_share(&inst, 0, 3, all, &caps).unwrap(), Ratio::one());
        assert_eq!(mms_share(&inst, 0, 4, all, &caps).unwrap(), Ratio::zero());
        assert!(mms_share(&inst, 0, 0, all, &caps).is_err());
        let tiny = Caps {
            enumeration: 2,
            ..Caps::default()
        };
        assert!(matches!(mms_share(&inst, 0, 2, all, &tiny), Err(Error::Capacity { .. })));
    }

    #[test]
    fn maximin_family_on_example1() {
        let inst = example1();
        let caps = Caps::default();
        let x = alloc(3, &[&[A, B], &[C]]);
        let one = Ratio::one();
        assert!(is_alpha_pmms(&inst, &x, &one, &caps).unwrap().passed());
        assert!(is_alpha_mms(&inst, &x, &one, &caps).unwrap().passed());
        assert!(is_alpha_gmms(&inst, &x, &one, &caps).unwrap().passed());

        let bad = alloc(3, &[&[A], &[B, C]]);
        let report = is_alpha_pmms(&inst, &bad, &one, &caps).unwrap();
        assert!(!report.passed());
        assert!(report.witness_is_violation(&inst, &bad).unwrap());
    }

    #[test]
    fn gmms_single_agent_is_equality() {
        let inst = Instance::additive_from_integers(&[vec![3, 1]]).unwrap();
        let x = alloc(2, &[&[0]]);
        assert!(is_alpha_gmms(&inst, &x, &Ratio::one(), &Caps::default()).unwrap().passed());
    }

    #[test]
    fn gmms_cap() {
        let inst = Instance::additive_from_integers(&vec![vec![1]; 7]).unwrap();
        let x = Allocation::empty(7, 1);
        assert!(matches!(
            is_alpha_gmms(&inst, &x, &Ratio::one(), &Caps::default()),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn golden_threshold() {
        assert!(within_golden_threshold(&Ratio::new(3, 5)));
        assert!(within_golden_threshold(&Ratio::new(618, 1000)));
        assert!(!within_golden_threshold(&Ratio::new(619, 1000)));
        assert!(!within_golden_threshold(&Ratio::new(2, 3)));
    }

    /// Brute force over labelings without symmetry pruning.
    fn naive_share(inst: &Instance, agent: usize, k: usize, pool: Bundle) -> Ratio {
        let items: Vec<usize> = pool.items().collect();
        let mut best = Ratio::zero();
        let total = (k as u64).pow(items.len() as u32);
        for code in 0..total {
            let mut parts = vec![Bundle::EMPTY; k];
            let mut c = code;
            for &g in &items {
                parts[(c % k as u64) as usize] = parts[(c % k as u64) as usize].with(g);
                c /= k as u64;
            }
            let worst = parts.iter().map(|&p| inst.value(agent, p)).min().unwrap();
            best = best.max(worst);
        }
        best
    }

    fn small_instance() -> impl Strategy<Value = (Instance, Vec<usize>)> {
        (2usize..4, 2usize..6).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0i64..8, m), n),
                proptest::collection::vec(0..=n, m),
            )
                .prop_map(|(rows, assign)| (Instance::additive_from_integers(&rows).unwrap(), assign))
        })
    }

    proptest! {
        #[test]
        fn efx_monotone_in_alpha((inst, assign) in small_instance(), a in 0i64..=10, b in 0i64..=10) {
            let x = Allocation::from_assignment(inst.n(), &assign);
            let (lo, hi) = (Ratio::new(a.min(b), 10), Ratio::new(a.max(b), 10));
            if is_alpha_efx(&inst, &x, &hi).passed() {
                prop_assert!(is_alpha_efx(&inst, &x, &lo).passed());
            }
        }

        #[test]
        fn efx_implies_ef1((inst, assign) in small_instance()) {
            let x = Allocation::from_assignment(inst.n(), &assign);
            if is_alpha_efx(&inst, &x, &Ratio::one()).passed() {
                prop_assert!(is_ef1(&inst, &x).passed());
            }
        }

        #[test]
        fn witnesses_replay((inst, assign) in small_instance(), a in 0i64..=10) {
            let x = Allocation::from_assignment(inst.n(), &assign);
            let alpha = Ratio::new(a, 10);
            let caps = Caps::default();
            let reports = [
                is_alpha_efx(&inst, &x, &alpha),
                is_ef1(&inst, &x),
                is_gamma_separated(&inst, &x, &alpha),
                is_alpha_pmms(&inst, &x, &alpha, &caps).unwrap(),
                is_alpha_gmms(&inst, &x, &alpha, &caps).unwrap(),
                is_alpha_mms(&inst, &x, &alpha, &caps).unwrap(),
            ];
            for r in reports {
                prop_assert_eq!(r.passed(), !r.witness_is_violation(&inst, &x).unwrap());
            }
        }

        #[test]
        fn gmms_implies_pmms_and_mms((inst, assign) in small_instance(), a in 1i64..=10) {
            let x = Allocation::from_assignment(inst.n(), &assign);
            let alpha = Ratio::new(a, 10);
            let caps = Caps::default();
            if is_alpha_gmms(&inst, &x, &alpha, &caps).unwrap().passed() {
                prop_assert!(is_alpha_pmms(&inst, &x, &alpha, &caps).unwrap().passed());
                // MMS uses all items as the pool; it coincides with the [n] group only
                // for complete allocations
                if x.is_complete() {
                    prop_assert!(is_alpha_mms(&inst, &x, &alpha, &caps).unwrap().passed());
                }
            }
        }

        #[test]
        fn share_matches_naive_and_obeys_bounds(
            values in proptest::collection::vec(0i64..10, 1..7),
            k in 1usize..4,
            mask in any::<u64>(),
        ) {
            let m = values.len();
            let inst = Instance::additive_from_integers(&[values]).unwrap();
            let pool = Bundle::from_bits(mask).intersection(inst.items());
            let caps = Caps::default();
            let share = mms_share(&inst, 0, k, pool, &caps).unwrap();
            prop_assert_eq!(&share, &naive_share(&inst, 0, k, pool));
            // μ(k, S) <= v(S)/k
            prop_assert!(&share * Ratio::from(k) <= inst.value(0, pool));
            // μ(k, S) <= μ(k-1, S - g)
            if k >= 2 {
                for g in pool.items() {
                    prop_assert!(share <= mms_share(&inst, 0, k - 1, pool.without(g), &caps).unwrap());
                }
            }
            let _ = m;
        }
    }
}

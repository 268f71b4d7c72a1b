//! Turning separated partial allocations into complete ones, and the
//! end-to-end pipelines for additive and subadditive instances.

use serde::Serialize;

use crate::additive::algorithm1;
use crate::allocation::Allocation;
use crate::bundle::Bundle;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::instance::{Instance, ValuationClass};
use crate::oracle::{exact_mnw, MnwResult};
use crate::ratio::Ratio;
use crate::subadditive::algorithm2;
use crate::verify::{
    is_alpha_efx, is_alpha_gmms, is_alpha_pmms, is_beta_mnw, is_ef1, within_golden_threshold, GuaranteeReport,
};

/// Edges `i → j` with `v_i(Y_j) > v_i(Y_i)`, as adjacency lists in
/// increasing order.
pub fn envy_graph(instance: &Instance, bundles: &[Bundle]) -> Vec<Vec<usize>> {
    let n = bundles.len();
    (0..n)
        .map(|i| {
            let own = instance.value(i, bundles[i]);
            (0..n)
                .filter(|&j| j != i && instance.value(i, bundles[j]) > own)
                .collect()
        })
        .collect()
}

/// First cycle met by depth-first search from the lowest-index node,
/// following edges in increasing order.
pub fn find_cycle(graph: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    fn visit(graph: &[Vec<usize>], u: usize, marks: &mut [Mark], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        marks[u] = Mark::Open;
        stack.push(u);
        for &v in &graph[u] {
            match marks[v] {
                Mark::Open => {
                    let start = stack.iter().position(|&w| w == v).expect("open nodes are on the stack");
                    return Some(stack[start..].to_vec());
                }
                Mark::New => {
                    if let Some(cycle) = visit(graph, v, marks, stack) {
                        return Some(cycle);
                    }
                }
                Mark::Done => {}
            }
        }
        stack.pop();
        marks[u] = Mark::Done;
        None
    }
    let mut marks = vec![Mark::New; graph.len()];
    for s in 0..graph.len() {
        if marks[s] == Mark::New {
            if let Some(cycle) = visit(graph, s, &mut marks, &mut Vec::new()) {
                return Some(cycle);
            }
        }
    }
    None
}

/// One item placement of the envy-cycles procedure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub item: usize,
    /// Cycles rotated before placing, each agent taking the next one's bundle.
    pub rotations: Vec<Vec<usize>>,
    pub recipient: usize,
    pub bundles: Vec<Bundle>,
}

fn check_pool(z: &Allocation, u: Bundle) -> Result<()> {
    if !u.is_subset(Bundle::full(z.m())) {
        return Err(Error::Precondition("unallocated items outside the item range".into()));
    }
    if !u.is_disjoint(z.allocated()) {
        return Err(Error::Precondition(format!(
            "items {:?} are both allocated and unallocated",
            u.intersection(z.allocated())
        )));
    }
    Ok(())
}

/// Gives each item of `u` to an unenvied agent, rotating envy cycles away
/// first. Ties: cycles by [`find_cycle`], recipient is the lowest-index
/// unenvied agent.
pub fn envy_cycles(instance: &Instance, z: &Allocation, u: Bundle) -> Result<(Allocation, Vec<Placement>)> {
    z.check_fits(instance)?;
    check_pool(z, u)?;
    let mut y = z.bundles().to_vec();
    let mut placements = Vec::new();
    for item in u.items() {
        let mut rotations = Vec::new();
        let graph = loop {
            let graph = envy_graph(instance, &y);
            let Some(cycle) = find_cycle(&graph) else {
                break graph;
            };
            let before = y.clone();
            for (a, &agent) in cycle.iter().enumerate() {
                y[agent] = before[cycle[(a + 1) % cycle.len()]];
            }
            rotations.push(cycle);
        };
        let recipient = (0..y.len())
            .find(|&j| graph.iter().all(|out| !out.contains(&j)))
            .ok_or_else(|| Error::Internal("acyclic envy graph without an unenvied agent".into()))?;
        y[recipient] = y[recipient].with(item);
        placements.push(Placement {
            item,
            rotations,
            recipient,
            bundles: y.clone(),
        });
    }
    Ok((Allocation::new(z.m(), y)?, placements))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Swap {
    pub agent: usize,
    pub item: usize,
}

/// While some agent values an unallocated item above its bundle, the
/// lowest such agent trades its bundle for its most valued such item.
/// The result is 1-separated.
pub fn singleton_swaps(instance: &Instance, z: &Allocation, u: Bundle) -> Result<(Allocation, Bundle, Vec<Swap>)> {
    z.check_fits(instance)?;
    check_pool(z, u)?;
    let (n, m) = (instance.n(), instance.m());
    let mut bundles = z.bundles().to_vec();
    let mut pool = u;
    let mut swaps = Vec::new();
    loop {
        let choice = (0..n).find_map(|i| {
            let own = instance.value(i, bundles[i]);
            let mut best: Option<(usize, Ratio)> = None;
            for x in pool.items() {
                let v = instance.value(i, Bundle::singleton(x));
                if v > own && best.as_ref().is_none_or(|(_, b)| v > *b) {
                    best = Some((x, v));
                }
            }
            best.map(|(x, _)| (i, x))
        });
        let Some((agent, item)) = choice else {
            break;
        };
        if swaps.len() >= n * (m + 1) {
            return Err(Error::Internal(format!("singleton swaps exceeded {} steps", n * (m + 1))));
        }
        pool = pool.union(bundles[agent]).without(item);
        bundles[agent] = Bundle::singleton(item);
        swaps.push(Swap { agent, item });
    }
    Ok((Allocation::new(m, bundles)?, pool, swaps))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineOutput {
    pub alpha: Ratio,
    pub mnw: MnwResult,
    /// Partial allocation from the matching algorithm.
    pub partial: Allocation,
    /// After singleton swaps (subadditive pipeline only).
    pub separated: Option<Allocation>,
    pub allocation: Allocation,
    pub placements: Vec<Placement>,
    pub reports: Vec<GuaranteeReport>,
    /// The guarantees are theorems only for NW-positive instances.
    pub guarantees_apply: bool,
}

impl PipelineOutput {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(GuaranteeReport::passed)
    }
}

/// Exact MNW, then the additive matching algorithm, then envy cycles.
/// Needs `α^2 + α <= 1`. Reports α-EFX, EF1, `1/(α+1)`-MNW,
/// `α/(α^2+1)`-GMMS and α-PMMS.
pub fn pipeline_additive(instance: &Instance, alpha: &Ratio, caps: &Caps) -> Result<PipelineOutput> {
    if !instance.is_additive() {
        return Err(Error::Precondition("the additive pipeline needs additive valuations".into()));
    }
    if alpha.is_negative() || !within_golden_threshold(alpha) {
        let lhs = alpha.pow(2) + alpha;
        return Err(Error::Precondition(format!(
            "the additive pipeline needs 0 <= alpha and alpha^2 + alpha <= 1, got alpha^2 + alpha = {lhs} > 1"
        )));
    }
    let mnw = exact_mnw(instance, caps)?;
    let (partial, _) = algorithm1(instance, &mnw.allocation, alpha)?;
    let (allocation, placements) = envy_cycles(instance, &partial, partial.unallocated())?;
    let one = Ratio::one();
    let beta = (alpha + &one).recip();
    let gmms_alpha = alpha / (alpha.pow(2) + &one);
    let reports = vec![
        is_alpha_efx(instance, &allocation, alpha),
        is_ef1(instance, &allocation),
        is_beta_mnw(instance, &allocation, &beta, &mnw.product)?,
        is_alpha_gmms(instance, &allocation, &gmms_alpha, caps)?,
        is_alpha_pmms(instance, &allocation, alpha, caps)?,
    ];
    Ok(PipelineOutput {
        alpha: alpha.clone(),
        guarantees_apply: mnw.nw_positive,
        mnw,
        partial,
        separated: None,
        allocation,
        placements,
        reports,
    })
}

/// Exact MNW, then the subadditive matching algorithm, singleton swaps over
/// every unallocated item, then envy cycles. Needs `α <= 1/2`. Reports
/// α-EFX and `1/(α+1)`-MNW.
pub fn pipeline_subadditive(instance: &Instance, alpha: &Ratio, caps: &Caps) -> Result<PipelineOutput> {
    if !matches!(instance.class(), ValuationClass::Additive | ValuationClass::Subadditive) {
        return Err(Error::ClassViolation(format!(
            "the subadditive pipeline needs subadditive valuations, instance is declared {}",
            instance.class()
        )));
    }
    if alpha.is_negative() || *alpha > Ratio::new(1, 2) {
        return Err(Error::Precondition(format!(
            "the subadditive pipeline needs 0 <= alpha <= 1/2, got {alpha}"
        )));
    }
    let mnw = exact_mnw(instance, caps)?;
    let (partial, _) = algorithm2(instance, &mnw.allocation, alpha)?;
    let (separated, pool, _) = singleton_swaps(instance, &partial, partial.unallocated())?;
    let (allocation, placements) = envy_cycles(instance, &separated, pool)?;
    let beta = (alpha + Ratio::one()).recip();
    let reports = vec![
        is_alpha_efx(instance, &allocation, alpha),
        is_beta_mnw(instance, &allocation, &beta, &mnw.product)?,
    ];
    Ok(PipelineOutput {
        alpha: alpha.clone(),
        guarantees_apply: mnw.nw_positive,
        mnw,
        partial,
        separated: Some(separated),
        allocation,
        placements,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::nash_product;
    use crate::instances::{generate, GeneratorSpec};
    use crate::verify::is_gamma_separated;

    fn example1() -> Instance {
        generate(&GeneratorSpec::Example1).unwrap()
    }

    fn alloc(m: usize, bundles: &[&[usize]]) -> Allocation {
        Allocation::new(m, bundles.iter().map(|b| Bundle::from_items(b.iter().copied())).collect())
            .unwrap()
    }

    #[test]
    fn empty_pool_keeps_allocation() {
        let inst = example1();
        let z = alloc(3, &[&[0, 1], &[2]]);
        let (y, placements) = envy_cycles(&inst, &z, Bundle::EMPTY).unwrap();
        assert_eq!(y, z);
        assert!(placements.is_empty());
    }

    #[test]
    fn example1_placement() {
        let inst = example1();
        let z = alloc(3, &[&[0], &[2]]);
        let (y, placements) = envy_cycles(&inst, &z, Bundle::singleton(1)).unwrap();
        assert!(y.is_complete());
        // agent 0 envies agent 1, so agent 0 is the unenvied one
        assert_eq!(placements[0].recipient, 0);
        assert!(is_alpha_efx(&inst, &y, &Ratio::new(1, 2)).passed());
        assert!(nash_product(&inst, &y) >= nash_product(&inst, &z));
    }

    #[test]
    fn cycle_is_rotated() {
        let inst = Instance::additive_from_integers(&[vec![1, 5, 0], vec![5, 1, 0]]).unwrap();
        let z = alloc(3, &[&[0], &[1]]);
        let (y, placements) = envy_cycles(&inst, &z, Bundle::singleton(2)).unwrap();
        assert_eq!(placements[0].rotations, vec![vec![0, 1]]);
        assert_eq!(y.bundle(0), Bundle::from_items([1, 2]));
        assert_eq!(y.bundle(1), Bundle::singleton(0));
    }

    #[test]
    fn find_cycle_order() {
        let graph = vec![vec![1], vec![2], vec![1]];
        assert_eq!(find_cycle(&graph), Some(vec![1, 2]));
        assert_eq!(find_cycle(&[vec![1], vec![]]), None);
    }

    #[test]
    fn overlapping_pool_rejected() {
        let inst = example1();
        let z = alloc(3, &[&[0], &[2]]);
        assert!(envy_cycles(&inst, &z, Bundle::from_items([1, 2])).is_err());
    }

    #[test]
    fn swaps_on_example1() {
        let inst = example1();
        let z = alloc(3, &[&[0], &[1]]);
        let (z2, pool, swaps) = singleton_swaps(&inst, &z, Bundle::singleton(2)).unwrap();
        assert_eq!(swaps, vec![Swap { agent: 0, item: 2 }]);
        assert_eq!(z2.bundle(0), Bundle::singleton(2));
        assert_eq!(pool, Bundle::singleton(0));
        assert!(is_gamma_separated(&inst, &z2, &Ratio::one()).passed());

        let sep = alloc(3, &[&[0], &[2]]);
        let (same, _, none) = singleton_swaps(&inst, &sep, Bundle::singleton(1)).unwrap();
        assert_eq!(same, sep);
        assert!(none.is_empty());
    }

    #[test]
    fn additive_pipeline_example1() {
        let inst = example1();
        let out = pipeline_additive(&inst, &Ratio::new(3, 5), &Caps::default()).unwrap();
        assert!(out.allocation.is_complete());
        assert_eq!(out.reports.len(), 5);
        assert!(out.all_pass(), "{:?}", out.reports);

        let zero = pipeline_additive(&inst, &Ratio::zero(), &Caps::default()).unwrap();
        assert_eq!(zero.allocation, zero.mnw.allocation);

        let err = pipeline_additive(&inst, &Ratio::new(2, 3), &Caps::default()).unwrap_err();
        assert!(err.to_string().contains("10/9"), "{err}");
    }

    #[test]
    fn subadditive_pipeline() {
        let inst = generate(&GeneratorSpec::Xos {
            n: 3,
            m: 6,
            clauses: 3,
            max_value: 10,
            seed: 2,
        })
        .unwrap();
        let out = pipeline_subadditive(&inst, &Ratio::new(1, 2), &Caps::default()).unwrap();
        assert!(out.allocation.is_complete());
        assert!(out.all_pass(), "{:?}", out.reports);
        assert!(pipeline_subadditive(&inst, &Ratio::new(3, 4), &Caps::default()).is_err());
    }
}

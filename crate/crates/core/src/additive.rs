//! Partial α-EFX allocations for additive valuations: the matching
//! algorithm run from a maximum Nash welfare allocation, and the
//! restart-on-improvement variant that accepts any complete allocation.

use serde::Serialize;

use crate::allocation::Allocation;
use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::ratio::Ratio;
use crate::verify::alpha_efx_violation;

/// What one iteration did for the unmatched agent `agent` (the `i★`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    /// Matched to its own bundle `Z_i★`; `displaced` held it before.
    SelfMatch { displaced: Option<usize> },
    /// Took `Z_owner - item`.
    Shrink {
        owner: usize,
        item: usize,
        displaced: Option<usize>,
    },
    /// Took the unmatched `Z_owner` whole.
    TakeUnmatched { owner: usize },
    /// Took `Z_owner` whole from `displaced`; the improving sequence closed
    /// a cycle back to `owner`.
    Cycle {
        owner: usize,
        displaced: usize,
        sequence: Vec<usize>,
    },
    /// Took `Z_owner - item` from `displaced`; the improving sequence ended
    /// at an unmatched bundle.
    Chain {
        owner: usize,
        item: usize,
        displaced: usize,
        sequence: Vec<usize>,
    },
}

impl Move {
    /// `(j★, g)` when the iteration removed an item.
    pub fn removal(&self) -> Option<(usize, usize)> {
        match *self {
            Move::Shrink { owner, item, .. } | Move::Chain { owner, item, .. } => Some((owner, item)),
            _ => None,
        }
    }

    pub fn owner(&self) -> Option<usize> {
        match *self {
            Move::SelfMatch { .. } => None,
            Move::Shrink { owner, .. }
            | Move::TakeUnmatched { owner }
            | Move::Cycle { owner, .. }
            | Move::Chain { owner, .. } => Some(owner),
        }
    }
}

/// One iteration with the state it left behind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    pub agent: usize,
    #[serde(rename = "move")]
    pub action: Move,
    pub z: Vec<Bundle>,
    pub matched: Vec<Option<usize>>,
}

/// `(X, Z, M)` where `M_i = Some(j)` means agent `i` holds `Z_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchState {
    pub x: Vec<Bundle>,
    pub z: Vec<Bundle>,
    pub matched: Vec<Option<usize>>,
    pub trace: Vec<Step>,
}

impl MatchState {
    fn new(x: &Allocation) -> Self {
        MatchState {
            x: x.bundles().to_vec(),
            z: x.bundles().to_vec(),
            matched: vec![None; x.n()],
            trace: Vec::new(),
        }
    }

    /// Agent currently matched to `Z_owner`.
    pub fn holder(&self, owner: usize) -> Option<usize> {
        holder(&self.matched, owner)
    }

    /// `M` as an allocation over `m` items.
    pub fn matching(&self, m: usize) -> Allocation {
        Allocation::new(m, self.matched.iter().map(|o| o.map_or(Bundle::EMPTY, |j| self.z[j])).collect())
            .expect("matched bundles are disjoint")
    }

    /// `Z` as an allocation; removed items are unallocated.
    pub fn shrunk(&self, m: usize) -> Allocation {
        Allocation::new(m, self.z.clone()).expect("Z is disjoint")
    }

    fn record(&mut self, agent: usize, action: Move) {
        self.trace.push(Step {
            agent,
            action,
            z: self.z.clone(),
            matched: self.matched.clone(),
        });
    }
}

pub fn holder(matched: &[Option<usize>], owner: usize) -> Option<usize> {
    matched.iter().position(|&m| m == Some(owner))
}

/// Improving sequence from `start`: `j_1 = start`, then `j_{s+1}` holds
/// `Z_{j_s}`, until `Z_{j_s}` is held by `start` (a cycle, `Ok`) or unheld
/// (a chain, `Err`).
pub fn improving_sequence(matched: &[Option<usize>], start: usize) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let mut sequence = vec![start];
    loop {
        let last = *sequence.last().expect("non-empty");
        match holder(matched, last) {
            None => return Err(sequence),
            Some(h) if h == start => return Ok(sequence),
            Some(h) => {
                assert!(sequence.len() <= matched.len(), "matching is injective");
                sequence.push(h);
            }
        }
    }
}

/// For each agent `i` with `Z_i ≠ X_i`, the `i★` of the last iteration
/// that removed an item from `Z_i`.
pub fn last_touchers(state: &MatchState) -> Vec<Option<usize>> {
    let mut touchers = vec![None; state.x.len()];
    for step in &state.trace {
        if let Some((owner, _)) = step.action.removal() {
            touchers[owner] = Some(step.agent);
        }
    }
    for (i, t) in touchers.iter_mut().enumerate() {
        if state.z[i] == state.x[i] {
            *t = None;
        }
    }
    touchers
}

/// Touching sequence from `start`: follow last touchers until an untouched
/// agent or a repeat.
pub fn touching_sequence(touchers: &[Option<usize>], start: usize) -> Vec<usize> {
    let mut sequence = vec![start];
    while let Some(next) = touchers[*sequence.last().expect("non-empty")] {
        if sequence.contains(&next) {
            break;
        }
        sequence.push(next);
    }
    sequence
}

/// `v_i(own) >= factor * v_i(Z_j - g)` for every `j` and `g ∈ Z_j`.
fn satisfied(instance: &Instance, agent: usize, own: &Ratio, z: &[Bundle], factor: &Ratio) -> bool {
    z.iter().all(|&zj| {
        let total = instance.value(agent, zj);
        zj.items()
            .all(|g| *own >= factor * (&total - instance.item_value(agent, g)))
    })
}

/// `(j★, g)` maximizing `v_i(Z_j★ - g)`, ties to lowest `j★` then `g`.
fn favorite(instance: &Instance, agent: usize, z: &[Bundle]) -> Option<(usize, usize, Ratio)> {
    let mut best: Option<(usize, usize, Ratio)> = None;
    for (j, &zj) in z.iter().enumerate() {
        let total = instance.value(agent, zj);
        for g in zj.items() {
            let v = &total - instance.item_value(agent, g);
            if best.as_ref().is_none_or(|(_, _, b)| v > *b) {
                best = Some((j, g, v));
            }
        }
    }
    best
}

fn check_input(instance: &Instance, x: &Allocation, alpha: &Ratio, what: &str) -> Result<()> {
    if !instance.is_additive() {
        return Err(Error::Precondition(format!("{what} needs additive valuations")));
    }
    x.check_fits(instance)?;
    if !x.is_complete() {
        return Err(Error::Precondition(format!("{what} needs a complete input allocation")));
    }
    if alpha.is_negative() || *alpha > Ratio::one() {
        return Err(Error::Precondition(format!("{what} needs 0 <= alpha <= 1, got {alpha}")));
    }
    Ok(())
}

enum Variant {
    Plain,
    Restarting,
}

enum Outcome {
    Matched(MatchState),
    Improved(MatchState, Allocation),
}

fn run(instance: &Instance, x: &Allocation, alpha: &Ratio, variant: Variant) -> Result<Outcome> {
    let (n, m) = (instance.n(), instance.m());
    let one = Ratio::one();
    let mut state = MatchState::new(x);
    let limit = match variant {
        Variant::Plain => (m + 1) * n,
        Variant::Restarting => (m + 1) * (n + 1).pow(3),
    };
    // (1/(α+1))^{n/(n-1)} threshold in integer-power form
    let alpha_plus_one_pow_n = (alpha + &one).pow(n as u32);
    let exponent = n.saturating_sub(1) as u32;

    while let Some(i) = state.matched.iter().position(Option::is_none) {
        if state.trace.len() >= limit {
            return Err(Error::Internal(format!("matching did not stop within {limit} iterations")));
        }
        let own = instance.value(i, state.z[i]);
        let factor = if state.z[i] == state.x[i] { alpha } else { &one };
        if satisfied(instance, i, &own, &state.z, factor) {
            let displaced = state.holder(i);
            if let Some(d) = displaced {
                state.matched[d] = None;
            }
            state.matched[i] = Some(i);
            state.record(i, Move::SelfMatch { displaced });
            continue;
        }
        let (j, g, _) = favorite(instance, i, &state.z)
            .ok_or_else(|| Error::Internal("no bundle to take although the check failed".into()))?;
        if j == i {
            return Err(Error::Internal(format!("agent {i} picked its own bundle")));
        }
        let displaced = state.holder(j);
        match variant {
            Variant::Plain => {
                if let Some(d) = displaced {
                    state.matched[d] = None;
                }
                state.z[j] = state.z[j].without(g);
                state.matched[i] = Some(j);
                state.record(i, Move::Shrink { owner: j, item: g, displaced });
            }
            Variant::Restarting => {
                let Some(d) = displaced else {
                    state.matched[i] = Some(j);
                    state.record(i, Move::TakeUnmatched { owner: j });
                    continue;
                };
                state.matched[d] = None;
                state.matched[i] = Some(j);
                match improving_sequence(&state.matched, j) {
                    Ok(sequence) => state.record(
                        i,
                        Move::Cycle {
                            owner: j,
                            displaced: d,
                            sequence,
                        },
                    ),
                    Err(sequence) => {
                        state.z[j] = state.z[j].without(g);
                        let small = instance.value(j, state.z[j]).pow(exponent) * &alpha_plus_one_pow_n
                            < instance.value(j, state.x[j]).pow(exponent);
                        let improved = small.then(|| improved_allocation(&state, &sequence, m));
                        state.record(
                            i,
                            Move::Chain {
                                owner: j,
                                item: g,
                                displaced: d,
                                sequence,
                            },
                        );
                        if let Some(x_hat) = improved {
                            return Ok(Outcome::Improved(state, x_hat));
                        }
                    }
                }
            }
        }
    }
    Ok(Outcome::Matched(state))
}

/// `X̂`: `j_1` keeps `X_{j_1} \ Z_{j_1}`, each middle `j_s` swaps `Z_{j_s}`
/// for `Z_{j_{s-1}}`, and the chain end `j_ℓ` adds `Z_{j_{ℓ-1}}` to `X_{j_ℓ}`.
fn improved_allocation(state: &MatchState, sequence: &[usize], m: usize) -> Allocation {
    let mut x_hat = state.x.clone();
    let l = sequence.len();
    let first = sequence[0];
    x_hat[first] = state.x[first].difference(state.z[first]);
    for s in 1..l - 1 {
        let js = sequence[s];
        x_hat[js] = state.x[js].difference(state.z[js]).union(state.z[sequence[s - 1]]);
    }
    let last = sequence[l - 1];
    x_hat[last] = state.x[last].union(state.z[sequence[l - 2]]);
    Allocation::new(m, x_hat).expect("X̂ redistributes X")
}

/// Matching algorithm for additive valuations. From a complete maximum Nash
/// welfare allocation `x` the result is α-EFX, EF1 and
/// `1/(α+1)`-MNW.
pub fn algorithm1(instance: &Instance, x: &Allocation, alpha: &Ratio) -> Result<(Allocation, MatchState)> {
    check_input(instance, x, alpha, "algorithm1")?;
    match run(instance, x, alpha, Variant::Plain)? {
        Outcome::Matched(state) => Ok((state.matching(instance.m()), state)),
        Outcome::Improved(..) => unreachable!("plain variant never restarts"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Alg6Outcome {
    /// α-EFX partial allocation with `∏ M · (α+1)^n >= ∏ X`.
    Matched { allocation: Allocation, state: MatchState },
    /// Complete allocation with Nash product above
    /// `(1 + 1/((α+1)(n-1))) · ∏ X`.
    Improved { allocation: Allocation, state: MatchState },
}

/// Single pass of the restart variant on an arbitrary complete allocation.
pub fn algorithm6(instance: &Instance, x: &Allocation, alpha: &Ratio) -> Result<Alg6Outcome> {
    check_input(instance, x, alpha, "algorithm6")?;
    if instance.n() < 2 {
        return Err(Error::Precondition("algorithm6 needs at least two agents".into()));
    }
    Ok(match run(instance, x, alpha, Variant::Restarting)? {
        Outcome::Matched(state) => Alg6Outcome::Matched {
            allocation: state.matching(instance.m()),
            state,
        },
        Outcome::Improved(state, allocation) => Alg6Outcome::Improved { allocation, state },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Alg7Outcome {
    pub allocation: Allocation,
    /// Calls to [`algorithm6`].
    pub calls: usize,
    /// Calls that returned an improved complete allocation.
    pub improvements: usize,
}

/// Repeats [`algorithm6`] until the allocation is α-EFX.
///
/// `product_ratio` is `∏ X0 / ∏ X*`, i.e. `β^n` for a β-MNW input; the
/// improvement count is held to `n(n-1)(α+1)/β`, compared as
/// `improvements^n · β^n <= (n(n-1)(α+1))^n`.
pub fn algorithm7(instance: &Instance, x0: &Allocation, alpha: &Ratio, product_ratio: &Ratio) -> Result<Alg7Outcome> {
    check_input(instance, x0, alpha, "algorithm7")?;
    if !product_ratio.is_positive() || *product_ratio > Ratio::one() {
        return Err(Error::Precondition(format!(
            "algorithm7 needs a product ratio in (0, 1], got {product_ratio}"
        )));
    }
    let n = instance.n();
    let bound = (Ratio::from(n * n.saturating_sub(1)) * (alpha + Ratio::one())).pow(n as u32);
    let mut x = x0.clone();
    let (mut calls, mut improvements) = (0, 0);
    while alpha_efx_violation(instance, x.bundles(), alpha).is_some() {
        calls += 1;
        match algorithm6(instance, &x, alpha)? {
            Alg6Outcome::Matched { allocation, .. } => x = allocation,
            Alg6Outcome::Improved { allocation, .. } => {
                improvements += 1;
                if Ratio::from(improvements).pow(n as u32) * product_ratio > bound {
                    return Err(Error::Internal(format!(
                        "{improvements} improvements exceed the n(n-1)(alpha+1)/beta bound"
                    )));
                }
                x = allocation;
            }
        }
    }
    Ok(Alg7Outcome {
        allocation: x,
        calls,
        improvements,
    })
}

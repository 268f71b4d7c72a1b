//! Partial α-EFX allocations for subadditive valuations, `α <= 1/2`.
//!
//! Bundles come in three colors: white `Z_j`, red `X_j \ Z_j`, and blue
//! bundles detached from every `X_j` and held by a single agent.

use itertools::Itertools;
use serde::Serialize;

use crate::allocation::Allocation;
use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::instance::{Instance, ValuationClass};
use crate::ratio::Ratio;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "bundle", rename_all = "snake_case")]
pub enum Assignment {
    Unmatched,
    /// Holds `Z_owner`, which may still shrink.
    White(usize),
    /// Holds a detached bundle.
    Blue(Bundle),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Red,
    Blue,
}

/// A member of the available set `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Available {
    pub color: Color,
    /// `j` for white `Z_j - g` and red `X_j \ Z_j`; the holder for blue `M_j - g`.
    pub owner: usize,
    pub item: Option<usize>,
    pub bundle: Bundle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    #[serde(rename = "1")]
    SelfMatch,
    #[serde(rename = "2.1")]
    Singleton,
    #[serde(rename = "2.2")]
    KeepRest,
    #[serde(rename = "2.3")]
    TakeRemainder,
    #[serde(rename = "2.4")]
    KeepRestDetach,
    #[serde(rename = "2.5")]
    TakeSubset,
    #[serde(rename = "2.6")]
    TakeComplement,
    #[serde(rename = "3")]
    Red,
    #[serde(rename = "4")]
    Blue,
}

impl Case {
    pub fn tag(self) -> &'static str {
        match self {
            Case::SelfMatch => "1",
            Case::Singleton => "2.1",
            Case::KeepRest => "2.2",
            Case::TakeRemainder => "2.3",
            Case::KeepRestDetach => "2.4",
            Case::TakeSubset => "2.5",
            Case::TakeComplement => "2.6",
            Case::Red => "3",
            Case::Blue => "4",
        }
    }

    pub fn is_split(self) -> bool {
        matches!(
            self,
            Case::Singleton
                | Case::KeepRest
                | Case::TakeRemainder
                | Case::KeepRestDetach
                | Case::TakeSubset
                | Case::TakeComplement
        )
    }
}

/// One iteration: local variables and the global state after it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubStep {
    pub case: Case,
    pub i: usize,
    pub j: Option<usize>,
    pub k: Option<usize>,
    pub g: Option<usize>,
    #[serde(rename = "J")]
    pub favorite: Option<Bundle>,
    #[serde(rename = "R")]
    pub rest: Option<Bundle>,
    #[serde(rename = "S")]
    pub subset: Option<Bundle>,
    pub x: Vec<Bundle>,
    pub z: Vec<Bundle>,
    pub matched: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubState {
    pub x: Vec<Bundle>,
    pub z: Vec<Bundle>,
    pub matched: Vec<Assignment>,
    pub trace: Vec<SubStep>,
}

impl SubState {
    fn new(x: &Allocation) -> Self {
        SubState {
            x: x.bundles().to_vec(),
            z: x.bundles().to_vec(),
            matched: vec![Assignment::Unmatched; x.n()],
            trace: Vec::new(),
        }
    }

    /// Agent holding white `Z_owner`.
    pub fn white_holder(&self, owner: usize) -> Option<usize> {
        white_holder(&self.matched, owner)
    }

    /// The bundle agent `i` holds.
    pub fn held(&self, i: usize) -> Option<Bundle> {
        held(&self.z, &self.matched[i])
    }

    pub fn matching(&self, m: usize) -> Allocation {
        let bundles = (0..self.matched.len())
            .map(|i| self.held(i).unwrap_or(Bundle::EMPTY))
            .collect();
        Allocation::new(m, bundles).expect("held bundles are disjoint")
    }

    fn unmatch_white(&mut self, owner: usize) {
        if let Some(h) = self.white_holder(owner) {
            self.matched[h] = Assignment::Unmatched;
        }
    }
}

pub fn white_holder(matched: &[Assignment], owner: usize) -> Option<usize> {
    matched.iter().position(|a| *a == Assignment::White(owner))
}

pub fn held(z: &[Bundle], assignment: &Assignment) -> Option<Bundle> {
    match *assignment {
        Assignment::Unmatched => None,
        Assignment::White(j) => Some(z[j]),
        Assignment::Blue(b) => Some(b),
    }
}

/// `B`: white `Z_j - g`, red `X_j \ Z_j` (possibly empty) and blue
/// `M_j - g`, in favorite tie-break order: color, owner, item.
pub fn available_bundles(x: &[Bundle], z: &[Bundle], matched: &[Assignment]) -> Vec<Available> {
    let mut out = Vec::new();
    for (j, &zj) in z.iter().enumerate() {
        out.extend(zj.items().map(|g| Available {
            color: Color::White,
            owner: j,
            item: Some(g),
            bundle: zj.without(g),
        }));
    }
    for (j, (&xj, &zj)) in x.iter().zip(z).enumerate() {
        out.push(Available {
            color: Color::Red,
            owner: j,
            item: None,
            bundle: xj.difference(zj),
        });
    }
    for (j, a) in matched.iter().enumerate() {
        if let Assignment::Blue(b) = *a {
            out.extend(b.items().map(|g| Available {
                color: Color::Blue,
                owner: j,
                item: Some(g),
                bundle: b.without(g),
            }));
        }
    }
    out
}

fn check_input(instance: &Instance, x: &Allocation, alpha: &Ratio) -> Result<()> {
    if !matches!(instance.class(), ValuationClass::Additive | ValuationClass::Subadditive) {
        return Err(Error::ClassViolation(format!(
            "algorithm2 needs subadditive valuations, instance is declared {}",
            instance.class()
        )));
    }
    x.check_fits(instance)?;
    if !x.is_complete() {
        return Err(Error::Precondition("algorithm2 needs a complete input allocation".into()));
    }
    if alpha.is_negative() || *alpha > Ratio::new(1, 2) {
        return Err(Error::Precondition(format!("algorithm2 needs 0 <= alpha <= 1/2, got {alpha}")));
    }
    Ok(())
}

struct Split {
    case: Case,
    k: Option<usize>,
    rest: Bundle,
    subset: Option<Bundle>,
}

/// Case 2: agent `i` takes white `J = Z_j - g`.
fn split(instance: &Instance, state: &mut SubState, alpha: &Ratio, i: usize, j: usize, g: usize) -> Split {
    let fraction = alpha / (alpha + Ratio::one());
    let favorite = state.z[j].without(g);
    state.unmatch_white(j);
    state.matched[i] = Assignment::White(j);
    let rest = state.x[j].difference(favorite);
    let vx = instance.value(j, state.x[j]);

    // agents holding their own white bundle who envy S by more than 1/α
    let envious = |state: &SubState, s: Bundle| -> Option<usize> {
        (0..state.matched.len()).find(|&k| {
            state.matched[k] == Assignment::White(k)
                && instance.value(k, state.z[k]) < alpha * instance.value(k, s)
        })
    };

    let mut outcome = Split {
        case: Case::Singleton,
        k: None,
        rest,
        subset: None,
    };
    if instance.value(j, Bundle::singleton(g)) >= &fraction * &vx {
        state.z[j] = Bundle::singleton(g);
        state.x[j] = state.z[j];
        state.matched[i] = Assignment::Blue(favorite);
        return outcome;
    }
    // K_S ⊆ K_R for S ⊆ R by monotonicity
    if envious(state, rest).is_none() {
        if instance.value(j, rest) < &fraction * &vx {
            outcome.case = Case::KeepRest;
            state.z[j] = favorite;
        } else {
            outcome.case = Case::TakeRemainder;
            state.z[j] = rest;
            state.x[j] = rest;
            state.matched[i] = Assignment::Blue(favorite);
        }
        return outcome;
    }
    let items: Vec<usize> = rest.items().collect();
    let (subset, k) = (1..=items.len())
        .flat_map(|size| items.iter().copied().combinations(size))
        .find_map(|combo| {
            let s = Bundle::from_items(combo);
            envious(state, s).map(|k| (s, k))
        })
        .expect("K_R is non-empty");
    outcome.k = Some(k);
    outcome.subset = Some(subset);
    if instance.value(j, favorite) >= alpha * &vx {
        outcome.case = Case::KeepRestDetach;
        state.z[j] = favorite;
        state.x[j] = favorite;
        state.x[k] = state.z[k];
        state.matched[k] = Assignment::Blue(subset);
    } else if instance.value(j, subset) >= &fraction * &vx {
        outcome.case = Case::TakeSubset;
        state.z[j] = subset;
        state.x[j] = subset;
        state.matched[i] = Assignment::Blue(favorite);
    } else {
        outcome.case = Case::TakeComplement;
        state.z[j] = rest.difference(subset);
        state.x[j] = state.z[j];
        state.x[k] = state.z[k];
        state.matched[k] = Assignment::Blue(subset);
        state.matched[i] = Assignment::Blue(favorite);
    }
    outcome
}

/// Matching algorithm for subadditive valuations on an arbitrary complete
/// allocation `x`. The result is α-EFX with
/// `∏ M · (α+1)^n >= ∏ X`.
pub fn algorithm2(instance: &Instance, x: &Allocation, alpha: &Ratio) -> Result<(Allocation, SubState)> {
    check_input(instance, x, alpha)?;
    let m = instance.m();
    let limit = (m + 1).pow(3);
    let mut state = SubState::new(x);

    while let Some(i) = state.matched.iter().position(|a| *a == Assignment::Unmatched) {
        if state.trace.len() >= limit {
            return Err(Error::Internal(format!("algorithm2 did not stop within {limit} iterations")));
        }
        let available = available_bundles(&state.x, &state.z, &state.matched);
        let mut favorite: Option<(Available, Ratio)> = None;
        for a in available {
            let v = instance.value(i, a.bundle);
            if favorite.as_ref().is_none_or(|(_, b)| v > *b) {
                favorite = Some((a, v));
            }
        }
        let (fav, fav_value) = favorite.expect("red bundles are always available");
        let mut step = SubStep {
            case: Case::SelfMatch,
            i,
            j: None,
            k: None,
            g: None,
            favorite: None,
            rest: None,
            subset: None,
            x: Vec::new(),
            z: Vec::new(),
            matched: Vec::new(),
        };
        if instance.value(i, state.z[i]) >= alpha * &fav_value {
            state.unmatch_white(i);
            state.matched[i] = Assignment::White(i);
        } else {
            step.j = Some(fav.owner);
            step.favorite = Some(fav.bundle);
            step.g = fav.item;
            match fav.color {
                Color::White => {
                    let g = fav.item.expect("white bundles drop an item");
                    let outcome = split(instance, &mut state, alpha, i, fav.owner, g);
                    step.case = outcome.case;
                    step.k = outcome.k;
                    step.rest = Some(outcome.rest);
                    step.subset = outcome.subset;
                }
                Color::Red => {
                    step.case = Case::Red;
                    state.x[fav.owner] = state.z[fav.owner];
                    state.matched[i] = Assignment::Blue(fav.bundle);
                }
                Color::Blue => {
                    step.case = Case::Blue;
                    state.matched[fav.owner] = Assignment::Unmatched;
                    state.matched[i] = Assignment::Blue(fav.bundle);
                }
            }
        }
        step.x = state.x.clone();
        step.z = state.z.clone();
        step.matched = state.matched.clone();
        state.trace.push(step);
    }
    Ok((state.matching(m), state))
}

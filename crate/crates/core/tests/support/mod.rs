//! Replays matching-algorithm traces against the per-iteration claims.

use fairdiv::additive::MatchState;
use fairdiv::subadditive::{available_bundles, held, Assignment, Case, SubState};
use fairdiv::verify::{is_alpha_efx, is_ef1, is_gamma_separated};
use fairdiv::{nash_product, Allocation, Bundle, Instance, Ratio};

pub type Check = Result<(), String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Invariants of the additive matching state after every iteration, and the
/// final guarantees when `x` is an NW-positive MNW allocation.
pub fn check_algorithm1(inst: &Instance, x: &Allocation, alpha: &Ratio, state: &MatchState, mnw: bool) -> Check {
    let (n, m) = (inst.n(), inst.m());
    let v = |i: usize, b: Bundle| inst.value(i, b);
    ensure(state.trace.len() <= (m + 1) * n, || format!("{} iterations > (m+1)n", state.trace.len()))?;
    let mut phi = (0usize, 0usize);
    for (t, step) in state.trace.iter().enumerate() {
        let (z, matched) = (&step.z, &step.matched);
        // Z lies inside X and matched owners are consistent
        for i in 0..n {
            ensure(z[i].is_subset(x.bundle(i)), || format!("t={t}: Z_{i} not inside X_{i}"))?;
            if let Some(j) = matched[i] {
                ensure(j < n, || format!("t={t}: M_{i} names Z_{j}"))?;
                ensure(matched.iter().filter(|o| **o == Some(j)).count() == 1, || {
                    format!("t={t}: Z_{j} matched twice")
                })?;
            }
        }
        // matched agents value their bundles against every candidate
        for i in 0..n {
            let Some(j) = matched[i] else { continue };
            let vm = v(i, z[j]);
            let untouched = z[i] == x.bundle(i);
            for (a, &za) in z.iter().enumerate() {
                for g in za.items() {
                    let other = v(i, za.without(g));
                    let ok = if untouched { vm >= alpha * &other } else { vm >= other };
                    ensure(ok, || format!("t={t}: agent {i} envies Z_{a}-{g}"))?;
                }
            }
            if z[j] != z[i] {
                ensure(vm > v(i, z[i]), || format!("t={t}: (iii) fails for {i}"))?;
                if untouched {
                    ensure(alpha * &vm > v(i, z[i]), || format!("t={t}: (iv) fails for {i}"))?;
                }
            }
        }
        for a in 0..n {
            if z[a] != x.bundle(a) {
                ensure(matched.contains(&Some(a)), || format!("t={t}: shrunk Z_{a} unmatched"))?;
            }
        }
        // potential (|Removed|, |SelfMatched|)
        let removed: usize = (0..n).map(|i| x.bundle(i).difference(z[i]).len()).sum();
        let self_matched = (0..n).filter(|&i| matched[i] == Some(i)).count();
        let next = (removed, self_matched);
        ensure(next > phi, || {
            format!("t={t}: potential {phi:?} -> {next:?}")
        })?;
        phi = next;
    }
    ensure(state.matched.iter().all(Option::is_some), || "unmatched agent at the end".into())?;
    let out = state.matching(m);
    ensure(is_alpha_efx(inst, &out, alpha).passed(), || "output not alpha-EFX".into())?;
    if mnw {
        ensure(is_ef1(inst, &out).passed(), || "output not EF1".into())?;
        let one = Ratio::one();
        for i in 0..n {
            ensure(v(i, state.z[i]) * (alpha + &one) >= v(i, x.bundle(i)), || {
                format!("Z_{i} below X_{i}/(alpha+1)")
            })?;
        }
        let z = state.shrunk(m);
        ensure(is_gamma_separated(inst, &z, alpha).passed(), || "Z not alpha-separated".into())?;
        ensure(is_gamma_separated(inst, &out, alpha).passed(), || "M not alpha-separated".into())?;
    }
    Ok(())
}

/// Walks `M` as successor edges `a -> b` for `M_a = Z_b` and checks the
/// chain and cycle decomposition. Returns the number of chains ending in
/// a blue bundle and the number ending unmatched.
pub fn chains(x: &[Bundle], z: &[Bundle], matched: &[Assignment]) -> Result<(usize, usize), String> {
    let n = matched.len();
    let held_by = |b: usize| matched.iter().position(|a| *a == Assignment::White(b));
    let mut seen = vec![false; n];
    let (mut blue, mut open) = (0, 0);
    for start in (0..n).filter(|&a| held_by(a).is_none()) {
        ensure(z[start] == x[start], || format!("chain start {start} has Z != X"))?;
        let mut a = start;
        loop {
            ensure(!seen[a], || format!("agent {a} on two chains"))?;
            seen[a] = true;
            match matched[a] {
                Assignment::White(b) => a = b,
                Assignment::Blue(_) => {
                    blue += 1;
                    break;
                }
                Assignment::Unmatched => {
                    open += 1;
                    break;
                }
            }
        }
    }
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut a = start;
        loop {
            seen[a] = true;
            match matched[a] {
                Assignment::White(b) if b == start => break,
                Assignment::White(b) => {
                    ensure(!seen[b], || format!("agent {b} reached twice"))?;
                    a = b;
                }
                _ => return Err(format!("agent {start} neither on a chain nor a cycle")),
            }
        }
    }
    Ok((blue, open))
}

pub fn check_algorithm2(inst: &Instance, x0: &Allocation, alpha: &Ratio, state: &SubState) -> Check {
    let (n, m) = (inst.n(), inst.m());
    let v = |i: usize, b: Bundle| inst.value(i, b);
    let one = Ratio::one();
    ensure(state.trace.len() <= (m + 1).pow(3), || format!("{} iterations > (m+1)^3", state.trace.len()))?;
    let mut x = x0.bundles().to_vec();
    let mut z = x.clone();
    let mut matched = vec![Assignment::Unmatched; n];
    let mut ell = 0usize;
    for (t, step) in state.trace.iter().enumerate() {
        let t = t + 1;
        // red parts stay small
        for i in 0..n {
            ensure(v(i, step.x[i].difference(step.z[i])) * (alpha + &one) <= alpha * &v(i, step.x[i]), || {
                format!("t={t}: red part of X_{i} too valuable")
            })?;
            ensure(v(i, step.z[i]) * (alpha + &one) >= v(i, step.x[i]), || {
                format!("t={t}: Z_{i} below X_{i}/(alpha+1)")
            })?;
        }
        let roles: Vec<usize> = [Some(step.i), step.j, step.k].into_iter().flatten().collect();
        ensure(roles.iter().all(|a| roles.iter().filter(|b| *b == a).count() == 1), || {
            format!("t={t}: i, j, k not distinct: {roles:?}")
        })?;
        ensure(step.favorite.is_none_or(|b| !b.is_empty()), || format!("t={t}: J empty"))?;
        ensure(step.subset.is_none_or(|b| !b.is_empty()), || format!("t={t}: S empty"))?;
        // held bundles are disjoint
        let mut used = Bundle::EMPTY;
        for a in 0..n {
            if let Some(b) = held(&step.z, &step.matched[a]) {
                ensure(used.is_disjoint(b), || format!("t={t}: matched bundles overlap"))?;
                used = used.union(b);
            }
            if let Assignment::Blue(b) = step.matched[a] {
                ensure(step.x.iter().all(|xj| xj.is_disjoint(b)), || format!("t={t}: blue bundle meets X"))?;
            }
        }
        // bundles of agents matched before stay fixed
        for a in 0..n {
            let (Some(before), Some(after)) = (held(&z, &matched[a]), held(&step.z, &step.matched[a])) else {
                continue;
            };
            if step.k != Some(a) {
                ensure(matched[a] == step.matched[a] && before == after, || {
                    format!("t={t}: bundle of matched agent {a} changed")
                })?;
            }
        }
        // chain decomposition
        let (blue, _) = chains(&step.x, &step.z, &step.matched).map_err(|e| format!("t={t}: {e}"))?;
        let blue_count = step.matched.iter().filter(|a| matches!(a, Assignment::Blue(_))).count();
        ensure(blue == blue_count, || format!("t={t}: {blue} blue chains vs {blue_count} blue bundles"))?;
        // white values never increase
        for a in 0..n {
            ensure(v(a, step.z[a]) <= v(a, z[a]), || format!("t={t}: v_{a}(Z_{a}) increased"))?;
        }
        // product potential, cross-multiplied with alpha = p/q
        if alpha.is_positive() {
            let ratio = (alpha + &one) / alpha;
            let before: Ratio = (0..n).map(|i| v(i, x[i])).product::<Ratio>() * ratio.pow(ell as u32);
            let after: Ratio = (0..n).map(|i| v(i, step.x[i])).product::<Ratio>() * ratio.pow(blue as u32);
            ensure(after >= before, || format!("t={t}: potential decreased"))?;
        }
        // held bundles beat every available one, and displaced agents gain 1/alpha
        let available = available_bundles(&step.x, &step.z, &step.matched);
        for a in 0..n {
            let Some(b) = held(&step.z, &step.matched[a]) else { continue };
            let vb = v(a, b);
            for h in &available {
                ensure(vb >= alpha * &v(a, h.bundle), || format!("t={t}: agent {a} alpha-envies {h:?}"))?;
            }
            if b != step.z[a] {
                ensure(alpha * &vb > v(a, step.z[a]), || format!("t={t}: agent {a} gained less than 1/alpha"))?;
            }
        }
        // new available bundles come only from R or S
        let previous = available_bundles(&x, &z, &matched);
        for h in &available {
            if previous.iter().any(|p| h.bundle.is_subset(p.bundle)) {
                continue;
            }
            let (r, s) = (step.rest.unwrap_or_default(), step.subset.unwrap_or_default());
            let ok = match step.case {
                Case::KeepRest | Case::TakeRemainder => h.bundle.is_subset(r),
                Case::KeepRestDetach | Case::TakeSubset | Case::TakeComplement => {
                    (h.bundle.is_subset(s) && h.bundle != s && s.is_subset(r)) || h.bundle.is_subset(r.difference(s))
                }
                _ => false,
            };
            ensure(ok, || format!("t={t}: unexpected new bundle {h:?} in case {}", step.case.tag()))?;
        }
        x = step.x.clone();
        z = step.z.clone();
        matched = step.matched.clone();
        ell = blue;
    }
    let (_, open) = chains(&state.x, &state.z, &state.matched)?;
    ensure(open == 0, || "chain of type (i) at the end".into())?;
    ensure(!state.matched.contains(&Assignment::Unmatched), || "unmatched agent at the end".into())?;
    let out = state.matching(m);
    ensure(is_alpha_efx(inst, &out, alpha).passed(), || "output not alpha-EFX".into())?;
    let bound = nash_product(inst, x0) * (alpha + &one).recip().pow(n as u32);
    ensure(nash_product(inst, &out) >= bound, || "product below NW(X)/(alpha+1)^n".into())?;
    Ok(())
}

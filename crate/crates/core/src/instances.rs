//! Fixture and seeded random instance generators.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::instance::{Instance, Valuation, ValuationClass};
use crate::ratio::Ratio;

fn default_max_value() -> u64 {
    10
}

fn default_clauses() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    /// Two agents, items `a, b, c` valued `1, 1, 2` by both.
    Example1,
    /// Items `a_1..a_{n-1}` worth `1/alpha + epsilon` to everyone, then
    /// `b_1..b_n` with `b_i` worth 1 to agent `i` only.
    Theorem4 { alpha: Ratio, epsilon: Ratio, n: usize },
    /// Two identical agents, five identical items, values
    /// `0, 1, 1, √N, N, N` by cardinality.
    Theorem5 {
        #[serde(rename = "N", alias = "big_n")]
        big_n: u64,
    },
    /// Integer values uniform in `0..=max_value`.
    RandomAdditive {
        n: usize,
        m: usize,
        #[serde(default = "default_max_value")]
        max_value: u64,
        seed: u64,
    },
    /// `v_i(S) = max_c Σ_{g∈S} w_{icg}`, weights uniform in `0..=max_value`.
    Xos {
        n: usize,
        m: usize,
        #[serde(default = "default_clauses")]
        clauses: usize,
        #[serde(default = "default_max_value")]
        max_value: u64,
        seed: u64,
    },
    /// `v_i(S) = min(cap, Σ_{g∈S} w_{ig})`, weights uniform in `0..=max_value`.
    BudgetAdditive {
        n: usize,
        m: usize,
        cap: u64,
        #[serde(default = "default_max_value")]
        max_value: u64,
        seed: u64,
    },
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Example1 => write!(f, "example1"),
            GeneratorSpec::Theorem4 { alpha, epsilon, n } => {
                write!(f, "theorem4(alpha={alpha},epsilon={epsilon},n={n})")
            }
            GeneratorSpec::Theorem5 { big_n } => write!(f, "theorem5(N={big_n})"),
            GeneratorSpec::RandomAdditive {
                n,
                m,
                max_value,
                seed,
            } => write!(f, "random_additive(n={n},m={m},max={max_value},seed={seed})"),
            GeneratorSpec::Xos {
                n,
                m,
                clauses,
                max_value,
                seed,
            } => write!(f, "xos(n={n},m={m},clauses={clauses},max={max_value},seed={seed})"),
            GeneratorSpec::BudgetAdditive {
                n,
                m,
                cap,
                max_value,
                seed,
            } => write!(f, "budget_additive(n={n},m={m},cap={cap},max={max_value},seed={seed})"),
        }
    }
}

impl GeneratorSpec {
    /// Same family with the seed advanced by `offset`; fixed families are
    /// returned unchanged.
    pub fn with_seed_offset(&self, offset: u64) -> GeneratorSpec {
        let mut spec = self.clone();
        match &mut spec {
            GeneratorSpec::RandomAdditive { seed, .. }
            | GeneratorSpec::Xos { seed, .. }
            | GeneratorSpec::BudgetAdditive { seed, .. } => *seed = seed.wrapping_add(offset),
            _ => {}
        }
        spec
    }
}

fn random_rows(rng: &mut ChaCha8Rng, rows: usize, m: usize, max_value: u64) -> Vec<Vec<u64>> {
    (0..rows)
        .map(|_| (0..m).map(|_| rng.gen_range(0..=max_value)).collect())
        .collect()
}

fn check_explicit_size(m: usize, caps: &Caps) -> Result<()> {
    if m > caps.explicit_items {
        return Err(Error::Capacity {
            what: "explicit valuation table".into(),
            needed: format!("2^{m}"),
            cap: 1 << caps.explicit_items,
        });
    }
    Ok(())
}

/// Tabulates `f` over all `2^m` bundles.
fn table(m: usize, f: impl Fn(Bundle) -> Ratio) -> Valuation {
    Valuation::Explicit(Bundle::full(m).subsets().map(f).collect())
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance> {
    generate_with_caps(spec, &Caps::default())
}

pub fn generate_with_caps(spec: &GeneratorSpec, caps: &Caps) -> Result<Instance> {
    match spec {
        GeneratorSpec::Example1 => Instance::additive_from_integers(&[vec![1, 1, 2], vec![1, 1, 2]]),
        GeneratorSpec::Theorem4 { alpha, epsilon, n } => {
            let n = *n;
            if n < 1 {
                return Err(Error::Precondition("theorem4 needs n >= 1".into()));
            }
            if !alpha.is_positive() || epsilon.is_negative() {
                return Err(Error::Precondition("theorem4 needs alpha > 0 and epsilon >= 0".into()));
            }
            let a_value = alpha.recip() + epsilon;
            let valuations = (0..n)
                .map(|i| {
                    let mut row = vec![a_value.clone(); n - 1];
                    row.extend((0..n).map(|j| if j == i { Ratio::one() } else { Ratio::zero() }));
                    Valuation::Additive(row)
                })
                .collect();
            Instance::with_caps(2 * n - 1, valuations, ValuationClass::Additive, caps)
        }
        GeneratorSpec::Theorem5 { big_n } => {
            let root = integer_sqrt(*big_n);
            if root * root != *big_n {
                return Err(Error::Precondition(format!(
                    "theorem5 needs a perfect square N, got {big_n}"
                )));
            }
            let (root, big_n) = (Ratio::from(root), Ratio::from(*big_n));
            let by_size = [
                Ratio::zero(),
                Ratio::one(),
                Ratio::one(),
                root,
                big_n.clone(),
                big_n,
            ];
            let v = table(5, |s| by_size[s.len()].clone());
            Instance::with_caps(5, vec![v.clone(), v], ValuationClass::Monotone, caps)
        }
        GeneratorSpec::RandomAdditive {
            n,
            m,
            max_value,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let valuations = random_rows(&mut rng, *n, *m, *max_value)
                .into_iter()
                .map(|row| Valuation::Additive(row.into_iter().map(Ratio::from).collect()))
                .collect();
            Instance::with_caps(*m, valuations, ValuationClass::Additive, caps)
        }
        GeneratorSpec::Xos {
            n,
            m,
            clauses,
            max_value,
            seed,
        } => {
            check_explicit_size(*m, caps)?;
            if *clauses == 0 {
                return Err(Error::Precondition("xos needs at least one clause".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let valuations = (0..*n)
                .map(|_| {
                    let weights = random_rows(&mut rng, *clauses, *m, *max_value);
                    table(*m, |s| {
                        let best = weights
                            .iter()
                            .map(|w| s.items().map(|g| w[g]).sum::<u64>())
                            .max()
                            .unwrap_or(0);
                        Ratio::from(best)
                    })
                })
                .collect();
            Instance::with_caps(*m, valuations, ValuationClass::Subadditive, caps)
        }
        GeneratorSpec::BudgetAdditive {
            n,
            m,
            cap,
            max_value,
            seed,
        } => {
            check_explicit_size(*m, caps)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let valuations = random_rows(&mut rng, *n, *m, *max_value)
                .into_iter()
                .map(|w| table(*m, |s| Ratio::from((*cap).min(s.items().map(|g| w[g]).sum()))))
                .collect();
            Instance::with_caps(*m, valuations, ValuationClass::Subadditive, caps)
        }
    }
}

fn integer_sqrt(x: u64) -> u64 {
    let mut r = (x as f64).sqrt() as u64;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

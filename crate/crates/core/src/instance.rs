//! Valuations, instances and valuation-class validation.
//!
//! An [`Instance`] is `n` agents with valuation functions over `m` items.
//! Valuations are either additive (one value per item) or explicit tables
//! holding `v(S)` for every one of the `2^m` bundles. Construction validates
//! the declared [`ValuationClass`]; [`check_class`] reports the first
//! violation it finds for each property.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, MAX_ITEMS};
use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::ratio::Ratio;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValuationClass {
    Additive,
    Subadditive,
    Monotone,
}

impl ValuationClass {
    /// Additive valuations are subadditive; both are monotone.
    pub fn is_subadditive(self) -> bool {
        matches!(self, ValuationClass::Additive | ValuationClass::Subadditive)
    }
}

impl fmt::Display for ValuationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValuationClass::Additive => "additive",
            ValuationClass::Subadditive => "subadditive",
            ValuationClass::Monotone => "monotone",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Valuation {
    /// `v(S) = sum of v(g) over g in S`.
    Additive(Vec<Ratio>),
    /// `v(S) = table[S.bits()]`, one entry per subset of the `m` items.
    Explicit(Vec<Ratio>),
}

impl Valuation {
    pub fn value(&self, bundle: Bundle) -> Ratio {
        match self {
            Valuation::Additive(values) => bundle.items().map(|g| &values[g]).sum(),
            Valuation::Explicit(table) => table[bundle.bits() as usize].clone(),
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Valuation::Additive(_))
    }

    /// Tabulates an additive valuation over all `2^m` bundles.
    pub fn to_explicit(&self, m: usize) -> Valuation {
        match self {
            Valuation::Explicit(_) => self.clone(),
            Valuation::Additive(_) => Valuation::Explicit(
                Bundle::full(m).subsets().map(|s| self.value(s)).collect(),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassWitness {
    /// `v(set) > v(set + item)`.
    NotMonotone {
        agent: usize,
        set: Bundle,
        item: usize,
        set_value: Ratio,
        extended_value: Ratio,
    },
    /// `v(s ∪ t) > v(s) + v(t)` for disjoint `s`, `t`.
    NotSubadditive {
        agent: usize,
        s: Bundle,
        t: Bundle,
        union_value: Ratio,
        s_value: Ratio,
        t_value: Ratio,
    },
}

impl ClassWitness {
    /// Recomputes the witness values from `instance` and confirms the violation.
    pub fn is_violation(&self, instance: &Instance) -> bool {
        match self {
            ClassWitness::NotMonotone { agent, set, item, .. } => {
                !set.contains(*item)
                    && instance.value(*agent, *set) > instance.value(*agent, set.with(*item))
            }
            ClassWitness::NotSubadditive { agent, s, t, .. } => {
                s.is_disjoint(*t)
                    && instance.value(*agent, s.union(*t))
                        > instance.value(*agent, *s) + instance.value(*agent, *t)
            }
        }
    }
}

/// Outcome of validating valuations against a declared class.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub declared: ValuationClass,
    pub malformed: Option<String>,
    /// First monotonicity violation, if any.
    pub monotone: Option<ClassWitness>,
    /// First subadditivity violation, if any. Additive valuations never fail.
    pub subadditive: Option<ClassWitness>,
}

impl ClassReport {
    pub fn passes(&self) -> bool {
        self.malformed.is_none()
            && self.monotone.is_none()
            && (!self.declared.is_subadditive() || self.subadditive.is_none())
    }
}

/// Structural problems: lengths, negative values, `v(∅) != 0`, class/kind mismatch.
fn structural_problem(
    m: usize,
    valuations: &[Valuation],
    declared: ValuationClass,
    caps: &Caps,
) -> Option<String> {
    if valuations.is_empty() {
        return Some("instance needs at least one agent".into());
    }
    if m > MAX_ITEMS {
        return Some(format!("m = {m} exceeds the {MAX_ITEMS}-item limit"));
    }
    for (agent, valuation) in valuations.iter().enumerate() {
        match valuation {
            Valuation::Additive(values) => {
                if values.len() != m {
                    return Some(format!(
                        "agent {agent}: {} additive values for {m} items",
                        values.len()
                    ));
                }
                if let Some(g) = values.iter().position(Ratio::is_negative) {
                    return Some(format!("agent {agent}: negative value for item {g}"));
                }
            }
            Valuation::Explicit(table) => {
                if declared == ValuationClass::Additive {
                    return Some(format!(
                        "agent {agent}: explicit table in an instance declared additive"
                    ));
                }
                if m > caps.explicit_items {
                    return Some(format!(
                        "explicit valuations limited to {} items, got {m}",
                        caps.explicit_items
                    ));
                }
                if table.len() != 1usize << m {
                    return Some(format!(
                        "agent {agent}: table has {} entries, expected {}",
                        table.len(),
                        1usize << m
                    ));
                }
                if !table[0].is_zero() {
                    return Some(format!("agent {agent}: v(empty) = {} but must be 0", table[0]));
                }
                if let Some(s) = table.iter().position(Ratio::is_negative) {
                    return Some(format!("agent {agent}: negative value for bundle {s}"));
                }
            }
        }
    }
    None
}

fn monotonicity_violation(agent: usize, table: &[Ratio], m: usize) -> Option<ClassWitness> {
    for bits in 0..table.len() {
        let set = Bundle::from_bits(bits as u64);
        for item in Bundle::full(m).difference(set).items() {
            let extended = set.with(item);
            if table[bits] > table[extended.bits() as usize] {
                return Some(ClassWitness::NotMonotone {
                    agent,
                    set,
                    item,
                    set_value: table[bits].clone(),
                    extended_value: table[extended.bits() as usize].clone(),
                });
            }
        }
    }
    None
}

/// Checks `v(S ∪ T) <= v(S) + v(T)` over disjoint non-empty pairs. Under
/// monotonicity this is equivalent to subadditivity over all pairs.
fn subadditivity_violation(agent: usize, table: &[Ratio], m: usize) -> Option<ClassWitness> {
    let all = Bundle::full(m);
    for s_bits in 1..table.len() {
        let s = Bundle::from_bits(s_bits as u64);
        for t in all.difference(s).subsets().skip(1) {
            // each unordered pair once
            if t.bits() < s.bits() {
                continue;
            }
            let union = s.union(t);
            let bound = &table[s_bits] + &table[t.bits() as usize];
            if table[union.bits() as usize] > bound {
                return Some(ClassWitness::NotSubadditive {
                    agent,
                    s,
                    t,
                    union_value: table[union.bits() as usize].clone(),
                    s_value: table[s_bits].clone(),
                    t_value: table[t.bits() as usize].clone(),
                });
            }
        }
    }
    None
}

fn class_report(
    m: usize,
    valuations: &[Valuation],
    declared: ValuationClass,
    caps: &Caps,
    always_check_subadditivity: bool,
) -> ClassReport {
    let mut report = ClassReport {
        declared,
        malformed: structural_problem(m, valuations, declared, caps),
        monotone: None,
        subadditive: None,
    };
    if report.malformed.is_some() {
        return report;
    }
    let want_subadditive = always_check_subadditivity || declared.is_subadditive();
    for (agent, valuation) in valuations.iter().enumerate() {
        // additive valuations with non-negative values are monotone and subadditive
        let Valuation::Explicit(table) = valuation else {
            continue;
        };
        if report.monotone.is_none() {
            report.monotone = monotonicity_violation(agent, table, m);
        }
        if want_subadditive && report.subadditive.is_none() {
            report.subadditive = subadditivity_violation(agent, table, m);
        }
    }
    report
}

/// Full class report for raw valuations, before an [`Instance`] exists.
pub fn check_valuations(
    m: usize,
    valuations: &[Valuation],
    declared: ValuationClass,
    caps: &Caps,
) -> ClassReport {
    class_report(m, valuations, declared, caps, true)
}

/// Monotonicity and subadditivity verdicts for every agent of `instance`.
/// Subadditivity is evaluated regardless of the declared class.
pub fn check_class(instance: &Instance) -> ClassReport {
    class_report(
        instance.m,
        &instance.valuations,
        instance.class,
        &Caps {
            explicit_items: MAX_ITEMS,
            ..Caps::default()
        },
        true,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    m: usize,
    valuations: Vec<Valuation>,
    class: ValuationClass,
}

impl Instance {
    pub fn new(m: usize, valuations: Vec<Valuation>, class: ValuationClass) -> Result<Self> {
        Instance::with_caps(m, valuations, class, &Caps::default())
    }

    pub fn with_caps(
        m: usize,
        valuations: Vec<Valuation>,
        class: ValuationClass,
        caps: &Caps,
    ) -> Result<Self> {
        let report = class_report(m, &valuations, class, caps, false);
        if let Some(problem) = report.malformed {
            return Err(Error::Malformed(problem));
        }
        if let Some(w) = report.monotone.or(report.subadditive) {
            return Err(Error::ClassViolation(format!(
                "declared {class} but {}",
                serde_json::to_string(&w)?
            )));
        }
        Ok(Instance {
            m,
            valuations,
            class,
        })
    }

    /// Additive instance from integer item values, one row per agent.
    pub fn additive_from_integers(rows: &[Vec<i64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let valuations = rows
            .iter()
            .map(|row| Valuation::Additive(row.iter().map(|&v| Ratio::from_integer(v)).collect()))
            .collect();
        Instance::new(m, valuations, ValuationClass::Additive)
    }

    pub fn n(&self) -> usize {
        self.valuations.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn class(&self) -> ValuationClass {
        self.class
    }

    pub fn valuations(&self) -> &[Valuation] {
        &self.valuations
    }

    pub fn valuation(&self, agent: usize) -> &Valuation {
        &self.valuations[agent]
    }

    pub fn items(&self) -> Bundle {
        Bundle::full(self.m)
    }

    /// `v_agent(bundle)`, exactly.
    pub fn value(&self, agent: usize, bundle: Bundle) -> Ratio {
        debug_assert!(bundle.is_subset(self.items()), "bundle outside item range");
        self.valuations[agent].value(bundle)
    }

    pub fn item_value(&self, agent: usize, item: usize) -> Ratio {
        match &self.valuations[agent] {
            Valuation::Additive(values) => values[item].clone(),
            explicit => explicit.value(Bundle::singleton(item)),
        }
    }

    /// True when every valuation is additive, regardless of the declared class.
    pub fn is_additive(&self) -> bool {
        self.valuations.iter().all(Valuation::is_additive)
    }

    /// The same valuations stored as explicit tables, declared subadditive
    /// (or monotone when that is all they satisfy).
    pub fn to_explicit(&self) -> Result<Instance> {
        let valuations = self.valuations.iter().map(|v| v.to_explicit(self.m)).collect();
        let class = match self.class {
            ValuationClass::Additive => ValuationClass::Subadditive,
            other => other,
        };
        Instance::new(self.m, valuations, class)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.into_instance(&Caps::default())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Instance::from_json_str(&std::fs::read_to_string(path)?)
    }
}

/// On-disk instance representation.
///
/// ```json
/// { "n": 2, "m": 3, "class": "additive",
///   "valuations": [ {"additive": [1, 1, "2/1"]}, {"table": {"0": 0, "1": "1/2", ...}} ] }
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    pub class: ValuationClass,
    pub valuations: Vec<ValuationFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValuationFile {
    Additive { additive: Vec<Ratio> },
    Table { table: BTreeMap<String, Ratio> },
}

impl InstanceFile {
    /// Converts table maps to dense tables. Missing entries are an error.
    pub fn to_valuations(&self) -> Result<Vec<Valuation>> {
        if self.valuations.len() != self.n {
            return Err(Error::Malformed(format!(
                "n = {} but {} valuations given",
                self.n,
                self.valuations.len()
            )));
        }
        self.valuations
            .iter()
            .enumerate()
            .map(|(agent, v)| match v {
                ValuationFile::Additive { additive } => Ok(Valuation::Additive(additive.clone())),
                ValuationFile::Table { table } => {
                    if self.m > MAX_ITEMS.min(30) {
                        return Err(Error::Malformed(format!("table valuation with m = {}", self.m)));
                    }
                    let size = 1usize << self.m;
                    let mut dense: Vec<Option<Ratio>> = vec![None; size];
                    for (key, value) in table {
                        let bits: usize = key.trim().parse().map_err(|_| {
                            Error::Malformed(format!("agent {agent}: bad bundle key {key:?}"))
                        })?;
                        if bits >= size {
                            return Err(Error::Malformed(format!(
                                "agent {agent}: bundle {bits} outside {} items",
                                self.m
                            )));
                        }
                        dense[bits] = Some(value.clone());
                    }
                    dense
                        .into_iter()
                        .enumerate()
                        .map(|(bits, v)| {
                            v.ok_or_else(|| {
                                Error::Malformed(format!(
                                    "agent {agent}: missing table entry for bundle {bits}"
                                ))
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                        .map(Valuation::Explicit)
                }
            })
            .collect()
    }

    pub fn into_instance(self, caps: &Caps) -> Result<Instance> {
        let valuations = self.to_valuations()?;
        Instance::with_caps(self.m, valuations, self.class, caps)
    }
}

impl From<&Instance> for InstanceFile {
    fn from(instance: &Instance) -> Self {
        InstanceFile {
            n: instance.n(),
            m: instance.m(),
            class: instance.class(),
            valuations: instance
                .valuations()
                .iter()
                .map(|v| match v {
                    Valuation::Additive(values) => ValuationFile::Additive {
                        additive: values.clone(),
                    },
                    Valuation::Explicit(table) => ValuationFile::Table {
                        table: table
                            .iter()
                            .enumerate()
                            .map(|(bits, value)| (bits.to_string(), value.clone()))
                            .collect(),
                    },
                })
                .collect(),
        }
    }
}

//! Batch runs over generated instances and an α grid, one CSV row per
//! (instance, α, algorithm tag).

use std::time::Instant;

use fairdiv::oracle::{exact_mnw, worst_positive_allocation};
use fairdiv::verify::{Property, Verdict};
use fairdiv::instances::generate_with_caps;
use fairdiv::{nash_product, Caps, Error, GeneratorSpec, Instance, Ratio, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::run::{run, Algorithm, Run};

/// `{"instances": [{"family": ..., "count": 20}, ...], "alphas": ["1/2", ...]}`
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub instances: Vec<Value>,
    pub alphas: Vec<Ratio>,
}

impl SweepSpec {
    /// Generator specs with `count` expanded into consecutive seeds.
    pub fn expand(&self) -> Result<Vec<GeneratorSpec>> {
        let mut specs = Vec::new();
        for entry in &self.instances {
            let mut entry = entry.clone();
            let count = match entry.as_object_mut().and_then(|o| o.remove("count")) {
                None => 1,
                Some(c) => c
                    .as_u64()
                    .ok_or_else(|| Error::Malformed(format!("count must be a non-negative integer, got {c}")))?,
            };
            let spec: GeneratorSpec = serde_json::from_value(entry)?;
            specs.extend((0..count).map(|k| spec.with_seed_offset(k)));
        }
        Ok(specs)
    }
}

pub const COLUMNS: [&str; 18] = [
    "instance",
    "alpha",
    "alpha_approx",
    "algorithm",
    "status",
    "nw_positive",
    "achieved_ratio",
    "achieved_ratio_approx",
    "bound",
    "bound_approx",
    "alpha_efx",
    "ef1",
    "beta_mnw",
    "gamma_separation",
    "alpha_gmms",
    "alpha_pmms",
    "error",
    "wall_ms",
];

/// Fixed CSV layout, in [`COLUMNS`] order. `*_approx` columns are floating-point conveniences;
/// the `p/q` columns are exact.
#[derive(Debug, Default, Serialize)]
pub struct SweepRow {
    pub instance: String,
    pub alpha: String,
    pub alpha_approx: String,
    pub algorithm: String,
    pub status: String,
    pub nw_positive: String,
    /// Nash product of the output over the MNW product.
    pub achieved_ratio: String,
    pub achieved_ratio_approx: String,
    /// Product-form lower bound the theorem promises for `achieved_ratio`.
    pub bound: String,
    pub bound_approx: String,
    pub alpha_efx: String,
    pub ef1: String,
    pub beta_mnw: String,
    pub gamma_separation: String,
    pub alpha_gmms: String,
    pub alpha_pmms: String,
    pub error: String,
    pub wall_ms: String,
}

impl SweepRow {
    /// A verdict column reads `fail` while the guarantees are theorems.
    pub fn violates(&self) -> bool {
        self.status == "ok"
            && self.nw_positive == "true"
            && [
                &self.alpha_efx,
                &self.ef1,
                &self.beta_mnw,
                &self.gamma_separation,
                &self.alpha_gmms,
                &self.alpha_pmms,
            ]
            .iter()
            .any(|v| *v == "fail")
    }
}

fn tags(instance: &Instance) -> &'static [&'static str] {
    if instance.is_additive() {
        &["partial-additive", "complete-additive", "poly-additive"]
    } else {
        &["partial-subadditive", "complete-subadditive"]
    }
}

fn ratio_cells(r: &Ratio) -> (String, String) {
    (r.to_string(), format!("{:.6}", r.to_f64()))
}

fn execute(instance: &Instance, tag: &str, alpha: &Ratio, caps: &Caps) -> Result<Run> {
    match tag {
        "partial-additive" => run(instance, Algorithm::Additive, alpha, false, None, caps),
        "complete-additive" => run(instance, Algorithm::Additive, alpha, true, None, caps),
        "poly-additive" => {
            let start = worst_positive_allocation(instance, caps)?.map(|(x, _)| x);
            let start = match start {
                Some(x) => x,
                None => exact_mnw(instance, caps)?.allocation,
            };
            run(instance, Algorithm::Poly, alpha, false, Some(start), caps)
        }
        "partial-subadditive" => run(instance, Algorithm::Subadditive, alpha, false, None, caps),
        "complete-subadditive" => run(instance, Algorithm::Subadditive, alpha, true, None, caps),
        other => Err(Error::Internal(format!("unknown sweep tag {other}"))),
    }
}

fn fill(row: &mut SweepRow, instance: &Instance, out: &Run, alpha: &Ratio) {
    row.status = "ok".into();
    row.nw_positive = out.mnw.nw_positive.to_string();
    if out.mnw.product.is_positive() {
        let achieved = nash_product(instance, &out.allocation) / &out.mnw.product;
        (row.achieved_ratio, row.achieved_ratio_approx) = ratio_cells(&achieved);
        let scale = &out.reference / &out.mnw.product;
        let bound = scale * (alpha + Ratio::one()).recip().pow(instance.n() as u32);
        (row.bound, row.bound_approx) = ratio_cells(&bound);
    }
    for report in &out.reports {
        let cell = match report.verdict {
            Verdict::Pass => "pass".to_string(),
            Verdict::Fail => "fail".to_string(),
        };
        match report.property {
            Property::AlphaEfx { .. } => row.alpha_efx = cell,
            Property::Ef1 => row.ef1 = cell,
            Property::BetaMnw { .. } => row.beta_mnw = cell,
            Property::GammaSeparation { .. } => row.gamma_separation = cell,
            Property::AlphaGmms { .. } => row.alpha_gmms = cell,
            Property::AlphaPmms { .. } => row.alpha_pmms = cell,
            Property::AlphaMms { .. } => {}
        }
    }
}

pub fn sweep(spec: &SweepSpec, caps: &Caps, timing: bool) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for gen in spec.expand()? {
        let id = gen.to_string();
        let instance = generate_with_caps(&gen, caps);
        for alpha in &spec.alphas {
            let (alpha_text, alpha_approx) = ratio_cells(alpha);
            let base = || SweepRow {
                instance: id.clone(),
                alpha: alpha_text.clone(),
                alpha_approx: alpha_approx.clone(),
                ..SweepRow::default()
            };
            let instance = match &instance {
                Ok(instance) => instance,
                Err(e) => {
                    rows.push(SweepRow {
                        algorithm: "generate".into(),
                        status: "error".into(),
                        error: e.to_string(),
                        ..base()
                    });
                    continue;
                }
            };
            for tag in tags(instance) {
                let mut row = SweepRow {
                    algorithm: tag.to_string(),
                    ..base()
                };
                let started = Instant::now();
                match execute(instance, tag, alpha, caps) {
                    Ok(out) => fill(&mut row, instance, &out, alpha),
                    Err(e) => {
                        row.status = "error".into();
                        row.error = e.to_string();
                    }
                }
                if timing {
                    row.wall_ms = format!("{:.3}", started.elapsed().as_secs_f64() * 1000.0);
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

//! Algorithm runs shared by `solve` and `sweep`.

use fairdiv::additive::{algorithm1, algorithm7};
use fairdiv::completion::{envy_cycles, pipeline_additive, pipeline_subadditive};
use fairdiv::oracle::{exact_mnw, MnwResult};
use fairdiv::subadditive::algorithm2;
use fairdiv::verify::{is_alpha_efx, is_beta_mnw, is_ef1, is_gamma_separated, within_golden_threshold};
use fairdiv::{nash_product, Allocation, Caps, Error, GuaranteeReport, Instance, Ratio, Result};
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Algorithm {
    /// Matching on an exact MNW allocation, additive valuations.
    Additive,
    /// White/red/blue matching on an exact MNW allocation, subadditive valuations.
    Subadditive,
    /// Repeated matching with restarts from a given allocation, additive valuations.
    Poly,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Additive => "additive",
            Algorithm::Subadditive => "subadditive",
            Algorithm::Poly => "poly",
        }
    }
}

pub struct Run {
    pub mnw: MnwResult,
    pub start: Option<Allocation>,
    pub partial: Allocation,
    pub allocation: Allocation,
    /// Product the Nash welfare guarantee is measured against.
    pub reference: Ratio,
    pub reports: Vec<GuaranteeReport>,
    pub guarantees_apply: bool,
    pub trace: Value,
}

fn beta(alpha: &Ratio) -> Ratio {
    (alpha + Ratio::one()).recip()
}

/// Runs `algorithm` at `alpha`; `start` is the initial allocation for
/// [`Algorithm::Poly`] and defaults to the exact MNW allocation.
pub fn run(
    instance: &Instance,
    algorithm: Algorithm,
    alpha: &Ratio,
    complete: bool,
    start: Option<Allocation>,
    caps: &Caps,
) -> Result<Run> {
    match (algorithm, complete) {
        (Algorithm::Additive, true) => {
            let out = pipeline_additive(instance, alpha, caps)?;
            let (_, state) = algorithm1(instance, &out.mnw.allocation, alpha)?;
            let trace = json!({ "steps": state.trace, "placements": out.placements });
            Ok(Run {
                reference: out.mnw.product.clone(),
                start: None,
                partial: out.partial,
                allocation: out.allocation,
                reports: out.reports,
                guarantees_apply: out.guarantees_apply,
                mnw: out.mnw,
                trace,
            })
        }
        (Algorithm::Subadditive, true) => {
            let out = pipeline_subadditive(instance, alpha, caps)?;
            let (_, state) = algorithm2(instance, &out.mnw.allocation, alpha)?;
            let trace = json!({
                "steps": state.trace,
                "separated": out.separated,
                "placements": out.placements,
            });
            Ok(Run {
                reference: out.mnw.product.clone(),
                start: None,
                partial: out.partial,
                allocation: out.allocation,
                reports: out.reports,
                guarantees_apply: out.guarantees_apply,
                mnw: out.mnw,
                trace,
            })
        }
        (Algorithm::Additive, false) => {
            let mnw = exact_mnw(instance, caps)?;
            let (partial, state) = algorithm1(instance, &mnw.allocation, alpha)?;
            let reports = vec![
                is_alpha_efx(instance, &partial, alpha),
                is_ef1(instance, &partial),
                is_beta_mnw(instance, &partial, &beta(alpha), &mnw.product)?,
                is_gamma_separated(instance, &partial, alpha),
            ];
            Ok(Run {
                reference: mnw.product.clone(),
                start: None,
                allocation: partial.clone(),
                partial,
                reports,
                guarantees_apply: mnw.nw_positive,
                mnw,
                trace: json!({ "steps": state.trace }),
            })
        }
        (Algorithm::Subadditive, false) => {
            let mnw = exact_mnw(instance, caps)?;
            let (partial, state) = algorithm2(instance, &mnw.allocation, alpha)?;
            let reports = vec![
                is_alpha_efx(instance, &partial, alpha),
                is_beta_mnw(instance, &partial, &beta(alpha), &mnw.product)?,
            ];
            Ok(Run {
                reference: mnw.product.clone(),
                start: None,
                allocation: partial.clone(),
                partial,
                reports,
                guarantees_apply: mnw.nw_positive,
                mnw,
                trace: json!({ "steps": state.trace }),
            })
        }
        (Algorithm::Poly, complete) => {
            if complete && !within_golden_threshold(alpha) {
                let lhs = alpha.pow(2) + alpha;
                return Err(Error::Precondition(format!(
                    "completing needs alpha^2 + alpha <= 1, got alpha^2 + alpha = {lhs} > 1"
                )));
            }
            let mnw = exact_mnw(instance, caps)?;
            let x0 = start.unwrap_or_else(|| mnw.allocation.clone());
            x0.check_fits(instance)?;
            let reference = nash_product(instance, &x0);
            let product_ratio = if mnw.product.is_zero() {
                Ratio::one()
            } else {
                &reference / &mnw.product
            };
            let out = algorithm7(instance, &x0, alpha, &product_ratio)?;
            let partial = out.allocation.clone();
            let (allocation, placements) = if complete {
                envy_cycles(instance, &partial, partial.unallocated())?
            } else {
                (partial.clone(), Vec::new())
            };
            let reports = vec![
                is_alpha_efx(instance, &allocation, alpha),
                is_beta_mnw(instance, &allocation, &beta(alpha), &reference)?,
            ];
            Ok(Run {
                guarantees_apply: reference.is_positive(),
                reference,
                start: Some(x0),
                partial,
                allocation,
                reports,
                mnw,
                trace: json!({
                    "calls": out.calls,
                    "improvements": out.improvements,
                    "product_ratio": product_ratio,
                    "placements": placements,
                }),
            })
        }
    }
}

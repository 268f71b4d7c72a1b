//! Exact fair division of indivisible goods.
//!
//! Partial and complete allocations that are simultaneously α-EFX and a
//! fraction of maximum Nash welfare, together with exact brute-force oracles
//! and checkers for every guarantee. All arithmetic is over [`Ratio`].

pub mod additive;
pub mod allocation;
pub mod bundle;
pub mod caps;
pub mod completion;
pub mod error;
pub mod instance;
pub mod instances;
pub mod oracle;
pub mod ratio;
pub mod subadditive;
pub mod verify;

pub use allocation::{nash_product, Allocation};
pub use bundle::Bundle;
pub use caps::Caps;
pub use error::{Error, Result};
pub use instance::{check_class, ClassReport, Instance, Valuation, ValuationClass};
pub use instances::{generate, GeneratorSpec};
pub use ratio::Ratio;
pub use verify::GuaranteeReport;

//! Enumeration limits for the exponential checkers and oracles.

use crate::error::{Error, Result};

/// Environment variable that overrides [`Caps::enumeration`].
pub const CAP_ENV: &str = "FAIRDIV_CAP";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Upper bound on the number of states any brute-force search may visit
    /// (`n^m` for the MNW oracle, `(n+1)^m` for partial allocations, `k^|S|`
    /// for maximin shares).
    pub enumeration: u64,
    /// Largest `m` accepted for explicit (table) valuations.
    pub explicit_items: usize,
    /// Largest `n` for which the groupwise maximin-share check runs.
    pub gmms_agents: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumeration: 20_000_000,
            explicit_items: 16,
            gmms_agents: 6,
        }
    }
}

impl Caps {
    /// Defaults, with [`CAP_ENV`] applied when set.
    pub fn from_env() -> Result<Self> {
        let mut caps = Caps::default();
        if let Ok(text) = std::env::var(CAP_ENV) {
            caps.enumeration = text
                .trim()
                .parse()
                .map_err(|_| Error::Precondition(format!("{CAP_ENV}={text:?} is not an integer")))?;
        }
        Ok(caps)
    }

    /// Fails unless `base^exp` states fit under the enumeration cap.
    pub fn check_power(&self, what: &str, base: u64, exp: usize) -> Result<u64> {
        let mut states: u64 = 1;
        for _ in 0..exp {
            states = match states.checked_mul(base) {
                Some(s) if s <= self.enumeration => s,
                _ => {
                    return Err(Error::Capacity {
                        what: what.to_string(),
                        needed: format!("{base}^{exp}"),
                        cap: self.enumeration,
                    })
                }
            };
        }
        Ok(states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_check() {
        let caps = Caps {
            enumeration: 1000,
            ..Caps::default()
        };
        assert_eq!(caps.check_power("x", 10, 3).unwrap(), 1000);
        assert!(matches!(caps.check_power("x", 10, 4), Err(Error::Capacity { .. })));
        assert_eq!(caps.check_power("x", 0, 0).unwrap(), 1);
    }
}

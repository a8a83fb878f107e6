use crate::error::{Error, Result};

/// Environment variable that overrides both enumeration caps.
pub const BUDGET_ENV: &str = "LACELAB_BUDGET";

const DEFAULT_CAP: u64 = 100_000_000;

/// Caps on the number of configurations a single sweep may visit.
///
/// `single` bounds one-current and spin sweeps (nominally `3^|B|` and
/// `2^|Λ|`), `pair` bounds two-current sweeps (nominally `9^|B|`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub single: u64,
    pub pair: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self { single: DEFAULT_CAP, pair: DEFAULT_CAP }
    }
}

impl Budget {
    pub fn uniform(cap: u64) -> Self {
        Self { single: cap, pair: cap }
    }

    /// Defaults, overridden by `LACELAB_BUDGET` when it parses as an integer
    /// (scientific notation such as `1e9` is accepted).
    pub fn from_env() -> Self {
        std::env::var(BUDGET_ENV)
            .ok()
            .and_then(|s| parse_cap(&s))
            .map(Self::uniform)
            .unwrap_or_default()
    }

    pub fn check_single(&self, what: &'static str, needed: f64) -> Result<()> {
        check(what, needed, self.single)
    }

    pub fn check_pair(&self, what: &'static str, needed: f64) -> Result<()> {
        check(what, needed, self.pair)
    }
}

pub fn parse_cap(s: &str) -> Option<u64> {
    let s = s.trim();
    s.parse::<u64>().ok().or_else(|| {
        let f: f64 = s.parse().ok()?;
        (f.is_finite() && f >= 1.0 && f < 1.8e19).then_some(f as u64)
    })
}

fn check(what: &'static str, needed: f64, budget: u64) -> Result<()> {
    if needed > budget as f64 {
        Err(Error::BudgetExceeded { what, needed, budget })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caps() {
        assert_eq!(parse_cap("1e9"), Some(1_000_000_000));
        assert_eq!(parse_cap(" 5000 "), Some(5000));
        assert_eq!(parse_cap("lots"), None);
        let b = Budget::uniform(10);
        assert!(b.check_single("x", 10.0).is_ok());
        assert!(matches!(b.check_pair("x", 11.0), Err(Error::BudgetExceeded { .. })));
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Type-II forward-start call: at `start` the holder receives a call expiring
/// at `maturity` struck at `e^alpha S_start`. `t` is the valuation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub t: f64,
    pub start: f64,
    pub maturity: f64,
    pub alpha: f64,
}

impl ContractSpec {
    pub fn new(t: f64, start: f64, maturity: f64, alpha: f64) -> Result<Self> {
        finite(t, "t")?;
        finite(start, "start")?;
        finite(maturity, "maturity")?;
        finite(alpha, "alpha")?;
        if !(t <= start && start < maturity) {
            return Err(Error::InvalidInput(format!(
                "need t <= s < T, got t = {t}, s = {start}, T = {maturity}"
            )));
        }
        Ok(Self { t, start, maturity, alpha })
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// Remaining maturity after the start date, `T - s`.
    pub fn gap(&self) -> f64 {
        self.maturity - self.start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_is_enforced() {
        assert!(ContractSpec::new(0.0, 0.5, 0.6, 0.0).is_ok());
        assert!(ContractSpec::new(0.0, 0.0, 0.1, 0.0).is_ok());
        assert!(ContractSpec::new(0.0, 0.6, 0.6, 0.0).is_err());
        assert!(ContractSpec::new(0.7, 0.6, 0.8, 0.0).is_err());
        assert!(ContractSpec::new(0.0, 0.5, 0.6, f64::NAN).is_err());
    }
}

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// Projection probabilities onto the three detectable classes:
/// all spins down (every ion bright), all up (every ion dark), and the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Populations {
    pub p_dd: f64,
    pub p_uu: f64,
    pub p_mixed: f64,
}

impl Populations {
    pub fn new(p_dd: f64, p_uu: f64, p_mixed: f64) -> Result<Self> {
        let p = Self { p_dd, p_uu, p_mixed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.p_dd, self.p_uu, self.p_mixed];
        let bad = parts.iter().any(|p| !p.is_finite() || *p < -SUM_TOL)
            || (parts.iter().sum::<f64>() - 1.0).abs() > SUM_TOL;
        if bad {
            return Err(Error::InvalidProbabilities(self.p_dd, self.p_uu, self.p_mixed));
        }
        Ok(())
    }

    /// Collapses spin-configuration probabilities (index 0 = all up, last = all down).
    pub fn from_spin_populations(spin: &[f64]) -> Self {
        let p_uu = spin.first().copied().unwrap_or(0.0);
        let p_dd = spin.last().copied().unwrap_or(0.0);
        let total: f64 = spin.iter().sum();
        Self { p_dd, p_uu, p_mixed: total - p_uu - p_dd }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_dd, self.p_uu, self.p_mixed]
    }
}

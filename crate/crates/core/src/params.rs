//! Global coupling-constant record. γ ∈ (0,2) is fixed per run; everything
//! else (Q, κ, insertion weights) derives from it.

use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LqgParams {
    pub gamma: f64,
}

impl LqgParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(CoreError::InvalidParameter(format!(
                "gamma must lie in (0,2), got {gamma}"
            )));
        }
        Ok(LqgParams { gamma })
    }

    /// Background charge Q = γ/2 + 2/γ.
    pub fn q(&self) -> f64 {
        self.gamma / 2.0 + 2.0 / self.gamma
    }

    /// κ = γ².
    pub fn kappa(&self) -> f64 {
        self.gamma * self.gamma
    }

    /// Boundary insertion parameter of a weight-W disk: β = Q + γ/2 − W/γ.
    /// Requires W ≥ γ²/2 (thick range).
    pub fn disk_beta(&self, weight: f64) -> Result<f64> {
        if weight < self.gamma * self.gamma / 2.0 - 1e-12 {
            return Err(CoreError::WeightBelowThreshold);
        }
        Ok(self.q() + self.gamma / 2.0 - weight / self.gamma)
    }

    /// Drift magnitude Q − β = W/γ − γ/2 of the disk radial process.
    pub fn disk_drift(&self, weight: f64) -> Result<f64> {
        Ok(self.q() - self.disk_beta(weight)?)
    }

    /// Bulk insertion parameter of a weight-W sphere: α = Q − W/(2γ), W > 0.
    pub fn sphere_alpha(&self, weight: f64) -> Result<f64> {
        if weight <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "sphere weight must be positive, got {weight}"
            )));
        }
        Ok(self.q() - weight / (2.0 * self.gamma))
    }

    /// Drift magnitude Q − α = W/(2γ) of the sphere radial process.
    pub fn sphere_drift(&self, weight: f64) -> Result<f64> {
        self.sphere_alpha(weight).map(|a| self.q() - a)
    }
}

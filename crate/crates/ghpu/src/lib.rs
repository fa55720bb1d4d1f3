//! Distance computations for finite loop-decorated metric measure spaces:
//! a 4-tuple (points, metric, masses, step-parametrized loop). The distance
//! is the infimum over common embeddings of Hausdorff + Prokhorov + uniform
//! terms; small instances are solved exactly over correspondences, larger
//! ones bounded by local search.

pub mod dist;
pub mod uniform;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GhpuError {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("size exceeded: exact solver handles n1+n2 ≤ {limit}, got {got}")]
    SizeExceeded { limit: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, GhpuError>;

/// Finite metric measure space with a parametrized loop. The loop visits
/// `loop_points[k]` for a duration `steps[k]`, cyclically, with no
/// distinguished starting point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteMMLoopSpace {
    pub dist: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
    #[serde(rename = "loop")]
    pub loop_points: Vec<usize>,
    pub steps: Vec<f64>,
}

impl FiniteMMLoopSpace {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn total_duration(&self) -> f64 {
        self.steps.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.dist.len() != n || self.dist.iter().any(|row| row.len() != n) {
            return Err(GhpuError::InvalidSpace("distance matrix shape".into()));
        }
        for i in 0..n {
            if self.dist[i][i] != 0.0 {
                return Err(GhpuError::InvalidSpace(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                if (self.dist[i][j] - self.dist[j][i]).abs() > 1e-12 {
                    return Err(GhpuError::InvalidSpace(format!("asymmetry at ({i},{j})")));
                }
                if self.dist[i][j] < 0.0 {
                    return Err(GhpuError::InvalidSpace(format!("negative entry ({i},{j})")));
                }
                for k in 0..n {
                    if self.dist[i][j] > self.dist[i][k] + self.dist[k][j] + 1e-9 {
                        return Err(GhpuError::InvalidSpace(format!(
                            "triangle violation ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        if self.mass.iter().any(|m| *m < 0.0) {
            return Err(GhpuError::InvalidSpace("negative mass".into()));
        }
        if self.loop_points.len() != self.steps.len() || self.loop_points.is_empty() {
            return Err(GhpuError::InvalidSpace("loop/step length mismatch".into()));
        }
        if self.loop_points.iter().any(|&p| p >= n) {
            return Err(GhpuError::InvalidSpace("loop point out of range".into()));
        }
        if self.steps.iter().any(|s| *s <= 0.0) {
            return Err(GhpuError::InvalidSpace("non-positive step duration".into()));
        }
        Ok(())
    }

    /// Constant-speed reparametrization to the given total duration.
    pub fn with_duration(&self, duration: f64) -> FiniteMMLoopSpace {
        let scale = duration / self.total_duration();
        let mut out = self.clone();
        for s in out.steps.iter_mut() {
            *s *= scale;
        }
        out
    }

    /// Rescale all distances (masses and durations untouched).
    pub fn rescale_distances(&self, s: f64) -> FiniteMMLoopSpace {
        let mut out = self.clone();
        for row in out.dist.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let s: FiniteMMLoopSpace = serde_json::from_value(v.clone())
            .map_err(|e| GhpuError::InvalidSpace(format!("json: {e}")))?;
        s.validate()?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_point_space() -> FiniteMMLoopSpace {
        FiniteMMLoopSpace {
            dist: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            mass: vec![1.0, 2.0],
            loop_points: vec![0, 1],
            steps: vec![0.5, 0.5],
        }
    }

    #[test]
    fn validation() {
        let s = two_point_space();
        s.validate().unwrap();
        let mut bad = s.clone();
        bad.dist[0][1] = 5.0;
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.loop_points = vec![0, 7];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = two_point_space();
        let v = s.to_json();
        assert!(v.get("loop").is_some());
        let back = FiniteMMLoopSpace::from_json(&v).unwrap();
        assert_eq!(back.mass, s.mass);
        assert_eq!(back.dist, s.dist);
    }

    #[test]
    fn reparametrization() {
        let s = two_point_space().with_duration(3.0);
        assert!((s.total_duration() - 3.0).abs() < 1e-15);
        assert_eq!(s.steps, vec![1.5, 1.5]);
    }
}

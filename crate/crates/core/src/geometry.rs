//! Space-time points, the parabolic distance and parabolic cylinders.
//!
//! Conventions fixed here are used everywhere else: spatial balls are open,
//! centered cylinders use the time interval `[t - ρ²/2, t + ρ²/2)` and backward
//! cylinders use `(t - ρ², t]`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn origin(dim: usize) -> Self {
        Self { x: vec![0.0; dim], t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Euclidean distance between spatial coordinates.
pub fn spatial_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// `max{|x_a - x_b|, sqrt(2 |t_a - t_b|)}`.
pub fn parabolic_distance(a: &SpaceTimePoint, b: &SpaceTimePoint) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(parabolic_distance_raw(&a.x, a.t, &b.x, b.t))
}

#[inline]
pub(crate) fn parabolic_distance_raw(xa: &[f64], ta: f64, xb: &[f64], tb: f64) -> f64 {
    spatial_distance(xa, xb).max((2.0 * (ta - tb).abs()).sqrt())
}

/// Lebesgue measure of the unit ball in `ℝ^N`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    PI.powf(n / 2.0) / gamma(n / 2.0 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CylinderVariant {
    /// `B_ρ(x) × (t - ρ², t]`
    Backward,
    /// `B_ρ(x) × [t - ρ²/2, t + ρ²/2)`
    Centered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub center: SpaceTimePoint,
    pub radius: f64,
    pub variant: CylinderVariant,
}

impl ParabolicCylinder {
    pub fn new(center: SpaceTimePoint, radius: f64, variant: CylinderVariant) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("cylinder radius {radius}")));
        }
        Ok(Self { center, radius, variant })
    }

    pub fn centered(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        Self::new(center, radius, CylinderVariant::Centered)
    }

    pub fn backward(center: SpaceTimePoint, radius: f64) -> Result<Self> {
        Self::new(center, radius, CylinderVariant::Backward)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Time extent `(lo, hi)`; closedness follows the variant's convention.
    pub fn time_interval(&self) -> (f64, f64) {
        let r2 = self.radius * self.radius;
        let t = self.center.t;
        match self.variant {
            CylinderVariant::Backward => (t - r2, t),
            CylinderVariant::Centered => (t - r2 / 2.0, t + r2 / 2.0),
        }
    }

    pub fn contains_time(&self, s: f64) -> bool {
        let (lo, hi) = self.time_interval();
        match self.variant {
            CylinderVariant::Backward => lo < s && s <= hi,
            CylinderVariant::Centered => lo <= s && s < hi,
        }
    }

    pub fn contains(&self, p: &SpaceTimePoint) -> bool {
        spatial_distance(&p.x, &self.center.x) < self.radius && self.contains_time(p.t)
    }

    /// `|B_ρ| ρ²`, the same for both variants.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32) * self.radius * self.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: &[f64], t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x.to_vec(), t)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(parabolic_distance(&p(&[0.0, 0.0], 0.0), &p(&[1.0, 0.0], 0.0)).unwrap(), 1.0);
        assert_eq!(parabolic_distance(&p(&[0.0], 0.0), &p(&[0.0], -2.0)).unwrap(), 2.0);
        assert_eq!(parabolic_distance(&p(&[0.0, 0.0], 0.0), &p(&[3.0, 4.0], -8.0)).unwrap(), 5.0);
        assert!(matches!(
            parabolic_distance(&p(&[0.0], 0.0), &p(&[0.0, 1.0], 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn membership_conventions() {
        let c = ParabolicCylinder::centered(p(&[0.0], 0.0), 1.0).unwrap();
        assert!(c.contains(&p(&[0.0], -0.5)));
        assert!(!c.contains(&p(&[0.0], 0.5)));
        assert!(!c.contains(&p(&[1.0], 0.0)));
        let b = ParabolicCylinder::backward(p(&[0.0], 0.0), 1.0).unwrap();
        assert!(b.contains(&p(&[0.0], 0.0)));
        assert!(!b.contains(&p(&[0.0], -1.0)));
        assert!(ParabolicCylinder::centered(p(&[0.0], 0.0), 0.0).is_err());
    }

    #[test]
    fn centered_membership_matches_distance() {
        // inside a centered cylinder iff parabolic distance < ρ, away from the closed face
        let c = ParabolicCylinder::centered(p(&[0.2, -0.1], 0.3), 0.7).unwrap();
        for i in 0..200 {
            let s = i as f64 * 0.37;
            let q = p(&[s.sin(), (1.3 * s).cos() * 0.8], 0.3 + 0.4 * (0.7 * s).sin());
            let d = parabolic_distance(&q, &c.center).unwrap();
            if q.t != c.time_interval().0 {
                assert_eq!(c.contains(&q), d < c.radius);
            }
        }
    }
}

//! Synthetic maps used to exercise the estimators. They are not DA maps.

use crate::error::{Error, Result};
use crate::torus::{min_image, Dynamics, Mat2, TorusPoint, Vec2};

/// The identity of T².
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMap;

impl Dynamics for IdentityMap {
    fn apply_lift(&self, p: TorusPoint) -> Vec2 {
        p.as_vec2()
    }

    fn jacobian(&self, _p: TorusPoint) -> Mat2 {
        Mat2::IDENTITY
    }

    fn inverse_apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(p)
    }
}

/// Rigid translation `x ↦ x + shift`.
#[derive(Clone, Copy, Debug)]
pub struct Translation {
    pub shift: Vec2,
}

impl Dynamics for Translation {
    fn apply_lift(&self, p: TorusPoint) -> Vec2 {
        p.as_vec2() + self.shift
    }

    fn jacobian(&self, _p: TorusPoint) -> Mat2 {
        Mat2::IDENTITY
    }

    fn inverse_apply(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(p.translate(-self.shift))
    }
}

/// Two attracting fixed points, `(0.25, 0.5)` on the left half and
/// `(0.75, 0.5)` on the right half; each half contracts by `rate` toward its
/// point. With small noise the halves stay invariant, giving two ergodic
/// stationary measures.
#[derive(Clone, Copy, Debug)]
pub struct TwoAttractor {
    pub rate: f64,
}

impl Default for TwoAttractor {
    fn default() -> Self {
        TwoAttractor { rate: 0.5 }
    }
}

impl TwoAttractor {
    fn target(p: TorusPoint) -> Vec2 {
        if p.x() < 0.5 {
            Vec2::new(0.25, 0.5)
        } else {
            Vec2::new(0.75, 0.5)
        }
    }
}

impl Dynamics for TwoAttractor {
    fn apply_lift(&self, p: TorusPoint) -> Vec2 {
        let c = Self::target(p);
        let d = Vec2::new(min_image(p.x() - c.x), min_image(p.y() - c.y));
        c + self.rate * d
    }

    fn jacobian(&self, _p: TorusPoint) -> Mat2 {
        Mat2::scaled(self.rate)
    }

    fn inverse_apply(&self, _p: TorusPoint) -> Result<TorusPoint> {
        Err(Error::InvalidParams("the two-attractor fixture is not invertible".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_attractor_fixed_points() {
        let m = TwoAttractor::default();
        let l = TorusPoint::new(0.25, 0.5).unwrap();
        let r = TorusPoint::new(0.75, 0.5).unwrap();
        assert_eq!(m.apply(l), l);
        assert_eq!(m.apply(r), r);
        let p = m.apply(TorusPoint::new(0.05, 0.9).unwrap());
        assert!((p.x() - 0.15).abs() < 1e-15 && (p.y() - 0.7).abs() < 1e-15);
        assert!(m.inverse_apply(l).is_err());
    }

    #[test]
    fn translation_inverse() {
        let t = Translation { shift: Vec2::new(0.3, 0.9) };
        let p = TorusPoint::new(0.1, 0.2).unwrap();
        assert!(t.inverse_apply(t.apply(p)).unwrap().distance(p) < 1e-15);
    }
}

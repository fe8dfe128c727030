//! Kinematic car with time dilation.
//!
//! The car is the convexified Reeds-Shepp model: the rear-axle point moves
//! along its heading with normalized speed `u1` while the heading turns at
//! `kappa_max * u2`, both controls living in `[-1, 1]`. Derivatives are taken
//! with respect to normalized time `tau in [0, 1]`, so every right-hand side
//! carries the segment's time-dilation factor `sigma`.

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Pose of the tracked point. Heading is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarState {
    pub x_w: f64,
    pub y_w: f64,
    pub theta: f64,
}

impl CarState {
    pub const fn new(x_w: f64, y_w: f64, theta: f64) -> Self {
        Self { x_w, y_w, theta }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x_w, self.y_w, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x_w.is_finite() && self.y_w.is_finite() && self.theta.is_finite()
    }

    /// Componentwise linear interpolation, heading included.
    pub fn lerp(&self, other: &CarState, t: f64) -> CarState {
        CarState::new(
            self.x_w + t * (other.x_w - self.x_w),
            self.y_w + t * (other.y_w - self.y_w),
            self.theta + t * (other.theta - self.theta),
        )
    }
}

/// Normalized speed and steering.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CarControl {
    pub u1: f64,
    pub u2: f64,
}

impl CarControl {
    pub const ZERO: CarControl = CarControl { u1: 0.0, u2: 0.0 };

    pub const fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.u1, self.u2)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn in_box(&self, tol: f64) -> bool {
        self.u1.abs() <= 1.0 + tol && self.u2.abs() <= 1.0 + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Maximum curvature `1/R` in 1/m.
    pub kappa_max: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { kappa_max: 1.0 }
    }
}

impl ModelParams {
    pub fn turning_radius(&self) -> f64 {
        1.0 / self.kappa_max
    }
}

/// Reference point `(sigma_bar, x_bar, u_bar)` a linearization is taken at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationPoint {
    pub sigma_bar: f64,
    pub x_bar: CarState,
    pub u_bar: CarControl,
}

/// First-order model `F ~ A x + B u + S sigma + w` around a reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub a: Matrix3<f64>,
    pub b: Matrix3x2<f64>,
    pub s: Vector3<f64>,
    pub w: Vector3<f64>,
}

/// Time-dilated continuous dynamics together with their Jacobians.
///
/// The discretizer is generic over this trait so that it can be exercised on
/// systems with closed-form discretizations.
pub trait Dynamics: Sync {
    fn derivative(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Vector3<f64>;
    fn linearize(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Linearization;
}

impl ModelParams {
    fn rhs(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Vector3<f64> {
        let (sin, cos) = x[2].sin_cos();
        Vector3::new(sigma * cos * u[0], sigma * sin * u[0], sigma * self.kappa_max * u[1])
    }
}

impl Dynamics for ModelParams {
    fn derivative(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Vector3<f64> {
        self.rhs(x, u, sigma)
    }

    fn linearize(&self, x: &Vector3<f64>, u: &Vector2<f64>, sigma: f64) -> Linearization {
        let (sin, cos) = x[2].sin_cos();
        let mut a = Matrix3::zeros();
        a[(0, 2)] = -sigma * sin * u[0];
        a[(1, 2)] = sigma * cos * u[0];
        let b = Matrix3x2::new(sigma * cos, 0.0, sigma * sin, 0.0, 0.0, sigma * self.kappa_max);
        let s = Vector3::new(cos * u[0], sin * u[0], self.kappa_max * u[1]);
        let w = -(a * x) - b * u;
        Linearization { a, b, s, w }
    }
}

/// State derivative with respect to normalized time.
pub fn dynamics(x: &CarState, u: &CarControl, sigma: f64, params: &ModelParams) -> CarState {
    CarState::from_vector(&params.rhs(&x.to_vector(), &u.to_vector(), sigma))
}

/// `A = dF/dx`, `B = dF/du`, `S = dF/dsigma` at `z` and the defect `w = -A x - B u`.
pub fn jacobians(z: &LinearizationPoint, params: &ModelParams) -> Linearization {
    params.linearize(&z.x_bar.to_vector(), &z.u_bar.to_vector(), z.sigma_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const UNIT: ModelParams = ModelParams { kappa_max: 1.0 };

    #[test]
    fn forward_motion_along_x() {
        let d = dynamics(&CarState::new(0.0, 0.0, 0.0), &CarControl::new(1.0, 0.0), 1.0, &UNIT);
        assert_eq!(d, CarState::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn heading_rotates_motion_and_sigma_scales() {
        let d = dynamics(&CarState::new(0.0, 0.0, FRAC_PI_2), &CarControl::new(1.0, 0.0), 2.0, &UNIT);
        assert!(d.x_w.abs() < 1e-15);
        assert_eq!(d.y_w, 2.0);
        assert_eq!(d.theta, 0.0);
    }

    #[test]
    fn steering_only_turns() {
        let d = dynamics(&CarState::new(0.0, 0.0, 0.0), &CarControl::new(0.0, 1.0), 1.0, &UNIT);
        assert_eq!(d, CarState::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn zero_speed_kills_heading_sensitivity() {
        let z = LinearizationPoint {
            sigma_bar: 1.0,
            x_bar: CarState::new(0.0, 0.0, 0.0),
            u_bar: CarControl::ZERO,
        };
        assert_eq!(jacobians(&z, &UNIT).a, Matrix3::zeros());
    }

    #[test]
    fn linearization_exact_at_expansion_point() {
        let z = LinearizationPoint {
            sigma_bar: 1.0,
            x_bar: CarState::new(0.0, 0.0, 0.0),
            u_bar: CarControl::new(1.0, 0.0),
        };
        let lin = jacobians(&z, &UNIT);
        let x = z.x_bar.to_vector();
        let u = z.u_bar.to_vector();
        let rebuilt = lin.a * x + lin.b * u + lin.s * z.sigma_bar + lin.w;
        assert_eq!(rebuilt, UNIT.derivative(&x, &u, 1.0));
        assert_eq!(lin.w, Vector3::new(-1.0, 0.0, 0.0));
    }
}

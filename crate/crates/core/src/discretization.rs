//! First-order-hold discretization and variable scaling.
//!
//! Each interval `[tau_k, tau_k+1]` is integrated independently from the
//! reference knot `x_k`. The fundamental matrix and its inverse are carried
//! as one joint ODE together with the input, dilation, and defect integrals,
//! so no matrix is ever inverted numerically.

use nalgebra::{Matrix3, Matrix3x2, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::SegmentTrajectory;
use crate::vehicle::Dynamics;

#[derive(Debug, Error, PartialEq)]
pub enum DiscretizationError {
    #[error("degenerate interval [{0}, {1}]")]
    DegenerateInterval(f64, f64),
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("time dilation must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("states and controls disagree on knot count ({states} vs {controls})")]
    LengthMismatch { states: usize, controls: usize },
    #[error("non-finite values while integrating interval {0}")]
    NonFinite(usize),
    #[error("zero-width scaling range for component {0}")]
    ZeroWidthRange(usize),
}

/// Interpolation weights `(lambda_minus, lambda_plus)` of the first-order hold.
pub fn foh_coefficients(tau: f64, tau_k: f64, tau_k1: f64) -> Result<(f64, f64), DiscretizationError> {
    let width = tau_k1 - tau_k;
    if !(width > 0.0) {
        return Err(DiscretizationError::DegenerateInterval(tau_k, tau_k1));
    }
    let plus = (tau - tau_k) / width;
    Ok((1.0 - plus, plus))
}

/// `x_k+1 = A x_k + B- u_k + B+ u_k+1 + S sigma + w` for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalModel {
    pub a: Matrix3<f64>,
    pub b_minus: Matrix3x2<f64>,
    pub b_plus: Matrix3x2<f64>,
    pub s: Vector3<f64>,
    pub w: Vector3<f64>,
    /// Reference state integrated with the nonlinear dynamics to `tau_k+1`.
    pub propagated: Vector3<f64>,
}

impl IntervalModel {
    pub fn step(&self, x: &Vector3<f64>, u: &Vector2<f64>, u_next: &Vector2<f64>, sigma: f64) -> Vector3<f64> {
        self.a * x + self.b_minus * u + self.b_plus * u_next + self.s * sigma + self.w
    }
}

/// Discrete linear time-varying model of one segment, `K - 1` intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvSystem {
    pub intervals: Vec<IntervalModel>,
}

impl LtvSystem {
    pub fn knots(&self) -> usize {
        self.intervals.len() + 1
    }

    /// Roll the discrete model forward from `x0`.
    pub fn propagate(&self, x0: &Vector3<f64>, controls: &[Vector2<f64>], sigma: f64) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.knots());
        out.push(*x0);
        for (k, m) in self.intervals.iter().enumerate() {
            let next = m.step(&out[k], &controls[k], &controls[k + 1], sigma);
            out.push(next);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FohConfig {
    /// Fixed RK4 substeps per interval.
    pub substeps: usize,
}

impl Default for FohConfig {
    fn default() -> Self {
        Self { substeps: 16 }
    }
}

// x(3) | Phi(9) | Phi^-1(9) | int Phi^-1 B l-(6) | int Phi^-1 B l+(6) | int Phi^-1 S(3) | int Phi^-1 w(3)
type Packed = SVector<f64, 39>;

const X: usize = 0;
const PHI: usize = 3;
const PSI: usize = 12;
const BM: usize = 21;
const BP: usize = 27;
const S: usize = 33;
const W: usize = 36;

fn mat3(p: &Packed, at: usize) -> Matrix3<f64> {
    Matrix3::from_column_slice(&p.as_slice()[at..at + 9])
}

fn mat32(p: &Packed, at: usize) -> Matrix3x2<f64> {
    Matrix3x2::from_column_slice(&p.as_slice()[at..at + 6])
}

fn vec3(p: &Packed, at: usize) -> Vector3<f64> {
    Vector3::from_column_slice(&p.as_slice()[at..at + 3])
}

fn put(p: &mut Packed, at: usize, src: &[f64]) {
    p.as_mut_slice()[at..at + src.len()].copy_from_slice(src);
}

struct IntervalOde<'a, D> {
    dynamics: &'a D,
    u_k: Vector2<f64>,
    u_k1: Vector2<f64>,
    sigma: f64,
    width: f64,
}

impl<D: Dynamics> IntervalOde<'_, D> {
    /// `s` is the local time measured from `tau_k`.
    fn rhs(&self, s: f64, p: &Packed) -> Packed {
        let plus = s / self.width;
        let minus = 1.0 - plus;
        let u = self.u_k * minus + self.u_k1 * plus;
        let x = vec3(p, X);
        let lin = self.dynamics.linearize(&x, &u, self.sigma);
        let phi = mat3(p, PHI);
        let psi = mat3(p, PSI);

        let mut d = Packed::zeros();
        put(&mut d, X, self.dynamics.derivative(&x, &u, self.sigma).as_slice());
        put(&mut d, PHI, (lin.a * phi).as_slice());
        put(&mut d, PSI, (-(psi * lin.a)).as_slice());
        let psi_b = psi * lin.b;
        put(&mut d, BM, (psi_b * minus).as_slice());
        put(&mut d, BP, (psi_b * plus).as_slice());
        put(&mut d, S, (psi * lin.s).as_slice());
        put(&mut d, W, (psi * lin.w).as_slice());
        d
    }
}

fn rk4<F: Fn(f64, &Packed) -> Packed>(f: F, mut y: Packed, width: f64, steps: usize) -> Packed {
    let h = width / steps as f64;
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(y + k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(y + k2 * (0.5 * h)));
        let k4 = f(t + h, &(y + k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    y
}

fn discretize_interval<D: Dynamics>(
    dynamics: &D,
    x_k: &Vector3<f64>,
    u_k: &Vector2<f64>,
    u_k1: &Vector2<f64>,
    sigma: f64,
    width: f64,
    substeps: usize,
) -> IntervalModel {
    let mut init = Packed::zeros();
    put(&mut init, X, x_k.as_slice());
    put(&mut init, PHI, Matrix3::<f64>::identity().as_slice());
    put(&mut init, PSI, Matrix3::<f64>::identity().as_slice());
    let ode = IntervalOde { dynamics, u_k: *u_k, u_k1: *u_k1, sigma, width };
    let end = rk4(|s, p| ode.rhs(s, p), init, width, substeps);

    let a = mat3(&end, PHI);
    IntervalModel {
        a,
        b_minus: a * mat32(&end, BM),
        b_plus: a * mat32(&end, BP),
        s: a * vec3(&end, S),
        w: a * vec3(&end, W),
        propagated: vec3(&end, X),
    }
}

/// Discretize arbitrary dynamics along reference knots on the uniform grid.
pub fn discretize_with<D: Dynamics>(
    dynamics: &D,
    states: &[Vector3<f64>],
    controls: &[Vector2<f64>],
    sigma: f64,
    config: &FohConfig,
) -> Result<LtvSystem, DiscretizationError> {
    let knots = states.len();
    if knots < 2 {
        return Err(DiscretizationError::TooFewKnots(knots));
    }
    if controls.len() != knots {
        return Err(DiscretizationError::LengthMismatch { states: knots, controls: controls.len() });
    }
    if !(sigma > 0.0) {
        return Err(DiscretizationError::NonPositiveSigma(sigma));
    }
    let width = 1.0 / (knots - 1) as f64;
    let substeps = config.substeps.max(1);
    let intervals = (0..knots - 1)
        .map(|k| {
            let m = discretize_interval(dynamics, &states[k], &controls[k], &controls[k + 1], sigma, width, substeps);
            let finite = m.a.iter().chain(m.b_minus.iter()).chain(m.b_plus.iter()).all(|v| v.is_finite())
                && m.s.iter().chain(m.w.iter()).chain(m.propagated.iter()).all(|v| v.is_finite());
            if finite {
                Ok(m)
            } else {
                Err(DiscretizationError::NonFinite(k))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LtvSystem { intervals })
}

/// FOH discretization of the car dynamics along a reference segment.
pub fn discretize_foh<D: Dynamics>(
    reference: &SegmentTrajectory,
    dynamics: &D,
    config: &FohConfig,
) -> Result<LtvSystem, DiscretizationError> {
    discretize_with(dynamics, &reference.state_vectors(), &reference.control_vectors(), reference.sigma, config)
}

/// Affine change of variables `x = D_x x_hat + C_x`, `u = D_u u_hat + C_u`,
/// `sigma = sigma_scale * sigma_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingTransform {
    pub d_x: Vector3<f64>,
    pub c_x: Vector3<f64>,
    pub d_u: Vector2<f64>,
    pub c_u: Vector2<f64>,
    pub sigma_scale: f64,
}

fn half_range(min: f64, max: f64, index: usize) -> Result<(f64, f64), DiscretizationError> {
    if !(max > min) {
        return Err(DiscretizationError::ZeroWidthRange(index));
    }
    Ok(((max - min) / 2.0, (max + min) / 2.0))
}

/// Map each `[min, max]` range onto `[-1, 1]`. The dilation factor is only
/// rescaled by its upper bound; it stays positive and uncentered.
pub fn make_scaling(
    x_bounds: [(f64, f64); 3],
    u_bounds: [(f64, f64); 2],
    sigma_bounds: (f64, f64),
) -> Result<ScalingTransform, DiscretizationError> {
    let mut d_x = Vector3::zeros();
    let mut c_x = Vector3::zeros();
    for (i, &(lo, hi)) in x_bounds.iter().enumerate() {
        (d_x[i], c_x[i]) = half_range(lo, hi, i)?;
    }
    let mut d_u = Vector2::zeros();
    let mut c_u = Vector2::zeros();
    for (i, &(lo, hi)) in u_bounds.iter().enumerate() {
        (d_u[i], c_u[i]) = half_range(lo, hi, 3 + i)?;
    }
    let (lo, hi) = sigma_bounds;
    if !(hi > lo) || !(hi > 0.0) {
        return Err(DiscretizationError::ZeroWidthRange(5));
    }
    Ok(ScalingTransform { d_x, c_x, d_u, c_u, sigma_scale: hi })
}

impl ScalingTransform {
    pub fn identity() -> Self {
        Self {
            d_x: Vector3::repeat(1.0),
            c_x: Vector3::zeros(),
            d_u: Vector2::repeat(1.0),
            c_u: Vector2::zeros(),
            sigma_scale: 1.0,
        }
    }

    pub fn scale_state(&self, x: &Vector3<f64>) -> Vector3<f64> {
        (x - self.c_x).component_div(&self.d_x)
    }

    pub fn unscale_state(&self, x_hat: &Vector3<f64>) -> Vector3<f64> {
        x_hat.component_mul(&self.d_x) + self.c_x
    }

    pub fn scale_control(&self, u: &Vector2<f64>) -> Vector2<f64> {
        (u - self.c_u).component_div(&self.d_u)
    }

    pub fn unscale_control(&self, u_hat: &Vector2<f64>) -> Vector2<f64> {
        u_hat.component_mul(&self.d_u) + self.c_u
    }

    pub fn scale_sigma(&self, sigma: f64) -> f64 {
        sigma / self.sigma_scale
    }

    pub fn unscale_sigma(&self, sigma_hat: f64) -> f64 {
        sigma_hat * self.sigma_scale
    }

    /// Express one interval model in scaled variables:
    /// `x_hat' = Dx^-1 (A (Dx x_hat + Cx) + B- (Du u_hat + Cu) + ... - Cx)`.
    pub fn scale_interval(&self, m: &IntervalModel) -> IntervalModel {
        let dx = Matrix3::from_diagonal(&self.d_x);
        let dx_inv = Matrix3::from_diagonal(&self.d_x.map(|v| 1.0 / v));
        let du = nalgebra::Matrix2::from_diagonal(&self.d_u);
        let offset = m.a * self.c_x + m.b_minus * self.c_u + m.b_plus * self.c_u + m.w - self.c_x;
        IntervalModel {
            a: dx_inv * m.a * dx,
            b_minus: dx_inv * m.b_minus * du,
            b_plus: dx_inv * m.b_plus * du,
            s: dx_inv * m.s * self.sigma_scale,
            w: dx_inv * offset,
            propagated: self.scale_state(&m.propagated),
        }
    }

    pub fn scale_ltv(&self, ltv: &LtvSystem) -> LtvSystem {
        LtvSystem { intervals: ltv.intervals.iter().map(|m| self.scale_interval(m)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{CarControl, CarState, ModelParams};

    #[test]
    fn foh_endpoints_and_midpoint() {
        assert_eq!(foh_coefficients(0.2, 0.2, 0.4).unwrap(), (1.0, 0.0));
        assert_eq!(foh_coefficients(0.4, 0.2, 0.4).unwrap(), (0.0, 1.0));
        let (m, p) = foh_coefficients(0.3, 0.2, 0.4).unwrap();
        assert!((m - 0.5).abs() < 1e-15 && (p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn foh_rejects_degenerate_interval() {
        assert!(matches!(foh_coefficients(0.1, 0.1, 0.1), Err(DiscretizationError::DegenerateInterval(..))));
    }

    #[test]
    fn zero_controls_give_identity_state_matrices() {
        let k = 6;
        let reference = SegmentTrajectory {
            states: (0..k).map(|i| CarState::new(i as f64, 0.5, 0.3 * i as f64)).collect(),
            controls: vec![CarControl::ZERO; k],
            sigma: 2.0,
        };
        let ltv = discretize_foh(&reference, &ModelParams::default(), &FohConfig::default()).unwrap();
        assert_eq!(ltv.knots(), k);
        for m in &ltv.intervals {
            assert_eq!(m.a, Matrix3::identity());
        }
    }

    #[test]
    fn rejects_bad_references() {
        let model = ModelParams::default();
        let cfg = FohConfig::default();
        let one = SegmentTrajectory { states: vec![CarState::new(0.0, 0.0, 0.0)], controls: vec![CarControl::ZERO], sigma: 1.0 };
        assert_eq!(discretize_foh(&one, &model, &cfg), Err(DiscretizationError::TooFewKnots(1)));
        let neg = SegmentTrajectory {
            states: vec![CarState::new(0.0, 0.0, 0.0); 3],
            controls: vec![CarControl::ZERO; 3],
            sigma: -1.0,
        };
        assert!(matches!(discretize_foh(&neg, &model, &cfg), Err(DiscretizationError::NonPositiveSigma(_))));
        let nan = SegmentTrajectory {
            states: vec![CarState::new(0.0, 0.0, f64::NAN); 3],
            controls: vec![CarControl::new(1.0, 0.0); 3],
            sigma: 1.0,
        };
        assert_eq!(discretize_foh(&nan, &model, &cfg), Err(DiscretizationError::NonFinite(0)));
    }

    #[test]
    fn scaling_maps_range_to_unit_box() {
        let t = make_scaling([(0.0, 10.0), (-1.0, 1.0), (-4.0, 2.0)], [(-1.0, 1.0); 2], (0.1, 60.0)).unwrap();
        assert_eq!(t.d_x[0], 5.0);
        assert_eq!(t.c_x[0], 5.0);
        assert_eq!(t.scale_state(&Vector3::new(10.0, 1.0, 2.0)), Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(t.d_x[1], 1.0);
        assert_eq!(t.c_x[1], 0.0);
        assert_eq!(t.d_u, Vector2::repeat(1.0));
        assert_eq!(t.c_u, Vector2::zeros());
    }

    #[test]
    fn scaling_rejects_zero_width() {
        let err = make_scaling([(0.0, 0.0), (0.0, 1.0), (0.0, 1.0)], [(-1.0, 1.0); 2], (0.1, 1.0));
        assert_eq!(err, Err(DiscretizationError::ZeroWidthRange(0)));
    }

    #[test]
    fn scaled_and_unscaled_steps_agree() {
        let model = ModelParams { kappa_max: 0.7 };
        let states = vec![Vector3::new(1.0, 2.0, 0.4), Vector3::new(1.5, 2.3, 0.6), Vector3::new(2.0, 2.4, 0.9)];
        let controls = vec![Vector2::new(0.8, 0.3), Vector2::new(-0.2, 0.5), Vector2::new(0.4, -0.9)];
        let ltv = discretize_with(&model, &states, &controls, 2.5, &FohConfig::default()).unwrap();
        let t = make_scaling([(-3.0, 7.0), (0.0, 5.0), (-4.0, 4.0)], [(-2.0, 1.0), (-1.0, 3.0)], (0.1, 8.0)).unwrap();
        let scaled = t.scale_ltv(&ltv);
        let x = Vector3::new(1.2, 1.9, 0.5);
        let (u, un) = (Vector2::new(0.1, -0.4), Vector2::new(0.6, 0.2));
        let direct = ltv.intervals[1].step(&x, &u, &un, 2.2);
        let via_scaled = t.unscale_state(&scaled.intervals[1].step(
            &t.scale_state(&x),
            &t.scale_control(&u),
            &t.scale_control(&un),
            t.scale_sigma(2.2),
        ));
        assert!((direct - via_scaled).amax() < 1e-12);
    }
}

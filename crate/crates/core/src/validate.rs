//! Dense re-integration of a solution against the true scenario geometry.
//!
//! The knots returned by the optimizer only satisfy the linearized model at
//! the knots. Here the nonlinear dynamics are integrated again with the
//! solution's first-order-hold controls, chained from the start pose through
//! all three segments, and every constraint is checked on the dense path.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::scenarios::Scenario;
use crate::scvx::MultiSegmentSolution;
use crate::trajectory::SegmentTrajectory;
use crate::vehicle::{CarState, Dynamics, ModelParams};

pub const DEFAULT_DENSE: usize = 20;

/// Runs of motion shorter than this [m] are not counted as a direction.
pub const CUSP_MIN_TRAVEL: f64 = 0.05;

/// RK4 steps between consecutive dense samples.
const SUBSTEPS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    /// Largest positive STC residual over the dense path.
    pub max_stc_residual: f64,
    pub max_bound_violation: f64,
    pub start_position_error: f64,
    pub start_heading_error: f64,
    pub goal_position_error: f64,
    pub goal_heading_error: f64,
    /// Largest state mismatch between consecutive segments' knots.
    pub max_continuity_gap: f64,
    /// Largest gap between the re-integrated path and any knot.
    pub max_knot_defect: f64,
    pub max_control_violation: f64,
    /// Largest |u1| at the joints and at the final knot.
    pub max_joint_speed: f64,
    pub path_length: f64,
    /// Length of the path if each turn in place is replaced by a turn on
    /// the minimum radius; never shorter than the Reeds-Shepp distance.
    pub rs_equivalent_length: f64,
    pub duration: f64,
    pub cusps: usize,
}

impl ViolationReport {
    /// Every constraint and boundary condition holds within `tol`.
    pub fn is_clean(&self, tol: f64) -> bool {
        self.failures(tol).is_empty()
    }

    pub fn failures(&self, tol: f64) -> Vec<String> {
        let checks = [
            ("stc residual", self.max_stc_residual),
            ("bound violation", self.max_bound_violation),
            ("start position error", self.start_position_error),
            ("start heading error", self.start_heading_error),
            ("goal position error", self.goal_position_error),
            ("goal heading error", self.goal_heading_error),
            ("continuity gap", self.max_continuity_gap),
            ("knot defect", self.max_knot_defect),
            ("control violation", self.max_control_violation),
            ("joint speed", self.max_joint_speed),
        ];
        checks
            .iter()
            .filter(|(_, v)| !(*v <= tol))
            .map(|(name, v)| format!("{name} {v:.3e} exceeds {tol:.0e}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSample {
    pub segment: usize,
    /// Normalized time within the segment.
    pub tau: f64,
    pub state: CarState,
    pub u1: f64,
    pub u2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub report: ViolationReport,
    pub dense: Vec<DenseSample>,
}

pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

fn pose_errors(a: &CarState, b: &CarState) -> (f64, f64) {
    ((a.x_w - b.x_w).hypot(a.y_w - b.y_w), wrap_angle(a.theta - b.theta).abs())
}

fn rk4(model: &ModelParams, x: Vector3<f64>, ua: Vector2<f64>, ub: Vector2<f64>, sigma: f64, h: f64) -> Vector3<f64> {
    // ua, ub are the controls at the start and end of this step
    let um = (ua + ub) * 0.5;
    let k1 = model.derivative(&x, &ua, sigma);
    let k2 = model.derivative(&(x + k1 * (h / 2.0)), &um, sigma);
    let k3 = model.derivative(&(x + k2 * (h / 2.0)), &um, sigma);
    let k4 = model.derivative(&(x + k3 * h), &ub, sigma);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integral of |u| over one step where u moves linearly from `a` to `b`.
fn abs_linear_integral(a: f64, b: f64, h: f64) -> f64 {
    if a * b >= 0.0 {
        h * (a.abs() + b.abs()) / 2.0
    } else {
        h * (a * a + b * b) / (2.0 * (a.abs() + b.abs()))
    }
}

/// Direction reversals, ignoring runs that travel less than `min_travel`.
pub fn count_cusps(segments: &[SegmentTrajectory], min_travel: f64) -> usize {
    let mut runs: Vec<(f64, f64)> = Vec::new(); // (sign, travel)
    for s in segments {
        let h = s.sigma / (s.knots() - 1) as f64;
        for w in s.controls.windows(2) {
            let (a, b) = (w[0].u1, w[1].u1);
            // split a sign-changing interval at its zero crossing
            let parts = if a * b < 0.0 {
                let t = a.abs() / (a.abs() + b.abs());
                vec![(a.signum(), h * t * a.abs() / 2.0), (b.signum(), h * (1.0 - t) * b.abs() / 2.0)]
            } else {
                vec![((a + b).signum(), abs_linear_integral(a, b, h))]
            };
            for (sign, travel) in parts {
                if travel == 0.0 {
                    continue;
                }
                match runs.last_mut() {
                    Some(last) if last.0 == sign => last.1 += travel,
                    _ => runs.push((sign, travel)),
                }
            }
        }
    }
    let mut signs: Vec<f64> = runs.iter().filter(|r| r.1 >= min_travel).map(|r| r.0).collect();
    signs.dedup();
    signs.len().saturating_sub(1)
}

fn bound_violation(s: &Scenario, p: &CarState) -> f64 {
    let over = |(lo, hi): (f64, f64), v: f64| (lo - v).max(v - hi).max(0.0);
    let y = over(s.y_bounds, p.y_w);
    let x = s.x_bounds.map_or(0.0, |b| over(b, p.x_w));
    x.max(y)
}

/// Re-integrate `solution` with `n_dense` samples per knot interval and
/// measure it against `scenario`.
pub fn validate_trajectory(solution: &MultiSegmentSolution, scenario: &Scenario, n_dense: usize) -> Validation {
    validate_segments(&solution.segments, scenario, n_dense)
}

pub fn validate_segments(segments: &[SegmentTrajectory], scenario: &Scenario, n_dense: usize) -> Validation {
    let n_dense = n_dense.max(1);
    let model = &scenario.model;
    let mut r = ViolationReport::default();
    let mut dense = Vec::new();
    let mut x = scenario.start.to_vector();

    let check = |r: &mut ViolationReport, p: &CarState| {
        for stc in &scenario.stcs {
            r.max_stc_residual = r.max_stc_residual.max(stc.residual(p));
        }
        r.max_bound_violation = r.max_bound_violation.max(bound_violation(scenario, p));
    };

    if let Some(first) = segments.first() {
        let (dp, dh) = pose_errors(&first.first(), &scenario.start);
        r.start_position_error = dp;
        r.start_heading_error = dh;
    }

    for (i, seg) in segments.iter().enumerate() {
        let k_count = seg.knots();
        let width = 1.0 / (k_count - 1) as f64;
        let h = width / (n_dense * SUBSTEPS) as f64;
        for (k, pair) in seg.controls.windows(2).enumerate() {
            let (u0, u1) = (pair[0].to_vector(), pair[1].to_vector());
            let knot = seg.states[k].to_vector();
            r.max_knot_defect = r.max_knot_defect.max((x - knot).amax());
            let control_at = |t: f64| u0 + (u1 - u0) * t;
            for j in 0..n_dense {
                let p = CarState::from_vector(&x);
                check(&mut r, &p);
                let u = control_at(j as f64 / n_dense as f64);
                dense.push(DenseSample { segment: i, tau: (k as f64 + j as f64 / n_dense as f64) * width, state: p, u1: u[0], u2: u[1] });
                for q in 0..SUBSTEPS {
                    let step = (j * SUBSTEPS + q) as f64;
                    let total = (n_dense * SUBSTEPS) as f64;
                    x = rk4(model, x, control_at(step / total), control_at((step + 1.0) / total), seg.sigma, h);
                }
            }
            r.path_length += abs_linear_integral(u0[0], u1[0], seg.sigma * width);
            let fine = 32;
            for q in 0..fine {
                let (a, b) = (control_at(q as f64 / fine as f64), control_at((q + 1) as f64 / fine as f64));
                let speed = |u: Vector2<f64>| u[0].abs().max(u[1].abs() * model.kappa_max * model.turning_radius());
                r.rs_equivalent_length += seg.sigma * width / fine as f64 * (speed(a) + speed(b)) / 2.0;
            }
        }
        let end = CarState::from_vector(&x);
        check(&mut r, &end);
        let last = seg.controls[k_count - 1];
        dense.push(DenseSample { segment: i, tau: 1.0, state: end, u1: last.u1, u2: last.u2 });
        r.max_knot_defect = r.max_knot_defect.max((x - seg.states[k_count - 1].to_vector()).amax());

        for c in &seg.controls {
            r.max_control_violation = r.max_control_violation.max((c.u1.abs() - 1.0).max(c.u2.abs() - 1.0).max(0.0));
        }
        r.max_joint_speed = r.max_joint_speed.max(last.u1.abs());
        if i > 0 {
            r.max_joint_speed = r.max_joint_speed.max(seg.controls[0].u1.abs());
            let gap = (segments[i - 1].last().to_vector() - seg.first().to_vector()).amax();
            r.max_continuity_gap = r.max_continuity_gap.max(gap);
        }
        r.duration += seg.sigma;
    }

    let (dp, dh) = pose_errors(&CarState::from_vector(&x), &scenario.goal);
    r.goal_position_error = dp;
    r.goal_heading_error = dh;
    r.cusps = count_cusps(segments, CUSP_MIN_TRAVEL);
    Validation { report: r, dense }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{free_space, reverse_parking};
    use crate::scvx::ScvxParams;
    use crate::vehicle::CarControl;

    fn straight(from: f64, to: f64, y: f64, k: usize) -> SegmentTrajectory {
        let dir = (to - from).signum();
        let states = (0..k).map(|j| CarState::new(from + (to - from) * j as f64 / (k - 1) as f64, y, 0.0)).collect();
        let mut controls = vec![CarControl::new(dir, 0.0); k];
        controls[0].u1 = dir;
        SegmentTrajectory { states, controls, sigma: (to - from).abs() }
    }

    #[test]
    fn straight_path_is_clean() {
        let s = free_space(
            CarState::new(0.0, 0.0, 0.0),
            CarState::new(6.0, 0.0, 0.0),
            ModelParams::default(),
            ScvxParams::default(),
        );
        let segs = vec![straight(0.0, 2.0, 0.0, 5), straight(2.0, 4.0, 0.0, 5), straight(4.0, 6.0, 0.0, 5)];
        let v = validate_segments(&segs, &s, 20);
        let r = v.report;
        assert!(r.max_knot_defect < 1e-12, "{r:?}");
        assert!(r.goal_position_error < 1e-12);
        assert_eq!(r.cusps, 0);
        assert!((r.path_length - 6.0).abs() < 1e-12);
        assert!((r.duration - 6.0).abs() < 1e-12);
        assert_eq!(r.max_stc_residual, 0.0);
        // joints are not at rest here
        assert_eq!(r.failures(1e-3).len(), 1);
        assert_eq!(v.dense.len(), 3 * (4 * 20 + 1));
    }

    #[test]
    fn point_inside_obstacle_is_flagged() {
        let s = reverse_parking();
        let k = 3;
        let seg = SegmentTrajectory {
            states: vec![CarState::new(1.5, 1.0, 0.0); k],
            controls: vec![CarControl::ZERO; k],
            sigma: 1.0,
        };
        let mut scenario = s.clone();
        scenario.start = CarState::new(1.5, 1.0, 0.0);
        let r = validate_segments(&[seg.clone(), seg.clone(), seg], &scenario, 4).report;
        assert!(r.max_stc_residual > 0.0);
        assert!(!r.is_clean(1e-3));
    }

    #[test]
    fn cusp_counting() {
        let mut fwd = straight(0.0, 1.0, 0.0, 3);
        let mut back = straight(1.0, 0.0, 0.0, 3);
        let mut fwd2 = straight(0.0, 1.0, 0.0, 3);
        for s in [&mut fwd, &mut back, &mut fwd2] {
            s.controls[0].u1 = 0.0;
            s.controls[2].u1 = 0.0;
        }
        assert_eq!(count_cusps(&[fwd.clone(), back.clone(), fwd2], 0.05), 2);
        assert_eq!(count_cusps(&[fwd.clone(), fwd.clone()], 0.05), 0);
        // a reversal within one segment counts too
        let mut wiggle = fwd;
        wiggle.controls[2].u1 = -1.0;
        wiggle.controls[1].u1 = 1.0;
        wiggle.sigma = 2.0;
        assert_eq!(count_cusps(&[wiggle.clone()], 0.05), 1);
        // but not when one side barely moves
        assert_eq!(count_cusps(&[wiggle], 10.0), 0);
        assert_eq!(count_cusps(&[back], 0.05), 0);
    }

    #[test]
    fn wrap_is_symmetric() {
        assert!((wrap_angle(2.0 * PI + 0.1) - 0.1).abs() < 1e-12);
        assert!((wrap_angle(-0.1 - 4.0 * PI) + 0.1).abs() < 1e-12);
        assert!(wrap_angle(PI).abs() <= PI);
    }
}

//! Assembly of the convex subproblem solved at every SCvx iteration.
//!
//! All decision variables live in scaled units. Per segment the block is
//! `x_hat` (3K), `u_hat` (2K), `sigma_hat` (1) and the virtual control
//! `nu` (3(K-1)); epigraph and slack variables are appended afterwards.

use nalgebra::{Vector2, Vector3};

use super::{ProblemSetup, ScvxError, SEGMENTS};
use crate::conic::{AffineExpr, ConicProblem, ConicSolution};
use crate::discretization::{LtvSystem, ScalingTransform};
use crate::trajectory::SegmentTrajectory;
use crate::vehicle::{CarControl, CarState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentVars {
    pub x: usize,
    pub u: usize,
    pub sigma: usize,
    pub nu: usize,
}

impl SegmentVars {
    pub fn x(&self, k: usize, j: usize) -> usize {
        self.x + 3 * k + j
    }

    pub fn u(&self, k: usize, j: usize) -> usize {
        self.u + 2 * k + j
    }

    pub fn nu(&self, k: usize, j: usize) -> usize {
        self.nu + 3 * k + j
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemLayout {
    pub knots: usize,
    pub segments: Vec<SegmentVars>,
    /// Variables of the per-segment blocks before any epigraph or slack.
    pub core_vars: usize,
    /// STC slack variables, one per non-dormant knot constraint.
    pub stc_slacks: Vec<usize>,
    /// Weighted sum of the per-knot step norms, part of the objective.
    pub step_cost: AffineExpr,
}

pub struct Subproblem {
    pub problem: ConicProblem,
    pub layout: SubproblemLayout,
}

/// Decoded subproblem solution in physical units.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub segments: Vec<SegmentTrajectory>,
    /// Virtual controls in scaled state units, `K - 1` per segment.
    pub virtual_controls: Vec<Vec<Vector3<f64>>>,
    pub nu_norm: f64,
    pub stc_slack: f64,
    /// Subproblem optimum without the step penalty.
    pub objective: f64,
    pub step_cost: f64,
}

struct Builder<'a> {
    p: ConicProblem,
    scaling: &'a ScalingTransform,
}

impl Builder<'_> {
    /// Physical state component as an affine form of its scaled variable.
    fn state(&self, seg: &SegmentVars, k: usize, j: usize) -> AffineExpr {
        AffineExpr::term(seg.x(k, j), self.scaling.d_x[j]).with_constant(self.scaling.c_x[j])
    }

    fn control(&self, seg: &SegmentVars, k: usize, j: usize) -> AffineExpr {
        AffineExpr::term(seg.u(k, j), self.scaling.d_u[j]).with_constant(self.scaling.c_u[j])
    }

    fn sigma(&self, seg: &SegmentVars) -> AffineExpr {
        AffineExpr::term(seg.sigma, self.scaling.sigma_scale)
    }

    fn pin_state(&mut self, seg: &SegmentVars, k: usize, target: &CarState) {
        let v = target.to_vector();
        for j in 0..3 {
            let e = self.state(seg, k, j);
            self.p.add_equal(e, &AffineExpr::constant(v[j]));
        }
    }

    fn join_states(&mut self, a: &SegmentVars, ka: usize, b: &SegmentVars, kb: usize) {
        for j in 0..3 {
            let lhs = self.state(a, ka, j);
            let rhs = self.state(b, kb, j);
            self.p.add_equal(lhs, &rhs);
        }
    }

    fn between(&mut self, e: AffineExpr, lo: f64, hi: f64) {
        self.p.add_le(AffineExpr::constant(lo), &e);
        self.p.add_le(e, &AffineExpr::constant(hi));
    }
}

pub fn build_subproblem(
    reference: &[SegmentTrajectory],
    ltv: &[LtvSystem],
    setup: &ProblemSetup,
    radius: f64,
    scaling: &ScalingTransform,
) -> Result<Subproblem, ScvxError> {
    let params = &setup.params;
    let k_count = params.knots;
    if reference.len() != SEGMENTS || ltv.len() != SEGMENTS {
        return Err(ScvxError::Dimension(format!(
            "expected {SEGMENTS} segments, got {} references and {} models",
            reference.len(),
            ltv.len()
        )));
    }
    for (i, (r, m)) in reference.iter().zip(ltv).enumerate() {
        if r.knots() != k_count || r.controls.len() != k_count || m.knots() != k_count {
            return Err(ScvxError::Dimension(format!(
                "segment {i}: {} states, {} controls, {} model knots, expected {k_count}",
                r.knots(),
                r.controls.len(),
                m.knots()
            )));
        }
    }
    if !(radius > 0.0) {
        return Err(ScvxError::Dimension(format!("trust radius must be positive, got {radius}")));
    }

    let mut b = Builder { p: ConicProblem::new(), scaling };
    let mut segments = Vec::with_capacity(SEGMENTS);
    for _ in 0..SEGMENTS {
        let x = b.p.add_variable_block(3 * k_count)?.start;
        let u = b.p.add_variable_block(2 * k_count)?.start;
        let sigma = b.p.add_variable();
        let nu = b.p.add_variable_block(3 * (k_count - 1))?.start;
        segments.push(SegmentVars { x, u, sigma, nu });
    }
    let core_vars = b.p.n_vars;
    let w = &params.weights;

    for (seg, m) in segments.iter().zip(ltv) {
        // x_hat[k+1] = A x_hat[k] + B- u_hat[k] + B+ u_hat[k+1] + S sigma_hat + w + nu[k]
        let scaled = scaling.scale_ltv(m);
        for (k, iv) in scaled.intervals.iter().enumerate() {
            for r in 0..3 {
                let mut e = AffineExpr::var(seg.x(k + 1, r)).with_constant(-iv.w[r]);
                for c in 0..3 {
                    e.push(seg.x(k, c), -iv.a[(r, c)]);
                }
                for c in 0..2 {
                    e.push(seg.u(k, c), -iv.b_minus[(r, c)]);
                    e.push(seg.u(k + 1, c), -iv.b_plus[(r, c)]);
                }
                e.push(seg.sigma, -iv.s[r]);
                e.push(seg.nu(k, r), -1.0);
                b.p.add_equality(e);
            }
        }

        b.p.add_cost(seg.sigma, w.sigma);
        for k in 0..k_count - 1 {
            for j in 0..3 {
                let t = b.p.add_abs_epigraph(&AffineExpr::var(seg.nu(k, j)));
                b.p.add_cost(t, w.nu);
            }
        }
        if w.jerk > 0.0 {
            for j in 0..2 {
                let diffs = (0..k_count - 1)
                    .map(|k| AffineExpr::var(seg.u(k + 1, j)).with_term(seg.u(k, j), -1.0))
                    .collect();
                let t = b.p.add_soc_epigraph(diffs);
                b.p.add_cost(t, w.jerk);
            }
        }
        if w.length > 0.0 {
            for k in 0..k_count - 1 {
                for j in 0..2 {
                    let d = AffineExpr::var(seg.x(k + 1, j)).with_term(seg.x(k, j), -1.0);
                    let t = b.p.add_abs_epigraph(&d);
                    b.p.add_cost(t, w.length);
                }
            }
        }
    }

    // Boundary poses, continuity at the joints and zero speed at joints and end.
    let (first, last) = (segments[0], segments[SEGMENTS - 1]);
    b.pin_state(&first, 0, &setup.start);
    b.pin_state(&last, k_count - 1, &setup.goal);
    for pair in segments.windows(2) {
        b.join_states(&pair[0], k_count - 1, &pair[1], 0);
    }
    for (i, seg) in segments.iter().enumerate() {
        let end = b.control(seg, k_count - 1, 0);
        b.p.add_equality(end);
        if i > 0 {
            let begin = b.control(seg, 0, 0);
            b.p.add_equality(begin);
        }
    }
    if params.steering_continuity {
        for pair in segments.windows(2) {
            let lhs = b.control(&pair[0], k_count - 1, 1);
            let rhs = b.control(&pair[1], 0, 1);
            b.p.add_equal(lhs, &rhs);
        }
    }

    let (sigma_lo, sigma_hi) = params.sigma_bounds;
    for seg in &segments {
        for k in 0..k_count {
            for j in 0..2 {
                let u = b.control(seg, k, j);
                b.between(u, -1.0, 1.0);
            }
            let y = b.state(seg, k, 1);
            b.between(y, setup.y_bounds.0, setup.y_bounds.1);
            if let Some((lo, hi)) = setup.x_bounds {
                let x = b.state(seg, k, 0);
                b.between(x, lo, hi);
            }
        }
        let s = b.sigma(seg);
        b.between(s, sigma_lo, sigma_hi);
    }

    // Linearized state-triggered constraints, softened by a penalized slack.
    let mut stc_slacks = Vec::new();
    let reach = scaling.d_x * radius;
    for (seg, r) in segments.iter().zip(reference) {
        for (k, z_bar) in r.states.iter().enumerate() {
            for stc in &setup.stcs {
                let lin = stc.linearize_within(z_bar, &reach);
                if lin.is_dormant() {
                    continue;
                }
                let slack = b.p.add_variable();
                b.p.add_nonneg(AffineExpr::var(slack));
                b.p.add_cost(slack, w.nu);
                let mut h = AffineExpr::constant(lin.value - lin.gradient.dot(&lin.at));
                for j in 0..3 {
                    h = h.plus(&b.state(seg, k, j).scaled(lin.gradient[j]));
                }
                b.p.add_le(h, &AffineExpr::var(slack));
                stc_slacks.push(slack);
            }
        }
    }

    // Hard l1 trust region around the reference, one ball per knot. A small
    // cost on the ball sizes picks the shortest step among equally good ones.
    let mut step_cost = AffineExpr::constant(0.0);
    for (seg, r) in segments.iter().zip(reference) {
        let sigma_ref = scaling.scale_sigma(r.sigma);
        let t_sigma = b.p.add_abs_epigraph(&AffineExpr::var(seg.sigma).with_constant(-sigma_ref));
        for k in 0..k_count {
            let x_ref = scaling.scale_state(&r.states[k].to_vector());
            let u_ref = scaling.scale_control(&r.controls[k].to_vector());
            let mut ball = AffineExpr::var(t_sigma);
            for j in 0..3 {
                let t = b.p.add_abs_epigraph(&AffineExpr::var(seg.x(k, j)).with_constant(-x_ref[j]));
                ball.push(t, 1.0);
            }
            for j in 0..2 {
                let t = b.p.add_abs_epigraph(&AffineExpr::var(seg.u(k, j)).with_constant(-u_ref[j]));
                ball.push(t, 1.0);
            }
            if w.step > 0.0 {
                step_cost = step_cost.plus(&ball.clone().scaled(w.step));
            }
            b.p.add_le(ball, &AffineExpr::constant(radius));
        }
    }
    b.p.add_cost_expr(&step_cost, 1.0);

    let layout = SubproblemLayout { knots: k_count, segments, core_vars, stc_slacks, step_cost };
    Ok(Subproblem { problem: b.p, layout })
}

impl SubproblemLayout {
    pub fn decode(&self, solution: &ConicSolution, scaling: &ScalingTransform) -> SubproblemSolution {
        let v = &solution.v;
        let k_count = self.knots;
        let mut nu_norm = 0.0;
        let mut segments = Vec::with_capacity(self.segments.len());
        let mut virtual_controls = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let states = (0..k_count)
                .map(|k| {
                    let x_hat = Vector3::new(v[seg.x(k, 0)], v[seg.x(k, 1)], v[seg.x(k, 2)]);
                    CarState::from_vector(&scaling.unscale_state(&x_hat))
                })
                .collect();
            let controls = (0..k_count)
                .map(|k| {
                    let u_hat = Vector2::new(v[seg.u(k, 0)], v[seg.u(k, 1)]);
                    CarControl::from_vector(&scaling.unscale_control(&u_hat))
                })
                .collect();
            let nus: Vec<Vector3<f64>> = (0..k_count - 1)
                .map(|k| Vector3::new(v[seg.nu(k, 0)], v[seg.nu(k, 1)], v[seg.nu(k, 2)]))
                .collect();
            nu_norm += nus.iter().map(|n| n.lp_norm(1)).sum::<f64>();
            virtual_controls.push(nus);
            segments.push(SegmentTrajectory { states, controls, sigma: scaling.unscale_sigma(v[seg.sigma]) });
        }
        let stc_slack = self.stc_slacks.iter().map(|&i| v[i].max(0.0)).sum();
        let step_cost = self.step_cost.eval(v);
        SubproblemSolution {
            segments,
            virtual_controls,
            nu_norm,
            stc_slack,
            objective: solution.objective_value - step_cost,
            step_cost,
        }
    }
}

//! Successive convexification over three stitched curve sections.
//!
//! Every iteration linearizes the car dynamics and the state-triggered
//! constraints about the current reference, discretizes with a first-order
//! hold, solves one SOCP, and accepts or rejects the step with a
//! trust-region ratio test on the penalized nonlinear cost.

mod subproblem;
mod trust;

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use subproblem::{build_subproblem, SegmentVars, Subproblem, SubproblemLayout, SubproblemSolution};
pub use trust::{trust_region_update, TrustDecision};

use crate::conic::{ClarabelBackend, ConicBackend, ConicError, SolveStatus, SolverTolerances};
use crate::discretization::{discretize_foh, make_scaling, DiscretizationError, FohConfig, LtvSystem, ScalingTransform};
use crate::par;
use crate::scenarios::Scenario;
use crate::stc::Stc;
use crate::trajectory::SegmentTrajectory;
use crate::vehicle::{CarControl, CarState, ModelParams};

/// Number of curve sections stitched into one maneuver.
pub const SEGMENTS: usize = 3;

#[derive(Debug, Error)]
pub enum ScvxError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("subproblem {status:?} at iteration {iteration}")]
    SolverFailure { status: SolveStatus, iteration: usize, history: Vec<IterationRecord> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub sigma: f64,
    pub nu: f64,
    pub jerk: f64,
    pub length: f64,
    /// Weight of the l1 step inside the trust region. Zero at any fixed
    /// point, so it only selects among equally good steps.
    pub step: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { sigma: 1.0, nu: 1e5, jerk: 0.1, length: 0.0, step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustParams {
    pub radius0: f64,
    pub rho0: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub alpha_shrink: f64,
    pub alpha_grow: f64,
    pub radius_min: f64,
    pub radius_max: f64,
}

impl Default for TrustParams {
    fn default() -> Self {
        Self {
            radius0: 1.0,
            rho0: 0.0,
            rho1: 0.25,
            rho2: 0.7,
            alpha_shrink: 2.0,
            alpha_grow: 2.0,
            radius_min: 1e-7,
            radius_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScvxParams {
    /// Knots per segment.
    pub knots: usize,
    pub max_iters: usize,
    pub weights: CostWeights,
    pub trust: TrustParams,
    /// Convergence threshold on the largest per-knot scaled l1 step.
    pub eps_step: f64,
    /// Convergence threshold on the total virtual control.
    pub eps_nu: f64,
    pub sigma_bounds: (f64, f64),
    /// Keep-out regions are grown and position bounds shrunk by this many
    /// meters inside the optimizer; validation uses the true geometry.
    pub safety_margin: f64,
    /// Also require equal steering on both sides of every joint.
    pub steering_continuity: bool,
    pub foh: FohConfig,
    pub solver: SolverTolerances,
}

impl Default for ScvxParams {
    fn default() -> Self {
        Self {
            knots: 20,
            max_iters: 50,
            weights: CostWeights::default(),
            trust: TrustParams::default(),
            eps_step: 1e-4,
            eps_nu: 1e-4,
            sigma_bounds: (0.1, 60.0),
            safety_margin: 0.0,
            steering_continuity: false,
            foh: FohConfig::default(),
            solver: SolverTolerances::default(),
        }
    }
}

impl ScvxParams {
    pub fn validate(&self) -> Result<(), ScvxError> {
        let bad = |m: &str| Err(ScvxError::InvalidParams(m.to_string()));
        let t = &self.trust;
        let w = &self.weights;
        if self.knots < 2 {
            return bad("knots must be at least 2");
        }
        if !(0.0 <= t.rho0 && t.rho0 < t.rho1 && t.rho1 < t.rho2 && t.rho2 < 1.0) {
            return bad("trust thresholds must satisfy 0 <= rho0 < rho1 < rho2 < 1");
        }
        if !(t.alpha_shrink > 1.0 && t.alpha_grow > 1.0) {
            return bad("trust scale factors must exceed 1");
        }
        if !(t.radius_min > 0.0 && t.radius_min <= t.radius0 && t.radius0 <= t.radius_max) {
            return bad("trust radius must satisfy 0 < min <= initial <= max");
        }
        if !(w.sigma >= 0.0 && w.jerk >= 0.0 && w.length >= 0.0 && w.step >= 0.0 && w.nu > 0.0) {
            return bad("weights must be nonnegative and the virtual-control weight positive");
        }
        if !(self.sigma_bounds.0 > 0.0 && self.sigma_bounds.1 > self.sigma_bounds.0) {
            return bad("sigma bounds must satisfy 0 < min < max");
        }
        if !(self.safety_margin >= 0.0) {
            return bad("safety margin must be nonnegative");
        }
        Ok(())
    }
}

/// Per-term breakdown of a cost, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTerms {
    pub sigma: f64,
    /// Virtual control (linear model) or dynamics defect (nonlinear).
    pub nu: f64,
    /// STC slack (linear model) or STC violation (nonlinear).
    pub stc: f64,
    pub jerk: f64,
    pub length: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub trust_radius: f64,
    pub next_trust_radius: f64,
    /// Penalized nonlinear cost of the reference entering this iteration.
    pub reference_cost: f64,
    /// Penalized nonlinear cost of the subproblem's candidate.
    pub candidate_cost: CostTerms,
    /// Optimal value of the convex subproblem.
    pub model_cost: f64,
    pub predicted_decrease: f64,
    pub actual_decrease: f64,
    /// NaN when no decrease was predicted; stored as null in JSON.
    #[serde(deserialize_with = "nan_from_null")]
    pub ratio: f64,
    pub accepted: bool,
    pub nu_norm: f64,
    pub stc_slack: f64,
    pub step_norm: f64,
    /// True on the iteration that met the tolerances and ended the loop.
    pub converged: bool,
}

fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSegmentSolution {
    pub segments: Vec<SegmentTrajectory>,
    /// Virtual controls of the last subproblem, in scaled state units.
    pub virtual_controls: Vec<Vec<Vector3<f64>>>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    /// Goal pose as imposed, heading shifted by whole turns toward the start.
    pub goal: CarState,
    pub final_cost: CostTerms,
}

impl MultiSegmentSolution {
    pub fn nu_norm(&self) -> f64 {
        self.virtual_controls.iter().flatten().map(|n| n.lp_norm(1)).sum()
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.sigma).sum()
    }
}

/// Everything the subproblem needs besides the reference trajectory.
#[derive(Debug, Clone)]
pub struct ProblemSetup {
    pub start: CarState,
    pub goal: CarState,
    /// Constraints as seen by the optimizer (inflated by the safety margin).
    pub stcs: Vec<Stc>,
    /// Optimizer bounds (shrunk by the safety margin).
    pub y_bounds: (f64, f64),
    pub x_bounds: Option<(f64, f64)>,
    pub model: ModelParams,
    pub params: ScvxParams,
}

/// Shift `goal` by whole turns so its heading is nearest to `start`.
pub fn nearest_goal_heading(start: &CarState, goal: &CarState) -> CarState {
    let turns = ((start.theta - goal.theta) / (2.0 * PI)).round();
    CarState::new(goal.x_w, goal.y_w, goal.theta + turns * 2.0 * PI)
}

impl ProblemSetup {
    pub fn new(scenario: &Scenario, params: &ScvxParams) -> Result<Self, ScvxError> {
        params.validate()?;
        let m = params.safety_margin;
        let start = scenario.start;
        let goal = nearest_goal_heading(&start, &scenario.goal);
        let shrink = |(lo, hi): (f64, f64)| (lo + m, hi - m);
        let y_bounds = shrink(scenario.y_bounds);
        let x_bounds = scenario.x_bounds.map(shrink);
        let setup = Self {
            start,
            goal,
            stcs: scenario.stcs.iter().map(|s| s.inflated(m)).collect(),
            y_bounds,
            x_bounds,
            model: scenario.model,
            params: *params,
        };
        for (name, pose) in [("start", &setup.start), ("goal", &setup.goal)] {
            if !pose.is_finite() {
                return Err(ScvxError::InvalidScenario(format!("{name} pose is not finite")));
            }
            if pose.y_w < y_bounds.0 || pose.y_w > y_bounds.1 {
                return Err(ScvxError::InvalidScenario(format!("{name} pose outside y bounds {y_bounds:?}")));
            }
            if let Some((lo, hi)) = x_bounds.filter(|(lo, hi)| pose.x_w < *lo || pose.x_w > *hi) {
                return Err(ScvxError::InvalidScenario(format!("{name} pose outside x bounds ({lo}, {hi})")));
            }
            if let Some(s) = setup.stcs.iter().find(|s| s.residual(pose) > 0.0) {
                return Err(ScvxError::InvalidScenario(format!(
                    "{name} pose violates a state-triggered constraint (residual {})",
                    s.residual(pose)
                )));
            }
        }
        Ok(setup)
    }

    /// Scaling from the position box of the problem, with a common factor
    /// for both position axes so scaled lengths stay isotropic.
    pub fn scaling(&self) -> Result<ScalingTransform, ScvxError> {
        let r = self.model.turning_radius();
        let (s, g) = (&self.start, &self.goal);
        let pad = 2.0 * r + 1.0;
        let x = self.x_bounds.unwrap_or((s.x_w.min(g.x_w) - pad, s.x_w.max(g.x_w) + pad));
        let y = self.y_bounds;
        let half = ((x.1 - x.0) / 2.0).max((y.1 - y.0) / 2.0).max(1e-3);
        let (cx, cy) = ((x.0 + x.1) / 2.0, (y.0 + y.1) / 2.0);
        let theta = (s.theta.min(g.theta) - PI, s.theta.max(g.theta) + PI);
        Ok(make_scaling(
            [(cx - half, cx + half), (cy - half, cy + half), theta],
            [(-1.0, 1.0), (-1.0, 1.0)],
            self.params.sigma_bounds,
        )?)
    }
}

/// Straight-line initial guess split into three equal pieces, zero controls.
pub fn initialize_segments(start: &CarState, goal: &CarState, params: &ScvxParams) -> Vec<SegmentTrajectory> {
    let k_count = params.knots;
    let piece = (goal.x_w - start.x_w).hypot(goal.y_w - start.y_w) / SEGMENTS as f64;
    // half of the unit top speed
    let sigma = (piece / 0.5).clamp(params.sigma_bounds.0, params.sigma_bounds.1);
    (0..SEGMENTS)
        .map(|i| {
            let states = (0..k_count)
                .map(|k| {
                    let t = (i as f64 + k as f64 / (k_count - 1) as f64) / SEGMENTS as f64;
                    start.lerp(goal, t)
                })
                .collect();
            SegmentTrajectory { states, controls: vec![CarControl::ZERO; k_count], sigma }
        })
        .collect()
}

fn discretize_all(segments: &[SegmentTrajectory], setup: &ProblemSetup) -> Result<Vec<LtvSystem>, ScvxError> {
    par::map(segments, |s| discretize_foh(s, &setup.model, &setup.params.foh))
        .into_iter()
        .map(|r| r.map_err(ScvxError::from))
        .collect()
}

fn jerk_and_length(segments: &[SegmentTrajectory], setup: &ProblemSetup, scaling: &ScalingTransform) -> (f64, f64) {
    let w = &setup.params.weights;
    let mut jerk = 0.0;
    let mut length = 0.0;
    for s in segments {
        let u: Vec<_> = s.controls.iter().map(|c| scaling.scale_control(&c.to_vector())).collect();
        let x: Vec<_> = s.states.iter().map(|p| scaling.scale_state(&p.to_vector())).collect();
        if w.jerk > 0.0 {
            for j in 0..2 {
                jerk += u.windows(2).map(|p| (p[1][j] - p[0][j]).powi(2)).sum::<f64>().sqrt();
            }
        }
        if w.length > 0.0 {
            length += x.windows(2).map(|p| (p[1][0] - p[0][0]).abs() + (p[1][1] - p[0][1]).abs()).sum::<f64>();
        }
    }
    (w.jerk * jerk, w.length * length)
}

/// Penalized nonlinear cost: convex terms plus exact-penalty terms on the
/// dynamics defects and on positive STC residuals at the knots.
pub fn nonlinear_cost(
    segments: &[SegmentTrajectory],
    ltv: &[LtvSystem],
    setup: &ProblemSetup,
    scaling: &ScalingTransform,
) -> CostTerms {
    let w = &setup.params.weights;
    let sigma = w.sigma * segments.iter().map(|s| scaling.scale_sigma(s.sigma)).sum::<f64>();
    let mut defect = 0.0;
    let mut stc = 0.0;
    for (s, m) in segments.iter().zip(ltv) {
        for (k, iv) in m.intervals.iter().enumerate() {
            let gap = scaling.scale_state(&s.states[k + 1].to_vector()) - scaling.scale_state(&iv.propagated);
            defect += gap.lp_norm(1);
        }
        for z in &s.states {
            stc += setup.stcs.iter().map(|c| c.residual(z).max(0.0)).sum::<f64>();
        }
    }
    let (jerk, length) = jerk_and_length(segments, setup, scaling);
    let (nu, stc) = (w.nu * defect, w.nu * stc);
    CostTerms { sigma, nu, stc, jerk, length, total: sigma + nu + stc + jerk + length }
}

fn step_norm(a: &[SegmentTrajectory], b: &[SegmentTrajectory], scaling: &ScalingTransform) -> f64 {
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.iter().zip(b) {
        let ds = (scaling.scale_sigma(sa.sigma) - scaling.scale_sigma(sb.sigma)).abs();
        for k in 0..sa.knots() {
            let dx = scaling.scale_state(&sa.states[k].to_vector()) - scaling.scale_state(&sb.states[k].to_vector());
            let du = scaling.scale_control(&sa.controls[k].to_vector())
                - scaling.scale_control(&sb.controls[k].to_vector());
            worst = worst.max(dx.lp_norm(1) + du.lp_norm(1) + ds);
        }
    }
    worst
}

/// Run SCvx on `scenario` with the interior-point backend.
pub fn scvx_run(scenario: &Scenario, params: &ScvxParams) -> Result<MultiSegmentSolution, ScvxError> {
    scvx_run_with(scenario, params, &ClarabelBackend::with_tolerances(params.solver))
}

pub fn scvx_run_with<B: ConicBackend>(
    scenario: &Scenario,
    params: &ScvxParams,
    backend: &B,
) -> Result<MultiSegmentSolution, ScvxError> {
    let setup = ProblemSetup::new(scenario, params)?;
    let scaling = setup.scaling()?;

    let mut reference = initialize_segments(&setup.start, &setup.goal, params);
    let mut ltv = discretize_all(&reference, &setup)?;
    let mut reference_cost = nonlinear_cost(&reference, &ltv, &setup, &scaling);
    let mut virtual_controls = vec![vec![Vector3::zeros(); params.knots - 1]; SEGMENTS];
    let mut radius = params.trust.radius0;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;

    for iteration in 1..=params.max_iters {
        let sub = build_subproblem(&reference, &ltv, &setup, radius, &scaling)?;
        let solution = backend.solve(&sub.problem)?;
        if solution.status != SolveStatus::Optimal {
            return Err(ScvxError::SolverFailure { status: solution.status, iteration, history });
        }
        let candidate = sub.layout.decode(&solution, &scaling);
        let candidate_ltv = discretize_all(&candidate.segments, &setup)?;
        let candidate_cost = nonlinear_cost(&candidate.segments, &candidate_ltv, &setup, &scaling);
        let step = step_norm(&candidate.segments, &reference, &scaling);
        let predicted = reference_cost.total - candidate.objective;
        let actual = reference_cost.total - candidate_cost.total;

        let done = step < params.eps_step && candidate.nu_norm < params.eps_nu;
        let decision = if done {
            // Keep the cost sequence monotone even when solver noise makes a
            // sub-tolerance step marginally worse.
            TrustDecision { accept: actual >= 0.0, radius, ratio: actual / predicted }
        } else {
            trust_region_update(predicted, actual, radius, params)
        };

        history.push(IterationRecord {
            iteration,
            trust_radius: radius,
            next_trust_radius: decision.radius,
            reference_cost: reference_cost.total,
            candidate_cost,
            model_cost: candidate.objective,
            predicted_decrease: predicted,
            actual_decrease: actual,
            ratio: decision.ratio,
            accepted: decision.accept,
            nu_norm: candidate.nu_norm,
            stc_slack: candidate.stc_slack,
            step_norm: step,
            converged: done,
        });

        if decision.accept {
            reference = candidate.segments;
            ltv = candidate_ltv;
            reference_cost = candidate_cost;
            virtual_controls = candidate.virtual_controls;
        } else if done {
            virtual_controls = candidate.virtual_controls;
        }
        radius = decision.radius;
        if done {
            converged = true;
            break;
        }
    }

    Ok(MultiSegmentSolution {
        segments: reference,
        virtual_controls,
        iterations: history.len(),
        converged,
        history,
        goal: setup.goal,
        final_cost: reference_cost,
    })
}

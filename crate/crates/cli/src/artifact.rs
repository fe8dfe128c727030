//! Self-contained record of one run. Plots are drawn from this alone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use parking_scvx::reeds_shepp::{sample, shortest_path};
use parking_scvx::scvx::IterationRecord;
use parking_scvx::validate::{validate_trajectory, DenseSample, ViolationReport};
use parking_scvx::{CarState, MultiSegmentSolution, Scenario, SegmentTrajectory};

pub const SCHEMA_VERSION: u32 = 1;

/// Arc step of the stored Reeds-Shepp samples [m].
pub const RS_SAMPLE_STEP: f64 = 0.05;

/// Tolerance of the success gate.
pub const CLEAN_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsBaseline {
    pub word: String,
    pub length: f64,
    pub cusps: usize,
    pub samples: Vec<CarState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub converged: bool,
    pub iterations: usize,
    pub goal: CarState,
    pub segments: Vec<SegmentTrajectory>,
    pub dense: Vec<DenseSample>,
    pub rs_baseline: RsBaseline,
    pub report: ViolationReport,
    pub history: Vec<IterationRecord>,
}

impl RunArtifact {
    pub fn build(scenario: &Scenario, solution: &MultiSegmentSolution, n_dense: usize) -> Self {
        let v = validate_trajectory(solution, scenario, n_dense);
        let rs = shortest_path(&scenario.start, &solution.goal, scenario.model.turning_radius());
        let rs_baseline = RsBaseline {
            word: rs.word(),
            length: rs.length_meters(),
            cusps: rs.cusps(),
            samples: sample(&rs, &scenario.start, RS_SAMPLE_STEP),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.clone(),
            converged: solution.converged,
            iterations: solution.iterations,
            goal: solution.goal,
            segments: solution.segments.clone(),
            dense: v.dense,
            rs_baseline,
            report: v.report,
            history: solution.history.clone(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.converged && self.report.is_clean(CLEAN_TOL)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let a: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if a.schema_version != SCHEMA_VERSION {
            return Err(format!("schema_version {} is not {SCHEMA_VERSION}", a.schema_version));
        }
        Ok(a)
    }

    /// One row per knot: `segment,k,tau,x_w,y_w,theta,u1,u2`.
    pub fn knots_csv(&self) -> String {
        let mut out = String::from("segment,k,tau,x_w,y_w,theta,u1,u2\n");
        for (i, s) in self.segments.iter().enumerate() {
            for (k, (x, u)) in s.states.iter().zip(&s.controls).enumerate() {
                writeln!(
                    out,
                    "{i},{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    s.tau(k),
                    x.x_w,
                    x.y_w,
                    x.theta,
                    u.u1,
                    u.u2
                )
                .unwrap();
            }
        }
        out
    }

    /// Iteration history, one JSON object per line.
    pub fn history_jsonl(&self) -> String {
        self.history.iter().map(|h| serde_json::to_string(h).expect("record serializes") + "\n").collect()
    }
}

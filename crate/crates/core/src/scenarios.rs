//! Parking scenarios and start-pose sampling.
//!
//! Scenarios are plain data and round-trip through JSON. Lengths are in
//! meters and angles in radians everywhere, start-region headings included.

use std::f64::consts::PI;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scvx::{CostWeights, ScvxParams};
use crate::stc::{parking_gap_stc, Stc};
use crate::vehicle::{CarState, ModelParams};

pub const SCENARIO_SCHEMA: &str = "parking-scenario/v1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario not found: {0}")]
    NotFound(String),
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("scenario has no start region to sample from")]
    MissingStartRegion,
    #[error("invalid start region: {0}")]
    InvalidRegion(String),
    #[error("{0} pose is not admissible: {1}")]
    Inadmissible(&'static str, String),
}

/// Axis-aligned box, used for drawing obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x.0 < x && x < self.x.1 && self.y.0 < y && y < self.y.1
    }
}

/// Box of start positions plus a union of heading intervals [rad].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub headings: Vec<(f64, f64)>,
}

impl StartRegion {
    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::InvalidRegion(m));
        if !(self.x.0 <= self.x.1 && self.y.0 <= self.y.1) {
            return bad(format!("empty box x {:?} y {:?}", self.x, self.y));
        }
        if self.headings.is_empty() {
            return bad("no heading intervals".into());
        }
        if let Some(h) = self.headings.iter().find(|(lo, hi)| !(lo <= hi)) {
            return bad(format!("heading interval {h:?} is reversed"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &CarState) -> bool {
        let inside = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
        inside(self.x, p.x_w) && inside(self.y, p.y_w) && self.headings.iter().any(|&h| inside(h, p.theta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "schema")]
    pub schema: String,
    pub name: String,
    pub start: CarState,
    pub goal: CarState,
    #[serde(default)]
    pub stcs: Vec<Stc>,
    pub y_bounds: (f64, f64),
    #[serde(default)]
    pub x_bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub params: ScvxParams,
    #[serde(default)]
    pub start_region: Option<StartRegion>,
    /// Seed the start pose was drawn with, if any.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Drawn as hatched boxes; the optimizer only sees `stcs`.
    #[serde(default)]
    pub obstacles: Vec<Rect>,
}

fn schema() -> String {
    SCENARIO_SCHEMA.to_string()
}

fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

/// Two blocks leave a 2 m wide, 2 m deep gap centered on x = 0. The car
/// starts in the lane above and ends at the gap center facing down.
pub fn reverse_parking() -> Scenario {
    let params = ScvxParams { safety_margin: 0.2, ..Default::default() };
    Scenario {
        schema: schema(),
        name: "reverse".into(),
        start: CarState::new(3.0, 3.5, 0.0),
        goal: CarState::new(0.0, 1.0, -PI / 2.0),
        stcs: vec![parking_gap_stc(1.0, 2.0).expect("positive half-width")],
        y_bounds: (0.0, 5.0),
        x_bounds: None,
        model: ModelParams::default(),
        params,
        start_region: Some(StartRegion {
            x: (-4.0, 4.0),
            y: (2.8, 4.2),
            headings: vec![(deg(-60.0), deg(60.0)), (deg(150.0), deg(210.0))],
        }),
        seed: None,
        obstacles: vec![Rect { x: (-7.0, -1.0), y: (0.0, 2.0) }, Rect { x: (1.0, 7.0), y: (0.0, 2.0) }],
    }
}

/// A 5 m bay between two parked blocks along the curb at y = 0. The goal is
/// the bay center aligned with the curb; the start is in the lane beside
/// the front block.
pub fn parallel_parking() -> Scenario {
    let params = ScvxParams { safety_margin: 0.2, ..Default::default() };
    Scenario {
        schema: schema(),
        name: "parallel".into(),
        start: CarState::new(4.0, 3.5, 0.0),
        goal: CarState::new(0.0, 1.0, 0.0),
        stcs: vec![parking_gap_stc(2.5, 2.0).expect("positive half-width")],
        y_bounds: (0.0, 5.0),
        x_bounds: Some((-8.0, 8.0)),
        model: ModelParams::default(),
        params,
        start_region: Some(StartRegion {
            x: (3.0, 5.0),
            y: (3.0, 4.0),
            headings: vec![(deg(-10.0), deg(10.0))],
        }),
        seed: None,
        obstacles: vec![Rect { x: (-8.0, -2.5), y: (0.0, 2.0) }, Rect { x: (2.5, 8.0), y: (0.0, 2.0) }],
    }
}

/// Weights for baseline comparisons: path length dominates, no jerk term.
pub fn baseline_params() -> ScvxParams {
    ScvxParams { weights: CostWeights { jerk: 0.0, length: 1.0, ..Default::default() }, ..Default::default() }
}

/// Obstacle-free instance between two poses, for baseline comparisons.
pub fn free_space(start: CarState, goal: CarState, model: ModelParams, params: ScvxParams) -> Scenario {
    let pad = 10.0 * model.turning_radius() + 10.0;
    Scenario {
        schema: schema(),
        name: "free".into(),
        start,
        goal,
        stcs: Vec::new(),
        y_bounds: (start.y_w.min(goal.y_w) - pad, start.y_w.max(goal.y_w) + pad),
        x_bounds: None,
        model,
        params,
        start_region: None,
        seed: None,
        obstacles: Vec::new(),
    }
}

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "reverse" => Some(reverse_parking()),
        "parallel" => Some(parallel_parking()),
        _ => None,
    }
}

/// Deterministic draw from the start region: position uniform in the box,
/// heading uniform over the union of intervals.
pub fn sample_start(s: &Scenario, seed: u64) -> Result<CarState, ScenarioError> {
    let region = s.start_region.as_ref().ok_or(ScenarioError::MissingStartRegion)?;
    region.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let x = uniform(region.x);
    let y = uniform(region.y);
    let total: f64 = region.headings.iter().map(|(lo, hi)| hi - lo).sum();
    let mut r = uniform((0.0, total));
    let mut theta = region.headings[0].0;
    for &(lo, hi) in &region.headings {
        theta = lo + r.min(hi - lo);
        if r <= hi - lo {
            break;
        }
        r -= hi - lo;
    }
    Ok(CarState::new(x, y, theta))
}

impl Scenario {
    /// Copy with the start pose drawn from the start region.
    pub fn with_seed(&self, seed: u64) -> Result<Scenario, ScenarioError> {
        let start = sample_start(self, seed)?;
        Ok(Scenario { start, seed: Some(seed), ..self.clone() })
    }

    /// Check that start and goal satisfy the scenario's own constraints.
    pub fn check(&self) -> Result<(), ScenarioError> {
        for (which, p) in [("start", &self.start), ("goal", &self.goal)] {
            if !p.is_finite() {
                return Err(ScenarioError::Inadmissible(which, "not finite".into()));
            }
            if p.y_w < self.y_bounds.0 || p.y_w > self.y_bounds.1 {
                return Err(ScenarioError::Inadmissible(which, format!("y outside {:?}", self.y_bounds)));
            }
            if let Some((lo, hi)) = self.x_bounds {
                if p.x_w < lo || p.x_w > hi {
                    return Err(ScenarioError::Inadmissible(which, format!("x outside ({lo}, {hi})")));
                }
            }
            if let Some(h) = self.stcs.iter().map(|s| s.residual(p)).find(|h| *h > 0.0) {
                return Err(ScenarioError::Inadmissible(which, format!("obstacle residual {h}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if s.schema != SCENARIO_SCHEMA {
            return Err(ScenarioError::Parse(format!("unsupported schema {:?}", s.schema)));
        }
        if let Some(r) = &s.start_region {
            r.validate()?;
        }
        s.params.validate().map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => ScenarioError::NotFound(path.display().to_string()),
            _ => ScenarioError::Io(format!("{}: {e}", path.display())),
        })?;
        Self::from_json(&text)
    }
}

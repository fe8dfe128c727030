use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use parking_scvx::scenarios::{self, ScenarioError};
use parking_scvx::validate::DEFAULT_DENSE;
use parking_scvx::{scvx_run, CarState, ModelParams, Scenario};

use crate::artifact::{RunArtifact, CLEAN_TOL};
use crate::svg::{history_svg, trajectory_svg};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario not found: {0}")]
    ScenarioNotFound(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("not converged after {0} iterations")]
    NotConverged(usize),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("artifact not found: {0}")]
    ArtifactNotFound(String),
    #[error("corrupt artifact: {0}")]
    CorruptArtifact(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable short tag for scripts.
    pub fn reason(&self) -> &'static str {
        match self {
            CliError::ScenarioNotFound(_) => "scenario not found",
            CliError::BadInput(_) => "bad input",
            CliError::Solver(_) => "solver failure",
            CliError::NotConverged(_) => "not converged",
            CliError::Validation(_) => "validation failed",
            CliError::ArtifactNotFound(_) => "artifact not found",
            CliError::CorruptArtifact(_) => "corrupt artifact",
            CliError::Io(_) => "io error",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) | CliError::Validation(_) | CliError::Solver(_) => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": self.reason(), "detail": self.to_string() }).to_string()
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::NotFound(p) => CliError::ScenarioNotFound(p),
            other => CliError::BadInput(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Builtin(String),
    File(PathBuf),
}

impl ScenarioSource {
    pub fn load(&self) -> Result<Scenario, CliError> {
        match self {
            ScenarioSource::Builtin(name) => {
                scenarios::builtin(name).ok_or_else(|| CliError::ScenarioNotFound(name.clone()))
            }
            ScenarioSource::File(path) => Ok(Scenario::load(path)?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    pub source: ScenarioSource,
    pub seed: Option<u64>,
    pub knots: Option<usize>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub scenario: String,
    pub seed: Option<u64>,
    pub converged: bool,
    pub iterations: usize,
    pub duration: f64,
    pub path_length: f64,
    pub cusps: usize,
    pub rs_length: f64,
    pub files: Vec<PathBuf>,
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

/// Solve, write the requested outputs, then gate on convergence and a clean
/// validation report. Files are written even when the gate fails.
pub fn plan(opts: &PlanOptions) -> Result<PlanSummary, CliError> {
    let mut scenario = opts.source.load()?;
    if let Some(seed) = opts.seed {
        scenario = scenario.with_seed(seed)?;
    }
    if let Some(k) = opts.knots {
        scenario.params.knots = k;
    }
    let solution = scvx_run(&scenario, &scenario.params).map_err(|e| match e {
        parking_scvx::scvx::ScvxError::InvalidParams(m) => CliError::BadInput(m),
        parking_scvx::scvx::ScvxError::InvalidScenario(m) => CliError::BadInput(m),
        other => CliError::Solver(other.to_string()),
    })?;
    let artifact = RunArtifact::build(&scenario, &solution, DEFAULT_DENSE);

    fs::create_dir_all(&opts.out)?;
    let stem = match opts.seed {
        Some(s) => format!("{}-seed{s}", scenario.name),
        None => scenario.name.clone(),
    };
    let mut files = Vec::new();
    for f in &opts.formats {
        match f {
            Format::Json => {
                write(opts.out.join(format!("{stem}.json")), &artifact.to_json(), &mut files)?;
                write(opts.out.join(format!("{stem}-history.jsonl")), &artifact.history_jsonl(), &mut files)?;
            }
            Format::Csv => write(opts.out.join(format!("{stem}.csv")), &artifact.knots_csv(), &mut files)?,
            Format::Svg => write(opts.out.join(format!("{stem}.svg")), &trajectory_svg(&artifact), &mut files)?,
        }
    }
    if !artifact.converged {
        return Err(CliError::NotConverged(artifact.iterations));
    }
    let failures = artifact.report.failures(CLEAN_TOL);
    if !failures.is_empty() {
        return Err(CliError::Validation(failures));
    }
    Ok(PlanSummary {
        scenario: scenario.name,
        seed: opts.seed,
        converged: artifact.converged,
        iterations: artifact.iterations,
        duration: artifact.report.duration,
        path_length: artifact.report.path_length,
        cusps: artifact.report.cusps,
        rs_length: artifact.rs_baseline.length,
        files,
    })
}

/// Parses `x,y,theta` with the heading in radians.
pub fn parse_pose(text: &str) -> Result<CarState, String> {
    let v: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, t] if v.iter().all(|c| c.is_finite()) => Ok(CarState::new(x, y, t)),
        _ => Err(format!("expected x,y,theta with finite numbers, got {text:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub converged: bool,
    pub iterations: usize,
    /// Path length with turns in place charged at the turning radius.
    pub scvx_length: f64,
    pub scvx_path_length: f64,
    pub scvx_duration: f64,
    pub rs_length: f64,
    pub rs_word: String,
    pub ratio: f64,
}

/// Unconstrained three-section instance against the Reeds-Shepp optimum.
pub fn rs_compare(q0: CarState, q1: CarState, radius: f64, svg_out: &Path) -> Result<CompareSummary, CliError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::BadInput(format!("radius must be positive, got {radius}")));
    }
    let model = ModelParams { kappa_max: 1.0 / radius };
    let scenario = scenarios::free_space(q0, q1, model, scenarios::baseline_params());
    let solution = scvx_run(&scenario, &scenario.params).map_err(|e| CliError::Solver(e.to_string()))?;
    let artifact = RunArtifact::build(&scenario, &solution, DEFAULT_DENSE);
    if let Some(dir) = svg_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(svg_out, trajectory_svg(&artifact))?;
    let r = &artifact.report;
    let summary = CompareSummary {
        converged: artifact.converged,
        iterations: artifact.iterations,
        scvx_length: r.rs_equivalent_length,
        scvx_path_length: r.path_length,
        scvx_duration: r.duration,
        rs_length: artifact.rs_baseline.length,
        rs_word: artifact.rs_baseline.word.clone(),
        ratio: r.rs_equivalent_length / artifact.rs_baseline.length,
    };
    if !artifact.converged {
        return Err(CliError::NotConverged(artifact.iterations));
    }
    let failures = r.failures(CLEAN_TOL);
    if !failures.is_empty() {
        return Err(CliError::Validation(failures));
    }
    Ok(summary)
}

/// Reads an artifact and writes its convergence plot.
pub fn history(input: &Path, out: &Path) -> Result<usize, CliError> {
    let text = fs::read_to_string(input).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::ArtifactNotFound(input.display().to_string()),
        _ => CliError::Io(e),
    })?;
    let artifact = RunArtifact::from_json(&text).map_err(CliError::CorruptArtifact)?;
    fs::write(out, history_svg(&artifact.history))?;
    Ok(artifact.history.len())
}

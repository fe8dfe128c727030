//! Multi-seed runs of one scenario.

use std::time::{Duration, Instant};

use crate::par;
use crate::scenarios::{Scenario, ScenarioError};
use crate::scvx::{scvx_run, MultiSegmentSolution, ScvxError};
use crate::validate::{validate_trajectory, ViolationReport, DEFAULT_DENSE};

#[derive(Debug)]
pub enum RunOutcome {
    Solved { solution: MultiSegmentSolution, report: ViolationReport },
    Failed(ScvxError),
}

#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub scenario: Scenario,
    pub outcome: RunOutcome,
    pub elapsed: Duration,
}

impl SeedRun {
    /// Converged and clean at `tol`.
    pub fn succeeded(&self, tol: f64) -> bool {
        match &self.outcome {
            RunOutcome::Solved { solution, report } => solution.converged && report.is_clean(tol),
            RunOutcome::Failed(_) => false,
        }
    }

    pub fn report(&self) -> Option<&ViolationReport> {
        match &self.outcome {
            RunOutcome::Solved { report, .. } => Some(report),
            RunOutcome::Failed(_) => None,
        }
    }
}

/// Solve and validate one seeded copy of `base`.
pub fn run_seed(base: &Scenario, seed: u64) -> Result<SeedRun, ScenarioError> {
    let scenario = base.with_seed(seed)?;
    let t = Instant::now();
    let outcome = match scvx_run(&scenario, &scenario.params) {
        Ok(solution) => {
            let report = validate_trajectory(&solution, &scenario, DEFAULT_DENSE).report;
            RunOutcome::Solved { solution, report }
        }
        Err(e) => RunOutcome::Failed(e),
    };
    Ok(SeedRun { seed, scenario, outcome, elapsed: t.elapsed() })
}

/// Runs every seed, in parallel when the `parallel` feature is on. The
/// result order follows `seeds`.
pub fn run_batch(base: &Scenario, seeds: &[u64]) -> Result<Vec<SeedRun>, ScenarioError> {
    par::map(seeds, |&s| run_seed(base, s)).into_iter().collect()
}

/// Same as [`run_batch`] but always on the calling thread.
pub fn run_batch_sequential(base: &Scenario, seeds: &[u64]) -> Result<Vec<SeedRun>, ScenarioError> {
    par::map_sequential(seeds, |&s| run_seed(base, s)).into_iter().collect()
}

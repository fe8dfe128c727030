//! Writes the conic regression set: subproblems captured from SCvx runs.
//!
//! Usage: `cargo run --example dump_subproblems -- <out-dir>`; reference
//! objectives come from `tests/fixtures/conic/reference.py`.

use std::sync::Mutex;

use parking_scvx::conic::{ClarabelBackend, ConicBackend, ConicError, ConicProblem, ConicSolution};
use parking_scvx::{scenarios, scvx, CarState, ModelParams};

struct Recorder {
    inner: ClarabelBackend,
    seen: Mutex<Vec<ConicProblem>>,
}

impl ConicBackend for Recorder {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution, ConicError> {
        self.seen.lock().unwrap().push(problem.clone());
        self.inner.solve(problem)
    }
}

/// Subproblems of the given iterations.
fn capture(s: &parking_scvx::Scenario, iterations: &[usize]) -> Vec<ConicProblem> {
    let mut params = s.params.clone();
    params.knots = 8;
    let rec = Recorder { inner: ClarabelBackend::with_tolerances(params.solver), seen: Mutex::new(Vec::new()) };
    scvx::scvx_run_with(s, &params, &rec).expect("run succeeds");
    let seen = rec.seen.into_inner().unwrap();
    iterations.iter().map(|&i| seen[i].clone()).collect()
}

fn main() {
    let out = std::path::PathBuf::from(std::env::args().nth(1).expect("output directory"));
    std::fs::create_dir_all(&out).unwrap();
    let free = scenarios::free_space(
        CarState::new(0.0, 0.0, 0.0),
        CarState::new(4.0, 2.0, 1.0),
        ModelParams::default(),
        scenarios::baseline_params(),
    );
    let mut problems = capture(&scenarios::reverse_parking().with_seed(1).unwrap(), &[0, 2, 4]);
    problems.extend(capture(&scenarios::reverse_parking().with_seed(3).unwrap(), &[1, 3]));
    problems.extend(capture(&scenarios::parallel_parking().with_seed(2).unwrap(), &[0, 2, 4]));
    problems.extend(capture(&free, &[0, 2]));
    for (i, p) in problems.iter().enumerate() {
        std::fs::write(out.join(format!("subproblem-{i:02}.json")), p.to_json()).unwrap();
    }
}

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};
use serde::{Deserialize, Serialize};

use super::{AffineExpr, ConicBackend, ConicError, ConicProblem, ConicSolution, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverTolerances {
    pub feasibility: f64,
    pub gap: f64,
    pub max_iter: u32,
    /// Diagonal shift added to the KKT matrix before factoring.
    pub regularization: f64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self { feasibility: 1e-8, gap: 1e-8, max_iter: 200, regularization: 1e-10 }
    }
}

/// Interior-point backend built on the Clarabel solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelBackend {
    pub tolerances: SolverTolerances,
}

impl ClarabelBackend {
    pub fn with_tolerances(tolerances: SolverTolerances) -> Self {
        Self { tolerances }
    }
}

/// Clarabel wants `A v + s = b, s in K`. A cone member `a.v + c` therefore
/// becomes the row `-a` with right-hand side `c`.
struct Assembly {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Assembly {
    fn push(&mut self, e: &AffineExpr) {
        let row = self.b.len();
        for (col, coef) in e.normalized().terms {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(-coef);
        }
        self.b.push(e.constant);
    }
}

impl ConicBackend for ClarabelBackend {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution, ConicError> {
        problem.validate()?;
        let n = problem.n_vars;
        let mut asm = Assembly { rows: Vec::new(), cols: Vec::new(), vals: Vec::new(), b: Vec::new() };
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        problem.equalities.iter().for_each(|e| asm.push(e));
        if !problem.equalities.is_empty() {
            cones.push(ZeroConeT(problem.equalities.len()));
        }
        problem.nonneg.iter().for_each(|e| asm.push(e));
        if !problem.nonneg.is_empty() {
            cones.push(NonnegativeConeT(problem.nonneg.len()));
        }
        for c in &problem.soc {
            asm.push(&c.t);
            c.y.iter().for_each(|e| asm.push(e));
            cones.push(SecondOrderConeT(1 + c.y.len()));
        }

        let m = asm.b.len();
        let a = CscMatrix::new_from_triplets(m, n, asm.rows, asm.cols, asm.vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_feas(self.tolerances.feasibility)
            .tol_gap_abs(self.tolerances.gap)
            .tol_gap_rel(self.tolerances.gap)
            .max_iter(self.tolerances.max_iter)
            .static_regularization_constant(self.tolerances.regularization)
            .build()
            .map_err(|e| ConicError::Backend(e.to_string()))?;
        let mut solver = DefaultSolver::new(&p, &problem.objective, &a, &asm.b, &cones, settings)
            .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        solver.solve();

        let v = solver.solution.x.clone();
        let status = match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
            SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIters,
            _ => SolveStatus::NumericalFailure,
        };
        // Reduced-accuracy exits must still meet the residual contract.
        let status = if status == SolveStatus::Optimal
            && (problem.equality_residual(&v) > 1e-6 || problem.cone_violation(&v) > 1e-6)
        {
            SolveStatus::NumericalFailure
        } else {
            status
        };
        let objective_value = problem.objective_at(&v);
        Ok(ConicSolution { status, v, objective_value })
    }
}

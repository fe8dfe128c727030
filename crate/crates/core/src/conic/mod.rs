//! Standard-form conic programs: linear objective, affine equalities,
//! nonnegative orthant and second-order cones.
//!
//! The SCvx core only ever talks to [`ConicProblem`] and [`ConicSolution`];
//! backends translate these into whatever their solver wants.

mod clarabel_backend;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clarabel_backend::{ClarabelBackend, SolverTolerances};

#[derive(Debug, Error, PartialEq)]
pub enum ConicError {
    #[error("variable block must contain at least one variable")]
    EmptyBlock,
    #[error("{what} references variable {index} but the problem has {n_vars}")]
    IndexOutOfRange { what: &'static str, index: usize, n_vars: usize },
    #[error("second-order cone {0} has an empty vector block")]
    EmptyCone(usize),
    #[error("objective has {got} entries but the problem has {n_vars} variables")]
    ObjectiveLength { got: usize, n_vars: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("backend setup failed: {0}")]
    Backend(String),
    #[error("problem file: {0}")]
    Io(String),
}

/// Sparse affine form `sum_i coef_i * v[index_i] + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn term(index: usize, coef: f64) -> Self {
        Self { terms: vec![(index, coef)], constant: 0.0 }
    }

    pub fn with_term(mut self, index: usize, coef: f64) -> Self {
        self.push(index, coef);
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn push(&mut self, index: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn plus(mut self, other: &AffineExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn minus(self, other: &AffineExpr) -> Self {
        self.plus(&other.clone().scaled(-1.0))
    }

    pub fn negated(self) -> Self {
        self.scaled(-1.0)
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * v[i]).sum::<f64>() + self.constant
    }

    /// Sorted by index with duplicates merged and exact zeros dropped.
    pub fn normalized(&self) -> AffineExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        AffineExpr { terms: merged, constant: self.constant }
    }

    fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|t| t.1.is_finite())
    }
}

/// `||y||_2 <= t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub t: AffineExpr,
    pub y: Vec<AffineExpr>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub n_vars: usize,
    /// Dense linear cost, one entry per variable.
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    /// Each form is required to equal zero.
    pub equalities: Vec<AffineExpr>,
    /// Each form is required to be nonnegative.
    pub nonneg: Vec<AffineExpr>,
    pub soc: Vec<SocConstraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append `n` fresh variables with zero cost.
    pub fn add_variable_block(&mut self, n: usize) -> Result<Range<usize>, ConicError> {
        if n == 0 {
            return Err(ConicError::EmptyBlock);
        }
        let start = self.n_vars;
        self.n_vars += n;
        self.objective.resize(self.n_vars, 0.0);
        Ok(start..self.n_vars)
    }

    pub fn add_variable(&mut self) -> usize {
        self.add_variable_block(1).map(|r| r.start).expect("block of one")
    }

    pub fn add_cost(&mut self, index: usize, coef: f64) {
        self.objective[index] += coef;
    }

    pub fn add_cost_expr(&mut self, e: &AffineExpr, weight: f64) {
        for &(i, c) in &e.terms {
            self.objective[i] += weight * c;
        }
        self.objective_constant += weight * e.constant;
    }

    pub fn add_equality(&mut self, e: AffineExpr) {
        self.equalities.push(e);
    }

    /// `lhs == rhs`.
    pub fn add_equal(&mut self, lhs: AffineExpr, rhs: &AffineExpr) {
        self.equalities.push(lhs.minus(rhs));
    }

    pub fn add_nonneg(&mut self, e: AffineExpr) {
        self.nonneg.push(e);
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: AffineExpr, rhs: &AffineExpr) {
        self.nonneg.push(rhs.clone().minus(&lhs));
    }

    pub fn add_soc(&mut self, t: AffineExpr, y: Vec<AffineExpr>) {
        self.soc.push(SocConstraint { t, y });
    }

    /// Fresh `t` with `t >= e` and `t >= -e`; minimizing `t` yields `|e|`.
    pub fn add_abs_epigraph(&mut self, e: &AffineExpr) -> usize {
        let t = self.add_variable();
        self.nonneg.push(AffineExpr::var(t).minus(e));
        self.nonneg.push(AffineExpr::var(t).plus(e));
        t
    }

    /// Fresh `t` with `||y||_2 <= t`.
    pub fn add_soc_epigraph(&mut self, y: Vec<AffineExpr>) -> usize {
        let t = self.add_variable();
        self.add_soc(AffineExpr::var(t), y);
        t
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.objective.len() != self.n_vars {
            return Err(ConicError::ObjectiveLength { got: self.objective.len(), n_vars: self.n_vars });
        }
        if !self.objective.iter().all(|c| c.is_finite()) || !self.objective_constant.is_finite() {
            return Err(ConicError::NonFinite("objective"));
        }
        let check = |e: &AffineExpr, what: &'static str| -> Result<(), ConicError> {
            if let Some(index) = e.max_index().filter(|&i| i >= self.n_vars) {
                return Err(ConicError::IndexOutOfRange { what, index, n_vars: self.n_vars });
            }
            if !e.is_finite() {
                return Err(ConicError::NonFinite(what));
            }
            Ok(())
        };
        self.equalities.iter().try_for_each(|e| check(e, "equality"))?;
        self.nonneg.iter().try_for_each(|e| check(e, "nonnegative cone"))?;
        for (k, c) in self.soc.iter().enumerate() {
            if c.y.is_empty() {
                return Err(ConicError::EmptyCone(k));
            }
            check(&c.t, "second-order cone")?;
            c.y.iter().try_for_each(|e| check(e, "second-order cone"))?;
        }
        Ok(())
    }

    pub fn objective_at(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum::<f64>() + self.objective_constant
    }

    /// `max |E v - f|`.
    pub fn equality_residual(&self, v: &[f64]) -> f64 {
        self.equalities.iter().map(|e| e.eval(v).abs()).fold(0.0, f64::max)
    }

    /// Largest violation over all nonnegative and second-order cones.
    pub fn cone_violation(&self, v: &[f64]) -> f64 {
        let orthant = self.nonneg.iter().map(|e| (-e.eval(v)).max(0.0)).fold(0.0, f64::max);
        let soc = self
            .soc
            .iter()
            .map(|c| {
                let norm = c.y.iter().map(|e| e.eval(v).powi(2)).sum::<f64>().sqrt();
                (norm - c.t.eval(v)).max(0.0)
            })
            .fold(0.0, f64::max);
        orthant.max(soc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ProblemFile::from(self)).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ConicError> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| ConicError::Io(e.to_string()))?;
        if file.format != PROBLEM_FORMAT {
            return Err(ConicError::Io(format!("unknown format {:?}", file.format)));
        }
        let problem = file.problem;
        problem.validate()?;
        Ok(problem)
    }
}

const PROBLEM_FORMAT: &str = "conic-problem/v1";

#[derive(Serialize, Deserialize)]
struct ProblemFile {
    format: String,
    #[serde(flatten)]
    problem: ConicProblem,
}

impl From<&ConicProblem> for ProblemFile {
    fn from(p: &ConicProblem) -> Self {
        ProblemFile { format: PROBLEM_FORMAT.to_string(), problem: p.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub v: Vec<f64>,
    pub objective_value: f64,
}

/// Anything that can solve a [`ConicProblem`].
///
/// Solver outcomes such as infeasibility are reported through
/// [`SolveStatus`]; `Err` is reserved for problems that are malformed.
pub trait ConicBackend: Sync {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution, ConicError>;
}

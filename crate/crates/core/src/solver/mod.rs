//! Block coordinate descent for `min ‖A - (J - R) P⁻¹‖_F` over the convex
//! LMI set of a region.
//!
//! One outer iteration solves the convex `(J, R)` subproblem for the current
//! `P` exactly (up to the inner tolerance), then takes a backtracking gradient
//! step on all three blocks. The driver always finishes on a `(J, R)` solve so
//! the returned triple satisfies the LMIs.

mod bcd;
mod gradient;
mod jr;
mod project;

pub use bcd::{bcd, SolveReport};
pub use gradient::{gradient, gradient_raw, gradient_step, objective, value_gradient_p, StepState};
pub use jr::{solve_jr, ConstraintSet, JrSolution, JrWarmStart};
pub(crate) use jr::RELAXATION;
pub use project::{project_triple, ProjectionOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{default_mu, Mat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Outer BCD iterations.
    pub outer_iters: usize,
    /// Iteration budget of each inner convex solve.
    pub inner_iters: usize,
    /// Relative tolerance on inner primal/dual residuals.
    pub inner_tol: f64,
    /// Initial gradient step; `None` means `1 / ‖A‖_F`.
    pub step0: Option<f64>,
    pub backtrack_factor: f64,
    pub step_grow: f64,
    /// Eigenvalue floor used when inverting `P`; `None` means `1e-9 · tr(P) / n`.
    pub mu_floor: Option<f64>,
    /// Interleave gradient steps between `(J, R)` solves. Without them `P`
    /// never moves.
    pub gradient_steps: bool,
    pub step_rule: StepRule,
}

/// How the gradient step between `(J, R)` solves is formed and accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Step on `P` along the gradient of the constrained value function
    /// (objective gradient minus the dual-weighted constraint gradient).
    /// A candidate is accepted when the re-solved `(J, R)` objective does not
    /// increase, so the recorded history is non-increasing.
    Lagrangian,
    /// Step on `(J, R, P)` along the objective gradient alone, accepted on
    /// the unconstrained objective; the next `(J, R)` solve restores the LMIs.
    Unconstrained,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            outer_iters: 100,
            inner_iters: 500,
            inner_tol: 1e-8,
            step0: None,
            backtrack_factor: 0.5,
            step_grow: 2.0,
            mu_floor: None,
            gradient_steps: true,
            step_rule: StepRule::Lagrangian,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.outer_iters == 0 {
            return bad("outer_iters must be positive");
        }
        if self.inner_iters == 0 {
            return bad("inner_iters must be positive");
        }
        if !(self.inner_tol > 0.0) {
            return bad("inner_tol must be positive");
        }
        if let Some(s) = self.step0 {
            if !(s > 0.0 && s.is_finite()) {
                return bad("step0 must be positive");
            }
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.step_grow > 1.0 && self.step_grow.is_finite()) {
            return bad("step_grow must exceed 1");
        }
        if let Some(m) = self.mu_floor {
            if !(m > 0.0) {
                return bad("mu_floor must be positive");
            }
        }
        Ok(())
    }

    /// Inversion floor for a given `P`.
    pub fn mu_for(&self, p: &Mat) -> f64 {
        self.mu_floor.unwrap_or_else(|| default_mu(p))
    }

    pub fn step0_for(&self, a: &Mat) -> f64 {
        self.step0.unwrap_or_else(|| 1.0 / a.norm().max(f64::MIN_POSITIVE))
    }
}

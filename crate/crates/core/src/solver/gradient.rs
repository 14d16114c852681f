use crate::error::{Error, Result};
use crate::lmi::{ConstraintOperator, SymmetricOperator};
use crate::numkernel::{floor_eigenvalues, regularized_inverse, symmetrize, DhTriple, Mat};

use super::SolverOptions;

/// `f(J, R, P) = ‖(J - R) P⁻¹ - A‖²_F` with the inverse floored at `mu`.
pub fn objective(a: &Mat, t: &DhTriple, mu: f64) -> f64 {
    (t.w() * regularized_inverse(&t.p, mu) - a).norm_squared()
}

/// Unprojected gradient blocks of `f`, with `E = (J - R) P⁻¹ - A`:
/// `∇_J = 2 E P⁻ᵀ`, `∇_R = -∇_J`, `∇_P = -2 P⁻ᵀ (J - R)ᵀ E P⁻ᵀ`.
pub fn gradient_raw(a: &Mat, t: &DhTriple, mu: f64) -> (Mat, Mat, Mat) {
    let m = regularized_inverse(&t.p, mu);
    let w = t.w();
    let e = &w * &m - a;
    let gj = &e * &m * 2.0;
    let gr = -&gj;
    let gp = &m * w.transpose() * &e * &m * -2.0;
    (gj, gr, gp)
}

/// Gradient projected onto the triple structure (skew, symmetric, symmetric).
pub fn gradient(a: &Mat, t: &DhTriple, mu: f64) -> DhTriple {
    let (gj, gr, gp) = gradient_raw(a, t, mu);
    let mut g = DhTriple::new(gj, gr, gp);
    g.restructure();
    g
}

/// Gradient in `P` of the value function `φ(P) = min_{J,R} f(J, R, P)` over
/// the LMI set, from a `(J, R)` solve and its duals `Y_i`:
/// `∇_P f - Σ (L_i* Y_i)_P`.
pub fn value_gradient_p(a: &Mat, t: &DhTriple, duals: &[Mat], ops: &[ConstraintOperator], mu: f64) -> Mat {
    let (_, _, gp) = gradient_raw(a, t, mu);
    let mut g = symmetrize(&gp);
    for (o, y) in ops.iter().zip(duals) {
        g -= o.adjoint(y).p;
    }
    g
}

/// Step length carried across outer iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepState {
    pub step: f64,
    pub step0: f64,
}

impl StepState {
    pub fn new(step0: f64) -> Self {
        Self { step: step0, step0 }
    }
}

/// One backtracking gradient step on all blocks. The step shrinks until the
/// objective does not increase, and is enlarged for the next call. Region
/// LMIs are not enforced here; the next `(J, R)` solve restores them.
pub fn gradient_step(
    a: &Mat,
    t: &DhTriple,
    state: &mut StepState,
    opts: &SolverOptions,
) -> Result<DhTriple> {
    let mu = opts.mu_for(&t.p);
    let f0 = objective(a, t, mu);
    let g = gradient(a, t, mu);
    if g.norm() == 0.0 {
        return Ok(t.clone());
    }
    let mut s = state.step;
    loop {
        let mut cand = t.add_scaled(&g, -s);
        cand.restructure();
        cand.p = floor_eigenvalues(&cand.p, mu);
        let fc = objective(a, &cand, opts.mu_for(&cand.p));
        if fc <= f0 {
            state.step = s * opts.step_grow;
            return Ok(cand);
        }
        s *= opts.backtrack_factor;
        if s < 1e-12 * state.step0 {
            state.step = state.step0;
            return Err(Error::StepCollapse { step: s });
        }
    }
}

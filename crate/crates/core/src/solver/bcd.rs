use std::time::Instant;

use log::debug;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{self, dh_assemble, floor_eigenvalues, io::mat_serde, lambda_min, symmetrize, DhTriple, Mat};
use crate::region::RegionSpec;

use super::{
    gradient_step, solve_jr, value_gradient_p, ConstraintSet, JrSolution, SolverOptions, StepRule, StepState,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// `‖A - (J - R) P⁻¹‖_F` after each outer iteration's `(J, R)` solve.
    pub objective_history: Vec<f64>,
    /// Best feasible triple seen.
    pub final_triple: DhTriple,
    #[serde(with = "mat_serde")]
    pub final_matrix: Mat,
    /// Eigenvalues of `final_matrix` as `[re, im]`.
    pub eigenvalues: Vec<[f64; 2]>,
    /// Eigenvalues of the input matrix as `[re, im]`.
    pub input_eigenvalues: Vec<[f64; 2]>,
    /// Minimum eigenvalue over the region operators at `final_triple`.
    pub final_margin: f64,
    pub elapsed: f64,
}

impl SolveReport {
    pub fn final_error(&self) -> f64 {
        (*self.objective_history.iter().min_by(|a, b| a.total_cmp(b)).unwrap()).max(0.0)
    }

    pub fn initial_error(&self) -> f64 {
        self.objective_history[0]
    }

    pub fn complex_eigenvalues(&self) -> Vec<Complex64> {
        to_complex(&self.eigenvalues)
    }

    pub fn complex_input_eigenvalues(&self) -> Vec<Complex64> {
        to_complex(&self.input_eigenvalues)
    }

    /// Running minimum of the objective history.
    pub fn running_best(&self) -> Vec<f64> {
        self.objective_history
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }

    /// Equality of everything except wall-clock time, bit for bit.
    pub fn same_outcome(&self, other: &SolveReport) -> bool {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let mbits = |m: &Mat| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        bits(&self.objective_history) == bits(&other.objective_history)
            && mbits(&self.final_triple.j) == mbits(&other.final_triple.j)
            && mbits(&self.final_triple.r) == mbits(&other.final_triple.r)
            && mbits(&self.final_triple.p) == mbits(&other.final_triple.p)
            && mbits(&self.final_matrix) == mbits(&other.final_matrix)
            && self.final_margin.to_bits() == other.final_margin.to_bits()
            && pairs_bits(&self.eigenvalues) == pairs_bits(&other.eigenvalues)
            && pairs_bits(&self.input_eigenvalues) == pairs_bits(&other.input_eigenvalues)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

fn to_complex(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

fn pairs_bits(v: &[[f64; 2]]) -> Vec<(u64, u64)> {
    v.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect()
}

fn eigen_pairs(m: &Mat) -> Result<Vec<[f64; 2]>> {
    Ok(numkernel::eigenvalues(m)?.into_iter().map(|z| [z.re, z.im]).collect())
}

/// Smallest allowed ratio `λ_min(P_new) / λ_min(P)` for a Lagrangian step.
const MIN_P_SHRINK: f64 = 0.1;
/// Backtracking halvings tried before a Lagrangian step gives up.
const MAX_HALVINGS: usize = 20;

/// Block coordinate descent from `init`.
///
/// Each outer iteration records the error of a `(J, R)` solve at the current
/// `P`; between records a gradient step moves `P` (see [`StepRule`]). Every
/// recorded iterate comes straight out of a `(J, R)` solve and is therefore
/// feasible; the best one is returned. With [`StepRule::Lagrangian`] the run
/// ends early, with a shorter history, once no step improves the objective.
pub fn bcd(a: &Mat, region: &RegionSpec, init: &DhTriple, opts: &SolverOptions) -> Result<SolveReport> {
    let start = Instant::now();
    opts.validate()?;
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "A must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("A has non-finite entries".into()));
    }
    let n = a.nrows();
    if init.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial triple is {}x{}, A is {n}x{n}",
            init.n(),
            init.n()
        )));
    }
    let set = ConstraintSet::new(region, n)?;

    let mut t = init.clone();
    t.restructure();
    t.p = floor_eigenvalues(&t.p, opts.mu_for(&t.p));

    let mut step = StepState::new(opts.step0_for(a));
    let mut history = Vec::with_capacity(opts.outer_iters);
    let mut best: Option<(f64, DhTriple)> = None;
    let mut sol = solve_jr(a, &t.p, &set, opts, None)?;

    for k in 0..opts.outer_iters {
        t.j = sol.j.clone();
        t.r = sol.r.clone();
        let err = sol.objective;
        history.push(err);
        if best.as_ref().map_or(true, |(b, _)| err < *b) {
            best = Some((err, t.clone()));
        }
        if k + 1 == opts.outer_iters {
            break;
        }
        if !opts.gradient_steps {
            sol = solve_jr(a, &t.p, &set, opts, Some(&sol.warm))?;
            continue;
        }
        match opts.step_rule {
            StepRule::Unconstrained => {
                match gradient_step(a, &t, &mut step, opts) {
                    Ok(next) => t = next,
                    Err(Error::StepCollapse { step }) => {
                        debug!("bcd: gradient step collapsed at iteration {k} (step {step:e})");
                    }
                    Err(e) => return Err(e),
                }
                sol = solve_jr(a, &t.p, &set, opts, Some(&sol.warm))?;
            }
            StepRule::Lagrangian => match lagrangian_step(a, &t, &sol, &set, &mut step, opts)? {
                Some((p, next)) => {
                    t.p = p;
                    sol = next;
                }
                None => {
                    debug!("bcd: no improving P step at iteration {k}; stopping");
                    break;
                }
            },
        }
    }

    let (_, final_triple) = best.expect("at least one outer iteration");
    let final_matrix = dh_assemble(&final_triple, opts.mu_for(&final_triple.p));
    let eigenvalues = eigen_pairs(&final_matrix)?;
    let input_eigenvalues = eigen_pairs(a)?;
    let final_margin = set.margin(&final_triple);
    Ok(SolveReport {
        objective_history: history,
        final_triple,
        final_matrix,
        eigenvalues,
        input_eigenvalues,
        final_margin,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Backtracking step on `P` along the value-function gradient. The candidate
/// is rescaled to trace `n` (the objective is invariant under scaling the
/// triple) and must keep `λ_min` above a fixed fraction of the current one.
/// Returns `None` when no candidate improves within the halving budget.
fn lagrangian_step(
    a: &Mat,
    t: &DhTriple,
    sol: &JrSolution,
    set: &ConstraintSet,
    step: &mut StepState,
    opts: &SolverOptions,
) -> Result<Option<(Mat, JrSolution)>> {
    let n = t.n() as f64;
    let mu = opts.mu_for(&t.p);
    let g = value_gradient_p(a, t, &sol.duals, &set.ops, mu);
    if g.norm() == 0.0 {
        return Ok(None);
    }
    let lmin = lambda_min(&t.p);
    let f0 = sol.objective;
    let mut s = step.step;
    for halvings in 0..MAX_HALVINGS {
        let cand = symmetrize(&(&t.p - &g * s));
        if lambda_min(&cand) >= MIN_P_SHRINK * lmin {
            let cand = &cand * (n / cand.trace());
            match solve_jr(a, &cand, set, opts, Some(&sol.warm)) {
                Ok(next) if next.objective <= f0 => {
                    // Grow only after a step accepted at its first trial length.
                    step.step = if halvings == 0 { s * opts.step_grow } else { s };
                    return Ok(Some((cand, next)));
                }
                Ok(_) | Err(Error::NumericalBreakdown(_)) => {}
                Err(e) => return Err(e),
            }
        }
        s *= opts.backtrack_factor;
    }
    step.step = step.step0;
    Ok(None)
}

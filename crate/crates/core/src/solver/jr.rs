//! The convex `(J, R)` subproblem for fixed `P`.
//!
//! With `W = J - R` (so `J = skew W`, `R = -sym W`) the problem reads
//!
//! ```text
//! min ‖W M - A‖²   s.t.  L_i(W) + C_i(P) ⪰ 0,   M = P⁻¹ (floored)
//! ```
//!
//! and is solved by ADMM on the splitting `Z_i = L_i(W) + C_i`, `Z_i ⪰ 0`. The
//! `W`-step is a linear system `2 W M² + ρ (g_J skew W + g_R sym W) = B`, which
//! decouples into 2×2 systems on entry pairs in the eigenbasis of `M`.

use log::debug;

use crate::error::{Error, Result};
use crate::lmi::{min_margin, region_operators, ConstraintOperator, SymmetricOperator};
use crate::numkernel::{psd_project_sym, skew, sym_eigen, symmetrize, DhTriple, Mat};
use crate::region::RegionSpec;

use super::SolverOptions;

/// ADMM over-relaxation.
pub(crate) const RELAXATION: f64 = 1.6;
const RHO_ADAPT_EVERY: usize = 20;

/// Region operators for one size, plus a real point strictly inside Ω used
/// to build a strictly feasible `(J, R) = (0, -x P)` for any `P ≻ 0`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub ops: Vec<ConstraintOperator>,
    pub witness: f64,
    n: usize,
    gram_j: f64,
    gram_r: f64,
}

impl ConstraintSet {
    pub fn new(region: &RegionSpec, n: usize) -> Result<Self> {
        region.validate()?;
        let witness = region
            .interior_real_point()
            .ok_or_else(|| Error::EmptyRegion("no real interior point".into()))?;
        let ops = region_operators(region, n);
        let gram_j = ops.iter().map(|o| o.gram_j()).sum();
        let gram_r = ops.iter().map(|o| o.gram_rp()[0][0]).sum();
        Ok(Self {
            ops,
            witness,
            n,
            gram_j,
            gram_r,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The `P`-only part `C_i(P)` of each operator.
    fn constants(&self, p: &Mat) -> Vec<Mat> {
        let z = Mat::zeros(self.n, self.n);
        self.ops.iter().map(|o| o.eval_parts(&z, &z, p)).collect()
    }

    fn affine(&self, w: &Mat, consts: &[Mat]) -> Vec<Mat> {
        let j = skew(w);
        let r = -symmetrize(w);
        let z = Mat::zeros(self.n, self.n);
        self.ops
            .iter()
            .zip(consts)
            .map(|(o, c)| o.eval_parts(&j, &r, &z) + c)
            .collect()
    }

    /// `Σ L_i*(S_i)` expressed as a gradient in `W`.
    fn adjoint_w(&self, s: &[Mat]) -> Mat {
        let mut g = Mat::zeros(self.n, self.n);
        for (o, si) in self.ops.iter().zip(s) {
            let t = o.adjoint(si);
            g += &t.j - &t.r;
        }
        g
    }

    /// Minimum eigenvalue over all operators at `(J, R) = (skew W, -sym W)`.
    pub fn margin_w(&self, w: &Mat, p: &Mat) -> f64 {
        let consts = self.constants(p);
        self.affine(w, &consts)
            .iter()
            .map(crate::numkernel::lambda_min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn margin(&self, t: &DhTriple) -> f64 {
        min_margin(&self.ops, t)
    }
}

/// Cone copies and duals carried between successive solves.
#[derive(Debug, Clone, PartialEq)]
pub struct JrWarmStart {
    pub z: Vec<Mat>,
    /// Unscaled duals `Y_i ⪰ 0`.
    pub y: Vec<Mat>,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct JrSolution {
    pub j: Mat,
    pub r: Mat,
    /// `‖(J - R) M - A‖_F`.
    pub objective: f64,
    /// Dual matrices `Y_i ⪰ 0` of the operator constraints.
    pub duals: Vec<Mat>,
    pub iterations: usize,
    pub converged: bool,
    /// Fraction of the way moved toward the interior witness to restore
    /// feasibility; zero when ADMM already ended feasible.
    pub repair: f64,
    pub warm: JrWarmStart,
}

/// Solves the `(J, R)` subproblem for fixed `P` (which must be symmetric).
pub fn solve_jr(
    a: &Mat,
    p: &Mat,
    set: &ConstraintSet,
    opts: &SolverOptions,
    warm: Option<&JrWarmStart>,
) -> Result<JrSolution> {
    let n = set.n;
    if a.shape() != (n, n) || p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, P is {:?}, operators built for n={n}",
            a.shape(),
            p.shape()
        )));
    }
    let p = symmetrize(p);
    let mu = opts.mu_for(&p);
    let eig = sym_eigen(&p);
    let v = eig.eigenvectors.clone();
    let vt = v.transpose();
    let d: Vec<f64> = eig.eigenvalues.iter().map(|&l| 1.0 / l.max(mu)).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalBreakdown("P has non-finite spectrum".into()));
    }
    let mut m = v.clone();
    for (k, &dk) in d.iter().enumerate() {
        m.column_mut(k).scale_mut(dk);
    }
    let m = symmetrize(&(m * &vt));
    let two_am = a * &m * 2.0;
    let objective = |w: &Mat| (w * &m - a).norm();

    let (gj, gr) = (set.gram_j, set.gram_r);
    let solve_w = |b: &Mat, rho: f64| -> Result<Mat> {
        let bt = &vt * b * &v;
        let mut wt = Mat::zeros(n, n);
        let s = 0.5 * rho * (gr + gj);
        let c = 0.5 * rho * (gr - gj);
        for i in 0..n {
            let di = 2.0 * d[i] * d[i];
            wt[(i, i)] = bt[(i, i)] / (di + rho * gr);
            for j in (i + 1)..n {
                let dj = 2.0 * d[j] * d[j];
                // [a11 c; c a22] [x; y] = [b_ij; b_ji]
                let a11 = dj + s;
                let a22 = di + s;
                let det = a11 * a22 - c * c;
                if !(det > 0.0) || !det.is_finite() {
                    return Err(Error::NumericalBreakdown(format!(
                        "singular W-system pair ({i},{j}), det={det:e}"
                    )));
                }
                let (bij, bji) = (bt[(i, j)], bt[(j, i)]);
                wt[(i, j)] = (a22 * bij - c * bji) / det;
                wt[(j, i)] = (a11 * bji - c * bij) / det;
            }
        }
        Ok(&v * wt * &vt)
    };

    // Unconstrained minimizer W = A M⁻¹.
    let w_free = solve_w(&two_am, 0.0)?;
    if set.ops.is_empty() {
        let w = w_free;
        return Ok(JrSolution {
            j: skew(&w),
            r: -symmetrize(&w),
            objective: objective(&w),
            duals: Vec::new(),
            iterations: 0,
            converged: true,
            repair: 0.0,
            warm: JrWarmStart {
                z: Vec::new(),
                y: Vec::new(),
                rho: 1.0,
            },
        });
    }

    let consts = set.constants(&p);
    let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let dmax = d.iter().cloned().fold(0.0, f64::max);
    let rho0 = 2.0 * dmin * dmax / gj.max(gr).max(1e-12);
    let (mut rho, mut z, mut u) = match warm {
        Some(ws) if ws.z.len() == set.ops.len() && ws.rho > 0.0 => {
            let u: Vec<Mat> = ws.y.iter().map(|y| y / (-ws.rho)).collect();
            (ws.rho, ws.z.clone(), u)
        }
        _ => {
            let z: Vec<Mat> = set
                .affine(&w_free, &consts)
                .iter()
                .map(psd_project_sym)
                .collect();
            let u = z.iter().map(|zi| Mat::zeros(zi.nrows(), zi.ncols())).collect();
            (rho0, z, u)
        }
    };

    let mut w = w_free.clone();
    let mut converged = false;
    let mut iterations = 0;
    let tol = opts.inner_tol;
    for it in 0..opts.inner_iters {
        iterations = it + 1;
        // W-step.
        let shifted: Vec<Mat> = consts
            .iter()
            .zip(&z)
            .zip(&u)
            .map(|((c, zi), ui)| c - zi + ui)
            .collect();
        let b = &two_am - set.adjoint_w(&shifted) * rho;
        w = solve_w(&b, rho)?;

        // Cone step with over-relaxation.
        let aff = set.affine(&w, &consts);
        let mut r_prim2 = 0.0;
        let mut aff_norm2 = 0.0;
        let mut z_norm2 = 0.0;
        let mut dz = Vec::with_capacity(z.len());
        for k in 0..z.len() {
            let h = &aff[k] * RELAXATION + &z[k] * (1.0 - RELAXATION);
            let z_new = psd_project_sym(&(&h + &u[k]));
            u[k] += &h - &z_new;
            r_prim2 += (&aff[k] - &z_new).norm_squared();
            aff_norm2 += aff[k].norm_squared();
            z_norm2 += z_new.norm_squared();
            dz.push(&z_new - &z[k]);
            z[k] = z_new;
        }
        let r_prim = r_prim2.sqrt();
        let r_dual = set.adjoint_w(&dz).norm() * rho;
        let scale_prim = aff_norm2.sqrt().max(z_norm2.sqrt());
        let scale_dual = two_am.norm().max(set.adjoint_w(&u).norm() * rho);
        if r_prim <= tol * (1.0 + scale_prim) && r_dual <= tol * (1.0 + scale_dual) {
            converged = true;
            break;
        }
        if (it + 1) % RHO_ADAPT_EVERY == 0 {
            let rp = r_prim / scale_prim.max(1e-300);
            let rd = r_dual / scale_dual.max(1e-300);
            if rp > 0.0 && rd > 0.0 {
                let ratio = (rp / rd).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let ratio = ratio.clamp(1e-3, 1e3);
                    rho *= ratio;
                    for ui in u.iter_mut() {
                        *ui /= ratio;
                    }
                }
            }
        }
    }

    // Restore feasibility along the segment toward the interior witness.
    let mut repair = 0.0;
    let m0 = set.margin_w(&w, &p);
    if m0 < 0.0 {
        let w_wit = &p * set.witness;
        let m1 = set.margin_w(&w_wit, &p);
        if !(m1 > 0.0) {
            return Err(Error::NumericalBreakdown(format!(
                "interior witness has margin {m1:e}; P is not positive definite"
            )));
        }
        let at = |t: f64| &w + (&w_wit - &w) * t;
        // Concavity of the margin along the segment makes this end feasible.
        let mut hi = (-m0 / (m1 - m0)).min(1.0);
        let mut lo = 0.0;
        while set.margin_w(&at(hi), &p) < 0.0 && hi < 1.0 {
            lo = hi;
            hi = (2.0 * hi).min(1.0);
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if set.margin_w(&at(mid), &p) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 {
                break;
            }
        }
        repair = hi;
        w = at(hi);
        debug!("solve_jr: repaired margin {m0:e} with t={hi:e}");
    }

    let duals: Vec<Mat> = u.iter().map(|ui| ui * (-rho)).collect();
    Ok(JrSolution {
        j: skew(&w),
        r: -symmetrize(&w),
        objective: objective(&w),
        duals: duals.clone(),
        iterations,
        converged,
        repair,
        warm: JrWarmStart { z, y: duals, rho },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::numkernel::psd_project;

    fn opts() -> SolverOptions {
        SolverOptions {
            inner_iters: 20_000,
            inner_tol: 1e-11,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn representable_matrix_is_exact() {
        let set = ConstraintSet::new(&RegionSpec::continuous_stable(), 3).unwrap();
        let a = -Mat::identity(3, 3);
        let sol = solve_jr(&a, &Mat::identity(3, 3), &set, &opts(), None).unwrap();
        assert!(sol.objective < 1e-8, "{}", sol.objective);
        assert!(sol.j.norm() < 1e-8);
        assert!((&sol.r - Mat::identity(3, 3)).norm() < 1e-8);
    }

    #[test]
    fn scalar_unstable_clips_to_zero() {
        let set = ConstraintSet::new(&RegionSpec::continuous_stable(), 1).unwrap();
        let sol = solve_jr(&dmatrix![1.0], &dmatrix![1.0], &set, &opts(), None).unwrap();
        assert!(sol.r[(0, 0)].abs() < 1e-8);
        assert!(sol.r[(0, 0)] >= 0.0);
        assert!((sol.objective - 1.0).abs() < 1e-8);
    }

    #[test]
    fn no_constraints_reproduces_a() {
        let mut set = ConstraintSet::new(&RegionSpec::continuous_stable(), 2).unwrap();
        set.ops.clear();
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        let p = dmatrix![2.0, 0.5; 0.5, 1.0];
        let sol = solve_jr(&a, &p, &set, &opts(), None).unwrap();
        assert!(sol.objective < 1e-12);
    }

    #[test]
    fn unit_disk_with_identity_p_is_singular_value_clipping() {
        // With P = I the constraint is ‖W‖₂ ≤ 1, so the answer clips the
        // singular values of A at one.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let set = ConstraintSet::new(&RegionSpec::discrete_stable(), 3).unwrap();
        for _ in 0..3 {
            let a = Mat::from_fn(3, 3, |_, _| rng.random_range(-1.5..1.5));
            let svd = a.clone().svd(true, true);
            let clipped = svd.singular_values.map(|s| s.min(1.0));
            let oracle = svd.u.as_ref().unwrap()
                * Mat::from_diagonal(&clipped)
                * svd.v_t.as_ref().unwrap();
            let sol = solve_jr(&a, &Mat::identity(3, 3), &set, &opts(), None).unwrap();
            let w = &sol.j - &sol.r;
            let expected = (&oracle - &a).norm();
            assert!(
                (sol.objective - expected).abs() <= 1e-6 * expected.max(1.0),
                "{} vs {}",
                sol.objective,
                expected
            );
            assert!((w - oracle).norm() < 1e-5);
        }
    }

    #[test]
    fn output_is_feasible_even_when_budget_is_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let region = RegionSpec::sector_strip_disk(1.2, 0.5, 3.0);
        let set = ConstraintSet::new(&region, 4).unwrap();
        let a = Mat::from_fn(4, 4, |_, _| rng.random_range(-2.0..2.0));
        let b = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let p = &b * b.transpose() + Mat::identity(4, 4) * 0.1;
        let o = SolverOptions {
            inner_iters: 3,
            ..SolverOptions::default()
        };
        let sol = solve_jr(&a, &p, &set, &o, None).unwrap();
        let t = DhTriple::new(sol.j, sol.r, p);
        assert!(set.margin(&t) >= 0.0);
    }

    #[test]
    fn kkt_residual_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let region = RegionSpec::sector_strip_disk(1.1, 0.3, 2.0);
        for n in 1..=3 {
            let set = ConstraintSet::new(&region, n).unwrap();
            let a = Mat::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let b = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let p = &b * b.transpose() + Mat::identity(n, n) * 0.5;
            let sol = solve_jr(&a, &p, &set, &opts(), None).unwrap();
            assert!(sol.converged);
            let m = crate::numkernel::regularized_inverse(&p, 1e-12);
            let w = &sol.j - &sol.r;
            let grad = (&w * &m - &a) * &m * 2.0;
            let kkt = &grad - set.adjoint_w(&sol.duals);
            for y in &sol.duals {
                assert!((psd_project(y).unwrap() - y).norm() <= 1e-6 * y.norm().max(1.0));
            }
            let scale = (&a * &m).norm().max(1.0);
            assert!(kkt.norm() <= 1e-5 * scale, "n={n}: kkt {}", kkt.norm());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let set = ConstraintSet::new(&RegionSpec::continuous_stable(), 2).unwrap();
        let r = solve_jr(&Mat::zeros(3, 3), &Mat::identity(3, 3), &set, &opts(), None);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }
}

//! Frobenius projection of a triple onto the convex feasible set
//! `{ L_i(J, R, P) ⪰ 0 for all i, P ⪰ floor · I }`.

use crate::error::{Error, Result};
use crate::lmi::{ConstraintOperator, SymmetricOperator, TripleCoef};
use crate::numkernel::{psd_project_sym, DhTriple, Mat};
use crate::region::RegionSpec;

use super::jr::RELAXATION;
use super::{ConstraintSet, SolverOptions};

#[derive(Debug, Clone)]
pub struct ProjectionOutcome {
    pub triple: DhTriple,
    pub iterations: usize,
    /// False when the iteration budget ran out; the triple is still feasible.
    pub converged: bool,
}

/// Projects `t0` (after structural symmetrization) onto the region's
/// feasible set with `P ⪰ p_floor · I`, by ADMM on cone copies of each
/// operator. The iterate is finally pulled toward a strictly feasible triple
/// just far enough to satisfy every constraint.
pub fn project_triple(
    t0: &DhTriple,
    region: &RegionSpec,
    p_floor: f64,
    opts: &SolverOptions,
) -> Result<ProjectionOutcome> {
    if !(p_floor >= 0.0) {
        return Err(Error::InvalidParameter(format!("p_floor must be >= 0, got {p_floor}")));
    }
    let n = t0.n();
    let set = ConstraintSet::new(region, n)?;
    let mut ops = set.ops.clone();
    ops.push(ConstraintOperator::new("p-cone", n, 1, vec![(0, 0, TripleCoef::new(0.0, 0.0, 1.0))]));
    let consts: Vec<Mat> = ops
        .iter()
        .enumerate()
        .map(|(i, o)| {
            if i + 1 == ops.len() {
                -Mat::identity(n, n) * p_floor
            } else {
                Mat::zeros(o.dim(), o.dim())
            }
        })
        .collect();

    let mut target = t0.clone();
    target.restructure();

    let gj: f64 = ops.iter().map(|o| o.gram_j()).sum();
    let mut g = [[0.0; 2]; 2];
    for o in &ops {
        let gi = o.gram_rp();
        for r in 0..2 {
            for c in 0..2 {
                g[r][c] += gi[r][c];
            }
        }
    }
    let adjoint_sum = |s: &[Mat]| -> DhTriple {
        let mut acc = DhTriple::zeros(n);
        for (o, si) in ops.iter().zip(s) {
            let a = o.adjoint(si);
            acc = acc.add_scaled(&a, 1.0);
        }
        acc
    };
    let affine = |t: &DhTriple| -> Vec<Mat> {
        ops.iter().zip(&consts).map(|(o, c)| o.eval(t) + c).collect()
    };
    // (I + ρ Σ L*L) t = rhs, block-diagonal on J and on (R, P) entry pairs.
    let solve_t = |rhs: &DhTriple, rho: f64| -> DhTriple {
        let j = &rhs.j / (1.0 + rho * gj);
        let a11 = 1.0 + rho * g[0][0];
        let a12 = rho * g[0][1];
        let a22 = 1.0 + rho * g[1][1];
        let det = a11 * a22 - a12 * a12;
        let r = (&rhs.r * a22 - &rhs.p * a12) / det;
        let p = (&rhs.p * a11 - &rhs.r * a12) / det;
        DhTriple::new(j, r, p)
    };

    let mut rho = 1.0;
    let mut z: Vec<Mat> = affine(&target).iter().map(psd_project_sym).collect();
    let mut u: Vec<Mat> = z.iter().map(|zi| Mat::zeros(zi.nrows(), zi.ncols())).collect();
    let mut t = target.clone();
    let mut converged = false;
    let mut iterations = 0;
    let tol = opts.inner_tol;
    let budget = opts.inner_iters.max(1);
    for it in 0..budget {
        iterations = it + 1;
        let shifted: Vec<Mat> = z
            .iter()
            .zip(&u)
            .zip(&consts)
            .map(|((zi, ui), c)| zi - ui - c)
            .collect();
        let rhs = target.add_scaled(&adjoint_sum(&shifted), rho);
        let t_new = solve_t(&rhs, rho);
        let change = t_new.dist(&t);
        t = t_new;

        let aff = affine(&t);
        let mut r_prim2 = 0.0;
        let mut scale2 = 0.0;
        let mut dz = Vec::with_capacity(z.len());
        for k in 0..z.len() {
            let h = &aff[k] * RELAXATION + &z[k] * (1.0 - RELAXATION);
            let z_new = psd_project_sym(&(&h + &u[k]));
            u[k] += &h - &z_new;
            r_prim2 += (&aff[k] - &z_new).norm_squared();
            scale2 += aff[k].norm_squared().max(z_new.norm_squared());
            dz.push(&z_new - &z[k]);
            z[k] = z_new;
        }
        let r_prim = r_prim2.sqrt();
        let r_dual = adjoint_sum(&dz).norm() * rho;
        let scale = 1.0 + scale2.sqrt().max(target.norm());
        if r_prim <= tol * scale && r_dual <= tol * scale && change <= tol * scale {
            converged = true;
            break;
        }
        if (it + 1) % 20 == 0 && r_prim > 0.0 && r_dual > 0.0 {
            let ratio = (r_prim / r_dual).sqrt();
            if !(0.2..=5.0).contains(&ratio) {
                let ratio = ratio.clamp(1e-3, 1e3);
                rho *= ratio;
                for ui in u.iter_mut() {
                    *ui /= ratio;
                }
            }
        }
    }

    // Feasibility repair toward J = 0, R = -x P_w, P_w = s I.
    let margin = |t: &DhTriple| -> f64 {
        affine(t)
            .iter()
            .map(crate::numkernel::lambda_min)
            .fold(f64::INFINITY, f64::min)
    };
    let m0 = margin(&t);
    if m0 < 0.0 {
        let s = (2.0 * p_floor).max(t.p.norm() / (n as f64).sqrt()).max(1.0);
        let p_w = Mat::identity(n, n) * s;
        let wit = DhTriple::new(Mat::zeros(n, n), &p_w * (-set.witness), p_w);
        let m1 = margin(&wit);
        let dir = wit.add_scaled(&t, -1.0);
        let mut hi = (-m0 / (m1 - m0)).min(1.0);
        let mut lo = 0.0;
        while margin(&t.add_scaled(&dir, hi)) < 0.0 && hi < 1.0 {
            lo = hi;
            hi = (2.0 * hi).min(1.0);
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if margin(&t.add_scaled(&dir, mid)) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 {
                break;
            }
        }
        t = t.add_scaled(&dir, hi);
    }
    t.restructure();
    Ok(ProjectionOutcome {
        triple: t,
        iterations,
        converged,
    })
}

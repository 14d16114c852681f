//! Starting triples for BCD.
//!
//! The relaxed-LMI initialization solves
//! `min δ  s.t.  L_i(X) ⪰ -δ I,  X ⪰ I` over symmetric `X`, where `L_i` are the
//! Lyapunov-type operators of the region. `δ* = 0` exactly when `A` is
//! Ω-stable (up to the closure), so the result doubles as a certificate.

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{feasibility_operators_in_x, FeasibilityOperatorX, SymmetricOperator};
use crate::numkernel::{dh_from_x, lambda_min, psd_project_sym, symmetrize, DhTriple, Mat};
use crate::region::RegionSpec;
use crate::solver::{solve_jr, ConstraintSet, SolverOptions, RELAXATION};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitResult {
    pub triple: DhTriple,
    /// Optimal relaxation level; absent for initializations that do not
    /// compute it.
    pub delta_star: Option<f64>,
    /// `A` was certified Ω-stable (`δ* ≤ cert_tol`).
    pub certificate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmiInitOptions {
    /// Iteration budget of the relaxed-LMI solve and of one fixed-`δ`
    /// feasibility test.
    pub max_iters: usize,
    /// Relative primal/dual residual tolerance of the relaxed-LMI solve.
    pub tol: f64,
    /// The solve stops once the attained `δ` improves by less than
    /// `stall_rel · (1 + |δ|)` over a window of iterations.
    pub stall_rel: f64,
    /// Allowed violation of each relaxed inequality when a fixed-`δ`
    /// feasibility test declares success.
    pub feas_tol: f64,
    /// `δ` is kept above `-floor_rel · (1 + δ_hi)`. A slightly negative floor
    /// makes the returned `X` strictly feasible whenever `A` is Ω-stable.
    pub floor_rel: f64,
    pub cert_tol: f64,
}

impl Default for LmiInitOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-8,
            stall_rel: 1e-4,
            feas_tol: 1e-7,
            floor_rel: 1e-3,
            cert_tol: 1e-6,
        }
    }
}

fn check_square(a: &Mat) -> Result<usize> {
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
    Ok(a.nrows())
}

/// `P = I` with the best feasible `(J, R)` for it.
pub fn identity_init(a: &Mat, region: &RegionSpec, opts: &SolverOptions) -> Result<InitResult> {
    let n = check_square(a)?;
    fixed_p_init(a, region, Mat::identity(n, n), opts)
}

/// Keeps only `P` of a known generator triple and re-solves `(J, R)`.
pub fn true_init(t: &DhTriple, a: &Mat, region: &RegionSpec, opts: &SolverOptions) -> Result<InitResult> {
    let n = check_square(a)?;
    if t.n() != n {
        return Err(Error::DimensionMismatch(format!("triple is {}x{}, A is {n}x{n}", t.n(), t.n())));
    }
    fixed_p_init(a, region, symmetrize(&t.p), opts)
}

fn fixed_p_init(a: &Mat, region: &RegionSpec, p: Mat, opts: &SolverOptions) -> Result<InitResult> {
    opts.validate()?;
    let set = ConstraintSet::new(region, a.nrows())?;
    let sol = solve_jr(a, &p, &set, opts, None)?;
    Ok(InitResult {
        triple: DhTriple::new(sol.j, sol.r, p),
        delta_star: None,
        certificate: false,
    })
}

/// Relaxed-LMI initialization with default feasibility settings.
pub fn lmi_init(a: &Mat, region: &RegionSpec, opts: &SolverOptions) -> Result<InitResult> {
    lmi_init_with(a, region, opts, &LmiInitOptions::default())
}

/// Outcome of one fixed-`δ` feasibility test.
#[derive(Debug, Clone)]
pub struct FeasibilityTest {
    pub feasible: bool,
    pub x: Mat,
    /// Worst violation `max(0, -λ_min)` over the relaxed inequalities at `x`.
    pub violation: f64,
    pub iterations: usize,
}

/// Lifted feasibility problem for fixed `A` and region: find `X` with
/// `Y_0 = X - I ⪰ 0` and `Y_i = L_i(X) + δ I ⪰ 0`.
///
/// The affine set `{(X, Y) : Y = L(X) + c}` is projected onto in closed form
/// through a Cholesky factor of `2I + Σ L_i* L_i` on half-vectorized
/// symmetric matrices; the cone side is a PSD clip of each `Y`. The two are
/// combined by Douglas-Rachford splitting.
pub struct LmiFeasibility {
    n: usize,
    ops: Vec<FeasibilityOperatorX>,
    /// Column `b` stacks `vec(L_i(B_b))` over all operators.
    images: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl LmiFeasibility {
    pub fn new(a: &Mat, region: &RegionSpec) -> Result<Self> {
        let n = check_square(a)?;
        region.validate()?;
        let ops = feasibility_operators_in_x(region, a);
        let m = n * (n + 1) / 2;
        let rows: usize = ops.iter().map(|o| o.dim() * o.dim()).sum();
        let mut images = DMatrix::zeros(rows, m);
        for b in 0..m {
            let basis = smat(&unit(m, b), n);
            let mut off = 0;
            for o in &ops {
                let img = o.eval(&basis);
                let len = img.len();
                images.view_mut((off, b), (len, 1)).copy_from_slice(img.as_slice());
                off += len;
            }
        }
        let gram = images.transpose() * &images + DMatrix::identity(m, m) * 2.0;
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::NumericalBackend("Gram matrix of the X operators is not positive definite".into()))?;
        Ok(Self { n, ops, images, chol })
    }

    pub fn operators(&self) -> &[FeasibilityOperatorX] {
        &self.ops
    }

    /// Most negative eigenvalue of `L_i(X)` over `i`, and of `X - I`, negated:
    /// the smallest `δ` for which `X` is feasible (ignoring `X ⪰ I`), and the
    /// violation of `X ⪰ I`.
    pub fn required_delta(&self, x: &Mat) -> (f64, f64) {
        let d = self
            .ops
            .iter()
            .map(|o| -lambda_min(&o.eval(x)))
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = -lambda_min(&(x - Mat::identity(self.n, self.n)));
        (d, shift)
    }

    /// A level at which `X = I` is strictly feasible.
    pub fn delta_hi(&self) -> f64 {
        self.required_delta(&Mat::identity(self.n, self.n)).0.max(0.0) + 1.0
    }

    /// Shifts `X` by a multiple of `I` so that `X ⪰ I` holds exactly and
    /// returns it with the smallest `δ` it satisfies.
    pub fn repair(&self, x: &Mat) -> (Mat, f64) {
        let mut x = symmetrize(x);
        let (_, shift) = self.required_delta(&x);
        if shift > 0.0 {
            x += Mat::identity(self.n, self.n) * shift;
        }
        (x.clone(), self.required_delta(&x).0)
    }

    /// ADMM on `min δ` over `(X, δ)` with cone copies
    /// `Z_0 ≈ X - I`, `Z_i ≈ L_i(X) + δ I`, `z ≈ δ - δ_floor ≥ 0`.
    ///
    /// Every few iterations the current `X` is repaired and the level it
    /// attains is recorded; the best repaired `X` is returned, together with
    /// whether the run ended on the residual tolerance or by reaching
    /// `δ ≤ 0` (rather than on stagnation or the budget).
    pub fn minimize_delta(&self, opts: &LmiInitOptions) -> (Mat, bool) {
        let n = self.n;
        let m = n * (n + 1) / 2;
        let id = Mat::identity(n, n);
        let floor = -opts.floor_rel * (1.0 + self.delta_hi());
        let dims: Vec<usize> = self.ops.iter().map(|o| o.dim()).collect();

        // Gram of the stacked map v = (svec X, δ) ↦ (X, L_i X + δ I, δ).
        let mut stacked_id = DVector::zeros(self.images.nrows());
        let mut off = 0;
        for &d in &dims {
            let e = Mat::identity(d, d);
            stacked_id.rows_mut(off, d * d).copy_from_slice(e.as_slice());
            off += d * d;
        }
        let mut h = DMatrix::zeros(m + 1, m + 1);
        h.view_mut((0, 0), (m, m))
            .copy_from(&(self.images.transpose() * &self.images + DMatrix::identity(m, m)));
        let cross = self.images.transpose() * &stacked_id;
        h.view_mut((0, m), (m, 1)).copy_from(&cross);
        h.view_mut((m, 0), (1, m)).copy_from(&cross.transpose());
        h[(m, m)] = dims.iter().sum::<usize>() as f64 + 1.0;
        let chol = match Cholesky::new(h) {
            Some(c) => c,
            None => return (id, false),
        };

        let apply = |x: &Mat, delta: f64| -> (Mat, Vec<Mat>, f64) {
            let ys = self
                .ops
                .iter()
                .map(|o| o.eval(x) + Mat::identity(o.dim(), o.dim()) * delta)
                .collect();
            (x - &id, ys, delta - floor)
        };
        // Adjoint of the stacked map, applied to (S_0, S_i, s).
        let adjoint = |s0: &Mat, si: &[Mat], s: f64| -> DVector<f64> {
            let mut stacked = DVector::zeros(self.images.nrows());
            let mut off = 0;
            let mut tr = s;
            for z in si {
                stacked.rows_mut(off, z.len()).copy_from_slice(z.as_slice());
                off += z.len();
                tr += z.trace();
            }
            let mut v = DVector::zeros(m + 1);
            v.rows_mut(0, m).copy_from(&(svec(s0) + self.images.transpose() * stacked));
            v[m] = tr;
            v
        };

        let mut x = id.clone();
        let mut delta = self.delta_hi();
        let (a0, ai, a_s) = apply(&x, delta);
        let mut z0 = psd_project_sym(&a0);
        let mut zi: Vec<Mat> = ai.iter().map(psd_project_sym).collect();
        let mut zs = a_s.max(0.0);
        let mut u0 = Mat::zeros(n, n);
        let mut ui: Vec<Mat> = dims.iter().map(|&d| Mat::zeros(d, d)).collect();
        let mut us = 0.0;
        let mut rho = 1.0;
        const CHECK_EVERY: usize = 50;
        const STALL_WINDOW: usize = 500;
        let mut best = self.repair(&id);
        let mut window_best = best.1;

        for it in 0..opts.max_iters {
            // v-update: ρ H v = -e_δ + ρ A*(Z - U - c), with c the constants of the map.
            let t0 = &z0 - &u0 + &id;
            let ti: Vec<Mat> = zi.iter().zip(&ui).map(|(z, u)| z - u).collect();
            let ts = zs - us + floor;
            let mut rhs = adjoint(&t0, &ti, ts);
            rhs[m] -= 1.0 / rho;
            let v = chol.solve(&rhs);
            x = smat(&v.rows(0, m).into_owned(), n);
            delta = v[m];

            let (a0, ai, a_s) = apply(&x, delta);
            let relax = |a: &Mat, z: &Mat| a * RELAXATION + z * (1.0 - RELAXATION);
            let mut r_prim2 = 0.0;
            let mut norm2 = 0.0;
            let h0 = relax(&a0, &z0);
            let z0n = psd_project_sym(&(&h0 + &u0));
            u0 += &h0 - &z0n;
            r_prim2 += (&a0 - &z0n).norm_squared();
            norm2 += a0.norm_squared().max(z0n.norm_squared());
            let d0 = &z0n - &z0;
            z0 = z0n;
            let mut di = Vec::with_capacity(zi.len());
            for k in 0..zi.len() {
                let hk = relax(&ai[k], &zi[k]);
                let zk = psd_project_sym(&(&hk + &ui[k]));
                ui[k] += &hk - &zk;
                r_prim2 += (&ai[k] - &zk).norm_squared();
                norm2 += ai[k].norm_squared().max(zk.norm_squared());
                di.push(&zk - &zi[k]);
                zi[k] = zk;
            }
            let hs = RELAXATION * a_s + (1.0 - RELAXATION) * zs;
            let zsn = (hs + us).max(0.0);
            us += hs - zsn;
            r_prim2 += (a_s - zsn).powi(2);
            let ds = zsn - zs;
            zs = zsn;

            let r_prim = r_prim2.sqrt();
            let r_dual = rho * adjoint(&d0, &di, ds).norm();
            let dual_scale = rho * adjoint(&u0, &ui, us).norm();
            if (it + 1) % CHECK_EVERY == 0 {
                let (xr, d) = self.repair(&x);
                if d < best.1 {
                    best = (xr, d);
                }
                if best.1 <= 0.0 {
                    return (best.0, true);
                }
                if (it + 1) % STALL_WINDOW == 0 {
                    if window_best - best.1 <= opts.stall_rel * (1.0 + best.1.abs()) {
                        debug!("lmi_init: delta stalled at {:e} after {} iterations", best.1, it + 1);
                        return (best.0, false);
                    }
                    window_best = best.1;
                }
            }
            if r_prim <= opts.tol * (1.0 + norm2.sqrt()) && r_dual <= opts.tol * (1.0 + dual_scale) {
                let (xr, d) = self.repair(&x);
                if d < best.1 {
                    best = (xr, d);
                }
                return (best.0, true);
            }
            if (it + 1) % 20 == 0 && r_prim > 0.0 && r_dual > 0.0 {
                let rp = r_prim / (1.0 + norm2.sqrt());
                let rd = r_dual / (1.0 + dual_scale);
                let ratio = (rp / rd).sqrt();
                if !(0.2..=5.0).contains(&ratio) {
                    let ratio = ratio.clamp(1e-3, 1e3);
                    rho *= ratio;
                    u0 /= ratio;
                    for u in ui.iter_mut() {
                        *u /= ratio;
                    }
                    us /= ratio;
                }
            }
        }
        let (xr, d) = self.repair(&x);
        if d < best.1 {
            best = (xr, d);
        }
        (best.0, false)
    }

    fn affine_project(&self, x_hat: &Mat, y_hat: &[Mat], delta: f64) -> (Mat, Vec<Mat>) {
        let n = self.n;
        let id = Mat::identity(n, n);
        let mut stacked = DVector::zeros(self.images.nrows());
        let mut off = 0;
        for (o, yh) in self.ops.iter().zip(&y_hat[1..]) {
            let z = yh - Mat::identity(o.dim(), o.dim()) * delta;
            stacked.rows_mut(off, z.len()).copy_from_slice(z.as_slice());
            off += z.len();
        }
        let rhs = svec(x_hat) + svec(&(&y_hat[0] + &id)) + self.images.transpose() * stacked;
        let x = smat(&self.chol.solve(&rhs), n);
        let ys = self.lift(&x, delta);
        (x, ys)
    }

    fn lift(&self, x: &Mat, delta: f64) -> Vec<Mat> {
        let n = self.n;
        let mut ys = Vec::with_capacity(self.ops.len() + 1);
        ys.push(x - Mat::identity(n, n));
        for o in &self.ops {
            ys.push(o.eval(x) + Mat::identity(o.dim(), o.dim()) * delta);
        }
        ys
    }

    /// Douglas-Rachford feasibility test at level `delta`, started at `x0`.
    /// Declares infeasibility early once the residual stalls.
    pub fn test(&self, delta: f64, x0: &Mat, opts: &LmiInitOptions) -> FeasibilityTest {
        let violation = |x: &Mat| {
            let (d, s) = self.required_delta(x);
            (d - delta).max(s).max(0.0)
        };
        let mut zx = symmetrize(x0);
        let mut zy = self.lift(&zx, delta);
        let mut best_x = zx.clone();
        let mut best_v = violation(&zx);
        if best_v <= opts.feas_tol {
            return FeasibilityTest { feasible: true, x: best_x, violation: best_v, iterations: 0 };
        }
        const STALL_WINDOW: usize = 100;
        let mut window_start = f64::INFINITY;
        let mut iterations = 0;
        for it in 0..opts.max_iters {
            iterations = it + 1;
            let (ax, ay) = self.affine_project(&zx, &zy, delta);
            let v = violation(&ax);
            if v < best_v {
                best_v = v;
                best_x = ax.clone();
            }
            if v <= opts.feas_tol {
                return FeasibilityTest { feasible: true, x: ax, violation: v, iterations };
            }
            // Reflect through the affine point and clip onto the cone.
            let rx = &ax * 2.0 - &zx;
            let mut resid2 = 0.0;
            for k in 0..zy.len() {
                let ry = &ay[k] * 2.0 - &zy[k];
                let c = psd_project_sym(&ry);
                resid2 += (&c - &ay[k]).norm_squared();
                zy[k] += &c - &ay[k];
            }
            // X is unconstrained on the cone side.
            zx += &rx - &ax;
            let resid = resid2.sqrt();
            if (it + 1) % STALL_WINDOW == 0 {
                if resid > 0.0 && window_start.is_finite() && window_start - resid < 1e-3 * resid {
                    debug!("feasibility test at delta={delta:e}: stalled at residual {resid:e}");
                    break;
                }
                window_start = resid;
            }
        }
        FeasibilityTest { feasible: false, x: best_x, violation: best_v, iterations }
    }
}

fn unit(m: usize, b: usize) -> DVector<f64> {
    let mut v = DVector::zeros(m);
    v[b] = 1.0;
    v
}

/// Orthonormal half-vectorization: diagonal entries, then `√2 · S_ij` for `i < j`.
fn svec(s: &Mat) -> DVector<f64> {
    let n = s.nrows();
    let mut v = DVector::zeros(n * (n + 1) / 2);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            v[k] = if i == j {
                s[(i, i)]
            } else {
                0.5 * (s[(i, j)] + s[(j, i)]) * std::f64::consts::SQRT_2
            };
            k += 1;
        }
    }
    v
}

fn smat(v: &DVector<f64>, n: usize) -> Mat {
    let mut s = Mat::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                s[(i, i)] = v[k];
            } else {
                let e = v[k] / std::f64::consts::SQRT_2;
                s[(i, j)] = e;
                s[(j, i)] = e;
            }
            k += 1;
        }
    }
    s
}

/// Relaxed-LMI initialization. `min δ` subject to `L_i(X) + δ I ⪰ 0`,
/// `X ⪰ I` and `δ ≥ δ_floor` is solved by ADMM over cone copies of every
/// inequality; the triple then reproduces `A` exactly from the returned `X`.
/// The reported `δ*` is the level that `X` provably attains (after shifting
/// it to satisfy `X ⪰ I` exactly), clipped at zero.
pub fn lmi_init_with(
    a: &Mat,
    region: &RegionSpec,
    opts: &SolverOptions,
    init: &LmiInitOptions,
) -> Result<InitResult> {
    opts.validate()?;
    if !(init.tol > 0.0 && init.stall_rel > 0.0 && init.feas_tol > 0.0 && init.floor_rel >= 0.0 && init.cert_tol >= 0.0)
        || init.max_iters == 0
    {
        return Err(Error::InvalidParameter("LMI init tolerances must be positive".into()));
    }
    let feas = LmiFeasibility::new(a, region)?;
    let (x, converged) = feas.minimize_delta(init);
    if !converged {
        debug!("lmi_init: relaxed LMI solve stopped before reaching its tolerance");
    }
    let (x, need) = feas.repair(&x);
    if !need.is_finite() {
        return Err(Error::NonConvergence("relaxed LMI solve diverged".into()));
    }
    let delta_star = need.max(0.0);
    let triple = dh_from_x(a, &x)?;
    Ok(InitResult {
        triple,
        delta_star: Some(delta_star),
        certificate: delta_star <= init.cert_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::dh_assemble;
    use nalgebra::dmatrix;

    #[test]
    fn svec_round_trip_and_isometry() {
        let s = dmatrix![1.0, 2.0, 3.0; 2.0, -1.0, 0.5; 3.0, 0.5, 4.0];
        let v = svec(&s);
        assert_eq!(smat(&v, 3), s);
        assert!((v.norm() - s.norm()).abs() < 1e-14);
    }

    #[test]
    fn identity_init_on_stable_diagonal() {
        let a = dmatrix![-1.0, 0.0; 0.0, -2.0];
        let region = RegionSpec::new().with_strip(0.0, f64::INFINITY);
        let out = identity_init(&a, &region, &SolverOptions::default()).unwrap();
        assert!(out.triple.j.norm() < 1e-7);
        assert!((&out.triple.r - dmatrix![1.0, 0.0; 0.0, 2.0]).norm() < 1e-7);
        assert!(out.delta_star.is_none() && !out.certificate);
    }

    #[test]
    fn scalar_unstable_delta() {
        // -2X ⪰ -δ with X ≥ 1 gives δ* = 2.
        let a = dmatrix![1.0];
        let region = RegionSpec::new().with_strip(0.0, f64::INFINITY);
        let out = lmi_init(&a, &region, &SolverOptions::default()).unwrap();
        let d = out.delta_star.unwrap();
        assert!((d - 2.0).abs() < 1e-5, "delta* = {d}");
        assert!(!out.certificate);
    }

    #[test]
    fn stable_matrix_is_certified() {
        let a = dmatrix![-1.0, 3.0; -0.5, -2.0];
        let region = RegionSpec::continuous_stable();
        let out = lmi_init(&a, &region, &SolverOptions::default()).unwrap();
        assert!(out.certificate);
        assert_eq!(out.delta_star, Some(0.0));
        let back = dh_assemble(&out.triple, 1e-14);
        assert!((&back - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn unstable_disk_case_is_not_certified() {
        let a = dmatrix![0.5, 1.0; 0.0, 1.3];
        let out = lmi_init(&a, &RegionSpec::discrete_stable(), &SolverOptions::default()).unwrap();
        assert!(out.delta_star.unwrap() > 1e-3);
        assert!(!out.certificate);
    }
}

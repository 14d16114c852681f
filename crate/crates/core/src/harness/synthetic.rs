use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numkernel::{default_mu, dh_assemble, lambda_min, skew, symmetrize, DhTriple, Mat};
use crate::region::RegionSpec;
use crate::solver::{project_triple, ConstraintSet, SolverOptions};

use super::rng::{normal_matrix, seeded};

/// Lower bound imposed on `P` when projecting the random generator triple,
/// so that `A_t = (J - R) P⁻¹` stays well conditioned.
pub const SYNTHETIC_P_FLOOR: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    /// Noisy input.
    pub a: Mat,
    /// Ω-stable ground truth `dh_assemble(truth)`.
    pub a_t: Mat,
    pub truth: DhTriple,
}

impl SyntheticInstance {
    pub fn relative_noise(&self) -> f64 {
        (&self.a - &self.a_t).norm() / self.a_t.norm()
    }
}

fn projection_options() -> SolverOptions {
    SolverOptions {
        inner_iters: 5000,
        inner_tol: 1e-10,
        ..SolverOptions::default()
    }
}

/// Random Ω-stable matrix plus relative noise `epsilon`.
///
/// `(J_0, R_0, P_0)` are drawn entrywise standard normal, made skew /
/// symmetric / symmetric, projected onto the feasible set (with
/// `P ⪰ SYNTHETIC_P_FLOOR · I`) and assembled into `A_t`. The returned `A` is
/// `A_t + ε ‖A_t‖ N / ‖N‖` for a standard normal `N`.
pub fn gen_synthetic(n: usize, epsilon: f64, region: &RegionSpec, seed: u64) -> Result<SyntheticInstance> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    region.validate()?;
    let mut rng = seeded(seed);
    let j0 = skew(&normal_matrix(&mut rng, n, n));
    let r0 = symmetrize(&normal_matrix(&mut rng, n, n));
    let p0 = symmetrize(&normal_matrix(&mut rng, n, n));
    let noise = normal_matrix(&mut rng, n, n);

    let out = project_triple(&DhTriple::new(j0, r0, p0), region, SYNTHETIC_P_FLOOR, &projection_options())?;
    let truth = out.triple;
    let a_t = dh_assemble(&truth, default_mu(&truth.p));
    let a = if epsilon == 0.0 {
        a_t.clone()
    } else {
        &a_t + &noise * (epsilon * a_t.norm() / noise.norm())
    };
    Ok(SyntheticInstance { a, a_t, truth })
}

/// Largest move from the witness, in units of `‖P‖_F`, for unbounded regions.
const MAX_REACH: f64 = 64.0;

/// A triple whose operator margin is at least `min_margin`: a random
/// structured move from the interior witness `(0, -x P, P)`, taken a random
/// fraction of the way to the boundary and rescaled if needed.
pub fn random_feasible_triple<R: Rng + ?Sized>(
    n: usize,
    region: &RegionSpec,
    min_margin: f64,
    rng: &mut R,
) -> Result<DhTriple> {
    let set = ConstraintSet::new(region, n)?;
    let b = normal_matrix(rng, n, n);
    let p = &b * b.transpose() / n as f64 + Mat::identity(n, n) * 0.5;
    let base = DhTriple::new(Mat::zeros(n, n), &p * (-set.witness), p.clone());
    let mut dir = DhTriple::new(
        skew(&normal_matrix(rng, n, n)),
        symmetrize(&normal_matrix(rng, n, n)),
        symmetrize(&normal_matrix(rng, n, n)),
    );
    dir = dir.scale(p.norm() / dir.norm());
    // A sector alone does not bound P below, so P ≻ 0 is checked as well.
    let margin_of = |t: &DhTriple| set.margin(t).min(lambda_min(&t.p));
    let margin = |s: f64| margin_of(&base.add_scaled(&dir, s));

    let mut hi = 1.0;
    while margin(hi) > 0.0 && hi < MAX_REACH {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    if margin(hi) <= 0.0 {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if margin(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        lo = hi;
    }
    let u: f64 = rng.random_range(0.05..0.95);
    let mut t = base.add_scaled(&dir, u * lo);
    let m = margin_of(&t);
    if !(m > 0.0) {
        return Err(Error::NumericalBreakdown(format!("sampled triple has margin {m:e}")));
    }
    if m < min_margin {
        t = t.scale(min_margin / m);
    }
    Ok(t)
}

/// `(dh_assemble(t), t)` for a triple from [`random_feasible_triple`].
pub fn random_stable_matrix<R: Rng + ?Sized>(
    n: usize,
    region: &RegionSpec,
    min_margin: f64,
    rng: &mut R,
) -> Result<(Mat, DhTriple)> {
    let t = random_feasible_triple(n, region, min_margin, rng)?;
    Ok((dh_assemble(&t, default_mu(&t.p)), t))
}

/// A matrix with at least one eigenvalue at distance `≥ min_dist` outside Ω:
/// an orthogonal similarity of a block diagonal built from one outside
/// eigenvalue (or conjugate pair) and a random Ω-stable block.
pub fn random_unstable_matrix<R: Rng + ?Sized>(
    n: usize,
    region: &RegionSpec,
    min_dist: f64,
    rng: &mut R,
) -> Result<Mat> {
    region.validate()?;
    let center = region
        .interior_real_point()
        .ok_or_else(|| Error::EmptyRegion("no real interior point".into()))?;
    let half = center.abs() + 2.0 + 10.0 * min_dist;
    let complex = n >= 2 && rng.random_bool(0.5);
    let mut outside = None;
    for _ in 0..100_000 {
        let re = center + rng.random_range(-half..half);
        let im = if complex { rng.random_range(0.05..half) } else { 0.0 };
        let z = Complex64::new(re, im);
        if region.outside_distance(z) >= min_dist {
            outside = Some(z);
            break;
        }
    }
    let z = outside.ok_or_else(|| Error::NumericalBreakdown("no outside eigenvalue found".into()))?;
    let k = if complex { 2 } else { 1 };
    let mut d = Mat::zeros(n, n);
    if complex {
        d[(0, 0)] = z.re;
        d[(1, 1)] = z.re;
        d[(0, 1)] = z.im;
        d[(1, 0)] = -z.im;
    } else {
        d[(0, 0)] = z.re;
    }
    if n > k {
        let (s, _) = random_stable_matrix(n - k, region, 1e-3, rng)?;
        d.view_mut((k, k), (n - k, n - k)).copy_from(&s);
    }
    let q = normal_matrix(rng, n, n).qr().q();
    Ok(&q * d * q.transpose())
}

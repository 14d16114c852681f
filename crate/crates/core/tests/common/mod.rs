//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_3, FRAC_PI_8};

use nalgebra::SymmetricEigen;
use omega_stab::harness::rng::{normal_matrix, seeded};
use omega_stab::numkernel::{skew, symmetrize};
use omega_stab::{DhTriple, Mat, RegionSpec};
use rand::Rng;

/// One representative region per family, plus the three-primitive
/// intersection `Ω_C(0, 3π/8) ∩ Ω_V(0.5, ∞) ∩ Ω_D(0, 3)`.
pub fn families() -> Vec<(&'static str, RegionSpec)> {
    vec![
        ("sector", RegionSpec::new().with_sector(-0.2, FRAC_PI_3)),
        ("strip", RegionSpec::new().with_strip(0.5, 2.0)),
        ("disk", RegionSpec::new().with_disk(-1.0, 0.8)),
        ("intersection", intersection_region()),
    ]
}

pub fn intersection_region() -> RegionSpec {
    RegionSpec::sector_strip_disk(3.0 * FRAC_PI_8, 0.5, 3.0)
}

/// Region of the synthetic study.
pub fn study_region() -> RegionSpec {
    RegionSpec::new()
        .with_sector(0.0, 3.0 * FRAC_PI_8)
        .with_strip(0.5, 1.75)
        .with_disk(1.0, 3.0)
}

pub fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Unconstrained random triple with a well conditioned `P`.
pub fn random_triple<R: Rng>(rng: &mut R, n: usize) -> DhTriple {
    let j = skew(&normal_matrix(rng, n, n));
    let r = symmetrize(&normal_matrix(rng, n, n));
    let b = normal_matrix(rng, n, n);
    DhTriple::new(j, r, &b * b.transpose() / n as f64 + Mat::identity(n, n))
}

pub fn random_symmetric(seed: u64, n: usize) -> Mat {
    symmetrize(&normal_matrix(&mut seeded(seed), n, n))
}

fn objective_plain(a: &Mat, j: &Mat, r: &Mat, p: &Mat) -> f64 {
    let pinv = p.clone().try_inverse().expect("P invertible");
    ((j - r) * pinv - a).norm_squared()
}

/// Central finite differences of `‖(J - R) P⁻¹ - A‖²` over every entry of
/// `J` and `R` and every symmetric direction `E_ij + E_ji` of `P`, using a
/// plain matrix inverse. The `P` block is returned as the symmetric
/// directional derivatives, halved off the diagonal.
pub fn fd_gradient(a: &Mat, t: &DhTriple, h: f64) -> (Mat, Mat, Mat) {
    let n = t.n();
    let f = |j: &Mat, r: &Mat, p: &Mat| objective_plain(a, j, r, p);
    let mut gj = Mat::zeros(n, n);
    let mut gr = Mat::zeros(n, n);
    let mut gp = Mat::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            let mut jp = t.j.clone();
            let mut jm = t.j.clone();
            jp[(i, k)] += h;
            jm[(i, k)] -= h;
            gj[(i, k)] = (f(&jp, &t.r, &t.p) - f(&jm, &t.r, &t.p)) / (2.0 * h);
            let mut rp = t.r.clone();
            let mut rm = t.r.clone();
            rp[(i, k)] += h;
            rm[(i, k)] -= h;
            gr[(i, k)] = (f(&t.j, &rp, &t.p) - f(&t.j, &rm, &t.p)) / (2.0 * h);
            if k >= i {
                let mut pp = t.p.clone();
                let mut pm = t.p.clone();
                pp[(i, k)] += h;
                pm[(i, k)] -= h;
                if i != k {
                    pp[(k, i)] += h;
                    pm[(k, i)] -= h;
                }
                let d = (f(&t.j, &t.r, &pp) - f(&t.j, &t.r, &pm)) / (2.0 * h);
                let v = if i == k { d } else { 0.5 * d };
                gp[(i, k)] = v;
                gp[(k, i)] = v;
            }
        }
    }
    (gj, gr, gp)
}

/// Matrix sign function by the scaled Newton iteration
/// `X ← (μX + (μX)⁻¹) / 2`, `μ = |det X|^{-1/n}`.
pub fn newton_sign(s: &Mat) -> Mat {
    let n = s.nrows();
    let mut x = s.clone();
    for _ in 0..100 {
        let mu = x.determinant().abs().powf(-1.0 / n as f64);
        let mu = if mu.is_finite() { mu } else { 1.0 };
        let xs = &x * mu;
        let next = (&xs + xs.clone().try_inverse().expect("iterate invertible")) * 0.5;
        let done = (&next - &x).norm() <= 1e-14 * next.norm();
        x = next;
        if done {
            break;
        }
    }
    x
}

/// PSD-cone projection `S (I + sign S) / 2`, with no eigendecomposition.
pub fn brute_psd_project(s: &Mat) -> Mat {
    let n = s.nrows();
    symmetrize(&(s * (Mat::identity(n, n) + newton_sign(s)) * 0.5))
}

/// Scalar feasible set for `J = 0`, where the only eigenvalue is `-R / P`,
/// written out by hand as half-planes `α R + β P ≥ γ` in the `(R, P)` plane.
pub fn scalar_halfplanes(region: &RegionSpec, p_floor: f64) -> Vec<(f64, f64, f64)> {
    let mut hs = vec![(0.0, 1.0, p_floor.max(0.0))];
    for s in &region.sectors {
        hs.push((1.0, s.a, 0.0));
    }
    if let Some(s) = region.strip {
        if s.h.is_finite() {
            hs.push((1.0, -s.h, 0.0));
        }
        if s.k.is_finite() {
            hs.push((-1.0, s.k, 0.0));
        }
    }
    // |R + c P| ≤ r P
    for d in &region.disks {
        hs.push((-1.0, d.r - d.center, 0.0));
        hs.push((1.0, d.r + d.center, 0.0));
    }
    hs
}

pub fn scalar_feasible(region: &RegionSpec, r: f64, p: f64, p_floor: f64) -> bool {
    let scale = 1.0 + r.abs() + p.abs();
    scalar_halfplanes(region, p_floor)
        .iter()
        .all(|&(al, be, ga)| al * r + be * p >= ga - 1e-12 * scale)
}

/// Nearest point of the scalar feasible polygon to `(r0, p0)` by brute
/// force: the target itself if feasible, every pairwise intersection of the
/// boundary lines, and a zooming grid search along each boundary line.
pub fn brute_project_scalar(region: &RegionSpec, r0: f64, p0: f64, p_floor: f64) -> (f64, f64) {
    if scalar_feasible(region, r0, p0, p_floor) {
        return (r0, p0);
    }
    let hs = scalar_halfplanes(region, p_floor);
    let dist2 = |(r, p): (f64, f64)| (r - r0).powi(2) + (p - p0).powi(2);
    let mut best: Option<(f64, (f64, f64))> = None;
    let mut offer = |pt: (f64, f64)| {
        if scalar_feasible(region, pt.0, pt.1, p_floor) && best.map_or(true, |(d, _)| dist2(pt) < d) {
            best = Some((dist2(pt), pt));
        }
    };
    for (i, &(a1, b1, c1)) in hs.iter().enumerate() {
        for &(a2, b2, c2) in &hs[i + 1..] {
            let det = a1 * b2 - a2 * b1;
            if det.abs() > 1e-14 {
                offer(((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det));
            }
        }
    }
    const GRID: usize = 2000;
    let reach = 4.0 * (r0.abs() + p0.abs() + 1.0);
    for &(al, be, ga) in &hs {
        let nn = al * al + be * be;
        let base = (al * ga / nn, be * ga / nn);
        let dir = (-be / nn.sqrt(), al / nn.sqrt());
        let at = |t: f64| (base.0 + t * dir.0, base.1 + t * dir.1);
        let (mut lo, mut hi) = (-reach, reach);
        let mut line_best: Option<(f64, f64)> = None;
        for _ in 0..12 {
            let cell = (hi - lo) / GRID as f64;
            for k in 0..=GRID {
                let t = lo + cell * k as f64;
                let pt = at(t);
                if scalar_feasible(region, pt.0, pt.1, p_floor) && line_best.map_or(true, |(d, _)| dist2(pt) < d) {
                    line_best = Some((dist2(pt), t));
                }
            }
            match line_best {
                Some((_, t)) => {
                    lo = t - 2.0 * cell;
                    hi = t + 2.0 * cell;
                }
                None => break,
            }
        }
        if let Some((_, t)) = line_best {
            offer(at(t));
        }
    }
    best.expect("feasible polygon is nonempty").1
}

fn spectral_ball_project(v: &Mat) -> Mat {
    let svd = v.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = Mat::from_diagonal(&svd.singular_values.map(|x| x.min(1.0)));
    u * s * vt
}

/// Optimal `‖W P⁻¹ - A‖_F` over the unit-disk constraint
/// `[[P, -W], [-Wᵀ, P]] ⪰ 0`. With `V = P^{-1/2} W P^{-1/2}` the constraint is
/// `‖V‖₂ ≤ 1` and the objective `‖P^{1/2} V P^{-1/2} - A‖_F`; solved by
/// accelerated projected gradient with singular value clipping.
pub fn unit_disk_jr_oracle(a: &Mat, p: &Mat, iters: usize) -> f64 {
    let eig = SymmetricEigen::new(p.clone());
    let f = |g: fn(f64) -> f64| {
        let d = Mat::from_diagonal(&eig.eigenvalues.map(g));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    };
    let sq = f(f64::sqrt);
    let isq = f(|x| 1.0 / x.sqrt());
    let kappa = eig.eigenvalues.max() / eig.eigenvalues.min();
    let step = 1.0 / (2.0 * kappa);
    let value = |v: &Mat| (&sq * v * &isq - a).norm();
    let mut v = Mat::zeros(a.nrows(), a.ncols());
    let mut y = v.clone();
    let mut tk = 1.0f64;
    for _ in 0..iters {
        let e = &sq * &y * &isq - a;
        let grad = &sq * e * &isq * 2.0;
        let v_next = spectral_ball_project(&(&y - grad * step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        y = &v_next + (&v_next - &v) * ((tk - 1.0) / t_next);
        v = v_next;
        tk = t_next;
    }
    value(&v)
}

/// Closed membership re-derived from the region inequalities, with slack `tol`.
pub fn closed_member(region: &RegionSpec, z: num_complex::Complex64, tol: f64) -> bool {
    let (x, y) = (z.re, z.im);
    let sectors = region.sectors.iter().all(|s| {
        let (sn, cs) = s.theta.sin_cos();
        x <= s.a + tol && sn * (x - s.a) <= cs * y + tol && cs * y <= -sn * (x - s.a) + tol
    });
    let strip = region.strip.map_or(true, |s| -s.k - tol <= x && x <= -s.h + tol);
    let disks = region.disks.iter().all(|d| (z - d.center).norm() <= d.r + tol);
    sectors && strip && disks
}

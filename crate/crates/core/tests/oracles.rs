mod common;

use common::{brute_project_scalar, brute_psd_project, families, fd_gradient, random_symmetric, random_triple, rel_diff, unit_disk_jr_oracle};
use omega_stab::harness::random_feasible_triple;
use omega_stab::harness::rng::{normal_matrix, seeded};
use omega_stab::numkernel::{psd_project, symmetrize};
use omega_stab::solver::{gradient_raw, project_triple, solve_jr, value_gradient_p, ConstraintSet};
use omega_stab::{DhTriple, Mat, RegionSpec, SolverOptions};
use proptest::prelude::*;

fn tight() -> SolverOptions {
    SolverOptions {
        inner_iters: 20_000,
        inner_tol: 1e-11,
        ..SolverOptions::default()
    }
}

#[test]
fn analytic_gradient_matches_central_differences() {
    for seed in 0..10u64 {
        let n = 2 + (seed as usize % 5);
        let mut rng = seeded(100 + seed);
        let t = random_triple(&mut rng, n);
        let a = normal_matrix(&mut rng, n, n);
        let (gj, gr, gp) = gradient_raw(&a, &t, 1e-300);
        let (fj, fr, fp) = fd_gradient(&a, &t, 1e-6);
        assert!(rel_diff(&gj, &fj) <= 1e-5, "seed {seed}: J block");
        assert!(rel_diff(&gr, &fr) <= 1e-5, "seed {seed}: R block");
        assert!(rel_diff(&symmetrize(&gp), &fp) <= 1e-5, "seed {seed}: P block");
    }
}

#[test]
fn psd_projection_matches_matrix_sqrt_oracle() {
    for seed in 0..50u64 {
        let s = random_symmetric(seed, 4);
        let ours = psd_project(&s).unwrap();
        let brute = brute_psd_project(&s);
        assert!((&ours - &brute).norm() <= 1e-8 * s.norm().max(1.0), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psd_projection_is_idempotent_and_nonexpansive(seed in any::<u64>(), n in 1usize..=6) {
        let s = random_symmetric(seed, n);
        let t = random_symmetric(seed.wrapping_add(1), n);
        let ps = psd_project(&s).unwrap();
        prop_assert!((psd_project(&ps).unwrap() - &ps).norm() <= 1e-12 * s.norm().max(1.0));
        prop_assert!((&ps - psd_project(&t).unwrap()).norm() <= (&s - &t).norm() * (1.0 + 1e-12));
        // Moreau: S = P(S) - P(-S).
        let neg = psd_project(&(-&s)).unwrap();
        prop_assert!((&ps - &neg - &s).norm() <= 1e-12 * s.norm().max(1.0));
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), n in 1usize..=3, fam in 0usize..4) {
        let (name, region) = families().swap_remove(fam);
        let mut rng = seeded(seed);
        let t0 = DhTriple::new(
            omega_stab::numkernel::skew(&normal_matrix(&mut rng, n, n)),
            symmetrize(&normal_matrix(&mut rng, n, n)),
            symmetrize(&normal_matrix(&mut rng, n, n)),
        );
        let once = project_triple(&t0, &region, 0.1, &tight()).unwrap().triple;
        let twice = project_triple(&once, &region, 0.1, &tight()).unwrap().triple;
        prop_assert!(twice.dist(&once) <= 1e-7 * once.norm().max(1.0), "{name}: moved {:e}", twice.dist(&once));
        // Feasible, and no farther than a known feasible point.
        let set = ConstraintSet::new(&region, n).unwrap();
        prop_assert!(set.margin(&once) >= -1e-9);
        let other = random_feasible_triple(n, &region, 1e-6, &mut rng).unwrap();
        let mut target = t0.clone();
        target.restructure();
        if omega_stab::numkernel::lambda_min(&other.p) >= 0.1 {
            prop_assert!(once.dist(&target) <= other.dist(&target) + 1e-6);
        }
    }
}

#[test]
fn scalar_projection_matches_grid_search() {
    for (name, region) in families() {
        let mut rng = seeded(5);
        for case in 0..40 {
            let r0 = 3.0 * omega_stab::harness::rng::standard_normal(&mut rng);
            let p0 = 3.0 * omega_stab::harness::rng::standard_normal(&mut rng);
            let floor = 0.1;
            let t0 = DhTriple::new(Mat::zeros(1, 1), Mat::from_element(1, 1, r0), Mat::from_element(1, 1, p0));
            let ours = project_triple(&t0, &region, floor, &tight()).unwrap().triple;
            let (r, p) = brute_project_scalar(&region, r0, p0, floor);
            let d = ((ours.r[(0, 0)] - r).powi(2) + (ours.p[(0, 0)] - p).powi(2)).sqrt();
            assert!(d <= 1e-4, "{name} case {case}: ({r0}, {p0}) -> ours ({}, {}) grid ({r}, {p})", ours.r[(0, 0)], ours.p[(0, 0)]);
        }
    }
}

#[test]
fn jr_subproblem_matches_unit_disk_oracle() {
    let region = RegionSpec::discrete_stable();
    for seed in 0..6u64 {
        let n = 2 + seed as usize % 3;
        let mut rng = seeded(200 + seed);
        let b = normal_matrix(&mut rng, n, n);
        let p = &b * b.transpose() / n as f64 + Mat::identity(n, n) * 0.5;
        let a = normal_matrix(&mut rng, n, n) * 1.5;
        let set = ConstraintSet::new(&region, n).unwrap();
        let sol = solve_jr(&a, &p, &set, &tight(), None).unwrap();
        let oracle = unit_disk_jr_oracle(&a, &p, 20_000);
        assert!(set.margin(&DhTriple::new(sol.j.clone(), sol.r.clone(), p.clone())) >= -1e-9);
        assert!(
            (sol.objective - oracle).abs() <= 1e-4 * (1.0 + oracle),
            "seed {seed}: admm {} oracle {oracle}",
            sol.objective
        );
    }
}

#[test]
fn value_gradient_matches_differences_of_resolved_objective() {
    // φ(P) = min over (J, R) of ‖(J - R) P⁻¹ - A‖² with the region LMIs.
    let region = RegionSpec::discrete_stable();
    let opts = tight();
    for seed in 0..3u64 {
        let n = 2;
        let mut rng = seeded(300 + seed);
        let b = normal_matrix(&mut rng, n, n);
        let p = &b * b.transpose() / n as f64 + Mat::identity(n, n);
        let a = normal_matrix(&mut rng, n, n) * 2.0;
        assert!(omega_stab::numkernel::spectral_radius(&a).unwrap() > 1.0);
        let set = ConstraintSet::new(&region, n).unwrap();
        let sol = solve_jr(&a, &p, &set, &opts, None).unwrap();
        let t = DhTriple::new(sol.j.clone(), sol.r.clone(), p.clone());
        let g = value_gradient_p(&a, &t, &sol.duals, &set.ops, 1e-300);
        let dir = symmetrize(&normal_matrix(&mut rng, n, n));
        let h = 1e-4;
        let phi = |q: &Mat| solve_jr(&a, q, &set, &opts, None).unwrap().objective.powi(2);
        let fd = (phi(&(&p + &dir * h)) - phi(&(&p - &dir * h))) / (2.0 * h);
        let an = g.dot(&dir);
        assert!((fd - an).abs() <= 1e-3 * (1.0 + an.abs()), "seed {seed}: fd {fd} analytic {an}");
    }
}

#[test]
fn jr_solution_satisfies_kkt() {
    // Stationarity in W = J - R: 2 (W M - A) M = Σ L_i*(Y_i), plus
    // complementarity ⟨Y_i, L_i(J, R, P)⟩ = 0 and Y_i ⪰ 0.
    let opts = tight();
    for (name, region) in families() {
        for seed in 0..3u64 {
            let n = 1 + seed as usize;
            let mut rng = seeded(400 + seed);
            let b = normal_matrix(&mut rng, n, n);
            let p = &b * b.transpose() / n as f64 + Mat::identity(n, n);
            let a = normal_matrix(&mut rng, n, n) * 3.0;
            let set = ConstraintSet::new(&region, n).unwrap();
            let sol = solve_jr(&a, &p, &set, &opts, None).unwrap();
            let m = p.clone().try_inverse().unwrap();
            let w = &sol.j - &sol.r;
            let grad = (&w * &m - &a) * &m * 2.0;
            let t = DhTriple::new(sol.j.clone(), sol.r.clone(), p.clone());
            let mut adj = Mat::zeros(n, n);
            for (o, y) in set.ops.iter().zip(&sol.duals) {
                use omega_stab::lmi::SymmetricOperator;
                let g = o.adjoint(y);
                adj += &g.j - &g.r;
                assert!(omega_stab::numkernel::lambda_min(y) >= -1e-8 * (1.0 + y.norm()), "{name}");
                let slack = o.eval(&t);
                assert!(y.dot(&slack).abs() <= 1e-5 * (1.0 + grad.norm() * t.norm()), "{name}: complementarity");
            }
            let resid = (&grad - &adj).norm();
            assert!(resid <= 1e-5 * (1.0 + grad.norm()), "{name} seed {seed}: KKT residual {resid:e}");
        }
    }
}

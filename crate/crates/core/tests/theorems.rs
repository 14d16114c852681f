mod common;

use common::{closed_member, families, rel_diff};
use omega_stab::harness::random_stable_matrix;
use omega_stab::harness::rng::seeded;
use omega_stab::lmi::{feasibility_operators_in_x, min_margin, region_operators};
use omega_stab::numkernel::{dh_assemble, dh_from_x, eigenvalues};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasible_triples_assemble_to_region_matrices(seed in any::<u64>(), n in 1usize..=6, fam in 0usize..4) {
        let (name, region) = families().swap_remove(fam);
        let (a, t) = random_stable_matrix(n, &region, 1e-3, &mut seeded(seed)).unwrap();
        prop_assert!(min_margin(&region_operators(&region, n), &t) > 0.0);
        for z in eigenvalues(&a).unwrap() {
            prop_assert!(closed_member(&region, z, 1e-7), "{name}: eigenvalue {z} outside");
        }
    }

    #[test]
    fn lyapunov_certificate_rebuilds_the_matrix(seed in any::<u64>(), n in 1usize..=6, fam in 0usize..4) {
        let (_, region) = families().swap_remove(fam);
        let (a, t) = random_stable_matrix(n, &region, 1e-3, &mut seeded(seed)).unwrap();
        let x = t.p.clone();
        prop_assert!(min_margin(&feasibility_operators_in_x(&region, &a), &x) >= -1e-9 * a.norm() * x.norm());
        let back = dh_from_x(&a, &x).unwrap();
        prop_assert!(rel_diff(&dh_assemble(&back, 1e-300), &a) <= 1e-10);
        prop_assert!(back.check(1e-12).is_ok());
        prop_assert!(min_margin(&region_operators(&region, n), &back) >= -1e-9 * back.norm());
    }
}

#[test]
fn eigenvalue_outside_breaks_every_triple() {
    // A matrix with an eigenvalue outside Ω has no feasible DH triple: the
    // triple rebuilt from any X ≻ 0 violates some operator.
    use omega_stab::harness::random_unstable_matrix;
    use omega_stab::numkernel::symmetrize;
    for (name, region) in families() {
        let mut rng = seeded(7);
        for _ in 0..20 {
            let n = 3;
            let a = random_unstable_matrix(n, &region, 0.1, &mut rng).unwrap();
            let b = omega_stab::harness::rng::normal_matrix(&mut rng, n, n);
            let x = symmetrize(&(&b * b.transpose())) + omega_stab::Mat::identity(n, n) * 0.1;
            let t = dh_from_x(&a, &x).unwrap();
            assert!(min_margin(&region_operators(&region, n), &t) < 0.0, "{name}");
        }
    }
}

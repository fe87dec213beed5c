use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twolevel_testkit::random::Limits;
use twolevel_testkit::suites;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregated_blocks_are_kronecker_products(seed in any::<u64>()) {
        let worst = suites::kronecker_case(&mut rng(seed)).map_err(TestCaseError::fail)?;
        prop_assert!(worst <= 1e-12);
    }

    #[test]
    fn lifted_points_are_feasible_with_equal_cost(seed in any::<u64>()) {
        suites::lift_case(&mut rng(seed), Limits::WIDE).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn find_violated_matches_naive_scan(seed in any::<u64>()) {
        suites::violated_matches_naive(&mut rng(seed)).map_err(TestCaseError::fail)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn semi_coarse_bounds_full_and_is_tight_on_own_slices(seed in any::<u64>()) {
        let case = suites::bound_case(&mut rng(seed)).map_err(TestCaseError::fail)?;
        prop_assert!(case.z_full <= case.z_semi + 1e-9 * case.z_semi.abs().max(1.0));
    }
}

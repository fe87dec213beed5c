use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twolevel::algorithm::{run_cut_loop, solve_with_coarse, CutLoopConfig};
use twolevel::backend::{Backend, HighsBackend, SolveSettings};
use twolevel::coarsening::{build_semi_coarse, CoarseModel, CoarseningError, ProfileLibrary, SemiOptions};
use twolevel::milp::{lift_solution, TwoStageMilp};
use twolevel::coarsening::{CoarsePoint, SemiLayout};
use twolevel_testkit::exact;
use twolevel_testkit::random::{self, Limits, Shape};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Profiles that make δ = 1 coarsening exact: off/on, the two bounds as
/// operating profiles, and the largest demand as the only free profile.
fn identity_library(model: &TwoStageMilp) -> ProfileLibrary {
    let dmax = model.rhs[..model.lower.len()].iter().map(|f| -f).fold(0.0, f64::max);
    ProfileLibrary::new(
        1,
        vec![vec![0.0], vec![1.0]],
        vec![vec![], vec![vec![model.lower[0]], vec![model.upper[0]]]],
        vec![vec![dmax]],
    )
}

#[test]
fn delta_one_reproduces_the_fine_optimum() {
    let backend = HighsBackend::new();
    for seed in 0..10 {
        let mut r = rng(seed);
        let shape = Shape { m: r.random_range(0..=2), groups: r.random_range(2..=6), delta: 1, capacity_rows: 1 };
        let model = random::instance(&mut r, shape);
        let partition = model.partition(1).unwrap();
        let lib = identity_library(&model);
        let full = exact::enumerate(&model.to_milp(), 1 << 15).unwrap();

        let semi = Arc::new(build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).unwrap());
        let mut coarse = CoarseModel::build(semi.clone(), 1).unwrap();
        let all: Vec<usize> = (0..semi.num_coupling_rows()).collect();
        coarse.add_fine_rows(&all).unwrap();
        let config = CutLoopConfig { milp_rel_gap: 1e-9, ..CutLoopConfig::default() };
        let report = solve_with_coarse(&model, &partition, &lib, &mut coarse, &backend, &config).unwrap();
        assert!((report.objective - full.objective).abs() < 1e-7, "seed {seed}: {} vs {}", report.objective, full.objective);
        assert!(report.fine_feasible);
        assert_eq!(report.milp_solves, 1);
        assert_eq!(report.rows_added, 0);
    }
}

proptest! {
    #[test]
    fn delta_one_lift_copies_any_binary_vector(bits in proptest::collection::vec(any::<bool>(), 1..12)) {
        let n = bits.len();
        let lib = ProfileLibrary::new(1, vec![vec![0.0], vec![1.0]], vec![vec![], vec![]], vec![]);
        let layout = SemiLayout::new(0, n, &lib);
        let mut p = CoarsePoint { y: vec![], xbar: vec![0.0; layout.num_xbar()], vbar: vec![], wbar: vec![] };
        for (i, &b) in bits.iter().enumerate() {
            p.xbar[layout.xbar_index(i, usize::from(b))] = 1.0;
        }
        let partition = twolevel::milp::VariablePartition::new(n, 1).unwrap();
        let fine = lift_solution(&partition, &lib, &p, 1e-9).unwrap();
        let want: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        prop_assert_eq!(fine.x, want);
    }

    #[test]
    fn aggregated_rows_are_sums_of_fine_rows(seed in any::<u64>()) {
        let mut r = rng(seed);
        let shape = random::shape(&mut r, Limits::WIDE);
        let model = random::instance(&mut r, shape);
        let partition = model.partition(shape.delta).unwrap();
        let lib = random::profiles(&mut r, &model, &partition, 3);
        let semi = Arc::new(build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).unwrap());
        let coarse = CoarseModel::build(semi.clone(), shape.delta).unwrap();
        let z: Vec<f64> = (0..semi.num_cols()).map(|_| r.random_range(-1.0..1.0)).collect();
        let fine = semi.coupling.mul_vec(&z);
        let (agg, _) = coarse.aggregated();
        for (g, val) in agg.mul_vec(&z).iter().enumerate() {
            let sum: f64 = coarse.groups()[g].clone().map(|row| fine[row]).sum();
            prop_assert!((val - sum).abs() <= 1e-12 * sum.abs().max(1.0));
        }
    }
}

#[test]
fn relaxation_chain_holds_exactly() {
    for seed in 0..15 {
        let mut r = rng(seed);
        let shape = random::shape(&mut r, Limits::ENUMERABLE);
        let model = random::instance(&mut r, shape);
        let partition = model.partition(shape.delta).unwrap();
        let lib = random::profiles(&mut r, &model, &partition, 2);
        let semi = Arc::new(build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).unwrap());
        let z_semi = exact::enumerate(&semi.to_milp(), 1 << 20).unwrap().objective;
        let lp_semi = exact::lp_relaxation(&semi.to_milp()).unwrap().objective;

        let mut coarse = CoarseModel::build(semi.clone(), shape.delta).unwrap();
        let mut last = f64::NEG_INFINITY;
        let mut last_lp = f64::NEG_INFINITY;
        for row in 0..semi.num_coupling_rows() {
            let z = exact::enumerate(&coarse.to_milp(), 1 << 20).unwrap().objective;
            let lp = exact::lp_relaxation(&coarse.to_milp()).unwrap().objective;
            assert!(z <= z_semi + 1e-9, "seed {seed}: coarse {z} above semi {z_semi}");
            assert!(lp <= lp_semi + 1e-9, "seed {seed}: coarse LP {lp} above semi LP {lp_semi}");
            assert!(z >= last - 1e-9 && lp >= last_lp - 1e-9, "seed {seed}: not monotone");
            last = z;
            last_lp = lp;
            coarse.add_fine_rows(&[row]).unwrap();
        }
        let z_all = exact::enumerate(&coarse.to_milp(), 1 << 20).unwrap().objective;
        assert!((z_all - z_semi).abs() < 1e-9, "seed {seed}: all rows give {z_all}, semi {z_semi}");
    }
}

#[test]
fn warm_start_does_not_change_the_answer() {
    let backend = HighsBackend::new();
    let gap = 1e-6;
    for seed in 0..10 {
        let mut r = rng(seed + 500);
        let shape = random::shape(&mut r, Limits::WIDE);
        let model = random::instance(&mut r, shape);
        let partition = model.partition(shape.delta).unwrap();
        let lib = random::profiles(&mut r, &model, &partition, 3);
        let semi = Arc::new(build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).unwrap());
        let mut objectives = Vec::new();
        for warm in [true, false] {
            let mut coarse = CoarseModel::build(semi.clone(), shape.delta).unwrap();
            let config = CutLoopConfig { milp_rel_gap: gap, use_lp_warm_start: warm, ..CutLoopConfig::default() };
            let out = run_cut_loop(&mut coarse, &backend, &config).unwrap();
            for pair in out.history.windows(2) {
                assert!(pair[1].constraints >= pair[0].constraints);
            }
            objectives.push(out.objective);
        }
        let direct = backend.solve_milp(&semi.to_milp(), &SolveSettings::desk().with_gap(gap)).unwrap();
        for z in objectives {
            assert!((z - direct.objective).abs() <= 2.0 * gap * direct.objective.abs() + 1e-9);
        }
    }
}

#[test]
fn empty_free_block_is_omitted() {
    let mut r = rng(4);
    let shape = Shape { m: 1, groups: 2, delta: 2, capacity_rows: 2 };
    let mut model = random::instance(&mut r, shape);
    model.cost_w = vec![0.0; 4];
    model.mat_w = twolevel::sparse::CsrMatrix::zeros(model.num_rows(), 4);
    let partition = model.partition(2).unwrap();
    let mut lib = random::profiles(&mut r, &model, &partition, 2);
    lib.free.clear();
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).unwrap();
    let layout = semi.layout.as_ref().unwrap();
    assert_eq!(layout.num_wbar(), 0);
    assert_eq!(semi.num_cols(), 1 + layout.num_xbar() + layout.num_vbar());
}

#[test]
fn bad_extension_index_rejected() {
    let mut r = rng(8);
    let shape = Shape { m: 0, groups: 2, delta: 2, capacity_rows: 0 };
    let model = random::instance(&mut r, shape);
    let partition = model.partition(2).unwrap();
    let lib = random::profiles(&mut r, &model, &partition, 1);
    let semi = Arc::new(build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).unwrap());
    let mut coarse = CoarseModel::build(semi, 2).unwrap();
    assert!(coarse.add_fine_rows(&[]).unwrap().is_empty());
    assert!(matches!(coarse.add_fine_rows(&[4]), Err(CoarseningError::BadRowIndex { index: 4, rows: 4 })));
    assert!(matches!(CoarseModel::build(coarse.semi().clone(), 3), Err(CoarseningError::IndivisibleRows { .. })));
}

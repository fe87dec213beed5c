use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twolevel::backend::{by_name, HighsBackend, Backend, BackendError, SolveSettings, SolveStatus};
use twolevel::model::{mps, MilpModel, ModelBuilder, RowBlock};
use twolevel::sparse::CsrMatrix;
use twolevel_testkit::exact;

const INF: f64 = f64::INFINITY;

fn one_var(lo_row: f64, up_row: f64, integer: bool) -> MilpModel {
    let mut b = ModelBuilder::new("one", false);
    let x = b.add_col(String::new, 1.0, 0.0, INF, integer);
    b.add_row(String::new, vec![(x, 1.0)], lo_row, up_row);
    b.finish()
}

fn settings() -> SolveSettings {
    SolveSettings::desk().with_gap(1e-9)
}

/// Random LP over `0 ≤ x ≤ 10` with covering rows `Ax ≥ b` and packing
/// rows `Px ≤ q`, both with positive coefficients.
fn random_lp(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> MilpModel {
    let mut b = ModelBuilder::new("lp", false);
    for _ in 0..cols {
        b.add_col(String::new, rng.random_range(-2.0..5.0), 0.0, 10.0, false);
    }
    for r in 0..rows {
        let mut entries = Vec::new();
        for c in 0..cols {
            if rng.random_bool(0.5) {
                entries.push((c, rng.random_range(0.1..3.0)));
            }
        }
        if r % 2 == 0 {
            b.add_row(String::new, entries, rng.random_range(5.0..20.0), INF);
        } else {
            b.add_row(String::new, entries, -INF, rng.random_range(20.0..40.0));
        }
    }
    b.finish()
}

#[test]
fn single_variable_lp() {
    let out = HighsBackend::new().solve_lp(&one_var(1.0, INF, false), &settings()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    assert!((out.primal[0] - 1.0).abs() < 1e-9);
    assert!((out.objective - 1.0).abs() < 1e-9);
    assert!(out.basis.is_some());
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut m = one_var(1.0, INF, false);
    m.col_upper[0] = 0.0;
    let out = HighsBackend::new().solve_lp(&m, &settings()).unwrap();
    assert_eq!(out.status, SolveStatus::Infeasible);
    assert!(out.primal.is_empty() || !out.status.has_solution());
}

#[test]
fn unbounded_lp_detected() {
    let mut m = one_var(0.0, INF, false);
    m.cost[0] = -1.0;
    let out = HighsBackend::new().solve_lp(&m, &settings()).unwrap();
    assert_eq!(out.status, SolveStatus::Unbounded);
}

#[test]
fn rounding_forced_binary() {
    let mut m = one_var(0.5, INF, true);
    m.col_upper[0] = 1.0;
    let out = HighsBackend::new().solve_milp(&m, &settings()).unwrap();
    assert_eq!(out.status, SolveStatus::Optimal);
    assert!((out.primal[0] - 1.0).abs() < 1e-9);
}

#[test]
fn knapsacks_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let backend = HighsBackend::new();
    for _ in 0..20 {
        let n = rng.random_range(3..=12);
        let mut b = ModelBuilder::new("knapsack", false);
        let weights: Vec<(usize, f64)> = (0..n)
            .map(|_| {
                let c = b.add_col(String::new, -(rng.random_range(1..20) as f64), 0.0, 1.0, true);
                (c, rng.random_range(1..15) as f64)
            })
            .collect();
        let cap = weights.iter().map(|w| w.1).sum::<f64>() * 0.4;
        b.add_row(String::new, weights, -INF, cap.floor());
        let m = b.finish();
        let want = exact::enumerate(&m, 1 << 15).unwrap();
        let got = backend.solve_milp(&m, &settings()).unwrap();
        assert_eq!(got.status, SolveStatus::Optimal);
        assert!((got.objective - want.objective).abs() < 1e-9, "{} vs {}", got.objective, want.objective);
        assert!(got.best_bound <= got.objective + 1e-9);
    }
}

#[test]
fn warm_resolve_after_adding_a_row_needs_no_more_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let backend = HighsBackend::new();
    let model = random_lp(&mut rng, 60, 80);
    let extra: Vec<(usize, f64)> = (0..80).map(|c| (c, rng.random_range(0.5..2.0))).collect();

    let mut session = backend.open(&model, &settings(), true).unwrap();
    let before = session.solve().unwrap();
    assert_eq!(before.status, SolveStatus::Optimal);
    // The new row must cut off the current optimum.
    assert!(extra.iter().map(|&(c, v)| v * before.primal[c]).sum::<f64>() > 30.0 + 1e-6);
    let block = RowBlock {
        matrix: CsrMatrix::from_triplets(1, 80, &extra.iter().map(|&(c, v)| (0, c, v)).collect::<Vec<_>>()).unwrap(),
        lower: vec![-INF],
        upper: vec![30.0],
    };
    session.add_rows(&block).unwrap();
    let warm = session.solve().unwrap();

    let mut full = model.clone();
    let mut bld = ModelBuilder::new("full", false);
    for j in 0..full.num_cols() {
        bld.add_col(String::new, full.cost[j], full.col_lower[j], full.col_upper[j], false);
    }
    for r in 0..full.num_rows() {
        bld.add_row(String::new, full.rows.row(r).collect::<Vec<_>>(), full.row_lower[r], full.row_upper[r]);
    }
    bld.add_row(String::new, extra, -INF, 30.0);
    full = bld.finish();
    let cold = backend.solve_lp(&full, &settings()).unwrap();

    assert_eq!(warm.status, SolveStatus::Optimal);
    assert!((warm.objective - cold.objective).abs() < 1e-7 * cold.objective.abs());
    assert!(
        warm.stats.simplex_iterations <= cold.stats.simplex_iterations,
        "warm {} cold {}",
        warm.stats.simplex_iterations,
        cold.stats.simplex_iterations
    );
}

#[test]
fn supplied_basis_is_used() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let backend = HighsBackend::new();
    let model = random_lp(&mut rng, 25, 30);
    let first = backend.solve_lp(&model, &settings()).unwrap();
    let again = SolveSettings { basis: first.basis.clone(), ..settings() };
    let second = backend.solve_lp(&model, &again).unwrap();
    assert_eq!(second.status, SolveStatus::Optimal);
    assert_eq!(second.stats.simplex_iterations, 0);
    assert!((second.objective - first.objective).abs() < 1e-9);
}

#[test]
fn tiny_time_limit_never_claims_optimality_falsely() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 60;
    let mut b = ModelBuilder::new("hard", false);
    for _ in 0..n {
        b.add_col(String::new, -(rng.random_range(50..100) as f64), 0.0, 1.0, true);
    }
    for _ in 0..8 {
        let entries: Vec<(usize, f64)> = (0..n).map(|c| (c, rng.random_range(20..60) as f64)).collect();
        b.add_row(String::new, entries, -INF, 900.0);
    }
    let m = b.finish();
    let out = HighsBackend::new().solve_milp(&m, &SolveSettings::desk().with_time_limit(0.001).with_gap(0.0)).unwrap();
    match out.status {
        SolveStatus::TimeLimit => assert!(out.primal.is_empty()),
        SolveStatus::FeasibleGapped => assert!(m.max_violation(&out.primal) < 1e-6),
        SolveStatus::Optimal => assert!(out.relative_gap() <= 1e-9),
        other => panic!("unexpected status {other:?}"),
    }
}

#[test]
fn mps_round_trip_solves_to_same_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let backend = HighsBackend::new();
    let mut m = random_lp(&mut rng, 10, 12);
    for j in 0..4 {
        m.integer[j] = true;
    }
    m.objective_offset = 2.5;
    let text = mps::write(&m).unwrap();
    let back = mps::read(&text).unwrap();
    let direct = backend.solve_milp(&m, &settings()).unwrap();
    let reread = backend.solve_milp(&back, &settings()).unwrap();
    assert!((direct.objective - reread.objective).abs() < 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.mps");
    std::fs::write(&path, text).unwrap();
    let from_file = backend.solve_file(&path, &settings(), false).unwrap();
    assert!((direct.objective - from_file.objective).abs() < 1e-9);
}

#[test]
fn unknown_backend_rejected() {
    assert!(matches!(by_name("cplex"), Err(BackendError::BackendUnavailable(_))));
    assert!(by_name("HiGHS").unwrap().name().starts_with("highs"));
}

//! One randomized case per call for the structural properties. Each case
//! returns `Err` with a description on the first failed check so callers
//! can run them under proptest or in a plain loop.

use std::sync::Arc;

use rand::Rng;
use twolevel::algorithm::{find_violated, find_violated_point, solve_two_level, CutLoopConfig, Phase};
use twolevel::backend::{Backend, SolveSettings, SolveStatus};
use twolevel::coarsening::{build_semi_coarse, CoarseModel, CoarsePoint, ProfileLibrary, SemiOptions};
use twolevel::milp::{lift_solution, Tolerances, TwoStageMilp};
use twolevel::sparse::CsrMatrix;

use crate::dense::{self, Dense};
use crate::exact;
use crate::random::{self, Limits};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn sparse_dense<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Dense {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random_bool(0.5) { (rng.random_range(-3.0..3.0_f64) * 100.0).round() / 100.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

fn split_columns(mat: &CsrMatrix, widths: &[usize]) -> Vec<Dense> {
    let full = mat.to_dense();
    let mut out = Vec::new();
    let mut start = 0;
    for &w in widths {
        out.push(full.iter().map(|r| r[start..start + w].to_vec()).collect());
        start += w;
    }
    out
}

/// Checks the aggregated blocks of a coarse model built from random dense
/// data against explicit Kronecker products. Returns the largest deviation.
pub fn kronecker_case<R: Rng>(rng: &mut R) -> Result<f64, String> {
    let delta = rng.random_range(1..=6);
    let groups = rng.random_range(1..=4);
    let n = delta * groups;
    let m = rng.random_range(0..=3);
    let delta_r = rng.random_range(1..=4);
    let rows = delta_r * rng.random_range(1..=4);

    let onoff: Vec<Vec<f64>> = (0..rng.random_range(1..=3))
        .map(|_| (0..delta).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect())
        .collect();
    let operating: Vec<Vec<Vec<f64>>> = onoff
        .iter()
        .map(|x| {
            (0..rng.random_range(0..=2))
                .map(|_| x.iter().map(|&b| b * (rng.random_range(0.0..5.0_f64) * 100.0).round() / 100.0).collect())
                .collect()
        })
        .collect();
    let free: Vec<Vec<f64>> =
        (0..rng.random_range(0..=2)).map(|_| (0..delta).map(|_| (rng.random_range(0.0..2.0_f64) * 100.0).round() / 100.0).collect()).collect();
    let mut lib = ProfileLibrary::new(delta, onoff, operating, free);
    lib.deduplicate();

    let (a, b, c, d) = (sparse_dense(rng, rows, m), sparse_dense(rng, rows, n), sparse_dense(rng, rows, n), sparse_dense(rng, rows, n));
    let f: Vec<f64> = (0..rows).map(|_| (rng.random_range(-5.0..5.0_f64) * 100.0).round() / 100.0).collect();
    let csr = |x: &Dense, cols| CsrMatrix::from_dense(x, cols);
    let model = TwoStageMilp {
        cost_y: vec![0.0; m],
        cost_x: vec![0.0; n],
        cost_v: vec![0.0; n],
        cost_w: vec![0.0; n],
        mat_y: csr(&a, m),
        mat_x: csr(&b, n),
        mat_v: csr(&c, n),
        mat_w: csr(&d, n),
        rhs: f.clone(),
        lower: vec![0.0; n],
        upper: vec![5.0; n],
    };
    let partition = model.partition(delta).map_err(|e| e.to_string())?;
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).map_err(|e| e.to_string())?;
    let coarse = CoarseModel::build(Arc::new(semi), delta_r).map_err(|e| e.to_string())?;
    let (agg, agg_rhs) = coarse.aggregated();

    let ops: Vec<Vec<f64>> = lib.operating.iter().flatten().cloned().collect();
    let xk = dense::kron(&dense::identity(groups), &dense::from_columns(&lib.onoff, delta));
    let vk = dense::kron(&dense::identity(groups), &dense::from_columns(&ops, delta));
    let wk = dense::kron(&dense::identity(groups), &dense::from_columns(&lib.free, delta));
    let sum = dense::kron(&dense::identity(rows / delta_r), &dense::ones_row(delta_r));

    let widths = [m, groups * lib.onoff.len(), groups * ops.len(), groups * lib.free.len()];
    let blocks = split_columns(agg, &widths);
    let expect = [
        dense::matmul(&sum, &a),
        dense::matmul(&sum, &dense::matmul(&b, &xk)),
        dense::matmul(&sum, &dense::matmul(&c, &vk)),
        dense::matmul(&sum, &dense::matmul(&d, &wk)),
    ];
    let mut worst = 0.0_f64;
    for (name, (got, want)) in ["A", "B", "C", "D"].iter().zip(blocks.iter().zip(&expect)) {
        let diff = if want.first().is_none_or(Vec::is_empty) { 0.0 } else { dense::max_abs_diff(got, want) };
        worst = worst.max(diff);
        if diff > 1e-12 {
            return Err(format!("aggregated {name} block differs by {diff:e}"));
        }
    }
    let f_hat = dense::matvec(&sum, &f);
    for (g, (got, want)) in agg_rhs.iter().zip(&f_hat).enumerate() {
        let diff = (got - want).abs();
        worst = worst.max(diff);
        if diff > 1e-12 {
            return Err(format!("aggregated rhs {g} differs by {diff:e}"));
        }
    }
    // The semi-coarse coupling block itself is the unaggregated product.
    let semi_blocks = split_columns(&coarse.semi().coupling, &widths);
    let direct = [a.clone(), dense::matmul(&b, &xk), dense::matmul(&c, &vk), dense::matmul(&d, &wk)];
    for (got, want) in semi_blocks.iter().zip(&direct) {
        if !want.first().is_none_or(Vec::is_empty) {
            let diff = dense::max_abs_diff(got, want);
            worst = worst.max(diff);
            if diff > 1e-12 {
                return Err(format!("semi-coarse block differs by {diff:e}"));
            }
        }
    }
    Ok(worst)
}

/// Builds a semi-coarse-feasible point on a random instance, lifts it and
/// checks fine feasibility and objective equality.
pub fn lift_case<R: Rng>(rng: &mut R, lim: Limits) -> Result<(), String> {
    let shape = random::shape(rng, lim);
    let mut model = random::instance(rng, shape);
    let partition = model.partition(shape.delta).map_err(|e| e.to_string())?;
    let lib = random::profiles(rng, &model, &partition, lim.max_onoff);
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).map_err(|e| e.to_string())?;
    let layout = semi.layout.clone().expect("generic layout");
    let mut dedup = lib.clone();
    dedup.deduplicate();
    let point = random::selection_point(rng, &layout, &dedup);
    let values = point.flatten();

    // Loosen the right-hand side just enough for the point to be feasible.
    let act = semi.coupling.mul_vec(&values);
    model.rhs = act.iter().map(|a| a + if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).map_err(|e| e.to_string())?;
    if !semi.violated_rows(&values, 1e-9).map_err(|e| e.to_string())?.is_empty() {
        return Err("constructed point is not semi-coarse feasible".into());
    }
    if semi.base.max_violation(&values) > 1e-9 {
        return Err("constructed point breaks the selection rows".into());
    }

    let fine = lift_solution(&partition, &dedup, &point, 1e-9).map_err(|e| e.to_string())?;
    let verdict = model.check_feasible(&fine, &Tolerances { residual: 1e-6, integrality: 1e-6 }).map_err(|e| e.to_string())?;
    if !verdict.feasible {
        return Err(format!("lifted point infeasible: {:?}", verdict.violations));
    }
    let (zf, zs) = (model.objective(&fine), semi.objective(&values));
    if rel(zf, zs) > 1e-9 {
        return Err(format!("lifted objective {zf} differs from semi-coarse objective {zs}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct BoundCase {
    pub z_full: f64,
    pub z_semi: f64,
    pub z_semi_extracted: f64,
}

/// Exact solves of the full model, a random semi-coarse model and the
/// semi-coarse model built from the full optimum's own slices.
pub fn bound_case<R: Rng>(rng: &mut R) -> Result<BoundCase, String> {
    const POINTS: u128 = 1 << 20;
    let lim = Limits::ENUMERABLE;
    let shape = random::shape(rng, lim);
    let model = random::instance(rng, shape);
    let partition = model.partition(shape.delta).map_err(|e| e.to_string())?;
    let full = match exact::enumerate(&model.to_milp(), 1 << 15) {
        exact::Outcome::Optimal(e) => e,
        other => return Err(format!("full model: {other:?}")),
    };
    let lib = random::profiles(rng, &model, &partition, lim.max_onoff);
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).map_err(|e| e.to_string())?;
    let z_semi = match exact::enumerate(&semi.to_milp(), POINTS) {
        exact::Outcome::Optimal(e) => e.objective,
        other => return Err(format!("semi-coarse model: {other:?}")),
    };
    if full.objective > z_semi + 1e-9 * z_semi.abs().max(1.0) {
        return Err(format!("full optimum {} above semi-coarse optimum {z_semi}", full.objective));
    }
    let extracted = random::profiles_from_point(&model.split_solution(&full.values), &partition);
    let semi2 = build_semi_coarse(&model, &partition, &extracted, SemiOptions::default()).map_err(|e| e.to_string())?;
    let z2 = match exact::enumerate(&semi2.to_milp(), POINTS) {
        exact::Outcome::Optimal(e) => e.objective,
        other => return Err(format!("extracted semi-coarse model: {other:?}")),
    };
    if rel(z2, full.objective) > 1e-6 {
        return Err(format!("extracted profiles give {z2}, full optimum is {}", full.objective));
    }
    Ok(BoundCase { z_full: full.objective, z_semi, z_semi_extracted: z2 })
}

#[derive(Debug, Clone, Copy)]
pub struct CutLoopCase {
    pub objective: f64,
    pub semi_objective: f64,
    /// Solves in either phase that added rows.
    pub cut_rounds: usize,
    /// MILP-phase solves that added rows.
    pub milp_cut_rounds: usize,
    pub groups: usize,
    pub fine_rows: usize,
}

/// Runs the cut loop and a direct semi-coarse solve on one random instance.
/// `Err` covers objective mismatch, leftover violated rows and an
/// infeasible lift. The round count is returned for the caller to judge.
pub fn cut_loop_case<R: Rng>(rng: &mut R, backend: &dyn Backend, rel_gap: f64) -> Result<CutLoopCase, String> {
    let lim = Limits { max_groups: 4, max_delta: 6, max_n: 24, max_onoff: 3 };
    let shape = random::shape(rng, lim);
    let model = random::instance(rng, shape);
    let partition = model.partition(shape.delta).map_err(|e| e.to_string())?;
    let lib = random::profiles(rng, &model, &partition, lim.max_onoff);
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).map_err(|e| e.to_string())?;

    let settings = SolveSettings::desk().with_gap(rel_gap);
    let direct = backend.solve_milp(&semi.to_milp(), &settings).map_err(|e| e.to_string())?;
    if direct.status != SolveStatus::Optimal {
        return Err(format!("direct semi-coarse solve ended {:?}", direct.status));
    }
    let config = CutLoopConfig { milp_rel_gap: rel_gap, ..CutLoopConfig::default() };
    let report = solve_two_level(&model, &partition, &lib, backend, &config).map_err(|e| e.to_string())?;
    let bound = 2.0 * rel_gap * direct.objective.abs().max(1e-9) + 1e-9;
    if (report.objective - direct.objective).abs() > bound {
        return Err(format!("cut loop objective {} vs direct {}", report.objective, direct.objective));
    }
    let left = find_violated_point(&semi, &report.coarse_point, 1e-6).map_err(|e| e.to_string())?;
    if !left.is_empty() {
        return Err(format!("rows {left:?} still violated at the final point"));
    }
    if !report.fine_feasible {
        return Err("lifted final point is not fine feasible".into());
    }
    let cut_rounds = report.history.iter().filter(|h| h.rows_added > 0).count();
    let milp_cut_rounds = report.history.iter().filter(|h| h.rows_added > 0 && h.phase == Phase::Milp).count();
    Ok(CutLoopCase {
        objective: report.objective,
        semi_objective: direct.objective,
        cut_rounds,
        milp_cut_rounds,
        groups: semi.num_coupling_rows() / shape.delta,
        fine_rows: semi.num_coupling_rows(),
    })
}

/// Naive recomputation of the violated-row list for comparison.
pub fn naive_violated(semi_dense: &Dense, rhs: &[f64], values: &[f64], tol: f64) -> Vec<usize> {
    let act = dense::matvec(semi_dense, values);
    let mut rows: Vec<(usize, f64)> =
        act.iter().zip(rhs).enumerate().filter(|(_, (a, f))| *a - *f > tol).map(|(r, (a, f))| (r, a - f)).collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    rows.into_iter().map(|(r, _)| r).collect()
}

/// Random coarse point for `find_violated` comparisons; it need not satisfy
/// anything.
pub fn arbitrary_point<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| (rng.random_range(0.0..1.0_f64) * 8.0).round() / 8.0).collect()
}

pub fn violated_matches_naive<R: Rng>(rng: &mut R) -> Result<(), String> {
    let lim = Limits::WIDE;
    let shape = random::shape(rng, lim);
    let model = random::instance(rng, shape);
    let partition = model.partition(shape.delta).map_err(|e| e.to_string())?;
    let lib = random::profiles(rng, &model, &partition, lim.max_onoff);
    let semi = build_semi_coarse(&model, &partition, &lib, SemiOptions::default()).map_err(|e| e.to_string())?;
    let values = arbitrary_point(rng, semi.num_cols());
    let got = find_violated(&semi, &values, 1e-6).map_err(|e| e.to_string())?;
    let want = naive_violated(&semi.coupling.to_dense(), &semi.coupling_rhs, &values, 1e-6);
    if got != want {
        return Err(format!("find_violated {got:?}, naive scan {want:?}"));
    }
    let layout = semi.layout.as_ref().expect("layout");
    let again = find_violated_point(&semi, &CoarsePoint::from_values(layout, &values), 1e-6).map_err(|e| e.to_string())?;
    if again != got {
        return Err("point and flat-vector forms disagree".into());
    }
    Ok(())
}

//! Exact MILP solution by enumerating every integer assignment and solving
//! the remaining LP with `minilp`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use twolevel::model::MilpModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Exact {
    pub objective: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal(Exact),
    Infeasible,
    TooLarge(u128),
}

impl Outcome {
    pub fn unwrap(self) -> Exact {
        match self {
            Outcome::Optimal(e) => e,
            other => panic!("expected an optimum, got {other:?}"),
        }
    }
}

/// Solves `model` exactly when the integer columns span at most
/// `max_points` assignments. Integer columns need finite bounds.
pub fn enumerate(model: &MilpModel, max_points: u128) -> Outcome {
    let ints: Vec<usize> = (0..model.num_cols()).filter(|&j| model.integer[j]).collect();
    let ranges: Vec<(i64, i64)> = ints
        .iter()
        .map(|&j| {
            let (lo, up) = (model.col_lower[j].ceil(), model.col_upper[j].floor());
            assert!(lo.is_finite() && up.is_finite(), "integer column {j} must be bounded");
            (lo as i64, up as i64)
        })
        .collect();
    let total: u128 = ranges.iter().map(|&(lo, up)| (up - lo + 1).max(0) as u128).product();
    if total > max_points {
        return Outcome::TooLarge(total);
    }
    if ranges.iter().any(|&(lo, up)| up < lo) {
        return Outcome::Infeasible;
    }

    let cont: Vec<usize> = (0..model.num_cols()).filter(|&j| !model.integer[j]).collect();
    let mut pos_in_cont = vec![usize::MAX; model.num_cols()];
    for (p, &j) in cont.iter().enumerate() {
        pos_in_cont[j] = p;
    }

    // Rows over integer columns only are checked before any LP is built.
    let int_rows: Vec<usize> = (0..model.num_rows())
        .filter(|&r| model.rows.row(r).all(|(c, _)| model.integer[c]))
        .collect();
    let mut best: Option<Exact> = None;
    let mut assign: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut fixed = vec![0.0; model.num_cols()];
    loop {
        for (a, &j) in assign.iter().zip(&ints) {
            fixed[j] = *a as f64;
        }
        let admissible = int_rows.iter().all(|&r| {
            let act = model.rows.row_dot(r, &fixed);
            act <= model.row_upper[r] + 1e-9 && act >= model.row_lower[r] - 1e-9
        });
        if admissible {
            if let Some(sol) = solve_rest(model, &fixed, &cont, &pos_in_cont) {
                if best.as_ref().is_none_or(|b| sol.objective < b.objective - 1e-12) {
                    best = Some(sol);
                }
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == assign.len() {
                return best.map_or(Outcome::Infeasible, Outcome::Optimal);
            }
            if assign[i] < ranges[i].1 {
                assign[i] += 1;
                break;
            }
            assign[i] = ranges[i].0;
            i += 1;
        }
    }
}

fn solve_rest(model: &MilpModel, fixed: &[f64], cont: &[usize], pos: &[usize]) -> Option<Exact> {
    const FEAS: f64 = 1e-9;
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = cont.iter().map(|&j| p.add_var(model.cost[j], (model.col_lower[j], model.col_upper[j]))).collect();
    for r in 0..model.num_rows() {
        let mut shift = 0.0;
        let mut expr = Vec::new();
        for (c, v) in model.rows.row(r) {
            if pos[c] == usize::MAX {
                shift += v * fixed[c];
            } else {
                expr.push((vars[pos[c]], v));
            }
        }
        let (lo, up) = (model.row_lower[r] - shift, model.row_upper[r] - shift);
        if expr.is_empty() {
            if lo > FEAS || up < -FEAS {
                return None;
            }
            continue;
        }
        if lo == up {
            p.add_constraint(expr.as_slice(), ComparisonOp::Eq, lo);
            continue;
        }
        if up.is_finite() {
            p.add_constraint(expr.as_slice(), ComparisonOp::Le, up);
        }
        if lo.is_finite() {
            p.add_constraint(expr.as_slice(), ComparisonOp::Ge, lo);
        }
    }
    let int_part: f64 = model.objective_offset
        + (0..model.num_cols()).filter(|&j| pos[j] == usize::MAX).map(|j| model.cost[j] * fixed[j]).sum::<f64>();
    if cont.is_empty() {
        return Some(Exact { objective: int_part, values: fixed.to_vec() });
    }
    match p.solve() {
        Ok(sol) => {
            let mut values = fixed.to_vec();
            for (k, &j) in cont.iter().enumerate() {
                values[j] = *sol.var_value(vars[k]);
            }
            Some(Exact { objective: int_part + sol.objective(), values })
        }
        Err(minilp::Error::Infeasible) => None,
        Err(minilp::Error::Unbounded) => panic!("oracle LP is unbounded"),
    }
}

/// LP relaxation solved by `minilp`.
pub fn lp_relaxation(model: &MilpModel) -> Option<Exact> {
    let relaxed = model.relaxed();
    let cont: Vec<usize> = (0..model.num_cols()).collect();
    let pos: Vec<usize> = (0..model.num_cols()).collect();
    solve_rest(&relaxed, &vec![0.0; model.num_cols()], &cont, &pos)
}

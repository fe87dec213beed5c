//! Block-structured two-stage MILP
//!
//! ```text
//! min  aᵀy + bᵀx + cᵀv + dᵀw
//! s.t. A y + B x + C v + D w ≤ f
//!      y ∈ {0,1}^m,  x ∈ {0,1}^N,  L∘x ≤ v ≤ U∘x,  w ≥ 0
//! ```
//!
//! with helpers to partition the second stage into equal groups, check a
//! fine-scale point, and lift a coarse point back to fine scale.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coarsening::{CoarsePoint, ProfileLibrary, SemiLayout};
use crate::model::{MilpModel, ModelBuilder};
use crate::sparse::{CsrMatrix, SparseError};

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite coefficient in {0}")]
    NonFiniteCoefficient(String),
    #[error("lower bound exceeds upper bound at second-stage index {index}: {lower} > {upper}")]
    BoundOrderViolation { index: usize, lower: f64, upper: f64 },
    #[error("group size {delta} does not divide horizon {n}")]
    IndivisibleHorizon { n: usize, delta: usize },
    #[error("selection constraint violated in group {group}: {detail}")]
    SelectionConstraintViolated { group: usize, detail: String },
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error("instance file: {0}")]
    Format(String),
}

/// Default tolerances: 1e-6 on rows and bounds, 1e-5 on integrality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub residual: f64,
    pub integrality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-6, integrality: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageMilp {
    /// `a`, length m.
    pub cost_y: Vec<f64>,
    /// `b`, length N.
    pub cost_x: Vec<f64>,
    /// `c`, length N.
    pub cost_v: Vec<f64>,
    /// `d`, length N.
    pub cost_w: Vec<f64>,
    /// `A`, M×m.
    pub mat_y: CsrMatrix,
    /// `B`, M×N.
    pub mat_x: CsrMatrix,
    /// `C`, M×N.
    pub mat_v: CsrMatrix,
    /// `D`, M×N.
    pub mat_w: CsrMatrix,
    /// `f`, length M. Every coupling row reads `… ≤ f`.
    pub rhs: Vec<f64>,
    /// `L`, length N.
    pub lower: Vec<f64>,
    /// `U`, length N.
    pub upper: Vec<f64>,
}

impl TwoStageMilp {
    pub fn num_first_stage(&self) -> usize {
        self.cost_y.len()
    }

    pub fn num_second_stage(&self) -> usize {
        self.cost_x.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let (m, n, rows) = (self.num_first_stage(), self.num_second_stage(), self.num_rows());
        let mismatch = |what: &str, got: usize, want: usize| {
            MilpError::DimensionMismatch(format!("{what} has length {got}, expected {want}"))
        };
        for (what, v) in [("c", &self.cost_v), ("d", &self.cost_w), ("L", &self.lower), ("U", &self.upper)] {
            if v.len() != n {
                return Err(mismatch(what, v.len(), n));
            }
        }
        for (what, mat, cols) in [
            ("A", &self.mat_y, m),
            ("B", &self.mat_x, n),
            ("C", &self.mat_v, n),
            ("D", &self.mat_w, n),
        ] {
            if mat.nrows() != rows || mat.ncols() != cols {
                return Err(MilpError::DimensionMismatch(format!(
                    "{what} is {}x{}, expected {rows}x{cols}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
            if !mat.is_finite() {
                return Err(MilpError::NonFiniteCoefficient(what.to_string()));
            }
        }
        for (what, v) in [
            ("a", &self.cost_y),
            ("b", &self.cost_x),
            ("c", &self.cost_v),
            ("d", &self.cost_w),
            ("f", &self.rhs),
            ("L", &self.lower),
            ("U", &self.upper),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MilpError::NonFiniteCoefficient(what.to_string()));
            }
        }
        for (index, (&lower, &upper)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lower > upper {
                return Err(MilpError::BoundOrderViolation { index, lower, upper });
            }
        }
        Ok(())
    }

    pub fn partition(&self, delta: usize) -> Result<VariablePartition, MilpError> {
        VariablePartition::new(self.num_second_stage(), delta)
    }

    pub fn objective(&self, p: &FinePoint) -> f64 {
        dot(&self.cost_y, &p.y) + dot(&self.cost_x, &p.x) + dot(&self.cost_v, &p.v) + dot(&self.cost_w, &p.w)
    }

    /// Coupling-row activity `Ay + Bx + Cv + Dw`.
    pub fn activity(&self, p: &FinePoint) -> Vec<f64> {
        let mut act = self.mat_y.mul_vec(&p.y);
        for (mat, v) in [(&self.mat_x, &p.x), (&self.mat_v, &p.v), (&self.mat_w, &p.w)] {
            for (a, b) in act.iter_mut().zip(mat.mul_vec(v)) {
                *a += b;
            }
        }
        act
    }

    pub fn check_feasible(&self, p: &FinePoint, tol: &Tolerances) -> Result<FeasibilityVerdict, MilpError> {
        let (m, n) = (self.num_first_stage(), self.num_second_stage());
        if p.y.len() != m || p.x.len() != n || p.v.len() != n || p.w.len() != n {
            return Err(MilpError::DimensionMismatch(format!(
                "point has (y,x,v,w) lengths ({},{},{},{}), model expects ({m},{n},{n},{n})",
                p.y.len(),
                p.x.len(),
                p.v.len(),
                p.w.len()
            )));
        }
        let mut violations = Vec::new();
        for (row, (act, f)) in self.activity(p).iter().zip(&self.rhs).enumerate() {
            if act - f > tol.residual {
                violations.push(Violation { kind: ViolationKind::CouplingRow { row }, magnitude: act - f });
            }
        }
        for (index, &y) in p.y.iter().enumerate() {
            let off = integrality_gap(y);
            if off > tol.integrality {
                violations.push(Violation { kind: ViolationKind::IntegralityY { index }, magnitude: off });
            }
        }
        for index in 0..n {
            let x = p.x[index];
            let off = integrality_gap(x);
            if off > tol.integrality {
                violations.push(Violation { kind: ViolationKind::IntegralityX { index }, magnitude: off });
            }
            let lo = self.lower[index] * x - p.v[index];
            if lo > tol.residual {
                violations.push(Violation { kind: ViolationKind::SwitchedLower { index }, magnitude: lo });
            }
            let up = p.v[index] - self.upper[index] * x;
            if up > tol.residual {
                violations.push(Violation { kind: ViolationKind::SwitchedUpper { index }, magnitude: up });
            }
            if -p.w[index] > tol.residual {
                violations.push(Violation { kind: ViolationKind::NegativeW { index }, magnitude: -p.w[index] });
            }
        }
        Ok(FeasibilityVerdict { feasible: violations.is_empty(), violations })
    }

    /// Lowers to a general MILP. Column order is `y, x, v, w`; rows are the
    /// M coupling rows followed by `v − U x ≤ 0` and `L x − v ≤ 0`.
    pub fn to_milp(&self) -> MilpModel {
        let (m, n) = (self.num_first_stage(), self.num_second_stage());
        let mut b = ModelBuilder::new("two-stage", false);
        for j in 0..m {
            b.add_col(String::new, self.cost_y[j], 0.0, 1.0, true);
        }
        for j in 0..n {
            b.add_col(String::new, self.cost_x[j], 0.0, 1.0, true);
        }
        for j in 0..n {
            let (lo, up) = (self.lower[j].min(0.0), self.upper[j].max(0.0));
            b.add_col(String::new, self.cost_v[j], lo, up, false);
        }
        for j in 0..n {
            b.add_col(String::new, self.cost_w[j], 0.0, f64::INFINITY, false);
        }
        for r in 0..self.num_rows() {
            let mut entries: Vec<(usize, f64)> = self.mat_y.row(r).collect();
            entries.extend(self.mat_x.row(r).map(|(c, v)| (m + c, v)));
            entries.extend(self.mat_v.row(r).map(|(c, v)| (m + n + c, v)));
            entries.extend(self.mat_w.row(r).map(|(c, v)| (m + 2 * n + c, v)));
            b.add_row(String::new, entries, f64::NEG_INFINITY, self.rhs[r]);
        }
        for j in 0..n {
            b.add_row(String::new, vec![(m + n + j, 1.0), (m + j, -self.upper[j])], f64::NEG_INFINITY, 0.0);
            b.add_row(String::new, vec![(m + j, self.lower[j]), (m + n + j, -1.0)], f64::NEG_INFINITY, 0.0);
        }
        b.finish()
    }

    /// Splits a solution of [`Self::to_milp`] back into blocks.
    pub fn split_solution(&self, values: &[f64]) -> FinePoint {
        let (m, n) = (self.num_first_stage(), self.num_second_stage());
        FinePoint {
            y: values[..m].to_vec(),
            x: values[m..m + n].to_vec(),
            v: values[m + n..m + 2 * n].to_vec(),
            w: values[m + 2 * n..m + 3 * n].to_vec(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            format: INSTANCE_FORMAT.to_string(),
            version: 1,
            m: self.num_first_stage(),
            n_second: self.num_second_stage(),
            n_rows: self.num_rows(),
            cost: Costs {
                y: self.cost_y.clone(),
                x: self.cost_x.clone(),
                v: self.cost_v.clone(),
                w: self.cost_w.clone(),
            },
            blocks: Blocks {
                y: self.mat_y.triplets().collect(),
                x: self.mat_x.triplets().collect(),
                v: self.mat_v.triplets().collect(),
                w: self.mat_w.triplets().collect(),
            },
            rhs: self.rhs.clone(),
            sense: None,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instance serialises")
    }

    /// Reads the JSON instance format. Rows marked `">="` are negated into
    /// `≤` form.
    pub fn from_json(text: &str) -> Result<Self, MilpError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| MilpError::Format(e.to_string()))?;
        if file.format != INSTANCE_FORMAT {
            return Err(MilpError::Format(format!("unexpected format tag {:?}", file.format)));
        }
        let (m, n, rows) = (file.m, file.n_second, file.n_rows);
        let flip: Vec<f64> = match &file.sense {
            None => vec![1.0; rows],
            Some(s) if s.len() == rows => s
                .iter()
                .map(|t| match t.as_str() {
                    "<=" => Ok(1.0),
                    ">=" => Ok(-1.0),
                    other => Err(MilpError::Format(format!("unknown row sense {other:?}"))),
                })
                .collect::<Result<_, _>>()?,
            Some(s) => return Err(MilpError::DimensionMismatch(format!("sense has {} entries, expected {rows}", s.len()))),
        };
        if file.rhs.len() != rows {
            return Err(MilpError::DimensionMismatch(format!("f has length {}, expected {rows}", file.rhs.len())));
        }
        let signed = |t: &[(usize, usize, f64)]| -> Vec<(usize, usize, f64)> {
            t.iter().map(|&(r, c, v)| (r, c, if r < rows { v * flip[r] } else { v })).collect()
        };
        let model = TwoStageMilp {
            cost_y: file.cost.y,
            cost_x: file.cost.x,
            cost_v: file.cost.v,
            cost_w: file.cost.w,
            mat_y: CsrMatrix::from_triplets(rows, m, &signed(&file.blocks.y))?,
            mat_x: CsrMatrix::from_triplets(rows, n, &signed(&file.blocks.x))?,
            mat_v: CsrMatrix::from_triplets(rows, n, &signed(&file.blocks.v))?,
            mat_w: CsrMatrix::from_triplets(rows, n, &signed(&file.blocks.w))?,
            rhs: file.rhs.iter().zip(&flip).map(|(f, s)| f * s).collect(),
            lower: file.lower,
            upper: file.upper,
        };
        model.validate()?;
        Ok(model)
    }
}

const INSTANCE_FORMAT: &str = "twolevel-instance";

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    m: usize,
    n_second: usize,
    n_rows: usize,
    cost: Costs,
    blocks: Blocks,
    rhs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sense: Option<Vec<String>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Costs {
    y: Vec<f64>,
    x: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Blocks {
    y: Vec<(usize, usize, f64)>,
    x: Vec<(usize, usize, f64)>,
    v: Vec<(usize, usize, f64)>,
    w: Vec<(usize, usize, f64)>,
}

/// Equal-sized grouping of the N second-stage indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariablePartition {
    pub delta: usize,
    pub groups: usize,
}

impl VariablePartition {
    pub fn new(n: usize, delta: usize) -> Result<Self, MilpError> {
        if delta == 0 || n % delta != 0 {
            return Err(MilpError::IndivisibleHorizon { n, delta });
        }
        Ok(Self { delta, groups: n / delta })
    }

    /// Zero-based index range of group `i` (also zero-based).
    pub fn group(&self, i: usize) -> Range<usize> {
        self.delta * i..self.delta * (i + 1)
    }

    pub fn len(&self) -> usize {
        self.delta * self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinePoint {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    CouplingRow { row: usize },
    SwitchedLower { index: usize },
    SwitchedUpper { index: usize },
    NegativeW { index: usize },
    IntegralityY { index: usize },
    IntegralityX { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    #[serde(flatten)]
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Maps a coarse point to fine scale:
/// `x_i = Σ_k x̄_ik X̄_k`, `v_i = Σ_{k,j} v̄_ijk V̄_jk`, `w_i = Σ_j w̄_ij W̄_j`.
pub fn lift_solution(
    partition: &VariablePartition,
    profiles: &ProfileLibrary,
    point: &CoarsePoint,
    tol: f64,
) -> Result<FinePoint, MilpError> {
    let layout = SemiLayout::new(point.y.len(), partition.groups, profiles);
    if point.xbar.len() != layout.num_xbar() || point.vbar.len() != layout.num_vbar() || point.wbar.len() != layout.num_wbar() {
        return Err(MilpError::DimensionMismatch(format!(
            "coarse point has ({}, {}, {}) profile weights, layout expects ({}, {}, {})",
            point.xbar.len(),
            point.vbar.len(),
            point.wbar.len(),
            layout.num_xbar(),
            layout.num_vbar(),
            layout.num_wbar()
        )));
    }
    if profiles.delta != partition.delta {
        return Err(MilpError::DimensionMismatch(format!(
            "profile length {} differs from group size {}",
            profiles.delta, partition.delta
        )));
    }
    layout
        .check_selection(point, tol)
        .map_err(|(group, detail)| MilpError::SelectionConstraintViolated { group, detail })?;

    let n = partition.len();
    let delta = partition.delta;
    let mut fine = FinePoint { y: point.y.clone(), x: vec![0.0; n], v: vec![0.0; n], w: vec![0.0; n] };
    for i in 0..partition.groups {
        let base = i * delta;
        for (k, xk) in profiles.onoff.iter().enumerate() {
            let weight = point.xbar[layout.xbar_index(i, k)];
            if weight != 0.0 {
                for h in 0..delta {
                    fine.x[base + h] += weight * xk[h];
                }
            }
            for (j, vjk) in profiles.operating[k].iter().enumerate() {
                let weight = point.vbar[layout.vbar_index(i, k, j)];
                if weight != 0.0 {
                    for h in 0..delta {
                        fine.v[base + h] += weight * vjk[h];
                    }
                }
            }
        }
        for (j, wj) in profiles.free.iter().enumerate() {
            let weight = point.wbar[layout.wbar_index(i, j)];
            if weight != 0.0 {
                for h in 0..delta {
                    fine.w[base + h] += weight * wj[h];
                }
            }
        }
    }
    Ok(fine)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn integrality_gap(v: f64) -> f64 {
    // Binary variables: distance to {0, 1}, plus any excursion outside [0, 1].
    if v < 0.0 {
        -v
    } else if v > 1.0 {
        v - 1.0
    } else {
        v.min(1.0 - v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> TwoStageMilp {
        // m=1, N=2, M=1
        TwoStageMilp {
            cost_y: vec![1.0],
            cost_x: vec![1.0, 1.0],
            cost_v: vec![-1.0, -1.0],
            cost_w: vec![0.0, 0.0],
            mat_y: CsrMatrix::from_dense(&[vec![-1.0]], 1),
            mat_x: CsrMatrix::from_dense(&[vec![1.0, 1.0]], 2),
            mat_v: CsrMatrix::zeros(1, 2),
            mat_w: CsrMatrix::zeros(1, 2),
            rhs: vec![1.0],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
        }
    }

    #[test]
    fn validate_accepts_consistent_dims() {
        tiny().validate().unwrap();
    }

    #[test]
    fn validate_rejects_bound_order() {
        let mut m = tiny();
        m.lower = vec![1.0, 0.0];
        m.upper = vec![0.0, 1.0];
        assert!(matches!(m.validate(), Err(MilpError::BoundOrderViolation { index: 0, .. })));
    }

    #[test]
    fn validate_rejects_rhs_length() {
        let mut m = tiny();
        m.rhs = vec![1.0, 2.0];
        assert!(matches!(m.validate(), Err(MilpError::DimensionMismatch(_))));
    }

    #[test]
    fn validate_rejects_nan() {
        let mut m = tiny();
        m.cost_w[1] = f64::NAN;
        assert!(matches!(m.validate(), Err(MilpError::NonFiniteCoefficient(_))));
    }

    #[test]
    fn partition_counts() {
        assert_eq!(VariablePartition::new(48, 24).unwrap().groups, 2);
        let p = VariablePartition::new(6, 1).unwrap();
        assert_eq!(p.groups, 6);
        assert!((0..6).all(|i| p.group(i).len() == 1));
        assert_eq!(VariablePartition::new(7, 2), Err(MilpError::IndivisibleHorizon { n: 7, delta: 2 }));
    }

    #[test]
    fn zero_point_is_feasible() {
        let m = tiny();
        let p = FinePoint { y: vec![0.0], x: vec![0.0; 2], v: vec![0.0; 2], w: vec![0.0; 2] };
        assert!(m.check_feasible(&p, &Tolerances::default()).unwrap().feasible);
    }

    #[test]
    fn switched_bound_violation_reported() {
        let mut m = tiny();
        m.lower = vec![0.5, 0.0];
        let p = FinePoint { y: vec![1.0], x: vec![1.0, 0.0], v: vec![0.1, 0.0], w: vec![0.0; 2] };
        let verdict = m.check_feasible(&p, &Tolerances::default()).unwrap();
        assert!(!verdict.feasible);
        assert_eq!(verdict.violations[0].kind, ViolationKind::SwitchedLower { index: 0 });
        assert!((verdict.violations[0].magnitude - 0.4).abs() < 1e-12);
    }

    #[test]
    fn point_dimension_checked() {
        let p = FinePoint { y: vec![], x: vec![0.0; 2], v: vec![0.0; 2], w: vec![0.0; 2] };
        assert!(matches!(tiny().check_feasible(&p, &Tolerances::default()), Err(MilpError::DimensionMismatch(_))));
    }

    #[test]
    fn json_round_trip_and_ge_rows_negated() {
        let m = tiny();
        let back = TwoStageMilp::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);

        let mut v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        v["sense"] = serde_json::json!([">="]);
        let flipped = TwoStageMilp::from_json(&v.to_string()).unwrap();
        assert_eq!(flipped.rhs, vec![-1.0]);
        assert_eq!(flipped.mat_x.to_dense(), vec![vec![-1.0, -1.0]]);
        assert_eq!(flipped.mat_y.to_dense(), vec![vec![1.0]]);
    }

    #[test]
    fn single_profile_copies_through() {
        let lib = ProfileLibrary::new(2, vec![vec![1.0, 0.0]], vec![vec![]], vec![]);
        let part = VariablePartition::new(2, 2).unwrap();
        let point = CoarsePoint { y: vec![], xbar: vec![1.0], vbar: vec![], wbar: vec![] };
        let fine = lift_solution(&part, &lib, &point, 1e-9).unwrap();
        assert_eq!(fine.x, vec![1.0, 0.0]);
    }

    #[test]
    fn empty_selection_lifts_to_zero() {
        let lib = ProfileLibrary::new(2, vec![vec![1.0, 1.0]], vec![vec![vec![0.5, 0.5]]], vec![]);
        let part = VariablePartition::new(4, 2).unwrap();
        let point = CoarsePoint { y: vec![], xbar: vec![0.0; 2], vbar: vec![0.0; 2], wbar: vec![] };
        let fine = lift_solution(&part, &lib, &point, 1e-9).unwrap();
        assert_eq!(fine.x, vec![0.0; 4]);
        assert_eq!(fine.v, vec![0.0; 4]);
    }

    #[test]
    fn lift_rejects_bad_selection() {
        let lib = ProfileLibrary::new(1, vec![vec![1.0], vec![0.0]], vec![vec![vec![1.0]], vec![]], vec![]);
        let part = VariablePartition::new(1, 1).unwrap();
        let point = CoarsePoint { y: vec![], xbar: vec![1.0, 1.0], vbar: vec![1.0], wbar: vec![] };
        assert!(matches!(
            lift_solution(&part, &lib, &point, 1e-9),
            Err(MilpError::SelectionConstraintViolated { group: 0, .. })
        ));
        let point = CoarsePoint { y: vec![], xbar: vec![1.0, 0.0], vbar: vec![0.5], wbar: vec![] };
        assert!(lift_solution(&part, &lib, &point, 1e-9).is_err());
    }
}

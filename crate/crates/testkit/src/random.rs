//! Small random two-stage instances, profile libraries and coarse points.
//!
//! Instances are always feasible (x = v = 0 with w covering demand) and
//! bounded (nonnegative costs, v boxed). Bounds repeat with period δ so any
//! profile that fits one group fits all of them.

use rand::Rng;
use twolevel::coarsening::{CoarsePoint, ProfileLibrary, SemiLayout};
use twolevel::milp::{FinePoint, TwoStageMilp, VariablePartition};
use twolevel::sparse::CsrMatrix;

/// Sizes of a random instance. `capacity_rows` is 0 or δ so the coupling
/// row count is always a multiple of δ.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub m: usize,
    pub groups: usize,
    pub delta: usize,
    pub capacity_rows: usize,
}

impl Shape {
    pub fn n(&self) -> usize {
        self.groups * self.delta
    }
}

/// Upper limits for [`shape`]. `max_n` caps groups × δ so enumeration
/// stays cheap.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_groups: usize,
    pub max_delta: usize,
    pub max_n: usize,
    pub max_onoff: usize,
}

impl Limits {
    /// Sizes the exact oracle enumerates quickly.
    pub const ENUMERABLE: Limits = Limits { max_groups: 4, max_delta: 4, max_n: 8, max_onoff: 2 };
    /// Sizes that never need a solver.
    pub const WIDE: Limits = Limits { max_groups: 4, max_delta: 6, max_n: 24, max_onoff: 3 };
}

pub fn shape<R: Rng>(rng: &mut R, lim: Limits) -> Shape {
    let delta = rng.random_range(1..=lim.max_delta);
    let groups = rng.random_range(1..=(lim.max_n / delta).clamp(1, lim.max_groups));
    let capacity_rows = if rng.random_bool(0.5) { delta } else { 0 };
    Shape { m: rng.random_range(0..=2), groups, delta, capacity_rows }
}

/// Demand rows `−v_t − w_t ≤ −D_t`, link rows `x_t − y_{t mod m} ≤ 0`, then
/// capacity rows with nonnegative coefficients on x and v.
pub fn instance<R: Rng>(rng: &mut R, s: Shape) -> TwoStageMilp {
    let n = s.n();
    let lo_pos: Vec<f64> = (0..s.delta).map(|_| round2(rng.random_range(0.0..1.0))).collect();
    let up_pos: Vec<f64> = lo_pos.iter().map(|l| l + round2(rng.random_range(0.5..2.0))).collect();
    let lower: Vec<f64> = (0..n).map(|t| lo_pos[t % s.delta]).collect();
    let upper: Vec<f64> = (0..n).map(|t| up_pos[t % s.delta]).collect();

    let mut ty = Vec::new();
    let mut tx = Vec::new();
    let mut tv = Vec::new();
    let mut tw = Vec::new();
    let mut rhs = Vec::new();
    let mut row = 0;
    for t in 0..n {
        tv.push((row, t, -1.0));
        tw.push((row, t, -1.0));
        rhs.push(-round2(rng.random_range(0.5..2.5)));
        row += 1;
    }
    if s.m > 0 {
        for t in 0..n {
            tx.push((row, t, 1.0));
            ty.push((row, t % s.m, -1.0));
            rhs.push(0.0);
            row += 1;
        }
    }
    for _ in 0..s.capacity_rows {
        let mut total = 0.0;
        for t in 0..n {
            if rng.random_bool(0.6) {
                let a = round2(rng.random_range(0.0..1.0));
                tx.push((row, t, a));
                total += a;
            }
            if rng.random_bool(0.6) {
                let c = round2(rng.random_range(0.0..1.0));
                tv.push((row, t, c));
                total += c * upper[t];
            }
        }
        rhs.push(round2(rng.random_range(0.2..0.9) * total));
        row += 1;
    }
    let m = s.m;
    let build = |t: &[(usize, usize, f64)], cols| CsrMatrix::from_triplets(row, cols, t).expect("triplets in range");
    TwoStageMilp {
        cost_y: (0..m).map(|_| round2(rng.random_range(0.0..1.0))).collect(),
        cost_x: (0..n).map(|_| round2(rng.random_range(0.0..0.5))).collect(),
        cost_v: (0..n).map(|_| round2(rng.random_range(0.1..1.0))).collect(),
        cost_w: (0..n).map(|_| round2(rng.random_range(2.0..4.0))).collect(),
        mat_y: build(&ty, m),
        mat_x: build(&tx, n),
        mat_v: build(&tv, n),
        mat_w: build(&tw, n),
        rhs,
        lower,
        upper,
    }
}

/// Random library that fits `model`. The first free profile covers the
/// largest demand at each position so the semi-coarse model stays feasible.
pub fn profiles<R: Rng>(rng: &mut R, model: &TwoStageMilp, partition: &VariablePartition, max_onoff: usize) -> ProfileLibrary {
    let d = partition.delta;
    let k_count = rng.random_range(1..=max_onoff.max(1));
    let mut onoff = Vec::new();
    let mut operating = Vec::new();
    for _ in 0..k_count {
        let x: Vec<f64> = (0..d).map(|_| if rng.random_bool(0.6) { 1.0 } else { 0.0 }).collect();
        // Without operating profiles the implied one is zero, which only
        // fits when every on position has a zero lower bound.
        let zero_fits = (0..d).all(|h| x[h] == 0.0 || model.lower[h] == 0.0);
        let count = rng.random_range(if zero_fits { 0 } else { 1 }..=2);
        let ops = (0..count)
            .map(|_| {
                (0..d)
                    .map(|h| if x[h] == 1.0 { round2(rng.random_range(model.lower[h]..=model.upper[h])) } else { 0.0 })
                    .collect()
            })
            .collect();
        onoff.push(x);
        operating.push(ops);
    }
    let mut cover = vec![0.0; d];
    for t in 0..partition.len() {
        cover[t % d] = f64::max(cover[t % d], -model.rhs[t]);
    }
    let mut free = vec![cover];
    if rng.random_bool(0.5) {
        free.push((0..d).map(|_| round2(rng.random_range(0.0..2.0))).collect());
    }
    ProfileLibrary::new(d, onoff, operating, free)
}

/// Library holding exactly the group slices of a fine point.
pub fn profiles_from_point(point: &FinePoint, partition: &VariablePartition) -> ProfileLibrary {
    let d = partition.delta;
    let mut onoff: Vec<Vec<f64>> = Vec::new();
    let mut operating: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut free = Vec::new();
    for i in 0..partition.groups {
        let g = partition.group(i);
        let x: Vec<f64> = point.x[g.clone()].iter().map(|x| x.round()).collect();
        let k = match onoff.iter().position(|o| *o == x) {
            Some(k) => k,
            None => {
                onoff.push(x);
                operating.push(Vec::new());
                onoff.len() - 1
            }
        };
        operating[k].push(point.v[g.clone()].to_vec());
        free.push(point.w[g].iter().map(|w| w.max(0.0)).collect());
    }
    let mut lib = ProfileLibrary::new(d, onoff, operating, free);
    lib.deduplicate();
    lib
}

/// Random point satisfying the selection block of `layout`.
pub fn selection_point<R: Rng>(rng: &mut R, layout: &SemiLayout, profiles: &ProfileLibrary) -> CoarsePoint {
    let mut p = CoarsePoint {
        y: (0..layout.m).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect(),
        xbar: vec![0.0; layout.num_xbar()],
        vbar: vec![0.0; layout.num_vbar()],
        wbar: vec![0.0; layout.num_wbar()],
    };
    for i in 0..layout.groups {
        if layout.onoff > 0 && rng.random_bool(0.7) {
            let k = rng.random_range(0..layout.onoff);
            p.xbar[layout.xbar_index(i, k)] = 1.0;
            let weights = simplex(rng, profiles.operating[k].len(), 1.0);
            for (j, w) in weights.into_iter().enumerate() {
                p.vbar[layout.vbar_index(i, k, j)] = w;
            }
        }
        let total = rng.random_range(0.0..=1.0);
        for (j, w) in simplex(rng, layout.free, total).into_iter().enumerate() {
            p.wbar[layout.wbar_index(i, j)] = w;
        }
    }
    p
}

fn simplex<R: Rng>(rng: &mut R, n: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / s * total).collect()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

//! Profile-based (semi-coarse) cogeneration model, its row-aggregated
//! coarse form, and lifting back to an hourly schedule.
//!
//! Coupling rows come in blocks of δ hourly rows, one block per family and
//! day (and unit, for symmetry); these blocks are the natural aggregation
//! groups, so the coarse model sums each into one daily row. Selection
//! rows, midnight battery stitching and the cyclic boundaries stay in the
//! base block and pass through aggregation unchanged.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use twolevel::coarsening::{CoarseModel, SemiCoarseModel};
use twolevel::model::{ModelBuilder, MilpModel};
use twolevel::sparse::CsrBuilder;

use crate::full::{FullIndex, RowFamily};
use crate::instance::{discount, hourly_discount, CogenInstance, Gen, Tech};
use crate::profiles::CogenLibrary;
use crate::schedule::CogenSchedule;
use crate::CogenError;

const INF: f64 = f64::INFINITY;

/// Column arithmetic of the semi-coarse model.
///
/// Layout: `y`, `u^max` per month, then one block per day holding `x̄` and
/// `p̄` for both generators (unit-major), then `ū`, `q̄`, `b̄`, `s̄`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemiIndex {
    pub delta: usize,
    pub days: usize,
    pub months: usize,
    pub units: [usize; 2],
    /// On/off profile count per generator.
    pub onoff: [usize; 2],
    /// Per generator, offsets of each on/off profile's production profiles.
    pub prod_offsets: [Vec<usize>; 2],
    pub utility: usize,
    pub boiler: usize,
    pub battery: usize,
    pub storage: usize,
    x_base: [usize; 2],
    p_base: [usize; 2],
    block: usize,
}

impl SemiIndex {
    pub fn new(inst: &CogenInstance, lib: &CogenLibrary) -> Self {
        let units = [inst.units(Gen::Pow), inst.units(Gen::Chp)];
        let onoff = [lib.pow.len(), lib.chp.len()];
        let offsets = |g: Gen| {
            let mut v = vec![0];
            for p in &lib.gen(g).production {
                v.push(v.last().unwrap() + p.len());
            }
            v
        };
        let prod_offsets = [offsets(Gen::Pow), offsets(Gen::Chp)];
        let mut at = 0;
        let mut x_base = [0; 2];
        let mut p_base = [0; 2];
        for g in Gen::ALL {
            x_base[g.index()] = at;
            at += units[g.index()] * onoff[g.index()];
        }
        for g in Gen::ALL {
            p_base[g.index()] = at;
            at += units[g.index()] * prod_offsets[g.index()].last().unwrap();
        }
        let block = at + lib.utility.len() + lib.boiler.len() + lib.battery.len() + lib.storage.len();
        Self {
            delta: lib.delta,
            days: inst.days(),
            months: inst.months.len(),
            units,
            onoff,
            prod_offsets,
            utility: lib.utility.len(),
            boiler: lib.boiler.len(),
            battery: lib.battery.len(),
            storage: lib.storage.len(),
            x_base,
            p_base,
            block,
        }
    }

    fn day_base(&self, d: usize) -> usize {
        debug_assert!(d < self.days);
        Tech::ALL.len() + self.months + d * self.block
    }

    pub fn num_cols(&self) -> usize {
        Tech::ALL.len() + self.months + self.days * self.block
    }

    pub fn y(&self, t: Tech) -> usize {
        t.index()
    }

    pub fn umax(&self, m: usize) -> usize {
        Tech::ALL.len() + m
    }

    pub fn xbar(&self, d: usize, g: Gen, i: usize, k: usize) -> usize {
        let gi = g.index();
        self.day_base(d) + self.x_base[gi] + i * self.onoff[gi] + k
    }

    pub fn pbar(&self, d: usize, g: Gen, i: usize, k: usize, l: usize) -> usize {
        let gi = g.index();
        let per_unit = *self.prod_offsets[gi].last().unwrap();
        self.day_base(d) + self.p_base[gi] + i * per_unit + self.prod_offsets[gi][k] + l
    }

    fn tail(&self, d: usize) -> usize {
        self.day_base(d) + self.p_base[1] + self.units[1] * self.prod_offsets[1].last().unwrap()
    }

    pub fn ubar(&self, d: usize, k: usize) -> usize {
        self.tail(d) + k
    }

    pub fn qbar(&self, d: usize, k: usize) -> usize {
        self.tail(d) + self.utility + k
    }

    pub fn bbar(&self, d: usize, k: usize) -> usize {
        self.tail(d) + self.utility + self.boiler + k
    }

    pub fn sbar(&self, d: usize, k: usize) -> usize {
        self.tail(d) + self.utility + self.boiler + self.battery + k
    }

    /// Number of production profiles under on/off profile `k` of `g`.
    pub fn prod_count(&self, g: Gen, k: usize) -> usize {
        self.prod_offsets[g.index()][k + 1] - self.prod_offsets[g.index()][k]
    }
}

#[derive(Debug, Clone)]
pub struct CogenSemi {
    pub semi: Arc<SemiCoarseModel>,
    pub index: SemiIndex,
    /// Coupling row families.
    pub coupling_families: Vec<RowFamily>,
    /// Base row families (selection, stitching, boundaries).
    pub base_families: Vec<RowFamily>,
}

impl CogenSemi {
    pub fn to_milp(&self) -> MilpModel {
        self.semi.to_milp()
    }

    /// Coarse model with one aggregated row per daily block.
    pub fn coarse(&self) -> Result<CoarseModel, CogenError> {
        Ok(CoarseModel::build_natural(self.semi.clone())?)
    }
}

struct Coupling {
    b: CsrBuilder,
    rhs: Vec<f64>,
    groups: Vec<Range<usize>>,
    families: Vec<RowFamily>,
}

impl Coupling {
    fn row(&mut self, entries: Vec<(usize, f64)>, rhs: f64) {
        self.b.push_row(entries);
        self.rhs.push(rhs);
    }

    /// Runs `body` for one block and records it as a group.
    fn group(&mut self, body: impl FnOnce(&mut Self)) {
        let start = self.rhs.len();
        body(self);
        if self.rhs.len() > start {
            self.groups.push(start..self.rhs.len());
        }
    }

    fn family(&mut self, name: &str, body: impl FnOnce(&mut Self)) {
        let start = self.rhs.len();
        body(self);
        self.families.push(RowFamily { name: name.to_string(), rows: start..self.rhs.len() });
    }
}

/// Builds the semi-coarse model for `inst` from `lib`.
///
/// Storage capacity bounds the storage level profile, and the last day
/// keeps its within-day storage rows; both keep every lifted point
/// feasible for the hourly model. Purchased power and boiler heat are
/// priced hour by hour.
pub fn build_semi_cogen(inst: &CogenInstance, lib: &CogenLibrary) -> Result<CogenSemi, CogenError> {
    inst.validate()?;
    lib.validate()?;
    if lib.delta != crate::instance::DELTA {
        return Err(CogenError::InvalidProfilePool(format!("profiles have length {}, expected {}", lib.delta, crate::instance::DELTA)));
    }
    let ix = SemiIndex::new(inst, lib);
    let dl = ix.delta;
    let days = ix.days;
    let scale = inst.scale();
    let techs = &inst.techs;
    let units = |g: Gen| 0..ix.units[g.index()];
    let ratio = if techs.chp.max_units > 0 { techs.heat_ratio() } else { 0.0 };

    // Columns.
    let mut b = ModelBuilder::new(format!("{}-semi", inst.name), false);
    for tech in Tech::ALL {
        let spec = techs.get(tech);
        b.add_col(String::new, spec.capital_cost, 0.0, spec.max_units as f64, true);
    }
    for month in &inst.months {
        b.add_col(String::new, scale * discount(month.charge_hour()) * month.peak_price, 0.0, INF, false);
    }
    let yd = hourly_discount();
    let mut disc_hour = vec![0.0; inst.hours()];
    let mut acc = scale;
    for v in disc_hour.iter_mut() {
        acc *= yd;
        *v = acc;
    }
    let dot_disc = |d: usize, prof: &[f64], price: &dyn Fn(usize) -> f64| -> f64 {
        prof.iter().enumerate().map(|(h, v)| disc_hour[d * dl + h] * price(d * dl + h) * v).sum()
    };
    for d in 0..days {
        for g in Gen::ALL {
            let gl = lib.gen(g);
            let w = techs.gen(g).switching_cost;
            for _ in units(g) {
                for k in 0..ix.onoff[g.index()] {
                    b.add_col(String::new, dot_disc(d, &gl.switching[k], &|_| w), 0.0, 1.0, true);
                }
            }
        }
        for g in Gen::ALL {
            let gl = lib.gen(g);
            let m = techs.gen(g).maintenance;
            for _ in units(g) {
                for k in 0..ix.onoff[g.index()] {
                    for p in &gl.production[k] {
                        b.add_col(String::new, dot_disc(d, p, &|_| m), 0.0, 1.0, false);
                    }
                }
            }
        }
        for p in &lib.utility {
            b.add_col(String::new, dot_disc(d, p, &|t| inst.power_price[t]), 0.0, 1.0, false);
        }
        for p in &lib.boiler {
            b.add_col(String::new, dot_disc(d, p, &|t| inst.gas_price[t]), 0.0, 1.0, false);
        }
        for _ in 0..ix.battery + ix.storage {
            b.add_col(String::new, 0.0, 0.0, 1.0, false);
        }
    }
    debug_assert_eq!(b.num_cols(), ix.num_cols());

    // Base rows.
    let mut base_families = Vec::new();
    let mut fam = |b: &mut ModelBuilder, name: &str, body: &mut dyn FnMut(&mut ModelBuilder)| {
        let start = b.num_rows();
        body(b);
        base_families.push(RowFamily { name: name.to_string(), rows: start..b.num_rows() });
    };
    fam(&mut b, "select_onoff", &mut |b| {
        for d in 0..days {
            for g in Gen::ALL {
                for i in units(g) {
                    if ix.onoff[g.index()] > 0 {
                        let e: Vec<_> = (0..ix.onoff[g.index()]).map(|k| (ix.xbar(d, g, i, k), 1.0)).collect();
                        b.add_row(String::new, e, -INF, 1.0);
                    }
                }
            }
        }
    });
    fam(&mut b, "select_production", &mut |b| {
        for d in 0..days {
            for g in Gen::ALL {
                for i in units(g) {
                    let mut all = Vec::new();
                    for k in 0..ix.onoff[g.index()] {
                        let mut e: Vec<_> = (0..ix.prod_count(g, k)).map(|l| (ix.pbar(d, g, i, k, l), 1.0)).collect();
                        all.extend(e.iter().copied());
                        e.push((ix.xbar(d, g, i, k), -1.0));
                        b.add_row(String::new, e, 0.0, 0.0);
                    }
                    if !all.is_empty() {
                        b.add_row(String::new, all, -INF, 1.0);
                    }
                }
            }
        }
    });
    fam(&mut b, "select_free", &mut |b| {
        for d in 0..days {
            for (n, col) in [
                (ix.utility, &(|d, k| ix.ubar(d, k)) as &dyn Fn(usize, usize) -> usize),
                (ix.boiler, &|d, k| ix.qbar(d, k)),
                (ix.battery, &|d, k| ix.bbar(d, k)),
                (ix.storage, &|d, k| ix.sbar(d, k)),
            ] {
                if n > 0 {
                    b.add_row(String::new, (0..n).map(|k| (col(d, k), 1.0)), -INF, 1.0);
                }
            }
        }
    });
    let keep_p = 1.0 - inst.loss_power;
    fam(&mut b, "battery_midnight", &mut |b| {
        for d in 0..days.saturating_sub(1) {
            let mut e: Vec<(usize, f64)> = (0..ix.battery).map(|k| (ix.bbar(d + 1, k), lib.battery[k].level[0])).collect();
            e.extend((0..ix.battery).map(|k| {
                let pr = &lib.battery[k];
                (ix.bbar(d, k), -(keep_p * pr.level[dl - 1] + pr.flow[dl - 1]))
            }));
            b.add_row(String::new, e, 0.0, 0.0);
        }
    });
    fam(&mut b, "battery_boundary", &mut |b| {
        let mut e: Vec<(usize, f64)> = (0..ix.battery).map(|k| (ix.bbar(0, k), lib.battery[k].level[0])).collect();
        e.extend((0..ix.battery).map(|k| (ix.bbar(days - 1, k), -lib.battery[k].level[dl - 1])));
        b.add_row(String::new, e, 0.0, 0.0);
    });
    fam(&mut b, "storage_boundary", &mut |b| {
        let mut e: Vec<(usize, f64)> = (0..ix.storage).map(|k| (ix.sbar(0, k), lib.storage[k].level[0])).collect();
        e.extend((0..ix.storage).map(|k| (ix.sbar(days - 1, k), -lib.storage[k].level[dl - 1])));
        b.add_row(String::new, e, 0.0, 0.0);
    });
    let base = b.finish();

    // Coupling rows, one group per daily block.
    let mut c = Coupling { b: CsrBuilder::new(ix.num_cols()), rhs: Vec::new(), groups: Vec::new(), families: Vec::new() };
    let production_terms = |d: usize, g: Gen, h: usize, coef: f64, out: &mut Vec<(usize, f64)>| {
        let gl = lib.gen(g);
        for i in units(g) {
            for k in 0..ix.onoff[g.index()] {
                for (l, p) in gl.production[k].iter().enumerate() {
                    out.push((ix.pbar(d, g, i, k, l), coef * p[h]));
                }
            }
        }
    };
    let month_of_day = inst.month_of_day();
    c.family("power_demand", |c| {
        for d in 0..days {
            c.group(|c| {
                for h in 0..dl {
                    let mut e = Vec::new();
                    for g in Gen::ALL {
                        production_terms(d, g, h, -1.0, &mut e);
                    }
                    e.extend((0..ix.utility).map(|k| (ix.ubar(d, k), -lib.utility[k][h])));
                    e.extend((0..ix.battery).map(|k| (ix.bbar(d, k), lib.battery[k].flow[h])));
                    c.row(e, -inst.power_demand[d * dl + h]);
                }
            });
        }
    });
    c.family("cap_gen", |c| {
        for g in Gen::ALL {
            for d in 0..days {
                c.group(|c| {
                    for h in 0..dl {
                        let mut e = vec![(ix.y(g.tech()), -1.0)];
                        for i in units(g) {
                            e.extend((0..ix.onoff[g.index()]).map(|k| (ix.xbar(d, g, i, k), lib.gen(g).onoff[k][h])));
                        }
                        c.row(e, 0.0);
                    }
                });
            }
        }
    });
    c.family("symmetry", |c| {
        for g in Gen::ALL {
            if ix.onoff[g.index()] == 0 {
                continue;
            }
            for i in 1..ix.units[g.index()] {
                for d in 0..days {
                    c.group(|c| {
                        for h in 0..dl {
                            let mut e = Vec::new();
                            for k in 0..ix.onoff[g.index()] {
                                let v = lib.gen(g).onoff[k][h];
                                e.push((ix.xbar(d, g, i, k), v));
                                e.push((ix.xbar(d, g, i - 1, k), -v));
                            }
                            c.row(e, 0.0);
                        }
                    });
                }
            }
        }
    });
    c.family("max_demand", |c| {
        for d in 0..days {
            c.group(|c| {
                for h in 0..dl {
                    let mut e: Vec<_> = (0..ix.utility).map(|k| (ix.ubar(d, k), lib.utility[k][h])).collect();
                    e.push((ix.umax(month_of_day[d]), -1.0));
                    c.row(e, 0.0);
                }
            });
        }
    });
    c.family("cap_batt", |c| {
        for d in 0..days {
            c.group(|c| {
                for h in 0..dl {
                    let mut e: Vec<_> = (0..ix.battery).map(|k| (ix.bbar(d, k), lib.battery[k].level[h])).collect();
                    e.push((ix.y(Tech::Batt), -techs.batt.capacity));
                    c.row(e, 0.0);
                }
            });
        }
    });
    c.family("heat_demand", |c| {
        for d in 0..days {
            c.group(|c| {
                for h in 0..dl {
                    let mut e: Vec<_> = (0..ix.storage).map(|k| (ix.sbar(d, k), -lib.storage[k].flow[h])).collect();
                    e.extend((0..ix.boiler).map(|k| (ix.qbar(d, k), -lib.boiler[k][h])));
                    c.row(e, -inst.heat_demand[d * dl + h]);
                }
            });
        }
    });
    let keep_q = 1.0 - inst.loss_heat;
    c.family("storage", |c| {
        for d in 0..days {
            c.group(|c| {
                let last = if d + 1 < days { dl } else { dl - 1 };
                for h in 0..last {
                    let mut e = Vec::new();
                    for (k, pr) in lib.storage.iter().enumerate() {
                        let next = if h + 1 < dl { pr.level[h + 1] } else { 0.0 };
                        e.push((ix.sbar(d, k), next - keep_q * pr.level[h] + pr.flow[h]));
                        if h + 1 == dl {
                            e.push((ix.sbar(d + 1, k), pr.level[0]));
                        }
                    }
                    production_terms(d, Gen::Chp, h, -ratio, &mut e);
                    c.row(e, 0.0);
                }
            });
        }
    });
    c.family("cap_stor", |c| {
        for d in 0..days {
            c.group(|c| {
                for h in 0..dl {
                    let mut e: Vec<_> = (0..ix.storage).map(|k| (ix.sbar(d, k), lib.storage[k].level[h])).collect();
                    e.push((ix.y(Tech::Stor), -techs.stor.capacity));
                    c.row(e, 0.0);
                }
            });
        }
    });
    c.family("cap_boil", |c| {
        for d in 0..days {
            c.group(|c| {
                for h in 0..dl {
                    let mut e: Vec<_> = (0..ix.boiler).map(|k| (ix.qbar(d, k), lib.boiler[k][h])).collect();
                    e.push((ix.y(Tech::Boil), -techs.boil.capacity));
                    c.row(e, 0.0);
                }
            });
        }
    });
    let mut semi = SemiCoarseModel::from_parts(base, c.b.finish(), c.rhs, c.groups)?;
    semi.coupling_names = Vec::new();
    Ok(CogenSemi { semi: Arc::new(semi), index: ix, coupling_families: c.families, base_families })
}

/// Coarse model of [`build_semi_cogen`]: each daily block summed into one
/// row.
pub fn build_coarse_cogen(inst: &CogenInstance, lib: &CogenLibrary) -> Result<(CogenSemi, CoarseModel), CogenError> {
    let semi = build_semi_cogen(inst, lib)?;
    let coarse = semi.coarse()?;
    Ok((semi, coarse))
}

/// Hourly schedule of a semi-coarse point. Switching variables come from
/// the switching profiles, so midnight switches are not charged; see
/// [`crate::schedule::repair_switching`].
pub fn lift_semi(inst: &CogenInstance, lib: &CogenLibrary, ix: &SemiIndex, values: &[f64]) -> CogenSchedule {
    let full = FullIndex::new(inst);
    let mut s = CogenSchedule::zeros(&full);
    for tech in Tech::ALL {
        s.y[tech.index()] = values[ix.y(tech)];
    }
    for m in 0..ix.months {
        s.umax[m] = values[ix.umax(m)];
    }
    let dl = ix.delta;
    for d in 0..ix.days {
        let hours = d * dl..(d + 1) * dl;
        for g in Gen::ALL {
            let gl = lib.gen(g);
            for i in 0..ix.units[g.index()] {
                let unit = full.unit(g, i);
                for k in 0..ix.onoff[g.index()] {
                    let xv = values[ix.xbar(d, g, i, k)];
                    for (h, t) in hours.clone().enumerate() {
                        s.x[unit][t] += xv * gl.onoff[k][h];
                        s.w[unit][t] += xv * gl.switching[k][h];
                    }
                    for (l, p) in gl.production[k].iter().enumerate() {
                        let pv = values[ix.pbar(d, g, i, k, l)];
                        for (h, t) in hours.clone().enumerate() {
                            s.p[unit][t] += pv * p[h];
                        }
                    }
                }
                for t in hours.clone() {
                    s.ptot[g.index()][t] += s.p[unit][t];
                }
            }
        }
        for (h, t) in hours.enumerate() {
            for (k, p) in lib.utility.iter().enumerate() {
                s.u[t] += values[ix.ubar(d, k)] * p[h];
            }
            for (k, p) in lib.boiler.iter().enumerate() {
                s.q[t] += values[ix.qbar(d, k)] * p[h];
            }
            for (k, pr) in lib.battery.iter().enumerate() {
                let c = values[ix.bbar(d, k)];
                s.b[t] += c * pr.level[h];
                s.bio[t] += c * pr.flow[h];
            }
            for (k, pr) in lib.storage.iter().enumerate() {
                let c = values[ix.sbar(d, k)];
                s.s[t] += c * pr.level[h];
                s.sout[t] += c * pr.flow[h];
            }
        }
    }
    s
}

//! The hourly cogeneration MILP.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use twolevel::model::{MilpModel, ModelBuilder};

use crate::instance::{discount, hourly_discount, CogenInstance, Gen, Tech};
use crate::CogenError;

const INF: f64 = f64::INFINITY;

/// Per-hour variables after the unit blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HourVar {
    PowTotal = 0,
    ChpTotal,
    Q,
    U,
    B,
    Bio,
    S,
    Sout,
}

const HOUR_SCALARS: usize = 8;

/// Column arithmetic for [`build_full`].
///
/// Layout: `y` in [`Tech::ALL`] order, one `u^max` per month, then one block
/// per hour holding `x`, `p` and `w` for every unit (power units first)
/// followed by `p_pow`, `p_chp`, `q`, `u`, `b`, `b^IO`, `s`, `s^out`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullIndex {
    pub units: [usize; 2],
    pub hours: usize,
    pub months: usize,
}

impl FullIndex {
    pub fn new(inst: &CogenInstance) -> Self {
        Self { units: [inst.units(Gen::Pow), inst.units(Gen::Chp)], hours: inst.hours(), months: inst.months.len() }
    }

    pub fn total_units(&self) -> usize {
        self.units[0] + self.units[1]
    }

    /// Global unit number of unit `i` of `g`.
    pub fn unit(&self, g: Gen, i: usize) -> usize {
        debug_assert!(i < self.units[g.index()]);
        match g {
            Gen::Pow => i,
            Gen::Chp => self.units[0] + i,
        }
    }

    pub fn unit_gen(&self, unit: usize) -> (Gen, usize) {
        if unit < self.units[0] {
            (Gen::Pow, unit)
        } else {
            (Gen::Chp, unit - self.units[0])
        }
    }

    fn block(&self) -> usize {
        3 * self.total_units() + HOUR_SCALARS
    }

    fn hour_base(&self, t: usize) -> usize {
        debug_assert!(t < self.hours);
        Tech::ALL.len() + self.months + t * self.block()
    }

    pub fn num_cols(&self) -> usize {
        Tech::ALL.len() + self.months + self.hours * self.block()
    }

    pub fn y(&self, tech: Tech) -> usize {
        tech.index()
    }

    pub fn umax(&self, m: usize) -> usize {
        Tech::ALL.len() + m
    }

    pub fn x(&self, t: usize, unit: usize) -> usize {
        self.hour_base(t) + unit
    }

    pub fn p(&self, t: usize, unit: usize) -> usize {
        self.hour_base(t) + self.total_units() + unit
    }

    pub fn w(&self, t: usize, unit: usize) -> usize {
        self.hour_base(t) + 2 * self.total_units() + unit
    }

    fn scalar(&self, t: usize, v: HourVar) -> usize {
        self.hour_base(t) + 3 * self.total_units() + v as usize
    }

    pub fn ptot(&self, t: usize, g: Gen) -> usize {
        self.scalar(t, if g == Gen::Pow { HourVar::PowTotal } else { HourVar::ChpTotal })
    }

    pub fn q(&self, t: usize) -> usize {
        self.scalar(t, HourVar::Q)
    }

    pub fn u(&self, t: usize) -> usize {
        self.scalar(t, HourVar::U)
    }

    pub fn b(&self, t: usize) -> usize {
        self.scalar(t, HourVar::B)
    }

    pub fn bio(&self, t: usize) -> usize {
        self.scalar(t, HourVar::Bio)
    }

    pub fn s(&self, t: usize) -> usize {
        self.scalar(t, HourVar::S)
    }

    pub fn sout(&self, t: usize) -> usize {
        self.scalar(t, HourVar::Sout)
    }

    /// Human-readable name of a column, e.g. `x[chp,0,t=5]`.
    pub fn describe(&self, col: usize) -> String {
        let first = Tech::ALL.len();
        if col < first {
            return format!("y[{}]", Tech::ALL[col].label().to_lowercase());
        }
        if col < first + self.months {
            return format!("umax[{}]", col - first);
        }
        let rel = col - first - self.months;
        let (t, r) = (rel / self.block(), rel % self.block());
        let nu = self.total_units();
        let gen_name = |u: usize| {
            let (g, i) = self.unit_gen(u);
            format!("{},{i}", if g == Gen::Pow { "pow" } else { "chp" })
        };
        if r < nu {
            format!("x[{},t={t}]", gen_name(r))
        } else if r < 2 * nu {
            format!("p[{},t={t}]", gen_name(r - nu))
        } else if r < 3 * nu {
            format!("w[{},t={t}]", gen_name(r - 2 * nu))
        } else {
            let name = ["p[pow]", "p[chp]", "q", "u", "b", "bio", "s", "sout"][r - 3 * nu];
            format!("{name}[t={t}]")
        }
    }
}

/// A named contiguous range of rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFamily {
    pub name: String,
    pub rows: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct FullModel {
    pub model: MilpModel,
    pub index: FullIndex,
    pub families: Vec<RowFamily>,
}

impl FullModel {
    pub fn family(&self, name: &str) -> Option<&RowFamily> {
        self.families.iter().find(|f| f.name == name)
    }

    /// Number of binary on/off columns.
    pub fn onoff_binaries(&self) -> usize {
        self.index.hours * self.index.total_units()
    }
}

struct Rows<'a> {
    b: &'a mut ModelBuilder,
    families: Vec<RowFamily>,
}

impl Rows<'_> {
    fn family(&mut self, name: &str, body: impl FnOnce(&mut ModelBuilder)) {
        let start = self.b.num_rows();
        body(self.b);
        self.families.push(RowFamily { name: name.to_string(), rows: start..self.b.num_rows() });
    }
}

/// Builds the hourly model. With `names` set, columns and rows carry names
/// (useful for MPS export of small instances).
pub fn build_full(inst: &CogenInstance, names: bool) -> Result<FullModel, CogenError> {
    inst.validate()?;
    let ix = FullIndex::new(inst);
    let tt = ix.hours;
    let scale = inst.scale();
    let techs = &inst.techs;
    let mut b = ModelBuilder::new(inst.name.clone(), names);

    for tech in Tech::ALL {
        let spec = techs.get(tech);
        let col = b.add_col(|| ix.describe(ix.y(tech)), spec.capital_cost, 0.0, spec.max_units as f64, true);
        debug_assert_eq!(col, ix.y(tech));
    }
    for (m, month) in inst.months.iter().enumerate() {
        let cost = scale * discount(month.charge_hour()) * month.peak_price;
        b.add_col(|| ix.describe(ix.umax(m)), cost, 0.0, INF, false);
    }
    let y_disc = hourly_discount();
    let mut disc = scale;
    for t in 0..tt {
        disc *= y_disc;
        let nu = ix.total_units();
        for _ in 0..nu {
            b.add_col(String::new, 0.0, 0.0, 1.0, true);
        }
        for _ in 0..nu {
            b.add_col(String::new, 0.0, 0.0, INF, false);
        }
        for u in 0..nu {
            b.add_col(String::new, disc * techs.gen(ix.unit_gen(u).0).switching_cost, 0.0, 1.0, false);
        }
        b.add_col(String::new, disc * techs.pow.maintenance, 0.0, INF, false);
        b.add_col(String::new, disc * techs.chp.maintenance, 0.0, INF, false);
        b.add_col(String::new, disc * inst.gas_price[t], 0.0, INF, false);
        b.add_col(String::new, disc * inst.power_price[t], 0.0, INF, false);
        b.add_col(String::new, 0.0, 0.0, INF, false);
        b.add_col(String::new, 0.0, -INF, INF, false);
        b.add_col(String::new, 0.0, 0.0, INF, false);
        b.add_col(String::new, 0.0, 0.0, INF, false);
    }
    debug_assert_eq!(b.num_cols(), ix.num_cols());
    let mut model_names = b;
    let mut rows = Rows { b: &mut model_names, families: Vec::new() };
    let units = |g: Gen| 0..ix.units[g.index()];
    let month_of_hour: Vec<usize> = {
        let mut v = vec![0; tt];
        for (m, month) in inst.months.iter().enumerate() {
            v[month.hours()].iter_mut().for_each(|x| *x = m);
        }
        v
    };
    let ratio = if techs.chp.max_units > 0 { techs.heat_ratio() } else { 0.0 };

    rows.family("power_demand", |b| {
        for t in 0..tt {
            b.add_row(
                || format!("power_demand[{t}]"),
                [(ix.ptot(t, Gen::Pow), 1.0), (ix.ptot(t, Gen::Chp), 1.0), (ix.u(t), 1.0), (ix.bio(t), -1.0)],
                inst.power_demand[t],
                INF,
            );
        }
    });
    rows.family("gen_max", |b| {
        for t in 0..tt {
            for g in Gen::ALL {
                for i in units(g) {
                    let u = ix.unit(g, i);
                    let r = techs.gen(g).r_max;
                    b.add_row(|| format!("gen_max[{t},{u}]"), [(ix.p(t, u), 1.0), (ix.x(t, u), -r)], -INF, 0.0);
                }
            }
        }
    });
    rows.family("gen_min", |b| {
        for t in 0..tt {
            for g in Gen::ALL {
                for i in units(g) {
                    let u = ix.unit(g, i);
                    let r = techs.gen(g).r_min;
                    b.add_row(|| format!("gen_min[{t},{u}]"), [(ix.p(t, u), 1.0), (ix.x(t, u), -r)], 0.0, INF);
                }
            }
        }
    });
    rows.family("gen_total", |b| {
        for t in 0..tt {
            for g in Gen::ALL {
                let mut e = vec![(ix.ptot(t, g), 1.0)];
                e.extend(units(g).map(|i| (ix.p(t, ix.unit(g, i)), -1.0)));
                b.add_row(|| format!("gen_total[{t},{g:?}]"), e, 0.0, 0.0);
            }
        }
    });
    rows.family("onoff", |b| {
        for t in 0..tt {
            for g in Gen::ALL {
                let mut e = vec![(ix.y(g.tech()), -1.0)];
                e.extend(units(g).map(|i| (ix.x(t, ix.unit(g, i)), 1.0)));
                b.add_row(|| format!("onoff[{t},{g:?}]"), e, -INF, 0.0);
            }
        }
    });
    rows.family("symmetry", |b| {
        for t in 0..tt {
            for g in Gen::ALL {
                for i in 1..ix.units[g.index()] {
                    let (hi, lo) = (ix.unit(g, i), ix.unit(g, i - 1));
                    b.add_row(|| format!("symmetry[{t},{hi}]"), [(ix.x(t, hi), 1.0), (ix.x(t, lo), -1.0)], -INF, 0.0);
                }
            }
        }
    });
    for (name, sign) in [("switch_up", 1.0), ("switch_down", -1.0)] {
        rows.family(name, |b| {
            for t in 0..tt.saturating_sub(1) {
                for u in 0..ix.total_units() {
                    b.add_row(
                        || format!("{name}[{t},{u}]"),
                        [(ix.x(t + 1, u), sign), (ix.x(t, u), -sign), (ix.w(t, u), -1.0)],
                        -INF,
                        0.0,
                    );
                }
            }
        });
    }
    rows.family("max_power", |b| {
        for t in 0..tt {
            b.add_row(|| format!("max_power[{t}]"), [(ix.u(t), 1.0), (ix.umax(month_of_hour[t]), -1.0)], -INF, 0.0);
        }
    });
    rows.family("battery", |b| {
        for t in 0..tt.saturating_sub(1) {
            b.add_row(
                || format!("battery[{t}]"),
                [(ix.b(t + 1), 1.0), (ix.b(t), -(1.0 - inst.loss_power)), (ix.bio(t), -1.0)],
                0.0,
                0.0,
            );
        }
    });
    rows.family("battery_boundary", |b| {
        b.add_row(|| "battery_boundary".into(), [(ix.b(0), 1.0), (ix.b(tt - 1), -1.0)], 0.0, 0.0);
    });
    rows.family("battery_cap", |b| {
        for t in 0..tt {
            b.add_row(|| format!("battery_cap[{t}]"), [(ix.b(t), 1.0), (ix.y(Tech::Batt), -techs.batt.capacity)], -INF, 0.0);
        }
    });
    rows.family("heat_demand", |b| {
        for t in 0..tt {
            b.add_row(|| format!("heat_demand[{t}]"), [(ix.sout(t), 1.0), (ix.q(t), 1.0)], inst.heat_demand[t], INF);
        }
    });
    rows.family("storage", |b| {
        for t in 0..tt.saturating_sub(1) {
            b.add_row(
                || format!("storage[{t}]"),
                [
                    (ix.s(t + 1), 1.0),
                    (ix.s(t), -(1.0 - inst.loss_heat)),
                    (ix.sout(t), 1.0),
                    (ix.ptot(t, Gen::Chp), -ratio),
                ],
                -INF,
                0.0,
            );
        }
    });
    rows.family("storage_boundary", |b| {
        b.add_row(|| "storage_boundary".into(), [(ix.s(0), 1.0), (ix.s(tt - 1), -1.0)], 0.0, 0.0);
    });
    rows.family("storage_out", |b| {
        for t in 0..tt {
            b.add_row(|| format!("storage_out[{t}]"), [(ix.sout(t), 1.0), (ix.s(t), -1.0)], -INF, 0.0);
        }
    });
    rows.family("storage_cap", |b| {
        for t in 0..tt {
            b.add_row(|| format!("storage_cap[{t}]"), [(ix.s(t), 1.0), (ix.y(Tech::Stor), -techs.stor.capacity)], -INF, 0.0);
        }
    });
    rows.family("boiler_cap", |b| {
        for t in 0..tt {
            b.add_row(|| format!("boiler_cap[{t}]"), [(ix.q(t), 1.0), (ix.y(Tech::Boil), -techs.boil.capacity)], -INF, 0.0);
        }
    });
    let families = rows.families;
    let mut model = model_names.finish();
    if names {
        model.col_names = (0..ix.num_cols()).map(|c| ix.describe(c)).collect();
    }
    Ok(FullModel { model, index: ix, families })
}

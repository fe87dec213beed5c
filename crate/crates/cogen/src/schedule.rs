//! Hourly schedules, cost evaluation and solution summaries.

use serde::{Deserialize, Serialize};

use crate::full::FullIndex;
use crate::instance::{hourly_discount, CogenInstance, Gen, Tech};
use crate::CogenError;

/// Values of every full-model variable, by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CogenSchedule {
    /// Units bought, [`Tech::ALL`] order.
    pub y: [f64; 5],
    pub umax: Vec<f64>,
    /// `[unit][hour]`, power units first.
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    /// `p_jt` for pow and chp.
    pub ptot: [Vec<f64>; 2],
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
    pub bio: Vec<f64>,
    pub s: Vec<f64>,
    pub sout: Vec<f64>,
}

impl CogenSchedule {
    pub fn zeros(ix: &FullIndex) -> Self {
        let h = ix.hours;
        let units = vec![vec![0.0; h]; ix.total_units()];
        Self {
            y: [0.0; 5],
            umax: vec![0.0; ix.months],
            x: units.clone(),
            p: units.clone(),
            w: units,
            ptot: [vec![0.0; h], vec![0.0; h]],
            q: vec![0.0; h],
            u: vec![0.0; h],
            b: vec![0.0; h],
            bio: vec![0.0; h],
            s: vec![0.0; h],
            sout: vec![0.0; h],
        }
    }

    pub fn hours(&self) -> usize {
        self.q.len()
    }

    pub fn from_full_values(ix: &FullIndex, values: &[f64]) -> Self {
        let mut s = Self::zeros(ix);
        for tech in Tech::ALL {
            s.y[tech.index()] = values[ix.y(tech)];
        }
        for m in 0..ix.months {
            s.umax[m] = values[ix.umax(m)];
        }
        for t in 0..ix.hours {
            for u in 0..ix.total_units() {
                s.x[u][t] = values[ix.x(t, u)];
                s.p[u][t] = values[ix.p(t, u)];
                s.w[u][t] = values[ix.w(t, u)];
            }
            for g in Gen::ALL {
                s.ptot[g.index()][t] = values[ix.ptot(t, g)];
            }
            s.q[t] = values[ix.q(t)];
            s.u[t] = values[ix.u(t)];
            s.b[t] = values[ix.b(t)];
            s.bio[t] = values[ix.bio(t)];
            s.s[t] = values[ix.s(t)];
            s.sout[t] = values[ix.sout(t)];
        }
        s
    }

    pub fn to_full_values(&self, ix: &FullIndex) -> Vec<f64> {
        let mut v = vec![0.0; ix.num_cols()];
        for tech in Tech::ALL {
            v[ix.y(tech)] = self.y[tech.index()];
        }
        for m in 0..ix.months {
            v[ix.umax(m)] = self.umax[m];
        }
        for t in 0..ix.hours {
            for u in 0..ix.total_units() {
                v[ix.x(t, u)] = self.x[u][t];
                v[ix.p(t, u)] = self.p[u][t];
                v[ix.w(t, u)] = self.w[u][t];
            }
            for g in Gen::ALL {
                v[ix.ptot(t, g)] = self.ptot[g.index()][t];
            }
            v[ix.q(t)] = self.q[t];
            v[ix.u(t)] = self.u[t];
            v[ix.b(t)] = self.b[t];
            v[ix.bio(t)] = self.bio[t];
            v[ix.s(t)] = self.s[t];
            v[ix.sout(t)] = self.sout[t];
        }
        v
    }

    /// First-stage counts in table order, rounded.
    pub fn first_stage(&self) -> [i64; 5] {
        self.y.map(|v| v.round() as i64)
    }
}

/// Sets every switching variable to the switch it has to pay for,
/// `w(t) = |x(t+1) − x(t)|`, including switches at midnight.
pub fn repair_switching(s: &mut CogenSchedule) {
    for (x, w) in s.x.iter().zip(s.w.iter_mut()) {
        for t in 0..w.len() {
            w[t] = if t + 1 < x.len() { (x[t + 1] - x[t]).abs() } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub capital: f64,
    pub peak: f64,
    pub maintenance: f64,
    pub switching: f64,
    pub gas: f64,
    pub purchased_power: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.capital + self.peak + self.maintenance + self.switching + self.gas + self.purchased_power
    }
}

/// Recomputes the objective of `s` term by term.
pub fn evaluate_cost(inst: &CogenInstance, s: &CogenSchedule) -> Result<CostBreakdown, CogenError> {
    let hours = inst.hours();
    let unit_count = inst.units(Gen::Pow) + inst.units(Gen::Chp);
    if s.hours() != hours || s.x.len() != unit_count || s.umax.len() != inst.months.len() {
        return Err(CogenError::HorizonMismatch { expected: hours, got: s.hours() });
    }
    let scale = inst.scale();
    let mut c = CostBreakdown::default();
    for tech in Tech::ALL {
        c.capital += inst.techs.get(tech).capital_cost * s.y[tech.index()];
    }
    let yd = hourly_discount();
    let mut disc = 1.0;
    let mut month_disc = vec![0.0; inst.months.len()];
    let charge_hours: Vec<usize> = inst.months.iter().map(|m| m.charge_hour()).collect();
    let (mut maint, mut switch, mut gas, mut power) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..hours {
        disc *= yd;
        if let Some(m) = charge_hours.iter().position(|&h| h == t + 1) {
            month_disc[m] = disc;
        }
        maint += disc
            * (inst.techs.pow.maintenance * s.ptot[Gen::Pow.index()][t]
                + inst.techs.chp.maintenance * s.ptot[Gen::Chp.index()][t]);
        let mut sw = 0.0;
        for (unit, w) in s.w.iter().enumerate() {
            let g = if unit < inst.units(Gen::Pow) { Gen::Pow } else { Gen::Chp };
            sw += inst.techs.gen(g).switching_cost * w[t];
        }
        switch += disc * sw;
        gas += disc * inst.gas_price[t] * s.q[t];
        power += disc * inst.power_price[t] * s.u[t];
    }
    for (m, month) in inst.months.iter().enumerate() {
        c.peak += scale * month_disc[m] * month.peak_price * s.umax[m];
    }
    c.maintenance = scale * maint;
    c.switching = scale * switch;
    c.gas = scale * gas;
    c.purchased_power = scale * power;
    Ok(c)
}

/// Summary of a solved instance in table layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CogenSolution {
    pub days: usize,
    /// Bat, Boil, Chp, Pow, Stor.
    pub first_stage: [i64; 5],
    pub objective: f64,
    pub breakdown: CostBreakdown,
    pub time_s: f64,
    pub nodes: u64,
    pub simplex_iters: u64,
}

impl CogenSolution {
    pub const TABLE_HEADER: [&'static str; 9] = ["Days", "Time", "Nodes", "LP-iter", "Bat", "Boil", "Chp", "Pow", "Stor"];

    pub fn table_row(&self) -> Vec<String> {
        let mut row = vec![
            self.days.to_string(),
            format!("{:.3}", self.time_s),
            self.nodes.to_string(),
            self.simplex_iters.to_string(),
        ];
        row.extend(self.first_stage.iter().map(|v| v.to_string()));
        row
    }
}

/// ℓ₁ distance between two first-stage vectors.
pub fn first_stage_l1(a: &[i64; 5], b: &[i64; 5]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

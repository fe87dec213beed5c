//! Instance data: technologies, demand and price series, month structure.

use serde::{Deserialize, Serialize};

use crate::CogenError;

pub const DELTA: usize = 24;
/// Hours per year used by the discount rate.
pub const DISCOUNT_YEAR_HOURS: f64 = 8760.0;
pub const ANNUAL_RATE: f64 = 0.03;

/// Hourly discount factor `Y`.
pub fn hourly_discount() -> f64 {
    1.0 - ANNUAL_RATE / DISCOUNT_YEAR_HOURS
}

/// `Y^t`.
pub fn discount(t: usize) -> f64 {
    hourly_discount().powf(t as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tech {
    Batt,
    Boil,
    Chp,
    Pow,
    Stor,
}

impl Tech {
    /// Table order: Bat, Boil, Chp, Pow, Stor.
    pub const ALL: [Tech; 5] = [Tech::Batt, Tech::Boil, Tech::Chp, Tech::Pow, Tech::Stor];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Tech::Batt => "Bat",
            Tech::Boil => "Boil",
            Tech::Chp => "Chp",
            Tech::Pow => "Pow",
            Tech::Stor => "Stor",
        }
    }
}

/// Generation technologies, the ones with on/off units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gen {
    Pow,
    Chp,
}

impl Gen {
    pub const ALL: [Gen; 2] = [Gen::Pow, Gen::Chp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tech(self) -> Tech {
        match self {
            Gen::Pow => Tech::Pow,
            Gen::Chp => Tech::Chp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    /// `C_j`, $ per unit.
    pub capital_cost: f64,
    /// `|U_j|`.
    pub max_units: usize,
    /// `M_j`, $ per kWh produced (generators only).
    #[serde(default)]
    pub maintenance: f64,
    /// `W_j`, $ per switch (generators only).
    #[serde(default)]
    pub switching_cost: f64,
    /// Per-unit capacity: kWh for battery and storage, kW for the boiler.
    #[serde(default)]
    pub capacity: f64,
    #[serde(default)]
    pub r_min: f64,
    #[serde(default)]
    pub r_max: f64,
    #[serde(default)]
    pub eff_power: f64,
    #[serde(default)]
    pub eff_heat: f64,
}

impl Technology {
    fn plain(capital_cost: f64, max_units: usize, capacity: f64) -> Self {
        Self {
            capital_cost,
            max_units,
            maintenance: 0.0,
            switching_cost: 0.0,
            capacity,
            r_min: 0.0,
            r_max: 0.0,
            eff_power: 0.0,
            eff_heat: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechSet {
    pub batt: Technology,
    pub boil: Technology,
    pub chp: Technology,
    pub pow: Technology,
    pub stor: Technology,
}

impl TechSet {
    pub fn get(&self, t: Tech) -> &Technology {
        match t {
            Tech::Batt => &self.batt,
            Tech::Boil => &self.boil,
            Tech::Chp => &self.chp,
            Tech::Pow => &self.pow,
            Tech::Stor => &self.stor,
        }
    }

    pub fn gen(&self, g: Gen) -> &Technology {
        self.get(g.tech())
    }

    /// Heat recovered per kWh of CHP power, `E^Q / E^P`.
    pub fn heat_ratio(&self) -> f64 {
        self.chp.eff_heat / self.chp.eff_power
    }

    /// Technology parameters sized from the building's peak demands.
    ///
    /// Generator units are a quarter of the power peak each; the boiler
    /// fleet at full build covers 1.5 times the heat peak.
    pub fn sized(peak_power: f64, peak_heat: f64, pow_units: usize, chp_units: usize) -> Self {
        let unit = (0.25 * peak_power).max(1.0);
        let gen = |capital_per_kw: f64, max_units: usize, eff_power: f64, eff_heat: f64| Technology {
            capital_cost: capital_per_kw * unit,
            max_units,
            maintenance: 0.10,
            switching_cost: 0.02 * unit,
            capacity: 0.0,
            r_min: 0.3 * unit,
            r_max: unit,
            eff_power,
            eff_heat,
        };
        Self {
            batt: Technology::plain(250.0 * 0.5 * peak_power, 3, 0.5 * peak_power),
            boil: Technology::plain(60.0 * 0.5 * peak_heat, 3, 0.5 * peak_heat),
            chp: gen(1800.0, chp_units, 0.45, 0.35),
            pow: gen(1500.0, pow_units, 0.5, 0.0),
            stor: Technology::plain(15.0 * 0.5 * peak_heat, 6, 0.5 * peak_heat),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Month {
    /// First day of the month within the horizon (0-based).
    pub start_day: usize,
    pub days: usize,
    /// `P_m^max`, $ per kW.
    pub peak_price: f64,
}

impl Month {
    pub fn hours(&self) -> std::ops::Range<usize> {
        self.start_day * DELTA..(self.start_day + self.days) * DELTA
    }

    /// `t_m`, the 1-based last hour of the month.
    pub fn charge_hour(&self) -> usize {
        (self.start_day + self.days) * DELTA
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CogenInstance {
    pub name: String,
    pub techs: TechSet,
    /// `L^P`, battery loss per hour.
    pub loss_power: f64,
    /// `L^Q`, storage loss per hour.
    pub loss_heat: f64,
    /// `H`, lifetime in hours.
    pub lifetime_hours: f64,
    pub power_demand: Vec<f64>,
    pub heat_demand: Vec<f64>,
    pub power_price: Vec<f64>,
    pub gas_price: Vec<f64>,
    pub months: Vec<Month>,
}

impl CogenInstance {
    pub fn hours(&self) -> usize {
        self.power_demand.len()
    }

    pub fn days(&self) -> usize {
        self.hours() / DELTA
    }

    /// `H / T`.
    pub fn scale(&self) -> f64 {
        self.lifetime_hours / self.hours() as f64
    }

    pub fn units(&self, g: Gen) -> usize {
        self.techs.gen(g).max_units
    }

    /// Month index of every day.
    pub fn month_of_day(&self) -> Vec<usize> {
        let mut out = vec![0; self.days()];
        for (m, month) in self.months.iter().enumerate() {
            for d in month.start_day..month.start_day + month.days {
                out[d] = m;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CogenError> {
        let bad = |msg: String| Err(CogenError::InvalidInstance(msg));
        let t = self.hours();
        if t == 0 || t % DELTA != 0 {
            return bad(format!("horizon of {t} hours is not a positive multiple of {DELTA}"));
        }
        for (name, s) in [("heat_demand", &self.heat_demand), ("power_price", &self.power_price), ("gas_price", &self.gas_price)] {
            if s.len() != t {
                return bad(format!("{name} has {} entries, expected {t}", s.len()));
            }
        }
        for (name, s) in [("power_demand", &self.power_demand), ("heat_demand", &self.heat_demand)] {
            if let Some(h) = s.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return bad(format!("{name} at hour {h} is {}", s[h]));
            }
        }
        for g in Gen::ALL {
            let tech = self.techs.gen(g);
            if tech.r_min > tech.r_max || tech.r_min < 0.0 {
                return bad(format!("{g:?}: need 0 <= r_min <= r_max"));
            }
        }
        if self.techs.chp.max_units > 0 && self.techs.chp.eff_power <= 0.0 {
            return bad("chp needs a positive power efficiency".into());
        }
        for (name, l) in [("loss_power", self.loss_power), ("loss_heat", self.loss_heat)] {
            if !(0.0..1.0).contains(&l) {
                return bad(format!("{name} = {l} is outside [0, 1)"));
            }
        }
        if self.lifetime_hours <= 0.0 {
            return bad("lifetime must be positive".into());
        }
        let mut next = 0;
        for m in &self.months {
            if m.start_day != next || m.days == 0 {
                return bad(format!("months must tile the horizon; month starting at day {} breaks it", m.start_day));
            }
            next += m.days;
        }
        if next != self.days() {
            return bad(format!("months cover {next} days of {}", self.days()));
        }
        Ok(())
    }

    /// Sub-instance over days `range`, keeping the lifetime. Months are cut
    /// to the range.
    pub fn slice_days(&self, range: std::ops::Range<usize>) -> CogenInstance {
        let hours = range.start * DELTA..range.end * DELTA;
        let months = self
            .months
            .iter()
            .filter_map(|m| {
                let s = m.start_day.max(range.start);
                let e = (m.start_day + m.days).min(range.end);
                (s < e).then(|| Month { start_day: s - range.start, days: e - s, peak_price: m.peak_price })
            })
            .collect();
        CogenInstance {
            name: format!("{}[{}..{}]", self.name, range.start, range.end),
            techs: self.techs.clone(),
            loss_power: self.loss_power,
            loss_heat: self.loss_heat,
            lifetime_hours: self.lifetime_hours,
            power_demand: self.power_demand[hours.clone()].to_vec(),
            heat_demand: self.heat_demand[hours.clone()].to_vec(),
            power_price: self.power_price[hours.clone()].to_vec(),
            gas_price: self.gas_price[hours].to_vec(),
            months,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CogenError> {
        let inst: CogenInstance = serde_json::from_str(text).map_err(|e| CogenError::Parse(e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }
}

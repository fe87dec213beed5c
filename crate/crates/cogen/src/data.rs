//! Synthetic hourly demand series for the five building types.
//!
//! A year is 52 weeks. Each week blends a winter and a summer week built
//! from base day profiles, then every hour gets multiplicative Gaussian
//! noise.

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::instance::{CogenInstance, Month, TechSet, DELTA};
use crate::CogenError;

pub const WEEK_HOURS: usize = 7 * DELTA;
pub const YEAR_WEEKS: usize = 52;
pub const YEAR_DAYS: usize = 7 * YEAR_WEEKS;
pub const YEAR_HOURS: usize = YEAR_DAYS * DELTA;
/// Identifier written to metadata: ChaCha8 seeded from the run seed, one
/// stream per year.
pub const PRNG_ID: &str = "chacha8:seed_from_u64:stream=year";
pub const FIXTURE_VERSION: &str = "synthetic-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildingType {
    Office,
    Supermarket,
    Restaurant,
    Hospital,
    Retail,
}

impl BuildingType {
    pub const ALL: [BuildingType; 5] = [
        BuildingType::Office,
        BuildingType::Supermarket,
        BuildingType::Restaurant,
        BuildingType::Hospital,
        BuildingType::Retail,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuildingType::Office => "office",
            BuildingType::Supermarket => "supermarket",
            BuildingType::Restaurant => "restaurant",
            BuildingType::Hospital => "hospital",
            BuildingType::Retail => "retail",
        }
    }

    /// Daily scaling factors, Monday first.
    pub fn weekly_factors(self) -> [f64; 7] {
        match self {
            BuildingType::Office => [1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.25],
            BuildingType::Supermarket => [0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0],
            BuildingType::Restaurant => [0.25, 0.25, 0.5, 0.5, 1.0, 1.0, 0.5],
            BuildingType::Hospital => [1.0; 7],
            BuildingType::Retail => [0.25, 0.5, 0.5, 1.0, 1.0, 0.25, 0.25],
        }
    }
}

impl std::fmt::Display for BuildingType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuildingType {
    type Err = CogenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuildingType::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CogenError::UnknownBuilding(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Summer,
    Winter,
}

/// Hourly series of electricity and heat demand, kWh.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DemandSeries {
    pub elec: Vec<f64>,
    pub heat: Vec<f64>,
}

impl DemandSeries {
    pub fn len(&self) -> usize {
        self.elec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elec.is_empty()
    }

    pub fn extend(&mut self, other: &DemandSeries) {
        self.elec.extend_from_slice(&other.elec);
        self.heat.extend_from_slice(&other.heat);
    }

    pub fn peaks(&self) -> (f64, f64) {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        (max(&self.elec), max(&self.heat))
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), CogenError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "elec_kwh", "heat_kwh"])?;
        for (t, (e, q)) in self.elec.iter().zip(&self.heat).enumerate() {
            w.write_record([t.to_string(), e.to_string(), q.to_string()])?;
        }
        w.flush().map_err(|e| CogenError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self, CogenError> {
        let mut r = csv::Reader::from_reader(input);
        let mut out = DemandSeries::default();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64, CogenError> {
                rec.get(k)
                    .ok_or_else(|| CogenError::Parse(format!("row {}: missing column {k}", i + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| CogenError::Parse(format!("row {}: {e}", i + 1)))
            };
            out.elec.push(field(1)?);
            out.heat.push(field(2)?);
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, CogenError> {
        let file = std::fs::File::open(path).map_err(|e| CogenError::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(file).map_err(|e| CogenError::Io(format!("{}: {e}", path.display())))
    }
}

/// Base summer and winter day for one building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingProfile {
    pub building: BuildingType,
    pub summer: DemandSeries,
    pub winter: DemandSeries,
}

macro_rules! fixture {
    ($name:literal) => {
        (
            include_str!(concat!("../fixtures/", $name, "_summer.csv")),
            include_str!(concat!("../fixtures/", $name, "_winter.csv")),
        )
    };
}

impl BuildingProfile {
    /// Bundled synthetic day profiles.
    pub fn fixture(building: BuildingType) -> Self {
        let (summer, winter) = match building {
            BuildingType::Office => fixture!("office"),
            BuildingType::Supermarket => fixture!("supermarket"),
            BuildingType::Restaurant => fixture!("restaurant"),
            BuildingType::Hospital => fixture!("hospital"),
            BuildingType::Retail => fixture!("retail"),
        };
        let parse = |s: &str| DemandSeries::read_csv(s.as_bytes()).expect("bundled fixture parses");
        let p = Self { building, summer: parse(summer), winter: parse(winter) };
        p.validate().expect("bundled fixture is valid");
        p
    }

    pub fn from_files(building: BuildingType, summer: &Path, winter: &Path) -> Result<Self, CogenError> {
        let p = Self { building, summer: DemandSeries::load(summer)?, winter: DemandSeries::load(winter)? };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CogenError> {
        for (name, day) in [("summer", &self.summer), ("winter", &self.winter)] {
            if day.elec.len() != DELTA || day.heat.len() != DELTA {
                return Err(CogenError::InvalidInstance(format!("{name} day must have {DELTA} hours")));
            }
            if day.elec.iter().chain(&day.heat).any(|v| !v.is_finite() || *v < 0.0) {
                return Err(CogenError::InvalidInstance(format!("{name} day has a negative demand")));
            }
        }
        Ok(())
    }

    pub fn day(&self, season: Season) -> &DemandSeries {
        match season {
            Season::Summer => &self.summer,
            Season::Winter => &self.winter,
        }
    }

    /// Peak hourly electricity and heat over both base days.
    pub fn peaks(&self) -> (f64, f64) {
        let (se, sq) = self.summer.peaks();
        let (we, wq) = self.winter.peaks();
        (se.max(we), sq.max(wq))
    }
}

/// Monday-first week: base day scaled by the weekly factors.
pub fn build_week(profile: &BuildingProfile, season: Season) -> DemandSeries {
    let base = profile.day(season);
    let mut out = DemandSeries::default();
    for f in profile.building.weekly_factors() {
        out.elec.extend(base.elec.iter().map(|v| v * f));
        out.heat.extend(base.heat.iter().map(|v| v * f));
    }
    out
}

/// Piecewise-linear winter weight per week; 1 is pure winter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonWeights {
    pub knots: Vec<(f64, f64)>,
}

impl Default for SeasonWeights {
    fn default() -> Self {
        Self { knots: vec![(0.0, 1.0), (13.0, 1.0), (24.0, 0.0), (37.0, 0.0), (44.0, 1.0), (52.0, 1.0)] }
    }
}

impl SeasonWeights {
    /// Weight of week `i` (1-based).
    pub fn weight(&self, i: usize) -> f64 {
        let x = i as f64;
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        k[k.len() - 1].1
    }
}

fn blend_year(profile: &BuildingProfile, weights: &SeasonWeights) -> DemandSeries {
    let winter = build_week(profile, Season::Winter);
    let summer = build_week(profile, Season::Summer);
    let mut out = DemandSeries { elec: Vec::with_capacity(YEAR_HOURS), heat: Vec::with_capacity(YEAR_HOURS) };
    for i in 1..=YEAR_WEEKS {
        let w = weights.weight(i);
        out.elec.extend(winter.elec.iter().zip(&summer.elec).map(|(a, b)| w * a + (1.0 - w) * b));
        out.heat.extend(winter.heat.iter().zip(&summer.heat).map(|(a, b)| w * a + (1.0 - w) * b));
    }
    out
}

fn noisy_year(profile: &BuildingProfile, weights: &SeasonWeights, noise_scale: f64, seed: u64, year: u64) -> DemandSeries {
    let mut s = blend_year(profile, weights);
    if noise_scale == 0.0 {
        return s;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(year);
    for (e, q) in s.elec.iter_mut().zip(s.heat.iter_mut()) {
        let ze: f64 = rng.sample(StandardNormal);
        let zq: f64 = rng.sample(StandardNormal);
        *e = (*e + noise_scale * *e * ze).max(0.0);
        *q = (*q + noise_scale * *q * zq).max(0.0);
    }
    s
}

/// One 8736-hour year.
pub fn build_year(profile: &BuildingProfile, weights: &SeasonWeights, noise_scale: f64, seed: u64) -> DemandSeries {
    noisy_year(profile, weights, noise_scale, seed, 0)
}

/// `years` consecutive years, each with its own noise stream.
pub fn build_multi_year(
    profile: &BuildingProfile,
    weights: &SeasonWeights,
    years: usize,
    noise_scale: f64,
    seed: u64,
) -> DemandSeries {
    let mut out = DemandSeries::default();
    for y in 0..years {
        out.extend(&noisy_year(profile, weights, noise_scale, seed, y as u64));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSchedule {
    pub power_price: f64,
    pub gas_price: f64,
    pub summer_peak: f64,
    pub winter_peak: f64,
    /// 0-based month indices charged the summer peak price.
    pub summer_months: Vec<usize>,
}

impl Default for PricingSchedule {
    fn default() -> Self {
        Self { power_price: 0.12, gas_price: 0.049, summer_peak: 14.2, winter_peak: 11.36, summer_months: vec![5, 6, 7, 8] }
    }
}

impl PricingSchedule {
    pub fn peak_price(&self, month: usize) -> f64 {
        if self.summer_months.contains(&(month % 12)) {
            self.summer_peak
        } else {
            self.winter_peak
        }
    }
}

/// Month lengths of the 364-day year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    pub month_days: Vec<usize>,
}

impl Default for Calendar {
    fn default() -> Self {
        Self { month_days: vec![31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 30] }
    }
}

impl Calendar {
    pub fn year_days(&self) -> usize {
        self.month_days.iter().sum()
    }

    /// Calendar month of absolute day `d`.
    pub fn month_of(&self, d: usize) -> usize {
        let mut r = d % self.year_days();
        for (m, &n) in self.month_days.iter().enumerate() {
            if r < n {
                return m;
            }
            r -= n;
        }
        unreachable!("day within year")
    }

    /// Months covering absolute days `start..start + days`, cut to the range
    /// and re-based to day 0.
    pub fn months(&self, start: usize, days: usize, pricing: &PricingSchedule) -> Vec<Month> {
        let mut out: Vec<Month> = Vec::new();
        let mut prev = usize::MAX;
        let mut prev_year = usize::MAX;
        for d in start..start + days {
            let (m, y) = (self.month_of(d), d / self.year_days());
            if m == prev && y == prev_year {
                out.last_mut().expect("open month").days += 1;
            } else {
                out.push(Month { start_day: d - start, days: 1, peak_price: pricing.peak_price(m) });
                prev = m;
                prev_year = y;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub building: BuildingType,
    pub years: usize,
    pub seed: u64,
    pub noise_scale: f64,
    pub prng: String,
    pub fixture_version: String,
    pub hours: usize,
}

/// Options turning a demand series into an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOptions {
    pub start_day: usize,
    pub days: usize,
    pub pow_units: usize,
    pub chp_units: usize,
    pub lifetime_years: f64,
    pub loss_power: f64,
    pub loss_heat: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        Self {
            start_day: 0,
            days: 7,
            pow_units: 1,
            chp_units: 2,
            lifetime_years: 10.0,
            loss_power: 0.001,
            loss_heat: 0.01,
            noise_scale: 0.02,
            seed: 7,
        }
    }
}

/// Cuts days `opts.start_day..+opts.days` from `series` and attaches
/// technologies sized from the base profile, default prices and months.
pub fn instance_from_series(
    name: &str,
    profile: &BuildingProfile,
    series: &DemandSeries,
    opts: &InstanceOptions,
    pricing: &PricingSchedule,
    calendar: &Calendar,
) -> Result<CogenInstance, CogenError> {
    let hours = opts.start_day * DELTA..(opts.start_day + opts.days) * DELTA;
    if hours.end > series.len() {
        return Err(CogenError::InvalidInstance(format!(
            "series has {} hours, need {}",
            series.len(),
            hours.end
        )));
    }
    let (peak_power, peak_heat) = profile.peaks();
    let t = hours.len();
    let inst = CogenInstance {
        name: name.to_string(),
        techs: TechSet::sized(peak_power, peak_heat, opts.pow_units, opts.chp_units),
        loss_power: opts.loss_power,
        loss_heat: opts.loss_heat,
        lifetime_hours: opts.lifetime_years * crate::instance::DISCOUNT_YEAR_HOURS,
        power_demand: series.elec[hours.clone()].to_vec(),
        heat_demand: series.heat[hours].to_vec(),
        power_price: vec![pricing.power_price; t],
        gas_price: vec![pricing.gas_price; t],
        months: calendar.months(opts.start_day, opts.days, pricing),
    };
    inst.validate()?;
    Ok(inst)
}

/// Instance for a bundled building: enough noised years to cover the
/// requested days, default prices and calendar.
pub fn building_instance(building: BuildingType, opts: &InstanceOptions) -> Result<CogenInstance, CogenError> {
    let profile = BuildingProfile::fixture(building);
    let years = (opts.start_day + opts.days).div_ceil(YEAR_DAYS).max(1);
    let series = build_multi_year(&profile, &SeasonWeights::default(), years, opts.noise_scale, opts.seed);
    let name = format!("{}-{}d", building.name(), opts.days);
    instance_from_series(&name, &profile, &series, opts, &PricingSchedule::default(), &Calendar::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load_with_expected_magnitudes() {
        for (b, want) in [
            (BuildingType::Office, 1000.0),
            (BuildingType::Hospital, 1500.0),
            (BuildingType::Restaurant, 80.0),
            (BuildingType::Retail, 115.0),
            (BuildingType::Supermarket, 500.0),
        ] {
            let (peak, _) = BuildingProfile::fixture(b).summer.peaks();
            assert!((peak - want).abs() / want < 0.05, "{b}: {peak}");
        }
    }

    #[test]
    fn calendar_months() {
        let c = Calendar::default();
        assert_eq!(c.year_days(), YEAR_DAYS);
        assert_eq!(c.month_of(0), 0);
        assert_eq!(c.month_of(31), 1);
        assert_eq!(c.month_of(YEAR_DAYS + 31), 1);
        let months = c.months(20, 20, &PricingSchedule::default());
        assert_eq!(months.len(), 2);
        assert_eq!((months[0].start_day, months[0].days), (0, 11));
        assert_eq!((months[1].start_day, months[1].days), (11, 9));
    }

    #[test]
    fn building_names_round_trip() {
        for b in BuildingType::ALL {
            assert_eq!(b.name().parse::<BuildingType>().unwrap(), b);
        }
        assert!("castle".parse::<BuildingType>().is_err());
    }
}

//! Experiment settings: TOML file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cogen::data::BuildingType;
use cogen::profiles::{SelectionConfig, Strategy};
use serde::{Deserialize, Serialize};
use twolevel::backend::SolveSettings;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    Semi,
    TwoLevel,
    TwoLevelNoWarmstart,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Semi => "semi",
            Variant::TwoLevel => "two-level",
            Variant::TwoLevelNoWarmstart => "two-level-no-warmstart",
        }
    }

    pub fn needs_profiles(self) -> bool {
        self != Variant::Full
    }
}

/// Values a config file may set. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub buildings: Option<Vec<String>>,
    pub days: Option<usize>,
    pub start_day: Option<usize>,
    pub years: Option<usize>,
    pub seed: Option<u64>,
    pub noise: Option<f64>,
    pub pow_units: Option<usize>,
    pub chp_units: Option<usize>,
    pub window_days: Option<usize>,
    pub variants: Option<Vec<Variant>>,
    pub preset: Option<String>,
    pub time_limit_s: Option<f64>,
    pub rel_gap: Option<f64>,
    pub window_time_limit_s: Option<f64>,
    pub onoff: Option<usize>,
    pub production: Option<String>,
    pub utility: Option<String>,
    pub boiler: Option<String>,
    pub battery: Option<String>,
    pub storage: Option<String>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Field-wise `self` where set, `other` otherwise.
    pub fn or(self, other: FileConfig) -> FileConfig {
        macro_rules! pick {
            ($($f:ident),*) => { FileConfig { $($f: self.$f.or(other.$f)),* } };
        }
        pick!(
            buildings, days, start_day, years, seed, noise, pow_units, chp_units, window_days, variants, preset,
            time_limit_s, rel_gap, window_time_limit_s, onoff, production, utility, boiler, battery, storage, out
        )
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub buildings: Vec<BuildingType>,
    pub days: usize,
    pub start_day: usize,
    pub years: usize,
    pub seed: u64,
    pub noise: f64,
    pub pow_units: usize,
    pub chp_units: usize,
    pub window_days: usize,
    pub variants: Vec<Variant>,
    pub preset: String,
    pub settings: SolveSettings,
    pub window_settings: SolveSettings,
    pub selection: SelectionConfig,
    pub out: PathBuf,
}

fn parse_buildings(names: &[String]) -> Result<Vec<BuildingType>, CliError> {
    let mut out = Vec::new();
    for n in names {
        if n.eq_ignore_ascii_case("all") {
            out.extend(BuildingType::ALL);
        } else {
            out.push(n.parse::<BuildingType>().map_err(|e| CliError::Usage(e.to_string()))?);
        }
    }
    out.dedup();
    Ok(out)
}

fn strategy(value: Option<String>, default: Strategy) -> Result<Strategy, CliError> {
    match value {
        Some(s) => s.parse().map_err(|e: cogen::CogenError| CliError::Usage(e.to_string())),
        None => Ok(default),
    }
}

impl ExperimentSpec {
    pub fn resolve(c: FileConfig) -> Result<Self, CliError> {
        let buildings = parse_buildings(&c.buildings.unwrap_or_else(|| vec!["all".into()]))?;
        let days = c.days.unwrap_or(7);
        if days == 0 {
            return Err(CliError::Usage("days must be positive".into()));
        }
        if days % 7 != 0 {
            log::warn!("a {days}-day horizon is not a whole number of weeks");
        }
        let years = c.years.unwrap_or(1);
        if years == 0 {
            return Err(CliError::Usage("years must be positive".into()));
        }
        let window_days = c.window_days.unwrap_or(4);
        if window_days == 0 {
            return Err(CliError::Usage("window must be at least one day".into()));
        }
        let noise = c.noise.unwrap_or(0.02);
        if !(noise >= 0.0) {
            return Err(CliError::Usage("noise must be non-negative".into()));
        }
        let preset = c.preset.unwrap_or_else(|| "desk".into());
        let mut settings =
            SolveSettings::preset(&preset).ok_or_else(|| CliError::Usage(format!("unknown preset `{preset}`; use desk or paper")))?;
        if let Some(t) = c.time_limit_s {
            if !(t > 0.0) {
                return Err(CliError::Usage("time limit must be positive".into()));
            }
            settings = settings.with_time_limit(t);
        }
        if let Some(g) = c.rel_gap {
            if !(0.0..1.0).contains(&g) {
                return Err(CliError::Usage("gap must lie in [0, 1)".into()));
            }
            settings = settings.with_gap(g);
        }
        let window_settings = settings.clone().with_time_limit(c.window_time_limit_s.unwrap_or(60.0));
        let d = SelectionConfig::default();
        let selection = SelectionConfig {
            onoff: c.onoff.unwrap_or(d.onoff),
            production: strategy(c.production, d.production)?,
            utility: strategy(c.utility, d.utility)?,
            boiler: strategy(c.boiler, d.boiler)?,
            battery: strategy(c.battery, d.battery)?,
            storage: strategy(c.storage, d.storage)?,
        };
        Ok(Self {
            buildings,
            days,
            start_day: c.start_day.unwrap_or(0),
            years,
            seed: c.seed.unwrap_or(7),
            noise,
            pow_units: c.pow_units.unwrap_or(1),
            chp_units: c.chp_units.unwrap_or(2),
            window_days,
            variants: c.variants.unwrap_or_else(|| vec![Variant::Full]),
            preset,
            settings,
            window_settings,
            selection,
            out: c.out.unwrap_or_else(|| PathBuf::from("runs")),
        })
    }

    pub fn instance_options(&self) -> cogen::data::InstanceOptions {
        cogen::data::InstanceOptions {
            start_day: self.start_day,
            days: self.days,
            pow_units: self.pow_units,
            chp_units: self.chp_units,
            noise_scale: self.noise,
            seed: self.seed,
            ..Default::default()
        }
    }
}

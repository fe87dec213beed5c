//! Subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use cogen::data::{build_multi_year, BuildingProfile, BuildingType, SeasonWeights, SeriesMetadata, YEAR_HOURS};
use cogen::data::{building_instance, DemandSeries, FIXTURE_VERSION, PRNG_ID};
use cogen::profiles::{validate_pool, CogenLibrary, MovingHorizonConfig};
use cogen::schedule::CogenSolution;
use cogen::solve::{generate_library, lift_and_check, solve_full, solve_semi_direct, solve_two_level_cogen, ProfileConfig};
use cogen::{build_semi_cogen, evaluate_cost, CogenInstance};
use twolevel::algorithm::CutLoopConfig;
use twolevel::backend::{by_name, Backend};

use crate::config::{ExperimentSpec, FileConfig, Variant};
use crate::report::*;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "twolevel", version, about = "Two-level cogeneration design experiments")]
pub struct Cli {
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write noised multi-year demand series per building.
    GenerateData(DataArgs),
    /// Build a profile pool and library with the moving horizon.
    Profiles(ProfileArgs),
    /// Solve one or more model variants per building.
    Solve(SolveArgs),
    /// Compare first-stage decisions of saved reports.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with defaults; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "TWOLEVEL_BACKEND", default_value = "highs")]
    pub backend: String,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Building name or `all`; repeatable.
    #[arg(long = "building")]
    pub buildings: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HorizonArgs {
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub start_day: Option<usize>,
    #[arg(long)]
    pub pow_units: Option<usize>,
    #[arg(long)]
    pub chp_units: Option<usize>,
    /// desk (300 s) or paper (3 h).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub gap: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SelectionArgs {
    /// Moving-horizon window in days.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub window_time_limit: Option<f64>,
    /// On/off profiles kept per generator.
    #[arg(long)]
    pub onoff: Option<usize>,
    /// Strategy such as `all`, `extremes`, `kmeans:3` or `uniform:4`.
    #[arg(long)]
    pub production: Option<String>,
    #[arg(long)]
    pub utility: Option<String>,
    #[arg(long)]
    pub boiler: Option<String>,
    #[arg(long)]
    pub battery: Option<String>,
    #[arg(long)]
    pub storage: Option<String>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub years: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub horizon: HorizonArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Model variants to solve; repeatable.
    #[arg(long = "variant", value_enum)]
    pub variants: Vec<Variant>,
    /// Saved library to use instead of generating one. Single building only.
    #[arg(long)]
    pub library: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Report files written by `solve`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn file_config(path: &Option<PathBuf>) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn non_empty<T>(v: Vec<T>) -> Option<Vec<T>> {
    if v.is_empty() {
        None
    } else {
        Some(v)
    }
}

fn flags(common: &Common, horizon: Option<&HorizonArgs>, selection: Option<&SelectionArgs>) -> FileConfig {
    let mut f = FileConfig {
        buildings: non_empty(common.buildings.clone()),
        seed: common.seed,
        noise: common.noise,
        out: common.out.clone(),
        ..Default::default()
    };
    if let Some(h) = horizon {
        f.days = h.days;
        f.start_day = h.start_day;
        f.pow_units = h.pow_units;
        f.chp_units = h.chp_units;
        f.preset = h.preset.clone();
        f.time_limit_s = h.time_limit;
        f.rel_gap = h.gap;
    }
    if let Some(s) = selection {
        f.window_days = s.window;
        f.window_time_limit_s = s.window_time_limit;
        f.onoff = s.onoff;
        f.production = s.production.clone();
        f.utility = s.utility.clone();
        f.boiler = s.boiler.clone();
        f.battery = s.battery.clone();
        f.storage = s.storage.clone();
    }
    f
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn backend(name: &str) -> Result<Box<dyn Backend>, CliError> {
    by_name(name).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenerateData(a) => generate_data(a),
        Command::Profiles(a) => profiles(a),
        Command::Solve(a) => solve(a),
        Command::Compare(a) => compare_reports(a),
    }
}

pub fn generate_data(a: DataArgs) -> Result<(), CliError> {
    let mut f = flags(&a.common, None, None);
    f.years = a.years;
    let spec = ExperimentSpec::resolve(f.or(file_config(&a.common.config)?))?;
    create_dir(&spec.out)?;
    for &b in &spec.buildings {
        let profile = BuildingProfile::fixture(b);
        let series = build_multi_year(&profile, &SeasonWeights::default(), spec.years, spec.noise, spec.seed);
        for y in 0..spec.years {
            let hours = y * YEAR_HOURS..(y + 1) * YEAR_HOURS;
            let year = DemandSeries { elec: series.elec[hours.clone()].to_vec(), heat: series.heat[hours].to_vec() };
            let stem = format!("{}_year{}", b.name(), y + 1);
            let mut bytes = Vec::new();
            year.write_csv(&mut bytes)?;
            write_atomic(&spec.out.join(format!("{stem}.csv")), &bytes)?;
            let meta = SeriesMetadata {
                building: b,
                years: spec.years,
                seed: spec.seed,
                noise_scale: spec.noise,
                prng: PRNG_ID.to_string(),
                fixture_version: FIXTURE_VERSION.to_string(),
                hours: year.len(),
            };
            write_json(&spec.out.join(format!("{stem}.json")), &meta)?;
        }
        log::info!("{}: {} years written", b.name(), spec.years);
    }
    let backend_name = a.common.backend.clone();
    write_json(&spec.out.join("manifest.json"), &Manifest::new("generate-data", &spec, backend_name))
}

fn profile_config(spec: &ExperimentSpec) -> ProfileConfig {
    ProfileConfig {
        horizon: MovingHorizonConfig { window_days: spec.window_days, settings: spec.window_settings.clone() },
        selection: spec.selection.clone(),
    }
}

fn instance(spec: &ExperimentSpec, b: BuildingType) -> Result<CogenInstance, CliError> {
    Ok(building_instance(b, &spec.instance_options())?)
}

pub fn profiles(a: ProfileArgs) -> Result<(), CliError> {
    let f = flags(&a.common, Some(&a.horizon), Some(&a.selection));
    let spec = ExperimentSpec::resolve(f.or(file_config(&a.common.config)?))?;
    let backend = backend(&a.common.backend)?;
    create_dir(&spec.out)?;
    let cfg = profile_config(&spec);
    for &b in &spec.buildings {
        let inst = instance(&spec, b)?;
        let (pool, lib) = generate_library(&inst, &inst, &cfg, backend.as_ref())?;
        let check = validate_pool(&pool);
        if !check.is_clean() {
            log::warn!("{}: {} pool entries fail validation", b.name(), check.failures.len());
        }
        let dir = spec.out.join(b.name());
        create_dir(&dir)?;
        write_atomic(&dir.join("pool.json"), pool.to_json().as_bytes())?;
        write_atomic(&dir.join("library.json"), lib.to_json().as_bytes())?;
        write_json(&dir.join("instance.json"), &inst)?;
        write_json(&dir.join("validation.json"), &check)?;
        log::info!("{}: {} snapshots, {} failed windows", b.name(), pool.snapshots, pool.failed_windows.len());
    }
    write_json(&spec.out.join("manifest.json"), &Manifest::new("profiles", &spec, backend.name()))
}

/// Solves `variant` for `inst`, with `lib` for the profile-based variants.
pub fn solve_variant(
    building: BuildingType,
    inst: &CogenInstance,
    lib: Option<&CogenLibrary>,
    variant: Variant,
    spec: &ExperimentSpec,
    backend: &dyn Backend,
) -> Result<RunReport, CliError> {
    let base = |objective: f64, solution: CogenSolution, cut_loop| RunReport {
        building,
        days: spec.days,
        start_day: spec.start_day,
        variant,
        objective,
        solution,
        cut_loop,
    };
    if variant == Variant::Full {
        let out = solve_full(inst, backend, &spec.settings)?;
        return Ok(base(out.solution.objective, out.solution, None));
    }
    let lib = lib.ok_or_else(|| CliError::Usage(format!("{} needs a profile library", variant.label())))?;
    match variant {
        Variant::Semi => {
            let out = solve_semi_direct(inst, lib, backend, &spec.settings)?;
            let index = build_semi_cogen(inst, lib)?.index;
            let lifted = lift_and_check(inst, lib, &index, &out.values)?;
            let solution = CogenSolution {
                days: inst.days(),
                first_stage: lifted.schedule.first_stage(),
                objective: out.objective,
                breakdown: evaluate_cost(inst, &lifted.schedule)?,
                time_s: out.time_s,
                nodes: out.outcome.stats.nodes,
                simplex_iters: out.outcome.stats.simplex_iterations,
            };
            Ok(base(out.objective, solution, None))
        }
        _ => {
            let config = CutLoopConfig {
                milp_time_limit_s: spec.settings.time_limit_s,
                milp_rel_gap: spec.settings.rel_gap,
                use_lp_warm_start: variant == Variant::TwoLevel,
                ..Default::default()
            };
            let out = solve_two_level_cogen(inst, lib, backend, &config)?;
            let stats = CutLoopStats {
                first_milp_objective: out.outcome.first_milp_objective,
                lp_rounds: out.outcome.lp_rounds,
                milp_solves: out.outcome.milp_solves,
                lp_time_s: out.outcome.lp_time_s,
                milp_time_s: out.outcome.milp_time_s,
                rows_added: out.outcome.rows_added,
                termination: out.outcome.termination,
                lifted_violation: out.lifted.max_violation,
                history: out.outcome.history,
            };
            Ok(base(out.outcome.objective, out.solution, Some(stats)))
        }
    }
}

pub fn solve(a: SolveArgs) -> Result<(), CliError> {
    let mut f = flags(&a.common, Some(&a.horizon), Some(&a.selection));
    f.variants = non_empty(a.variants.clone());
    let spec = ExperimentSpec::resolve(f.or(file_config(&a.common.config)?))?;
    let backend = backend(&a.common.backend)?;
    let saved = match &a.library {
        Some(p) => {
            if spec.buildings.len() != 1 {
                return Err(CliError::Usage("--library applies to exactly one building".into()));
            }
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Some(CogenLibrary::from_json(&text)?)
        }
        None => None,
    };
    create_dir(&spec.out)?;
    let mut failed = Vec::new();
    for &b in &spec.buildings {
        let inst = instance(&spec, b)?;
        let dir = spec.out.join(b.name());
        create_dir(&dir)?;
        let lib = match (&saved, spec.variants.iter().any(|v| v.needs_profiles())) {
            (Some(lib), _) => Some(lib.clone()),
            (None, true) => {
                let (pool, lib) = generate_library(&inst, &inst, &profile_config(&spec), backend.as_ref())?;
                write_atomic(&dir.join("pool.json"), pool.to_json().as_bytes())?;
                write_atomic(&dir.join("library.json"), lib.to_json().as_bytes())?;
                Some(lib)
            }
            (None, false) => None,
        };
        let mut reports = Vec::new();
        for &v in &spec.variants {
            match solve_variant(b, &inst, lib.as_ref(), v, &spec, backend.as_ref()) {
                Ok(r) => {
                    log::info!("{} {}: objective {:.2} in {:.2} s", b.name(), v.label(), r.objective, r.solution.time_s);
                    write_json(&dir.join(format!("report_{}.json", v.label())), &r)?;
                    if let Some(c) = &r.cut_loop {
                        write_csv(&dir.join(format!("history_{}.csv", v.label())), &HISTORY_HEADER, &history_rows(&c.history))?;
                    }
                    reports.push(r);
                }
                Err(e @ CliError::Usage(_)) => return Err(e),
                Err(e) => {
                    log::error!("{} {}: {e}", b.name(), v.label());
                    failed.push(format!("{} {}", b.name(), v.label()));
                }
            }
        }
        let (header, rows) = table_rows(&reports);
        write_csv(&dir.join("table.csv"), &header, &rows)?;
        write_csv(&dir.join("costs.csv"), &COST_HEADER, &cost_rows(&reports))?;
        let semi = reports.iter().find(|r| r.variant == Variant::Semi);
        let two = reports.iter().find(|r| r.variant == Variant::TwoLevel);
        if let (Some(s), Some(t)) = (semi, two.and_then(|t| t.cut_loop.as_ref())) {
            let mu = MuReport::new(s.objective, t.first_milp_objective);
            log::info!("{}: mu = {:.4} ({})", b.name(), mu.mu, if mu.within_target { "within target" } else { "above target" });
            write_json(&dir.join("mu.json"), &mu)?;
        }
    }
    write_json(&spec.out.join("manifest.json"), &Manifest::new("solve", &spec, backend.name()))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Io(format!("solve failed for: {}", failed.join(", "))))
    }
}

pub fn compare_reports(a: CompareArgs) -> Result<(), CliError> {
    let reports = a.reports.iter().map(|p| RunReport::load(p)).collect::<Result<Vec<_>, _>>()?;
    let pairs = compare(&reports);
    for p in pairs.iter().filter(|p| !p.stable) {
        log::warn!("first stage of {} and {} differs by {} units", p.a, p.b, p.l1);
    }
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| vec![p.a.clone(), p.b.clone(), p.l1.to_string(), p.objective_gap.to_string(), p.stable.to_string()])
        .collect();
    let times: Vec<Vec<String>> = reports
        .iter()
        .zip(&a.reports)
        .map(|(r, path)| vec![path.display().to_string(), r.days.to_string(), r.variant.label().to_string(), r.objective.to_string(), r.solution.time_s.to_string()])
        .collect();
    let out = a.out.unwrap_or_else(|| PathBuf::from("."));
    create_dir(&out)?;
    write_csv(&out.join("compare.csv"), &["a", "b", "l1", "objective_gap", "stable"], &rows)?;
    write_csv(&out.join("compare_times.csv"), &["report", "days", "variant", "objective", "time_s"], &times)?;
    for r in &rows {
        println!("{}", r.join(","));
    }
    Ok(())
}

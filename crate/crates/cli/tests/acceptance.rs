//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. `ACCEPTANCE_ONLY=1,5,9` restricts the run to a subset.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use cogen::data::{building_instance, BuildingType, InstanceOptions};
use cogen::full::build_full;
use cogen::instance::{discount, CogenInstance};
use cogen::profiles::{validate_pool, CogenLibrary, MovingHorizonConfig};
use cogen::schedule::{evaluate_cost, first_stage_l1};
use cogen::semi::{build_semi_cogen, lift_semi};
use cogen::solve::{generate_library, lift_and_check, solve_full, solve_semi_direct, solve_two_level_cogen, ProfileConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use twolevel::algorithm::{relative_gap_mu, CutLoopConfig};
use twolevel::backend::{HighsBackend, SolveSettings};
use twolevel::model::ModelSize;
use twolevel_testkit::random::Limits;
use twolevel_testkit::suites::{bound_case, cut_loop_case, kronecker_case, lift_case};

type Outcome = Result<String, String>;

const BUILDINGS: [BuildingType; 5] = BuildingType::ALL;

fn instance(b: BuildingType, days: usize) -> CogenInstance {
    building_instance(b, &InstanceOptions { days, ..Default::default() }).expect("bundled instance")
}

fn within(limit_s: u64, started: Instant) -> Result<(), String> {
    let t = started.elapsed();
    if t > Duration::from_secs(limit_s) {
        Err(format!("took {:.1} s, limit {limit_s} s", t.as_secs_f64()))
    } else {
        Ok(())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Values shared between the solve-based criteria.
#[derive(Default)]
struct Shared {
    /// `(building, days)` to the semi-coarse first stage.
    first_stage: BTreeMap<(BuildingType, usize), [i64; 5]>,
    libraries28: BTreeMap<BuildingType, CogenLibrary>,
    /// Relative errors of cost decompositions, with a label.
    decompositions: Vec<(String, f64)>,
}

impl Shared {
    fn record_semi(&mut self, label: String, inst: &CogenInstance, lib: &CogenLibrary, values: &[f64], objective: f64) {
        let semi = build_semi_cogen(inst, lib).expect("semi model");
        let raw = lift_semi(inst, lib, &semi.index, values);
        let total = evaluate_cost(inst, &raw).expect("cost").total();
        self.decompositions.push((label, rel(total, objective)));
    }
}

fn c1_model_size() -> Outcome {
    let started = Instant::now();
    let opts = InstanceOptions { days: 3650, pow_units: 6, chp_units: 6, ..Default::default() };
    let inst = building_instance(BuildingType::Office, &opts).map_err(|e| e.to_string())?;
    let full = build_full(&inst, false).map_err(|e| e.to_string())?;
    let binaries = full.onoff_binaries();
    let assembly = started.elapsed().as_secs_f64();
    drop(full);
    drop(inst);
    if binaries != 1_051_200 {
        return Err(format!("{binaries} on/off binaries"));
    }
    if assembly > 60.0 {
        return Err(format!("assembly took {assembly:.1} s"));
    }
    let size = |days| {
        let inst = building_instance(BuildingType::Office, &InstanceOptions { days, ..Default::default() }).unwrap();
        build_full(&inst, false).unwrap().model.size()
    };
    let (a, b, year) = (size(7), size(14), size(365));
    let fields: [(&str, fn(&ModelSize) -> usize); 5] = [
        ("binary", |s| s.binary),
        ("integer", |s| s.integer),
        ("continuous", |s| s.continuous),
        ("constraints", |s| s.constraints),
        ("nonzeros", |s| s.nonzeros),
    ];
    let mut worst = 0.0_f64;
    for (name, f) in fields {
        let slope = (f(&b) as f64 - f(&a) as f64) / 7.0;
        let predicted = f(&a) as f64 + slope * (365.0 - 7.0);
        let err = rel(predicted, f(&year) as f64);
        if err > 0.02 {
            return Err(format!("{name}: one year has {} against {predicted:.0} extrapolated", f(&year)));
        }
        worst = worst.max(err);
    }
    Ok(format!("1051200 binaries in {assembly:.1} s; one-year deviation {:.3}%", 100.0 * worst))
}

fn c2_lift() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        lift_case(&mut rng, Limits::WIDE).map_err(|e| format!("case {i}: {e}"))?;
    }
    within(60, started)?;
    Ok("200 lifted points feasible with matching objectives".into())
}

fn c3_bound() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut strict = 0;
    for i in 0..50 {
        let c = bound_case(&mut rng).map_err(|e| format!("case {i}: {e}"))?;
        if c.z_semi > c.z_full + 1e-9 * c.z_full.abs().max(1.0) {
            strict += 1;
        }
    }
    within(300, started)?;
    Ok(format!("50 cases, semi-coarse strictly worse in {strict}"))
}

fn c4_cut_loop() -> Outcome {
    let started = Instant::now();
    let backend = HighsBackend::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_rounds = 0;
    for i in 0..25 {
        let c = cut_loop_case(&mut rng, &backend, 1e-6).map_err(|e| format!("case {i}: {e}"))?;
        if c.cut_rounds > c.groups {
            return Err(format!("case {i}: {} cut rounds for {} groups", c.cut_rounds, c.groups));
        }
        max_rounds = max_rounds.max(c.cut_rounds);
    }
    within(300, started)?;
    Ok(format!("25 cases, at most {max_rounds} cut rounds"))
}

fn c5_kronecker() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let d = kronecker_case(&mut rng).map_err(|e| format!("case {i}: {e}"))?;
        worst = worst.max(d);
    }
    if worst > 1e-12 {
        return Err(format!("deviation {worst:e}"));
    }
    within(10, started)?;
    Ok(format!("worst deviation {worst:e}"))
}

fn c6_pools(shared: &mut Shared) -> Outcome {
    let started = Instant::now();
    let backend = HighsBackend::new();
    let cfg = ProfileConfig { horizon: MovingHorizonConfig { window_days: 4, ..Default::default() }, ..Default::default() };
    let mut notes = Vec::new();
    for b in BUILDINGS {
        let inst = instance(b, 28);
        let (pool, lib) = generate_library(&inst, &inst, &cfg, &backend).map_err(|e| format!("{}: {e}", b.name()))?;
        let report = validate_pool(&pool);
        if !report.is_clean() {
            return Err(format!("{}: {:?}", b.name(), &report.failures[..report.failures.len().min(3)]));
        }
        if !pool.failed_windows.is_empty() {
            notes.push(format!("{} skipped windows {:?}", b.name(), pool.failed_windows));
        }
        shared.libraries28.insert(b, lib);
    }
    within(900, started)?;
    Ok(if notes.is_empty() { "5 clean pools".into() } else { format!("5 clean pools; {}", notes.join("; ")) })
}

fn c7_warm_start(shared: &mut Shared) -> Outcome {
    let backend = HighsBackend::new();
    let started = Instant::now();
    let mut passed = Vec::new();
    let mut lines = Vec::new();
    for b in BUILDINGS {
        let inst = instance(b, 7);
        let full = solve_full(&inst, &backend, &SolveSettings::desk()).map_err(|e| e.to_string())?;
        shared.decompositions.push((format!("{} full 7d", b.name()), rel(full.solution.breakdown.total(), full.solution.objective)));
        let (_, lib) = generate_library(&inst, &inst, &ProfileConfig::default(), &backend).map_err(|e| e.to_string())?;
        let semi = solve_semi_direct(&inst, &lib, &backend, &SolveSettings::desk()).map_err(|e| e.to_string())?;
        shared.record_semi(format!("{} semi 7d", b.name()), &inst, &lib, &semi.values, semi.objective);
        let index = build_semi_cogen(&inst, &lib).map_err(|e| e.to_string())?.index;
        let lifted = lift_and_check(&inst, &lib, &index, &semi.values).map_err(|e| e.to_string())?;
        shared.first_stage.insert((b, 7), lifted.schedule.first_stage());
        let run = |warm| {
            solve_two_level_cogen(&inst, &lib, &backend, &CutLoopConfig { use_lp_warm_start: warm, ..Default::default() })
        };
        let warm = run(true).map_err(|e| e.to_string())?;
        let cold = run(false).map_err(|e| e.to_string())?;
        shared.record_semi(format!("{} two-level 7d", b.name()), &inst, &lib, &warm.outcome.values, warm.outcome.objective);
        let (w, c) = (&warm.outcome, &cold.outcome);
        let ok = w.milp_solves <= c.milp_solves && w.milp_time_s <= c.milp_time_s;
        lines.push(format!(
            "{} {}/{} solves {:.2}/{:.2} s",
            b.name(),
            w.milp_solves,
            c.milp_solves,
            w.milp_time_s,
            c.milp_time_s
        ));
        if ok {
            passed.push(b.name());
        }
    }
    within(1800, started)?;
    let detail = format!("{} of 5 buildings [{}]", passed.len(), lines.join("; "));
    if passed.len() >= 3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c8_mu(shared: &mut Shared) -> Outcome {
    let backend = HighsBackend::new();
    let started = Instant::now();
    let mut good = 0;
    let mut lines = Vec::new();
    for b in BUILDINGS {
        let inst = instance(b, 14);
        let (_, lib) = generate_library(&inst, &inst, &ProfileConfig::default(), &backend).map_err(|e| e.to_string())?;
        let semi = solve_semi_direct(&inst, &lib, &backend, &SolveSettings::desk()).map_err(|e| e.to_string())?;
        shared.record_semi(format!("{} semi 14d", b.name()), &inst, &lib, &semi.values, semi.objective);
        let index = build_semi_cogen(&inst, &lib).map_err(|e| e.to_string())?.index;
        let lifted = lift_and_check(&inst, &lib, &index, &semi.values).map_err(|e| e.to_string())?;
        shared.first_stage.insert((b, 14), lifted.schedule.first_stage());
        let two = solve_two_level_cogen(&inst, &lib, &backend, &CutLoopConfig::default()).map_err(|e| e.to_string())?;
        shared.record_semi(format!("{} two-level 14d", b.name()), &inst, &lib, &two.outcome.values, two.outcome.objective);
        let mu = relative_gap_mu(semi.objective, two.outcome.first_milp_objective);
        if mu <= 0.05 {
            good += 1;
        }
        lines.push(format!("{} {mu:.4}", b.name()));
    }
    within(1800, started)?;
    let detail = format!("{good} of 5 within 0.05 [{}]", lines.join("; "));
    if good >= 4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_discount() -> Outcome {
    let (one, ten) = (discount(8760), discount(87600));
    if (one - 0.97044).abs() > 1e-5 || (ten - 0.74082).abs() > 1e-5 {
        return Err(format!("Y^8760 = {one:.6}, Y^87600 = {ten:.6}"));
    }
    Ok(format!("Y^8760 = {one:.6}, Y^87600 = {ten:.6}"))
}

fn c10_costs(shared: &Shared) -> Outcome {
    if shared.decompositions.is_empty() {
        return Err("no solved instances (run with criteria 7 and 8)".into());
    }
    let (label, worst) = shared
        .decompositions
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap();
    let detail = format!("{} solves, worst {worst:.2e} ({label})", shared.decompositions.len());
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c11_stability(shared: &mut Shared) -> Outcome {
    let backend = HighsBackend::new();
    for b in BUILDINGS {
        let Some(lib) = shared.libraries28.get(&b).cloned() else { continue };
        let inst = instance(b, 28);
        let semi = solve_semi_direct(&inst, &lib, &backend, &SolveSettings::desk()).map_err(|e| e.to_string())?;
        let index = build_semi_cogen(&inst, &lib).map_err(|e| e.to_string())?.index;
        let lifted = lift_and_check(&inst, &lib, &index, &semi.values).map_err(|e| e.to_string())?;
        shared.first_stage.insert((b, 28), lifted.schedule.first_stage());
    }
    let mut lines = Vec::new();
    let mut warned = Vec::new();
    for b in BUILDINGS {
        let vecs: Vec<(usize, [i64; 5])> =
            [7, 14, 28].iter().filter_map(|&d| shared.first_stage.get(&(b, d)).map(|v| (d, *v))).collect();
        let mut worst = 0;
        for i in 0..vecs.len() {
            for j in i + 1..vecs.len() {
                worst = worst.max(first_stage_l1(&vecs[i].1, &vecs[j].1));
            }
        }
        if worst > 3 {
            warned.push(b.name());
        }
        let shown: Vec<String> = vecs.iter().map(|(d, v)| format!("{d}d {v:?}")).collect();
        lines.push(format!("{} l1 {worst} ({})", b.name(), shown.join(" ")));
    }
    let mut detail = lines.join("; ");
    if !warned.is_empty() {
        detail = format!("WARN l1 > 3 for {}; {detail}", warned.join(", "));
    }
    Ok(detail)
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut shared = Shared::default();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut(&mut Shared) -> Outcome| {
        if !wanted(n) {
            return;
        }
        let started = Instant::now();
        let result = f(&mut shared);
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("criterion {n:>2} PASS {name} ({secs:.1} s): {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name} ({secs:.1} s): {d}");
            }
        }
    };
    report(1, "model size", &mut |_| c1_model_size());
    report(2, "lifted points", &mut |_| c2_lift());
    report(3, "semi-coarse bound", &mut |_| c3_bound());
    report(4, "cut loop", &mut |_| c4_cut_loop());
    report(5, "aggregation identities", &mut |_| c5_kronecker());
    report(6, "profile pools", &mut c6_pools);
    report(7, "LP warm start", &mut c7_warm_start);
    report(8, "first-iterate gap", &mut c8_mu);
    report(9, "discounting", &mut |_| c9_discount());
    report(10, "cost decomposition", &mut |s| c10_costs(s));
    report(11, "first-stage stability", &mut c11_stability);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

use cogen::data::{building_instance, BuildingType, InstanceOptions};
use cogen::full::build_full;
use cogen::instance::{CogenInstance, Gen, Tech, DELTA};
use cogen::profiles::*;
use cogen::schedule::evaluate_cost;
use cogen::semi::{build_coarse_cogen, build_semi_cogen, lift_semi};
use cogen::solve::*;
use twolevel::algorithm::CutLoopConfig;
use twolevel::backend::{Backend, HighsBackend, SolveSettings};

fn exact() -> SolveSettings {
    SolveSettings::desk().with_gap(1e-9)
}

fn instance(b: BuildingType, days: usize, pow: usize, chp: usize) -> CogenInstance {
    building_instance(b, &InstanceOptions { days, pow_units: pow, chp_units: chp, ..Default::default() }).unwrap()
}

fn keep_all() -> SelectionConfig {
    SelectionConfig {
        onoff: usize::MAX,
        production: Strategy::All,
        utility: Strategy::All,
        boiler: Strategy::All,
        battery: Strategy::All,
        storage: Strategy::All,
    }
}

/// Library holding exactly the daily profiles of a solved full model.
fn own_profiles(inst: &CogenInstance, backend: &dyn Backend) -> (f64, CogenLibrary) {
    let full = solve_full(inst, backend, &exact()).unwrap();
    let mut pool = CogenProfilePool::new(DELTA, PoolParams::of(inst));
    pool.add_snapshots(&full.schedule, [inst.units(Gen::Pow), inst.units(Gen::Chp)], 0..inst.days()).unwrap();
    assert!(validate_pool(&pool).is_clean());
    (full.solution.objective, select_library(&pool, &keep_all(), inst).unwrap())
}

#[test]
fn own_profiles_reproduce_the_full_optimum_without_switching_cost() {
    let backend = HighsBackend::new();
    for b in [BuildingType::Hospital, BuildingType::Supermarket] {
        let mut inst = instance(b, 2, 1, 1);
        inst.techs.pow.switching_cost = 0.0;
        inst.techs.chp.switching_cost = 0.0;
        let (z_full, lib) = own_profiles(&inst, &backend);
        let semi = solve_semi_direct(&inst, &lib, &backend, &exact()).unwrap();
        assert!((semi.objective - z_full).abs() <= 1e-6 * z_full.abs(), "{b}: semi {} full {z_full}", semi.objective);
    }
}

#[test]
fn semi_coarse_never_beats_the_full_model() {
    let backend = HighsBackend::new();
    let inst = instance(BuildingType::Retail, 3, 1, 1);
    let (z_full, lib) = own_profiles(&inst, &backend);
    let semi = solve_semi_direct(&inst, &lib, &backend, &exact()).unwrap();
    assert!(semi.objective >= z_full * (1.0 - 1e-6));
}

#[test]
fn lifted_points_are_feasible_and_cost_what_the_semi_model_says() {
    let backend = HighsBackend::new();
    let inst = instance(BuildingType::Supermarket, 3, 1, 2);
    let (_, lib) = generate_library(&inst, &inst, &ProfileConfig { horizon: MovingHorizonConfig { window_days: 2, ..Default::default() }, ..Default::default() }, &backend).unwrap();
    let semi = build_semi_cogen(&inst, &lib).unwrap();
    let out = solve_semi_direct(&inst, &lib, &backend, &exact()).unwrap();

    let raw = lift_semi(&inst, &lib, &semi.index, &out.values);
    let raw_cost = evaluate_cost(&inst, &raw).unwrap().total();
    assert!((raw_cost - out.objective).abs() <= 1e-6 * out.objective.abs());

    let lifted = lift_and_check(&inst, &lib, &semi.index, &out.values).unwrap();
    assert!(lifted.max_violation <= 1e-6, "{}", lifted.max_violation);
    let repaired = evaluate_cost(&inst, &lifted.schedule).unwrap().total();
    assert!(repaired >= raw_cost - 1e-9 * raw_cost.abs());
    let full = build_full(&inst, false).unwrap();
    let v = lifted.schedule.to_full_values(&full.index);
    assert!((full.model.objective(&v) - repaired).abs() <= 1e-6 * repaired.abs());
}

#[test]
fn coarse_rows_are_daily_sums() {
    let inst = instance(BuildingType::Office, 3, 1, 2);
    let backend = HighsBackend::new();
    let (_, lib) = own_profiles(&inst, &backend);
    let (semi, coarse) = build_coarse_cogen(&inst, &lib).unwrap();
    let s = &semi.semi;
    let (agg, rhs) = coarse.aggregated();
    for (g, range) in coarse.groups().iter().enumerate() {
        let mut dense = vec![0.0; s.num_cols()];
        for r in range.clone() {
            for (c, v) in s.coupling.row(r) {
                dense[c] += v;
            }
        }
        for (c, v) in agg.row(g) {
            assert!((dense[c] - v).abs() <= 1e-9 * v.abs().max(1.0));
            dense[c] = 0.0;
        }
        assert!(dense.iter().all(|v| v.abs() <= 1e-9));
        let want: f64 = s.coupling_rhs[range.clone()].iter().sum();
        assert!((rhs[g] - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    // Hatted power demand of day 0: each production column carries minus
    // its profile total, the right-hand side minus the day's demand.
    let fam = semi.coupling_families.iter().find(|f| f.name == "power_demand").unwrap();
    let g0 = coarse.groups().iter().position(|r| r.start == fam.rows.start).unwrap();
    let col = semi.index.pbar(0, Gen::Chp, 0, 0, 0);
    let coef = agg.row(g0).find(|(c, _)| *c == col).unwrap().1;
    assert!((coef + total(&lib.chp.production[0][0])).abs() < 1e-9);
    let demand: f64 = inst.power_demand[..DELTA].iter().sum();
    assert!((rhs[g0] + demand).abs() < 1e-9 * demand);

    // One aggregated row per family and day (per unit for symmetry),
    // base rows untouched.
    let days = inst.days();
    let sym: usize = Gen::ALL.iter().filter(|&&g| !lib.gen(g).is_empty()).map(|&g| inst.units(g).saturating_sub(1)).sum();
    let groups = days * (7 + Gen::ALL.len() + sym);
    assert_eq!(coarse.groups().len(), groups);
    assert_eq!(coarse.to_milp().num_rows(), groups + s.base.num_rows());
}

#[test]
fn coarse_optimum_bounds_semi_optimum() {
    let backend = HighsBackend::new();
    let inst = instance(BuildingType::Hospital, 3, 1, 2);
    let (_, lib) = generate_library(&inst, &inst, &ProfileConfig { horizon: MovingHorizonConfig { window_days: 2, ..Default::default() }, ..Default::default() }, &backend).unwrap();
    let (semi, coarse) = build_coarse_cogen(&inst, &lib).unwrap();
    let zc = backend.solve_milp(&coarse.to_milp(), &exact()).unwrap();
    let zs = backend.solve_milp(&semi.to_milp(), &exact()).unwrap();
    assert!(zc.objective <= zs.objective * (1.0 + 1e-6), "{} > {}", zc.objective, zs.objective);

    let two = solve_two_level_cogen(&inst, &lib, &backend, &CutLoopConfig { milp_rel_gap: 1e-6, ..Default::default() }).unwrap();
    assert!((two.outcome.objective - zs.objective).abs() <= 2e-6 * zs.objective.abs() + 1e-6);
    assert!(two.lifted.max_violation <= 1e-6);
    let b = two.solution.breakdown.total();
    assert!(b >= two.outcome.objective * (1.0 - 1e-9));
    assert_eq!(two.solution.first_stage[Tech::Pow.index()], two.lifted.schedule.first_stage()[Tech::Pow.index()]);
}

#[test]
fn library_with_wrong_length_is_rejected() {
    let inst = instance(BuildingType::Hospital, 1, 1, 1);
    let mut pool = CogenProfilePool::new(2, PoolParams::of(&inst));
    pool.utility.push(vec![1.0, 1.0]);
    pool.boiler.push(vec![1.0, 1.0]);
    let lib = CogenLibrary {
        version: 1,
        delta: 2,
        params: pool.params.clone(),
        pow: GenProfiles { onoff: vec![], switching: vec![], production: vec![] },
        chp: GenProfiles { onoff: vec![], switching: vec![], production: vec![] },
        utility: pool.utility.clone(),
        boiler: pool.boiler.clone(),
        battery: vec![],
        storage: vec![],
    };
    assert!(build_semi_cogen(&inst, &lib).is_err());
}

use cogen::data::{building_instance, BuildingType, InstanceOptions};
use cogen::full::build_full;
use cogen::instance::{CogenInstance, Gen, Tech, DELTA};
use cogen::schedule::{evaluate_cost, CogenSchedule};
use cogen::solve::solve_full;
use twolevel::backend::{HighsBackend, SolveSettings};

fn instance(b: BuildingType, days: usize, pow: usize, chp: usize) -> CogenInstance {
    building_instance(b, &InstanceOptions { days, pow_units: pow, chp_units: chp, ..Default::default() }).unwrap()
}

#[test]
fn counts_follow_the_hourly_layout() {
    let inst = instance(BuildingType::Office, 3, 2, 3);
    let full = build_full(&inst, false).unwrap();
    let size = full.model.size();
    let (t, u, m) = (72, 5, inst.months.len());
    assert_eq!(size.binary, t * u);
    assert_eq!(full.onoff_binaries(), t * u);
    assert_eq!(size.integer, 5);
    assert_eq!(size.continuous, m + t * (2 * u + 8));
    // Per hour: demand, 2u bounds, 2 totals, 2 on/off caps, u-2 symmetry,
    // 2u switching, peak, battery, battery cap, heat, storage, storage out,
    // storage cap, boiler cap; the last hour has no switching, battery or
    // storage transition; plus two cyclic rows.
    let per_hour = 1 + 2 * u + 2 + 2 + (u - 2) + 2 * u + 1 + 1 + 1 + 1 + 1 + 1 + 1 + 1;
    assert_eq!(size.constraints, t * per_hour - (2 * u + 2) + 2);
}

#[test]
fn counts_grow_linearly_in_days() {
    let sizes: Vec<_> = [7, 14, 21]
        .iter()
        .map(|&d| build_full(&instance(BuildingType::Hospital, d, 2, 2), false).unwrap().model.size())
        .collect();
    for f in [
        |s: &twolevel::model::ModelSize| s.binary,
        |s: &twolevel::model::ModelSize| s.continuous,
        |s: &twolevel::model::ModelSize| s.constraints,
        |s: &twolevel::model::ModelSize| s.nonzeros,
    ] {
        let (a, b, c) = (f(&sizes[0]), f(&sizes[1]), f(&sizes[2]));
        assert_eq!(b - a, c - b, "{a} {b} {c}");
    }
    assert_eq!(sizes[1].binary, 2 * sizes[0].binary);
}

#[test]
fn cyclic_boundaries_touch_first_and_last_hour() {
    let inst = instance(BuildingType::Retail, 2, 1, 1);
    let full = build_full(&inst, true).unwrap();
    let ix = &full.index;
    let last = inst.hours() - 1;
    for (name, col) in [("battery_boundary", ix.b(0)), ("storage_boundary", ix.s(0))] {
        let rows = full.family(name).unwrap().rows.clone();
        assert_eq!(rows.len(), 1);
        let mut cols: Vec<usize> = full.model.rows.row(rows.start).map(|(c, _)| c).collect();
        cols.sort();
        let other = if name.starts_with("battery") { ix.b(last) } else { ix.s(last) };
        assert_eq!(cols, vec![col, other]);
    }
}

#[test]
fn named_model_exposes_variables() {
    let inst = instance(BuildingType::Retail, 1, 1, 1);
    let full = build_full(&inst, true).unwrap();
    assert_eq!(full.model.col_names.len(), full.model.num_cols());
    let ix = &full.index;
    assert!(full.index.describe(ix.x(5, 1)).starts_with('x'));
    assert_eq!(full.index.describe(ix.y(Tech::Stor)), "y[stor]");
}

#[test]
fn zero_schedule_costs_nothing() {
    let inst = instance(BuildingType::Office, 1, 1, 1);
    let full = build_full(&inst, false).unwrap();
    let zero = CogenSchedule::zeros(&full.index);
    assert_eq!(evaluate_cost(&inst, &zero).unwrap().total(), 0.0);
}

#[test]
fn single_purchased_kwh_is_discounted_once() {
    let inst = instance(BuildingType::Office, 1, 1, 1);
    let full = build_full(&inst, false).unwrap();
    let mut s = CogenSchedule::zeros(&full.index);
    s.u[0] = 1.0;
    let c = evaluate_cost(&inst, &s).unwrap();
    let y = 1.0 - 0.03 / 8760.0;
    let want = inst.lifetime_hours / inst.hours() as f64 * y * 0.12;
    assert!((c.purchased_power - want).abs() <= 1e-12 * want);
    assert_eq!(c.total(), c.purchased_power);
}

#[test]
fn summer_peak_uses_summer_charge() {
    let june = 31 + 28 + 31 + 30 + 31;
    let inst = building_instance(BuildingType::Office, &InstanceOptions { start_day: june, days: 1, ..Default::default() }).unwrap();
    assert_eq!(inst.months.len(), 1);
    let full = build_full(&inst, false).unwrap();
    let mut s = CogenSchedule::zeros(&full.index);
    s.umax[0] = 10.0;
    let c = evaluate_cost(&inst, &s).unwrap();
    let y: f64 = 1.0 - 0.03 / 8760.0;
    let want = inst.lifetime_hours / DELTA as f64 * y.powi(DELTA as i32) * 14.2 * 10.0;
    assert!((c.peak - want).abs() <= 1e-9 * want, "{} vs {want}", c.peak);
}

#[test]
fn horizon_mismatch_is_rejected() {
    let short = instance(BuildingType::Office, 1, 1, 1);
    let long = instance(BuildingType::Office, 2, 1, 1);
    let s = CogenSchedule::zeros(&build_full(&long, false).unwrap().index);
    assert!(evaluate_cost(&short, &s).is_err());
}

#[test]
fn invalid_instance_is_rejected() {
    let mut inst = instance(BuildingType::Office, 1, 1, 1);
    inst.power_demand.pop();
    assert!(build_full(&inst, false).is_err());
    let mut inst = instance(BuildingType::Office, 1, 1, 1);
    inst.loss_heat = 1.0;
    assert!(build_full(&inst, false).is_err());
}

#[test]
fn solved_instances_decompose_and_break_symmetry() {
    let backend = HighsBackend::new();
    for b in [BuildingType::Hospital, BuildingType::Supermarket] {
        let inst = instance(b, 2, 1, 2);
        let out = solve_full(&inst, &backend, &SolveSettings::desk()).unwrap();
        let total = out.solution.breakdown.total();
        assert!((total - out.solution.objective).abs() <= 1e-6 * out.solution.objective.abs(), "{total} vs {}", out.solution.objective);
        let full = build_full(&inst, false).unwrap();
        let chp = (0..2).map(|i| full.index.unit(Gen::Chp, i)).collect::<Vec<_>>();
        for t in 0..inst.hours() {
            assert!(out.schedule.x[chp[1]][t] <= out.schedule.x[chp[0]][t] + 1e-9);
        }
        let v = out.schedule.to_full_values(&full.index);
        assert!(full.model.max_violation(&v) < 1e-5);
    }
}

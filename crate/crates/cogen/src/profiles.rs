//! Profile pools from moving-horizon solves, validation and selection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use twolevel::backend::{Backend, SolveSettings};

use crate::full::build_full;
use crate::instance::{CogenInstance, Gen, DELTA};
use crate::schedule::CogenSchedule;
use crate::CogenError;

pub const POOL_VERSION: u32 = 1;
const TOL: f64 = 1e-8;

/// Level profile and the flow profile sharing its coefficient: `(B̄, B̄^IO)`
/// for the battery, `(S̄, S̄^out)` for heat storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoragePair {
    pub level: Vec<f64>,
    pub flow: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnOffEntry {
    pub profile: Vec<f64>,
    pub switching: Vec<f64>,
    pub count: usize,
    pub production: Vec<Vec<f64>>,
}

/// Parameters the pool invariants depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolParams {
    /// Per generator, pow then chp.
    pub r_min: [f64; 2],
    pub r_max: [f64; 2],
    pub loss_power: f64,
}

impl PoolParams {
    pub fn of(inst: &CogenInstance) -> Self {
        let t = &inst.techs;
        Self { r_min: [t.pow.r_min, t.chp.r_min], r_max: [t.pow.r_max, t.chp.r_max], loss_power: inst.loss_power }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CogenProfilePool {
    pub version: u32,
    pub delta: usize,
    pub params: PoolParams,
    pub pow: Vec<OnOffEntry>,
    pub chp: Vec<OnOffEntry>,
    pub utility: Vec<Vec<f64>>,
    pub boiler: Vec<Vec<f64>>,
    pub battery: Vec<StoragePair>,
    pub storage: Vec<StoragePair>,
    /// Windows whose solve failed and were skipped.
    #[serde(default)]
    pub failed_windows: Vec<usize>,
    #[serde(default)]
    pub snapshots: usize,
    #[serde(skip)]
    keys: [HashMap<Vec<u8>, usize>; 2],
}

impl CogenProfilePool {
    pub fn new(delta: usize, params: PoolParams) -> Self {
        Self {
            version: POOL_VERSION,
            delta,
            params,
            pow: Vec::new(),
            chp: Vec::new(),
            utility: Vec::new(),
            boiler: Vec::new(),
            battery: Vec::new(),
            storage: Vec::new(),
            failed_windows: Vec::new(),
            snapshots: 0,
            keys: Default::default(),
        }
    }

    pub fn onoff(&self, g: Gen) -> &[OnOffEntry] {
        match g {
            Gen::Pow => &self.pow,
            Gen::Chp => &self.chp,
        }
    }

    fn onoff_mut(&mut self, g: Gen) -> &mut Vec<OnOffEntry> {
        match g {
            Gen::Pow => &mut self.pow,
            Gen::Chp => &mut self.chp,
        }
    }

    /// Adds one day's on/off and production profile for a unit, merging
    /// with an identical on/off profile already present.
    pub fn add_onoff(&mut self, g: Gen, profile: Vec<f64>, production: Vec<f64>) -> Result<(), CogenError> {
        let key: Vec<u8> = profile.iter().map(|&v| (v > 0.5) as u8).collect();
        if self.keys[g.index()].is_empty() && !self.onoff(g).is_empty() {
            self.rebuild_keys();
        }
        match self.keys[g.index()].get(&key) {
            Some(&k) => {
                let e = &mut self.onoff_mut(g)[k];
                e.count += 1;
                e.production.push(production);
            }
            None => {
                let switching = extract_switch_profile(&profile)?;
                let list = self.onoff_mut(g);
                list.push(OnOffEntry { profile, switching, count: 1, production: vec![production] });
                let k = list.len() - 1;
                self.keys[g.index()].insert(key, k);
            }
        }
        Ok(())
    }

    fn rebuild_keys(&mut self) {
        for g in Gen::ALL {
            let map = self.onoff(g).iter().enumerate().map(|(k, e)| (e.profile.iter().map(|&v| (v > 0.5) as u8).collect(), k)).collect();
            self.keys[g.index()] = map;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pool serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CogenError> {
        let mut pool: Self = serde_json::from_str(text).map_err(|e| CogenError::Parse(e.to_string()))?;
        if pool.version != POOL_VERSION {
            return Err(CogenError::Parse(format!("profile pool version {} is not {POOL_VERSION}", pool.version)));
        }
        pool.rebuild_keys();
        Ok(pool)
    }

    /// Appends the daily snapshots of `days` taken from a schedule.
    ///
    /// Values are snapped onto the profile constraints first so solver
    /// tolerances do not leak into the pool: on/off values are rounded,
    /// production clamped into its bounds, levels clamped at zero, storage
    /// output capped by the level and battery flows recomputed from the
    /// levels.
    pub fn add_snapshots(&mut self, sched: &CogenSchedule, units: [usize; 2], days: std::ops::Range<usize>) -> Result<(), CogenError> {
        let d = self.delta;
        for day in days {
            let h = day * d..(day + 1) * d;
            for g in Gen::ALL {
                for i in 0..units[g.index()] {
                    let unit = if g == Gen::Pow { i } else { units[0] + i };
                    let x: Vec<f64> = sched.x[unit][h.clone()].iter().map(|v| v.round().clamp(0.0, 1.0)).collect();
                    let (lo, hi) = (self.params.r_min[g.index()], self.params.r_max[g.index()]);
                    let p: Vec<f64> =
                        sched.p[unit][h.clone()].iter().zip(&x).map(|(&p, &x)| p.clamp(lo * x, hi * x)).collect();
                    self.add_onoff(g, x, p)?;
                }
            }
            let nonneg = |v: &[f64]| v.iter().map(|x| x.max(0.0)).collect::<Vec<f64>>();
            self.utility.push(nonneg(&sched.u[h.clone()]));
            self.boiler.push(nonneg(&sched.q[h.clone()]));
            let level = nonneg(&sched.b[h.clone()]);
            let mut flow = sched.bio[h.clone()].to_vec();
            for k in 0..d - 1 {
                flow[k] = level[k + 1] - (1.0 - self.params.loss_power) * level[k];
            }
            self.battery.push(StoragePair { level, flow });
            let level = nonneg(&sched.s[h.clone()]);
            let flow = sched.sout[h].iter().zip(&level).map(|(o, l)| o.max(0.0).min(*l)).collect();
            self.storage.push(StoragePair { level, flow });
            self.snapshots += 1;
        }
        Ok(())
    }
}

/// `W̄(h) = |X̄(h+1) − X̄(h)|` for `h < δ`, and `W̄(δ) = 0`.
pub fn extract_switch_profile(x: &[f64]) -> Result<Vec<f64>, CogenError> {
    if let Some(h) = x.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(CogenError::NonBinaryInput { index: h, value: x[h] });
    }
    let mut w = vec![0.0; x.len()];
    for h in 0..x.len().saturating_sub(1) {
        w[h] = (x[h + 1] - x[h]).abs();
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Length,
    Binary,
    Switching,
    Negative,
    /// Production outside `[R^min X̄, R^max X̄]`.
    Production,
    /// Storage output above the level.
    StorageOut,
    /// Battery flow inconsistent with the levels.
    Battery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolFailure {
    pub family: String,
    pub profile: usize,
    /// 0-based hour; for production failures `profile` is the parent and
    /// `sub` the production profile.
    pub index: usize,
    pub sub: Option<usize>,
    pub rule: Rule,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<PoolFailure>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.failures.is_empty()
    }

    fn push(&mut self, family: &str, profile: usize, sub: Option<usize>, index: usize, rule: Rule) {
        self.failures.push(PoolFailure { family: family.to_string(), profile, index, sub, rule });
    }
}

/// Checks every pool invariant to 1e-8.
pub fn validate_pool(pool: &CogenProfilePool) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let d = pool.delta;
    for g in Gen::ALL {
        let fam = if g == Gen::Pow { "pow" } else { "chp" };
        let (lo, hi) = (pool.params.r_min[g.index()], pool.params.r_max[g.index()]);
        for (k, e) in pool.onoff(g).iter().enumerate() {
            if e.profile.len() != d || e.switching.len() != d {
                rep.push(fam, k, None, 0, Rule::Length);
                continue;
            }
            for h in 0..d {
                if e.profile[h] != 0.0 && e.profile[h] != 1.0 {
                    rep.push(fam, k, None, h, Rule::Binary);
                }
                if e.switching[h] != 0.0 && e.switching[h] != 1.0 {
                    rep.push(fam, k, None, h, Rule::Binary);
                }
            }
            if extract_switch_profile(&e.profile).map(|w| w != e.switching).unwrap_or(false) {
                rep.push(fam, k, None, 0, Rule::Switching);
            }
            for (l, p) in e.production.iter().enumerate() {
                if p.len() != d {
                    rep.push(fam, k, Some(l), 0, Rule::Length);
                    continue;
                }
                for h in 0..d {
                    let x = e.profile[h];
                    if p[h] < lo * x - TOL || p[h] > hi * x + TOL {
                        rep.push(fam, k, Some(l), h, Rule::Production);
                    }
                }
            }
        }
    }
    for (fam, list) in [("utility", &pool.utility), ("boiler", &pool.boiler)] {
        for (k, v) in list.iter().enumerate() {
            if v.len() != d {
                rep.push(fam, k, None, 0, Rule::Length);
            }
            for (h, &x) in v.iter().enumerate() {
                if x < -TOL {
                    rep.push(fam, k, None, h, Rule::Negative);
                }
            }
        }
    }
    for (k, pair) in pool.storage.iter().enumerate() {
        if pair.level.len() != d || pair.flow.len() != d {
            rep.push("storage", k, None, 0, Rule::Length);
            continue;
        }
        for h in 0..d {
            if pair.level[h] < -TOL || pair.flow[h] < -TOL {
                rep.push("storage", k, None, h, Rule::Negative);
            }
            if pair.flow[h] > pair.level[h] + TOL {
                rep.push("storage", k, None, h, Rule::StorageOut);
            }
        }
    }
    let keep = 1.0 - pool.params.loss_power;
    for (k, pair) in pool.battery.iter().enumerate() {
        if pair.level.len() != d || pair.flow.len() != d {
            rep.push("battery", k, None, 0, Rule::Length);
            continue;
        }
        for h in 0..d {
            if pair.level[h] < -TOL {
                rep.push("battery", k, None, h, Rule::Negative);
            }
            if h + 1 < d && (pair.level[h + 1] - keep * pair.level[h] - pair.flow[h]).abs() > TOL {
                rep.push("battery", k, None, h, Rule::Battery);
            }
        }
    }
    rep
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c.is_ne() {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

/// Indices of the `k` most frequent on/off profiles, ties broken by the
/// lexicographically smaller profile.
pub fn select_frequent_onoff(entries: &[OnOffEntry], k: usize) -> Result<Vec<usize>, CogenError> {
    if entries.is_empty() {
        return Err(CogenError::EmptyPool("on/off".into()));
    }
    let mut idx: Vec<usize> = (0..entries.len()).collect();
    idx.sort_by(|&a, &b| entries[b].count.cmp(&entries[a].count).then(lex_cmp(&entries[a].profile, &entries[b].profile)));
    idx.truncate(k);
    Ok(idx)
}

/// Indices of the candidates with the smallest and largest key; one index
/// when they coincide. Ties go to the earlier candidate.
pub fn select_extremes(keys: &[f64]) -> Result<Vec<usize>, CogenError> {
    if keys.is_empty() {
        return Err(CogenError::EmptyPool("extremes".into()));
    }
    let mut lo = 0;
    let mut hi = 0;
    for (i, &k) in keys.iter().enumerate() {
        if k < keys[lo] {
            lo = i;
        }
        if k > keys[hi] {
            hi = i;
        }
    }
    Ok(if keys[lo] == keys[hi] { vec![lo] } else { vec![lo, hi] })
}

pub fn total(v: &[f64]) -> f64 {
    v.iter().sum()
}

pub fn abs_total(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_TOL: f64 = 1e-8;

/// Lloyd's k-means with farthest-point seeding from the first profile.
/// Returns, per non-empty cluster, the pool member closest to the centroid,
/// without duplicate profiles.
pub fn kmeans_select(pool: &[Vec<f64>], k: usize) -> Result<Vec<usize>, CogenError> {
    if k == 0 || pool.len() < k {
        return Err(CogenError::PoolTooSmall { size: pool.len(), k });
    }
    let mut centroids = vec![pool[0].clone()];
    while centroids.len() < k {
        let mut best = (0, -1.0);
        for (i, p) in pool.iter().enumerate() {
            let d = centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        centroids.push(pool[best.0].clone());
    }
    let nearest = |p: &[f64], cs: &[Vec<f64>]| {
        let mut best = (0, f64::INFINITY);
        for (j, c) in cs.iter().enumerate() {
            let d = dist2(p, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    };
    let dim = pool[0].len();
    let mut assign = vec![0; pool.len()];
    for _ in 0..KMEANS_MAX_ITER {
        for (i, p) in pool.iter().enumerate() {
            assign[i] = nearest(p, &centroids);
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in pool.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut moved: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            moved = moved.max(dist2(&next, &centroids[j]).sqrt());
            centroids[j] = next;
        }
        if moved <= KMEANS_TOL {
            break;
        }
    }
    for (i, p) in pool.iter().enumerate() {
        assign[i] = nearest(p, &centroids);
    }
    let mut out: Vec<usize> = Vec::new();
    for (j, c) in centroids.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in pool.iter().enumerate() {
            if assign[i] != j {
                continue;
            }
            let d = dist2(p, c);
            if best.is_none_or(|b| d < b.1) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            if !out.iter().any(|&o| pool[o] == pool[i]) {
                out.push(i);
            }
        }
    }
    Ok(out)
}

/// `n` snapshots evenly spaced over the pool.
pub fn uniform_select(len: usize, n: usize) -> Vec<usize> {
    if len == 0 || n == 0 {
        return Vec::new();
    }
    if n == 1 || len == 1 {
        return vec![0];
    }
    let mut out: Vec<usize> = (0..n.min(len)).map(|i| (i * (len - 1) + (n.min(len) - 1) / 2) / (n.min(len) - 1)).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "n")]
pub enum Strategy {
    /// Keep the minimum and maximum by total.
    Extremes,
    KMeans(usize),
    Uniform(usize),
    All,
}

impl std::str::FromStr for Strategy {
    type Err = CogenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CogenError::Parse(format!("unknown strategy {s:?}; use extremes, kmeans[:k], uniform[:n] or all"));
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b.parse::<usize>().map_err(|_| bad())?)),
            None => (s, None),
        };
        match name {
            "extremes" => Ok(Strategy::Extremes),
            "kmeans" => Ok(Strategy::KMeans(arg.unwrap_or(2))),
            "uniform" => Ok(Strategy::Uniform(arg.unwrap_or(2))),
            "all" => Ok(Strategy::All),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// On/off profiles kept per generator.
    pub onoff: usize,
    pub production: Strategy,
    pub utility: Strategy,
    pub boiler: Strategy,
    pub battery: Strategy,
    pub storage: Strategy,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            onoff: 3,
            production: Strategy::Extremes,
            utility: Strategy::KMeans(2),
            boiler: Strategy::KMeans(2),
            battery: Strategy::Extremes,
            storage: Strategy::Extremes,
        }
    }
}

fn apply(strategy: Strategy, profiles: &[&[f64]], key: fn(&[f64]) -> f64) -> Result<Vec<usize>, CogenError> {
    if profiles.is_empty() {
        return Ok(Vec::new());
    }
    match strategy {
        Strategy::Extremes => select_extremes(&profiles.iter().map(|p| key(p)).collect::<Vec<_>>()),
        Strategy::KMeans(k) => {
            let owned: Vec<Vec<f64>> = profiles.iter().map(|p| p.to_vec()).collect();
            kmeans_select(&owned, k.min(owned.len()))
        }
        Strategy::Uniform(n) => Ok(uniform_select(profiles.len(), n)),
        Strategy::All => Ok((0..profiles.len()).collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenProfiles {
    pub onoff: Vec<Vec<f64>>,
    pub switching: Vec<Vec<f64>>,
    /// Production profiles under each on/off profile.
    pub production: Vec<Vec<Vec<f64>>>,
}

impl GenProfiles {
    pub fn len(&self) -> usize {
        self.onoff.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onoff.is_empty()
    }
}

/// The profiles a semi-coarse cogeneration model is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CogenLibrary {
    pub version: u32,
    pub delta: usize,
    pub params: PoolParams,
    pub pow: GenProfiles,
    pub chp: GenProfiles,
    pub utility: Vec<Vec<f64>>,
    pub boiler: Vec<Vec<f64>>,
    pub battery: Vec<StoragePair>,
    pub storage: Vec<StoragePair>,
}

impl CogenLibrary {
    pub fn gen(&self, g: Gen) -> &GenProfiles {
        match g {
            Gen::Pow => &self.pow,
            Gen::Chp => &self.chp,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CogenError> {
        let lib: Self = serde_json::from_str(text).map_err(|e| CogenError::Parse(e.to_string()))?;
        if lib.version != POOL_VERSION {
            return Err(CogenError::Parse(format!("profile library version {} is not {POOL_VERSION}", lib.version)));
        }
        Ok(lib)
    }

    /// Same checks as [`validate_pool`], plus every on/off profile needs a
    /// production profile.
    pub fn validate(&self) -> Result<(), CogenError> {
        let mut pool = CogenProfilePool::new(self.delta, self.params.clone());
        for g in Gen::ALL {
            let lib = self.gen(g);
            if lib.switching.len() != lib.len() || lib.production.len() != lib.len() {
                return Err(CogenError::InvalidProfilePool(format!("{g:?}: ragged on/off family")));
            }
            for k in 0..lib.len() {
                if lib.production[k].is_empty() {
                    return Err(CogenError::InvalidProfilePool(format!("{g:?} on/off profile {k} has no production profile")));
                }
                pool.onoff_mut(g).push(OnOffEntry {
                    profile: lib.onoff[k].clone(),
                    switching: lib.switching[k].clone(),
                    count: 1,
                    production: lib.production[k].clone(),
                });
            }
        }
        pool.utility = self.utility.clone();
        pool.boiler = self.boiler.clone();
        pool.battery = self.battery.clone();
        pool.storage = self.storage.clone();
        let rep = validate_pool(&pool);
        if let Some(f) = rep.failures.first() {
            return Err(CogenError::InvalidProfilePool(format!(
                "{} failure(s); first: {:?} in {} profile {} hour {}",
                rep.failures.len(),
                f.rule,
                f.family,
                f.profile,
                f.index
            )));
        }
        Ok(())
    }
}

/// Hour-of-day maximum of a series over all days.
pub fn daily_envelope(series: &[f64], delta: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; delta];
    for (t, v) in series.iter().enumerate() {
        out[t % delta] = out[t % delta].max(*v);
    }
    out
}

/// Picks a library from `pool` for `target`.
///
/// The all-zero on/off profile is never picked: selecting no profile has
/// the same effect. Utility and boiler families always also get the
/// hour-of-day demand envelope of `target`, so the semi-coarse model is
/// feasible whatever else is selected.
pub fn select_library(pool: &CogenProfilePool, cfg: &SelectionConfig, target: &CogenInstance) -> Result<CogenLibrary, CogenError> {
    let d = pool.delta;
    let mut gens = Vec::new();
    for g in Gen::ALL {
        let entries: Vec<OnOffEntry> =
            pool.onoff(g).iter().filter(|e| e.profile.iter().any(|&v| v > 0.0)).cloned().collect();
        let chosen = if entries.is_empty() { Vec::new() } else { select_frequent_onoff(&entries, cfg.onoff)? };
        let mut lib = GenProfiles { onoff: Vec::new(), switching: Vec::new(), production: Vec::new() };
        for k in chosen {
            let e = &entries[k];
            let prods: Vec<&[f64]> = e.production.iter().map(|p| p.as_slice()).collect();
            let keep = apply(cfg.production, &prods, total)?;
            let mut production: Vec<Vec<f64>> = Vec::new();
            for l in keep {
                if !production.contains(&e.production[l]) {
                    production.push(e.production[l].clone());
                }
            }
            lib.onoff.push(e.profile.clone());
            lib.switching.push(e.switching.clone());
            lib.production.push(production);
        }
        gens.push(lib);
    }
    let pick = |list: &[Vec<f64>], s: Strategy| -> Result<Vec<Vec<f64>>, CogenError> {
        let refs: Vec<&[f64]> = list.iter().map(|p| p.as_slice()).collect();
        Ok(apply(s, &refs, total)?.into_iter().map(|i| list[i].clone()).collect())
    };
    let pick_pairs = |list: &[StoragePair], s: Strategy| -> Result<Vec<StoragePair>, CogenError> {
        // Extremes are ranked by the level; clustering works on the flow.
        let idx = match s {
            Strategy::Extremes => {
                let refs: Vec<&[f64]> = list.iter().map(|p| p.level.as_slice()).collect();
                apply(s, &refs, abs_total)?
            }
            _ => {
                let refs: Vec<&[f64]> = list.iter().map(|p| p.flow.as_slice()).collect();
                apply(s, &refs, abs_total)?
            }
        };
        let mut out: Vec<StoragePair> = Vec::new();
        for i in idx {
            if !out.contains(&list[i]) {
                out.push(list[i].clone());
            }
        }
        Ok(out)
    };
    let mut utility = pick(&pool.utility, cfg.utility)?;
    let mut boiler = pick(&pool.boiler, cfg.boiler)?;
    for (fam, series) in [(&mut utility, &target.power_demand), (&mut boiler, &target.heat_demand)] {
        let env = daily_envelope(series, d);
        if !fam.contains(&env) {
            fam.push(env);
        }
    }
    let chp = gens.pop().expect("two generators");
    let pow = gens.pop().expect("two generators");
    let lib = CogenLibrary {
        version: POOL_VERSION,
        delta: d,
        params: pool.params.clone(),
        pow,
        chp,
        utility,
        boiler,
        battery: pick_pairs(&pool.battery, cfg.battery)?,
        storage: pick_pairs(&pool.storage, cfg.storage)?,
    };
    lib.validate()?;
    Ok(lib)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingHorizonConfig {
    pub window_days: usize,
    pub settings: SolveSettings,
}

impl Default for MovingHorizonConfig {
    fn default() -> Self {
        Self { window_days: 4, settings: SolveSettings::desk().with_time_limit(60.0) }
    }
}

/// Windows `(solve days, retained days)` of the moving horizon: the window
/// rolls one day at a time keeping its first day, and the last window keeps
/// all of its days.
pub fn windows(total_days: usize, w: usize) -> Vec<(std::ops::Range<usize>, std::ops::Range<usize>)> {
    (0..=total_days - w)
        .map(|k| {
            let solve = k..k + w;
            let keep = if k + w == total_days { k..total_days } else { k..k + 1 };
            (solve, keep)
        })
        .collect()
}

/// Solves each window's full model and pools the retained days.
pub fn moving_horizon_generate(
    inst: &CogenInstance,
    cfg: &MovingHorizonConfig,
    backend: &dyn Backend,
) -> Result<CogenProfilePool, CogenError> {
    inst.validate()?;
    let days = inst.days();
    if cfg.window_days == 0 || cfg.window_days > days {
        return Err(CogenError::InvalidInstance(format!(
            "window of {} days does not fit a {days}-day horizon",
            cfg.window_days
        )));
    }
    let mut pool = CogenProfilePool::new(DELTA, PoolParams::of(inst));
    let units = [inst.units(Gen::Pow), inst.units(Gen::Chp)];
    for (k, (solve, keep)) in windows(days, cfg.window_days).into_iter().enumerate() {
        let sub = inst.slice_days(solve.clone());
        let full = build_full(&sub, false)?;
        let out = match backend.solve_milp(&full.model, &cfg.settings) {
            Ok(out) if out.status.has_solution() => out,
            Ok(out) => {
                log::warn!("window {k} ({solve:?}): {:?}, skipped", out.status);
                pool.failed_windows.push(k);
                continue;
            }
            Err(e) => {
                log::warn!("window {k} ({solve:?}): {e}, skipped");
                pool.failed_windows.push(k);
                continue;
            }
        };
        let sched = CogenSchedule::from_full_values(&full.index, &out.primal);
        pool.add_snapshots(&sched, units, keep.start - solve.start..keep.end - solve.start)?;
        log::debug!("window {k}: objective {:.2}, {} snapshots so far", out.objective, pool.snapshots);
    }
    Ok(pool)
}

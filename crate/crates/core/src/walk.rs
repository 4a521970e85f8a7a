//! Exact sampling of the trace on `G` of a simple random walk run forever.
//!
//! Inside `G` the walk takes ordinary steps. When it steps out to a site `z`
//! it escapes for good with probability `1 - h(z)`, `h(z) = P_z[H_G < ∞]`;
//! otherwise it re-enters `G`, either at a site drawn from the first-entrance
//! law `P_z[X_{H_G} = · | H_G < ∞]` or by running the `h`-transformed walk
//! until it lands in `G`. Both routes have the law of the true walk, up to
//! the Green's function precision in the weights.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::Equilibrium;
use crate::error::{invalid, Error, Result};
use crate::green::PotentialTable;
use crate::lattice::{LatticeSet, Site, OUTSIDE};

/// Step budget per conditioned excursion.
pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Sup-norm distance from the bounding box of `G` beyond which the
/// conditioned walk hands over to the first-entrance law.
pub const DEFAULT_SHORTCUT_RADIUS: i64 = 16;

/// How an excursion that returns to `G` is resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ExcursionMode {
    /// Draw the re-entry site from the first-entrance distribution.
    Entrance,
    /// Step the walk conditioned to hit `G`. With a shortcut radius the
    /// walk switches to the first-entrance law (same law, by the strong
    /// Markov property) once it is that far from `G`.
    ConditionedWalk { budget: u64, shortcut_radius: Option<i64> },
}

impl Default for ExcursionMode {
    fn default() -> Self {
        ExcursionMode::Entrance
    }
}

impl ExcursionMode {
    pub fn conditioned_walk() -> Self {
        ExcursionMode::ConditionedWalk {
            budget: DEFAULT_BUDGET,
            shortcut_radius: Some(DEFAULT_SHORTCUT_RADIUS),
        }
    }
}

/// One trajectory as seen from `G`: its visits to `G` in order.
#[derive(Clone, Debug, PartialEq)]
pub struct GTrace {
    visits: Vec<u32>,
    // excursion[i]: visit i was reached through an excursion outside G
    excursion: Vec<bool>,
    visited: Vec<u32>,
}

impl GTrace {
    fn from_parts(visits: Vec<u32>, excursion: Vec<bool>) -> Self {
        let mut visited = visits.clone();
        visited.sort_unstable();
        visited.dedup();
        GTrace { visits, excursion, visited }
    }

    /// Builds a trace from explicit sites, checking that the start is on the
    /// boundary, every visit lies in `G`, and unflagged transitions are
    /// nearest-neighbour steps.
    pub fn from_sites(set: &LatticeSet, visits: &[Site], excursion: &[bool]) -> Result<Self> {
        if visits.is_empty() {
            return Err(invalid("trace needs at least one visit"));
        }
        if visits.len() != excursion.len() {
            return Err(invalid("one excursion flag per visit is required"));
        }
        if excursion[0] {
            return Err(invalid("the first visit cannot follow an excursion"));
        }
        let ids = visits
            .iter()
            .map(|s| set.id(s).ok_or_else(|| invalid(format!("visit {s} outside G"))))
            .collect::<Result<Vec<u32>>>()?;
        if !set.is_boundary(ids[0]) {
            return Err(invalid(format!("trace starts at {} which is not on the boundary", visits[0])));
        }
        for k in 1..ids.len() {
            let (a, b) = (&visits[k - 1], &visits[k]);
            if excursion[k] {
                if !set.is_boundary(ids[k - 1]) || !set.is_boundary(ids[k]) {
                    return Err(invalid(format!("excursion {a} -> {b} must leave and re-enter through the boundary")));
                }
            } else if b.sub(a).norm_sq() != 1 {
                return Err(invalid(format!("{a} -> {b} is not a nearest-neighbour step")));
            }
        }
        Ok(Self::from_parts(ids, excursion.to_vec()))
    }

    /// Site id of the start.
    pub fn start(&self) -> u32 {
        self.visits[0]
    }

    /// Visits to `G` with multiplicity.
    pub fn visits(&self) -> &[u32] {
        &self.visits
    }

    pub fn excursion_flags(&self) -> &[bool] {
        &self.excursion
    }

    /// Number of returns to `G` after leaving it.
    pub fn excursions(&self) -> usize {
        self.excursion.iter().filter(|&&f| f).count()
    }

    /// Distinct visited sites (the range intersected with `G`), ascending.
    pub fn visited(&self) -> &[u32] {
        &self.visited
    }

    pub fn to_record(&self, set: &LatticeSet) -> TraceRecord {
        TraceRecord {
            visits: self.visits.iter().map(|&i| set.site(i).clone()).collect(),
            excursions: self.excursion.clone(),
        }
    }
}

/// Serialised form of a [`GTrace`]: coordinates plus excursion flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub visits: Vec<Site>,
    pub excursions: Vec<bool>,
}

impl TraceRecord {
    pub fn into_trace(&self, set: &LatticeSet) -> Result<GTrace> {
        GTrace::from_sites(set, &self.visits, &self.excursions)
    }
}

struct ExitSite {
    site: Site,
    escape: f64,
    entrance: WeightedIndex<f64>,
    entrance_ids: Vec<u32>,
}

/// Samples starting points from `ē_G` and traces from any start.
///
/// All per-exit quantities are tabulated at construction, so the inner loop
/// of the default mode is integer table lookups.
pub struct TraceSampler {
    eq: Equilibrium,
    pot: Arc<PotentialTable>,
    mode: ExcursionMode,
    start: WeightedIndex<f64>,
    start_ids: Vec<u32>,
    exits: Vec<ExitSite>,
    // same layout as the set's neighbour table
    exit_of: Vec<u32>,
    bbox: (Vec<i64>, Vec<i64>),
    hit_grid: Option<HitGrid>,
    discards: AtomicU64,
}

/// `h(z) = P_z[H_G < ∞]` tabulated on the box the conditioned walk cannot
/// leave before handing over to the entrance law.
struct HitGrid {
    lo: Vec<i64>,
    extent: Vec<i64>,
    values: Vec<f64>,
}

// grids larger than this fall back to evaluating h on demand
const MAX_HIT_GRID: i64 = 4_000_000;

impl HitGrid {
    fn build(eq: &Equilibrium, pot: &PotentialTable, lo: &[i64], hi: &[i64], margin: i64) -> Option<Self> {
        let lo: Vec<i64> = lo.iter().map(|c| c - margin).collect();
        let extent: Vec<i64> = hi.iter().zip(&lo).map(|(h, l)| h + margin - l + 1).collect();
        let total = extent.iter().try_fold(1i64, |acc, &e| acc.checked_mul(e).filter(|&t| t <= MAX_HIT_GRID))?;
        let values = (0..total)
            .into_par_iter()
            .map(|mut k| {
                let site = Site::new(lo.iter().zip(&extent).map(|(l, e)| {
                    let c = l + k % e;
                    k /= e;
                    c
                }));
                if eq.set().contains(&site) { 1.0 } else { eq.hit_probability(&site, pot) }
            })
            .collect();
        Some(HitGrid { lo, extent, values })
    }

    fn get(&self, z: &Site) -> Option<f64> {
        let mut index = 0;
        let mut stride = 1;
        for ((&c, &l), &e) in z.coords().iter().zip(&self.lo).zip(&self.extent) {
            let k = c - l;
            if k < 0 || k >= e {
                return None;
            }
            index += k * stride;
            stride *= e;
        }
        Some(self.values[index as usize])
    }
}

impl TraceSampler {
    pub fn new(eq: Equilibrium, pot: Arc<PotentialTable>, mode: ExcursionMode) -> Result<Self> {
        let set = eq.set();
        let dim = set.dim();
        if let ExcursionMode::ConditionedWalk { budget, .. } = mode {
            if budget == 0 {
                return Err(invalid("conditioned walk budget must be positive"));
            }
        }
        let start_ids: Vec<u32> = set.boundary().iter().copied().filter(|&i| eq.ebar()[i as usize] > 0.0).collect();
        let start = WeightedIndex::new(start_ids.iter().map(|&i| eq.ebar()[i as usize]))
            .map_err(|e| invalid(format!("equilibrium measure cannot be sampled: {e}")))?;

        let mut exit_index: HashMap<Site, u32> = HashMap::new();
        let mut exits = Vec::new();
        let mut exit_of = vec![OUTSIDE; set.len() * 2 * dim];
        for id in 0..set.len() as u32 {
            for dir in 0..2 * dim {
                if set.neighbor_id(id, dir) != OUTSIDE {
                    continue;
                }
                let z = set.site(id).step(dir);
                let k = match exit_index.get(&z) {
                    Some(&k) => k,
                    None => {
                        let k = exits.len() as u32;
                        exits.push(Self::tabulate_exit(&eq, &pot, z.clone())?);
                        exit_index.insert(z, k);
                        k
                    }
                };
                exit_of[id as usize * 2 * dim + dir] = k;
            }
        }
        let lo: Vec<i64> = (0..dim).map(|k| set.sites().iter().map(|s| s.coords()[k]).min().unwrap()).collect();
        let hi: Vec<i64> = (0..dim).map(|k| set.sites().iter().map(|s| s.coords()[k]).max().unwrap()).collect();
        let hit_grid = match mode {
            ExcursionMode::ConditionedWalk { shortcut_radius: Some(r), .. } => {
                pot.precompute((r + 1 + set.diameter_inf()) as u64);
                HitGrid::build(&eq, &pot, &lo, &hi, r + 1)
            }
            _ => None,
        };
        Ok(TraceSampler {
            eq,
            pot,
            mode,
            start,
            start_ids,
            exits,
            exit_of,
            bbox: (lo, hi),
            hit_grid,
            discards: AtomicU64::new(0),
        })
    }

    fn tabulate_exit(eq: &Equilibrium, pot: &PotentialTable, z: Site) -> Result<ExitSite> {
        let h = eq.hit_probability(&z, pot);
        let weights = eq.entrance_distribution(&z, pot);
        let entrance_ids: Vec<u32> = (0..weights.len() as u32).filter(|&i| weights[i as usize] > 0.0).collect();
        let entrance = WeightedIndex::new(entrance_ids.iter().map(|&i| weights[i as usize])).map_err(|e| {
            Error::NumericalFailure {
                reason: format!("entrance law from {z} cannot be sampled: {e}"),
                condition: eq.condition(),
            }
        })?;
        Ok(ExitSite { site: z, escape: 1.0 - h, entrance, entrance_ids })
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.eq
    }

    pub fn set(&self) -> &LatticeSet {
        self.eq.set()
    }

    pub fn potential(&self) -> &Arc<PotentialTable> {
        &self.pot
    }

    pub fn mode(&self) -> ExcursionMode {
        self.mode
    }

    /// Number of traces discarded because a conditioned excursion ran over
    /// budget.
    pub fn discards(&self) -> u64 {
        self.discards.load(Ordering::Relaxed)
    }

    /// Distinct outside neighbours of `G`, with their escape probability.
    pub fn exit_sites(&self) -> impl Iterator<Item = (&Site, f64)> + '_ {
        self.exits.iter().map(|e| (&e.site, e.escape))
    }

    /// A starting site drawn from `ē_G`.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.start_ids[self.start.sample(rng)]
    }

    /// Trace from `start`. Over-budget excursions are reported as
    /// [`Error::BudgetExceeded`]; nothing is truncated.
    pub fn sample_trace<R: Rng + ?Sized>(&self, start: u32, rng: &mut R) -> Result<GTrace> {
        self.run(start, rng, None)
    }

    /// As [`TraceSampler::sample_trace`], also returning the exit sites
    /// from which the walk left `G` (the last one is where it escaped).
    pub fn sample_trace_with_exits<R: Rng + ?Sized>(
        &self,
        start: u32,
        rng: &mut R,
    ) -> Result<(GTrace, Vec<Site>)> {
        let mut log = Vec::new();
        let trace = self.run(start, rng, Some(&mut log))?;
        Ok((trace, log.into_iter().map(|k| self.exits[k as usize].site.clone()).collect()))
    }

    /// Samples a trace, resampling from the same start whenever a
    /// conditioned excursion runs over budget. Discards are counted and
    /// logged.
    pub fn sample_trace_retrying<R: Rng + ?Sized>(&self, start: u32, rng: &mut R) -> GTrace {
        loop {
            match self.run(start, rng, None) {
                Ok(t) => return t,
                Err(Error::BudgetExceeded { budget }) => {
                    let n = self.discards.fetch_add(1, Ordering::Relaxed) + 1;
                    log::warn!("discarded trace from {}: excursion over {budget} steps ({n} so far)", self.set().site(start));
                }
                Err(e) => panic!("trace sampling failed: {e}"),
            }
        }
    }

    /// Start from `ē_G`, then a full trace.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GTrace {
        let start = self.sample_start(rng);
        self.sample_trace_retrying(start, rng)
    }

    fn run<R: Rng + ?Sized>(&self, start: u32, rng: &mut R, mut log: Option<&mut Vec<u32>>) -> Result<GTrace> {
        let set = self.set();
        if start as usize >= set.len() {
            return Err(invalid("start id outside G"));
        }
        let two_d = 2 * set.dim();
        let mut cur = start;
        let mut visits = vec![start];
        let mut excursion = vec![false];
        loop {
            let dir = rng.random_range(0..two_d);
            let next = set.neighbor_id(cur, dir);
            if next != OUTSIDE {
                cur = next;
                visits.push(cur);
                excursion.push(false);
                continue;
            }
            let k = self.exit_of[cur as usize * two_d + dir];
            if let Some(log) = log.as_deref_mut() {
                log.push(k);
            }
            let exit = &self.exits[k as usize];
            if rng.random::<f64>() < exit.escape {
                break;
            }
            cur = match self.mode {
                ExcursionMode::Entrance => exit.entrance_ids[exit.entrance.sample(rng)],
                ExcursionMode::ConditionedWalk { budget, shortcut_radius } => {
                    self.conditioned_excursion(&exit.site, budget, shortcut_radius, rng)?
                }
            };
            visits.push(cur);
            excursion.push(true);
        }
        Ok(GTrace::from_parts(visits, excursion))
    }

    fn bbox_distance(&self, z: &Site) -> i64 {
        let (lo, hi) = &self.bbox;
        z.coords()
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&c, (&l, &h))| (l - c).max(c - h).max(0))
            .max()
            .unwrap_or(0)
    }

    fn conditioned_step(&self, z: &Site) -> Result<Vec<f64>> {
        let Some(grid) = &self.hit_grid else {
            return self.eq.conditioned_step_distribution(z, &self.pot);
        };
        let mut w = Vec::with_capacity(2 * z.dim());
        for dir in 0..2 * z.dim() {
            let y = z.step(dir);
            w.push(match grid.get(&y) {
                Some(h) => h,
                None => return self.eq.conditioned_step_distribution(z, &self.pot),
            });
        }
        Ok(w)
    }

    /// Runs the walk conditioned on `H_G < ∞` from `z` until it enters `G`.
    fn conditioned_excursion<R: Rng + ?Sized>(
        &self,
        z: &Site,
        budget: u64,
        shortcut_radius: Option<i64>,
        rng: &mut R,
    ) -> Result<u32> {
        let set = self.set();
        let mut z = z.clone();
        for _ in 0..budget {
            if shortcut_radius.is_some_and(|r| self.bbox_distance(&z) > r) {
                let w = self.eq.entrance_distribution(&z, &self.pot);
                let ids: Vec<u32> = (0..w.len() as u32).filter(|&i| w[i as usize] > 0.0).collect();
                let law = WeightedIndex::new(ids.iter().map(|&i| w[i as usize])).map_err(|e| Error::NumericalFailure {
                    reason: format!("entrance law from {z} cannot be sampled: {e}"),
                    condition: self.eq.condition(),
                })?;
                return Ok(ids[law.sample(rng)]);
            }
            let p = self.conditioned_step(&z)?;
            let law = WeightedIndex::new(&p).map_err(|e| Error::NumericalFailure {
                reason: format!("conditioned step from {z}: {e}"),
                condition: self.eq.condition(),
            })?;
            z = z.step(law.sample(rng));
            if let Some(id) = set.id(&z) {
                return Ok(id);
            }
        }
        Err(Error::BudgetExceeded { budget })
    }
}

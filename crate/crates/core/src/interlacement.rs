//! The interlacement process restricted to `G`, coupled across levels.
//!
//! One [`LevelProcess`] carries a Poisson(`u_max cap(G)`) number of traces
//! with i.i.d. uniform levels in `(0, u_max]`; restricting to levels `<= u`
//! yields a configuration with the law of the process at level `u`, and the
//! restrictions are nested by construction.

use bitvec::vec::BitVec;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::LatticeSet;
use crate::walk::{GTrace, TraceRecord, TraceSampler};

/// A trace together with its level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPoint {
    pub level: f64,
    pub trace: GTrace,
}

/// Level-indexed traces for all levels up to `u_max`, sorted by level.
#[derive(Clone, Debug)]
pub struct LevelProcess {
    u_max: f64,
    points: Vec<LevelPoint>,
}

/// Poisson count with mean `theta`, zero for `theta == 0`.
pub fn poisson_count<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> u64 {
    if theta <= 0.0 {
        return 0;
    }
    // the distribution is validated by the caller: theta is finite and positive
    Poisson::new(theta).expect("finite positive Poisson mean").sample(rng) as u64
}

/// Samples the coupled process on `[0, u_max]`.
pub fn sample_level_process<R: Rng + ?Sized>(
    sampler: &TraceSampler,
    u_max: f64,
    rng: &mut R,
) -> Result<LevelProcess> {
    if !(u_max >= 0.0) || !u_max.is_finite() {
        return Err(invalid(format!("level u_max = {u_max} must be finite and nonnegative")));
    }
    let count = poisson_count(u_max * sampler.equilibrium().cap(), rng);
    let mut points: Vec<LevelPoint> = (0..count)
        .map(|_| {
            // 1 - U lies in (0, 1]
            let level = u_max * (1.0 - rng.random::<f64>());
            LevelPoint { level, trace: sampler.sample(rng) }
        })
        .collect();
    points.sort_by(|a, b| a.level.total_cmp(&b.level));
    Ok(LevelProcess { u_max, points })
}

impl LevelProcess {
    /// Builds a process from explicit points, e.g. a fixture.
    pub fn from_points(u_max: f64, mut points: Vec<LevelPoint>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !(p.level > 0.0 && p.level <= u_max)) {
            return Err(invalid(format!("level {} outside (0, {u_max}]", p.level)));
        }
        points.sort_by(|a, b| a.level.total_cmp(&b.level));
        Ok(LevelProcess { u_max, points })
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn points(&self) -> &[LevelPoint] {
        &self.points
    }

    /// Number of points with level `<= u`.
    pub fn count_up_to(&self, u: f64) -> usize {
        self.points.partition_point(|p| p.level <= u)
    }

    /// The configuration at level `u`.
    pub fn restrict<'a>(&'a self, set: &'a LatticeSet, u: f64) -> Result<Configuration<'a>> {
        if !(0.0..=self.u_max).contains(&u) {
            return Err(invalid(format!("level {u} outside [0, {}]", self.u_max)));
        }
        let k = self.count_up_to(u);
        Ok(Configuration { set, u, points: self.points[..k].iter().collect() })
    }

    pub fn to_records(&self, set: &LatticeSet) -> Vec<PointRecord> {
        self.points
            .iter()
            .map(|p| PointRecord { level: p.level, trace: p.trace.to_record(set) })
            .collect()
    }

    pub fn from_records(set: &LatticeSet, u_max: f64, records: &[PointRecord]) -> Result<Self> {
        let points = records
            .iter()
            .map(|r| Ok(LevelPoint { level: r.level, trace: r.trace.into_trace(set)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(u_max, points)
    }
}

/// Fixture form of a level point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub level: f64,
    pub trace: TraceRecord,
}

/// The traces present at level `u`.
#[derive(Clone, Debug)]
pub struct Configuration<'a> {
    set: &'a LatticeSet,
    u: f64,
    points: Vec<&'a LevelPoint>,
}

impl<'a> Configuration<'a> {
    pub fn new(set: &'a LatticeSet, u: f64, points: Vec<&'a LevelPoint>) -> Self {
        Configuration { set, u, points }
    }

    pub fn empty(set: &'a LatticeSet) -> Self {
        Configuration { set, u: 0.0, points: Vec::new() }
    }

    pub fn set(&self) -> &'a LatticeSet {
        self.set
    }

    pub fn level(&self) -> f64 {
        self.u
    }

    pub fn points(&self) -> &[&'a LevelPoint] {
        &self.points
    }

    /// `M`, the number of traces.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with level `<= u`.
    pub fn restrict(&self, u: f64) -> Configuration<'a> {
        Configuration {
            set: self.set,
            u: u.min(self.u),
            points: self.points.iter().copied().filter(|p| p.level <= u).collect(),
        }
    }

    /// This configuration plus one more trace.
    pub fn with_point(&self, extra: &'a LevelPoint) -> Configuration<'a> {
        let mut points = self.points.clone();
        points.push(extra);
        Configuration { set: self.set, u: self.u, points }
    }

    /// This configuration with point `index` removed.
    pub fn without(&self, index: usize) -> Configuration<'a> {
        let mut points = self.points.clone();
        points.remove(index);
        Configuration { set: self.set, u: self.u, points }
    }

    /// Indicator vector (by site id) of the interlacement set.
    pub fn interlacement_mask(&self) -> BitVec {
        let mut mask = BitVec::repeat(false, self.set.len());
        for p in &self.points {
            for &i in p.trace.visited() {
                mask.set(i as usize, true);
            }
        }
        mask
    }

    /// Site ids of `I^u_G`, ascending.
    pub fn interlacement_set(&self) -> Vec<u32> {
        self.interlacement_mask().iter_ones().map(|i| i as u32).collect()
    }

    /// Site ids of `V^u_G = G \ I^u_G`, ascending.
    pub fn vacant_set(&self) -> Vec<u32> {
        self.interlacement_mask().iter_zeros().map(|i| i as u32).collect()
    }
}

#![allow(dead_code)]

pub mod watson;

use std::sync::Arc;

use interlace::capacity::equilibrium_measure;
use interlace::events::EventSpec;
use interlace::interlacement::{LevelProcess, PointRecord};
use interlace::lattice::{LatticeSet, Site};
use interlace::walk::{ExcursionMode, TraceSampler};
use interlace::PotentialTable;
use serde::Deserialize;

pub fn potential() -> Arc<PotentialTable> {
    Arc::new(PotentialTable::new(3).unwrap())
}

pub fn sampler_for(set: &LatticeSet, mode: ExcursionMode) -> Arc<TraceSampler> {
    let pot = potential();
    let eq = equilibrium_measure(set, &pot).unwrap();
    Arc::new(TraceSampler::new(eq, pot, mode).unwrap())
}

pub fn box_sampler(sides: &[u64]) -> Arc<TraceSampler> {
    sampler_for(&LatticeSet::cube(sides).unwrap(), ExcursionMode::default())
}

pub fn site(c: [i64; 3]) -> Site {
    Site::new(c)
}

#[derive(Deserialize)]
pub struct Fixture {
    pub origin: Site,
    pub sides: Vec<u64>,
    pub event: String,
    pub u_max: f64,
    pub expected_n_plus: usize,
    pub points: Vec<PointRecord>,
}

impl Fixture {
    pub fn load(name: &str) -> Fixture {
        let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    pub fn set(&self) -> LatticeSet {
        LatticeSet::boxed(&self.origin, &self.sides).unwrap()
    }

    pub fn event(&self) -> EventSpec {
        self.event.parse().unwrap()
    }

    pub fn process(&self, set: &LatticeSet) -> LevelProcess {
        LevelProcess::from_records(set, self.u_max, &self.points).unwrap()
    }
}

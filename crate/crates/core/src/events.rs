//! Increasing events on configurations of traces.
//!
//! An event is increasing when adding a trace can never turn it from true to
//! false. The built-in events only look at the interlacement set, which is
//! monotone in the configuration, so they are increasing whenever their site
//! predicate is; [`check_monotone`] tests the contract empirically for any
//! implementation.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use bitvec::slice::BitSlice;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interlacement::{sample_level_process, Configuration, LevelPoint};
use crate::lattice::{LatticeSet, Site, OUTSIDE};
use crate::walk::TraceSampler;

/// A predicate on configurations that is monotone in the traces.
pub trait IncreasingEvent: Send + Sync {
    fn name(&self) -> String;

    fn occurs(&self, config: &Configuration<'_>) -> bool;
}

/// Built-in events, by parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventSpec {
    /// `I ≠ ∅`.
    Nonempty,
    /// `v` and `z` joined by a nearest-neighbour path inside `I`.
    TwoPoint { v: Site, z: Site },
    /// `x ∈ I`.
    Site { x: Site },
    /// `I = G`.
    FullCover,
    /// The sure event.
    Always,
}

impl EventSpec {
    /// Resolves site parameters against `set`.
    pub fn bind(&self, set: &LatticeSet) -> Result<Event> {
        let id = |s: &Site| {
            set.id(s).ok_or_else(|| invalid(format!("event parameter {s} is not a site of G")))
        };
        let kind = match self {
            EventSpec::Nonempty => Kind::Nonempty,
            EventSpec::TwoPoint { v, z } => Kind::TwoPoint(id(v)?, id(z)?),
            EventSpec::Site { x } => Kind::Site(id(x)?),
            EventSpec::FullCover => Kind::FullCover,
            EventSpec::Always => Kind::Always,
        };
        Ok(Event { spec: self.clone(), kind })
    }

    /// Closed forms known for the event, if any.
    pub fn closed_form(&self, cap: f64, u: f64) -> Option<ClosedForm> {
        let theta = u * cap;
        match self {
            EventSpec::Nonempty => Some(ClosedForm {
                probability: 1.0 - (-theta).exp(),
                derivative: cap * (-theta).exp(),
                conditional_mean: if theta > 0.0 { Some(theta / -(-theta).exp_m1()) } else { None },
            }),
            EventSpec::Always => Some(ClosedForm {
                probability: 1.0,
                derivative: 0.0,
                conditional_mean: Some(theta),
            }),
            _ => None,
        }
    }
}

/// Exact values of `P^u(A)`, its derivative and `E^u[M | A]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub probability: f64,
    pub derivative: f64,
    pub conditional_mean: Option<f64>,
}

impl fmt::Display for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSpec::Nonempty => write!(f, "nonempty"),
            EventSpec::TwoPoint { v, z } => write!(f, "two_point v={v} z={z}"),
            EventSpec::Site { x } => write!(f, "site x={x}"),
            EventSpec::FullCover => write!(f, "full_cover"),
            EventSpec::Always => write!(f, "always"),
        }
    }
}

impl FromStr for EventSpec {
    type Err = Error;

    /// `nonempty`, `two_point v=(x,y,z) z=(x,y,z)`, `site x=(..)`,
    /// `full_cover`, `always`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let params = parse_params(rest)?;
        let get = |key: &str| {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| invalid(format!("event {head:?} needs parameter {key}=(..)")))
        };
        let expect = |keys: &[&str]| {
            match params.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(invalid(format!("unknown parameter {k:?} for event {head:?}"))),
                None => Ok(()),
            }
        };
        match head {
            "nonempty" => expect(&[]).map(|_| EventSpec::Nonempty),
            "full_cover" => expect(&[]).map(|_| EventSpec::FullCover),
            "always" => expect(&[]).map(|_| EventSpec::Always),
            "site" => {
                expect(&["x"])?;
                Ok(EventSpec::Site { x: get("x")? })
            }
            "two_point" => {
                expect(&["v", "z"])?;
                Ok(EventSpec::TwoPoint { v: get("v")?, z: get("z")? })
            }
            other => Err(invalid(format!("unknown event {other:?}"))),
        }
    }
}

// key=(a,b,c) pairs separated by whitespace
fn parse_params(s: &str) -> Result<Vec<(String, Site)>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let (key, after) = rest
            .split_once('=')
            .ok_or_else(|| invalid(format!("expected key=(..) in {rest:?}")))?;
        let after = after.trim_start();
        let end = if after.starts_with('(') {
            after.find(')').map(|i| i + 1)
        } else {
            after.find(char::is_whitespace).or(Some(after.len()))
        }
        .ok_or_else(|| invalid(format!("unterminated site in {after:?}")))?;
        out.push((key.trim().to_string(), after[..end].parse()?));
        rest = after[end..].trim_start();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Nonempty,
    TwoPoint(u32, u32),
    Site(u32),
    FullCover,
    Always,
}

/// A built-in event bound to a particular set.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    spec: EventSpec,
    kind: Kind,
}

impl Event {
    pub fn spec(&self) -> &EventSpec {
        &self.spec
    }

    /// Evaluates the site predicate on an interlacement indicator.
    pub fn occurs_on(&self, set: &LatticeSet, occupied: &BitSlice) -> bool {
        match self.kind {
            Kind::Nonempty => occupied.any(),
            Kind::TwoPoint(v, z) => connected(set, occupied, v, z),
            Kind::Site(x) => occupied[x as usize],
            Kind::FullCover => occupied.all(),
            Kind::Always => true,
        }
    }
}

impl IncreasingEvent for Event {
    fn name(&self) -> String {
        self.spec.to_string()
    }

    fn occurs(&self, config: &Configuration<'_>) -> bool {
        if self.kind == Kind::Always {
            return true;
        }
        self.occurs_on(config.set(), &config.interlacement_mask())
    }
}

/// Evaluates `ev` on `c`.
pub fn evaluate(ev: &dyn IncreasingEvent, c: &Configuration<'_>) -> bool {
    ev.occurs(c)
}

/// Whether a nearest-neighbour path inside `occupied` joins `v` and `z`.
/// A site is joined to itself exactly when it is occupied.
pub fn connected(set: &LatticeSet, occupied: &BitSlice, v: u32, z: u32) -> bool {
    if !occupied[v as usize] || !occupied[z as usize] {
        return false;
    }
    if v == z {
        return true;
    }
    let two_d = 2 * set.dim();
    let mut seen = vec![false; set.len()];
    let mut queue = VecDeque::from([v]);
    seen[v as usize] = true;
    while let Some(x) = queue.pop_front() {
        for dir in 0..two_d {
            let y = set.neighbor_id(x, dir);
            if y == OUTSIDE || seen[y as usize] || !occupied[y as usize] {
                continue;
            }
            if y == z {
                return true;
            }
            seen[y as usize] = true;
            queue.push_back(y);
        }
    }
    false
}

/// Outcome of [`check_monotone`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub event: String,
    pub trials: u64,
    pub violations: u64,
}

/// Samples configurations at level `u`, adds one independent trace and
/// counts true-to-false flips of `ev`.
pub fn check_monotone<R: Rng + ?Sized>(
    ev: &dyn IncreasingEvent,
    sampler: &TraceSampler,
    u: f64,
    trials: u64,
    rng: &mut R,
) -> Result<MonotoneReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let set = sampler.set();
    let mut violations = 0;
    for _ in 0..trials {
        let lp = sample_level_process(sampler, u, rng)?;
        let c = lp.restrict(set, u)?;
        let extra = LevelPoint { level: u, trace: sampler.sample(rng) };
        if ev.occurs(&c) && !ev.occurs(&c.with_point(&extra)) {
            violations += 1;
        }
    }
    Ok(MonotoneReport { event: ev.name(), trials, violations })
}

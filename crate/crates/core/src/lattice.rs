//! Sites of `Z^d`, finite target sets and the simple random walk step.
//!
//! A [`LatticeSet`] keeps a dense id for every site, the internal boundary
//! (sites with at least one neighbour outside the set) and a neighbour table
//! so that walks inside the set never hash coordinates.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{invalid, Error, Result};

/// Smallest dimension in which the simple random walk is transient.
pub const MIN_DIMENSION: usize = 3;

/// Marker stored in the neighbour table for a step that leaves the set.
pub const OUTSIDE: u32 = u32::MAX;

/// A point of the integer lattice.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(SmallVec<[i64; 4]>);

impl Site {
    pub fn new(coords: impl IntoIterator<Item = i64>) -> Self {
        Site(coords.into_iter().collect())
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    /// The unit vector `sign * e_axis`.
    pub fn unit(dim: usize, axis: usize, sign: i64) -> Self {
        let mut s = Self::origin(dim);
        s.0[axis] = sign;
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|a| -a).collect())
    }

    /// Neighbour in direction `dir`, where directions are ordered
    /// `+e_0, -e_0, +e_1, -e_1, ...`.
    pub fn step(&self, dir: usize) -> Site {
        let mut s = self.clone();
        s.0[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
        s
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|a| a * a).sum()
    }

    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).max().unwrap_or(0)
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|a| a.abs()).sum()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for Site {
    type Err = Error;

    /// Parses `(x,y,z)` or `x,y,z`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('(').trim_end_matches(')');
        let coords = body
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<i64>()
                    .map_err(|_| invalid(format!("bad coordinate {c:?} in site {s:?}")))
            })
            .collect::<Result<SmallVec<[i64; 4]>>>()?;
        if coords.is_empty() {
            return Err(invalid(format!("empty site {s:?}")));
        }
        Ok(Site(coords))
    }
}

/// The `2d` nearest neighbours of `x`, in direction order.
pub fn neighbors(x: &Site) -> Vec<Site> {
    (0..2 * x.dim()).map(|dir| x.step(dir)).collect()
}

/// One simple random walk step: a uniformly chosen neighbour.
pub fn srw_step<R: Rng + ?Sized>(x: &Site, rng: &mut R) -> Site {
    x.step(rng.random_range(0..2 * x.dim()))
}

/// Sites of `sites` having at least one neighbour outside of it.
pub fn internal_boundary(sites: &[Site]) -> Result<Vec<Site>> {
    let set = LatticeSet::from_sites(sites.iter().cloned())?;
    Ok(set.boundary_sites().cloned().collect())
}

/// Checks that `d` is a supported lattice dimension.
pub fn check_dimension(d: usize) -> Result<()> {
    if d < MIN_DIMENSION {
        Err(Error::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

/// A finite, nonempty set of lattice sites with dense ids.
#[derive(Clone, Debug)]
pub struct LatticeSet {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, u32>,
    is_boundary: Vec<bool>,
    boundary: Vec<u32>,
    // row-major, 2d entries per site; OUTSIDE for steps leaving the set
    nbr: Vec<u32>,
}

impl LatticeSet {
    /// Builds a set from arbitrary sites. Duplicates are merged; ids follow
    /// lexicographic order of the coordinates.
    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        let Some(first) = sites.first() else {
            return Err(invalid("lattice set must be nonempty"));
        };
        let dim = first.dim();
        check_dimension(dim)?;
        if let Some(bad) = sites.iter().find(|s| s.dim() != dim) {
            return Err(invalid(format!("site {bad} has dimension {} != {dim}", bad.dim())));
        }
        sites.sort();
        sites.dedup();
        if sites.len() >= OUTSIDE as usize {
            return Err(invalid("lattice set too large"));
        }
        let index: HashMap<Site, u32> = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let mut nbr = Vec::with_capacity(sites.len() * 2 * dim);
        let mut is_boundary = vec![false; sites.len()];
        for (i, s) in sites.iter().enumerate() {
            for dir in 0..2 * dim {
                match index.get(&s.step(dir)) {
                    Some(&j) => nbr.push(j),
                    None => {
                        nbr.push(OUTSIDE);
                        is_boundary[i] = true;
                    }
                }
            }
        }
        let boundary = (0..sites.len() as u32)
            .filter(|&i| is_boundary[i as usize])
            .collect();
        Ok(LatticeSet { dim, sites, index, is_boundary, boundary, nbr })
    }

    /// The box `origin + [0, sides_0) x ... x [0, sides_{d-1})`.
    pub fn boxed(origin: &Site, sides: &[u64]) -> Result<Self> {
        if origin.dim() != sides.len() {
            return Err(invalid("box origin and side lengths differ in dimension"));
        }
        if sides.iter().any(|&s| s == 0) {
            return Err(invalid("box side lengths must be positive"));
        }
        let total: u64 = sides.iter().product();
        let mut out = Vec::with_capacity(total as usize);
        let mut offset = vec![0i64; sides.len()];
        for _ in 0..total {
            out.push(Site::new(origin.coords().iter().zip(&offset).map(|(o, k)| o + k)));
            for (k, &side) in offset.iter_mut().zip(sides).rev() {
                *k += 1;
                if (*k as u64) < side {
                    break;
                }
                *k = 0;
            }
        }
        Self::from_sites(out)
    }

    /// Box with origin at zero.
    pub fn cube(sides: &[u64]) -> Result<Self> {
        Self::boxed(&Site::origin(sides.len()), sides)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn site(&self, id: u32) -> &Site {
        &self.sites[id as usize]
    }

    pub fn id(&self, x: &Site) -> Option<u32> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    pub fn is_boundary(&self, id: u32) -> bool {
        self.is_boundary[id as usize]
    }

    /// Ids of the internal boundary, ascending.
    pub fn boundary(&self) -> &[u32] {
        &self.boundary
    }

    pub fn boundary_sites(&self) -> impl Iterator<Item = &Site> + '_ {
        self.boundary.iter().map(|&i| &self.sites[i as usize])
    }

    /// Neighbour of site `id` in direction `dir`, or [`OUTSIDE`].
    #[inline]
    pub fn neighbor_id(&self, id: u32, dir: usize) -> u32 {
        self.nbr[id as usize * 2 * self.dim + dir]
    }

    /// Lattice distance (sup norm) from `x` to the nearest site of the set.
    pub fn distance_inf(&self, x: &Site) -> i64 {
        self.sites.iter().map(|s| x.sub(s).norm_inf()).min().unwrap_or(0)
    }

    /// Largest sup-norm displacement between two sites of the set.
    pub fn diameter_inf(&self) -> i64 {
        let d = self.dim;
        (0..d)
            .map(|k| {
                let lo = self.sites.iter().map(|s| s.coords()[k]).min().unwrap_or(0);
                let hi = self.sites.iter().map(|s| s.coords()[k]).max().unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }
}

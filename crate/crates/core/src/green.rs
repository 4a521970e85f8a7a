//! Lattice Green's function of the simple random walk on `Z^d`, `d >= 3`.
//!
//! `g(v)` is the expected number of visits to `v` by the walk started at the
//! origin. It equals the expected occupation time of the continuous-time
//! walk with unit jump rate, whose transition kernel factorises over axes:
//!
//! ```text
//! g(v) = ∫_0^∞ Π_i e^{-t/d} I_{|v_i|}(t/d) dt
//! ```
//!
//! The integrand decays like `t^{-d/2}`, so it is integrated with an
//! exp-sinh (double exponential) rule, which handles both the algebraic tail
//! and any bump at `t ~ |v|^2` without tuning. Values are cached by
//! canonical displacement (absolute values, sorted), which is exact because
//! `g` is invariant under the hyperoctahedral group.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::RwLock;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::bessel::scaled_bessel_i;
use crate::error::{invalid, Error, Result};
use crate::lattice::{check_dimension, LatticeSet, Site};

/// Default absolute accuracy promised for every entry.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Default Euclidean radius beyond which the far-field asymptotic is used.
pub const DEFAULT_FAR_FIELD_RADIUS: f64 = 1024.0;

const CACHE_FORMAT: &str = "interlace-green-table";
const CACHE_VERSION: u32 = 1;

// exp-sinh nodes: t = exp(pi/2 sinh s), s in [S_MIN, S_MAX] with step STEP.
const STEP: f64 = 1.0 / 32.0;
const S_MIN: f64 = -4.5;
const S_MAX: f64 = 5.5;

type Key = SmallVec<[u64; 4]>;

fn canonical(v: &[i64]) -> Key {
    let mut k: Key = v.iter().map(|c| c.unsigned_abs()).collect();
    k.sort_unstable();
    k
}

/// Evaluates the occupation-time integral for one canonical displacement.
fn integral(dim: usize, key: &[u64]) -> f64 {
    let d = dim as f64;
    let n = ((S_MAX - S_MIN) / STEP).round() as usize;
    let mut sum = 0.0;
    for k in 0..=n {
        let s = S_MIN + k as f64 * STEP;
        let t = (FRAC_PI_2 * s.sinh()).exp();
        let jac = t * FRAC_PI_2 * s.cosh();
        let x = t / d;
        let mut f = 1.0;
        // factors with equal order share one evaluation
        let mut i = 0;
        while i < key.len() {
            let mut j = i;
            while j < key.len() && key[j] == key[i] {
                j += 1;
            }
            f *= scaled_bessel_i(key[i], x).powi((j - i) as i32);
            i = j;
        }
        sum += f * jac;
    }
    sum * STEP
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    /// Euclidean switchover radius.
    pub radius: f64,
    /// `C_d` such that `g(v) ≈ C_d / |v|^{d-2}`.
    pub constant: f64,
}

/// Cached Green's function values for one dimension.
///
/// Entries are computed on first request and then never change, so shared
/// read access from many threads is safe and deterministic.
#[derive(Debug)]
pub struct PotentialTable {
    dim: usize,
    epsilon: f64,
    far_field: Option<FarField>,
    cache: RwLock<HashMap<Key, f64>>,
}

impl PotentialTable {
    /// Table with default precision and the default far-field switchover.
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_far_field(dim, DEFAULT_EPSILON, Some(DEFAULT_FAR_FIELD_RADIUS))
    }

    /// Table that evaluates every displacement by quadrature.
    pub fn exact(dim: usize) -> Result<Self> {
        Self::with_far_field(dim, DEFAULT_EPSILON, None)
    }

    /// Table with a far-field switchover at `radius`. The asymptotic
    /// constant is fitted on the first axis at the radius and validated
    /// against quadrature on a diagonal at the same radius; disagreement
    /// above `10 * epsilon` is an error.
    pub fn with_far_field(dim: usize, epsilon: f64, radius: Option<f64>) -> Result<Self> {
        check_dimension(dim)?;
        if !(epsilon > 0.0) {
            return Err(invalid("green precision must be positive"));
        }
        let mut table = PotentialTable { dim, epsilon, far_field: None, cache: RwLock::default() };
        if let Some(radius) = radius {
            let r = radius.ceil() as i64;
            if r < 2 {
                return Err(invalid("far-field radius must be at least 2"));
            }
            let mut axis = vec![0i64; dim];
            axis[0] = r;
            let constant = integral(dim, &canonical(&axis)) * (r as f64).powi(dim as i32 - 2);
            let far = FarField { radius: r as f64, constant };
            // a direction far from the fitting axis
            let c = ((r * r) as f64 / dim as f64).sqrt().ceil() as i64;
            let diag = vec![c; dim];
            let exact = integral(dim, &canonical(&diag));
            let approx = asymptotic(dim, &far, &diag);
            if (exact - approx).abs() > 10.0 * epsilon {
                return Err(Error::NumericalFailure {
                    reason: format!(
                        "far-field asymptotic at radius {r} misses quadrature by {:.3e}",
                        (exact - approx).abs()
                    ),
                    condition: f64::NAN,
                });
            }
            table.far_field = Some(far);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn far_field(&self) -> Option<FarField> {
        self.far_field
    }

    /// `g(0, v)`.
    pub fn green(&self, v: &[i64]) -> f64 {
        assert_eq!(v.len(), self.dim, "displacement dimension mismatch");
        if let Some(far) = &self.far_field {
            let r2: i64 = v.iter().map(|c| c * c).sum();
            if r2 as f64 >= far.radius * far.radius {
                return asymptotic(self.dim, far, v);
            }
        }
        let key = canonical(v);
        if let Some(&g) = self.cache.read().unwrap().get(&key) {
            return g;
        }
        let g = integral(self.dim, &key);
        self.cache.write().unwrap().insert(key, g);
        g
    }

    /// `g(x, y) = g(0, x - y)`.
    pub fn green_between(&self, x: &Site, y: &Site) -> f64 {
        let v: SmallVec<[i64; 4]> = x.coords().iter().zip(y.coords()).map(|(a, b)| a - b).collect();
        self.green(&v)
    }

    /// Fills the cache for every displacement with `|v|_inf <= radius`.
    pub fn precompute(&self, radius: u64) {
        let mut keys = Vec::new();
        nondecreasing(self.dim, 0, radius, &mut SmallVec::new(), &mut keys);
        let missing: Vec<Key> = {
            let cache = self.cache.read().unwrap();
            keys.into_iter().filter(|k| !cache.contains_key(k)).collect()
        };
        let values: Vec<(Key, f64)> = missing
            .into_par_iter()
            .map(|k| {
                let g = integral(self.dim, &k);
                (k, g)
            })
            .collect();
        self.cache.write().unwrap().extend(values);
    }

    pub fn cached_len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    /// Writes the cached entries as versioned JSON.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries: Vec<CacheEntry> = self
            .cache
            .read()
            .unwrap()
            .iter()
            .map(|(k, &value)| CacheEntry { displacement: k.to_vec(), value })
            .collect();
        entries.sort_by(|a, b| a.displacement.cmp(&b.displacement));
        let file = CacheFile {
            format: CACHE_FORMAT.to_string(),
            version: CACHE_VERSION,
            dimension: self.dim,
            epsilon: self.epsilon,
            far_field: self.far_field,
            entries,
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Cache(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
    }

    /// Reads a table written by [`PotentialTable::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
        let file: CacheFile = serde_json::from_str(&text).map_err(|e| Error::Cache(e.to_string()))?;
        if file.format != CACHE_FORMAT || file.version != CACHE_VERSION {
            return Err(Error::Cache(format!(
                "unsupported cache {} v{}",
                file.format, file.version
            )));
        }
        check_dimension(file.dimension)?;
        let mut cache = HashMap::with_capacity(file.entries.len());
        for e in file.entries {
            if e.displacement.len() != file.dimension {
                return Err(Error::Cache("entry dimension mismatch".into()));
            }
            let mut key: Key = e.displacement.into_iter().collect();
            key.sort_unstable();
            cache.insert(key, e.value);
        }
        Ok(PotentialTable {
            dim: file.dimension,
            epsilon: file.epsilon,
            far_field: file.far_field,
            cache: RwLock::new(cache),
        })
    }
}

fn nondecreasing(dim: usize, lo: u64, hi: u64, prefix: &mut Key, out: &mut Vec<Key>) {
    if prefix.len() == dim {
        out.push(prefix.clone());
        return;
    }
    for c in lo..=hi {
        prefix.push(c);
        nondecreasing(dim, c, hi, prefix, out);
        prefix.pop();
    }
}

fn asymptotic(dim: usize, far: &FarField, v: &[i64]) -> f64 {
    let r = (v.iter().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
    far.constant / r.powi(dim as i32 - 2)
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    dimension: usize,
    epsilon: f64,
    far_field: Option<FarField>,
    entries: Vec<CacheEntry>,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    displacement: Vec<u64>,
    value: f64,
}

/// Matrix of `g(x - y)` over the sites of `set`, in id order.
pub fn green_matrix(set: &LatticeSet, pot: &PotentialTable) -> Result<DMatrix<f64>> {
    if set.dim() != pot.dim() {
        return Err(invalid(format!(
            "set dimension {} differs from potential table dimension {}",
            set.dim(),
            pot.dim()
        )));
    }
    let n = set.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = pot.green_between(set.site(i as u32), set.site(j as u32));
            m[(i, j)] = g;
            m[(j, i)] = g;
        }
    }
    Ok(m)
}

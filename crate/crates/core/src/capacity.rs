//! Equilibrium (harmonic) measure, capacity and hitting probabilities of a
//! finite set.
//!
//! By the last-exit decomposition `P_z[H_G < ∞] = Σ_y g(z - y) e_G(y)`, and
//! the left side is 1 on `G`, so `e_G` solves `M e = 1` with `M` the Green
//! matrix of `G`. The same matrix gives the first-entrance distribution from
//! an outside site: `z ↦ P_z[X_{H_G} = y, H_G < ∞]` is the unique bounded
//! function harmonic off `G`, vanishing at infinity and equal to `1_{y}` on
//! `G`, which is `Σ_x g(z - x) (M^{-1})_{x y}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::green::{green_matrix, PotentialTable};
use crate::lattice::{LatticeSet, Site};

/// Negative roundoff down to this value is clamped to zero.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

/// Condition estimates above this are treated as a failed solve.
pub const MAX_CONDITION: f64 = 1e13;

/// Equilibrium measure of a finite set.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    set: LatticeSet,
    e: Vec<f64>,
    ebar: Vec<f64>,
    cap: f64,
    residual: f64,
    condition: f64,
    interior_leak: f64,
    inverse: DMatrix<f64>,
}

/// Solves `green_matrix(G) e = 1` by LU with partial pivoting.
pub fn equilibrium_measure(set: &LatticeSet, pot: &PotentialTable) -> Result<Equilibrium> {
    let m = green_matrix(set, pot)?;
    let n = set.len();
    let norm1 = |a: &DMatrix<f64>| {
        a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let lu = m.clone().lu();
    let inverse = lu.try_inverse().ok_or_else(|| Error::NumericalFailure {
        reason: "green matrix is singular".into(),
        condition: f64::INFINITY,
    })?;
    let condition = norm1(&m) * norm1(&inverse);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::NumericalFailure {
            reason: "green matrix is ill-conditioned".into(),
            condition,
        });
    }
    let ones = DVector::from_element(n, 1.0);
    let raw = lu.solve(&ones).ok_or_else(|| Error::NumericalFailure {
        reason: "LU solve failed".into(),
        condition,
    })?;
    let residual = (&m * &raw - &ones).amax();

    let cap: f64 = raw.iter().sum();
    let mut e = Vec::with_capacity(n);
    let mut interior_leak: f64 = 0.0;
    for (i, &v) in raw.iter().enumerate() {
        if v < -CLAMP_TOLERANCE {
            return Err(Error::NumericalFailure {
                reason: format!("equilibrium measure negative ({v:e}) at {}", set.site(i as u32)),
                condition,
            });
        }
        if set.is_boundary(i as u32) {
            e.push(v.max(0.0));
        } else {
            interior_leak = interior_leak.max(v.abs());
            e.push(0.0);
        }
    }
    let total: f64 = e.iter().sum();
    if !(cap > 0.0) || !(total > 0.0) {
        return Err(Error::NumericalFailure { reason: "nonpositive capacity".into(), condition });
    }
    let ebar = e.iter().map(|v| v / total).collect();
    Ok(Equilibrium { set: set.clone(), e, ebar, cap, residual, condition, interior_leak, inverse })
}

impl Equilibrium {
    pub fn set(&self) -> &LatticeSet {
        &self.set
    }

    /// `cap(G)`, the sum of the solved measure.
    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// `e_G` by site id (zero on the interior).
    pub fn e(&self) -> &[f64] {
        &self.e
    }

    /// Normalised measure `ē_G` by site id.
    pub fn ebar(&self) -> &[f64] {
        &self.ebar
    }

    pub fn e_at(&self, x: &Site) -> f64 {
        self.set.id(x).map_or(0.0, |i| self.e[i as usize])
    }

    /// `‖M e - 1‖_∞` for the solved system.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Largest magnitude the solve left on interior sites before zeroing.
    pub fn interior_leak(&self) -> f64 {
        self.interior_leak
    }

    /// `P_z[H_G < ∞]`, clamped to `[0, 1]`.
    pub fn hit_probability(&self, z: &Site, pot: &PotentialTable) -> f64 {
        let h: f64 = self
            .set
            .boundary()
            .iter()
            .map(|&y| pot.green_between(z, self.set.site(y)) * self.e[y as usize])
            .sum();
        h.clamp(0.0, 1.0)
    }

    /// First-entrance weights `P_z[X_{H_G} = y, H_G < ∞]` by site id.
    /// They sum to `hit_probability(z)` and vanish off the boundary.
    pub fn entrance_distribution(&self, z: &Site, pot: &PotentialTable) -> Vec<f64> {
        let n = self.set.len();
        let g = DVector::from_iterator(n, self.set.sites().iter().map(|x| pot.green_between(z, x)));
        let w = &self.inverse * g;
        (0..n)
            .map(|i| if self.set.is_boundary(i as u32) { w[i].max(0.0) } else { 0.0 })
            .collect()
    }

    /// Transition law of the walk from `z ∉ G` conditioned to hit `G`: the
    /// neighbour `w` gets weight proportional to `h(w)`, with `h = 1` on `G`.
    pub fn conditioned_step_distribution(&self, z: &Site, pot: &PotentialTable) -> Result<Vec<f64>> {
        if self.set.contains(z) {
            return Err(invalid(format!("conditioned step from {z}, which lies in G")));
        }
        let mut w: Vec<f64> = (0..2 * z.dim())
            .map(|dir| {
                let y = z.step(dir);
                if self.set.contains(&y) {
                    1.0
                } else {
                    self.hit_probability(&y, pot)
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NumericalFailure {
                reason: format!("conditioned step weights vanish at {z}"),
                condition: self.condition,
            });
        }
        w.iter_mut().for_each(|x| *x /= total);
        Ok(w)
    }

    /// Machine-readable summary used by the CLI.
    pub fn summary(&self) -> CapacitySummary {
        CapacitySummary {
            cap: self.cap,
            residual: self.residual,
            condition: self.condition,
            boundary: self
                .set
                .boundary()
                .iter()
                .map(|&i| BoundaryWeight {
                    site: self.set.site(i).clone(),
                    e: self.e[i as usize],
                    ebar: self.ebar[i as usize],
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacitySummary {
    pub cap: f64,
    pub residual: f64,
    pub condition: f64,
    pub boundary: Vec<BoundaryWeight>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryWeight {
    pub site: Site,
    pub e: f64,
    pub ebar: f64,
}

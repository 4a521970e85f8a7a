//! Estimators for `d/du P^u(A)` and the checks built on them.
//!
//! Four routes to the same derivative:
//!
//! * **added trajectory**: `cap(G) · P[ω_u ∉ A, ω_u + δ_w ∈ A]` with `w` an
//!   independent trace started from `ē_G`; also valid at `u = 0`.
//! * **pivotal**: `E^u[N⁺] / u`, `N⁺` the number of plus-pivotal traces.
//! * **conditional**: `(E^u[M 1_A] - u cap(G) P^u(A)) / u`, `M` the number
//!   of traces.
//! * **finite difference**: `(1_A(ω_{u+h}) - 1_A(ω_{u-h})) / 2h` on one
//!   level-coupled realization, so every sample difference is 0 or 1.
//!
//! Replica `i` of every estimator draws from its own ChaCha stream derived
//! from `(seed, estimator, i)` and results are reduced in replica order, so
//! estimates are bit-identical for any number of worker threads.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::events::{ClosedForm, IncreasingEvent};
use crate::interlacement::{sample_level_process, Configuration, LevelPoint, LevelProcess};
use crate::pivotal::count_plus_pivotal;
use crate::stats::{Estimate, EstimateMeta};
use crate::walk::TraceSampler;

/// Width, in standard errors, of the intervals compared by default.
pub const DEFAULT_SIGMA: f64 = 3.0;

/// Pairwise disagreement beyond this many combined standard errors fails a
/// run outright.
pub const DISAGREEMENT_SIGMA: f64 = 4.0;

/// Default finite-difference half-width relative to `u`.
pub const DEFAULT_RELATIVE_H: f64 = 0.05;

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    Probability = 1,
    AddedTrajectory = 2,
    Pivotal = 3,
    Conditional = 4,
    FiniteDifference = 5,
    ConditionalMean = 6,
    PivotalCount = 7,
    DensityScan = 8,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The RNG for replica `index` of stream `stream` under master `seed`.
pub fn replica_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(stream)));
    rng.set_stream(index);
    rng
}

/// One named pass/fail assertion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// Monte Carlo driver over one target set.
pub struct Harness {
    sampler: Arc<TraceSampler>,
    pool: Option<rayon::ThreadPool>,
}

impl Harness {
    pub fn new(sampler: Arc<TraceSampler>) -> Self {
        Harness { sampler, pool: None }
    }

    /// Runs replicas on a dedicated pool of `workers` threads.
    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("worker count must be positive"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn sampler(&self) -> &TraceSampler {
        &self.sampler
    }

    pub fn cap(&self) -> f64 {
        self.sampler.equilibrium().cap()
    }

    fn meta(&self, ev: &dyn IncreasingEvent, u: f64) -> EstimateMeta {
        EstimateMeta { u, cap: self.cap(), event: ev.name() }
    }

    fn replicate<T, F>(&self, seed: u64, stream: u64, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
    {
        let run = || {
            (0..n)
                .into_par_iter()
                .map(|i| f(&mut replica_rng(seed, stream, i)))
                .collect::<Vec<T>>()
        };
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }

    fn process(&self, u: f64, rng: &mut ChaCha8Rng) -> LevelProcess {
        // u was validated by the caller
        sample_level_process(&self.sampler, u, rng).expect("valid level")
    }

    fn with_config<T>(&self, u: f64, rng: &mut ChaCha8Rng, f: impl FnOnce(&Configuration<'_>) -> T) -> T {
        let lp = self.process(u, rng);
        let c = lp.restrict(self.sampler.set(), u).expect("level within range");
        f(&c)
    }

    /// `P^u(A)`.
    pub fn estimate_probability(&self, ev: &dyn IncreasingEvent, u: f64, n: u64, seed: u64) -> Result<Estimate> {
        check_level(u)?;
        check_n(n)?;
        let x = self.replicate(seed, Stream::Probability as u64, n, |rng| {
            self.with_config(u, rng, |c| indicator(ev.occurs(c)))
        });
        Ok(Estimate::from_samples(&x, seed, self.meta(ev, u)))
    }

    /// Added-trajectory expression; also the right derivative at `u = 0`.
    pub fn derivative_added_trajectory(
        &self,
        ev: &dyn IncreasingEvent,
        u: f64,
        n: u64,
        seed: u64,
    ) -> Result<Estimate> {
        check_level(u)?;
        check_n(n)?;
        let cap = self.cap();
        let x = self.replicate(seed, Stream::AddedTrajectory as u64, n, |rng| {
            let lp = self.process(u, rng);
            let c = lp.restrict(self.sampler.set(), u).expect("level within range");
            if ev.occurs(&c) {
                return 0.0;
            }
            // the level of the added trace plays no role
            let extra = LevelPoint { level: u, trace: self.sampler.sample(rng) };
            cap * indicator(ev.occurs(&c.with_point(&extra)))
        });
        Ok(Estimate::from_samples(&x, seed, self.meta(ev, u)))
    }

    /// Pivotal expression `E^u[N⁺] / u`.
    pub fn derivative_pivotal(&self, ev: &dyn IncreasingEvent, u: f64, n: u64, seed: u64) -> Result<Estimate> {
        check_positive_level(u)?;
        check_n(n)?;
        let x = self.replicate(seed, Stream::Pivotal as u64, n, |rng| {
            self.with_config(u, rng, |c| count_plus_pivotal(ev, c).n_plus as f64 / u)
        });
        Ok(Estimate::from_samples(&x, seed, self.meta(ev, u)))
    }

    /// Conditional-count expression `(E[M 1_A] - θ P(A)) / u`. Per sample
    /// this is `(M - θ) 1_A / u`, so the standard error accounts for the
    /// correlation of the two terms.
    pub fn derivative_conditional(&self, ev: &dyn IncreasingEvent, u: f64, n: u64, seed: u64) -> Result<Estimate> {
        check_positive_level(u)?;
        check_n(n)?;
        let theta = u * self.cap();
        let x = self.replicate(seed, Stream::Conditional as u64, n, |rng| {
            self.with_config(u, rng, |c| (c.len() as f64 - theta) * indicator(ev.occurs(c)) / u)
        });
        Ok(Estimate::from_samples(&x, seed, self.meta(ev, u)))
    }

    /// Central difference on the level coupling.
    pub fn derivative_finite_difference(
        &self,
        ev: &dyn IncreasingEvent,
        u: f64,
        h: f64,
        n: u64,
        seed: u64,
    ) -> Result<Estimate> {
        check_positive_level(u)?;
        check_n(n)?;
        if !(h > 0.0 && h < u) {
            return Err(invalid(format!("finite-difference step h = {h} must lie in (0, u = {u})")));
        }
        let set = self.sampler.set();
        let x = self.replicate(seed, Stream::FiniteDifference as u64, n, |rng| {
            let lp = self.process(u + h, rng);
            let hi = lp.restrict(set, u + h).expect("level within range");
            if !ev.occurs(&hi) {
                return 0.0;
            }
            let lo = hi.restrict(u - h);
            (1.0 - indicator(ev.occurs(&lo))) / (2.0 * h)
        });
        Ok(Estimate::from_samples(&x, seed, self.meta(ev, u)))
    }

    /// `E^u[M | A]` as a ratio estimator.
    pub fn conditional_mean_m(&self, ev: &dyn IncreasingEvent, u: f64, n: u64, seed: u64) -> Result<Estimate> {
        check_positive_level(u)?;
        check_n(n)?;
        let pairs = self.replicate(seed, Stream::ConditionalMean as u64, n, |rng| {
            self.with_config(u, rng, |c| {
                let a = indicator(ev.occurs(c));
                (c.len() as f64 * a, a)
            })
        });
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Estimate::ratio(&x, &y, seed, self.meta(ev, u)).map_err(|_| {
            Error::InsufficientData(format!("event {} never occurred in {n} samples", ev.name()))
        })
    }

    /// `E^u[N⁺]`, the mean number of plus-pivotal traces.
    pub fn mean_pivotal_count(&self, ev: &dyn IncreasingEvent, u: f64, n: u64, seed: u64) -> Result<Estimate> {
        check_level(u)?;
        check_n(n)?;
        let x = self.replicate(seed, Stream::PivotalCount as u64, n, |rng| {
            self.with_config(u, rng, |c| count_plus_pivotal(ev, c).n_plus as f64)
        });
        Ok(Estimate::from_samples(&x, seed, self.meta(ev, u)))
    }

    /// All four derivative estimators at one level, each on `n` samples of
    /// its own stream. `h` defaults to `0.05 u`.
    pub fn derivative_bundle(
        &self,
        ev: &dyn IncreasingEvent,
        closed_form: Option<ClosedForm>,
        u: f64,
        h: Option<f64>,
        n: u64,
        seed: u64,
    ) -> Result<DerivativeBundle> {
        let h = h.unwrap_or(DEFAULT_RELATIVE_H * u);
        let cap = self.cap();
        let fd_bias_bound = closed_form.map(|_| {
            // |P'''| <= cap^3 e^{-cap (u - h)} for P = 1 - e^{-cap u}
            h * h / 6.0 * cap.powi(3) * (-(cap * (u - h))).exp()
        });
        Ok(DerivativeBundle {
            event: ev.name(),
            u,
            theta: u * cap,
            cap,
            n,
            seed,
            h,
            e1: self.derivative_added_trajectory(ev, u, n, seed)?,
            e2: self.derivative_pivotal(ev, u, n, seed)?,
            e3: self.derivative_conditional(ev, u, n, seed)?,
            fd: self.derivative_finite_difference(ev, u, h, n, seed)?,
            closed_form,
            fd_bias_bound,
        })
    }

    /// Universal derivative bound and pivotal-count bound at level `u`.
    pub fn universal_bound_check(&self, ev: &dyn IncreasingEvent, u: f64, n: u64, seed: u64) -> Result<BoundReport> {
        check_positive_level(u)?;
        let e1 = self.derivative_added_trajectory(ev, u, n, seed)?;
        let pivotal = self.mean_pivotal_count(ev, u, n, seed)?;
        Ok(BoundReport::new(u, self.cap(), e1, pivotal, DEFAULT_SIGMA))
    }

    /// Estimates `E^u[N⁺] / u` at the midpoints of `grid` equal cells of
    /// `[u1, u2]` and checks that the fraction of cells below
    /// `α / (u2 - u1)` exceeds `1 - 1/α` up to the cells whose intervals
    /// straddle the threshold.
    pub fn pivotal_density_scan(
        &self,
        ev: &dyn IncreasingEvent,
        u1: f64,
        u2: f64,
        grid: usize,
        alpha: f64,
        n: u64,
        seed: u64,
    ) -> Result<DensityScan> {
        if !(u1 >= 0.0 && u2 > u1 && u2.is_finite()) {
            return Err(invalid(format!("scan interval [{u1}, {u2}] must satisfy 0 <= u1 < u2")));
        }
        if !(alpha > 1.0) {
            return Err(invalid(format!("alpha = {alpha} must exceed 1")));
        }
        if grid == 0 {
            return Err(invalid("scan grid must have at least one point"));
        }
        let width = (u2 - u1) / grid as f64;
        let points = (0..grid)
            .map(|k| {
                let u = u1 + (k as f64 + 0.5) * width;
                let sub = splitmix(seed ^ (Stream::DensityScan as u64).rotate_left(32) ^ k as u64);
                self.derivative_pivotal(ev, u, n, sub).map(|mut e| {
                    e.seed = seed;
                    e
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityScan::from_estimates(u1, u2, alpha, points, DEFAULT_SIGMA))
    }
}

fn indicator(b: bool) -> f64 {
    if b { 1.0 } else { 0.0 }
}

fn check_level(u: f64) -> Result<()> {
    if u >= 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("level u = {u} must be finite and nonnegative")))
    }
}

fn check_positive_level(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("level u = {u} must be positive (the expression divides by u)")))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(invalid("sample count must be positive"))
    } else {
        Ok(())
    }
}

/// The four derivative estimates at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    pub event: String,
    pub u: f64,
    pub theta: f64,
    pub cap: f64,
    pub n: u64,
    pub seed: u64,
    pub h: f64,
    /// Added-trajectory expression.
    pub e1: Estimate,
    /// Pivotal expression.
    pub e2: Estimate,
    /// Conditional-count expression.
    pub e3: Estimate,
    /// Coupled central difference.
    pub fd: Estimate,
    pub closed_form: Option<ClosedForm>,
    pub fd_bias_bound: Option<f64>,
}

impl DerivativeBundle {
    pub fn estimators(&self) -> [(&'static str, &Estimate); 4] {
        [("e1", &self.e1), ("e2", &self.e2), ("e3", &self.e3), ("fd", &self.fd)]
    }

    /// Pairwise interval overlap at `sigma`, loud failure past
    /// [`DISAGREEMENT_SIGMA`], sign checks and, when known, agreement with
    /// the closed form.
    pub fn checks(&self, sigma: f64) -> Vec<Check> {
        let mut out = Vec::new();
        let est = self.estimators();
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, ea) = est[i];
                let (b, eb) = est[j];
                out.push(Check::new(
                    format!("overlap {a}-{b}"),
                    ea.overlaps(eb, sigma),
                    format!("{a} = {:.6} ± {:.6}, {b} = {:.6} ± {:.6}", ea.mean, ea.stderr, eb.mean, eb.stderr),
                ));
                let z = ea.z_score(eb);
                if z > DISAGREEMENT_SIGMA {
                    log::error!(
                        "estimators {a} and {b} disagree by {z:.2} sigma for {} at u = {} (seed {}, n {})",
                        self.event, self.u, self.seed, self.n
                    );
                }
                out.push(Check::new(
                    format!("agreement {a}-{b}"),
                    z <= DISAGREEMENT_SIGMA,
                    format!("z = {z:.3}, seed {}", self.seed),
                ));
            }
        }
        out.push(Check::new(
            "nonnegative e1 e2",
            self.e1.mean >= 0.0 && self.e2.mean >= 0.0,
            format!("e1 = {:.6}, e2 = {:.6}", self.e1.mean, self.e2.mean),
        ));
        out.push(Check::new(
            "fd sign",
            self.fd.mean >= -sigma * self.fd.stderr,
            format!("fd = {:.6} ± {:.6}", self.fd.mean, self.fd.stderr),
        ));
        if let Some(cf) = self.closed_form {
            for (name, e) in est {
                let slack = if name == "fd" { self.fd_bias_bound.unwrap_or(0.0) } else { 0.0 };
                out.push(Check::new(
                    format!("closed form {name}"),
                    (e.mean - cf.derivative).abs() <= sigma * e.stderr + slack,
                    format!("{name} = {:.6} ± {:.6}, exact {:.6}", e.mean, e.stderr, cf.derivative),
                ));
            }
        }
        out
    }
}

/// Universal bounds: `dP/du <= sqrt(cap/u)` and `E[N⁺] <= sqrt(u cap)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub u: f64,
    pub theta: f64,
    pub derivative: Estimate,
    pub mean_pivotal: Estimate,
    pub derivative_bound: f64,
    pub pivotal_bound: f64,
    pub derivative_ok: bool,
    pub pivotal_ok: bool,
}

impl BoundReport {
    pub fn new(u: f64, cap: f64, derivative: Estimate, mean_pivotal: Estimate, sigma: f64) -> Self {
        let derivative_bound = (cap / u).sqrt();
        let pivotal_bound = (u * cap).sqrt();
        BoundReport {
            u,
            theta: u * cap,
            derivative_ok: derivative.mean <= derivative_bound + sigma * derivative.stderr,
            pivotal_ok: mean_pivotal.mean <= pivotal_bound + sigma * mean_pivotal.stderr,
            derivative,
            mean_pivotal,
            derivative_bound,
            pivotal_bound,
        }
    }

    /// Bounds from an existing bundle: `e1` for the derivative and `u e2`
    /// for the pivotal count.
    pub fn from_bundle(b: &DerivativeBundle, sigma: f64) -> Self {
        let mut count = b.e2.clone();
        count.mean *= b.u;
        count.stderr *= b.u;
        Self::new(b.u, b.cap, b.e1.clone(), count, sigma)
    }

    pub fn holds(&self) -> bool {
        self.derivative_ok && self.pivotal_ok
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub u: f64,
    pub estimate: Estimate,
    pub below: bool,
    /// The interval straddles the threshold.
    pub ambiguous: bool,
}

/// Result of [`Harness::pivotal_density_scan`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityScan {
    pub u1: f64,
    pub u2: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub points: Vec<ScanPoint>,
    pub fraction: f64,
    pub eps_stat: f64,
    pub required: f64,
    pub holds: bool,
}

impl DensityScan {
    pub fn from_estimates(u1: f64, u2: f64, alpha: f64, estimates: Vec<Estimate>, sigma: f64) -> Self {
        let threshold = alpha / (u2 - u1);
        let points: Vec<ScanPoint> = estimates
            .into_iter()
            .map(|e| {
                let (lo, hi) = e.interval(sigma);
                ScanPoint { u: e.meta.u, below: e.mean <= threshold, ambiguous: lo <= threshold && threshold < hi, estimate: e }
            })
            .collect();
        let m = points.len() as f64;
        let fraction = points.iter().filter(|p| p.below).count() as f64 / m;
        let eps_stat = points.iter().filter(|p| p.ambiguous).count() as f64 / m;
        let required = 1.0 - 1.0 / alpha;
        DensityScan { u1, u2, alpha, threshold, points, fraction, eps_stat, required, holds: fraction > required - eps_stat }
    }

    /// Grid fraction computed from exact values of `E^u[N⁺]/u`.
    pub fn exact_fraction(&self, exact: impl Fn(f64) -> f64) -> f64 {
        let below = self.points.iter().filter(|p| exact(p.u) <= self.threshold).count();
        below as f64 / self.points.len() as f64
    }

    /// CSV with columns `u, estimator, mean, stderr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("u,estimator,mean,stderr\n");
        for p in &self.points {
            s.push_str(&format!("{},e2,{},{}\n", p.u, p.estimate.mean, p.estimate.stderr));
        }
        s
    }
}

/// Poisson total-variation comparison `‖X - (Y + 1)‖` for `X, Y ~ Poisson(θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvLemma {
    pub theta: f64,
    pub tv: f64,
    /// `E|X/θ - 1|`, the same quantity summed the other way.
    pub mean_abs_deviation: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Sums `e^{-θ} + Σ_{k≥1} |p_k - p_{k-1}|` until the Poisson tail beyond
/// the last term is below `1e-12`; past the mode the remaining differences
/// telescope to the last `p_k`, which is added exactly.
pub fn tv_lemma_check(theta: f64) -> Result<TvLemma> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid(format!("theta = {theta} must be positive")));
    }
    let ln_theta = theta.ln();
    let mut ln_p = -theta;
    let mut prev = ln_p.exp();
    let mut tv = prev;
    let mut mad = prev; // k = 0 term: |0 - 1| p_0
    let mut k: u64 = 0;
    loop {
        k += 1;
        ln_p += ln_theta - (k as f64).ln();
        let p = ln_p.exp();
        tv += (p - prev).abs();
        mad += (k as f64 / theta - 1.0).abs() * p;
        prev = p;
        let kf = k as f64;
        if kf > theta {
            // geometric bound on Σ_{j>k} p_j
            let ratio = theta / (kf + 1.0);
            if p * ratio / (1.0 - ratio) < 1e-12 {
                break;
            }
        }
    }
    tv += prev;
    let bound = theta.powf(-0.5);
    Ok(TvLemma { theta, tv, mean_abs_deviation: mad, bound, holds: tv <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_at_one() {
        let r = tv_lemma_check(1.0).unwrap();
        assert!((r.tv - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!((r.tv - r.mean_abs_deviation).abs() < 1e-10);
        assert!(r.holds);
        assert_eq!(r.bound, 1.0);
    }

    #[test]
    fn tv_decreases_on_doubling_grid() {
        let mut last = f64::INFINITY;
        for k in 0..=8 {
            let r = tv_lemma_check(2f64.powi(k)).unwrap();
            assert!(r.holds);
            assert!(r.tv <= last);
            last = r.tv;
        }
        let r = tv_lemma_check(100.0).unwrap();
        assert!(r.tv <= 0.1);
        assert!(tv_lemma_check(0.0).is_err());
    }

    #[test]
    fn replica_streams_are_distinct() {
        use rand::Rng;
        let a: u64 = replica_rng(1, 2, 3).random();
        assert_eq!(a, replica_rng(1, 2, 3).random::<u64>());
        assert_ne!(a, replica_rng(1, 2, 4).random::<u64>());
        assert_ne!(a, replica_rng(1, 3, 3).random::<u64>());
        assert_ne!(a, replica_rng(2, 2, 3).random::<u64>());
    }
}

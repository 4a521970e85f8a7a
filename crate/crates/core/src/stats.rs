//! Monte Carlo estimates with standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What an estimate refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub u: f64,
    pub cap: f64,
    pub event: String,
}

/// Sample mean with its standard error `sd / sqrt(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
    pub meta: EstimateMeta,
}

/// Mean and standard error of a sample, summed in order so the result does
/// not depend on how the samples were produced.
pub fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let rough = samples.iter().sum::<f64>() / n as f64;
    let mean = rough + samples.iter().map(|x| x - rough).sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

impl Estimate {
    pub fn from_samples(samples: &[f64], seed: u64, meta: EstimateMeta) -> Self {
        let (mean, stderr) = mean_stderr(samples);
        Estimate { mean, stderr, n: samples.len() as u64, seed, meta }
    }

    /// Ratio `Σ x / Σ y` with a delta-method standard error.
    pub fn ratio(x: &[f64], y: &[f64], seed: u64, meta: EstimateMeta) -> Result<Self> {
        let n = x.len();
        let ybar = y.iter().sum::<f64>() / n as f64;
        if !(ybar > 0.0) {
            return Err(Error::InsufficientData("ratio denominator is zero".into()));
        }
        let r = x.iter().sum::<f64>() / y.iter().sum::<f64>();
        let resid: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - r * b).collect();
        let (_, se) = mean_stderr(&resid);
        Ok(Estimate { mean: r, stderr: se / ybar, n: n as u64, seed, meta })
    }

    /// `[mean - k se, mean + k se]`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.stderr, self.mean + k * self.stderr)
    }

    /// Whether the `k`-sigma intervals of the two estimates intersect.
    pub fn overlaps(&self, other: &Estimate, k: f64) -> bool {
        let (a0, a1) = self.interval(k);
        let (b0, b1) = other.interval(k);
        a0 <= b1 && b0 <= a1
    }

    /// `|mean - value| <= k se`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }

    /// Difference in units of the combined standard error.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let s = (self.stderr * self.stderr + other.stderr * other.stderr).sqrt();
        let d = self.mean - other.mean;
        if s == 0.0 {
            if d == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            d.abs() / s
        }
    }
}

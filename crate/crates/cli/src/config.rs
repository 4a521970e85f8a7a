//! Flags, config files and their resolution into a validated [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::Args;
use interlace::events::EventSpec;
use interlace::green::{DEFAULT_EPSILON, DEFAULT_FAR_FIELD_RADIUS};
use interlace::lattice::{LatticeSet, Site};
use interlace::russo::{DEFAULT_RELATIVE_H, DEFAULT_SIGMA};
use interlace::walk::{ExcursionMode, DEFAULT_BUDGET, DEFAULT_SHORTCUT_RADIUS};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: field `{field}`: {message}")]
    Config { field: &'static str, message: String },
    #[error("cannot read config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Library(#[from] interlace::Error),
}

fn bad(field: &'static str, message: impl Into<String>) -> CliError {
    CliError::Config { field, message: message.into() }
}

/// Flags shared by every subcommand. Each may also come from the config
/// file under the same name with underscores; flags win.
#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Common {
    /// TOML file with any of these settings.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Box side lengths, e.g. `2,2,2`.
    #[arg(long = "box", value_delimiter = ',', value_name = "SIDES")]
    #[serde(rename = "box")]
    pub sides: Option<Vec<u64>>,

    /// Lower corner of the box (default: the origin).
    #[arg(long, value_name = "SITE")]
    pub origin: Option<String>,

    /// Explicit sites separated by `;`, e.g. `(0,0,0);(1,0,0)`.
    #[arg(long, value_name = "SITES", conflicts_with = "sides")]
    pub sites: Option<String>,

    /// Event, e.g. `nonempty` or `two_point v=(0,0,0) z=(3,3,3)`.
    #[arg(long)]
    pub event: Option<String>,

    /// Intensity levels, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "theta")]
    pub u: Option<Vec<f64>>,

    /// Levels given as `u cap(G)`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,

    /// Samples per estimator.
    #[arg(long)]
    pub n: Option<u64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Worker threads (does not change any result).
    #[arg(long)]
    pub workers: Option<usize>,

    /// Directory for report files; stdout when neither this nor
    /// `INTERLACE_OUT_DIR` is set.
    #[arg(long, env = "INTERLACE_OUT_DIR", value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Also write the CSV table of a scan to this file.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,

    /// Green's function tolerance.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Radius beyond which the Green's function uses its asymptotic form.
    #[arg(long)]
    pub far_field_radius: Option<f64>,

    /// Finite-difference half-width as a fraction of `u`.
    #[arg(long)]
    pub h_rel: Option<f64>,

    /// `entrance` or `conditioned-walk`.
    #[arg(long)]
    pub mode: Option<String>,

    /// Step budget per excursion of the conditioned walk.
    #[arg(long)]
    pub budget: Option<u64>,

    /// Hand-over distance of the conditioned walk; 0 disables it.
    #[arg(long)]
    pub shortcut_radius: Option<i64>,

    /// Interval width, in standard errors, used by the checks.
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Scan interval start (level).
    #[arg(long)]
    pub u1: Option<f64>,

    /// Scan interval end (level).
    #[arg(long)]
    pub u2: Option<f64>,

    /// Scan interval given in units of `cap(G)` instead.
    #[arg(long, conflicts_with_all = ["u1", "u2"])]
    pub theta1: Option<f64>,

    #[arg(long, conflicts_with_all = ["u1", "u2"])]
    pub theta2: Option<f64>,

    /// Number of scan cells.
    #[arg(long)]
    pub grid: Option<usize>,

    #[arg(long)]
    pub alpha: Option<f64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Common {
    /// File settings overlaid by any flags given on the command line.
    pub fn merged(&self) -> Result<Common, CliError> {
        let mut out = match &self.config {
            Some(path) => read_file(path)?,
            None => Common::default(),
        };
        if self.sites.is_some() {
            out.sides = None;
        }
        if self.sides.is_some() {
            out.sites = None;
        }
        if self.u.is_some() {
            out.theta = None;
        }
        if self.theta.is_some() {
            out.u = None;
        }
        overlay!(
            out, self, sides, origin, sites, event, u, theta, n, seed, workers, out, csv, epsilon,
            far_field_radius, h_rel, mode, budget, shortcut_radius, sigma, u1, u2, theta1, theta2, grid, alpha
        );
        Ok(out)
    }
}

fn read_file(path: &Path) -> Result<Common, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigFile { path: path.to_path_buf(), message: e.to_string() })?;
    toml::from_str(&text).map_err(|e| CliError::ConfigFile { path: path.to_path_buf(), message: e.to_string() })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SetSpec {
    Box { origin: Site, sides: Vec<u64> },
    Sites { sites: Vec<Site> },
}

impl SetSpec {
    pub fn build(&self) -> Result<LatticeSet, CliError> {
        let set = match self {
            SetSpec::Box { origin, sides } => LatticeSet::boxed(origin, sides),
            SetSpec::Sites { sites } => LatticeSet::from_sites(sites.clone()),
        };
        set.map_err(|e| bad(if matches!(self, SetSpec::Box { .. }) { "box" } else { "sites" }, e.to_string()))
    }

    pub fn dimension(&self) -> usize {
        match self {
            SetSpec::Box { sides, .. } => sides.len(),
            SetSpec::Sites { sites } => sites.first().map_or(0, Site::dim),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Levels {
    U(Vec<f64>),
    Theta(Vec<f64>),
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRange {
    pub start: f64,
    pub end: f64,
    /// Whether `start`/`end` are in units of `cap(G)`.
    pub in_theta: bool,
    pub grid: usize,
    pub alpha: f64,
}

/// Everything a run depends on, validated. Embedded in every report; the
/// worker count is deliberately absent because results do not depend on it.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub dimension: usize,
    pub set: SetSpec,
    pub event: EventSpec,
    pub levels: Levels,
    pub n: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub far_field_radius: f64,
    pub h_rel: f64,
    pub mode: ExcursionMode,
    pub sigma: f64,
    pub scan: ScanRange,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub csv: Option<PathBuf>,
}

fn parse_site(field: &'static str, s: &str) -> Result<Site, CliError> {
    s.parse().map_err(|e: interlace::Error| bad(field, e.to_string()))
}

fn positive(field: &'static str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(bad(field, format!("{x} must be positive and finite")))
    }
}

impl RunConfig {
    pub fn resolve(c: &Common) -> Result<RunConfig, CliError> {
        let set = match (&c.sides, &c.sites) {
            (Some(_), Some(_)) => return Err(bad("sites", "give either a box or explicit sites")),
            (Some(sides), None) => {
                if sides.iter().any(|&s| s == 0) {
                    return Err(bad("box", "side lengths must be positive"));
                }
                let origin = match &c.origin {
                    Some(o) => parse_site("origin", o)?,
                    None => Site::origin(sides.len()),
                };
                if origin.dim() != sides.len() {
                    return Err(bad("origin", format!("{origin} has dimension {} but the box has {}", origin.dim(), sides.len())));
                }
                SetSpec::Box { origin, sides: sides.clone() }
            }
            (None, Some(list)) => {
                let sites = list
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_site("sites", s))
                    .collect::<Result<Vec<_>, _>>()?;
                if sites.is_empty() {
                    return Err(bad("sites", "no sites given"));
                }
                SetSpec::Sites { sites }
            }
            (None, None) => SetSpec::Box { origin: Site::origin(3), sides: vec![2, 2, 2] },
        };
        let dimension = set.dimension();
        interlace::lattice::check_dimension(dimension).map_err(|e| bad("box", e.to_string()))?;
        let event = match &c.event {
            Some(s) => s.parse().map_err(|e: interlace::Error| bad("event", e.to_string()))?,
            None => EventSpec::Nonempty,
        };
        let levels = match (&c.u, &c.theta) {
            (Some(u), _) => {
                if u.is_empty() || u.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(bad("u", "levels must be finite and nonnegative"));
                }
                Levels::U(u.clone())
            }
            (None, Some(t)) => {
                if t.is_empty() || t.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(bad("theta", "values must be finite and nonnegative"));
                }
                Levels::Theta(t.clone())
            }
            (None, None) => Levels::Theta(vec![1.0]),
        };
        let n = c.n.unwrap_or(100_000);
        if n == 0 {
            return Err(bad("n", "sample count must be positive"));
        }
        if c.workers == Some(0) {
            return Err(bad("workers", "worker count must be positive"));
        }
        let epsilon = positive("epsilon", c.epsilon.unwrap_or(DEFAULT_EPSILON))?;
        let far_field_radius = positive("far_field_radius", c.far_field_radius.unwrap_or(DEFAULT_FAR_FIELD_RADIUS))?;
        let h_rel = c.h_rel.unwrap_or(DEFAULT_RELATIVE_H);
        if !(h_rel > 0.0 && h_rel < 1.0) {
            return Err(bad("h_rel", format!("{h_rel} must lie in (0, 1)")));
        }
        let budget = c.budget.unwrap_or(DEFAULT_BUDGET);
        if budget == 0 {
            return Err(bad("budget", "step budget must be positive"));
        }
        let shortcut = c.shortcut_radius.unwrap_or(DEFAULT_SHORTCUT_RADIUS);
        if shortcut < 0 {
            return Err(bad("shortcut_radius", "must be nonnegative"));
        }
        let mode = match c.mode.as_deref().unwrap_or("entrance") {
            "entrance" => ExcursionMode::Entrance,
            "conditioned-walk" | "conditioned_walk" => ExcursionMode::ConditionedWalk {
                budget,
                shortcut_radius: (shortcut > 0).then_some(shortcut),
            },
            other => return Err(bad("mode", format!("unknown mode {other:?}; use entrance or conditioned-walk"))),
        };
        let sigma = c.sigma.unwrap_or(DEFAULT_SIGMA);
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(bad("sigma", "must be finite and nonnegative"));
        }
        let scan = match (c.u1, c.u2, c.theta1, c.theta2) {
            (Some(a), Some(b), None, None) => ScanRange { start: a, end: b, in_theta: false, grid: 0, alpha: 0.0 },
            (None, None, Some(a), Some(b)) => ScanRange { start: a, end: b, in_theta: true, grid: 0, alpha: 0.0 },
            (None, None, None, None) => ScanRange { start: 0.5, end: 4.0, in_theta: true, grid: 0, alpha: 0.0 },
            _ => return Err(bad("u1", "give both u1 and u2, or both theta1 and theta2")),
        };
        if !(scan.start >= 0.0 && scan.end > scan.start && scan.end.is_finite()) {
            return Err(bad("u2", "scan interval must satisfy 0 <= start < end"));
        }
        let grid = c.grid.unwrap_or(16);
        if grid == 0 {
            return Err(bad("grid", "must be positive"));
        }
        let alpha = c.alpha.unwrap_or(4.0);
        if !(alpha > 1.0) {
            return Err(bad("alpha", format!("{alpha} must exceed 1")));
        }
        Ok(RunConfig {
            dimension,
            set,
            event,
            levels,
            n,
            seed: c.seed.unwrap_or(1),
            epsilon,
            far_field_radius,
            h_rel,
            mode,
            sigma,
            scan: ScanRange { grid, alpha, ..scan },
            workers: c.workers,
            out: c.out.clone(),
            csv: c.csv.clone(),
        })
    }

    /// Levels as `u` values for a set of capacity `cap`.
    pub fn u_values(&self, cap: f64) -> Vec<f64> {
        match &self.levels {
            Levels::U(u) => u.clone(),
            Levels::Theta(t) => t.iter().map(|t| t / cap).collect(),
        }
    }

    pub fn scan_levels(&self, cap: f64) -> (f64, f64) {
        if self.scan.in_theta {
            (self.scan.start / cap, self.scan.end / cap)
        } else {
            (self.scan.start, self.scan.end)
        }
    }
}

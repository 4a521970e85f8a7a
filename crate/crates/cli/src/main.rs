//! `interlace`: batch runs over random interlacements restricted to a finite
//! box or site list, writing self-describing JSON (and CSV) reports.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for an
//! invalid configuration or input.

mod config;

use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use interlace::capacity::{equilibrium_measure, CapacitySummary};
use interlace::events::ClosedForm;
use interlace::interlacement::{sample_level_process, PointRecord};
use interlace::lattice::{LatticeSet, Site};
use interlace::walk::ExcursionMode;
use interlace::russo::{
    replica_rng, tv_lemma_check, BoundReport, Check, DensityScan, DerivativeBundle, Harness, TvLemma,
};
use interlace::{Estimate, PotentialTable, TraceSampler};
use serde::Serialize;

use config::{CliError, Common, Levels, RunConfig};

#[derive(Parser)]
#[command(name = "interlace", version, about = "Random interlacements on a finite set of Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium measure and capacity of G.
    Capacity(Common),
    /// One coupled realization, reported at each level.
    Sample(Common),
    /// Probability of the event at each level.
    Estimate(Common),
    /// The four derivative estimators at each level, cross-checked.
    VerifyRusso(Common),
    /// Universal bounds on the derivative and the pivotal count.
    VerifyBounds(Common),
    /// Poisson total-variation lemma at each theta.
    TvLemma(Common),
    /// Pivotal density over a level interval.
    ScanPivotal(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Sample(_) => "sample",
            Command::Estimate(_) => "estimate",
            Command::VerifyRusso(_) => "verify-russo",
            Command::VerifyBounds(_) => "verify-bounds",
            Command::TvLemma(_) => "tv-lemma",
            Command::ScanPivotal(_) => "scan-pivotal",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Capacity(c)
            | Command::Sample(c)
            | Command::Estimate(c)
            | Command::VerifyRusso(c)
            | Command::VerifyBounds(c)
            | Command::TvLemma(c)
            | Command::ScanPivotal(c) => c,
        }
    }
}

#[derive(Serialize)]
struct SetInfo {
    sites: usize,
    boundary: usize,
    cap: f64,
    residual: f64,
    condition: f64,
    interior_leak: f64,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    set: Option<SetInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discarded_traces: Option<u64>,
    results: T,
    checks: Vec<Check>,
    passed: bool,
}

struct Output {
    json: String,
    csv: Option<String>,
    passed: bool,
    checks: usize,
}

struct Context {
    set: LatticeSet,
    sampler: Arc<TraceSampler>,
}

impl Context {
    fn new(cfg: &RunConfig) -> Result<Context, CliError> {
        let set = cfg.set.build()?;
        let pot = Arc::new(PotentialTable::with_far_field(cfg.dimension, cfg.epsilon, Some(cfg.far_field_radius))?);
        let eq = equilibrium_measure(&set, &pot)?;
        let sampler = Arc::new(TraceSampler::new(eq, pot, cfg.mode)?);
        Ok(Context { set, sampler })
    }

    fn cap(&self) -> f64 {
        self.sampler.equilibrium().cap()
    }

    fn info(&self) -> SetInfo {
        let eq = self.sampler.equilibrium();
        SetInfo {
            sites: self.set.len(),
            boundary: self.set.boundary().len(),
            cap: eq.cap(),
            residual: eq.residual(),
            condition: eq.condition(),
            interior_leak: eq.interior_leak(),
        }
    }

    fn harness(&self, cfg: &RunConfig) -> Result<Harness, CliError> {
        let h = Harness::new(self.sampler.clone());
        Ok(match cfg.workers {
            Some(w) => h.with_workers(w)?,
            None => h,
        })
    }

    fn event(&self, cfg: &RunConfig) -> Result<interlace::events::Event, CliError> {
        cfg.event
            .bind(&self.set)
            .map_err(|e| CliError::Config { field: "event", message: e.to_string() })
    }
}

fn render<T: Serialize>(
    command: &'static str,
    cfg: &RunConfig,
    ctx: Option<&Context>,
    results: T,
    checks: Vec<Check>,
    csv: Option<String>,
) -> Output {
    let passed = checks.iter().all(|c| c.passed);
    let report = Report {
        tool: "interlace",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cfg,
        set: ctx.map(Context::info),
        discarded_traces: ctx.filter(|_| !matches!(cfg.mode, ExcursionMode::Entrance)).map(|c| c.sampler.discards()),
        results,
        passed,
        checks,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("reports serialize");
    json.push('\n');
    let n = report.checks.len();
    Output { json, csv, passed, checks: n }
}

fn positive_levels(cfg: &RunConfig, cap: f64) -> Result<Vec<f64>, CliError> {
    let u = cfg.u_values(cap);
    if u.iter().any(|&x| x <= 0.0) {
        return Err(CliError::Config { field: "u", message: "this command needs positive levels".into() });
    }
    Ok(u)
}

#[derive(Serialize)]
struct LevelSample {
    u: f64,
    theta: f64,
    traces: usize,
    interlacement: Vec<Site>,
    vacant: usize,
}

#[derive(Serialize)]
struct SampleResult {
    u_max: f64,
    points: Vec<PointRecord>,
    levels: Vec<LevelSample>,
}

#[derive(Serialize)]
struct ProbabilityResult {
    u: f64,
    theta: f64,
    probability: Estimate,
    closed_form: Option<ClosedForm>,
}

#[derive(Serialize)]
struct ScanResult {
    #[serde(flatten)]
    scan: DensityScan,
    closed_form_fraction: Option<f64>,
}

fn run(command: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    let cfg = cfg.clone();
    let name = command.name();
    if let Command::TvLemma(_) = command {
        let thetas = match &cfg.levels {
            Levels::Theta(t) => t.clone(),
            Levels::U(_) => return Err(CliError::Config { field: "u", message: "tv-lemma takes --theta".into() }),
        };
        let results = thetas.iter().map(|&t| tv_lemma_check(t)).collect::<Result<Vec<TvLemma>, _>>()?;
        let checks = results
            .iter()
            .map(|r| Check { name: format!("tv bound at theta {}", r.theta), passed: r.holds, detail: format!("tv {} <= {}", r.tv, r.bound) })
            .collect();
        return Ok(render(name, &cfg, None, results, checks, None));
    }

    let ctx = Context::new(&cfg)?;
    let cap = ctx.cap();
    match command {
        Command::Capacity(_) => {
            let summary: CapacitySummary = ctx.sampler.equilibrium().summary();
            let checks = vec![Check {
                name: "linear system residual".into(),
                passed: summary.residual <= 1e-8,
                detail: format!("residual {:.3e}, condition {:.3e}", summary.residual, summary.condition),
            }];
            Ok(render(name, &cfg, Some(&ctx), summary, checks, None))
        }
        Command::Sample(_) => {
            let levels = cfg.u_values(cap);
            let u_max = levels.iter().cloned().fold(0.0, f64::max);
            let lp = sample_level_process(&ctx.sampler, u_max, &mut replica_rng(cfg.seed, 0, 0))?;
            let levels = levels
                .iter()
                .map(|&u| {
                    let c = lp.restrict(&ctx.set, u)?;
                    let occupied = c.interlacement_set();
                    Ok(LevelSample {
                        u,
                        theta: u * cap,
                        traces: c.len(),
                        vacant: ctx.set.len() - occupied.len(),
                        interlacement: occupied.iter().map(|&i| ctx.set.site(i).clone()).collect(),
                    })
                })
                .collect::<Result<Vec<_>, interlace::Error>>()?;
            let result = SampleResult { u_max, points: lp.to_records(&ctx.set), levels };
            Ok(render(name, &cfg, Some(&ctx), result, Vec::new(), None))
        }
        Command::Estimate(_) => {
            let harness = ctx.harness(&cfg)?;
            let ev = ctx.event(&cfg)?;
            let mut checks = Vec::new();
            let mut results = Vec::new();
            for u in cfg.u_values(cap) {
                let p = harness.estimate_probability(&ev, u, cfg.n, cfg.seed)?;
                let cf = cfg.event.closed_form(cap, u);
                if let Some(cf) = cf {
                    checks.push(Check {
                        name: format!("closed form at u {u}"),
                        passed: p.within(cf.probability, cfg.sigma),
                        detail: format!("{} ± {} vs {}", p.mean, p.stderr, cf.probability),
                    });
                }
                results.push(ProbabilityResult { u, theta: u * cap, probability: p, closed_form: cf });
            }
            Ok(render(name, &cfg, Some(&ctx), results, checks, None))
        }
        Command::VerifyRusso(_) => {
            let harness = ctx.harness(&cfg)?;
            let ev = ctx.event(&cfg)?;
            let mut checks = Vec::new();
            let mut results: Vec<DerivativeBundle> = Vec::new();
            for u in positive_levels(&cfg, cap)? {
                let b = harness.derivative_bundle(&ev, cfg.event.closed_form(cap, u), u, Some(cfg.h_rel * u), cfg.n, cfg.seed)?;
                checks.extend(b.checks(cfg.sigma).into_iter().map(|c| Check { name: format!("u {u}: {}", c.name), ..c }));
                results.push(b);
            }
            Ok(render(name, &cfg, Some(&ctx), results, checks, None))
        }
        Command::VerifyBounds(_) => {
            let harness = ctx.harness(&cfg)?;
            let ev = ctx.event(&cfg)?;
            let mut checks = Vec::new();
            let mut results = Vec::new();
            for u in positive_levels(&cfg, cap)? {
                let r = harness.universal_bound_check(&ev, u, cfg.n, cfg.seed)?;
                let r = BoundReport::new(u, cap, r.derivative, r.mean_pivotal, cfg.sigma);
                checks.push(Check {
                    name: format!("u {u}: derivative bound"),
                    passed: r.derivative_ok,
                    detail: format!("{} ± {} vs {}", r.derivative.mean, r.derivative.stderr, r.derivative_bound),
                });
                checks.push(Check {
                    name: format!("u {u}: pivotal count bound"),
                    passed: r.pivotal_ok,
                    detail: format!("{} ± {} vs {}", r.mean_pivotal.mean, r.mean_pivotal.stderr, r.pivotal_bound),
                });
                results.push(r);
            }
            Ok(render(name, &cfg, Some(&ctx), results, checks, None))
        }
        Command::ScanPivotal(_) => {
            let harness = ctx.harness(&cfg)?;
            let ev = ctx.event(&cfg)?;
            let (u1, u2) = cfg.scan_levels(cap);
            let raw = harness.pivotal_density_scan(&ev, u1, u2, cfg.scan.grid, cfg.scan.alpha, cfg.n, cfg.seed)?;
            let scan = DensityScan::from_estimates(u1, u2, cfg.scan.alpha, raw.points.into_iter().map(|p| p.estimate).collect(), cfg.sigma);
            let closed_form_fraction = cfg
                .event
                .closed_form(cap, u1)
                .map(|_| scan.exact_fraction(|u| cfg.event.closed_form(cap, u).map_or(0.0, |c| c.derivative)));
            let checks = vec![Check {
                name: "density fraction".into(),
                passed: scan.holds,
                detail: format!("{} > {} - {}", scan.fraction, scan.required, scan.eps_stat),
            }];
            let csv = scan.to_csv();
            Ok(render(name, &cfg, Some(&ctx), ScanResult { scan, closed_form_fraction }, checks, Some(csv)))
        }
        Command::TvLemma(_) => unreachable!("handled above"),
    }
}

fn command_config(command: &Command) -> Result<RunConfig, CliError> {
    RunConfig::resolve(&command.common().merged()?)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn emit(name: &str, cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    match &cfg.out {
        Some(dir) => {
            let path = dir.join(format!("{name}.json"));
            write(&path, &out.json)?;
            if let Some(csv) = &out.csv {
                write(&dir.join(format!("{name}.csv")), csv)?;
            }
            eprintln!("{name}: {} checks, {} -> {}", out.checks, if out.passed { "passed" } else { "FAILED" }, path.display());
        }
        None => print!("{}", out.json),
    }
    if let (Some(path), Some(csv)) = (&cfg.csv, &out.csv) {
        write(path, csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = command_config(&cli.command).and_then(|cfg| {
        let out = run(&cli.command, &cfg)?;
        emit(cli.command.name(), &cfg, &out)?;
        Ok(out.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

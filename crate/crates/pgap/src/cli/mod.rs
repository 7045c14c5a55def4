//! Command-line front end: `pgap <command> --config run.toml`.
//!
//! Every command reads one TOML run configuration, writes its artifacts into
//! the output directory and prints a short summary. Exit codes: 0 success,
//! 1 usage or configuration error, 2 numerical failure.

mod config;

pub use config::{
    dirichlet, BarrierSection, GeometryKind, GeometrySection, OutputSection, RunConfig, SolverSection, SweepSection,
    TransformSection, DEFAULT_EPSILONS,
};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::barriers::{bernstein_eval, certify_sign_with, BarrierVariant, BernsteinOptions, CertifyOptions};
use crate::error::{Error, Result};
use crate::experiments::{
    fit_rate, ols, rate_csv, rate_plot_csv, rate_svg, read_rate_csv, sweep_epsilon, theorem_targets, write_manifest,
    Manifest, RateFit, RateTable, TheoremTargets,
};
use crate::geometry::Region;
use crate::solver::{gradient_field, solve};
use crate::transforms::PhiChart;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PGAP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "pgap", version, about = "Gradient blow-up lab for the p-Laplacian between nearly touching insulators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides [output].dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Seed of the sampled checks; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve once and write the field container.
    Solve,
    /// Sweep ε, write the rate table, manifest and plot.
    Sweep,
    /// Refit and replot an existing rate table without solving.
    Fit {
        /// Rate table to read; defaults to rates.csv in the output directory.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Certify the barrier of the [barrier] section.
    Certify,
    /// Measure the bounds of the flattening map on each configured radius.
    CheckTransform,
}

/// Parses the arguments, runs the command and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loaded configuration plus the command-line overrides.
struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    workers: Option<usize>,
    hash: String,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::config("--config <path> is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.workers == Some(0) {
        return Err(Error::config("--workers must be positive"));
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let ctx = Ctx { hash: cfg.hash(), cfg, out, workers: cli.workers };
    let job = || match &cli.command {
        Command::Solve => cmd_solve(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
        Command::Fit { csv } => cmd_fit(&ctx, csv.as_deref()),
        Command::Certify => cmd_certify(&ctx),
        Command::CheckTransform => cmd_check_transform(&ctx),
    };
    match ctx.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn cmd_solve(ctx: &Ctx) -> Result<()> {
    let geom = ctx.cfg.geometry()?;
    let sc = ctx.cfg.solver_config()?;
    let field = solve(&geom, &sc)?;
    let cg = gradient_field(&field);
    let summary = json!({
        "max_grad": cg.max,
        "argmax_xp": cg.argmax_xp(),
        "energy": field.report.energy,
        "iterations": field.report.iterations,
        "converged": field.report.converged,
    });
    let mut container = field.to_json();
    container["config_hash"] = json!(ctx.hash);
    container["summary"] = summary;
    let p = ctx.write_json("field.json", &container)?;
    println!("max|Du| = {:.6e} at x' = {:?}", cg.max, cg.argmax_xp());
    println!("energy = {:.12e}", field.report.energy);
    println!("iterations = {}", field.report.iterations);
    println!("converged = {}", field.report.converged);
    println!("wrote {}", p.display());
    field.require_converged().map(|_| ())
}

fn targets(ctx: &Ctx) -> Result<TheoremTargets> {
    theorem_targets(ctx.cfg.geometry.dim, ctx.cfg.solver.p, ctx.cfg.sweep.delta)
}

/// Writes the SVG and its data CSV when plots are enabled.
fn plot(ctx: &Ctx, table: &RateTable, fit: Option<&RateFit>, targets: &TheoremTargets) -> Result<()> {
    if ctx.cfg.output.svg {
        let p = ctx.write("rates.svg", &rate_svg(table, fit, targets))?;
        ctx.write("rates_plot.csv", &rate_plot_csv(table, fit))?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_fit(fit: &RateFit, targets: &TheoremTargets) {
    let (lo, hi) = targets.band();
    println!(
        "slope = {:.4} +- {:.4} (r2 = {:.4}, {} points); target band [{lo:.4}, {hi:.4}]",
        fit.slope,
        fit.stderr,
        fit.r2,
        fit.window.len()
    );
}

fn cmd_sweep(ctx: &Ctx) -> Result<()> {
    let geom = ctx.cfg.geometry()?;
    let sc = ctx.cfg.solver_config()?;
    let table = sweep_epsilon(&geom, &sc, &ctx.cfg.sweep.epsilons, &ctx.cfg.sweep_options(ctx.workers))?;
    let csv = ctx.write("rates.csv", &rate_csv(&table))?;
    for r in &table.rows {
        println!(
            "eps = {:.3e}  max|Du| neck = {:.6e}  converged = {}  grid = {}x{}",
            r.epsilon, r.max_grad_neck, r.converged, r.grid_ns, r.grid_nt
        );
    }
    let targets = targets(ctx)?;
    let window = ctx.cfg.fit_window();
    let fit = match fit_rate(&table, &window) {
        Ok(f) => {
            print_fit(&f, &targets);
            Some(f)
        }
        Err(e) => {
            eprintln!("fit skipped: {e}");
            None
        }
    };
    let mut manifest = Manifest::new(&table, &ctx.hash);
    manifest.targets = Some(targets.clone());
    manifest.fit_window = Some(window);
    manifest.fit = fit.clone();
    write_manifest(&manifest, &ctx.path("manifest.json"))?;
    plot(ctx, &table, fit.as_ref(), &targets)?;
    println!("wrote {}", csv.display());
    Ok(())
}

fn cmd_fit(ctx: &Ctx, csv: Option<&Path>) -> Result<()> {
    let path = csv.map_or_else(|| ctx.path("rates.csv"), Path::to_path_buf);
    let table = read_rate_csv(&path)?;
    let targets = targets(ctx)?;
    let window = ctx.cfg.fit_window();
    let fit = fit_rate(&table, &window)?;
    print_fit(&fit, &targets);
    ctx.write_json(
        "fit.json",
        &json!({ "config_hash": ctx.hash, "source": path.display().to_string(), "window": window, "fit": fit, "targets": targets }),
    )?;
    plot(ctx, &table, Some(&fit), &targets)
}

fn cmd_certify(ctx: &Ctx) -> Result<()> {
    let b = ctx.cfg.barrier.as_ref().ok_or_else(|| Error::config("certify needs a [barrier] section"))?;
    let spec = ctx.cfg.barrier_spec()?.expect("barrier section present");
    let geom = ctx.cfg.geometry()?;
    let admissible = spec.validate();
    match spec.variant {
        BarrierVariant::SupersolutionV | BarrierVariant::SubsolutionW => {
            if let Err(e) = &admissible {
                if !b.allow_inadmissible {
                    let msg = match e {
                        Error::Config(m) => m.clone(),
                        other => other.to_string(),
                    };
                    return Err(Error::invariant(format!("inadmissible barrier parameters: {msg}")));
                }
            }
            let opts = CertifyOptions { samples: b.samples, seed: ctx.cfg.seed, mu0: b.mu0 };
            let report = certify_sign_with(&spec, &geom, &Region::Full, &opts)?;
            let p = ctx.write_json("certificate.json", &json!({ "config_hash": ctx.hash, "certificate": report }))?;
            println!(
                "{} samples interior + {} boundary on [{:.4e}, {:.4e}]: {} violations",
                report.interior_samples, report.boundary_samples, report.inner_radius, report.outer_radius, report.violation_count
            );
            println!("min interior = {:.6e}, min boundary = {:.6e}", report.min_interior, report.min_boundary);
            println!("wrote {}", p.display());
        }
        BarrierVariant::BernsteinF | BarrierVariant::AppendixF => {
            let field = solve(&geom, &ctx.cfg.solver_config()?)?.require_converged()?;
            let opts = BernsteinOptions {
                floor_rel: b.floor_rel,
                rel_tol: b.rel_tol,
                sample_radius: b.sample_radius,
                exponents: Vec::new(),
            };
            let report = bernstein_eval(&spec, &field, &opts)?;
            let p = ctx.write_json(
                "bernstein.json",
                &json!({
                    "config_hash": ctx.hash,
                    "dimension_threshold_holds": admissible.is_ok(),
                    "report": report,
                }),
            )?;
            println!("max F = {:.6e} at {:?}", report.max_f, report.argmax_point);
            println!("kappa1 = {:.6}, kappa2 = {:.6}", report.kappa1, report.kappa2);
            for &(s, n, ok) in &report.summary {
                println!("s = {s}: bound holds at {ok} of {n} boundary samples");
            }
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn cmd_check_transform(ctx: &Ctx) -> Result<()> {
    let geom = ctx.cfg.geometry()?;
    let t = &ctx.cfg.transform;
    let p = t.p.unwrap_or(ctx.cfg.solver.p);
    let mut reports = Vec::new();
    for &r in &t.radii {
        let chart = PhiChart::new(geom.clone(), r, t.r0, t.quad_order)?;
        let rep = chart.verify_phi_bounds(t.samples, p, ctx.cfg.seed)?;
        println!(
            "r = {r}: C_jacobian = {:.4}  C_btilde = {:.4}  r*C_btilde = {:.4}  parallelism = {:.3e}  violations = {}",
            rep.c_jacobian,
            rep.c_btilde,
            rep.c_btilde_r,
            rep.parallelism_residual_max,
            rep.violations.len()
        );
        reports.push(rep);
    }
    let slope = |f: fn(&crate::transforms::PhiBoundsReport) -> f64| {
        let x: Vec<f64> = reports.iter().map(|r| (1.0 / r.r).ln()).collect();
        let y: Vec<f64> = reports.iter().map(|r| f(r).ln()).collect();
        ols(&x, &y).ok().map(|l| l.slope)
    };
    let btilde_slope = slope(|r| r.c_btilde);
    let jacobian_slope = slope(|r| r.c_jacobian);
    if let (Some(b), Some(j)) = (btilde_slope, jacobian_slope) {
        println!("slope vs log(1/r): C_btilde {b:.4}, C_jacobian {j:.4}");
    }
    let path = ctx.write_json(
        "transform.json",
        &json!({
            "config_hash": ctx.hash,
            "p": p,
            "reports": reports,
            "btilde_slope": btilde_slope,
            "jacobian_slope": jacobian_slope,
        }),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

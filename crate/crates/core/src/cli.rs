//! Command-line surface. Exit codes: 0 pass, 1 tolerance failure, 2 config
//! error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{
    estimate_holder, fig2_contrast, kc_moment_check, median, rescaling_test, Fig2Config, KcVerdict,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gaussian::{
    fbm_cov, increment_autocov, local_cov_limit, mbm_cov, stationary_cov, CovarianceTable, Law, MbmEvaluation,
};
use crate::hurst::{generate_hurst, lsc_variant, HurstPath, HurstSpec};
use crate::io::{create, write_hurst, write_json, write_path, write_paths, PathRecord};
use crate::kernels::KernelSpec;
use crate::simulate::{simulate_ensemble, Process, SimConfig, SimPlan};
use crate::UniformGrid;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "MULTIFRAC_THREADS";

/// Median band of the adapted process in the rough-Hurst contrast.
pub const FIG2_ITO_BAND: (f64, f64) = (0.78, 1.0);
/// Median band of the field in the rough-Hurst contrast.
pub const FIG2_FIELD_BAND: (f64, f64) = (0.1, 0.35);

#[derive(Debug, Parser)]
#[command(name = "multifrac", version, about = "Multifractional Gaussian moving averages")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paths and write `t,value,H[,path_id]`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the Hurst path of the first sample as `t,H`.
        #[arg(long)]
        hurst_out: Option<PathBuf>,
    },
    /// Evaluate a closed-form covariance.
    Covariance {
        #[command(subcommand)]
        model: CovModel,
        /// Write a `t,s,value,model` table instead of printing only.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite; exit 1 when a tolerance fails.
    Verify {
        suite: Suite,
        /// Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the report CSV and summary JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write plot-ready CSVs and a manifest for a figure.
    Reproduce {
        figure: Figure,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Rescale,
    Kc,
    Holder,
    Fig2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
}

/// Law of `H` and `σ` for the stationary models: a point mass from `--H`,
/// or a mixture from `--H-values` with optional `--H-weights`.
#[derive(Debug, Clone, Args)]
pub struct LawArgs {
    #[arg(long = "H", allow_hyphen_values = true)]
    pub h: Option<f64>,
    #[arg(long = "H-values", value_delimiter = ',', conflicts_with = "h")]
    pub h_values: Vec<f64>,
    #[arg(long = "H-weights", value_delimiter = ',', requires = "h_values")]
    pub h_weights: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

impl LawArgs {
    fn laws(&self) -> Result<(Law, Law)> {
        let h = match (self.h, self.h_values.is_empty()) {
            (Some(h), _) => Law::point(h),
            (None, false) => {
                let weights =
                    if self.h_weights.is_empty() { vec![1.0; self.h_values.len()] } else { self.h_weights.clone() };
                Law::Mixture { values: self.h_values.clone(), weights }
            }
            (None, true) => return Err(Error::Config("give --H or --H-values".into())),
        };
        Ok((h, Law::point(self.sigma)))
    }
}

#[derive(Debug, Subcommand)]
pub enum CovModel {
    /// Covariance of fBm.
    Fbm {
        #[arg(long = "H")]
        h: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
    },
    /// Covariance of the mBm field at `(t, H_t)` and `(s, H_s)`.
    Mbm {
        #[arg(long = "Ht")]
        h_t: f64,
        #[arg(long = "Hs")]
        h_s: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        /// Fail at the removable singularity instead of taking the limit.
        #[arg(long)]
        strict: bool,
    },
    /// Covariance of the stationary process with random constant `H`.
    Stationary {
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, allow_hyphen_values = true)]
        s: f64,
        #[command(flatten)]
        law: LawArgs,
    },
    /// Autocovariance of unit increments at an integer lag.
    Increment {
        #[arg(long)]
        delta: u64,
        #[command(flatten)]
        law: LawArgs,
    },
    /// Limit covariance of the rescaled increments.
    LocalLimit {
        #[arg(long, allow_hyphen_values = true)]
        r: f64,
        #[arg(long, allow_hyphen_values = true)]
        v: f64,
        #[command(flatten)]
        law: LawArgs,
    },
}

enum Outcome {
    Pass,
    Fail,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        _ => 2,
    }
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> ExitCode {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match dispatch(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate { config, out, seed, hurst_out } => {
            cmd_simulate(&load(Some(&config), seed)?, &out, hurst_out.as_deref())
        }
        Command::Covariance { model, out } => cmd_covariance(&model, out.as_deref()),
        Command::Verify { suite, config, out, seed } => cmd_verify(suite, &load(config.as_deref(), seed)?, out.as_deref()),
        Command::Reproduce { figure, out, seed } => cmd_reproduce(figure, &out, seed),
    }
}

fn load(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
        cfg.analysis.fig2.seed = s;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))
}

fn cmd_simulate(cfg: &RunConfig, out: &Path, hurst_out: Option<&Path>) -> Result<Outcome> {
    let paths = simulate_ensemble(&cfg.kernel_spec()?, &cfg.hurst, &cfg.sim_config()?, cfg.sim.n_paths, cfg.sim.process)?;
    let records: Vec<PathRecord<'_>> = paths.iter().map(|(p, h)| PathRecord { path: p, hurst: h }).collect();
    write_paths(create(out)?, &records)?;
    if let Some(h) = hurst_out {
        write_hurst(create(h)?, &paths[0].1)?;
    }
    Ok(Outcome::Pass)
}

fn cmd_covariance(model: &CovModel, out: Option<&Path>) -> Result<Outcome> {
    let (name, query, value) = match model {
        CovModel::Fbm { h, t, s } => ("fbm", (*t, *s), fbm_cov(*t, *s, *h)?),
        CovModel::Mbm { h_t, h_s, t, s, strict } => {
            let eval = if *strict { MbmEvaluation::Strict } else { MbmEvaluation::Limit };
            ("mbm", (*t, *s), mbm_cov(*t, *s, *h_t, *h_s, eval)?)
        }
        CovModel::Stationary { t, s, law } => {
            let (h, sigma) = law.laws()?;
            ("stationary", (*t, *s), stationary_cov(*t, *s, &h, &sigma)?.value)
        }
        CovModel::Increment { delta, law } => {
            let (h, sigma) = law.laws()?;
            ("increment", (*delta as f64, 0.0), increment_autocov(*delta, &h, &sigma)?.value)
        }
        CovModel::LocalLimit { r, v, law } => {
            let (h, sigma) = law.laws()?;
            ("local_limit", (*r, *v), local_cov_limit(*r, *v, &h, &sigma)?.value)
        }
    };
    println!("{value:?}");
    if let Some(path) = out {
        let table = CovarianceTable { queries: vec![query], values: vec![value], model: name.into() };
        let mut f = create(path)?;
        table.write_csv(&mut f)?;
        std::io::Write::flush(&mut f)?;
    }
    Ok(Outcome::Pass)
}

fn report(out: Option<&Path>, csv_name: &str, write: impl FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>, summary: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(summary)?);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut f = create(&dir.join(csv_name))?;
        write(&mut f)?;
        std::io::Write::flush(&mut f)?;
        write_json(&dir.join("summary.json"), summary)?;
    }
    Ok(())
}

fn verdict(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn cmd_verify(suite: Suite, cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    match suite {
        Suite::Rescale => verify_rescale(cfg, out),
        Suite::Kc => verify_kc(cfg, out),
        Suite::Holder => verify_holder(cfg, out),
        Suite::Fig2 => verify_fig2(&cfg.analysis.fig2, out),
    }
}

fn verify_rescale(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let a = &cfg.analysis.rescale;
    let rep = rescaling_test(&cfg.kernel_spec()?, &cfg.hurst, &cfg.sim_config()?, a.t, &a.h_values, &a.pairs, a.n_paths)?;
    let checks = rep.checks();
    let pass = checks.final_within_3se && checks.monotone;
    let summary = json!({
        "suite": "rescale",
        "pass": pass,
        "seed": cfg.seed,
        "t": rep.t,
        "n_paths": rep.n_paths,
        "final_within_3se": checks.final_within_3se,
        "monotone": checks.monotone,
        "h_values": rep.h_values,
        "max_abs_err": rep.max_abs_err,
        "ks_distance": rep.ks_distance,
    });
    report(out, "rescale.csv", |w| rep.write_csv(w), &summary)?;
    Ok(verdict(pass))
}

fn verify_kc(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let a = &cfg.analysis.kc;
    let sim = cfg.sim_config()?;
    let paths = simulate_ensemble(&cfg.kernel_spec()?, &cfg.hurst, &sim, a.n_paths, cfg.sim.process)?;
    let (xs, hs): (Vec<_>, Vec<_>) = paths.into_iter().unzip();
    let field = match a.exponent {
        Some(e) => vec![HurstPath::constant(sim.grid, e)?],
        None => hs,
    };
    let rep = kc_moment_check(&xs, &field, a.p, &a.t_values, &a.h_values)?;
    let pass = rep.verdict == KcVerdict::Bounded;
    let mut summary = rep.summary_json();
    summary["suite"] = json!("kc");
    summary["pass"] = json!(pass);
    summary["seed"] = json!(cfg.seed);
    summary["n_paths"] = json!(a.n_paths);
    summary["exponent"] = json!(a.exponent);
    report(out, "kc.csv", |w| rep.write_csv(w), &summary)?;
    Ok(verdict(pass))
}

fn verify_holder(cfg: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    let a = &cfg.analysis.holder;
    let paths = simulate_ensemble(&cfg.kernel_spec()?, &cfg.hurst, &cfg.sim_config()?, cfg.sim.n_paths, cfg.sim.process)?;
    let mut rows = Vec::new();
    for (i, (x, h)) in paths.iter().enumerate() {
        let star = lsc_variant(h);
        for &t in &a.points {
            rows.push((i, t, star.at(t), estimate_holder(x, t, a.n_scales, a.window)?.alpha_hat));
        }
    }
    let mut alphas: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let mut targets: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (m_alpha, m_target) = (median(&mut alphas), median(&mut targets));
    let pass = (m_alpha - m_target).abs() <= a.tolerance;
    let summary = json!({
        "suite": "holder",
        "pass": pass,
        "seed": cfg.seed,
        "n_paths": cfg.sim.n_paths,
        "median_alpha": m_alpha,
        "median_h_star": m_target,
        "tolerance": a.tolerance,
    });
    let write = |w: &mut dyn std::io::Write| {
        writeln!(w, "path,t,H_star,alpha")?;
        for (i, t, h, al) in &rows {
            writeln!(w, "{i},{t},{h},{al}")?;
        }
        Ok(())
    };
    report(out, "holder.csv", write, &summary)?;
    Ok(verdict(pass))
}

fn verify_fig2(f: &Fig2Config, out: Option<&Path>) -> Result<Outcome> {
    let s = fig2_contrast(f)?;
    let inside = |x: f64, (lo, hi): (f64, f64)| x > lo && x < hi;
    let pass = inside(s.median_alpha_ito, FIG2_ITO_BAND) && inside(s.median_alpha_field, FIG2_FIELD_BAND);
    let summary = json!({
        "suite": "fig2",
        "pass": pass,
        "seed": f.seed,
        "n_paths": f.n_paths,
        "median_H": s.median_h,
        "median_alpha_mbm": s.median_alpha_field,
        "median_alpha_ito_mbm": s.median_alpha_ito,
        "band_alpha_mbm": FIG2_FIELD_BAND,
        "band_alpha_ito_mbm": FIG2_ITO_BAND,
    });
    report(out, "fig2.csv", |w| s.write_csv(w), &summary)?;
    Ok(verdict(pass))
}

/// Default seed of `reproduce fig1`.
pub const FIG1_SEED: u64 = 1;
/// Default seed of `reproduce fig2`.
pub const FIG2_SEED: u64 = 2;

fn fig1_hurst() -> HurstSpec {
    HurstSpec::TanhOfFbm { center: 0.5, amplitude: 0.3, driver_hurst: 0.7, driver_seed: None }
}

fn cmd_reproduce(figure: Figure, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    ensure_dir(out)?;
    let note = "the seeds of the published figures are unknown; reproduction is qualitative";
    let manifest = match figure {
        Figure::Fig1 => {
            let seed = seed.unwrap_or(FIG1_SEED);
            let lambda = 4.0;
            let hurst = fig1_hurst();
            let mut sim = SimConfig::new(UniformGrid::new(0.0, 1.0, 2048)?).with_seed(seed, 0);
            sim.substeps = 4;
            let kernel = KernelSpec::matern(lambda)?;
            let (x, h) = simulate_ensemble(&kernel, &hurst, &sim, 1, Process::Ito)?.remove(0);
            write_path(create(&out.join("matern_path.csv"))?, &x)?;
            write_hurst(create(&out.join("hurst_path.csv"))?, &h)?;
            json!({
                "figure": "fig1",
                "seed": seed,
                "seed_note": note,
                "kernel": { "family": "matern", "lambda": lambda, "sigma": 1.0 },
                "hurst": hurst,
                "grid": { "t_max": 1.0, "n_cells": 2048, "substeps": sim.substeps },
                "files": {
                    "matern_path.csv": "t,value: the process on the output grid",
                    "hurst_path.csv": "t,H: the Hurst path on the driver grid",
                },
            })
        }
        Figure::Fig2 => {
            let seed = seed.unwrap_or(FIG2_SEED);
            let f = Fig2Config { seed, ..Fig2Config::default() };
            let mut sim = SimConfig::new(UniformGrid::new(0.0, 1.0, f.n_cells)?).with_seed(seed, 0);
            sim.substeps = 1;
            let (lo, hi) = f.hurst.bounds();
            let plan = SimPlan::new(&KernelSpec::ito_mbm(), lo, hi, &sim)?;
            let h = generate_hurst(&f.hurst, plan.hurst_grid(), seed, 0)?;
            let draw = plan.draw(seed, 0);
            write_path(create(&out.join("mbm_path.csv"))?, &plan.field(&draw, &h)?)?;
            write_path(create(&out.join("ito_mbm_path.csv"))?, &plan.ito(&draw, &h)?)?;
            write_hurst(create(&out.join("hurst_path.csv"))?, &h)?;
            json!({
                "figure": "fig2",
                "seed": seed,
                "driver_seed": seed,
                "seed_note": note,
                "sigma": 1.0,
                "hurst": f.hurst,
                "grid": { "t_max": 1.0, "n_cells": f.n_cells, "substeps": sim.substeps },
                "files": {
                    "mbm_path.csv": "t,value: the field B(t, H_t)",
                    "ito_mbm_path.csv": "t,value: the adapted process from the same driver",
                    "hurst_path.csv": "t,H: the Hurst path",
                },
            })
        }
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(Outcome::Pass)
}

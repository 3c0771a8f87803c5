//! Subcommand drivers. Each writes its CSV outputs plus `manifest.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use fracduct::calibration::{predicted_field, write_comparison_csv};
use fracduct::duct::write_profile_csv;
use fracduct::grid::fmt_num;
use fracduct::{
    field_max, grid_search, inv_frac_power, load_profile, midline_profile, pcg_solve, solve_duct,
    Grid2D, LaplacianOperator, MultiTermProblem, Normalization, ScalarField, ThetaDeltaClamp,
};

use crate::config::{parse_value_list, Method, RunConfig, ValueList};
use crate::CliError;

type CmdResult = Result<(), CliError>;

trait Classify<T> {
    fn config_err(self) -> Result<T, CliError>;
    fn solver_err(self) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config_err(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Config(e.into()))
    }

    fn solver_err(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Solver(e.into()))
    }
}

#[derive(Debug, Serialize)]
struct ClampRecord {
    requested: f64,
    applied: f64,
    min_eigenvalue: f64,
}

impl From<ThetaDeltaClamp> for ClampRecord {
    fn from(c: ThetaDeltaClamp) -> Self {
        Self {
            requested: c.requested,
            applied: c.applied,
            min_eigenvalue: c.delta,
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a, A: Serialize> {
    command: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    arguments: A,
    theta_delta_clamps: Vec<ClampRecord>,
    outputs: Vec<String>,
}

struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))
            .solver_err()?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
    ) -> Result<(), CliError> {
        write_file(&self.root.join(name), body).solver_err()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn manifest<A: Serialize>(
        mut self,
        command: &'static str,
        config: &RunConfig,
        arguments: A,
        clamps: Vec<ClampRecord>,
    ) -> CmdResult {
        self.written.sort();
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            arguments,
            theta_delta_clamps: clamps,
            outputs: self.written,
        };
        write_file(&self.root.join("manifest.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)?;
            Ok(())
        })
        .solver_err()
    }
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    body(&mut w).with_context(|| format!("cannot write {}", path.display()))?;
    w.flush()?;
    Ok(())
}

/// The grid row closest to `x2 = 0.5`.
fn central_profile(field: &ScalarField) -> fracduct::Result<Vec<(f64, f64)>> {
    let grid = field.grid();
    midline_profile(field, grid.x2(grid.n2() / 2))
}

pub fn solve(cfg: &RunConfig) -> CmdResult {
    let grid = cfg.grid().config_err()?;
    let params = cfg.model_params().config_err()?;
    let solution = solve_duct(&params, grid, &cfg.solver()).solver_err()?;
    let field = &solution.field;
    let (wmax, x1, x2) = field_max(field);
    let profile = central_profile(field).solver_err()?;

    let mut out = OutDir::create(&cfg.output.directory)?;
    out.write("field.csv", |w| Ok(field.write_csv(w)?))?;
    out.write("profile.csv", |w| Ok(write_profile_csv(&profile, w)?))?;
    out.write("summary.csv", |w| {
        writeln!(w, "w_max,x1,x2")?;
        writeln!(w, "{},{},{}", fmt_num(wmax), fmt_num(x1), fmt_num(x2))?;
        Ok(())
    })?;
    if let Some(report) = &solution.cg_report {
        out.write("cg_history.csv", |w| Ok(report.write_csv(w)?))?;
        if !report.converged {
            log::warn!("pcg stopped after {} iterations", report.iterations);
        }
    }
    let clamps = solution.clamp.into_iter().map(Into::into).collect();
    out.manifest("solve", cfg, serde_json::json!({}), clamps)?;
    println!(
        "w_max = {} at ({}, {})",
        fmt_num(wmax),
        fmt_num(x1),
        fmt_num(x2)
    );
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FracStudyArgs {
    /// Pseudo-time step counts.
    #[arg(long = "n0", value_delimiter = ',', default_values_t = [5usize, 10, 20, 100])]
    pub n0: Vec<usize>,
    /// Requested shifts; defaults to pi^2 and 2 pi^2.
    #[arg(long = "theta-delta", value_delimiter = ',', default_values_t = [std::f64::consts::PI.powi(2), 2.0 * std::f64::consts::PI.powi(2)])]
    pub theta_delta: Vec<f64>,
    /// Fractional powers of `A^beta w = 1`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5])]
    pub beta: Vec<f64>,
    /// Aspect ratios; `n1` is scaled with `d` to keep the mesh size.
    #[arg(long = "d", value_delimiter = ',', default_values_t = [1.0])]
    pub d: Vec<f64>,
}

struct FracCase {
    beta: f64,
    d: f64,
    theta_delta: f64,
    n0: usize,
}

impl FracCase {
    fn tag(&self) -> String {
        format!(
            "beta-{}_d-{}_td-{:.4}_n0-{}",
            self.beta, self.d, self.theta_delta, self.n0
        )
    }
}

struct FracResult {
    theta_delta: f64,
    wmax: f64,
    clamp: Option<ThetaDeltaClamp>,
}

fn scaled_grid(cfg: &RunConfig, d: f64) -> fracduct::Result<Grid2D> {
    let n1 = ((cfg.grid.n1 as f64 * d / cfg.grid.d).round() as usize).max(2);
    Grid2D::new(n1, cfg.grid.n2, d)
}

fn run_frac_case(cfg: &RunConfig, case: &FracCase, root: &Path) -> anyhow::Result<FracResult> {
    let mut case_cfg = cfg.clone();
    case_cfg.fracpow.n0 = case.n0;
    let grid = scaled_grid(cfg, case.d)?;
    let op = LaplacianOperator::new(grid);
    let (frac, clamp) = case_cfg.frac_config(&op, case.theta_delta, case.beta)?;
    let (w, trace) = inv_frac_power(&op, &ScalarField::constant(grid, 1.0), &frac)?;
    let profile = central_profile(&w)?;
    let tag = case.tag();
    write_file(&root.join(format!("{tag}_trace.csv")), |f| {
        Ok(trace.write_csv(f)?)
    })?;
    write_file(&root.join(format!("{tag}_profile.csv")), |f| {
        Ok(write_profile_csv(&profile, f)?)
    })?;
    write_file(&root.join(format!("{tag}_field.csv")), |f| {
        Ok(w.write_csv(f)?)
    })?;
    Ok(FracResult {
        theta_delta: frac.theta_delta,
        wmax: field_max(&w).0,
        clamp,
    })
}

pub fn fracstudy(cfg: &RunConfig, args: &FracStudyArgs) -> CmdResult {
    if let Some(b) = args.beta.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
        return Err(CliError::Config(anyhow!("--beta: {b} is not in (0, 1)")));
    }
    if let Some(d) = args.d.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(CliError::Config(anyhow!(
            "--d: {d} is not a positive aspect ratio"
        )));
    }
    if args.n0.contains(&0) {
        return Err(CliError::Config(anyhow!(
            "--n0: step counts must be positive"
        )));
    }
    if let Some(t) = args.theta_delta.iter().find(|t| !(**t > 0.0)) {
        return Err(CliError::Config(anyhow!(
            "--theta-delta: {t} is not positive"
        )));
    }
    for &d in &args.d {
        scaled_grid(cfg, d).config_err()?;
    }

    let cases: Vec<FracCase> = args
        .beta
        .iter()
        .flat_map(|&beta| {
            args.d.iter().flat_map(move |&d| {
                args.theta_delta.iter().flat_map(move |&theta_delta| {
                    args.n0.iter().map(move |&n0| FracCase {
                        beta,
                        d,
                        theta_delta,
                        n0,
                    })
                })
            })
        })
        .collect();

    let mut out = OutDir::create(&cfg.output.directory)?;
    let root = out.root.clone();
    let results: Vec<anyhow::Result<FracResult>> = cases
        .par_iter()
        .map(|case| run_frac_case(cfg, case, &root))
        .collect();

    let mut failed = 0;
    let mut clamps = Vec::new();
    for (case, result) in cases.iter().zip(&results) {
        match result {
            Ok(r) => {
                let tag = case.tag();
                for kind in ["trace", "profile", "field"] {
                    out.written.push(format!("{tag}_{kind}.csv"));
                }
                clamps.extend(r.clamp.map(ClampRecord::from));
            }
            Err(e) => {
                failed += 1;
                log::error!("fracstudy case {} failed: {e:#}", case.tag());
            }
        }
    }
    out.write("wmax.csv", |w| {
        writeln!(w, "beta,d,theta_delta_requested,theta_delta,n0,w_max")?;
        for (case, result) in cases.iter().zip(&results) {
            let (td, wmax) = match result {
                Ok(r) => (fmt_num(r.theta_delta), fmt_num(r.wmax)),
                Err(_) => ("nan".into(), "nan".into()),
            };
            writeln!(
                w,
                "{},{},{},{td},{},{wmax}",
                fmt_num(case.beta),
                fmt_num(case.d),
                fmt_num(case.theta_delta),
                case.n0
            )?;
        }
        Ok(())
    })?;
    out.manifest("fracstudy", cfg, args, clamps)?;
    println!(
        "fracstudy: {} of {} cases completed",
        cases.len() - failed,
        cases.len()
    );
    if failed > 0 {
        return Err(CliError::Solver(anyhow!("{failed} fracstudy cases failed")));
    }
    Ok(())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CgStudyArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 10.0, 100.0])]
    pub mu: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5])]
    pub alpha: Vec<f64>,
}

struct CgRow {
    iterations: usize,
    converged: bool,
    final_eps: f64,
    kappa: f64,
}

pub fn cgstudy(cfg: &RunConfig, args: &CgStudyArgs) -> CmdResult {
    if let Some(mu) = args.mu.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        return Err(CliError::Config(anyhow!(
            "--mu: {mu} is not a nonnegative number"
        )));
    }
    if let Some(a) = args.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(CliError::Config(anyhow!("--alpha: {a} is not in (0, 1)")));
    }
    let grid = cfg.grid().config_err()?;
    let op = LaplacianOperator::new(grid);
    let (frac, clamp) = cfg
        .frac_config(&op, cfg.fracpow.theta_delta, 0.5)
        .config_err()?;
    let opts = cfg.pcg_options();
    let one = ScalarField::constant(grid, 1.0);

    let cases: Vec<(f64, f64)> = args
        .mu
        .iter()
        .flat_map(|&mu| args.alpha.iter().map(move |&alpha| (mu, alpha)))
        .collect();
    let tag = |mu: f64, alpha: f64| format!("cg_mu-{mu}_alpha-{alpha}.csv");

    let mut out = OutDir::create(&cfg.output.directory)?;
    let root = out.root.clone();
    let results: Vec<anyhow::Result<CgRow>> = cases
        .par_iter()
        .map(|&(mu, alpha)| {
            let prob = MultiTermProblem::new(mu, alpha, frac, one.clone())?;
            let (_, report) = pcg_solve(&op, &prob, &opts)?;
            write_file(&root.join(tag(mu, alpha)), |w| Ok(report.write_csv(w)?))?;
            Ok(CgRow {
                iterations: report.iterations,
                converged: report.converged,
                final_eps: report.residual_history.last().copied().unwrap_or(f64::NAN),
                kappa: report.kappa_bound,
            })
        })
        .collect();

    let mut failed = 0;
    for (&(mu, alpha), result) in cases.iter().zip(&results) {
        match result {
            Ok(_) => out.written.push(tag(mu, alpha)),
            Err(e) => {
                failed += 1;
                log::error!("cgstudy mu = {mu}, alpha = {alpha} failed: {e:#}");
            }
        }
    }
    let ln_eps = (2.0 / opts.tol).ln();
    out.write("cgstudy.csv", |w| {
        writeln!(
            w,
            "mu,alpha,iterations,converged,final_epsilon,kappa_bound,iteration_bound"
        )?;
        for (&(mu, alpha), result) in cases.iter().zip(&results) {
            match result {
                Ok(r) => writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    fmt_num(mu),
                    fmt_num(alpha),
                    r.iterations,
                    r.converged,
                    fmt_num(r.final_eps),
                    fmt_num(r.kappa),
                    (0.5 * r.kappa.sqrt() * ln_eps).ceil() as usize
                )?,
                Err(_) => writeln!(
                    w,
                    "{},{},nan,false,nan,nan,nan",
                    fmt_num(mu),
                    fmt_num(alpha)
                )?,
            }
        }
        Ok(())
    })?;
    out.manifest(
        "cgstudy",
        cfg,
        args,
        clamp.into_iter().map(Into::into).collect(),
    )?;
    println!(
        "cgstudy: {} of {} cases completed",
        cases.len() - failed,
        cases.len()
    );
    if failed > 0 {
        return Err(CliError::Solver(anyhow!("{failed} cgstudy cases failed")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationArg {
    Max,
    None,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::Max => Normalization::Max,
            NormalizationArg::None => Normalization::None,
        }
    }
}

fn serialize_list<S: serde::Serializer>(v: &ValueList, s: S) -> Result<S::Ok, S::Error> {
    v.0.serialize(s)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Measured profile, CSV with header `x1,x2,u_mean`.
    #[arg(long)]
    pub profile: PathBuf,
    /// mu lattice: comma list or start:stop:count.
    #[arg(long, value_parser = parse_value_list, default_value = "10:100:10")]
    #[serde(serialize_with = "serialize_list")]
    pub mu: ValueList,
    /// alpha lattice: comma list or start:stop:count.
    #[arg(long, value_parser = parse_value_list, default_value = "0.1:0.9:9")]
    #[serde(serialize_with = "serialize_list")]
    pub alpha: ValueList,
    #[arg(long, value_enum, default_value_t = NormalizationArg::Max)]
    pub normalization: NormalizationArg,
    /// Lines `x1 = const` along which measured and predicted values are compared.
    #[arg(long = "cross-lines", value_delimiter = ',', default_values_t = [0.5, 0.7, 0.9])]
    pub cross_lines: Vec<f64>,
}

pub fn calibrate(cfg: &RunConfig, args: &CalibrateArgs) -> CmdResult {
    let grid = cfg.grid().config_err()?;
    let file = File::open(&args.profile)
        .with_context(|| format!("cannot open profile {}", args.profile.display()))
        .config_err()?;
    let label = args.profile.display().to_string();
    let profile = load_profile(file, grid.d(), label.clone())
        .with_context(|| format!("invalid profile {label}"))
        .config_err()?;
    let variant = cfg.model.variant.into();
    let normalization = args.normalization.into();
    let solver = cfg.solver();

    let result = grid_search(
        &args.mu.0,
        &args.alpha.0,
        &profile,
        grid,
        variant,
        normalization,
        &solver,
    )
    .solver_err()?;
    let best = predicted_field(
        result.best_mu,
        result.best_alpha,
        grid,
        variant,
        normalization,
        &solver,
    )
    .solver_err()?;

    let mut out = OutDir::create(&cfg.output.directory)?;
    out.write("surface.csv", |w| Ok(result.write_surface_csv(w)?))?;
    out.write("best_fit.txt", |w| {
        writeln!(w, "{}", result.summary())?;
        Ok(())
    })?;
    for &line in &args.cross_lines {
        let points = profile.cross_line(line, 1e-9);
        if points.is_empty() {
            log::warn!("no measurement points on the cross-line x1 = {line}");
        }
        out.write(&format!("comparison_x1-{line}.csv"), |w| {
            Ok(write_comparison_csv(&best, &points, w)?)
        })?;
    }
    // the shift only matters when the pseudo-parabolic scheme runs
    let clamp = match cfg.model.method {
        Method::Pcg => {
            cfg.frac_config(&LaplacianOperator::new(grid), solver.theta_delta, 0.5)
                .solver_err()?
                .1
        }
        Method::Spectral => None,
    };
    out.manifest(
        "calibrate",
        cfg,
        args,
        clamp.into_iter().map(Into::into).collect(),
    )?;
    println!("{}", result.summary());
    Ok(())
}

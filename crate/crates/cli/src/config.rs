//! Run configuration: JSON file, defaults, and dotted command-line overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use fracduct::{
    resolve_theta_delta, DuctModelParams, DuctSolverConfig, FracPowerConfig, Grid2D,
    LaplacianOperator, ModelVariant, PcgOptions, SolveBackend, SolveMethod, ThetaDeltaClamp,
};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub fracpow: FracPowSection,
    pub cg: CgSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n1: usize,
    pub n2: usize,
    pub d: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n1: 100,
            n2: 100,
            d: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub alpha: f64,
    pub variant: Variant,
    pub method: Method,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            mu: 1.0,
            alpha: 0.5,
            variant: Variant::OneTerm,
            method: Method::Pcg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FracPowSection {
    /// Requested shift; clamped below the minimal eigenvalue when too large.
    pub theta_delta: f64,
    pub n0: usize,
    pub inner_tol: f64,
    pub backend: Backend,
}

impl Default for FracPowSection {
    fn default() -> Self {
        Self {
            theta_delta: 2.0 * PI * PI,
            n0: 100,
            inner_tol: 1e-12,
            backend: Backend::Cg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgSection {
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Backend,
}

impl Default for CgSection {
    fn default() -> Self {
        let pcg = PcgOptions::default();
        Self {
            tol: pcg.tol,
            max_iter: pcg.max_iter,
            preconditioner: Backend::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("fracduct-out"),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    TwoTerm,
    OneTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Pcg,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Cg,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
}

impl From<Variant> for ModelVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::TwoTerm => ModelVariant::TwoTerm,
            Variant::OneTerm => ModelVariant::OneTerm,
        }
    }
}

impl From<Method> for SolveMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Pcg => SolveMethod::Pcg,
            Method::Spectral => SolveMethod::Spectral,
        }
    }
}

impl From<Backend> for SolveBackend {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Cg => SolveBackend::Cg,
            Backend::Spectral => SolveBackend::Spectral,
        }
    }
}

/// Every config key as a flag of the same dotted name.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long = "grid.n1", global = true, value_name = "N")]
    grid_n1: Option<usize>,
    #[arg(long = "grid.n2", global = true, value_name = "N")]
    grid_n2: Option<usize>,
    #[arg(long = "grid.d", global = true, value_name = "D")]
    grid_d: Option<f64>,
    #[arg(long = "model.mu", global = true, value_name = "MU")]
    model_mu: Option<f64>,
    #[arg(long = "model.alpha", global = true, value_name = "ALPHA")]
    model_alpha: Option<f64>,
    #[arg(long = "model.variant", global = true)]
    model_variant: Option<Variant>,
    #[arg(long = "model.method", global = true)]
    model_method: Option<Method>,
    #[arg(long = "fracpow.theta_delta", global = true, value_name = "SHIFT")]
    fracpow_theta_delta: Option<f64>,
    #[arg(long = "fracpow.n0", global = true, value_name = "STEPS")]
    fracpow_n0: Option<usize>,
    #[arg(long = "fracpow.inner_tol", global = true, value_name = "TOL")]
    fracpow_inner_tol: Option<f64>,
    #[arg(long = "fracpow.backend", global = true)]
    fracpow_backend: Option<Backend>,
    #[arg(long = "cg.tol", global = true, value_name = "TOL")]
    cg_tol: Option<f64>,
    #[arg(long = "cg.max_iter", global = true, value_name = "N")]
    cg_max_iter: Option<usize>,
    #[arg(long = "cg.preconditioner", global = true)]
    cg_preconditioner: Option<Backend>,
    #[arg(long = "output.directory", global = true, value_name = "DIR")]
    output_directory: Option<PathBuf>,
    #[arg(long = "output.format", global = true)]
    output_format: Option<Format>,
}

fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
    if let Some(v) = value {
        *slot = v.clone();
    }
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.grid.n1, &self.grid_n1);
        set(&mut cfg.grid.n2, &self.grid_n2);
        set(&mut cfg.grid.d, &self.grid_d);
        set(&mut cfg.model.mu, &self.model_mu);
        set(&mut cfg.model.alpha, &self.model_alpha);
        set(&mut cfg.model.variant, &self.model_variant);
        set(&mut cfg.model.method, &self.model_method);
        set(&mut cfg.fracpow.theta_delta, &self.fracpow_theta_delta);
        set(&mut cfg.fracpow.n0, &self.fracpow_n0);
        set(&mut cfg.fracpow.inner_tol, &self.fracpow_inner_tol);
        set(&mut cfg.fracpow.backend, &self.fracpow_backend);
        set(&mut cfg.cg.tol, &self.cg_tol);
        set(&mut cfg.cg.max_iter, &self.cg_max_iter);
        set(&mut cfg.cg.preconditioner, &self.cg_preconditioner);
        set(&mut cfg.output.directory, &self.output_directory);
        set(&mut cfg.output.format, &self.output_format);
    }
}

/// Parses a config document; errors name the offending key path.
pub fn parse_config(text: &str) -> anyhow::Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            anyhow::anyhow!("{inner}")
        } else {
            anyhow::anyhow!("key `{path}`: {inner}")
        }
    })
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
}

impl RunConfig {
    /// Checks every section against the solver invariants.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.grid().context("key `grid`")?;
        if self.model.variant == Variant::TwoTerm || self.model.mu > 0.0 {
            self.model_params().context("key `model`")?;
        } else {
            bail!("key `model.mu`: the one-term model needs mu > 0");
        }
        let f = &self.fracpow;
        if !(f.theta_delta > 0.0 && f.theta_delta.is_finite()) {
            bail!(
                "key `fracpow.theta_delta`: must be positive, got {}",
                f.theta_delta
            );
        }
        if f.n0 == 0 {
            bail!("key `fracpow.n0`: need at least one step");
        }
        if !(f.inner_tol > 0.0) {
            bail!(
                "key `fracpow.inner_tol`: must be positive, got {}",
                f.inner_tol
            );
        }
        if !(self.cg.tol > 0.0) {
            bail!("key `cg.tol`: must be positive, got {}", self.cg.tol);
        }
        if self.cg.max_iter == 0 {
            bail!("key `cg.max_iter`: must be at least 1");
        }
        Ok(())
    }

    pub fn grid(&self) -> fracduct::Result<Grid2D> {
        Grid2D::new(self.grid.n1, self.grid.n2, self.grid.d)
    }

    pub fn model_params(&self) -> fracduct::Result<DuctModelParams> {
        DuctModelParams::new(
            self.model.mu,
            self.model.alpha,
            self.grid.d,
            self.model.variant.into(),
        )
    }

    pub fn pcg_options(&self) -> PcgOptions {
        PcgOptions {
            tol: self.cg.tol,
            max_iter: self.cg.max_iter,
            preconditioner: self.cg.preconditioner.into(),
            ..PcgOptions::default()
        }
    }

    pub fn solver(&self) -> DuctSolverConfig {
        DuctSolverConfig {
            method: self.model.method.into(),
            theta_delta: self.fracpow.theta_delta,
            n0: self.fracpow.n0,
            inner_tol: self.fracpow.inner_tol,
            inner_backend: self.fracpow.backend.into(),
            pcg: self.pcg_options(),
        }
    }

    /// Pseudo-parabolic settings on `op` with power `gamma` and the shift resolved.
    pub fn frac_config(
        &self,
        op: &LaplacianOperator,
        theta_delta: f64,
        gamma: f64,
    ) -> fracduct::Result<(FracPowerConfig, Option<ThetaDeltaClamp>)> {
        let (td, clamp) = resolve_theta_delta(theta_delta, op.min_eigenvalue())?;
        let cfg = FracPowerConfig::new(gamma, td, self.fracpow.n0)
            .with_inner_tol(self.fracpow.inner_tol)
            .with_backend(self.fracpow.backend.into());
        Ok((cfg, clamp))
    }
}

/// Comma-separated values or `start:stop:count` (inclusive, evenly spaced).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueList(pub Vec<f64>);

pub fn parse_value_list(s: &str) -> Result<ValueList, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{t}` is not a finite number"))
    };
    match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|t| num(t.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(ValueList),
        [start, stop, count] => {
            let (a, b) = (num(start)?, num(stop)?);
            let n: usize = count
                .parse()
                .map_err(|_| format!("`{count}` is not a point count"))?;
            match n {
                0 => Err("a range needs at least one point".into()),
                1 => Ok(ValueList(vec![a])),
                _ => Ok(ValueList(
                    (0..n)
                        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                        .collect(),
                )),
            }
        }
        _ => Err(format!(
            "`{s}` is neither a comma list nor start:stop:count"
        )),
    }
}

//! The duct-flow model: nondimensionalization, the two-term and one-term
//! velocity problems with rhs `1`, and post-processing of the computed field.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::frac_power::{frac_power_solve, resolve_theta_delta, FracPowerConfig, ThetaDeltaClamp};
use crate::grid::{fmt_num, Grid2D, ScalarField};
use crate::laplacian::{LaplacianOperator, SolveBackend};
use crate::multiterm::{pcg_solve, CgReport, MultiTermProblem, PcgOptions};
use crate::spectral::{frac_apply, two_term_solve_exact};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelVariant {
    /// `-Δu + μ(-Δ)^α u = 1`.
    TwoTerm,
    /// `μ(-Δ)^α u = 1`, the laminar term dropped.
    #[default]
    OneTerm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuctModelParams {
    mu: f64,
    alpha: f64,
    d: f64,
    variant: ModelVariant,
}

impl DuctModelParams {
    pub fn new(mu: f64, alpha: f64, d: f64, variant: ModelVariant) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(
                "mu",
                format!("must be finite and nonnegative, got {mu}"),
            ));
        }
        if variant == ModelVariant::OneTerm && mu == 0.0 {
            return Err(invalid("mu", "the one-term model needs mu > 0"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(
                "d",
                format!("aspect ratio must be positive, got {d}"),
            ));
        }
        Ok(Self {
            mu,
            alpha,
            d,
            variant,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }
}

/// Dimensional data of the longitudinal momentum equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// kinematic viscosity
    pub nu: f64,
    /// eddy diffusivity coefficient
    pub xi: f64,
    /// channel height
    pub d2: f64,
    /// driving force `-(1/ρ) dp/dx3`
    pub chi: f64,
    pub rho: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) {
            return Err(invalid("nu", format!("must be positive, got {}", self.nu)));
        }
        if !(self.d2 > 0.0) {
            return Err(invalid("d2", format!("must be positive, got {}", self.d2)));
        }
        Ok(())
    }
}

/// Returns `(μ, u0)` with `μ = (ξ/ν) d2^{2(1-α)}` and velocity scale `u0 = d2² χ / ν`.
pub fn nondimensionalize(phys: &PhysicalParams, alpha: f64) -> (f64, f64) {
    let mu = phys.xi / phys.nu * phys.d2.powf(2.0 * (1.0 - alpha));
    let u0 = phys.d2 * phys.d2 * phys.chi / phys.nu;
    (mu, u0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// PCG for the two-term model, pseudo-parabolic scheme for the one-term model.
    #[default]
    Pcg,
    /// Exact sine expansion.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuctSolverConfig {
    pub method: SolveMethod,
    /// Requested shift; values not below `δ` are clamped.
    pub theta_delta: f64,
    pub n0: usize,
    pub inner_tol: f64,
    pub inner_backend: SolveBackend,
    pub pcg: PcgOptions,
}

impl Default for DuctSolverConfig {
    fn default() -> Self {
        Self {
            method: SolveMethod::Pcg,
            theta_delta: 2.0 * PI * PI,
            n0: 100,
            inner_tol: 1e-12,
            inner_backend: SolveBackend::Cg,
            pcg: PcgOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DuctSolution {
    pub field: ScalarField,
    /// Present when the two-term model was solved by PCG.
    pub cg_report: Option<CgReport>,
    /// Present when the pseudo-parabolic scheme ran with a clamped shift.
    pub clamp: Option<ThetaDeltaClamp>,
}

fn frac_template(
    op: &LaplacianOperator,
    cfg: &DuctSolverConfig,
) -> Result<(FracPowerConfig, Option<ThetaDeltaClamp>)> {
    let (td, clamp) = resolve_theta_delta(cfg.theta_delta, op.min_eigenvalue())?;
    let template = FracPowerConfig::new(0.5, td, cfg.n0)
        .with_inner_tol(cfg.inner_tol)
        .with_backend(cfg.inner_backend);
    Ok((template, clamp))
}

/// Solves the model with rhs `1` on `grid`, whose aspect ratio must equal `params.d()`.
pub fn solve_duct(
    params: &DuctModelParams,
    grid: Grid2D,
    cfg: &DuctSolverConfig,
) -> Result<DuctSolution> {
    if (grid.d() - params.d).abs() > 1e-12 * params.d {
        return Err(invalid(
            "d",
            format!("model aspect ratio {} differs from grid {grid}", params.d),
        ));
    }
    let op = LaplacianOperator::new(grid);
    let one = ScalarField::constant(grid, 1.0);
    let (mu, alpha) = (params.mu, params.alpha);

    let solution = match (params.variant, cfg.method) {
        (ModelVariant::TwoTerm, SolveMethod::Spectral) => DuctSolution {
            field: two_term_solve_exact(&op, mu, alpha, &one)?,
            cg_report: None,
            clamp: None,
        },
        (ModelVariant::TwoTerm, SolveMethod::Pcg) => {
            let (template, clamp) = if mu > 0.0 {
                frac_template(&op, cfg)?
            } else {
                // W is never applied; the shift only has to be admissible
                (
                    FracPowerConfig::new(0.5, 0.5 * op.min_eigenvalue(), cfg.n0),
                    None,
                )
            };
            let problem = MultiTermProblem::new(mu, alpha, template, one)?;
            let (field, report) = pcg_solve(&op, &problem, &cfg.pcg)?;
            if !report.converged {
                return Err(Error::NotConverged {
                    solver: "pcg",
                    iterations: report.iterations,
                    residual: report.residual_history.last().copied().unwrap_or(f64::NAN),
                });
            }
            DuctSolution {
                field,
                cg_report: Some(report),
                clamp,
            }
        }
        (ModelVariant::OneTerm, SolveMethod::Spectral) => DuctSolution {
            field: frac_apply(&op, &one, -alpha)?.scaled(1.0 / mu),
            cg_report: None,
            clamp: None,
        },
        (ModelVariant::OneTerm, SolveMethod::Pcg) => {
            let (template, clamp) = frac_template(&op, cfg)?;
            let w = frac_power_solve(&op, &one, alpha, &template)?;
            DuctSolution {
                field: w.scaled(1.0 / mu),
                cg_report: None,
                clamp,
            }
        }
    };
    Ok(solution)
}

/// Values along the grid line `x2`, boundary endpoints included.
pub fn midline_profile(field: &ScalarField, x2: f64) -> Result<Vec<(f64, f64)>> {
    let grid = field.grid();
    let pos = x2 / grid.h2();
    let j = pos.round();
    if !(0.0..=1.0).contains(&x2) || (pos - j).abs() > 1e-9 {
        return Err(invalid(
            "x2",
            format!("{x2} is not a grid line of {grid} (h2 = {})", grid.h2()),
        ));
    }
    let j = j as usize;
    Ok((0..=grid.n1())
        .map(|i| (grid.x1(i), field.node(i, j)))
        .collect())
}

/// Largest interior value and its node; the first maximum in `(i1, i2)` order wins.
pub fn field_max(field: &ScalarField) -> (f64, f64, f64) {
    let grid = field.grid();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for ((a, b), &v) in field.values().indexed_iter() {
        if v > best.0 {
            best = (v, a, b);
        }
    }
    (best.0, grid.x1(best.1 + 1), grid.x2(best.2 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by the field maximum.
    #[default]
    Max,
    None,
}

pub fn normalize_field(field: &ScalarField, mode: Normalization) -> Result<ScalarField> {
    match mode {
        Normalization::None => Ok(field.clone()),
        Normalization::Max => {
            let (max, _, _) = field_max(field);
            if !(max > 0.0) {
                return Err(invalid(
                    "normalization",
                    format!("cannot normalize by nonpositive maximum {max}"),
                ));
            }
            // divide rather than scale so the new maximum is exactly 1
            Ok(ScalarField::from_array_unchecked(
                *field.grid(),
                field.values() / max,
            ))
        }
    }
}

/// `x1,value`, one row per profile point.
pub fn write_profile_csv<W: Write>(profile: &[(f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x1,value")?;
    for (x1, v) in profile {
        writeln!(out, "{},{}", fmt_num(*x1), fmt_num(*v))?;
    }
    Ok(())
}

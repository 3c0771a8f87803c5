//! Conjugate gradients for `A y + mu A^alpha y = rhs`, preconditioned by `A`.
//!
//! The operator is applied as `A (p + mu W p)` where `W ~ A^{alpha - 1}` is the
//! pseudo-parabolic map of [`crate::frac_power`] with `gamma = 1 - alpha`. With
//! a fixed [`FracPowerConfig`] `W` is a fixed SPD rational function of `A`, so
//! the preconditioned operator is SPD with spectrum in `[1, 1 + mu delta^{alpha-1}]`.

use std::io::Write;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::frac_power::{inv_frac_power, FracPowerConfig};
use crate::grid::{check_grids, fmt_num, ScalarField};
use crate::krylov::{Cg, Reference};
use crate::laplacian::{LaplacianOperator, SolveBackend};

#[derive(Debug, Clone)]
pub struct MultiTermProblem {
    mu: f64,
    alpha: f64,
    frac_cfg: FracPowerConfig,
    rhs: ScalarField,
}

impl MultiTermProblem {
    /// `frac_template` supplies the shift, step count and inner solver;
    /// its power is replaced by `1 - alpha`.
    pub fn new(
        mu: f64,
        alpha: f64,
        frac_template: FracPowerConfig,
        rhs: ScalarField,
    ) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(
                "mu",
                format!("must be finite and nonnegative, got {mu}"),
            ));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            mu,
            alpha,
            frac_cfg: frac_template.with_gamma(1.0 - alpha),
            rhs,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn frac_cfg(&self) -> &FracPowerConfig {
        &self.frac_cfg
    }

    pub fn rhs(&self) -> &ScalarField {
        &self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// How `z = A^{-1} r` is computed.
    pub preconditioner: SolveBackend,
    /// Tolerance of the preconditioner solve when it is iterative.
    pub preconditioner_tol: f64,
}

impl Default for PcgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            preconditioner: SolveBackend::Spectral,
            preconditioner_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// `eps_k = |r_k| / |r_0|`, starting with `eps_0 = 1`.
    pub residual_history: Vec<f64>,
    pub kappa_bound: f64,
    pub converged: bool,
}

impl CgReport {
    /// `k,epsilon`, rows from `k = 0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,epsilon")?;
        for (k, eps) in self.residual_history.iter().enumerate() {
            writeln!(out, "{k},{}", fmt_num(*eps))?;
        }
        Ok(())
    }
}

/// Upper bound `gamma2 / gamma1 = 1 + mu delta^{alpha - 1}` of the preconditioned
/// condition number.
pub fn kappa_bound(mu: f64, alpha: f64, delta: f64) -> f64 {
    1.0 + mu * delta.powf(alpha - 1.0)
}

fn apply_array(
    op: &LaplacianOperator,
    p: &Array2<f64>,
    prob: &MultiTermProblem,
) -> Result<Array2<f64>> {
    if prob.mu == 0.0 {
        return Ok(op.apply_array(p));
    }
    let field = ScalarField::from_array_unchecked(*op.grid(), p.clone());
    let (wp, _) = inv_frac_power(op, &field, &prob.frac_cfg)?;
    let mut inner = p.clone();
    inner.scaled_add(prob.mu, wp.values());
    Ok(op.apply_array(&inner))
}

/// `A (p + mu W p)`; for `mu = 0` exactly `A p`.
pub fn apply_multiterm(
    op: &LaplacianOperator,
    p: &ScalarField,
    prob: &MultiTermProblem,
) -> Result<ScalarField> {
    check_grids(op.grid(), p.grid())?;
    let out = apply_array(op, p.values(), prob)?;
    Ok(ScalarField::from_array_unchecked(*op.grid(), out))
}

/// Preconditioned CG from `y_0 = 0`, stopping when `|r_k| / |r_0| <= tol`.
///
/// Hitting `max_iter` is not an error: the smallest-residual iterate is returned
/// with `converged = false`. A nonpositive `(A~ p, p)` is a hard error.
pub fn pcg_solve(
    op: &LaplacianOperator,
    prob: &MultiTermProblem,
    opts: &PcgOptions,
) -> Result<(ScalarField, CgReport)> {
    pcg_solve_observed(op, prob, opts, |_, _| {})
}

/// [`pcg_solve`] reporting every iterate and `(z_k, r_k)` to `observe`.
pub(crate) fn pcg_solve_observed(
    op: &LaplacianOperator,
    prob: &MultiTermProblem,
    opts: &PcgOptions,
    observe: impl FnMut(&Array2<f64>, Option<f64>),
) -> Result<(ScalarField, CgReport)> {
    check_grids(op.grid(), prob.rhs.grid())?;
    if !(opts.tol > 0.0) {
        return Err(invalid(
            "tol",
            format!("must be positive, got {}", opts.tol),
        ));
    }
    if opts.max_iter == 0 {
        return Err(invalid("max_iter", "must be at least 1"));
    }
    let delta = op.min_eigenvalue();
    if prob.mu > 0.0 {
        prob.frac_cfg.validate(delta)?;
    }

    let cg = Cg {
        tol: opts.tol,
        max_iter: opts.max_iter,
        reference: Reference::InitialResidual,
        weight: op.grid().cell_area(),
    };
    let rhs = prob.rhs.values();
    let mut y = Array2::zeros(rhs.dim());
    let outcome = cg.solve_observed(
        |p| apply_array(op, p, prob),
        |r| {
            op.shifted_solve_array(
                1.0,
                0.0,
                r,
                None,
                opts.preconditioner_tol,
                opts.preconditioner,
            )
        },
        rhs,
        &mut y,
        observe,
    )?;
    let report = CgReport {
        iterations: outcome.iterations,
        residual_history: outcome.history,
        kappa_bound: kappa_bound(prob.mu, prob.alpha, delta),
        converged: outcome.converged,
    };
    Ok((ScalarField::from_array_unchecked(*op.grid(), y), report))
}

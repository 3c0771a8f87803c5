//! Solution of `A^gamma w = f` through a pseudo-parabolic Cauchy problem.
//!
//! With `D = A - theta_delta E`, the function
//! `v(t) = theta_delta^gamma (t D + theta_delta E)^{-gamma} v(0)` satisfies
//!
//! ```text
//! (t D + theta_delta E) dv/dt + gamma D v = 0,   v(0) = theta_delta^{-gamma} f,
//! ```
//!
//! and `v(1) = A^{-gamma} f`. The problem is integrated over `t in [0, 1]` with
//! `n0` Crank-Nicolson steps. Each step is one SPD solve with `c1 A + c0 E`.
//! The discrete map `f -> v^{n0}` is a fixed rational function of `A`, so it is
//! linear and self-adjoint, and both `|v^n|` and `|v^n|_D` are nonincreasing.

use std::io::Write;

use ndarray::Array2;

use crate::error::{invalid, Result};
use crate::grid::{check_grids, dot, fmt_num, ScalarField};
use crate::laplacian::{LaplacianOperator, SolveBackend};

/// Fraction of `delta` that a requested `theta_delta` is clamped to.
pub const THETA_DELTA_CAP: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracPowerConfig {
    /// Power of the inverse: the solver returns `A^{-gamma} f`.
    pub gamma: f64,
    /// Shift `theta * delta`, strictly inside `(0, delta)`.
    pub theta_delta: f64,
    /// Number of pseudo-time steps, `tau = 1 / n0`.
    pub n0: usize,
    /// Relative residual tolerance of the per-step shifted solve.
    pub inner_tol: f64,
    pub backend: SolveBackend,
}

impl FracPowerConfig {
    pub fn new(gamma: f64, theta_delta: f64, n0: usize) -> Self {
        Self {
            gamma,
            theta_delta,
            n0,
            inner_tol: 1e-12,
            backend: SolveBackend::Cg,
        }
    }

    pub fn with_inner_tol(mut self, inner_tol: f64) -> Self {
        self.inner_tol = inner_tol;
        self
    }

    pub fn with_backend(mut self, backend: SolveBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.n0 as f64
    }

    pub fn validate(&self, delta: f64) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(
                "gamma",
                format!("must lie in (0, 1), got {}", self.gamma),
            ));
        }
        if !(self.theta_delta > 0.0 && self.theta_delta < delta) {
            return Err(invalid(
                "theta_delta",
                format!(
                    "must lie in (0, delta) with delta = {delta}, got {}",
                    self.theta_delta
                ),
            ));
        }
        if self.n0 == 0 {
            return Err(invalid("n0", "need at least one pseudo-time step"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(invalid(
                "inner_tol",
                format!("must be positive, got {}", self.inner_tol),
            ));
        }
        Ok(())
    }
}

/// Record of a `theta_delta` request that had to be pulled below `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDeltaClamp {
    pub requested: f64,
    pub applied: f64,
    pub delta: f64,
}

/// Returns `min(requested, THETA_DELTA_CAP * delta)` and the clamp, if any.
pub fn resolve_theta_delta(requested: f64, delta: f64) -> Result<(f64, Option<ThetaDeltaClamp>)> {
    if !(requested > 0.0 && requested.is_finite()) {
        return Err(invalid(
            "theta_delta",
            format!("must be positive and finite, got {requested}"),
        ));
    }
    let cap = THETA_DELTA_CAP * delta;
    if requested <= cap {
        return Ok((requested, None));
    }
    log::warn!(
        "theta_delta = {requested} is not below the minimal eigenvalue {delta}; clamped to {cap}"
    );
    Ok((
        cap,
        Some(ThetaDeltaClamp {
            requested,
            applied: cap,
            delta,
        }),
    ))
}

/// Pseudo-time history of one solve, including `t = 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FracPowerTrace {
    pub times: Vec<f64>,
    pub max_values: Vec<f64>,
    pub norms_e: Vec<f64>,
    pub norms_d: Vec<f64>,
}

impl FracPowerTrace {
    fn record(&mut self, t: f64, v: &Array2<f64>, av: &Array2<f64>, theta_delta: f64, weight: f64) {
        let vv = dot(v, v) * weight;
        let avv = dot(av, v) * weight;
        self.times.push(t);
        self.max_values
            .push(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        self.norms_e.push(vv.sqrt());
        self.norms_d.push((avv - theta_delta * vv).max(0.0).sqrt());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t,w_max,norm_E,norm_D`, one row per step.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,w_max,norm_E,norm_D")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_num(self.times[i]),
                fmt_num(self.max_values[i]),
                fmt_num(self.norms_e[i]),
                fmt_num(self.norms_d[i])
            )?;
        }
        Ok(())
    }
}

/// `v^0 = theta_delta^{-gamma} f`.
pub fn initial_state(f: &ScalarField, cfg: &FracPowerConfig) -> ScalarField {
    f.scaled(cfg.theta_delta.powf(-cfg.gamma))
}

/// Approximates `A^{-gamma} f`; returns the final state and the pseudo-time trace.
pub fn inv_frac_power(
    op: &LaplacianOperator,
    f: &ScalarField,
    cfg: &FracPowerConfig,
) -> Result<(ScalarField, FracPowerTrace)> {
    check_grids(op.grid(), f.grid())?;
    cfg.validate(op.min_eigenvalue())?;

    let weight = op.grid().cell_area();
    let td = cfg.theta_delta;
    let tau = cfg.tau();
    let half = 0.5 * cfg.gamma * tau;

    let mut v = initial_state(f, cfg).into_values();
    let mut av = op.apply_array(&v);
    let mut trace = FracPowerTrace::default();
    trace.record(0.0, &v, &av, td, weight);

    for n in 0..cfg.n0 {
        let t_mid = (n as f64 + 0.5) * tau;
        // (t D + td E)(v' - v)/tau + gamma D (v' + v)/2 = 0 with D = A - td E
        let (lhs_a, rhs_a) = (t_mid + half, t_mid - half);
        let lhs_e = td * (1.0 - lhs_a);
        let rhs_e = td * (1.0 - rhs_a);
        let rhs = &av * rhs_a + &v * rhs_e;
        v = op.shifted_solve_array(lhs_a, lhs_e, &rhs, Some(&v), cfg.inner_tol, cfg.backend)?;
        av = op.apply_array(&v);
        trace.record((n + 1) as f64 * tau, &v, &av, td, weight);
    }

    Ok((ScalarField::from_array_unchecked(*op.grid(), v), trace))
}

/// Solves `A^beta w = f` with the pseudo-parabolic scheme; `template` supplies
/// everything but the power.
pub fn frac_power_solve(
    op: &LaplacianOperator,
    f: &ScalarField,
    beta: f64,
    template: &FracPowerConfig,
) -> Result<ScalarField> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1), got {beta}")));
    }
    inv_frac_power(op, f, &template.with_gamma(beta)).map(|(w, _)| w)
}

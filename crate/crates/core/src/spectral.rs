//! Exact eigen-expansion solutions on the tensor grid.
//!
//! This is the verification path: every iterative solver in the crate is
//! checked against these closed forms. It relies on the sine basis and so only
//! applies to the rectangular Dirichlet problem.

use ndarray::{Array2, Zip};

use crate::error::{invalid, Result};
use crate::grid::{check_grids, Grid2D, ScalarField};
use crate::laplacian::LaplacianOperator;

/// Coefficients `(y, phi_m)`, indexed `[m1 - 1, m2 - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    grid: Grid2D,
    coeffs: Array2<f64>,
}

impl SpectralCoefficients {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn get(&self, m1: usize, m2: usize) -> f64 {
        self.coeffs[[m1 - 1, m2 - 1]]
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

pub fn analyze(op: &LaplacianOperator, y: &ScalarField) -> Result<SpectralCoefficients> {
    check_grids(op.grid(), y.grid())?;
    Ok(SpectralCoefficients {
        grid: *op.grid(),
        coeffs: op.basis().analyze(y.values().view()),
    })
}

pub fn synthesize(op: &LaplacianOperator, c: &SpectralCoefficients) -> Result<ScalarField> {
    check_grids(op.grid(), &c.grid)?;
    Ok(ScalarField::from_array_unchecked(
        *op.grid(),
        op.basis().synthesize(c.coeffs.view()),
    ))
}

/// Applies `g(lambda)` to every eigencomponent of `y`.
pub fn spectral_map(
    op: &LaplacianOperator,
    y: &ScalarField,
    g: impl Fn(f64) -> f64,
) -> Result<ScalarField> {
    check_grids(op.grid(), y.grid())?;
    let basis = op.basis();
    let mut c = basis.analyze(y.values().view());
    Zip::from(&mut c)
        .and(basis.eigenvalues())
        .for_each(|ci, &lam| *ci *= g(lam));
    Ok(ScalarField::from_array_unchecked(
        *op.grid(),
        basis.synthesize(c.view()),
    ))
}

/// `A^s y`; negative `s` gives inverse powers.
pub fn frac_apply(op: &LaplacianOperator, y: &ScalarField, s: f64) -> Result<ScalarField> {
    if !s.is_finite() {
        return Err(invalid("s", format!("exponent must be finite, got {s}")));
    }
    // lambda >= delta > 0, so the logarithm is defined
    spectral_map(op, y, |lam| (s * lam.ln()).exp())
}

/// Solves `A y + mu A^alpha y = rhs` exactly.
pub fn two_term_solve_exact(
    op: &LaplacianOperator,
    mu: f64,
    alpha: f64,
    rhs: &ScalarField,
) -> Result<ScalarField> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(
            "mu",
            format!("must be finite and nonnegative, got {mu}"),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    spectral_map(op, rhs, |lam| 1.0 / (lam + mu * (alpha * lam.ln()).exp()))
}

//! Matrix-free 5-point Dirichlet Laplacian `A = A1 + A2`, its spectrum and
//! shifted solves with `c1 A + c0 E`.

use std::sync::Arc;

use ndarray::{s, Array2, Zip};

use crate::error::{invalid, Error, Result};
use crate::grid::{check_grids, Grid2D, ScalarField};
use crate::krylov::{Cg, Reference};
use crate::sine::{eigenvalues_1d, SineBasis};

/// Largest interior size for which [`LaplacianOperator::assemble_dense`] is allowed.
pub const DENSE_LIMIT: usize = 4096;

/// Backend for the SPD solves with `c1 A + c0 E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveBackend {
    /// Conjugate gradients, matrix-free.
    #[default]
    Cg,
    /// Exact diagonalization in the sine basis (tensor grids only).
    Spectral,
}

/// Mode index `(m1, m2)` with `1 <= m_k <= N_k - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EigenIndex {
    pub m1: usize,
    pub m2: usize,
}

impl EigenIndex {
    pub fn new(m1: usize, m2: usize) -> Self {
        Self { m1, m2 }
    }
}

#[derive(Debug, Clone)]
pub struct LaplacianOperator {
    grid: Grid2D,
    basis: Arc<SineBasis>,
}

impl LaplacianOperator {
    pub fn new(grid: Grid2D) -> Self {
        Self {
            grid,
            basis: Arc::new(SineBasis::new(&grid)),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub(crate) fn basis(&self) -> &SineBasis {
        &self.basis
    }

    pub fn apply(&self, y: &ScalarField) -> Result<ScalarField> {
        check_grids(&self.grid, y.grid())?;
        Ok(ScalarField::from_array_unchecked(
            self.grid,
            self.apply_array(y.values()),
        ))
    }

    pub(crate) fn apply_array(&self, y: &Array2<f64>) -> Array2<f64> {
        self.apply_shifted_array(1.0, 0.0, y)
    }

    /// `(c1 A + c0 E) y` on raw interior values.
    pub(crate) fn apply_shifted_array(&self, c1: f64, c0: f64, y: &Array2<f64>) -> Array2<f64> {
        let k1 = c1 / (self.grid.h1() * self.grid.h1());
        let k2 = c1 / (self.grid.h2() * self.grid.h2());
        let mut out = y * (2.0 * k1 + 2.0 * k2 + c0);
        let (r1, r2) = y.dim();
        if r1 > 1 {
            Zip::from(out.slice_mut(s![1.., ..]))
                .and(y.slice(s![..-1, ..]))
                .for_each(|o, &v| *o -= k1 * v);
            Zip::from(out.slice_mut(s![..-1, ..]))
                .and(y.slice(s![1.., ..]))
                .for_each(|o, &v| *o -= k1 * v);
        }
        if r2 > 1 {
            Zip::from(out.slice_mut(s![.., 1..]))
                .and(y.slice(s![.., ..-1]))
                .for_each(|o, &v| *o -= k2 * v);
            Zip::from(out.slice_mut(s![.., ..-1]))
                .and(y.slice(s![.., 1..]))
                .for_each(|o, &v| *o -= k2 * v);
        }
        out
    }

    /// Lower spectral bound `delta = delta1 + delta2`, equal to the smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        eigenvalues_1d(self.grid.n1(), self.grid.h1())[0]
            + eigenvalues_1d(self.grid.n2(), self.grid.h2())[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let (a, b) = self.grid.shape();
        self.basis.eigenvalues()[[a - 1, b - 1]]
    }

    fn check_index(&self, idx: EigenIndex) -> Result<()> {
        let (a, b) = self.grid.shape();
        if idx.m1 == 0 || idx.m2 == 0 || idx.m1 > a || idx.m2 > b {
            return Err(Error::IndexOutOfRange {
                m1: idx.m1,
                m2: idx.m2,
                grid: self.grid,
            });
        }
        Ok(())
    }

    pub fn eigenvalue(&self, idx: EigenIndex) -> Result<f64> {
        self.check_index(idx)?;
        Ok(self.basis.eigenvalues()[[idx.m1 - 1, idx.m2 - 1]])
    }

    /// Eigenfunction with unit discrete norm.
    pub fn eigenfunction(&self, idx: EigenIndex) -> Result<ScalarField> {
        self.check_index(idx)?;
        Ok(ScalarField::from_array_unchecked(
            self.grid,
            self.basis.eigenvector(idx.m1, idx.m2),
        ))
    }

    /// All eigenvalues, `[m1 - 1, m2 - 1]`.
    pub fn eigenvalues(&self) -> &Array2<f64> {
        self.basis.eigenvalues()
    }

    /// Solves `(c1 A + c0 E) z = rhs` to relative residual `tol`.
    pub fn shifted_solve(
        &self,
        c1: f64,
        c0: f64,
        rhs: &ScalarField,
        tol: f64,
        backend: SolveBackend,
    ) -> Result<ScalarField> {
        check_grids(&self.grid, rhs.grid())?;
        let z = self.shifted_solve_array(c1, c0, rhs.values(), None, tol, backend)?;
        Ok(ScalarField::from_array_unchecked(self.grid, z))
    }

    pub(crate) fn shifted_solve_array(
        &self,
        c1: f64,
        c0: f64,
        rhs: &Array2<f64>,
        guess: Option<&Array2<f64>>,
        tol: f64,
        backend: SolveBackend,
    ) -> Result<Array2<f64>> {
        let margin = c1 * self.min_eigenvalue() + c0;
        if !(c1 > 0.0 && margin > 0.0) {
            return Err(Error::Indefinite { c1, c0, margin });
        }
        if !(tol > 0.0) {
            return Err(invalid("tol", format!("must be positive, got {tol}")));
        }
        match backend {
            SolveBackend::Spectral => {
                let mut c = self.basis.analyze(rhs.view());
                Zip::from(&mut c)
                    .and(self.basis.eigenvalues())
                    .for_each(|ci, &lam| *ci /= c1 * lam + c0);
                Ok(self.basis.synthesize(c.view()))
            }
            SolveBackend::Cg => {
                let mut x = match guess {
                    Some(g) => g.clone(),
                    None => Array2::zeros(rhs.dim()),
                };
                let cg = Cg {
                    tol,
                    max_iter: 10 * self.grid.interior_count(),
                    reference: Reference::Rhs,
                    weight: self.grid.cell_area(),
                };
                let out = cg.solve(
                    |v| Ok(self.apply_shifted_array(c1, c0, v)),
                    |r| Ok(r.clone()),
                    rhs,
                    &mut x,
                )?;
                if !out.converged {
                    return Err(Error::NotConverged {
                        solver: "shifted CG",
                        iterations: out.iterations,
                        residual: *out.history.last().unwrap_or(&f64::NAN),
                    });
                }
                Ok(x)
            }
        }
    }

    /// Dense matrix of `A` in the interior ordering (`i2` fastest). Test oracle only.
    pub fn assemble_dense(&self) -> Result<Array2<f64>> {
        let m = self.grid.interior_count();
        if m > DENSE_LIMIT {
            return Err(invalid(
                "grid",
                format!("{m} interior nodes exceed the dense assembly limit {DENSE_LIMIT}"),
            ));
        }
        let shape = self.grid.shape();
        let mut dense = Array2::zeros((m, m));
        let mut unit = Array2::zeros(shape);
        for j in 0..m {
            let idx = (j / shape.1, j % shape.1);
            unit[idx] = 1.0;
            let col = self.apply_array(&unit);
            for (i, v) in col.iter().enumerate() {
                dense[[i, j]] = *v;
            }
            unit[idx] = 0.0;
        }
        Ok(dense)
    }
}

//! Uniform grid on the duct cross-section `[0, d] x [0, 1]` and grid functions
//! with homogeneous Dirichlet data.
//!
//! Nodes sit at `x_k = i_k h_k`, `i_k = 0..=N_k`. Only the `(N1-1)(N2-1)`
//! interior values are stored; boundary values are zero by convention.
//! Storage is row-major with `i2` varying fastest.

use std::fmt;
use std::io::Write;

use ndarray::{Array2, Zip};

use crate::error::{invalid, Error, Result};
use crate::laplacian::LaplacianOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n1: usize,
    n2: usize,
    d: f64,
    h1: f64,
    h2: f64,
}

impl Grid2D {
    /// Grid with `n1` intervals along `x1 in [0, d]` and `n2` along `x2 in [0, 1]`.
    pub fn new(n1: usize, n2: usize, d: f64) -> Result<Self> {
        if n1 < 2 || n2 < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 intervals per direction, got n1 = {n1}, n2 = {n2}"
            )));
        }
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "duct width d must be positive and finite, got {d}"
            )));
        }
        Ok(Self {
            n1,
            n2,
            d,
            h1: d / n1 as f64,
            h2: 1.0 / n2 as f64,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// Quadrature weight `h1 h2` of the discrete inner product.
    pub fn cell_area(&self) -> f64 {
        self.h1 * self.h2
    }

    /// Shape of the interior value array, `(n1 - 1, n2 - 1)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.n1 - 1, self.n2 - 1)
    }

    /// Number of interior nodes `M = (n1 - 1)(n2 - 1)`.
    pub fn interior_count(&self) -> usize {
        (self.n1 - 1) * (self.n2 - 1)
    }

    /// Coordinate of node index `i1` (0..=n1).
    pub fn x1(&self, i1: usize) -> f64 {
        i1 as f64 * self.h1
    }

    /// Coordinate of node index `i2` (0..=n2).
    pub fn x2(&self, i2: usize) -> f64 {
        i2 as f64 * self.h2
    }

    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        (0.0..=self.d).contains(&x1) && (0.0..=1.0).contains(&x2)
    }
}

impl fmt::Display for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} on [0, {}]x[0, 1]", self.n1, self.n2, self.d)
    }
}

/// Interior nodal values of a grid function.
///
/// `values[[i1 - 1, i2 - 1]]` is the value at `(i1 h1, i2 h2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem(grid.shape(), value),
        }
    }

    /// Samples `f(x1, x2)` at every interior node.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values =
            Array2::from_shape_fn(grid.shape(), |(a, b)| f(grid.x1(a + 1), grid.x2(b + 1)));
        Self { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(invalid(
                "values",
                format!(
                    "shape {:?} does not match grid interior {:?}",
                    values.dim(),
                    grid.shape()
                ),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid("values", format!("non-finite entry {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_array_unchecked(grid: Grid2D, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Value at node `(i1, i2)` with `0 <= i1 <= n1`, `0 <= i2 <= n2`; zero on the boundary.
    pub fn node(&self, i1: usize, i2: usize) -> f64 {
        if i1 == 0 || i2 == 0 || i1 >= self.grid.n1 || i2 >= self.grid.n2 {
            0.0
        } else {
            self.values[[i1 - 1, i2 - 1]]
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: &self.values * c,
        }
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: f64, b: f64, other: &ScalarField) -> Result<Self> {
        self.check_same_grid(other)?;
        let mut values = self.values.clone();
        Zip::from(&mut values)
            .and(&other.values)
            .for_each(|v, &w| *v = a * *v + b * w);
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        check_grids(&self.grid, &other.grid)
    }

    /// Writes `x1,x2,value`, one row per interior node, `i1` outer and `i2` inner.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x1,x2,value")?;
        for ((a, b), v) in self.values.indexed_iter() {
            writeln!(
                out,
                "{},{},{}",
                fmt_num(self.grid.x1(a + 1)),
                fmt_num(self.grid.x2(b + 1)),
                fmt_num(*v)
            )?;
        }
        Ok(())
    }
}

pub(crate) fn check_grids(a: &Grid2D, b: &Grid2D) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch {
            left: *a,
            right: *b,
        })
    }
}

/// Fixed formatting shared by every CSV writer: 16 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.15e}")
}

/// Discrete inner product `sum y w h1 h2` over interior nodes.
pub fn inner_product(y: &ScalarField, w: &ScalarField) -> Result<f64> {
    y.check_same_grid(w)?;
    Ok(dot(&y.values, &w.values) * y.grid.cell_area())
}

pub fn norm_e(y: &ScalarField) -> f64 {
    (dot(&y.values, &y.values) * y.grid.cell_area()).sqrt()
}

/// Energy norm of `D = A - theta_delta E`, which is positive definite only for
/// `theta_delta < delta`.
pub fn norm_d(y: &ScalarField, theta_delta: f64, op: &LaplacianOperator) -> Result<f64> {
    check_grids(y.grid(), op.grid())?;
    let delta = op.min_eigenvalue();
    if !(theta_delta < delta) {
        return Err(invalid(
            "theta_delta",
            format!("{theta_delta} must lie below the minimal eigenvalue {delta}"),
        ));
    }
    let ay = op.apply(y)?;
    let e2 = inner_product(&ay, y)? - theta_delta * inner_product(y, y)?;
    Ok(e2.max(0.0).sqrt())
}

pub(crate) fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}

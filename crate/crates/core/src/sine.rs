//! Tensor-product sine basis diagonalizing the Dirichlet 5-point Laplacian.
//!
//! Transforms are dense matrix products, `O(M (N1 + N2))` per call.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};

use crate::grid::Grid2D;

#[derive(Debug)]
pub(crate) struct SineBasis {
    /// `s1[[m1 - 1, i1 - 1]] = sqrt(2/d) sin(pi m1 i1 / N1)`
    s1: Array2<f64>,
    s2: Array2<f64>,
    /// eigenvalues of `A`, indexed `[m1 - 1, m2 - 1]`
    eigenvalues: Array2<f64>,
    weight: f64,
}

fn sine_table(n: usize, length: f64) -> Array2<f64> {
    let c = (2.0 / length).sqrt();
    Array2::from_shape_fn((n - 1, n - 1), |(m, i)| {
        c * (PI * ((m + 1) * (i + 1)) as f64 / n as f64).sin()
    })
}

/// `(4 / h^2) sin^2(pi m / 2N)` for `m = 1..N-1`.
pub(crate) fn eigenvalues_1d(n: usize, h: f64) -> Array1<f64> {
    Array1::from_shape_fn(n - 1, |m| {
        let s = (PI * (m + 1) as f64 / (2.0 * n as f64)).sin();
        4.0 / (h * h) * s * s
    })
}

impl SineBasis {
    pub(crate) fn new(grid: &Grid2D) -> Self {
        let l1 = eigenvalues_1d(grid.n1(), grid.h1());
        let l2 = eigenvalues_1d(grid.n2(), grid.h2());
        let eigenvalues = Array2::from_shape_fn(grid.shape(), |(a, b)| l1[a] + l2[b]);
        Self {
            s1: sine_table(grid.n1(), grid.d()),
            s2: sine_table(grid.n2(), 1.0),
            eigenvalues,
            weight: grid.cell_area(),
        }
    }

    pub(crate) fn eigenvalues(&self) -> &Array2<f64> {
        &self.eigenvalues
    }

    /// Coefficients `(y, phi_m)` in the discrete inner product.
    pub(crate) fn analyze(&self, y: ArrayView2<f64>) -> Array2<f64> {
        let mut c = self.s1.dot(&y).dot(&self.s2.t());
        c *= self.weight;
        c
    }

    pub(crate) fn synthesize(&self, c: ArrayView2<f64>) -> Array2<f64> {
        self.s1.t().dot(&c).dot(&self.s2)
    }

    pub(crate) fn eigenvector(&self, m1: usize, m2: usize) -> Array2<f64> {
        let r1 = self.s1.row(m1 - 1);
        let r2 = self.s2.row(m2 - 1);
        Array2::from_shape_fn((r1.len(), r2.len()), |(a, b)| r1[a] * r2[b])
    }
}

//! Preconditioned conjugate gradients on grid arrays, shared by the shifted
//! inner solves and the multi-term outer iteration.

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::grid::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Reference {
    /// `|r_k| / |r_0|`
    InitialResidual,
    /// `|r_k| / |b|`
    Rhs,
}

#[derive(Debug, Clone)]
pub(crate) struct CgOutcome {
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
}

pub(crate) struct Cg {
    pub tol: f64,
    pub max_iter: usize,
    pub reference: Reference,
    /// quadrature weight of the inner product
    pub weight: f64,
}

impl Cg {
    /// Solves `K x = b` starting from the contents of `x`. On non-convergence
    /// `x` holds the iterate with the smallest residual seen.
    pub(crate) fn solve<K, P>(
        &self,
        apply: K,
        precondition: P,
        b: &Array2<f64>,
        x: &mut Array2<f64>,
    ) -> Result<CgOutcome>
    where
        K: FnMut(&Array2<f64>) -> Result<Array2<f64>>,
        P: FnMut(&Array2<f64>) -> Result<Array2<f64>>,
    {
        self.solve_observed(apply, precondition, b, x, |_, _| {})
    }

    /// As [`Cg::solve`], calling `observe(x_k, (z_k, r_k))` after every update.
    /// The product is `None` for the final iterate, where no `z_k` is formed.
    pub(crate) fn solve_observed<K, P, O>(
        &self,
        mut apply: K,
        mut precondition: P,
        b: &Array2<f64>,
        x: &mut Array2<f64>,
        mut observe: O,
    ) -> Result<CgOutcome>
    where
        K: FnMut(&Array2<f64>) -> Result<Array2<f64>>,
        P: FnMut(&Array2<f64>) -> Result<Array2<f64>>,
        O: FnMut(&Array2<f64>, Option<f64>),
    {
        let ip = |a: &Array2<f64>, c: &Array2<f64>| dot(a, c) * self.weight;

        let mut r = if x.iter().all(|v| *v == 0.0) {
            b.clone()
        } else {
            b - &apply(x)?
        };
        let r_norm = ip(&r, &r).sqrt();
        let reference = match self.reference {
            Reference::InitialResidual => r_norm,
            Reference::Rhs => ip(b, b).sqrt(),
        };
        if r_norm == 0.0 || reference == 0.0 {
            if reference == 0.0 {
                x.fill(0.0);
            }
            return Ok(CgOutcome {
                iterations: 0,
                history: vec![0.0],
                converged: true,
            });
        }

        let mut history = vec![r_norm / reference];
        if history[0] <= self.tol {
            return Ok(CgOutcome {
                iterations: 0,
                history,
                converged: true,
            });
        }

        let mut z = precondition(&r)?;
        let mut zr = ip(&z, &r);
        observe(x, Some(zr));
        let mut p = z.clone();
        let mut best = (history[0], x.clone());

        for k in 0..self.max_iter {
            let kp = apply(&p)?;
            let curvature = ip(&kp, &p);
            if !(curvature > 0.0) {
                return Err(Error::Breakdown {
                    iteration: k,
                    curvature,
                });
            }
            let step = zr / curvature;
            x.scaled_add(step, &p);
            r.scaled_add(-step, &kp);

            let eps = ip(&r, &r).sqrt() / reference;
            history.push(eps);
            if eps <= self.tol {
                observe(x, None);
                return Ok(CgOutcome {
                    iterations: k + 1,
                    history,
                    converged: true,
                });
            }
            if eps < best.0 {
                best.0 = eps;
                best.1.assign(x);
            }

            z = precondition(&r)?;
            let zr_next = ip(&z, &r);
            observe(x, Some(zr_next));
            let beta = zr_next / zr;
            zr = zr_next;
            Zip::from(&mut p)
                .and(&z)
                .for_each(|pi, &zi| *pi = zi + beta * *pi);
        }

        x.assign(&best.1);
        Ok(CgOutcome {
            iterations: self.max_iter,
            history,
            converged: false,
        })
    }
}

//! Steady-state space-fractional turbulence model of flow in a rectangular duct.
//!
//! The dimensionless longitudinal velocity solves
//!
//! ```text
//! -Δu + μ (-Δ)^α u = 1   in (0, d) x (0, 1),   u = 0 on the walls,
//! ```
//!
//! discretized with the 5-point Laplacian `A`. The crate provides
//!
//! * [`frac_power`]: `A^{-γ} f` by Crank-Nicolson integration of a pseudo-parabolic problem,
//! * [`multiterm`]: conjugate gradients for `A y + μ A^α y = 1` preconditioned by `A`,
//! * [`spectral`]: exact sine-expansion solutions used as the test oracle,
//! * [`duct`] and [`calibration`]: the physical model, profile post-processing,
//!   and the `(μ, α)` fit against measured velocity profiles.

pub mod calibration;
pub mod duct;
pub mod error;
pub mod frac_power;
pub mod grid;
mod krylov;
pub mod laplacian;
pub mod multiterm;
mod sine;
pub mod spectral;

pub use calibration::{
    deviation, grid_search, interpolate_at, load_profile, CalibrationResult, ExperimentalProfile,
    LatticePoint, MeasurementPoint,
};
pub use duct::{
    field_max, midline_profile, nondimensionalize, normalize_field, solve_duct, DuctModelParams,
    DuctSolution, DuctSolverConfig, ModelVariant, Normalization, PhysicalParams, SolveMethod,
};
pub use error::{Error, Result};
pub use frac_power::{
    frac_power_solve, inv_frac_power, resolve_theta_delta, FracPowerConfig, FracPowerTrace,
    ThetaDeltaClamp,
};
pub use grid::{inner_product, norm_d, norm_e, Grid2D, ScalarField};
pub use laplacian::{EigenIndex, LaplacianOperator, SolveBackend};
pub use multiterm::{
    apply_multiterm, kappa_bound, pcg_solve, CgReport, MultiTermProblem, PcgOptions,
};

//! Fitting `(μ, α)` to measured mean-velocity profiles by exhaustive search
//! over a parameter lattice.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::duct::{
    normalize_field, solve_duct, DuctModelParams, DuctSolverConfig, ModelVariant, Normalization,
};
use crate::error::{invalid, Error, Result};
use crate::grid::{fmt_num, Grid2D, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementPoint {
    pub x1: f64,
    pub x2: f64,
    /// normalized mean longitudinal velocity
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalProfile {
    points: Vec<MeasurementPoint>,
    label: String,
}

impl ExperimentalProfile {
    /// Checks that there is at least one point and all lie in `[0, d] x [0, 1]`.
    pub fn new(points: Vec<MeasurementPoint>, d: f64, label: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("profile", "no measurement points"));
        }
        for p in &points {
            check_point(p.x1, p.x2, d)?;
            if !p.u.is_finite() {
                return Err(invalid("profile", format!("non-finite velocity {}", p.u)));
            }
        }
        Ok(Self {
            points,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[MeasurementPoint] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with `|x1 - line| <= tol`, in file order.
    pub fn cross_line(&self, line: f64, tol: f64) -> Vec<MeasurementPoint> {
        self.points
            .iter()
            .filter(|p| (p.x1 - line).abs() <= tol)
            .copied()
            .collect()
    }
}

fn check_point(x1: f64, x2: f64, d: f64) -> Result<()> {
    if (0.0..=d).contains(&x1) && (0.0..=1.0).contains(&x2) {
        Ok(())
    } else {
        Err(Error::OutsideDomain { x1, x2, d })
    }
}

const COLUMNS: [&str; 3] = ["x1", "x2", "u_mean"];

/// Reads CSV with header `x1,x2,u_mean`; lines starting with `#` are skipped.
pub fn load_profile<R: Read>(
    source: R,
    d: f64,
    label: impl Into<String>,
) -> Result<ExperimentalProfile> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let header_line = reader.position().line().max(1);
    let mut index = [0usize; 3];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Profile {
                line: header_line,
                message: format!(
                    "missing column `{name}` (header is `{}`)",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            })?;
    }

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut vals = [0.0; 3];
        for ((v, &col), name) in vals.iter_mut().zip(&index).zip(COLUMNS) {
            let raw = record.get(col).ok_or_else(|| Error::Profile {
                line,
                message: format!("missing value for `{name}`"),
            })?;
            *v = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Profile {
                    line,
                    message: format!("`{name}` = `{raw}` is not a finite number"),
                })?;
        }
        let [x1, x2, u] = vals;
        check_point(x1, x2, d).map_err(|e| Error::Profile {
            line,
            message: e.to_string(),
        })?;
        points.push(MeasurementPoint { x1, x2, u });
    }
    ExperimentalProfile::new(points, d, label)
}

/// Cell index and local coordinate of `x / h`, snapping onto nodes within rounding.
fn locate(x: f64, h: f64, n: usize) -> (usize, f64) {
    let mut s = x / h;
    if (s - s.round()).abs() <= 1e-12 * n as f64 {
        s = s.round();
    }
    let i = (s.floor() as usize).min(n - 1);
    (i, s - i as f64)
}

/// Bilinear interpolation of the field, extended by zero on the boundary.
pub fn interpolate_at(field: &ScalarField, x1: f64, x2: f64) -> Result<f64> {
    let grid = field.grid();
    check_point(x1, x2, grid.d())?;
    let (i, s) = locate(x1, grid.h1(), grid.n1());
    let (j, t) = locate(x2, grid.h2(), grid.n2());
    let lower = (1.0 - s) * field.node(i, j) + s * field.node(i + 1, j);
    let upper = (1.0 - s) * field.node(i, j + 1) + s * field.node(i + 1, j + 1);
    Ok((1.0 - t) * lower + t * upper)
}

/// `ς = (1/L) sqrt(sum r_l^2)`; note `1/L` sits outside the root.
pub fn sigma(residuals: &[f64]) -> f64 {
    let ss: f64 = residuals.iter().map(|r| r * r).sum();
    ss.sqrt() / residuals.len() as f64
}

/// `ς` between the interpolated field and the measured values.
pub fn deviation(field: &ScalarField, profile: &ExperimentalProfile) -> Result<f64> {
    let residuals = profile
        .points()
        .iter()
        .map(|p| Ok(interpolate_at(field, p.x1, p.x2)? - p.u))
        .collect::<Result<Vec<_>>>()?;
    Ok(sigma(&residuals))
}

/// One evaluated lattice point. Exactly one of `sigma` and `failure` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub mu: f64,
    pub alpha: f64,
    pub sigma: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub best_mu: f64,
    pub best_alpha: f64,
    pub best_sigma: f64,
    /// Every lattice point, `mu` outer and `alpha` inner, in the requested order.
    pub surface: Vec<LatticePoint>,
}

impl CalibrationResult {
    pub fn failures(&self) -> impl Iterator<Item = &LatticePoint> {
        self.surface.iter().filter(|p| p.failure.is_some())
    }

    /// `mu,alpha,sigma`; failed points carry `nan`.
    pub fn write_surface_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "mu,alpha,sigma")?;
        for p in &self.surface {
            let s = p.sigma.map_or_else(|| "nan".to_string(), fmt_num);
            writeln!(out, "{},{},{s}", fmt_num(p.mu), fmt_num(p.alpha))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "best mu = {}, alpha = {}, sigma = {} ({} of {} lattice points failed)",
            fmt_num(self.best_mu),
            fmt_num(self.best_alpha),
            fmt_num(self.best_sigma),
            self.failures().count(),
            self.surface.len()
        )
    }
}

/// Solves the model at a single lattice point and returns the normalized field.
pub fn predicted_field(
    mu: f64,
    alpha: f64,
    grid: Grid2D,
    variant: ModelVariant,
    normalization: Normalization,
    solver: &DuctSolverConfig,
) -> Result<ScalarField> {
    let params = DuctModelParams::new(mu, alpha, grid.d(), variant)?;
    let solution = solve_duct(&params, grid, solver)?;
    normalize_field(&solution.field, normalization)
}

/// Evaluates `ς(μ, α)` on the full lattice in parallel. Failed points are
/// logged, flagged and skipped; it is an error only if every point fails.
pub fn grid_search(
    mu_values: &[f64],
    alpha_values: &[f64],
    profile: &ExperimentalProfile,
    grid: Grid2D,
    variant: ModelVariant,
    normalization: Normalization,
    solver: &DuctSolverConfig,
) -> Result<CalibrationResult> {
    if mu_values.is_empty() || alpha_values.is_empty() {
        return Err(invalid(
            "lattice",
            "need at least one mu and one alpha value",
        ));
    }
    let lattice: Vec<(f64, f64)> = mu_values
        .iter()
        .flat_map(|&mu| alpha_values.iter().map(move |&alpha| (mu, alpha)))
        .collect();

    let surface: Vec<LatticePoint> = lattice
        .par_iter()
        .map(|&(mu, alpha)| {
            let outcome = predicted_field(mu, alpha, grid, variant, normalization, solver)
                .and_then(|u| deviation(&u, profile));
            match outcome {
                Ok(s) if s.is_finite() => LatticePoint {
                    mu,
                    alpha,
                    sigma: Some(s),
                    failure: None,
                },
                Ok(s) => LatticePoint {
                    mu,
                    alpha,
                    sigma: None,
                    failure: Some(format!("non-finite deviation {s}")),
                },
                Err(e) => LatticePoint {
                    mu,
                    alpha,
                    sigma: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut best: Option<(f64, f64, f64)> = None;
    for p in &surface {
        let Some(s) = p.sigma else {
            log::warn!(
                "lattice point mu = {}, alpha = {} failed: {}",
                p.mu,
                p.alpha,
                p.failure.as_deref().unwrap_or("")
            );
            continue;
        };
        let better = match best {
            None => true,
            Some((bs, bm, ba)) => s < bs || (s == bs && (p.mu, p.alpha) < (bm, ba)),
        };
        if better {
            best = Some((s, p.mu, p.alpha));
        }
    }
    let (best_sigma, best_mu, best_alpha) =
        best.ok_or_else(|| invalid("lattice", "every lattice point failed"))?;
    Ok(CalibrationResult {
        best_mu,
        best_alpha,
        best_sigma,
        surface,
    })
}

/// `x1,x2,u_measured,u_predicted` for the given points.
pub fn write_comparison_csv<W: Write>(
    field: &ScalarField,
    points: &[MeasurementPoint],
    mut out: W,
) -> Result<()> {
    writeln!(out, "x1,x2,u_measured,u_predicted")?;
    for p in points {
        let y = interpolate_at(field, p.x1, p.x2)?;
        writeln!(
            out,
            "{},{},{},{}",
            fmt_num(p.x1),
            fmt_num(p.x2),
            fmt_num(p.u),
            fmt_num(y)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duct::SolveMethod;
    use approx::assert_relative_eq;

    fn grid(n1: usize, n2: usize, d: f64) -> Grid2D {
        Grid2D::new(n1, n2, d).unwrap()
    }

    fn pt(x1: f64, x2: f64, u: f64) -> MeasurementPoint {
        MeasurementPoint { x1, x2, u }
    }

    fn load(text: &str) -> Result<ExperimentalProfile> {
        load_profile(text.as_bytes(), 1.0, "test")
    }

    #[test]
    fn load_three_rows() {
        let p = load("# measured\nx1,x2,u_mean\n0.5,0.5,1.0\n0.7, 0.5, 0.9\n# gap\n0.9,0.5,0.4\n")
            .unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.points()[1], pt(0.7, 0.5, 0.9));
        assert_eq!(p.label(), "test");
        // column order is free
        let q = load("u_mean,x2,x1\n1.0,0.5,0.5\n").unwrap();
        assert_eq!(q.points()[0], pt(0.5, 0.5, 1.0));
    }

    #[test]
    fn load_errors_name_the_line() {
        let err = load("x1,x2,u_mean\n0.5,0.5,1.0\n0.5,1.5,1.0\n").unwrap_err();
        assert!(matches!(err, Error::Profile { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("line 3"));

        let err = load("x1,x2,u_mean\n0.5,abc,1.0\n").unwrap_err();
        assert!(matches!(err, Error::Profile { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("abc"));

        let err = load("x1,u_mean\n0.5,1.0\n").unwrap_err();
        assert!(err.to_string().contains("missing column `x2`"), "{err}");

        let err = load("x1,x2,u_mean\n# nothing\n").unwrap_err();
        assert!(err.to_string().contains("no measurement points"), "{err}");
        assert!(load("").is_err());
    }

    #[test]
    fn interpolation_examples() {
        let g = grid(4, 5, 2.0);
        let u = ScalarField::from_fn(g, |x1, x2| 1.0 + x1 + 3.0 * x2 * x2);
        for i in 1..4 {
            for j in 1..5 {
                assert_eq!(interpolate_at(&u, g.x1(i), g.x2(j)).unwrap(), u.node(i, j));
            }
        }
        for (x1, x2) in [(0.0, 0.3), (2.0, 0.5), (1.1, 0.0), (0.7, 1.0)] {
            assert_eq!(interpolate_at(&u, x1, x2).unwrap(), 0.0);
        }
        let center = interpolate_at(&u, 0.75, 0.5).unwrap();
        let mean = (u.node(1, 2) + u.node(2, 2) + u.node(1, 3) + u.node(2, 3)) / 4.0;
        assert_relative_eq!(center, mean, max_relative = 1e-14);
        assert!(matches!(
            interpolate_at(&u, 2.5, 0.5),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(&[0.0, 0.0]), 0.0);
        assert_relative_eq!(sigma(&[0.2]), 0.2, max_relative = 1e-15);
        assert_relative_eq!(sigma(&[0.3, 0.4]), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn deviation_of_exact_samples_is_zero() {
        let g = grid(6, 6, 1.0);
        let u = ScalarField::from_fn(g, |x1, x2| x1 * x2);
        let points = (1..6).map(|i| pt(g.x1(i), 0.5, u.node(i, 3))).collect();
        let profile = ExperimentalProfile::new(points, 1.0, "exact").unwrap();
        assert_eq!(deviation(&u, &profile).unwrap(), 0.0);
        let shifted =
            ExperimentalProfile::new(vec![pt(0.5, 0.5, u.node(3, 3) + 0.2)], 1.0, "").unwrap();
        assert_relative_eq!(deviation(&u, &shifted).unwrap(), 0.2, max_relative = 1e-12);
    }

    fn synthetic(g: Grid2D, mu: f64, alpha: f64, solver: &DuctSolverConfig) -> ExperimentalProfile {
        let u = predicted_field(
            mu,
            alpha,
            g,
            ModelVariant::OneTerm,
            Normalization::None,
            solver,
        )
        .unwrap();
        let xs = [0.1, 0.3, 0.5, 0.7, 0.9];
        let points = xs
            .iter()
            .flat_map(|&x1| xs.iter().map(move |&x2| (x1, x2)))
            .map(|(x1, x2)| pt(x1, x2, interpolate_at(&u, x1, x2).unwrap()))
            .collect();
        ExperimentalProfile::new(points, g.d(), "synthetic").unwrap()
    }

    #[test]
    fn single_lattice_point_is_best() {
        let g = grid(8, 8, 1.0);
        let solver = DuctSolverConfig {
            method: SolveMethod::Spectral,
            ..DuctSolverConfig::default()
        };
        let profile = synthetic(g, 10.0, 0.5, &solver);
        let r = grid_search(
            &[3.0],
            &[0.4],
            &profile,
            g,
            ModelVariant::OneTerm,
            Normalization::Max,
            &solver,
        )
        .unwrap();
        assert_eq!((r.best_mu, r.best_alpha), (3.0, 0.4));
        assert_eq!(r.surface.len(), 1);
        assert_eq!(Some(r.best_sigma), r.surface[0].sigma);
    }

    #[test]
    fn recovers_planted_parameters() {
        let g = grid(10, 10, 1.0);
        let solver = DuctSolverConfig::default();
        let profile = synthetic(g, 50.0, 1.0 / 3.0, &solver);
        let mus = [10.0, 25.0, 50.0, 75.0];
        let alphas = [0.25, 1.0 / 3.0, 0.5];
        let r = grid_search(
            &mus,
            &alphas,
            &profile,
            g,
            ModelVariant::OneTerm,
            Normalization::None,
            &solver,
        )
        .unwrap();
        assert_eq!((r.best_mu, r.best_alpha), (50.0, 1.0 / 3.0));
        assert!(r.best_sigma <= 1e-12);
        assert_eq!(r.surface.len(), 12);
        let min = r
            .surface
            .iter()
            .filter_map(|p| p.sigma)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_sigma, min);
        // lattice order, mu outer
        assert_eq!((r.surface[1].mu, r.surface[1].alpha), (10.0, 1.0 / 3.0));
        assert_eq!((r.surface[3].mu, r.surface[3].alpha), (25.0, 0.25));
    }

    #[test]
    fn failed_points_are_flagged() {
        let g = grid(6, 6, 1.0);
        let solver = DuctSolverConfig {
            method: SolveMethod::Spectral,
            ..DuctSolverConfig::default()
        };
        let profile = synthetic(g, 5.0, 0.5, &solver);
        let r = grid_search(
            &[5.0],
            &[0.5, 1.5],
            &profile,
            g,
            ModelVariant::OneTerm,
            Normalization::Max,
            &solver,
        )
        .unwrap();
        assert_eq!((r.best_mu, r.best_alpha), (5.0, 0.5));
        let failed: Vec<_> = r.failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].alpha, 1.5);
        assert!(failed[0].failure.as_ref().unwrap().contains("alpha"));

        let mut buf = Vec::new();
        r.write_surface_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mu,alpha,sigma\n"));
        assert!(text.lines().nth(2).unwrap().ends_with(",nan"));

        let all_bad = grid_search(
            &[5.0],
            &[1.5],
            &profile,
            g,
            ModelVariant::OneTerm,
            Normalization::Max,
            &solver,
        );
        assert!(all_bad.is_err());
        assert!(grid_search(
            &[],
            &[0.5],
            &profile,
            g,
            ModelVariant::OneTerm,
            Normalization::Max,
            &solver
        )
        .is_err());
    }

    #[test]
    fn ties_prefer_smaller_parameters() {
        // a profile that sits entirely on the boundary sees 0 for every model
        let g = grid(6, 6, 1.0);
        let solver = DuctSolverConfig {
            method: SolveMethod::Spectral,
            ..DuctSolverConfig::default()
        };
        let profile = ExperimentalProfile::new(vec![pt(0.0, 0.5, 0.1)], 1.0, "wall").unwrap();
        let r = grid_search(
            &[9.0, 2.0, 4.0],
            &[0.7, 0.2],
            &profile,
            g,
            ModelVariant::TwoTerm,
            Normalization::Max,
            &solver,
        )
        .unwrap();
        assert_eq!((r.best_mu, r.best_alpha), (2.0, 0.2));
    }

    #[test]
    fn comparison_csv_and_cross_lines() {
        let g = grid(4, 4, 1.0);
        let u = ScalarField::constant(g, 2.0);
        let profile = ExperimentalProfile::new(
            vec![pt(0.5, 0.25, 1.0), pt(0.75, 0.5, 1.5), pt(0.5, 0.5, 1.9)],
            1.0,
            "",
        )
        .unwrap();
        let line = profile.cross_line(0.5, 1e-9);
        assert_eq!(line.len(), 2);
        let mut buf = Vec::new();
        write_comparison_csv(&u, &line, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<_> = text.lines().collect();
        assert_eq!(rows[0], "x1,x2,u_measured,u_predicted");
        assert_eq!(rows.len(), 3);
        assert!(rows[1].ends_with(",2.000000000000000e0"));
    }
}

//! Writes the synthetic calibration fixture: the one-term model at
//! `mu = 50`, `alpha = 1/3` on grid(20, 20, 1), unnormalized, sampled at the
//! 25 points `{0.1, 0.3, 0.5, 0.7, 0.9}^2`.
//!
//! ```text
//! cargo run -p fracduct --example synthetic_profile [OUT]
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};

use fracduct::calibration::{interpolate_at, predicted_field};
use fracduct::grid::fmt_num;
use fracduct::{DuctSolverConfig, Grid2D, ModelVariant, Normalization};

const MU: f64 = 50.0;
const ALPHA: f64 = 1.0 / 3.0;
const XS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/fixtures/synthetic_profile.csv"
        )
        .into()
    });
    let grid = Grid2D::new(20, 20, 1.0)?;
    let u = predicted_field(
        MU,
        ALPHA,
        grid,
        ModelVariant::OneTerm,
        Normalization::None,
        &DuctSolverConfig::default(),
    )?;

    let mut w = BufWriter::new(File::create(&out)?);
    writeln!(
        w,
        "# one-term model, mu = 50, alpha = 1/3, grid 20x20 on [0, 1]x[0, 1]"
    )?;
    writeln!(w, "# default solver settings, no normalization")?;
    writeln!(w, "x1,x2,u_mean")?;
    for x1 in XS {
        for x2 in XS {
            writeln!(w, "{x1},{x2},{}", fmt_num(interpolate_at(&u, x1, x2)?))?;
        }
    }
    w.flush()?;
    eprintln!("wrote {out}");
    Ok(())
}

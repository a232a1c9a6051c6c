//! Homogeneous and checkerboard refinement ladders with observed and
//! worst-case exponents. Writes CSV tables and SVG plots into the directory
//! given as the first argument (default: a temporary one).
//!
//! cargo run --example convergence_ladder -- /tmp/ladder

use std::f64::consts::PI;
use std::path::PathBuf;

use keff_lab::geometry::{build_checkerboard, ElementKind, MaterialProps, RegionMap};
use keff_lab::lab::{
    emit_plot, error_plot, exponent_plot, export_estimates_csv, export_ladder_csv, run_ladder,
    theoretical_order, LadderPlan,
};

fn main() -> keff_lab::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("keff-ladder"));
    std::fs::create_dir_all(&out).map_err(|e| keff_lab::Error::Io {
        path: out.clone(),
        source: e,
    })?;

    let unit = RegionMap::homogeneous(2, MaterialProps::new(1.0, 1.0, 1.0)?)?;
    let plan = LadderPlan {
        map: unit,
        element: ElementKind::Q1,
        levels: 1..=6,
        tolerance: 1e-10,
        workers: 0,
    };
    let ladder = run_ladder(&plan)?;
    let exact = 2.0 * PI * PI + 1.0;
    for r in &ladder.rungs {
        println!(
            "level {} N={:>6} lambda={:.8} error={:.3e}",
            r.level,
            r.elements,
            r.lambda,
            r.lambda - exact
        );
    }
    let plot = error_plot(&ladder, exact);
    println!(
        "log-log slope {:.4}",
        plot.fitted_slope()?.unwrap_or(f64::NAN)
    );
    emit_plot(&plot, &out.join("homogeneous_error.svg"))?;
    export_ladder_csv(&ladder, &out.join("homogeneous.csv"))?;

    let d_max = 40.0;
    let plan = LadderPlan {
        map: build_checkerboard(2, 4, 1.0, d_max, 1.0, 1.0)?,
        levels: 2..=7,
        ..plan
    };
    let ladder = run_ladder(&plan)?;
    let estimates = ladder.estimates(Some(d_max))?;
    println!(
        "checkerboard D_max={d_max}: p* = {:.4}",
        theoretical_order(d_max)?.p_star
    );
    for e in &estimates {
        println!("  level {} p'={:.4}", e.level, e.p_prime);
    }
    export_ladder_csv(&ladder, &out.join("checkerboard.csv"))?;
    export_estimates_csv(&estimates, &out.join("checkerboard_estimates.csv"))?;
    emit_plot(
        &exponent_plot(&estimates),
        &out.join("checkerboard_exponent.svg"),
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

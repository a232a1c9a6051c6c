//! Assembles the three system matrices for a two-material layout and checks
//! the element-level mass spectrum.
//!
//! cargo run --example assemble_system -- 3

use keff_lab::assembly::{assemble, cell_mass_matrix, eigen_extremes};
use keff_lab::geometry::{build_checkerboard, MeshSpec};

fn main() -> keff_lab::Result<()> {
    let level: u32 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let map = build_checkerboard(2, 2, 1.0, 10.0, 0.5, 1.0)?;
    let spec = MeshSpec::q1(2, level)?;
    let sys = assemble(&spec, &map)?;
    for (name, m) in [
        ("L", &sys.stiffness),
        ("A", &sys.absorption),
        ("C", &sys.fission),
    ] {
        println!(
            "{name}: n={} nnz={} bandwidth={} |M - M^T|={:.1e}",
            m.n(),
            m.nnz(),
            m.bandwidth(),
            m.symmetry_defect()
        );
    }

    for h in [0.5, 0.125] {
        let (lo, hi) = eigen_extremes(&cell_mass_matrix(3, h));
        let unit = h * h * h / 216.0;
        println!(
            "h={h}: cell mass eigenvalues {:.6} and {:.6} (units of h^3/216)",
            lo / unit,
            hi / unit
        );
    }
    Ok(())
}

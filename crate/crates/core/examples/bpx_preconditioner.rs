//! The BPX frame: pseudoinverse identity, frame norm, effective condition
//! number of FᵀLF and PCG iteration counts as the mesh is refined.

use keff_lab::assembly::assemble;
use keff_lab::bpx::{bpx_build, bpx_pcg_solve, precond_operator, verify_flft, BpxPreconditioner};
use keff_lab::dense::spectral_norm;
use keff_lab::geometry::{build_checkerboard, MeshSpec};

fn main() -> keff_lab::Result<()> {
    let map = build_checkerboard(2, 2, 1.0, 5.0, 1.0, 1.0)?;
    for level in 2..=4 {
        let sys = assemble(&MeshSpec::q1(2, level)?, &map)?;
        let bpx = bpx_build(2, level)?;
        let eig = precond_operator(&bpx, &sys.stiffness)?
            .to_dense()
            .symmetric_eigenvalues();
        let top = eig.amax();
        let bottom = eig
            .iter()
            .filter(|x| x.abs() > 1e-10 * top)
            .fold(f64::INFINITY, |m, x| m.min(x.abs()));
        println!(
            "L={level}: flft residual {:.2e}, |F| = {:.4}, cond_eff = {:.3}",
            verify_flft(&bpx, &sys.stiffness)?,
            spectral_norm(&bpx.frame),
            top / bottom
        );
    }
    for level in 3..=7 {
        let sys = assemble(&MeshSpec::q1(2, level)?, &map)?;
        let rhs = vec![1.0; sys.stiffness.n()];
        let out = bpx_pcg_solve(
            &sys.stiffness,
            &BpxPreconditioner::new(2, level)?,
            &rhs,
            1e-10,
        )?;
        println!(
            "L={level}: n={:>5} PCG iterations {}",
            rhs.len(),
            out.iterations
        );
    }
    Ok(())
}

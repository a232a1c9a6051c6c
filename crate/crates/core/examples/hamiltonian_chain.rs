//! Multiplies the four factors of the Hamiltonian chain and compares the
//! product with C^½ (L+A)^{-1} C^½ built directly.

use keff_lab::assembly::assemble;
use keff_lab::blockenc::hamiltonian_chain_emulate;
use keff_lab::bpx::bpx_build;
use keff_lab::dense::spectral_norm;
use keff_lab::eigensolve::build_h;
use keff_lab::geometry::{build_checkerboard, MeshSpec};

fn main() -> keff_lab::Result<()> {
    let map = build_checkerboard(2, 4, 1.0, 40.0, 1.0, 1.0)?;
    let sys = assemble(&MeshSpec::q1(2, 3)?, &map)?;
    let (chain, ledger) = hamiltonian_chain_emulate(
        &sys.stiffness,
        &sys.absorption,
        &sys.fission,
        &bpx_build(2, 3)?,
    )?;
    println!("{ledger}");
    let direct = build_h(&sys.stiffness, &sys.absorption, &sys.fission)?.to_dense()?;
    println!("|H_chain - H| = {:.3e}", spectral_norm(&(chain - direct)));
    Ok(())
}

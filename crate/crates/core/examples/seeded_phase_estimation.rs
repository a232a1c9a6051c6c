//! Coarse-grid seed, hierarchical amplitude preparation from Gram prefix
//! sums, and emulated phase estimation on the fine Hamiltonian.

use keff_lab::assembly::assemble;
use keff_lab::eigensolve::{coarse_seed, fission_overlap, qpe_emulate, HamiltonianAction};
use keff_lab::geometry::{MaterialProps, MeshSpec, RegionMap};
use keff_lab::lab::{gram_prefix_sum, stateprep_amplitudes, AxisRange, SplitOrder};

fn main() -> keff_lab::Result<()> {
    // Quarter points of one edge with endpoint values 0 and 1.
    let s = gram_prefix_sum(&[0.0, 1.0], &[AxisRange::new(4, 1, 3)?])?;
    println!("segment sum of squares = {s} (expected 7/8)");

    let map = RegionMap::homogeneous(2, MaterialProps::new(1.0, 1.0, 1.0)?)?;
    let fine = 5;
    let sys = assemble(&MeshSpec::q1(2, fine)?, &map)?;
    let h = HamiltonianAction::for_system(&sys, &map, None)?;
    for coarse in 2..=4 {
        let seed = coarse_seed(&map, coarse, fine, 1e-11)?;
        let amps = stateprep_amplitudes(&seed.coarse.u, 2, coarse, fine, SplitOrder::LeftFirst)?;
        let diff = amps
            .iter()
            .zip(&seed.interpolated)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let qpe = qpe_emulate(&h, &seed.vector, 1e-4)?;
        println!(
            "coarse {coarse}: prep diff {diff:.1e}, overlap {:.5}, k_est {:.4}, success {:.5}",
            fission_overlap(&sys.fission, &seed.interpolated, &qpe.pair.u).sqrt(),
            qpe.k_estimate,
            qpe.success_prob
        );
    }
    Ok(())
}

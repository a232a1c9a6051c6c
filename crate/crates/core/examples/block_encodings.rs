//! Interpolation oracles, their combination, and the LCU assembly of the
//! embedded BPX frame, each checked against its target matrix.

use keff_lab::blockenc::{
    combine_pq, interp_target, lcu_assemble_fhat, load_sparse_encoding, oracle_p_interp,
    oracle_q_interp,
};
use keff_lab::sparse::SparseSymMatrix;

fn main() -> keff_lab::Result<()> {
    for l in 1..=2 {
        let p = oracle_p_interp(l, l)?;
        let q = oracle_q_interp(l, l)?;
        println!(
            "P unitarity {:.1e}, Q unitarity {:.1e}",
            p.unitarity_defect(),
            q.unitarity_defect()
        );
        println!("{}", combine_pq(&p, &q, &interp_target(l, l)?)?.report());
    }
    for (d, level) in [(1, 2), (1, 3), (2, 2)] {
        println!("{}", lcu_assemble_fhat(d, level)?.report());
    }
    let lap = SparseSymMatrix::tridiagonal(7, 2.0, -1.0);
    println!("{}", load_sparse_encoding(&lap, 6.0)?.report());
    Ok(())
}

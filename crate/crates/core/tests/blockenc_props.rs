use keff_lab::assembly::assemble;
use keff_lab::blockenc::{
    combine_pq, embed_level_shift, fhat_padded, hamiltonian_chain_emulate, interp_target,
    lcu_assemble_fhat, load_sparse_encoding, one_level_encoding, oracle_p_interp, oracle_q_interp,
    pc_forward, pc_inverse, perm_embed_fixup, projector_encoding, shifted_interp_target,
    FactorShape, UNITARITY_TOL,
};
use keff_lab::bpx::bpx_build;
use keff_lab::eigensolve::build_h;
use keff_lab::geometry::{build_checkerboard, Dyadic, MaterialProps, MeshSpec, Region, RegionMap};
use keff_lab::sparse::SparseSymMatrix;
use keff_lab::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn unit(dim: usize) -> RegionMap {
    RegionMap::homogeneous(dim, MaterialProps::new(1.0, 1.0, 1.0).unwrap()).unwrap()
}

fn pad(m: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(rows, cols);
    p.view_mut((0, 0), m.shape()).copy_from(m);
    p
}

#[test]
fn combine_pq_encodes_interpolation() {
    for l in 1..=2 {
        let target = interp_target(l, l).unwrap();
        let p = oracle_p_interp(l, l).unwrap();
        let q = oracle_q_interp(l, l).unwrap();
        assert!(p.unitarity_defect() <= 1e-12 && q.unitarity_defect() <= 1e-12);
        let enc = combine_pq(&p, &q, &target).unwrap();
        assert_eq!(enc.alpha, 2f64.sqrt());
        assert!(enc.block_defect() <= 1e-10);
        assert!(enc.unitarity_defect() <= UNITARITY_TOL);

        // alpha from the target's own absolute row and column sums.
        let r_max = target.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
        let c_max = target
            .column_iter()
            .map(|c| c.abs().sum())
            .fold(0.0, f64::max);
        assert!((enc.alpha - (r_max * c_max).sqrt()).abs() < 1e-15);
    }
}

#[test]
fn combine_pq_rejects_swapped_oracles() {
    let target = interp_target(1, 1).unwrap();
    let p = oracle_p_interp(1, 1).unwrap();
    let q = oracle_q_interp(1, 1).unwrap();
    assert!(combine_pq(&q, &p, &target).is_err());
}

#[test]
fn fhat_lcu_alpha_and_block() {
    let one = lcu_assemble_fhat(1, 1).unwrap();
    assert!((one.alpha - 2f64.sqrt()).abs() < 1e-14);
    assert!((one.block()[(0, 0)] - 0.5f64.sqrt()).abs() < 1e-12);
    for level in 2..=3u32 {
        let enc = lcu_assemble_fhat(1, level).unwrap();
        let alpha = level as f64 * (0.5 * level as f64).exp2();
        assert!((enc.alpha - alpha).abs() <= 1e-12 * alpha);
        assert!((enc.block() - fhat_padded(1, level).unwrap()).amax() <= 1e-8);
        assert!(enc.unitarity_defect() <= UNITARITY_TOL);
        // Same F̂ as the BPX module, top-left.
        let fhat = bpx_build(1, level).unwrap().embedded();
        let got = enc.block().view((0, 0), fhat.shape()).clone_owned();
        assert!((got - fhat).amax() <= 1e-8);
    }
}

#[test]
fn level_shift_keeps_alpha_and_lands_in_place() {
    let enc = one_level_encoding(1, 1, 2).unwrap();
    let shifted = embed_level_shift(&enc, 1, 1, 2).unwrap();
    assert_eq!(shifted.alpha, enc.alpha);
    let want = shifted_interp_target(1, 1, 2).unwrap();
    assert!((shifted.block() - &want).amax() <= 1e-10);
    // Rows 1..=3, column 0.
    let col: Vec<f64> = want.column(0).iter().copied().collect();
    assert_eq!(&col[..5], &[0.0, 0.5, 1.0, 0.5, 0.0]);
    assert!(embed_level_shift(&enc, 2, 1, 2).is_err());
}

#[test]
fn sparse_loading() {
    let id = SparseSymMatrix::from_dense(&DMatrix::identity(4, 4)).unwrap();
    let enc = load_sparse_encoding(&id, 1.0).unwrap();
    assert!((enc.block().view((0, 0), (4, 4)) - DMatrix::<f64>::identity(4, 4)).amax() <= 1e-12);

    let spec = MeshSpec::q1(1, 2).unwrap();
    let sys = assemble(&spec, &unit(1)).unwrap();
    let a = sys.absorption.to_dense() / spec.h().powi(3);
    let m = SparseSymMatrix::from_dense(&a).unwrap();
    let natural = m.max_row_nnz() as f64 * m.max_abs();
    let enc = load_sparse_encoding(&m, natural).unwrap();
    assert!((enc.block().view((0, 0), a.shape()) - &a).amax() <= 1e-10);
    assert!(enc.unitarity_defect() <= UNITARITY_TOL);

    let looser = load_sparse_encoding(&m, 2.0 * natural).unwrap();
    assert!((looser.alpha - 2.0 * natural).abs() <= 1e-12 * natural);
    assert!((looser.block().view((0, 0), a.shape()) - &a).amax() <= 1e-10);

    assert!(matches!(
        load_sparse_encoding(&m, 0.5 * natural),
        Err(Error::NormTooSmall { .. })
    ));
}

#[test]
fn projector_matches_fission_indicator() {
    let half: Dyadic = "1/2".parse().unwrap();
    let map = RegionMap::new(
        1,
        vec![
            Region {
                lo: vec![Dyadic::ZERO],
                hi: vec![half],
                props: MaterialProps::new(1.0, 1.0, 1.0).unwrap(),
            },
            Region {
                lo: vec![half],
                hi: vec![Dyadic::ONE],
                props: MaterialProps::new(1.0, 1.0, 0.0).unwrap(),
            },
        ],
    )
    .unwrap();
    let sys = assemble(&MeshSpec::q1(1, 3).unwrap(), &map).unwrap();
    let ind: Vec<bool> = (0..sys.fission.n())
        .map(|i| sys.fission.get(i, i) != 0.0)
        .collect();
    let enc = projector_encoding(&ind, 3).unwrap();
    assert_eq!(enc.unitarity_defect(), 0.0);
    for (i, &on) in ind.iter().enumerate() {
        assert_eq!(enc.unitary[(i, i)], if on { 1.0 } else { 0.0 });
    }
}

#[test]
fn chain_matches_direct_hamiltonian() {
    let sys = assemble(&MeshSpec::q1(3, 1).unwrap(), &unit(3)).unwrap();
    let (h, _) = hamiltonian_chain_emulate(
        &sys.stiffness,
        &sys.absorption,
        &sys.fission,
        &bpx_build(3, 1).unwrap(),
    )
    .unwrap();
    assert!((h[(0, 0)] - 1.0 / 37.0).abs() <= 1e-14);

    let cases = [
        (unit(1), 1, 2, 1e-8),
        (unit(2), 2, 2, 1e-7),
        (
            build_checkerboard(2, 2, 1.0, 40.0, 1.0, 1.0).unwrap(),
            2,
            2,
            1e-7,
        ),
        (
            build_checkerboard(1, 4, 1.0, 100.0, 0.5, 2.0).unwrap(),
            1,
            3,
            1e-7,
        ),
    ];
    for (map, dim, level, tol) in cases {
        let sys = assemble(&MeshSpec::q1(dim, level).unwrap(), &map).unwrap();
        let bpx = bpx_build(dim, level).unwrap();
        let (chain, ledger) =
            hamiltonian_chain_emulate(&sys.stiffness, &sys.absorption, &sys.fission, &bpx).unwrap();
        let direct = build_h(&sys.stiffness, &sys.absorption, &sys.fission)
            .unwrap()
            .to_dense()
            .unwrap();
        assert!((chain - direct).amax() <= tol, "dim={dim} L={level}");
        assert_eq!(ledger.factors.len(), 4);
        assert!(ledger.product_defect <= tol);
    }
}

fn shape() -> impl Strategy<Value = FactorShape> {
    (1usize..=4, 0usize..=3, 1usize..=4, 0usize..=3).prop_map(|(nr, pr, nc, pc)| FactorShape {
        outer_rows: nr + pr,
        inner_rows: nr,
        outer_cols: nc + pc,
        inner_cols: nc,
    })
}

fn matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| {
        let h = (i as u64 * 31 + j as u64 * 17 + 1).wrapping_mul(seed | 1);
        (h % 97) as f64 - 48.0
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pc_round_trip(n_a in 1usize..=6, pad_a in 0usize..=4, n_b in 1usize..=6, pad_b in 0usize..=4) {
        let big_b = n_b + pad_b;
        let total = (n_a + pad_a) * big_b;
        let mut seen = vec![false; total];
        for k in 0..total {
            let p = pc_forward(k, n_a, n_b, big_b);
            prop_assert!(p < total && !seen[p]);
            seen[p] = true;
            prop_assert_eq!(pc_inverse(p, n_a, n_b, big_b), k);
        }
    }

    #[test]
    fn fixup_relates_padded_products(a in shape(), b in shape(), c in shape(), three: bool, seed in any::<u64>()) {
        let shapes = if three { vec![a, b, c] } else { vec![a, b] };
        let factors: Vec<DMatrix<f64>> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| matrix(s.inner_rows, s.inner_cols, seed.wrapping_add(i as u64)))
            .collect();
        let kron = factors[1..].iter().fold(factors[0].clone(), |acc, f| acc.kronecker(f));
        let padded_kron = shapes
            .iter()
            .zip(&factors)
            .map(|(s, f)| pad(f, s.outer_rows, s.outer_cols))
            .reduce(|acc, f| acc.kronecker(&f))
            .unwrap();
        let (pr, pc) = perm_embed_fixup(&shapes).unwrap();
        let lhs = pad(&kron, padded_kron.nrows(), padded_kron.ncols());
        prop_assert_eq!(lhs, &pr * padded_kron * &pc);
        // Exact permutations.
        prop_assert_eq!(pr.transpose() * &pr, DMatrix::identity(pr.nrows(), pr.nrows()));
        prop_assert_eq!(&pc * pc.transpose(), DMatrix::identity(pc.nrows(), pc.nrows()));
    }
}

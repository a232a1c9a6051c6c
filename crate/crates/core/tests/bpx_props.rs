use keff_lab::assembly::{assemble, stiffness_1d, tensor_stiffness};
use keff_lab::bpx::{
    bpx_build, bpx_pcg_solve, direct_solve, interp_1d_one_level, interp_multi, precond_operator,
    prolongate, restrict, verify_flft, BpxPreconditioner,
};
use keff_lab::dense::{dot, kron_all, spectral_norm};
use keff_lab::geometry::{Dyadic, MaterialProps, MeshSpec, Region, RegionMap};
use keff_lab::sparse::SparseSymMatrix;
use keff_lab::Error;
use proptest::prelude::*;

/// The level-`l` hat function centred on node `k` (1-based), sampled at the
/// nodes of level `fine`.
fn hat_samples(l: u32, k: usize, fine: u32) -> Vec<f64> {
    let n = (1usize << fine) - 1;
    let centre = k as f64 / (1u64 << l) as f64;
    let width = 1.0 / (1u64 << l) as f64;
    (1..=n)
        .map(|j| {
            let x = j as f64 / (1u64 << fine) as f64;
            (1.0 - (x - centre).abs() / width).max(0.0)
        })
        .collect()
}

#[test]
fn hat_function_reproduced() {
    let i = interp_multi(1, 1, 3).unwrap().matrix;
    let col: Vec<f64> = i.column(0).iter().copied().collect();
    assert_eq!(col, vec![0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25]);
    for l in 1..=3 {
        for fine in l + 1..=6 {
            let i = interp_multi(1, l, fine).unwrap().matrix;
            for k in 1..(1usize << l) {
                let col: Vec<f64> = i.column(k - 1).iter().copied().collect();
                assert_eq!(col, hat_samples(l, k, fine), "l={l} k={k} fine={fine}");
            }
        }
    }
}

#[test]
fn tensor_and_telescoping_identities() {
    for dim in 1..=3 {
        for l in 1..=2u32 {
            for to in l + 1..=if dim == 3 { 3 } else { 4 } {
                let multi = interp_multi(dim, l, to).unwrap().matrix;
                let one = interp_multi(1, l, to).unwrap().matrix;
                let kron = kron_all(std::iter::repeat_n(&one, dim));
                assert!((&multi - kron).amax() <= 1e-12);
                if to > l + 1 {
                    let a = interp_multi(dim, l, l + 1).unwrap().matrix;
                    let b = interp_multi(dim, l + 1, to).unwrap().matrix;
                    // Entries are dyadic, so the product is exact.
                    assert_eq!(b * a, multi);
                }
            }
        }
    }
}

#[test]
fn interpolation_norm_bounds() {
    for l in 1..=6 {
        let i = interp_1d_one_level(l);
        assert!(spectral_norm(&i) <= 2f64.sqrt() + 1e-12);
        for c in 0..i.ncols() {
            assert!(i.column(c).sum() <= 2.0);
        }
    }
    for (d, l, to) in [(1, 1, 5), (2, 1, 3), (2, 2, 4), (3, 1, 3)] {
        let m = interp_multi(d, l, to).unwrap().matrix;
        let bound = (0.5 * (d as f64) * (to - l) as f64).exp2();
        assert!(spectral_norm(&m) <= bound + 1e-12, "d={d} {l}->{to}");
    }
}

#[test]
fn frame_shapes_and_norm() {
    assert!((bpx_build(1, 1).unwrap().frame[(0, 0)] - 0.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(bpx_build(2, 1).unwrap().frame[(0, 0)], 1.0);
    let f = bpx_build(2, 4).unwrap();
    assert!(spectral_norm(&f.frame) <= 2.0 * 16.0);
    let fhat = f.embedded();
    let pad = fhat.nrows() - f.frame.nrows();
    assert_eq!(fhat.rows(0, pad).amax(), 0.0);
    assert!(matches!(bpx_build(3, 6), Err(Error::ResourceLimit(_))));
}

#[test]
fn scalar_preconditioned_operator() {
    let f = bpx_build(1, 1).unwrap();
    let l = SparseSymMatrix::from_triplets(1, vec![(0, 0, 4.0)]).unwrap();
    assert!((precond_operator(&f, &l).unwrap().get(0, 0) - 2.0).abs() < 1e-14);
    let x = bpx_pcg_solve(&l, &BpxPreconditioner::new(1, 1).unwrap(), &[1.0], 1e-12).unwrap();
    assert!((x.solution[0] - 0.25).abs() < 1e-14);
}

#[test]
fn preconditioned_operator_symmetric() {
    let f = bpx_build(1, 3).unwrap();
    let x = precond_operator(&f, &stiffness_1d(3)).unwrap();
    assert!(x.symmetry_defect() <= 1e-12);
}

fn effective_condition(dim: usize, level: u32) -> f64 {
    let f = bpx_build(dim, level).unwrap();
    let eig = precond_operator(&f, &tensor_stiffness(dim, level))
        .unwrap()
        .to_dense()
        .symmetric_eigenvalues();
    let top = eig.amax();
    let low = eig
        .iter()
        .filter(|x| x.abs() > 1e-10 * top)
        .fold(f64::INFINITY, |m, x| m.min(x.abs()));
    top / low
}

#[test]
fn effective_condition_does_not_explode() {
    let c: Vec<f64> = (2..=4).map(|l| effective_condition(1, l)).collect();
    assert!(c[2] <= 3.0 * c[0], "{c:?}");
}

fn halves(d_left: f64, d_right: f64) -> RegionMap {
    let half: Dyadic = "1/2".parse().unwrap();
    RegionMap::new(
        1,
        vec![
            Region {
                lo: vec![Dyadic::ZERO],
                hi: vec![half],
                props: MaterialProps::new(d_left, 0.0, 1.0).unwrap(),
            },
            Region {
                lo: vec![half],
                hi: vec![Dyadic::ONE],
                props: MaterialProps::new(d_right, 0.0, 1.0).unwrap(),
            },
        ],
    )
    .unwrap()
}

#[test]
fn flft_identity() {
    let f = bpx_build(1, 2).unwrap();
    assert!(verify_flft(&f, &stiffness_1d(2)).unwrap() <= 1e-10);
    let f2 = bpx_build(2, 2).unwrap();
    assert!(verify_flft(&f2, &tensor_stiffness(2, 2)).unwrap() <= 1e-10);
    let sys = assemble(&MeshSpec::q1(1, 2).unwrap(), &halves(1.0, 100.0)).unwrap();
    assert!(verify_flft(&f, &sys.stiffness).unwrap() <= 1e-9);
    let singular = SparseSymMatrix::zeros(3);
    assert!(verify_flft(&f, &singular).is_err());
}

#[test]
fn pcg_mesh_independence_and_accuracy() {
    let iters = |level| {
        let l = tensor_stiffness(2, level);
        let rhs = vec![1.0; l.n()];
        bpx_pcg_solve(&l, &BpxPreconditioner::new(2, level).unwrap(), &rhs, 1e-8)
            .unwrap()
            .iterations
    };
    let (i4, i5) = (iters(4), iters(5));
    assert!((i5 as f64) < 1.5 * i4 as f64, "{i4} -> {i5}");

    let l = tensor_stiffness(2, 3);
    let rhs: Vec<f64> = (0..l.n()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let tol = 1e-9;
    let x = bpx_pcg_solve(&l, &BpxPreconditioner::new(2, 3).unwrap(), &rhs, tol).unwrap();
    let exact = direct_solve(&l, &rhs).unwrap();
    let err = x
        .solution
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err <= 10.0 * tol * scale, "err {err} scale {scale}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn restrict_is_adjoint_of_prolongate(
        dim in 1usize..=3,
        from in 1u32..=2,
        extra in 1u32..=2,
        seed in any::<u64>(),
    ) {
        let to = from + extra;
        let nc = ((1usize << from) - 1).pow(dim as u32);
        let nf = ((1usize << to) - 1).pow(dim as u32);
        let val = |i: usize, salt: u64| (((i as u64).wrapping_mul(2654435761) ^ seed ^ salt) % 1000) as f64 / 500.0 - 1.0;
        let x: Vec<f64> = (0..nc).map(|i| val(i, 1)).collect();
        let y: Vec<f64> = (0..nf).map(|i| val(i, 2)).collect();
        let lhs = dot(&prolongate(dim, from, to, &x), &y);
        let rhs = dot(&x, &restrict(dim, from, to, &y));
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn flft_holds_for_random_piecewise_diffusion(a in 0.1f64..100.0, b in 0.1f64..100.0, level in 2u32..=4) {
        let sys = assemble(&MeshSpec::q1(1, level).unwrap(), &halves(a, b)).unwrap();
        let f = bpx_build(1, level).unwrap();
        prop_assert!(verify_flft(&f, &sys.stiffness).unwrap() <= 1e-9);
    }
}

use keff_lab::geometry::{build_checkerboard, Dyadic, ElementKind, MeshSpec, RegionMap};
use proptest::prelude::*;

fn dyadic() -> impl Strategy<Value = Dyadic> {
    (0u32..=20)
        .prop_flat_map(|e| (0u64..=(1u64 << e)).prop_map(move |n| Dyadic::new(n, e).unwrap()))
}

proptest! {
    #[test]
    fn dyadic_order_matches_reals(a in dyadic(), b in dyadic()) {
        prop_assert_eq!(a.cmp(&b), a.to_f64().partial_cmp(&b.to_f64()).unwrap());
    }

    #[test]
    fn dyadic_text_round_trip(a in dyadic()) {
        let back: Dyadic = a.to_string().parse().unwrap();
        prop_assert_eq!(back, a);
        let pow = format!("{}/2^{}", a.numerator(), a.log2_denominator());
        prop_assert_eq!(pow.parse::<Dyadic>().unwrap(), a);
    }

    #[test]
    fn node_index_round_trip(dim in 1usize..=3, level in 1u32..=6, seed in any::<u64>()) {
        let spec = MeshSpec::q1(dim, level).unwrap();
        let k = (seed % spec.num_nodes() as u64) as usize;
        let multi = spec.node_multi_index(k).unwrap();
        prop_assert_eq!(spec.node_linear_index(&multi).unwrap(), k);
    }

    #[test]
    fn checkerboard_toml_round_trip(dim in 1usize..=3, exp in 0u32..=2, hi in 1.0f64..100.0) {
        let map = build_checkerboard(dim, 1 << exp, 1.0, hi, 0.5, 1.5).unwrap();
        prop_assert_eq!(RegionMap::from_toml(&map.to_toml()).unwrap(), map);
    }
}

#[test]
fn dyadic_rejects_outside_unit_interval() {
    assert!("3/2".parse::<Dyadic>().is_err());
    assert!("1/3".parse::<Dyadic>().is_err());
    assert_eq!("2/4".parse::<Dyadic>().unwrap(), "1/2".parse().unwrap());
}

#[test]
fn element_counts() {
    assert_eq!(MeshSpec::q1(2, 3).unwrap().num_elements(), 64);
    assert_eq!(
        MeshSpec::new(2, 3, ElementKind::P1).unwrap().num_elements(),
        128
    );
    assert_eq!(MeshSpec::q1(3, 2).unwrap().num_elements(), 64);
    assert!(MeshSpec::new(3, 2, ElementKind::P1).is_err());
}

#[test]
fn gaps_and_overlaps_rejected() {
    let gap = r#"
dim = 1
[[region]]
lo = ["0"]
hi = ["1/2"]
diffusion = 1.0
absorption = 0.0
nu_fission = 1.0
"#;
    assert!(RegionMap::from_toml(gap).is_err());
    let overlap = format!("{gap}\n[[region]]\nlo = [\"1/4\"]\nhi = [\"1\"]\ndiffusion = 1.0\nabsorption = 0.0\nnu_fission = 1.0\n");
    assert!(RegionMap::from_toml(&overlap).is_err());
    let tiled = overlap.replace("\"1/4\"", "\"1/2\"");
    assert!(RegionMap::from_toml(&tiled).is_ok());
}

#[test]
fn material_lookup_on_checkerboard() {
    let map = build_checkerboard(2, 4, 1.0, 40.0, 1.0, 1.0).unwrap();
    let spec = MeshSpec::q1(2, 3).unwrap();
    assert_eq!(map.cell_material(&spec, &[0, 0]).unwrap().diffusion, 40.0);
    assert_eq!(map.cell_material(&spec, &[2, 0]).unwrap().diffusion, 1.0);
    assert_eq!(map.material_at(&[0.3, 0.3]).unwrap().diffusion, 40.0);
}

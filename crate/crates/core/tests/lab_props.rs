use std::process::Command;

use keff_lab::eigensolve::coarse_seed;
use keff_lab::geometry::{ElementKind, MaterialProps, RegionMap};
use keff_lab::lab::report::{export_estimates_csv, export_ladder_csv, import_ladder_csv};
use keff_lab::lab::{
    gram_prefix_sum, observed_order, run_ladder, stateprep_amplitudes, theoretical_order,
    AxisRange, ConvergenceLadder, LabConfig, LadderPlan, Rung, SplitOrder,
};
use keff_lab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn power_ladder(lambda_star: f64, chi: f64, r: usize) -> ConvergenceLadder {
    let rungs = (1..=3u32)
        .map(|i| {
            let n = r.pow(i);
            Rung {
                level: i,
                elements: n,
                lambda: lambda_star + (n as f64).powf(-chi),
            }
        })
        .collect();
    ConvergenceLadder::from_rungs(rungs, 1e-12).unwrap()
}

#[test]
fn observed_order_recovers_power_law() {
    for chi in [0.5, 1.0, 2.0, 3.0] {
        for r in [2, 4] {
            let est = observed_order(&power_ladder(0.5, chi, r), 0).unwrap();
            assert!(
                (est.chi_prime - chi).abs() <= 1e-10,
                "chi={chi} r={r}: {}",
                est.chi_prime
            );
            assert!((est.p_prime - 1.0 / chi).abs() <= 1e-10);
        }
    }
    let flat = ConvergenceLadder::from_rungs(
        (1..=3)
            .map(|i| Rung {
                level: i,
                elements: 4usize.pow(i),
                lambda: 2.0,
            })
            .collect(),
        1e-12,
    )
    .unwrap();
    assert!(matches!(
        observed_order(&flat, 0),
        Err(Error::UndefinedEstimate(_))
    ));
}

#[test]
fn theoretical_order_anchors_and_monotone() {
    let one = theoretical_order(1.0).unwrap();
    assert_eq!(one.chi_star, 1.0);
    assert_eq!(one.p_star, 1.0);
    assert!((theoretical_order(40.0).unwrap().p_star - 5.008).abs() <= 1e-3);
    assert!((theoretical_order(100.0).unwrap().p_star - 7.9).abs() <= 0.05);
    let ps: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 40.0, 100.0, 1000.0]
        .iter()
        .map(|&d| theoretical_order(d).unwrap().p_star)
        .collect();
    assert!(ps.windows(2).all(|w| w[1] > w[0]));
    assert!(theoretical_order(0.5).is_err());
    assert!(theoretical_order(f64::NAN).is_err());
}

fn brute_gram(values: &[f64], ranges: &[AxisRange]) -> f64 {
    let d = ranges.len();
    let mut total = 0.0;
    let mut idx: Vec<u64> = ranges.iter().map(|r| r.first).collect();
    loop {
        let t: Vec<f64> = idx
            .iter()
            .zip(ranges)
            .map(|(&j, r)| j as f64 / r.subdivisions as f64)
            .collect();
        let v: f64 = (0..1usize << d)
            .map(|c| {
                let w: f64 = (0..d)
                    .map(|a| {
                        if (c >> (d - 1 - a)) & 1 == 1 {
                            t[a]
                        } else {
                            1.0 - t[a]
                        }
                    })
                    .product();
                w * values[c]
            })
            .sum();
        total += v * v;
        let mut a = d;
        loop {
            if a == 0 {
                return total;
            }
            a -= 1;
            if idx[a] < ranges[a].last {
                idx[a] += 1;
                break;
            }
            idx[a] = ranges[a].first;
        }
    }
}

#[test]
fn gram_sums_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for dim in 1..=3 {
        for _ in 0..200 {
            let ranges: Vec<AxisRange> = (0..dim)
                .map(|_| {
                    let q = rng.gen_range(1..=16u64);
                    let a = rng.gen_range(0..=q);
                    AxisRange::new(q, a, rng.gen_range(a..=q)).unwrap()
                })
                .collect();
            let values: Vec<f64> = (0..1 << dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = brute_gram(&values, &ranges);
            let got = gram_prefix_sum(&values, &ranges).unwrap();
            assert!(
                (got - want).abs() <= 1e-12 * want.max(1.0),
                "{got} vs {want}"
            );
        }
    }
    let r = AxisRange::new(4, 1, 3).unwrap();
    assert_eq!(gram_prefix_sum(&[0.0; 8], &[r, r, r]).unwrap(), 0.0);
}

#[test]
fn stateprep_agrees_with_interpolated_seed() {
    let map = RegionMap::homogeneous(2, MaterialProps::new(1.0, 1.0, 1.0).unwrap()).unwrap();
    for (coarse, fine) in [(1, 3), (2, 4), (2, 5)] {
        let seed = coarse_seed(&map, coarse, fine, 1e-12).unwrap();
        let left =
            stateprep_amplitudes(&seed.coarse.u, 2, coarse, fine, SplitOrder::LeftFirst).unwrap();
        let right =
            stateprep_amplitudes(&seed.coarse.u, 2, coarse, fine, SplitOrder::RightFirst).unwrap();
        let norm = seed.interpolated.iter().map(|x| x * x).sum::<f64>().sqrt();
        for ((a, b), c) in left.iter().zip(&right).zip(&seed.interpolated) {
            assert!((a - c / norm).abs() <= 1e-12);
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stateprep_is_unit_norm(dim in 1usize..=3, coarse in 1u32..=2, extra in 0u32..=2, seed in any::<u64>()) {
        let fine = coarse + extra;
        let n = ((1usize << coarse) - 1).pow(dim as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let amps = stateprep_amplitudes(&v, dim, coarse, fine, SplitOrder::LeftFirst).unwrap();
        let norm: f64 = amps.iter().map(|x| x * x).sum();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn ladder_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ladder.csv");
    export_ladder_csv(&ConvergenceLadder::default(), &path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap().trim(),
        "level,N,lambda"
    );

    let ladder = run_ladder(&LadderPlan {
        map: RegionMap::homogeneous(2, MaterialProps::new(1.0, 1.0, 1.0).unwrap()).unwrap(),
        element: ElementKind::Q1,
        levels: 1..=4,
        tolerance: 1e-10,
        workers: 2,
    })
    .unwrap();
    assert!(ladder.rungs.windows(2).all(|w| w[1].lambda < w[0].lambda));
    export_ladder_csv(&ladder, &path).unwrap();
    assert_eq!(import_ladder_csv(&path).unwrap().rungs, ladder.rungs);

    let est = ladder.estimates(Some(1.0)).unwrap();
    let est_path = dir.path().join("estimates.csv");
    export_estimates_csv(&est, &est_path).unwrap();
    let text = std::fs::read_to_string(&est_path).unwrap();
    assert!(text.starts_with("level,chi_prime,p_prime,p_star"));
    assert_eq!(text.lines().count(), 1 + est.len());

    #[allow(clippy::reversed_empty_ranges)]
    let empty = run_ladder(&LadderPlan {
        map: RegionMap::homogeneous(1, MaterialProps::new(1.0, 1.0, 1.0).unwrap()).unwrap(),
        element: ElementKind::Q1,
        levels: 3..=2,
        tolerance: 1e-10,
        workers: 1,
    })
    .unwrap();
    assert!(empty.rungs.is_empty());
}

#[test]
fn config_rejections() {
    let good = r#"
schema_version = 1
dim = 2
levels = [2, 4]

[material]
kind = "checkerboard"
blocks = 4
d_low = 1.0
d_high = 40.0
absorption = 1.0
nu_fission = 1.0
"#;
    let cfg = LabConfig::from_toml(good).unwrap();
    assert_eq!(LabConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert_eq!(cfg.material.contrast(), 40.0);
    for bad in [
        good.replace("schema_version = 1", "schema_version = 2"),
        good.replace("dim = 2", "dim = 2\nfoo = 1"),
        good.replace("[2, 4]", "[4, 2]"),
        good.replace("d_low = 1.0", "d_low = -1.0"),
        good.replace("blocks = 4", "blocks = 3"),
    ] {
        assert!(
            matches!(LabConfig::from_toml(&bad), Err(Error::Config(_))),
            "{bad}"
        );
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_keff-lab"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, text) = cli(&["eig", "--levels", "3", "--out", out]);
    assert_eq!(code, 0);
    assert!(text.contains("lambda"));
    assert!(dir.path().join("eigenvector.txt").exists());

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\ndim = 2\nbogus = true\n").unwrap();
    assert_eq!(cli(&["eig", "--config", bad.to_str().unwrap()]).0, 2);
    assert_eq!(cli(&["ladder", "--levels", "0..3"]).0, 2);
    assert_eq!(cli(&["eig", "--element", "q9"]).0, 2);
    assert_eq!(cli(&["eig", "--levels", "3", "--tol", "1e-30"]).0, 3);

    let (code, text) = cli(&["ladder", "--levels", "1..4", "--out", out]);
    assert_eq!(code, 0, "{text}");
    let (code, text) = cli(&["order", dir.path().join("ladder.csv").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.contains("p_prime"), "{text}");

    assert_eq!(
        Error::EncodingDefect {
            name: "x".into(),
            defect: 1.0,
            tolerance: 0.0
        }
        .exit_code(),
        4
    );
}

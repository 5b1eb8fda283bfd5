use epl_core::chaining::{build_partition, psi_difference_l1, smoothed_process};
use epl_core::distmodel::DistributionModel;
use epl_core::empproc::{sup_distance, EmpiricalProcess};
use epl_core::procgen::{generate, reference_cdf, CoefficientRule, ProcessSpec};
use epl_core::reduction::{build_reduction, find_bad_intervals, modulus_transfer, reduce_path, verify_transport, DEFAULT_GRID_SIZE, DEFAULT_TOL};
use epl_core::verify::{ks_statistic, KsReference};

#[test]
fn cantor_marginal_matches_cantor_function() {
    // restarted draws: first value of independent replicates
    let n = 20_000;
    let xs: Vec<f64> = (0..n as u64)
        .map(|r| generate(&ProcessSpec::cantor(), 1, 77, r).unwrap().values[0])
        .collect();
    let ks = ks_statistic(&xs, &KsReference::Model(DistributionModel::CantorCdf)).unwrap();
    assert!(ks < 2.0 * 1.36 / (n as f64).sqrt(), "{ks}");
}

#[test]
fn gouezel_orbit_is_uniform() {
    let spec = ProcessSpec::gouezel(4, CoefficientRule::default());
    assert_eq!(reference_cdf(&spec).unwrap(), DistributionModel::Uniform01);
    let path = generate(&spec, 100_000, 2024, 0).unwrap();
    assert!(path.values.iter().all(|x| (0.0..1.0).contains(x)));
    let ks = ks_statistic(&path.values, &KsReference::Model(DistributionModel::Uniform01)).unwrap();
    assert!(ks < 0.02, "{ks}");
}

#[test]
fn psi_difference_within_three_h_over_two_to_k() {
    for model in [DistributionModel::Uniform01, DistributionModel::CantorCdf] {
        let p = build_partition(&model, 8).unwrap();
        for j in 1..=8 {
            for k in 1..=6u32 {
                for l in 0..=(1i64 << k) {
                    if j == 1 && l == 0 {
                        continue;
                    }
                    let v = psi_difference_l1(&p, j, k, l).unwrap();
                    assert!(v <= 3.0 * p.h / (k as f64).exp2() + 1e-9, "j={j} k={k} l={l}: {v}");
                }
            }
        }
    }
}

#[test]
fn smoothing_error_shrinks_with_m() {
    let path = generate(&ProcessSpec::iid_uniform(), 4096, 5, 0).unwrap();
    let process = EmpiricalProcess::new(&path, DistributionModel::Uniform01).unwrap();
    let errs: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&m| {
            let p = build_partition(&DistributionModel::Uniform01, m).unwrap();
            sup_distance(&process, &smoothed_process(&path.values, &p).unwrap().unm_step())
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn exponential_transport_and_modulus() {
    let model = DistributionModel::exponential(2.0).unwrap();
    let bad = find_bad_intervals(&model, None, DEFAULT_GRID_SIZE, DEFAULT_TOL).unwrap();
    let g = build_reduction(&model, &bad).unwrap();
    let path = generate(&ProcessSpec::iid_uniform(), 100, 3, 0).unwrap();
    let xs: Vec<f64> = path.values.iter().map(|&u| model.quantile(u).unwrap()).collect();
    let ys = reduce_path(&g, &xs);
    assert!(ys.iter().all(|y| (0.0..=1.0).contains(y)));
    let grid: Vec<f64> = (0..1000).map(|i| -0.5 + 4.0 * i as f64 / 999.0).collect();
    assert!(verify_transport(&xs, &g, &grid).unwrap() < 1e-10);
    for row in modulus_transfer(&g, &[0.01, 0.05, 0.1, 0.3], 20_000).unwrap() {
        assert!(row.omega_g <= row.bound + 1e-9, "{row:?}");
    }
    // G is the identity off the bad interval's image
    let y = bad.intervals[0].y;
    for i in 1..100 {
        let u = y + (1.0 - y) * i as f64 / 100.0;
        assert!((g.reduced_cdf(u).unwrap() - u).abs() < 1e-9);
    }
}

use epl_core::chaining::{self, build_partition, choose_chain_depth, phi};
use epl_core::distmodel::{log_modulus_report, DistributionModel};
use epl_core::empproc::{ecdf_from_values, sup_distance, EmpiricalProcess, StepFunction};
use epl_core::procgen::{generate, Link, ProcessSpec};
use epl_core::reduction::{build_reduction, find_bad_intervals, DEFAULT_GRID_SIZE, DEFAULT_TOL};
use epl_core::verify::{ks_statistic, long_run_variance_of, sup_increment, KsReference, LipschitzFn};
use proptest::prelude::*;

fn closed_models() -> impl Strategy<Value = DistributionModel> {
    prop_oneof![
        Just(DistributionModel::Uniform01),
        Just(DistributionModel::CantorCdf),
        Just(DistributionModel::StdNormal),
        (0.2f64..5.0).prop_map(|r| DistributionModel::exponential(r).unwrap()),
    ]
}

fn bounded_models() -> impl Strategy<Value = DistributionModel> {
    prop_oneof![Just(DistributionModel::Uniform01), Just(DistributionModel::CantorCdf)]
}

fn samples(model: DistributionModel, us: Vec<f64>) -> Vec<f64> {
    us.into_iter().map(|u| model.quantile(u).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_nondecreasing_within_unit_range(model in closed_models(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (fa, fb) = (model.cdf(lo), model.cdf(hi));
        prop_assert!(fa <= fb);
        prop_assert!((0.0..=1.0).contains(&fa) && (0.0..=1.0).contains(&fb));
    }

    #[test]
    fn quantile_nondecreasing(model in closed_models(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(model.quantile(lo).unwrap() <= model.quantile(hi).unwrap());
    }

    #[test]
    fn galois_round_trip(model in closed_models(), u in 1e-6f64..(1.0 - 1e-6)) {
        let x = model.quantile(u).unwrap();
        prop_assert!((model.cdf(x) - u).abs() < 1e-9, "F(Q({})) = {}", u, model.cdf(x));
    }

    #[test]
    fn cantor_symmetries(x in 0.0f64..=1.0) {
        let c = |t| DistributionModel::CantorCdf.cdf(t);
        prop_assert!((c(x / 3.0) - c(x) / 2.0).abs() < 1e-12);
        prop_assert!((c(1.0 - x) - (1.0 - c(x))).abs() < 1e-12);
    }

    #[test]
    fn modulus_monotone(model in closed_models(), a in 1e-6f64..0.5, b in 1e-6f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(model.modulus(lo) <= model.modulus(hi) + 1e-15);
    }

    #[test]
    fn ecdf_runs_from_zero_to_one(us in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let f = ecdf_from_values(&us).unwrap();
        let vals = f.values();
        prop_assert_eq!(vals[0], 0.0);
        prop_assert!((vals[vals.len() - 1] - 1.0).abs() < 1e-15);
        prop_assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn iid_sup_equals_ks(us in prop::collection::vec(0.0f64..1.0, 1..80)) {
        let process = EmpiricalProcess::from_values(&us, DistributionModel::Uniform01).unwrap();
        let ks = ks_statistic(&us, &KsReference::Model(DistributionModel::Uniform01)).unwrap();
        prop_assert!((process.sup_abs() / process.root_n() - ks).abs() < 1e-12);
    }

    #[test]
    fn sup_distance_shift_is_bounded(us in prop::collection::vec(0.0f64..1.0, 1..40), c in -1.0f64..1.0) {
        let process = EmpiricalProcess::from_values(&us, DistributionModel::Uniform01).unwrap();
        let base = sup_distance(&process, &StepFunction::constant(0.0));
        let shifted = sup_distance(&process, &StepFunction::constant(c));
        prop_assert!((base - shifted).abs() <= c.abs() + 1e-12);
    }

    #[test]
    fn phi_is_monotone_lipschitz(a in -3.0f64..2.0, b in -3.0f64..2.0) {
        prop_assert!((0.0..=1.0).contains(&phi(a)));
        prop_assert!((phi(a) - phi(b)).abs() <= (a - b).abs() + 1e-15);
        if a <= b {
            prop_assert!(phi(a) >= phi(b));
        }
    }

    #[test]
    fn chain_index_halves(model in bounded_models(), m in prop::sample::select(vec![2usize, 4, 10]), u in 0.0f64..1.0) {
        let p = build_partition(&model, m).unwrap();
        let t = model.quantile(u).unwrap().clamp(p.points[0], p.points[m]);
        let j = p.cell_of(t).unwrap();
        let mut prev = p.chain_index(j, 0, t).unwrap();
        for k in 1..=12 {
            let l = p.chain_index(j, k, t).unwrap();
            prop_assert_eq!(prev, l / 2);
            prev = l;
        }
    }

    #[test]
    fn depth_rule_bracket(n in 1usize..1_000_000, h in 1e-4f64..1.0, eps in 1e-3f64..1.0) {
        let ratio = (n as f64).sqrt() * h / eps;
        prop_assume!(ratio >= 1.0);
        let k = choose_chain_depth(n, h, eps).unwrap();
        let scaled = (n as f64).sqrt() * h / (k as f64).exp2();
        prop_assert!(eps / 16.0 <= scaled && scaled <= eps / 8.0);
    }

    #[test]
    fn telescoping_is_exact(model in bounded_models(), m in prop::sample::select(vec![4usize, 10]),
                            us in prop::collection::vec(0.0f64..1.0, 1..100), ut in 0.0f64..1.0) {
        let p = build_partition(&model, m).unwrap();
        let xs = samples(model.clone(), us);
        let t = model.quantile(ut).unwrap().clamp(p.points[0], p.points[m]);
        let k = choose_chain_depth(xs.len().max(16), p.h, 0.1).unwrap_or(4);
        let terms = chaining::chain_decomposition(&xs, &p, t, k).unwrap();
        prop_assert!(terms.residual.abs() < 1e-12, "residual {}", terms.residual);
        prop_assert_eq!(terms.monotone_violations, 0);
        let smoothed = chaining::smoothed_process(&xs, &p).unwrap();
        prop_assert_eq!(smoothed.sandwich_violations(&xs).unwrap(), 0);
    }

    #[test]
    fn psi_ramps_respect_lipschitz_norm_bound(k in 1u32..8, frac in 0.0f64..1.0) {
        let model = DistributionModel::CantorCdf;
        let grid: Vec<f64> = (1..=400).map(|i| 0.5 * (i as f64 / 400.0).powi(8)).collect();
        let gamma = 2.0;
        let d = log_modulus_report(&model, gamma, &grid).unwrap().minimal_d;
        let p = build_partition(&model, 4).unwrap();
        let l = 1 + (frac * ((1i64 << k) - 1) as f64) as i64;
        let kernel = p.chain_kernel(2, k, l).unwrap();
        let bound = 1.0 + ((d * (k as f64).exp2() / p.h).powf(1.0 / gamma)).exp();
        prop_assert!(1.0 + kernel.slope() <= bound, "slope {} bound {}", kernel.slope(), bound);
    }

    #[test]
    fn reduction_is_one_lipschitz(s in -1.0f64..4.0, t in -1.0f64..4.0) {
        let model = DistributionModel::exponential(2.0).unwrap();
        let bad = find_bad_intervals(&model, None, 20_000, DEFAULT_TOL).unwrap();
        let g = build_reduction(&model, &bad).unwrap();
        prop_assert!((g.eval(s) - g.eval(t)).abs() <= (s - t).abs() + 1e-12);
        if s <= t {
            prop_assert!(g.eval(s) <= g.eval(t));
        }
    }

    #[test]
    fn paths_are_reproducible(seed in any::<u64>(), rep in 0u64..1000) {
        for spec in [ProcessSpec::cantor(), ProcessSpec::nar(0.5, 0.25, Link::Linear), ProcessSpec::iid_uniform()] {
            let a = generate(&spec, 64, seed, rep).unwrap();
            let b = generate(&spec, 64, seed, rep).unwrap();
            prop_assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn process_ranges(seed in any::<u64>()) {
        let cantor = generate(&ProcessSpec::cantor(), 200, seed, 0).unwrap();
        prop_assert!(cantor.values.iter().all(|x| (0.0..=1.0).contains(x)));
        let nar = generate(&ProcessSpec::nar(0.5, 0.25, Link::Linear), 200, seed, 0).unwrap();
        prop_assert!(nar.values.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn lrv_nonnegative(xs in prop::collection::vec(-10.0f64..10.0, 20..200)) {
        let v = long_run_variance_of(&xs, Some(1)).unwrap();
        prop_assert!(v.value >= 0.0);
    }

    #[test]
    fn sup_increment_nondecreasing_in_delta(us in prop::collection::vec(0.0f64..1.0, 1..50), d in 0.01f64..0.5) {
        let m = DistributionModel::Uniform01;
        let small = sup_increment(&us, &m, d / 2.0).unwrap();
        let large = sup_increment(&us, &m, d).unwrap();
        prop_assert!(small <= large + 1e-12);
        let process = EmpiricalProcess::from_values(&us, m.clone()).unwrap();
        prop_assert!(large <= 2.0 * process.sup_abs() + 1e-12);
    }

    #[test]
    fn lipschitz_slope_and_sup(a in 0.0f64..0.5, w in 0.01f64..0.5, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let f = LipschitzFn::parse(&format!("ramp:{a},{}", a + w), &DistributionModel::Uniform01).unwrap();
        prop_assert!((f.eval(x) - f.eval(y)).abs() <= f.lip() * (x - y).abs() + 1e-12);
        prop_assert!(f.eval(x).abs() <= f.sup_bound() + 1e-15);
    }
}

#[test]
fn bad_intervals_stay_consistent_under_grid_size() {
    let model = DistributionModel::exponential(2.0).unwrap();
    let coarse = find_bad_intervals(&model, None, 10_000, DEFAULT_TOL).unwrap();
    let fine = find_bad_intervals(&model, None, DEFAULT_GRID_SIZE, DEFAULT_TOL).unwrap();
    assert_eq!(coarse.intervals.len(), 1);
    assert!((coarse.intervals[0].y - fine.intervals[0].y).abs() < 1e-9);
    assert!(fine.total_length <= 1.0);
}

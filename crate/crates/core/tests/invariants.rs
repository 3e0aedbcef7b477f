use nuh_core::cones::{
    check_cone_invariance, cocycle_log_norms, curvature_iterates, domination_gap, estimate_direction, straight_segment,
    ConeParams,
};
use nuh_core::fixtures::{IdentityMap, TwoAttractor};
use nuh_core::measures::{
    cluster_basins, ensemble_histogram, l1_distance, stationarity_residual, stationary_density, ulam_operator,
    GridHistogram,
};
use nuh_core::noise::{check_nondegeneracy, ensemble_member};
use nuh_core::torus::{linear_map, make_da_map, verify_conditions, DAParams};
use nuh_core::{par, NoiseModel, RngStream};

fn default_da() -> nuh_core::TorusMap {
    make_da_map(&DAParams::default()).unwrap()
}

#[test]
fn certificate_is_stable_under_refinement() {
    let map = default_da();
    for n in [64, 128, 256] {
        let rep = verify_conditions(&map, 0.2, n, 0.5).unwrap();
        assert!(rep.certified(), "grid {n}: {:?}", &rep.violations[..rep.violations.len().min(3)]);
        assert!(rep.sigma1 >= 2.0);
    }
}

#[test]
fn cone_invariance_under_noise() {
    let map = default_da();
    let cone = ConeParams::for_map(&map, 0.2, 0.5).unwrap();
    let mut rng = RngStream::new(11, 0);
    let bad = check_cone_invariance(&map, &cone, 0.05, 100_000, &mut rng).unwrap();
    assert!(bad.is_empty(), "{} violations", bad.len());
}

#[test]
fn domination_gap_below_lambda() {
    let map = default_da();
    let model = NoiseModel::new(0.01).unwrap();
    let orbit = ensemble_member(&map, &model, 5, 0, 10_100).unwrap();
    let mut worst: f64 = 0.0;
    for index in (50..10_050).step_by(5) {
        let dir = estimate_direction(&map, &orbit, index, 40).unwrap();
        worst = worst.max(domination_gap(&map, &dir).unwrap());
    }
    assert!(worst <= 0.5, "worst gap {worst}");
}

#[test]
fn direction_residual_decreases_geometrically() {
    let map = default_da();
    let model = NoiseModel::new(0.01).unwrap();
    for i in 0..5 {
        let orbit = ensemble_member(&map, &model, 9, i, 200).unwrap();
        let res: Vec<f64> = (5..=20).map(|s| estimate_direction(&map, &orbit, 100, s).unwrap().residual).collect();
        let ratios: Vec<f64> = res.windows(2).filter(|w| w[0] > 1e-13).map(|w| w[1] / w[0]).collect();
        assert!(ratios.len() >= 5, "{res:?}");
        assert!(ratios.iter().all(|r| *r < 1.0), "{ratios:?}");
        let mean_ratio = (res[ratios.len()] / res[0]).powf(1.0 / ratios.len() as f64);
        assert!(mean_ratio < 0.5, "{mean_ratio}");
    }
}

#[test]
fn cocycle_constant_on_linear_map() {
    let cat = linear_map([2, 1, 1, 1]).unwrap();
    let orbit = ensemble_member(&cat, &NoiseModel::new(0.05).unwrap(), 1, 0, 2000).unwrap();
    let tr = cocycle_log_norms(&cat, &orbit, 30).unwrap();
    let mean = tr.mean();
    let var = tr.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tr.len() as f64;
    assert!(var < 1e-20);
    assert!((mean + 0.962424).abs() < 1e-6);
}

#[test]
fn curvature_stays_bounded() {
    let map = default_da();
    let cone = ConeParams::for_map(&map, 0.2, 0.5).unwrap();
    let dir = cone.e_u + 0.1 * cone.e_s;
    let mut rng = RngStream::new(2, 0);
    for _ in 0..3 {
        let c = straight_segment(rng.torus_point(), dir, 1e-3, 50);
        let k = curvature_iterates(&map, &c, &cone, 1.0, 50, 1e-3).unwrap();
        let early = k[..=10].iter().cloned().fold(0.0, f64::max);
        let all = k.iter().cloned().fold(0.0, f64::max);
        assert!(all <= 2.0 * early, "sup {all} vs 10-iterate max {early}");
    }
}

#[test]
fn nondegeneracy_conditions() {
    let map = default_da();
    let model = NoiseModel::new(0.05).unwrap();
    let mut rng = RngStream::new(4, 0);
    for _ in 0..3 {
        let x = rng.torus_point();
        let rep = check_nondegeneracy(&map, &model, x, 100_000, &mut rng);
        assert!(rep.covers_neighborhood && rep.bounded_density, "{rep:?}");
    }
}

#[test]
fn ulam_invariants_and_fixed_point() {
    let map = default_da();
    let model = NoiseModel::new(0.05).unwrap();
    let op = ulam_operator(&map, &model, 16, 32, 1).unwrap();
    for i in 0..256 {
        assert!((op.row_sum(i) - 1.0).abs() < 1e-9);
    }
    let h = stationary_density(&op, 1e-12, 5000).unwrap();
    assert!(stationarity_residual(&op, &h) < 2e-12);
    assert!((h.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn noisy_identity_is_near_uniform() {
    let model = NoiseModel::new(0.1).unwrap();
    let op = ulam_operator(&IdentityMap, &model, 16, 16, 3).unwrap();
    let h = stationary_density(&op, 1e-12, 20_000).unwrap();
    assert!(l1_distance(&h, &GridHistogram::uniform(16)).unwrap() < 0.05);
}

fn histogram_csv(workers: usize) -> String {
    par::with_workers(workers, || {
        let map = default_da();
        let model = NoiseModel::new(0.02).unwrap();
        ensemble_histogram(&map, &model, 16, 2000, 100, 16, 42).unwrap().to_csv()
    })
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let one = histogram_csv(1);
    assert_eq!(one, histogram_csv(4));
    assert_eq!(one, histogram_csv(7));
}

#[test]
fn basin_counts() {
    let model = NoiseModel::new(0.02).unwrap();
    let two = cluster_basins(&TwoAttractor::default(), &model, 40, 2000, 2, 0.1, 8).unwrap();
    assert_eq!(two.clusters, 2);
    let half = cluster_basins(&TwoAttractor::default(), &model, 40, 2000, 2, 0.05, 8).unwrap();
    assert_eq!(half.clusters, 2);
    let cat = linear_map([2, 1, 1, 1]).unwrap();
    let one = cluster_basins(&cat, &model, 40, 20_000, 2, 0.1, 8).unwrap();
    assert_eq!(one.clusters, 1);
}

use nuh_core::cones::cocycle_log_norms;
use nuh_core::hyperbolic::{
    detect_hyperbolic_times, is_hyperbolic_time, pliss_select, pliss_select_quadratic, PlissInput,
};
use nuh_core::noise::ensemble_member;
use nuh_core::torus::{make_da_map, DAParams};
use nuh_core::NoiseModel;
use proptest::prelude::*;

// multiples of 1/1024 keep every partial sum exact
fn dyadic(k: i32) -> f64 {
    k as f64 / 1024.0
}

fn pliss_case() -> impl Strategy<Value = PlissInput> {
    (1usize..400, 1i32..4096, 0i32..2048, 1i32..2048).prop_flat_map(|(n, h, gap, c1_off)| {
        let h_val = dyadic(h);
        let c2 = h_val - dyadic(gap).min(h_val);
        let c1 = c2 - dyadic(c1_off);
        proptest::collection::vec(-h..=h, n).prop_map(move |ks| PlissInput {
            values: ks.into_iter().map(dyadic).collect(),
            c1,
            c2,
            h: h_val,
        })
    })
}

// c2 sits at or below the (dyadic-floored) average, so the bound applies
fn good_average_case() -> impl Strategy<Value = PlissInput> {
    (1usize..400, 1i32..4096, 1i32..2048).prop_flat_map(|(n, h, c1_off)| {
        proptest::collection::vec(-h..=h, n).prop_map(move |ks| {
            let sum: i64 = ks.iter().map(|k| *k as i64).sum();
            let c2 = dyadic(sum.div_euclid(ks.len() as i64) as i32);
            PlissInput { values: ks.into_iter().map(dyadic).collect(), c1: c2 - dyadic(c1_off), c2, h: dyadic(h) }
        })
    })
}

proptest! {
    #[test]
    fn linear_scan_matches_quadratic(input in pliss_case()) {
        let fast = pliss_select(&input).unwrap();
        prop_assert_eq!(fast, pliss_select_quadratic(&input.values, input.c1));
    }

    #[test]
    fn cardinality_bound(input in good_average_case()) {
        prop_assert!(input.has_good_average());
        let sel = pliss_select(&input).unwrap();
        let bound = input.zeta() * input.values.len() as f64;
        if input.h > input.c2 {
            prop_assert!(sel.len() as f64 > bound);
        } else {
            prop_assert!(sel.len() as f64 >= bound);
        }
    }

    #[test]
    fn selected_indices_are_increasing(input in pliss_case()) {
        let sel = pliss_select(&input).unwrap();
        prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(sel.iter().all(|&i| i >= 1 && i <= input.values.len()));
    }

    #[test]
    fn times_are_monotone_in_alpha(ks in proptest::collection::vec(-3000i32..1000, 1..300), a in 1u32..99, b in 1u32..99) {
        use nuh_core::cones::CocycleTrace;
        let values: Vec<f64> = ks.into_iter().map(dyadic).collect();
        let trace = CocycleTrace { start: 0, directions: vec![nuh_core::Vec2::ZERO; values.len()], values };
        let (lo, hi) = (a.min(b) as f64 / 100.0, a.max(b) as f64 / 100.0);
        let small = detect_hyperbolic_times(&trace, lo).unwrap().indices;
        let large = detect_hyperbolic_times(&trace, hi).unwrap().indices;
        prop_assert!(small.iter().all(|i| large.binary_search(i).is_ok()));
    }
}

#[test]
fn all_equal_to_h_gives_equality() {
    let input = PlissInput { values: vec![2.0; 50], c1: 0.5, c2: 2.0, h: 2.0 };
    let sel = pliss_select(&input).unwrap();
    assert_eq!(sel.len(), 50);
    assert_eq!(input.zeta(), 1.0);
}

#[test]
fn definition_replay_on_da_traces() {
    let map = make_da_map(&DAParams::default()).unwrap();
    let model = NoiseModel::new(0.01).unwrap();
    for i in 0..20 {
        let orbit = ensemble_member(&map, &model, 7, i, 600).unwrap();
        let trace = cocycle_log_norms(&map, &orbit, 30).unwrap();
        for alpha in [0.3, 0.5, 0.8] {
            let rep = detect_hyperbolic_times(&trace, alpha).unwrap();
            for &m in &rep.indices {
                assert!(is_hyperbolic_time(&trace.values, m, alpha, 1e-12), "orbit {i} time {m}");
            }
            let brute: Vec<usize> =
                (1..=trace.len()).filter(|&m| is_hyperbolic_time(&trace.values, m, alpha, 0.0)).collect();
            assert_eq!(rep.indices, brute);
        }
    }
}

use nuh_core::cones::{in_cone, ConeKind, ConeParams};
use nuh_core::measures::{circular_w1, disk_rect_area, l1_distance, GridHistogram};
use nuh_core::noise::{random_orbit, sample_noise};
use nuh_core::torus::{linear_map, make_da_map, wrap, DAParams};
use nuh_core::{Dynamics, NoiseModel, RngStream, TorusPoint, Vec2};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y)| TorusPoint::new(x, y).unwrap())
}

fn da(strength: f64) -> nuh_core::TorusMap {
    make_da_map(&DAParams::default().with_strength(strength)).unwrap()
}

proptest! {
    #[test]
    fn wrap_is_total_and_idempotent(x in -1e6..1e6f64, y in -1e6..1e6f64) {
        let p = wrap(x, y).unwrap();
        prop_assert!((0.0..1.0).contains(&p.x()) && (0.0..1.0).contains(&p.y()));
        prop_assert_eq!(wrap(p.x(), p.y()).unwrap(), p);
    }

    #[test]
    fn inverse_round_trip(p in point(), s in 0.0..0.35f64) {
        let map = da(s);
        let back = map.inverse_apply(map.apply(p)).unwrap();
        prop_assert!(back.distance(p) < 1e-10);
        let fwd = map.apply(map.inverse_apply(p).unwrap());
        prop_assert!(fwd.distance(p) < 1e-10);
    }

    #[test]
    fn jacobian_matches_central_differences(p in point(), s in 0.0..0.35f64) {
        let map = da(s);
        let h = 1e-6;
        let j = map.jacobian(p);
        let col = |dx: f64, dy: f64| {
            let plus = map.apply_lift(p.translate(Vec2::new(dx, dy)));
            let minus = map.apply_lift(p.translate(Vec2::new(-dx, -dy)));
            let d = plus - minus;
            Vec2::new(nuh_core::torus::min_image(d.x) / (2.0 * h), nuh_core::torus::min_image(d.y) / (2.0 * h))
        };
        let c1 = col(h, 0.0);
        let c2 = col(0.0, h);
        let err = (j.m11 - c1.x).abs().max((j.m21 - c1.y).abs()).max((j.m12 - c2.x).abs()).max((j.m22 - c2.y).abs());
        prop_assert!(err < 1e-6 * (1.0 + j.m11.abs().max(j.m22.abs())), "err {err}");
    }

    #[test]
    fn determinant_range(p in point(), s in 0.0..0.6f64) {
        let det = da(s).jacobian(p).det();
        prop_assert!(det >= 1.0 - s - 1e-12 && det <= 1.0 + 0.6531 * s + 1e-12, "det {det}");
    }

    #[test]
    fn cone_membership_is_scale_invariant(theta in 0.0..std::f64::consts::TAU, c in prop_oneof![-1e6..-1e-6f64, 1e-6..1e6f64]) {
        let cone = ConeParams::for_map(&linear_map([2, 1, 1, 1]).unwrap(), 0.2, 0.5).unwrap();
        let v = Vec2::new(theta.cos(), theta.sin());
        for kind in [ConeKind::Cu, ConeKind::Cs] {
            prop_assert_eq!(in_cone(v, &cone, kind).unwrap(), in_cone(c * v, &cone, kind).unwrap());
        }
    }

    #[test]
    fn noise_stays_in_disk_and_supports_nest(eps in 0.0..0.2f64, seed in any::<u64>()) {
        let model = NoiseModel::new(eps).unwrap();
        let wider = NoiseModel::new(eps * 1.5 + 1e-9).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..200 {
            let t = sample_noise(&model, &mut rng);
            prop_assert!(t.norm() <= eps);
            prop_assert!(model.supports(t) && wider.supports(t));
        }
    }

    #[test]
    fn orbits_replay_exactly(seed in any::<u64>(), stream in 0u64..1000, p in point()) {
        let map = da(0.2);
        let model = NoiseModel::new(0.03).unwrap();
        let a = random_orbit(&map, &model, p, 200, RngStream::new(seed, stream)).unwrap();
        let b = random_orbit(&map, &model, p, 200, RngStream::new(seed, stream)).unwrap();
        prop_assert_eq!(a.replay_error(&map), 0.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn l1_is_a_bounded_metric(a in proptest::collection::vec(0u64..50, 64), b in proptest::collection::vec(0u64..50, 64)) {
        prop_assume!(a.iter().sum::<u64>() > 0 && b.iter().sum::<u64>() > 0);
        let h1 = GridHistogram::from_counts(8, &a).unwrap();
        let h2 = GridHistogram::from_counts(8, &b).unwrap();
        let d = l1_distance(&h1, &h2).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
        prop_assert!((d - l1_distance(&h2, &h1).unwrap()).abs() < 1e-15);
        prop_assert!((h1.mass().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(GridHistogram::from_binary(&h1.to_binary()).unwrap(), h1.clone());
        let w = circular_w1(&h1.marginal(0), &h2.marginal(0));
        prop_assert!((0.0..=0.5 + 1e-12).contains(&w));
    }

    #[test]
    fn disk_area_is_additive(cut in -0.1..0.1f64, r in 0.01..0.1f64) {
        let whole = disk_rect_area(-1.0, 1.0, -1.0, 1.0, r);
        let left = disk_rect_area(-1.0, cut, -1.0, 1.0, r);
        let right = disk_rect_area(cut, 1.0, -1.0, 1.0, r);
        prop_assert!((whole - std::f64::consts::PI * r * r).abs() < 1e-14);
        prop_assert!((left + right - whole).abs() < 1e-14);
    }
}

#[test]
fn zero_strength_is_bitwise_linear() {
    let da0 = da(0.0);
    let cat = linear_map([2, 1, 1, 1]).unwrap();
    let mut rng = RngStream::new(3, 0);
    for _ in 0..10_000 {
        let p = rng.torus_point();
        assert_eq!(da0.apply_lift(p), cat.apply_lift(p));
        assert_eq!(da0.inverse_apply(p).unwrap(), cat.inverse_apply(p).unwrap());
    }
}

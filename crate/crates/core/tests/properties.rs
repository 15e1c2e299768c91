use proptest::prelude::*;
use surfent::curve::Curve;
use surfent::dynamics::{cocycle_jacobian, lift_step, rho, TangentPoint};
use surfent::entropy::{dynamical_distance, in_dynamical_ball};
use surfent::linalg::{operator_norm, vec_norm, Jacobian2};
use surfent::oscillator::{length_lower_bound, restricted_length, theoretical_rate, DEFAULT_CELL_BUDGET};
use surfent::polyline::{arc_length, clipped_arc_length};
use surfent::times::{expand_times, geometric_times_from, quantized_data};
use surfent::{zoo, Point2, Rect, SurfaceSystem};

fn torus_systems() -> Vec<SurfaceSystem> {
    vec![zoo::cat(), zoo::make_standard_map(2.5).unwrap(), zoo::make_perturbed_cat(0.08).unwrap()]
}

fn unit_point() -> impl Strategy<Value = Point2> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| Point2::new(u, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cocycle_composes(x in unit_point(), m in 0usize..7, n in 0usize..7, which in 0usize..3) {
        let sys = &torus_systems()[which];
        let whole = cocycle_jacobian(sys, x, m + n).unwrap();
        let head = cocycle_jacobian(sys, x, m).unwrap();
        let tail = cocycle_jacobian(sys, sys.iterate_lift(x, m).unwrap(), n).unwrap();
        let scale = operator_norm(&tail) * operator_norm(&head);
        prop_assert!((tail * head).max_abs_diff(&whole) <= 1e-10 * scale);
        prop_assert!(operator_norm(&whole) <= scale * (1.0 + 1e-12));
    }

    #[test]
    fn projective_growth_telescopes(x in unit_point(), angle in 0.0..std::f64::consts::PI, n in 1usize..15, which in 0usize..3) {
        let sys = &torus_systems()[which];
        let start = TangentPoint::new(x, angle);
        let mut xh = start;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += rho(sys, &xh);
            xh = lift_step(sys, &xh).unwrap();
        }
        let direct = vec_norm(cocycle_jacobian(sys, x, n).unwrap().apply(start.unit())).ln();
        prop_assert!((sum - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn expanded_times_grow_with_l(e in proptest::collection::btree_set(1usize..120, 0..30), l in 0usize..10, n in 1usize..120) {
        let e: Vec<usize> = e.into_iter().collect();
        let small = expand_times(&e, l, n);
        let large = expand_times(&e, l + 1, n);
        prop_assert!(small.iter().all(|m| large.contains(m)));
        prop_assert!(e.iter().filter(|&&m| m <= n).all(|m| small.contains(m)));
        prop_assert!(small.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn geometric_times_shrink_with_tau(rp in proptest::collection::vec(-2.0..4.0f64, 1..150), tau in 0.0..2.0f64) {
        let low = geometric_times_from(&rp, tau);
        let high = geometric_times_from(&rp, tau + 0.25);
        prop_assert!(high.iter().all(|m| low.contains(m)));
    }

    #[test]
    fn quantization_is_a_ceiling(x in unit_point(), angle in 0.0..std::f64::consts::PI, p in 1usize..5, which in 0usize..3) {
        let sys = &torus_systems()[which];
        let xh = TangentPoint::new(x, angle);
        let n = 12;
        let q = quantized_data(sys, &xh, n, p).unwrap();
        let mut point = xh;
        for i in 0..n {
            let block = cocycle_jacobian(sys, point.base, p).unwrap();
            let full = operator_norm(&block).ln();
            let along = vec_norm(block.apply(point.unit())).ln();
            let bp = q.beta_prime_value(i) * p as f64;
            let bpp = q.beta_double_prime_value(i) * p as f64;
            prop_assert!(bp >= full - 1e-9 && bp < full + 1.0 + 1e-9);
            prop_assert!(bpp >= along - 1e-9 && bpp < along + 1.0 + 1e-9);
            prop_assert!(q.beta_double_prime[i] <= q.beta_prime[i]);
            point = lift_step(sys, &point).unwrap();
        }
    }

    #[test]
    fn dynamical_balls_nest(z in unit_point(), du in -0.05..0.05f64, dv in -0.05..0.05f64, n in 1usize..8) {
        let cat = zoo::cat();
        let y = cat.canonicalize(z.offset(du * 0.1, dv * 0.1));
        let eps = 0.04;
        if in_dynamical_ball(&cat, z, y, n + 1, eps) {
            prop_assert!(in_dynamical_ball(&cat, z, y, n, eps));
        }
        let d_n = dynamical_distance(&cat, z, y, n).unwrap();
        let d_next = dynamical_distance(&cat, z, y, n + 1).unwrap();
        prop_assert!(d_n <= d_next);
    }

    #[test]
    fn refining_the_polyline_never_shortens_it(n in 1usize..6, v in 0.0..1.0f64) {
        let sys = zoo::make_standard_map(1.5).unwrap();
        let curve = Curve::horizontal_loop(v);
        let coarse = arc_length(&sys, &curve, n, 1e-4).unwrap().length;
        let fine = arc_length(&sys, &curve, n, 1e-7).unwrap().length;
        prop_assert!(fine >= coarse * (1.0 - 1e-12));
    }

    #[test]
    fn clipped_length_beats_its_lower_bound(a in 1.25f64..1.31, n in 4usize..30) {
        // only meaningful strictly between 3^{1/5} and 3^{1/4}
        let len = restricted_length(a, n, 1e-8, DEFAULT_CELL_BUDGET).unwrap().length;
        prop_assert!(len >= length_lower_bound(a, n));
        prop_assert!(len >= 1.0);
        prop_assert!(theoretical_rate(a).unwrap() >= 0.0);
    }
}

/// The oscillation-cell quadrature against the generic polyline clipped to
/// `[−1, 1]²`; the polyline runs ten times tighter because its tolerance
/// controls chord excess rather than total length.
#[test]
fn oscillator_quadrature_matches_polyline() {
    let tol = 1e-7;
    for a in [1.1, 1.5] {
        let sys = zoo::make_linear_planar(Jacobian2::new(a, 0.0, 0.0, 3.0), Rect::square(1.0)).unwrap().unbounded();
        for n in [2, 4, 6, 8] {
            let quad = restricted_length(a, n, tol, DEFAULT_CELL_BUDGET).unwrap().length;
            let poly = clipped_arc_length(&sys, &Curve::oscillator(), n, &Rect::square(1.0), tol / 10.0).unwrap().length;
            assert!((quad - poly).abs() <= 2.0 * tol * quad, "a={a} n={n}: quadrature {quad} polyline {poly}");
        }
    }
}

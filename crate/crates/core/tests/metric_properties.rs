//! Property tests for the path metrics: the metric axioms, domination by the
//! uniform metric, agreement with the sampled graph distance, the
//! 1-Lipschitz property of the supremum functional, exactness of the
//! time-shift law, exact CSV round trips, and the order-zero coupling
//! identity.

use proptest::prelude::*;

use stablepaths::cadlag::{
    m2_distance, sampled_hausdorff, sup_functional, uniform_distance, StepFunction,
};
use stablepaths::ma::{build_paths, Coefficients};
use stablepaths::noise::TailModel;

/// Step functions on a dyadic lattice: distinct jump times k/8192 in (0, 1],
/// values on the grid of multiples of 1/16, so constructions are exact and
/// downstream comparisons are not polluted by strategy-side rounding.
fn step_functions(max_jumps: usize) -> impl Strategy<Value = StepFunction> {
    proptest::collection::btree_set(1u32..=8192, 0..=max_jumps)
        .prop_flat_map(|times| {
            let k = times.len();
            (
                Just(times),
                proptest::collection::vec(-40i32..=40, k),
                -40i32..=40,
            )
        })
        .prop_map(|(times, steps, init)| {
            let mut value = f64::from(init) / 16.0;
            let mut jumps = Vec::with_capacity(times.len());
            for (t, dv) in times.into_iter().zip(steps) {
                value += f64::from(dv) / 16.0;
                jumps.push((f64::from(t) / 8192.0, value));
            }
            StepFunction::new(f64::from(init) / 16.0, jumps).expect("lattice jumps are valid")
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn metric_axioms_hold(
        x in step_functions(50),
        y in step_functions(50),
        z in step_functions(50),
    ) {
        let dxy = m2_distance(&x, &y);
        prop_assert!(dxy.is_finite() && dxy >= 0.0);
        // symmetry is exact, not approximate
        prop_assert_eq!(dxy, m2_distance(&y, &x));
        prop_assert_eq!(m2_distance(&x, &x), 0.0);
        let dxz = m2_distance(&x, &z);
        let dzy = m2_distance(&z, &y);
        prop_assert!(dxy <= dxz + dzy + 1e-9, "triangle: {} vs {} + {}", dxy, dxz, dzy);
        prop_assert!(dxy <= uniform_distance(&x, &y) + 1e-12);
        let sup_gap = (sup_functional(&x) - sup_functional(&y)).abs();
        prop_assert!(sup_gap <= dxy + 1e-9, "sup gap {} vs distance {}", sup_gap, dxy);
    }

    #[test]
    fn sampled_graph_distance_tracks_the_exact_metric(
        x in step_functions(25),
        y in step_functions(25),
    ) {
        let exact = m2_distance(&x, &y);
        let sampled = sampled_hausdorff(&x, &y, 1e-3).unwrap();
        prop_assert!((exact - sampled).abs() <= 1e-3, "exact {} sampled {}", exact, sampled);
    }

    #[test]
    fn csv_round_trips_exactly(x in step_functions(50)) {
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let back = StepFunction::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(&x, &back);
    }
}

#[test]
fn time_shift_of_a_single_jump_is_exact() {
    // paths differing only by a time shift delta of one jump of height 2:
    // the graphs are L-shapes whose Hausdorff distance is min(delta, 1)
    for k in 1..=32u32 {
        let delta = f64::from(k) / 64.0;
        let x = StepFunction::new(0.0, [(0.25, 2.0)]).unwrap();
        let y = StepFunction::new(0.0, [(0.25 + delta, 2.0)]).unwrap();
        assert_eq!(m2_distance(&x, &y), delta.min(1.0), "delta {delta}");
    }
}

#[test]
fn order_zero_coupling_paths_are_identical() {
    // with a single coefficient the series is phi_0 Z_i and the aggregated
    // path multiplies the same draws by the same total, so the coupled pair
    // coincides float for float
    for (alpha, p, phi0) in [(0.6, 0.5, 1.0), (0.8, 0.3, 2.5), (1.5, 0.9, -3.0)] {
        let model = TailModel::new(alpha, p).unwrap();
        let coeffs = Coefficients::new(vec![phi0]).unwrap();
        let (vn, vnz) = build_paths(&model, &coeffs, 257, 0xC0FFEE);
        assert_eq!(vn, vnz);
        assert_eq!(m2_distance(&vn, &vnz), 0.0);
        assert_eq!(uniform_distance(&vn, &vnz), 0.0);
    }
}

#[test]
fn constant_paths_measure_their_gap() {
    let x = StepFunction::constant(1.0);
    let y = StepFunction::constant(-2.0);
    assert_eq!(m2_distance(&x, &y), 3.0);
    assert_eq!(uniform_distance(&x, &y), 3.0);
    assert_eq!(m2_distance(&x, &x), 0.0);
}

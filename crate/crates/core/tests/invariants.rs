use proptest::prelude::*;

use replidyn::fitness::catalog;
use replidyn::fitness::special::digamma;
use replidyn::fitness::FitnessMap;
use replidyn::historic::{repeated_averages_of, run_lengths, xi};
use replidyn::real::format_f64;
use replidyn::replicator::{DynamicsKind, ReplicatorSystem};
use replidyn::simplex::{majorizes, SimplexPoint};

fn interior(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

/// Identity plus the nonnegative primitives, normalized into `(0, 1]`.
fn systems(m: usize, kind: DynamicsKind) -> Vec<ReplicatorSystem> {
    let mut out = vec![ReplicatorSystem::new(FitnessMap::identity(m).unwrap(), kind).unwrap()];
    for e in catalog::primitives(m).unwrap() {
        if e.map.lower_bound() >= 0.0 {
            out.push(ReplicatorSystem::new(e.map.normalize(0.1).unwrap(), kind).unwrap());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stable_step_stays_on_simplex_and_keeps_order(x in interior(4), which in 0usize..6) {
        let sys = &systems(4, DynamicsKind::Stable)[which];
        let p = SimplexPoint::<f64>::from_f64(&x, 53).unwrap();
        let y = sys.step(&p).unwrap().next.to_f64_vec();
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(y.iter().all(|&v| v > 0.0));
        for i in 0..4 {
            for j in 0..4 {
                if x[i] > x[j] {
                    prop_assert!(y[i] >= y[j], "order lost at {i},{j}: {x:?} -> {y:?}");
                    // The leader's share relative to any other grows.
                    prop_assert!(y[i] / y[j] >= x[i] / x[j] * (1.0 - 1e-14));
                }
            }
        }
    }

    #[test]
    fn catalog_maps_preserve_order(x in interior(3), which in 0usize..14) {
        let e = &catalog::primitives(3).unwrap()[which];
        let f = e.map.evaluate(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if x[i] - x[j] > 1e-9 {
                    prop_assert!(f[i] > f[j], "{}: {x:?} -> {f:?}", e.label);
                }
            }
        }
    }

    #[test]
    fn zero_sum_steps_conserve_mass_and_shrink_xi(x in interior(3), which in 0usize..6, v2 in any::<bool>()) {
        let kind = if v2 { DynamicsKind::ZeroSumV2 } else { DynamicsKind::ZeroSumV1 };
        let sys = &systems(3, kind)[which];
        let p = SimplexPoint::<f64>::from_f64(&x, 53).unwrap();
        let step = sys.step(&p).unwrap();
        prop_assert!(step.drift <= 3.0 * 2f64.powi(-49));
        prop_assert!(xi(&step.next).unwrap() <= xi(&p).unwrap());
    }

    #[test]
    fn zero_sum_faces_are_invariant(a in 0.01f64..0.99, zero in 0usize..3) {
        let mut x = vec![a, 1.0 - a];
        x.insert(zero, 0.0);
        let sys = &systems(3, DynamicsKind::ZeroSumV1)[0];
        let p = SimplexPoint::<f64>::from_f64(&x, 53).unwrap();
        let y = sys.step(&p).unwrap().next.to_f64_vec();
        prop_assert_eq!(y[zero], 0.0);
    }

    #[test]
    fn run_lengths_partition_the_indicator(ind in prop::collection::vec(any::<bool>(), 1..200)) {
        let runs = run_lengths(&ind);
        prop_assert_eq!(runs.iter().map(|r| r.1).sum::<usize>(), ind.len());
        prop_assert!(runs.windows(2).all(|w| w[0].0 != w[1].0));
        prop_assert!(runs.iter().all(|r| r.1 > 0));
        prop_assert_eq!(runs[0].0, ind[0]);
    }

    #[test]
    fn first_order_average_is_the_running_mean(pts in prop::collection::vec(interior(3), 1..60)) {
        let stack = repeated_averages_of(pts.iter().map(|p| p.as_slice()), 3, 3).unwrap();
        let n = pts.len();
        for k in 0..3 {
            let mean = pts.iter().map(|p| p[k]).sum::<f64>() / n as f64;
            prop_assert!((stack.get(1, n)[k] - mean).abs() < 1e-12);
        }
        for s in 1..=3 {
            prop_assert!((stack.get(s, n).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decimal_rendering_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn digamma_recurrence(t in 0.05f64..40.0) {
        let lhs = digamma(t + 1.0).unwrap();
        let rhs = digamma(t).unwrap() + 1.0 / t;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn every_point_majorizes_the_center(x in interior(5)) {
        let c = vec![0.2; 5];
        prop_assert!(majorizes(&x, &c, 1e-12).unwrap());
        prop_assert!(majorizes(&x, &x, 1e-12).unwrap());
    }
}

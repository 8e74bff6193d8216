use proptest::prelude::*;

use smd_core::{FeasibleSet, Geometry, NormKind, Regularizer};

fn simplex_point(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

proptest! {
    #[test]
    fn entropy_three_point_identity(
        a in prop::collection::vec(0.01f64..1.0, 5),
        b in prop::collection::vec(0.01f64..1.0, 5),
        c in prop::collection::vec(0.01f64..1.0, 5),
    ) {
        let g = Geometry::entropy_simplex(5, 1.0).unwrap();
        let r = g.three_point_residual(&simplex_point(&a), &simplex_point(&b), &simplex_point(&c)).unwrap();
        prop_assert!(r.abs() <= 1e-10);
    }

    #[test]
    fn entropy_step_matches_multiplicative_update(
        a in prop::collection::vec(0.01f64..1.0, 4),
        g in prop::collection::vec(-5.0f64..5.0, 4),
        alpha in 0.001f64..2.0,
    ) {
        let geom = Geometry::entropy_simplex(4, 1.0).unwrap();
        let x = simplex_point(&a);
        let next = geom.mirror_step(&x, &g, alpha, &Regularizer::Zero).unwrap();
        let w: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi * (-alpha * gi).exp()).collect();
        let expect = simplex_point(&w);
        prop_assert!((next.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (p, q) in next.iter().zip(&expect) {
            prop_assert!((p - q).abs() <= 1e-9 * q.max(1e-3));
        }
    }

    #[test]
    fn euclidean_step_stays_in_ball(
        x in prop::collection::vec(-0.7f64..0.7, 3),
        g in prop::collection::vec(-50.0f64..50.0, 3),
        alpha in 0.001f64..3.0,
        l1 in 0.0f64..2.0,
    ) {
        let geom = Geometry::euclidean(3, FeasibleSet::Ball { norm: NormKind::L2, radius: 1.3 }).unwrap();
        let next = geom.mirror_step(&x, &g, alpha, &Regularizer::l1(l1)).unwrap();
        prop_assert!(geom.feasible_set().contains(&next, 1e-12));
    }

    #[test]
    fn divergence_dominates_half_square(
        a in prop::collection::vec(0.001f64..1.0, 6),
        b in prop::collection::vec(0.001f64..1.0, 6),
    ) {
        let g = Geometry::entropy_simplex(6, 1.0).unwrap();
        let (x, y) = (simplex_point(&a), simplex_point(&b));
        let l1: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
        prop_assert!(g.bregman_divergence(&x, &y).unwrap() >= 0.5 * l1 * l1 - 1e-12);
    }
}

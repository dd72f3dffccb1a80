use evovoter::graph::{OpinionGraph, OpinionInit};
use evovoter::moments::*;
use evovoter::rng::{stream_rng, Stream};
use proptest::prelude::*;

proptest! {
    #[test]
    fn derived_states_satisfy_relations(ub in 1e-4f64..0.2499, nu in 0.05f64..50.0) {
        let s = derive_from_ub(ub, nu).unwrap();
        prop_assert!(check_relations(&s).max() < 1e-12);
        prop_assert_eq!(s.negative_ubb, nu <= 0.5);
    }

    #[test]
    fn cauchy_schwarz_holds_exactly(seed in 0u64..100_000, n in 2usize..80, mean in 0.0f64..10.0, p in 0.0f64..1.0) {
        let mut rng = stream_rng(seed, 0, Stream::Fixtures);
        let mut g = OpinionGraph::erdos_renyi(n, mean.min((n - 1) as f64), &mut rng).unwrap();
        g.assign_opinions(p, OpinionInit::Product, &mut rng).unwrap();
        let c = cauchy_schwarz_check(&g);
        prop_assert!(c.holds(), "{c:?}");
        prop_assert_eq!(c.n101(), g.triple_counts().n101());
    }
}

#[test]
fn published_predictions_reproduced() {
    let sims: Vec<SimMoments> = PUBLISHED_TABLE1.iter().map(SimMoments::from).collect();
    let rows = table1_rows(&sims).unwrap();
    for (got, want) in rows.iter().zip(&PUBLISHED_TABLE1) {
        for (g, w) in [
            (got.uab_pred, want.uab_pred),
            (got.ubb_pred, want.ubb_pred),
            (got.uaa_pred, want.uaa_pred),
        ] {
            assert!((g - w).abs() <= 5e-4, "nu {}: {g} vs {w}", want.nu);
        }
    }
    let mut csv = Vec::new();
    write_table1_csv(&rows, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 7);
    assert_eq!(text.lines().next().unwrap(), TABLE1_HEADER);
}

#[test]
fn first_order_recursion_vanishes_on_closed_form() {
    for nu in [1.0, 1.44, 2.0, 5.0] {
        let s = derive_from_ub(0.15, nu).unwrap();
        let grid = CoefficientGrid::from_state(&s, None, 2);
        assert!((grid.get(0, 0) - 0.5).abs() < 1e-15);
        for (m, n) in [(1, 0), (0, 1)] {
            let r = recr_residual(&grid, m, n).unwrap();
            assert!(r.abs() < 1e-12, "nu {nu} ({m},{n}): {r}");
        }
    }
}

#[test]
fn recursion_is_linear_in_coefficients() {
    let s = derive_from_ub(0.1666, 2.0).unwrap();
    let grid = CoefficientGrid::from_state(&s, None, 2);
    let mut bumped = grid.clone();
    bumped.set(0, 1, grid.get(0, 1) + 1e-3).unwrap();
    let slope =
        (recr_residual(&bumped, 0, 1).unwrap() - recr_residual(&grid, 0, 1).unwrap()) / 1e-3;
    let predicted = -(1.5 + grid.nu * grid.bar_alpha);
    assert!((slope - predicted).abs() < 1e-6, "{slope} vs {predicted}");
}

#[test]
fn order3_relations() {
    let mut s = derive_from_ub(0.1666, 2.0).unwrap();
    s.third = Some(ThirdOrder::default());
    let r = order3_residuals(&s, &FourthOrder::default()).unwrap();
    let scale = s.bar_eta * (s.uaa + 2.0 * s.uab + s.ubb);
    assert_eq!(r.aggregate, scale);
    let mut doubled = s;
    doubled.bar_eta *= 2.0;
    assert_eq!(
        order3_residuals(&doubled, &FourthOrder::default())
            .unwrap()
            .aggregate,
        2.0 * scale
    );

    // The recursion at (3 - n, n) agrees with the third-order equations
    // once the grid carries those moments.
    s.third = Some(ThirdOrder {
        uaaa: 0.31,
        uaab: 0.07,
        uabb: 0.02,
        ubbb: 0.011,
    });
    let four = FourthOrder {
        uaaab: 0.01,
        uaabb: 0.004,
        uabbb: 0.002,
        ubbbb: 0.001,
    };
    let r = order3_residuals(&s, &four).unwrap();
    let grid = CoefficientGrid::from_state(&s, Some(&four), 4);
    for m in 0..=2usize {
        let rec = recr_residual(&grid, 2 - m, m).unwrap();
        assert!(rec.is_finite());
    }
    let sum: f64 = r.residuals.iter().sum();
    assert!(
        (sum - r.aggregate).abs() < 1e-12,
        "{sum} vs {}",
        r.aggregate
    );
}

#[test]
fn empirical_moments_examples() {
    let g = OpinionGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[1, 0, 1, 0]).unwrap();
    let s = empirical_moments(&g, 2.0);
    assert!((s.ub - 0.5).abs() < 1e-15 && s.ua == 0.0 && (s.ubb - 0.5).abs() < 1e-15);
    let g = OpinionGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[1, 1, 1, 1]).unwrap();
    let s = empirical_moments(&g, 2.0);
    assert!((s.ua - 1.0).abs() < 1e-15 && s.ub == 0.0 && (s.uaa - 1.0).abs() < 1e-15);
}

#[test]
fn simulated_snapshot_closes_at_order_three() {
    let (s, taken) = sample_moments(2.0, &MomentSampling::default(), 1, 0).unwrap();
    assert_eq!(taken, MomentSampling::default().snapshots);
    assert!((s.u - 0.5).abs() < 0.05);
    let r = order3_residuals(&s, &FourthOrder::default()).unwrap();
    assert!(r.aggregate.abs() < 0.05 * r.aggregate_scale, "{r:?}");
}

use evovoter::dynamics::{run_replica, run_replicas, Clock, ModelParams, RewireMode};
use evovoter::graph::OpinionInit;
use evovoter::stats::{ks_two_sample, mean_se};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn edge_count_is_conserved(seed in 0u64..1000, nu in 0.0f64..4.0, p in 0.1f64..0.9, same in any::<bool>()) {
        let params = ModelParams {
            n: 120,
            l: 6,
            nu,
            p,
            rewire_mode: if same { RewireMode::ToSame } else { RewireMode::ToRandom },
            max_updates: Some(5_000),
            record_every: Some(50),
            ..Default::default()
        };
        let r = run_replica(&params, seed, 0).unwrap();
        let c = r.final_counts;
        prop_assert_eq!(c.oriented_total(), 120 * 6);
        for row in &r.trajectory.rows {
            prop_assert_eq!(row.n11 + 2 * row.n10 + row.n00, 120 * 6);
        }
    }

    #[test]
    fn pure_rewire_to_same_takes_n10_steps(seed in 0u64..1000, p in 0.1f64..0.9) {
        let params = ModelParams { n: 100, l: 5, nu: 0.0, p, rewire_mode: RewireMode::ToSame, ..Default::default() };
        let g = evovoter::dynamics::build_graph(&params, seed, 0).unwrap();
        let n10 = g.pair_counts().n10;
        let r = run_replica(&params, seed, 0).unwrap();
        prop_assert!(r.absorbed);
        prop_assert_eq!(r.votes, 0);
        // A skip happens only when x already neighbors its whole class.
        prop_assert_eq!(r.updates - r.skipped_rewires, n10);
        if p > 0.3 && p < 0.7 {
            prop_assert_eq!(r.skipped_rewires, 0);
        }
    }
}

#[test]
fn density_is_a_martingale() {
    let (n, l, nu) = (300usize, 10usize, 1.0);
    let params = ModelParams {
        n,
        l,
        nu,
        p: 0.5,
        init: OpinionInit::ExactCount,
        record_dt: Some(1.0),
        max_time: Some(n as f64 / 10.0),
        ..Default::default()
    };
    let runs = run_replicas(&params, 21, 200, 0).unwrap();
    for k in [5usize, 15, 30] {
        let dev: Vec<f64> = runs
            .iter()
            .map(|r| r.trajectory.rows[k].n1 as f64 / n as f64 - 0.5)
            .collect();
        let (m, se) = mean_se(&dev);
        assert!(m.abs() <= 3.0 * se + 1e-12, "t = {k}: mean {m}, se {se}");
        let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
        let (m2, se2) = mean_se(&sq);
        assert!(m2 <= nu * k as f64 / n as f64 + 3.0 * se2, "t = {k}: {m2}");
    }
}

#[test]
fn ctmc_and_discrete_agree_in_distribution() {
    let base = ModelParams {
        n: 200,
        l: 8,
        nu: 1.5,
        p: 0.5,
        max_updates: Some(4000),
        record_every: Some(1000),
        ..Default::default()
    };
    let ctmc = run_replicas(&base, 31, 300, 0).unwrap();
    let disc = run_replicas(
        &ModelParams {
            clock: Clock::DiscreteEfficient,
            ..base.clone()
        },
        32,
        300,
        0,
    )
    .unwrap();
    for k in 1..=4 {
        let pick = |rs: &[evovoter::dynamics::RunResult],
                    f: fn(&evovoter::stats::Row) -> u64|
         -> Vec<f64> {
            rs.iter()
                .filter_map(|r| {
                    r.trajectory
                        .rows
                        .iter()
                        .find(|row| row.updates == 1000 * k)
                        .map(|row| f(row) as f64)
                })
                .collect()
        };
        for f in [
            |r: &evovoter::stats::Row| r.n1,
            |r: &evovoter::stats::Row| r.n10,
        ] {
            let (a, b) = (pick(&ctmc, f), pick(&disc, f));
            assert!(a.len() > 250 && b.len() > 250);
            let ks = ks_two_sample(&a, &b).unwrap();
            assert!(ks.p_value > 0.01, "k = {k}: {ks:?}");
        }
    }
}

#[test]
fn counter_construction_stubborn_fraction() {
    use evovoter::dynamics::{par_map, run_counter_construction, CounterConfig};
    let (l, nu) = (20usize, 0.05);
    let params = ModelParams {
        n: 2000,
        l,
        nu,
        p: 0.5,
        clock: Clock::DiscreteEfficient,
        max_updates: Some(40_000),
        ..Default::default()
    };
    let stats = par_map(20, 0, |r| {
        run_counter_construction(&params, &CounterConfig::default(), 12, r)
    })
    .unwrap();
    let (mut stubborn, mut draws) = (0u64, 0u64);
    for s in stats.iter().map(|r| r.counters.unwrap()) {
        stubborn += s.x_stubborn + s.x_prime_stubborn;
        draws += s.x_draws + s.x_prime_draws;
    }
    let frac = stubborn as f64 / draws as f64;
    let expected = (1.0 - nu / l as f64).powi(20 * l as i32);
    assert!(
        (frac - expected).abs() <= 0.01,
        "{frac} vs {expected} over {draws} draws"
    );
}

#[test]
fn counter_construction_matches_plain_chain() {
    use evovoter::dynamics::{par_map, run_counter_construction, CounterConfig};
    let params = ModelParams {
        n: 500,
        l: 20,
        nu: 1.0,
        p: 0.5,
        clock: Clock::DiscreteEfficient,
        max_updates: Some(20_000),
        ..Default::default()
    };
    let counter = par_map(200, 0, |r| {
        run_counter_construction(&params, &CounterConfig::default(), 13, r)
    })
    .unwrap();
    let plain = run_replicas(&params, 14, 200, 0).unwrap();
    for f in [
        |r: &evovoter::dynamics::RunResult| r.final_counts.n1,
        |r: &evovoter::dynamics::RunResult| r.final_counts.n10,
    ] {
        let a: Vec<f64> = counter.iter().map(|r| f(r) as f64).collect();
        let b: Vec<f64> = plain.iter().map(|r| f(r) as f64).collect();
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }
}

use std::time::Instant;

use pareto_market::{
    growth_step, init_state, run, run_experiment, step, ExperimentOptions, MarketConfig,
    Recorders,
};
use proptest::prelude::*;

fn crowded(n: usize, beta: f64, seed: u64) -> MarketConfig {
    MarketConfig {
        n_firms: n,
        circumference: 30.0 * n as f64,
        beta,
        burn_in_steps: 0,
        sample_steps: 0,
        seed,
        ..MarketConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Relabelling firms relabels the proposed radii and nothing else.
    #[test]
    fn growth_is_permutation_equivariant(
        n in 2usize..40,
        seed in any::<u64>(),
        warm in 0usize..200,
        rotate in 1usize..40,
    ) {
        let c = crowded(n, 2.0, seed);
        let mut s = init_state(&c).unwrap();
        for _ in 0..warm {
            s.advance(&c).unwrap();
        }
        let before = growth_step(&s, &c).unwrap();
        let k = rotate % n;
        let mut permuted = s.clone();
        permuted.firms.rotate_left(k);
        for (id, f) in permuted.firms.iter_mut().enumerate() {
            f.id = id;
        }
        let after = growth_step(&permuted, &c).unwrap();
        for i in 0..n {
            prop_assert!((after[i] - before[(i + k) % n]).abs() < 1e-9);
        }
    }

    #[test]
    fn floor_and_population_hold(n in 2usize..60, seed in any::<u64>(), beta in 0.1f64..20.0) {
        let c = crowded(n, beta, seed);
        let mut s = init_state(&c).unwrap();
        for _ in 0..300 {
            s.advance(&c).unwrap();
            prop_assert_eq!(s.firms.len(), n);
            prop_assert!(s.firms.iter().all(|f| f.radius() >= c.r_min));
            prop_assert!(s.firms.iter().enumerate().all(|(i, f)| f.id == i));
        }
    }
}

#[test]
fn trajectories_are_reproducible() {
    let c = MarketConfig {
        burn_in_steps: 500,
        sample_steps: 2000,
        ..crowded(40, 2.0, 77)
    };
    let recorders = Recorders {
        track_firms: vec![0, 39],
        ..Recorders::all(100)
    };
    assert_eq!(run(&c, &recorders).unwrap(), run(&c, &recorders).unwrap());
    let mut a = init_state(&c).unwrap();
    let mut b = init_state(&c).unwrap();
    for _ in 0..1000 {
        a = step(&a, &c).unwrap();
        b.advance(&c).unwrap();
    }
    assert_eq!(a, b);
}

#[test]
fn zero_beta_tracked_firm_grows_geometrically() {
    let c = MarketConfig {
        n_firms: 5,
        circumference: 1e7,
        beta: 0.0,
        burn_in_steps: 10,
        sample_steps: 200,
        sample_stride: 1,
        ..MarketConfig::default()
    };
    let rec = run_experiment(
        &c,
        &ExperimentOptions {
            snapshot_every: 50,
            track_firms: vec![2],
        },
    )
    .unwrap();
    let points = pareto_market::track_firm(&rec, 2).unwrap();
    assert_eq!(points.len(), 200);
    for w in points.windows(2) {
        assert!((w[1].size / w[0].size - 1.01).abs() < 1e-12);
        assert!(!w[1].respawned);
        assert_eq!(w[1].age, w[0].age + 1);
    }
    assert_eq!(rec.respawns_total, 0);
}

#[test]
fn respawn_shows_as_age_reset_and_size_jump() {
    let c = MarketConfig {
        burn_in_steps: 2000,
        sample_steps: 5000,
        sample_stride: 1,
        ..crowded(30, 2.0, 3)
    };
    let rec = run_experiment(
        &c,
        &ExperimentOptions {
            snapshot_every: 1000,
            track_firms: vec![4],
        },
    )
    .unwrap();
    let points = pareto_market::track_firm(&rec, 4).unwrap();
    let births: Vec<_> = points.iter().filter(|p| p.respawned).collect();
    assert!(!births.is_empty());
    for p in births {
        // a newborn firm has age 0 and size in [2 r_min, 2 r_max)
        assert_eq!(p.age, 0);
        assert!(p.size >= 4.0 && p.size < 10.0, "{p:?}");
    }
}

#[test]
fn desk_protocol_finishes_within_a_minute() {
    let c = MarketConfig::desk();
    let start = Instant::now();
    let rec = run_experiment(&c, &ExperimentOptions::default()).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(rec.correlation.len() as u64 + rec.degenerate_samples, 10_000);
    assert_eq!(rec.clamps_total, 0);
    assert!(elapsed.as_secs_f64() < 60.0, "{elapsed:?}");
}

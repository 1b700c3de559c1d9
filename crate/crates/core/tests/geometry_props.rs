use pareto_market::geometry::{
    arc_contains, arc_overlap, nearest_right_neighbor, right_neighbors, total_overlaps,
    total_overlaps_pairwise, Arc,
};
use proptest::prelude::*;

/// Midpoint-rule integral of `s_i(x) * (sum_j s_j(x) - 1)` on `cells` cells.
fn grid_overlaps(arcs: &[Arc], cells: usize) -> Vec<f64> {
    let l = arcs[0].circumference();
    let h = l / cells as f64;
    let mids: Vec<f64> = (0..cells).map(|k| (k as f64 + 0.5) * h).collect();
    let inside: Vec<Vec<bool>> = arcs
        .iter()
        .map(|a| mids.iter().map(|&x| arc_contains(a, x)).collect())
        .collect();
    (0..arcs.len())
        .map(|i| {
            (0..cells)
                .filter(|&k| inside[i][k])
                .map(|k| (0..arcs.len()).filter(|&j| j != i && inside[j][k]).count())
                .sum::<usize>() as f64
                * h
        })
        .collect()
}

fn population() -> impl Strategy<Value = Vec<Arc>> {
    (1.0f64..1000.0, 1usize..=12).prop_flat_map(|(l, n)| {
        prop::collection::vec((0.0..1.0f64, 0.0..=1.0f64), n).prop_map(move |raw| {
            raw.into_iter()
                .map(|(c, r)| Arc::new(c * l, r * l / 2.0, l).unwrap())
                .collect()
        })
    })
}

fn pair() -> impl Strategy<Value = (Arc, Arc)> {
    (1.0f64..1000.0, 0.0..1.0f64, 0.0..=1.0f64, 0.0..1.0f64, 0.0..=1.0f64).prop_map(
        |(l, c1, r1, c2, r2)| {
            (
                Arc::new(c1 * l, r1 * l / 2.0, l).unwrap(),
                Arc::new(c2 * l, r2 * l / 2.0, l).unwrap(),
            )
        },
    )
}

proptest! {
    #[test]
    fn overlap_is_symmetric((a, b) in pair()) {
        prop_assert_eq!(arc_overlap(&a, &b).unwrap(), arc_overlap(&b, &a).unwrap());
    }

    #[test]
    fn overlap_is_bounded((a, b) in pair()) {
        let o = arc_overlap(&a, &b).unwrap();
        prop_assert!(o >= 0.0);
        prop_assert!(o <= a.length().min(b.length()));
    }

    #[test]
    fn sweep_matches_pairwise(arcs in population()) {
        let sweep = total_overlaps(&arcs).unwrap();
        let pair = total_overlaps_pairwise(&arcs).unwrap();
        for (s, p) in sweep.iter().zip(&pair) {
            prop_assert!((s - p).abs() < 1e-9, "{:?} vs {:?}", sweep, pair);
        }
    }

    #[test]
    fn translation_invariance(arcs in population(), shift in 0.0..1.0f64) {
        let l = arcs[0].circumference();
        let moved: Vec<Arc> = arcs.iter().map(|a| a.shifted(shift * l)).collect();
        let before = total_overlaps(&arcs).unwrap();
        let after = total_overlaps(&moved).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        for i in 0..arcs.len() {
            for j in 0..arcs.len() {
                let d = arc_overlap(&arcs[i], &arcs[j]).unwrap()
                    - arc_overlap(&moved[i], &moved[j]).unwrap();
                prop_assert!(d.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sum_rule(arcs in population()) {
        let total: f64 = total_overlaps(&arcs).unwrap().iter().sum();
        let mut pairs = 0.0;
        for i in 0..arcs.len() {
            for j in (i + 1)..arcs.len() {
                pairs += arc_overlap(&arcs[i], &arcs[j]).unwrap();
            }
        }
        prop_assert!((total - 2.0 * pairs).abs() < 1e-9);
    }

    #[test]
    fn neighbor_map_matches_scan(
        l in 1.0f64..100.0,
        raw in prop::collection::vec(0usize..20, 2..30),
    ) {
        // coarse positions so that coincident centers are common
        let arcs: Vec<Arc> = raw
            .iter()
            .map(|&k| Arc::new(k as f64 * l / 20.0, 0.0, l).unwrap())
            .collect();
        let fast = right_neighbors(&arcs).unwrap();
        for i in 0..arcs.len() {
            prop_assert_eq!(fast[i], nearest_right_neighbor(&arcs, i).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sweep_matches_grid_integral(arcs in population()) {
        // step 1e-4 L / N
        let cells = 10_000 * arcs.len();
        let l = arcs[0].circumference();
        let sweep = total_overlaps(&arcs).unwrap();
        let grid = grid_overlaps(&arcs, cells);
        let scale = l / arcs.len() as f64;
        for (s, g) in sweep.iter().zip(&grid) {
            prop_assert!((s - g).abs() <= 1e-3 * s.max(scale), "{:?} vs {:?}", sweep, grid);
        }
    }
}

#[test]
fn ten_random_arcs_match_pairwise_sum() {
    let mut rng = pareto_market::rng::MarketRng::from_seed(10);
    let arcs: Vec<Arc> = (0..10)
        .map(|_| Arc::new(rng.uniform(0.0, 100.0), rng.uniform(0.0, 15.0), 100.0).unwrap())
        .collect();
    let sweep = total_overlaps(&arcs).unwrap();
    let pair = total_overlaps_pairwise(&arcs).unwrap();
    assert!(sweep.iter().any(|&o| o > 0.0));
    for (s, p) in sweep.iter().zip(&pair) {
        assert!((s - p).abs() < 1e-9);
    }
}

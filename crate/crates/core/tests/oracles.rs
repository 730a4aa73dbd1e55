mod common;

use mpmd_core::metric::{GroundMetric, Point, TimedPoint};
use mpmd_core::oracles::{
    compressed_distance_matrix, greedy_offline, odd_bound_check, offline_component_matching, online_cost_of,
    opt_matching, opt_tsp, OfflineGraph, TimedPair,
};
use proptest::prelude::*;

/// Every perfect matching of `0..n`, by recursion on the lowest point.
fn all_matchings(points: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let Some((&first, rest)) = points.split_first() else { return vec![vec![]] };
    let mut out = Vec::new();
    for (i, &partner) in rest.iter().enumerate() {
        let remaining: Vec<usize> = rest.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &p)| p).collect();
        for mut tail in all_matchings(&remaining) {
            tail.insert(0, (first, partner));
            out.push(tail);
        }
    }
    out
}

fn brute_matching_weight(g: &OfflineGraph) -> f64 {
    let pts: Vec<usize> = (0..g.len()).collect();
    all_matchings(&pts).iter().map(|m| m.iter().map(|&(a, b)| g.d(a, b)).sum::<f64>()).fold(f64::INFINITY, f64::min)
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

fn brute_tsp(g: &OfflineGraph) -> f64 {
    let mut rest: Vec<usize> = (1..g.len()).collect();
    let mut perms = Vec::new();
    permutations(&mut rest, 0, &mut perms);
    perms
        .iter()
        .map(|p| {
            let mut tour = vec![0];
            tour.extend(p);
            tour.push(0);
            tour.windows(2).map(|w| g.d(w[0], w[1])).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn timed_line(pts: &[(f64, f64)]) -> OfflineGraph {
    let tps: Vec<TimedPoint> = pts.iter().map(|&(x, t)| TimedPoint::new(Point::line(x), t)).collect();
    OfflineGraph::from_points(&GroundMetric::Line, &tps)
}

fn ceil_log2(n: usize) -> f64 {
    (n as f64).log2().ceil()
}

fn graph_strategy(max_pairs: usize) -> impl Strategy<Value = OfflineGraph> {
    (1..=max_pairs)
        .prop_flat_map(|k| prop::collection::vec((0u32..20, 0u32..10), 2 * k))
        .prop_map(|v| timed_line(&v.iter().map(|&(x, t)| (x as f64, t as f64)).collect::<Vec<_>>()))
}

proptest! {
    #[test]
    fn subset_dp_matches_enumeration(g in graph_strategy(4)) {
        let dp = opt_matching(&g).unwrap();
        prop_assert!((dp.weight - brute_matching_weight(&g)).abs() < 1e-9);
        let w: f64 = dp.pairs.iter().map(|&(a, b)| g.d(a, b)).sum();
        prop_assert!((w - dp.weight).abs() < 1e-9);
    }

    #[test]
    fn held_karp_matches_enumeration(g in graph_strategy(3)) {
        prop_assert!((opt_tsp(&g).unwrap() - brute_tsp(&g)).abs() < 1e-9);
    }

    #[test]
    fn offline_algorithms_return_perfect_matchings(g in graph_strategy(5)) {
        for m in [greedy_offline(&g).unwrap(), offline_component_matching(&g).unwrap().matching] {
            let mut seen = vec![0; g.len()];
            for &(a, b) in &m.pairs {
                seen[a] += 1;
                seen[b] += 1;
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            prop_assert!(m.weight >= opt_matching(&g).unwrap().weight - 1e-9);
        }
    }

    #[test]
    fn warmup_forest_is_a_forest(g in graph_strategy(6)) {
        let cm = offline_component_matching(&g).unwrap();
        prop_assert!(cm.forest.len() < g.len());
        prop_assert!(cm.rounds <= (g.len() as f64).log2().floor() as usize + 1);
    }
}

#[test]
fn max_arrival_matching_equals_opt() {
    for i in 0..40u64 {
        let m = 2 + 2 * (i as usize % 5);
        let inst = common::mixed_instance(i, m);
        let g = OfflineGraph::from_instance(&inst);
        let ids: Vec<usize> = (0..m).collect();
        let best = all_matchings(&ids)
            .iter()
            .map(|pairs| {
                let timed: Vec<TimedPair> =
                    pairs.iter().map(|&(a, b)| TimedPair { a, b, t: g.time(a).max(g.time(b)) }).collect();
                online_cost_of(&g, &timed).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!((best - opt_matching(&g).unwrap().weight).abs() <= 1e-9, "instance {i}");
    }
}

#[test]
fn reingold_tarjan_chain() {
    // gaps 1, 0.9, 1, 2.5, 1, 0.9, 1: greedy takes the 0.9 gaps first
    let xs = [0.0, 1.0, 1.9, 2.9, 5.4, 6.4, 7.3, 8.3];
    let g = timed_line(&xs.iter().map(|&x| (x, 0.0)).collect::<Vec<_>>());
    let greedy = greedy_offline(&g).unwrap();
    let opt = opt_matching(&g).unwrap();
    let tsp = opt_tsp(&g).unwrap();
    assert!(greedy.weight > opt.weight + 1.0);
    assert!(greedy.weight <= 0.25 * (ceil_log2(8) + 1.0) * tsp + 1e-9);
    // on a line the optimal tour walks to the far end and back
    assert!((tsp - 2.0 * 8.3).abs() < 1e-9);
}

#[test]
fn greedy_within_tsp_bound_on_sweep() {
    for i in 0..60u64 {
        let n = 2 + 2 * (i as usize % 6);
        let g = OfflineGraph::from_instance(&common::mixed_instance(i, n));
        let w = greedy_offline(&g).unwrap().weight;
        assert!(w <= 0.25 * (ceil_log2(n) + 1.0) * opt_tsp(&g).unwrap() + 1e-9, "instance {i}");
    }
}

/// Random partition of `0..n` into groups, driven by `labels`.
fn partition(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = std::collections::BTreeMap::new();
    for (v, &l) in labels.iter().enumerate() {
        let i = *index.entry(l).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[i].push(v);
    }
    groups
}

proptest! {
    #[test]
    fn odd_bound_holds_for_random_partitions(g in graph_strategy(5), seed in any::<u64>()) {
        let labels: Vec<usize> = (0..g.len()).map(|i| ((seed >> (i % 60)) as usize ^ i) % 4).collect();
        let b = odd_bound_check(&partition(&labels), &g).unwrap();
        prop_assert!(b.passed, "lhs {} rhs {}", b.lhs, b.rhs);
    }

    #[test]
    fn compressed_matrix_is_symmetric(g in graph_strategy(4), seed in any::<u64>()) {
        let labels: Vec<usize> = (0..g.len()).map(|i| ((seed >> i) as usize) % 3).collect();
        let groups = partition(&labels);
        let cm = compressed_distance_matrix(&groups, &g);
        for a in 0..groups.len() {
            for b in 0..groups.len() {
                prop_assert!((cm.get(a, b) - cm.get(b, a)).abs() < 1e-9);
            }
        }
    }
}

//! Exact and offline reference algorithms on the time-augmented metric.
//!
//! These are the yardsticks for the online algorithm: subset-DP perfect
//! matching, Held–Karp TSP, the offline greedy matching and the offline
//! component matching warmup. All of them work on an [`OfflineGraph`], a
//! dense matrix of ground distances plus one time per point.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::UnionFind;
use crate::instance::Instance;
use crate::metric::{approx_eq, approx_ge, approx_lt, GroundMetric, TimedPoint, EPSILON};

/// Largest input accepted by [`opt_matching`].
pub const MATCHING_CAP: usize = 22;
/// Largest input accepted by [`opt_tsp`].
pub const TSP_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("a perfect matching needs an even number of points, got {0}")]
    OddCount(usize),
    #[error("{what} supports at most {cap} points, got {n}")]
    TooLarge { what: &'static str, n: usize, cap: usize },
    #[error("{what} needs at least {min} points, got {n}")]
    TooSmall { what: &'static str, n: usize, min: usize },
    #[error("matrix is not a valid time-augmented metric: {0}")]
    BadMatrix(String),
    #[error("pair ({a}, {b}) is matched at {t}, before its arrivals")]
    PrematureMatch { a: usize, b: usize, t: f64 },
    #[error("point {0} is out of range or used twice")]
    BadPoint(usize),
    #[error("groups do not partition the {0} points of the graph")]
    NotAPartition(usize),
}

/// Dense time-augmented metric over `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineGraph {
    n: usize,
    ground: Vec<f64>,
    times: Vec<f64>,
}

impl OfflineGraph {
    /// Points indexed by request id.
    pub fn from_instance(inst: &Instance) -> Self {
        let pts: Vec<TimedPoint> = inst.by_id().into_iter().map(|r| r.timed_point()).collect();
        Self::from_points(inst.metric(), &pts)
    }

    pub fn from_points(metric: &GroundMetric, points: &[TimedPoint]) -> Self {
        let n = points.len();
        let mut ground = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let g = metric.dist(&points[i].point, &points[j].point);
                ground[i * n + j] = g;
                ground[j * n + i] = g;
            }
        }
        OfflineGraph { n, ground, times: points.iter().map(|p| p.time).collect() }
    }

    /// Builds from an explicit ground matrix and per-point times, checking
    /// that the augmented matrix is a metric.
    pub fn from_matrix(ground: &[Vec<f64>], times: &[f64]) -> Result<Self, OracleError> {
        let n = ground.len();
        if times.len() != n {
            return Err(OracleError::BadMatrix(format!("{} times for {} points", times.len(), n)));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in ground.iter().enumerate() {
            if row.len() != n {
                return Err(OracleError::BadMatrix(format!("row {i} has {} entries", row.len())));
            }
            flat.extend_from_slice(row);
        }
        let g = OfflineGraph { n, ground: flat, times: times.to_vec() };
        for i in 0..n {
            if !times[i].is_finite() {
                return Err(OracleError::BadMatrix(format!("time {i} is not finite")));
            }
            if g.ground[i * n + i] != 0.0 {
                return Err(OracleError::BadMatrix(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = g.ground[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(OracleError::BadMatrix(format!("entry ({i}, {j}) is invalid")));
                }
                if v != g.ground[j * n + i] {
                    return Err(OracleError::BadMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if approx_lt(g.d(i, j) + g.d(j, k), g.d(i, k)) {
                        return Err(OracleError::BadMatrix(format!("triangle ({i}, {j}, {k}) violated")));
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn ground(&self, i: usize, j: usize) -> f64 {
        self.ground[i * self.n + j]
    }

    /// Time-augmented distance.
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.ground(i, j) + (self.times[i] - self.times[j]).abs()
    }

    fn pair_weight(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(a, b)| self.d(a, b)).sum()
    }
}

/// A perfect matching with pairs `(a, b)`, `a < b`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub weight: f64,
}

fn normalized(mut pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for p in &mut pairs {
        *p = (p.0.min(p.1), p.0.max(p.1));
    }
    pairs.sort_unstable();
    pairs
}

fn require_even(n: usize) -> Result<(), OracleError> {
    if n % 2 == 1 {
        Err(OracleError::OddCount(n))
    } else {
        Ok(())
    }
}

/// Exact minimum-weight perfect matching by dynamic programming over
/// subsets. The lowest remaining point is paired with the smallest partner
/// that attains the optimum.
pub fn opt_matching(g: &OfflineGraph) -> Result<Matching, OracleError> {
    let n = g.len();
    require_even(n)?;
    if n > MATCHING_CAP {
        return Err(OracleError::TooLarge { what: "opt_matching", n, cap: MATCHING_CAP });
    }
    let full = (1usize << n) - 1;
    let mut dp = vec![f64::INFINITY; full + 1];
    dp[0] = 0.0;
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut best = f64::INFINITY;
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let c = g.d(i, j) + dp[rest & !(1 << j)];
            if c < best {
                best = c;
            }
        }
        dp[mask] = best;
    }
    let mut pairs = Vec::with_capacity(n / 2);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut bits = rest;
        loop {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let next = rest & !(1 << j);
            if approx_eq(g.d(i, j) + dp[next], dp[mask]) {
                pairs.push((i, j));
                mask = next;
                break;
            }
        }
    }
    Ok(Matching { pairs: normalized(pairs), weight: dp[full] })
}

/// A matched pair with its match time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPair {
    pub a: usize,
    pub b: usize,
    pub t: f64,
}

/// Online objective: ground distance plus both waiting times, summed.
pub fn online_cost_of(g: &OfflineGraph, pairs: &[TimedPair]) -> Result<f64, OracleError> {
    let mut total = 0.0;
    for p in pairs {
        if p.a >= g.len() {
            return Err(OracleError::BadPoint(p.a));
        }
        if p.b >= g.len() {
            return Err(OracleError::BadPoint(p.b));
        }
        let (ta, tb) = (g.time(p.a), g.time(p.b));
        if !approx_ge(p.t, ta) || !approx_ge(p.t, tb) {
            return Err(OracleError::PrematureMatch { a: p.a, b: p.b, t: p.t });
        }
        total += g.ground(p.a, p.b) + (p.t - ta).max(0.0) + (p.t - tb).max(0.0);
    }
    Ok(total)
}

/// Exact shortest Hamiltonian cycle (Held–Karp).
pub fn opt_tsp(g: &OfflineGraph) -> Result<f64, OracleError> {
    let n = g.len();
    if n < 2 {
        return Err(OracleError::TooSmall { what: "opt_tsp", n, min: 2 });
    }
    if n > TSP_CAP {
        return Err(OracleError::TooLarge { what: "opt_tsp", n, cap: TSP_CAP });
    }
    // tours start and end at point 0; masks range over points 1..n
    let k = n - 1;
    let size = 1usize << k;
    let mut dp = vec![f64::INFINITY; size * k];
    for j in 0..k {
        dp[(1 << j) * k + j] = g.d(0, j + 1);
    }
    for mask in 1..size {
        for j in 0..k {
            let cur = dp[mask * k + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            let mut free = !mask & (size - 1);
            while free != 0 {
                let l = free.trailing_zeros() as usize;
                free &= free - 1;
                let next = mask | (1 << l);
                let c = cur + g.d(j + 1, l + 1);
                if c < dp[next * k + l] {
                    dp[next * k + l] = c;
                }
            }
        }
    }
    Ok((0..k).map(|j| dp[(size - 1) * k + j] + g.d(j + 1, 0)).fold(f64::INFINITY, f64::min))
}

/// Closest pair among `points`, ties to the lexicographically smallest pair.
fn closest_pair(g: &OfflineGraph, points: &[usize]) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (x, &i) in points.iter().enumerate() {
        for &j in &points[x + 1..] {
            let (a, b) = (i.min(j), i.max(j));
            let d = g.d(a, b);
            let better = match best {
                None => true,
                Some((bd, ba, bb)) => approx_lt(d, bd) || (approx_eq(d, bd) && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((d, a, b));
            }
        }
    }
    best.map(|(_, a, b)| (a, b))
}

/// Greedy on a subset: repeatedly matches the globally closest pair until
/// at most one point is left.
fn greedy_on(g: &OfflineGraph, points: &[usize]) -> (Vec<(usize, usize)>, Option<usize>) {
    let mut left: Vec<usize> = points.to_vec();
    left.sort_unstable();
    let mut pairs = Vec::new();
    while let Some((a, b)) = closest_pair(g, &left) {
        pairs.push((a, b));
        left.retain(|&x| x != a && x != b);
    }
    (pairs, left.first().copied())
}

/// Offline greedy matching.
pub fn greedy_offline(g: &OfflineGraph) -> Result<Matching, OracleError> {
    require_even(g.len())?;
    let all: Vec<usize> = (0..g.len()).collect();
    let (pairs, _) = greedy_on(g, &all);
    Ok(Matching { weight: g.pair_weight(&pairs), pairs: normalized(pairs) })
}

/// Compressed distances between groups: interior groups on a path must have
/// even size. Floyd–Warshall restricted to even intermediates.
#[derive(Debug, Clone)]
pub struct CompressedMatrix {
    k: usize,
    dist: Vec<f64>,
    next: Vec<Option<usize>>,
    hop: Vec<(usize, usize)>,
}

impl CompressedMatrix {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.k + b]
    }

    /// Realized point pairs along the path from group `a` to group `b`.
    pub fn path_edges(&self, a: usize, b: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cur = a;
        while cur != b {
            let Some(nx) = self.next[cur * self.k + b] else { break };
            out.push(self.hop[cur * self.k + nx]);
            cur = nx;
        }
        out
    }
}

pub fn compressed_distance_matrix(groups: &[Vec<usize>], g: &OfflineGraph) -> CompressedMatrix {
    let k = groups.len();
    let mut dist = vec![f64::INFINITY; k * k];
    let mut next = vec![None; k * k];
    let mut hop = vec![(0, 0); k * k];
    for a in 0..k {
        dist[a * k + a] = 0.0;
        for b in 0..k {
            if a == b {
                continue;
            }
            let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
            for &u in &groups[a] {
                for &v in &groups[b] {
                    let d = g.d(u, v);
                    let key = (u.min(v), u.max(v));
                    if approx_lt(d, best.0) || (approx_eq(d, best.0) && key < (best.1.min(best.2), best.1.max(best.2)))
                    {
                        best = (d, u, v);
                    }
                }
            }
            dist[a * k + b] = best.0;
            hop[a * k + b] = (best.1, best.2);
            if best.0.is_finite() {
                next[a * k + b] = Some(b);
            }
        }
    }
    for w in 0..k {
        if groups[w].len() % 2 == 1 {
            continue;
        }
        for a in 0..k {
            for b in 0..k {
                let via = dist[a * k + w] + dist[w * k + b];
                if a != b && approx_lt(via, dist[a * k + b]) {
                    dist[a * k + b] = via;
                    next[a * k + b] = next[a * k + w];
                }
            }
        }
    }
    CompressedMatrix { k, dist, next, hop }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    pub seq: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentMatching {
    pub matching: Matching,
    pub forest: Vec<ForestEdge>,
    pub rounds: usize,
}

/// Offline component matching: in each round every odd component joins its
/// closest odd component along a compressed shortest path, cycles are
/// broken by dropping the heaviest (then latest) edge, and each component
/// is matched greedily down to at most one free point.
pub fn offline_component_matching(g: &OfflineGraph) -> Result<ComponentMatching, OracleError> {
    let n = g.len();
    require_even(n)?;
    let mut forest: Vec<ForestEdge> = Vec::new();
    let mut matched = vec![false; n];
    let mut pairs = Vec::new();
    let mut rounds = 0;
    let max_round = if n == 0 { 0 } else { n.ilog2() as usize };
    for _ in 0..=max_round {
        if matched.iter().all(|&m| m) {
            break;
        }
        rounds += 1;
        let groups = forest_groups(n, &forest);
        let cm = compressed_distance_matrix(&groups, g);
        let odd: Vec<usize> = (0..groups.len()).filter(|&c| groups[c].len() % 2 == 1).collect();
        let mut seen: BTreeSet<(usize, usize)> = forest.iter().map(|e| (e.u, e.v)).collect();
        for &a in &odd {
            let mut target: Option<usize> = None;
            for &b in &odd {
                if b != a && target.is_none_or(|t| approx_lt(cm.get(a, b), cm.get(a, t))) {
                    target = Some(b);
                }
            }
            let Some(b) = target else { continue };
            for (u, v) in cm.path_edges(a, b) {
                let key = (u.min(v), u.max(v));
                if seen.insert(key) {
                    forest.push(ForestEdge { u: key.0, v: key.1, weight: g.d(u, v), seq: forest.len() });
                }
            }
        }
        forest = break_cycles(n, forest);
        for group in forest_groups(n, &forest) {
            let free: Vec<usize> = group.into_iter().filter(|&v| !matched[v]).collect();
            let (ps, _) = greedy_on(g, &free);
            for &(a, b) in &ps {
                matched[a] = true;
                matched[b] = true;
            }
            pairs.extend(ps);
        }
    }
    // safety net: anything left over is matched greedily across the board
    let free: Vec<usize> = (0..n).filter(|&v| !matched[v]).collect();
    pairs.extend(greedy_on(g, &free).0);
    Ok(ComponentMatching {
        matching: Matching { weight: g.pair_weight(&pairs), pairs: normalized(pairs) },
        forest,
        rounds,
    })
}

/// Kruskal by `(weight, seq)`: keeps a spanning forest, dropping for each
/// cycle its heaviest and then latest edge.
fn break_cycles(n: usize, mut edges: Vec<ForestEdge>) -> Vec<ForestEdge> {
    edges.sort_by(|a, b| a.weight.total_cmp(&b.weight).then(a.seq.cmp(&b.seq)));
    let mut uf = UnionFind::new(n);
    let mut kept: Vec<ForestEdge> = edges.into_iter().filter(|e| uf.union(e.u, e.v)).collect();
    kept.sort_by_key(|e| e.seq);
    kept
}

fn forest_groups(n: usize, forest: &[ForestEdge]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for e in forest {
        uf.union(e.u, e.v);
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for v in 0..n {
        let r = uf.find(v);
        if index[r] == usize::MAX {
            index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[r]].push(v);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddBound {
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

/// Sum over odd groups of the compressed distance to the nearest other odd
/// group, against twice the optimal matching weight.
pub fn odd_bound_check(groups: &[Vec<usize>], g: &OfflineGraph) -> Result<OddBound, OracleError> {
    let mut seen = vec![false; g.len()];
    for &v in groups.iter().flatten() {
        if v >= g.len() || seen[v] {
            return Err(OracleError::BadPoint(v));
        }
        seen[v] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(OracleError::NotAPartition(g.len()));
    }
    let w_opt = opt_matching(g)?.weight;
    let cm = compressed_distance_matrix(groups, g);
    let odd: Vec<usize> = (0..groups.len()).filter(|&c| groups[c].len() % 2 == 1).collect();
    let lhs: f64 =
        odd.iter().map(|&a| odd.iter().filter(|&&b| b != a).map(|&b| cm.get(a, b)).fold(f64::INFINITY, f64::min)).sum();
    let rhs = 2.0 * w_opt;
    Ok(OddBound { lhs, rhs, passed: lhs <= rhs + EPSILON })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Point;

    fn line(xs: &[f64]) -> OfflineGraph {
        let pts: Vec<TimedPoint> = xs.iter().map(|&x| TimedPoint::new(Point::line(x), 0.0)).collect();
        OfflineGraph::from_points(&GroundMetric::Line, &pts)
    }

    #[test]
    fn two_points() {
        let g = line(&[0.0, 3.0]);
        let m = opt_matching(&g).unwrap();
        assert_eq!(m.pairs, vec![(0, 1)]);
        assert_eq!(m.weight, 3.0);
        assert_eq!(greedy_offline(&g).unwrap(), m);
        assert_eq!(opt_tsp(&g).unwrap(), 6.0);
    }

    #[test]
    fn four_on_a_line() {
        let g = line(&[0.0, 1.0, 10.0, 11.0]);
        let m = opt_matching(&g).unwrap();
        assert_eq!(m.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(m.weight, 2.0);
        assert_eq!(greedy_offline(&g).unwrap().weight, 2.0);
        assert_eq!(opt_tsp(&g).unwrap(), 22.0);
        let cm = offline_component_matching(&g).unwrap();
        assert_eq!(cm.matching.pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(cm.matching.weight, 2.0);
    }

    #[test]
    fn co_located() {
        let g = line(&[2.0; 4]);
        assert_eq!(opt_matching(&g).unwrap().weight, 0.0);
        let cm = offline_component_matching(&g).unwrap();
        assert_eq!(cm.rounds, 1);
        assert_eq!(cm.matching.weight, 0.0);
    }

    #[test]
    fn triangle_tsp() {
        let g = OfflineGraph::from_matrix(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]], &[0.0; 3])
            .unwrap();
        assert_eq!(opt_tsp(&g).unwrap(), 3.0);
    }

    #[test]
    fn size_guards() {
        assert_eq!(opt_matching(&line(&[0.0; 3])), Err(OracleError::OddCount(3)));
        assert!(matches!(opt_matching(&line(&[0.0; 24])), Err(OracleError::TooLarge { .. })));
        assert!(matches!(opt_tsp(&line(&[0.0; 17])), Err(OracleError::TooLarge { .. })));
        assert!(matches!(opt_tsp(&line(&[0.0])), Err(OracleError::TooSmall { .. })));
        assert_eq!(greedy_offline(&line(&[0.0; 3])), Err(OracleError::OddCount(3)));
    }

    #[test]
    fn bad_matrix_rejected() {
        let r = OfflineGraph::from_matrix(&[vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]], &[0.0; 3]);
        assert!(matches!(r, Err(OracleError::BadMatrix(_))));
    }

    #[test]
    fn online_cost_formula() {
        let pts = vec![TimedPoint::new(Point::line(0.0), 0.0), TimedPoint::new(Point::line(1.0), 2.0)];
        let g = OfflineGraph::from_points(&GroundMetric::Line, &pts);
        let at_max = online_cost_of(&g, &[TimedPair { a: 0, b: 1, t: 2.0 }]).unwrap();
        assert_eq!(at_max, g.d(0, 1));
        let later = online_cost_of(&g, &[TimedPair { a: 0, b: 1, t: 5.0 }]).unwrap();
        assert_eq!(later, g.d(0, 1) + 6.0);
        assert!(matches!(
            online_cost_of(&g, &[TimedPair { a: 0, b: 1, t: 1.0 }]),
            Err(OracleError::PrematureMatch { .. })
        ));
    }

    #[test]
    fn odd_bound_tight_pair() {
        let g = line(&[0.0, 1.0]);
        let b = odd_bound_check(&[vec![0], vec![1]], &g).unwrap();
        assert_eq!((b.lhs, b.rhs, b.passed), (2.0, 2.0, true));
        let even = odd_bound_check(&[vec![0, 1]], &g).unwrap();
        assert_eq!(even.lhs, 0.0);
        assert_eq!(odd_bound_check(&[vec![0]], &g), Err(OracleError::NotAPartition(2)));
    }

    #[test]
    fn compressed_matrix_skips_odd_interior() {
        let g = line(&[0.0, 2.0, 3.0, 5.0, 6.0]);
        let even = compressed_distance_matrix(&[vec![0], vec![1, 2], vec![3]], &g);
        assert_eq!(even.get(0, 2), 4.0);
        assert_eq!(even.path_edges(0, 2), vec![(0, 1), (2, 3)]);
        let odd = compressed_distance_matrix(&[vec![0], vec![1, 2, 4], vec![3]], &g);
        assert_eq!(odd.get(0, 2), 5.0);
    }
}

//! Executable invariants and cost bounds.
//!
//! Every check is a pure predicate over exported state. Results are
//! collected in an [`AuditReport`] that counts evaluations and failures per
//! named check and keeps the context of the first few failures.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::decomposition::{Decomposition, EdgeKind, EdgeLedger, MergeRecord, UnionFind, WaitingForest};
use crate::instance::Instance;
use crate::metric::EPSILON;
use crate::oracles::{opt_matching, OfflineGraph, MATCHING_CAP};
use crate::orchestrator::MatchingResult;

/// Failures kept verbatim per report; later ones are only counted.
const MAX_FAILURES: usize = 16;

/// Which step of the algorithm issued a merge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeTrigger {
    CombineSpecial,
    CombineNearby,
    CombineRank,
    Fixup,
    Prune,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub evaluations: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: String,
    pub context: String,
}

/// Worst ratios observed against the respective bound's reference value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    /// `w(F) / OPT`.
    pub forest_weight: Option<f64>,
    /// `delta_c / w(F)`.
    pub delta_c: Option<f64>,
    /// `total / OPT`.
    pub competitive: Option<f64>,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    pub checks: BTreeMap<String, CheckSummary>,
    #[serde(default)]
    pub failures: Vec<Failure>,
    #[serde(default)]
    pub notices: Vec<String>,
    #[serde(default)]
    pub ratios: Ratios,
}

impl Default for AuditReport {
    fn default() -> Self {
        AuditReport {
            passed: true,
            checks: BTreeMap::new(),
            failures: Vec::new(),
            notices: Vec::new(),
            ratios: Ratios::default(),
        }
    }
}

impl AuditReport {
    pub fn check(&mut self, name: &str, ok: bool, context: impl FnOnce() -> String) {
        let entry = self.checks.entry(name.to_string()).or_default();
        entry.evaluations += 1;
        if !ok {
            entry.failures += 1;
            self.passed = false;
            if self.failures.len() < MAX_FAILURES {
                self.failures.push(Failure { check: name.to_string(), context: context() });
            }
        }
    }

    pub fn notice(&mut self, msg: impl Into<String>) {
        self.notices.push(msg.into());
    }

    pub fn first_failure(&self) -> Option<&Failure> {
        self.failures.first()
    }

    pub fn failure_count(&self) -> u64 {
        self.checks.values().map(|c| c.failures).sum()
    }

    pub fn absorb(&mut self, other: AuditReport) {
        for (name, s) in other.checks {
            let e = self.checks.entry(name).or_default();
            e.evaluations += s.evaluations;
            e.failures += s.failures;
        }
        self.passed &= other.passed;
        let room = MAX_FAILURES.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
        self.notices.extend(other.notices);
        self.ratios.forest_weight = max_opt(self.ratios.forest_weight, other.ratios.forest_weight);
        self.ratios.delta_c = max_opt(self.ratios.delta_c, other.ratios.delta_c);
        self.ratios.competitive = max_opt(self.ratios.competitive, other.ratios.competitive);
    }
}

/// `a <= b` with a tolerance relative to the magnitude of `b`.
fn within(a: f64, b: f64) -> bool {
    a <= b + EPSILON * b.abs().max(1.0)
}

/// `floor(log2 m)`, zero for `m <= 1`.
pub fn floor_log2(m: usize) -> u32 {
    if m <= 1 {
        0
    } else {
        m.ilog2()
    }
}

/// `H_k = 1 + 1/2 + ... + 1/k`.
pub fn harmonic(k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// `2 (L + 1)(L + H_L)` with `L = floor(log2 m)`.
pub fn forest_bound_factor(m: usize) -> f64 {
    let l = floor_log2(m);
    2.0 * (l as f64 + 1.0) * (l as f64 + harmonic(l))
}

/// `80 log2(m)^5`.
pub fn competitive_bound_factor(m: usize) -> f64 {
    80.0 * (m as f64).log2().powi(5)
}

/// Claims that hold for every merge at the moment it is issued.
pub fn check_merge_record(trigger: MergeTrigger, rec: &MergeRecord) -> AuditReport {
    let mut r = AuditReport::default();
    let ctx = || format!("{trigger:?} merge {} -> {} at rank {}", rec.from, rec.to, rec.rank);
    r.check("merge-rank-above-source", rec.rank > rec.from_rank, || {
        format!("{}: source rank {}", ctx(), rec.from_rank)
    });
    let top = rec.interior.iter().map(|i| i.1).chain([rec.from_rank, rec.to_rank]).max().unwrap_or(0);
    r.check("merge-rank-dominates", rec.rank >= top, || format!("{}: max endpoint/interior rank {top}", ctx()));
    match rec.kind {
        EdgeKind::Regular => {
            let ok = rec.closest_compatible_distance.is_some_and(|c| rec.path_weight <= c + EPSILON);
            r.check("regular-merge-closest", ok, || {
                format!(
                    "{}: path {} vs closest compatible {:?}",
                    ctx(),
                    rec.path_weight,
                    rec.closest_compatible_distance
                )
            });
        }
        EdgeKind::Special => {
            let ok = rec.interior.iter().all(|i| i.1 < rec.rank);
            r.check("special-merge-interior-rank", ok, || format!("{}: interior {:?}", ctx(), rec.interior));
        }
    }
    if trigger == MergeTrigger::CombineRank {
        r.check("rank-case-nrank-unset", rec.to_nrank.is_none(), || {
            format!("{}: target nearby rank {:?}", ctx(), rec.to_nrank)
        });
    }
    r
}

/// Structural invariants of a live decomposition and its waiting forest.
pub fn check_live_invariants(dec: &Decomposition, forest: &WaitingForest, m_seen: usize) -> AuditReport {
    let mut r = AuditReport::default();
    let cap = floor_log2(m_seen);
    let ledger = dec.ledger();
    let mut covered = 0usize;
    for c in dec.components() {
        let cid = c.cid();
        let size = c.len();
        let fits = c.rank() < usize::BITS && (1usize << c.rank()) <= size;
        r.check("rank-size", fits, || format!("component {cid}: rank {} with {size} vertices", c.rank()));
        r.check("rank-cap", c.rank() <= cap, || format!("component {cid}: rank {} > {cap}", c.rank()));
        if let Some(n) = c.nrank() {
            r.check("nrank-even-greater", !c.is_odd() && n > c.rank(), || {
                format!("component {cid}: nrank {n}, rank {}, size {size}", c.rank())
            });
        }
        let worst = c.tree().iter().filter_map(|&s| ledger.get(s)).map(|e| e.rank).max().unwrap_or(0);
        r.check("tree-edge-rank", worst <= c.rank(), || {
            format!("component {cid}: edge rank {worst} > rank {}", c.rank())
        });
        r.check("spanning-tree", spans(dec, c.vertices(), c.tree()), || {
            format!("component {cid}: {} tree edges over {size} vertices", c.tree().len())
        });
        let owned = c.vertices().iter().all(|&v| dec.component_of(v) == Some(cid));
        r.check("partition", owned, || format!("component {cid}: vertex owned elsewhere"));
        covered += size;
    }
    r.check("partition", covered == m_seen, || format!("{covered} vertices in components, {m_seen} seen"));
    r.check("ledger-acyclic", ledger.is_acyclic(), || {
        format!("edge {:?} closes a cycle", ledger.first_cycle_edge().map(|e| e.seq))
    });

    for (a, b) in forest.edges() {
        let ok = match (dec.component(a), dec.component(b)) {
            (Some(ca), Some(cb)) => ca.is_odd() && cb.is_odd() && cb.rank() < ca.rank(),
            _ => false,
        };
        r.check("waiting-edge-valid", ok, || format!("waiting edge {a} -> {b}"));
    }
    r.check("waiting-acyclic", !forest.has_cycle(), || "waiting relation has a cycle".to_string());
    for tree in forest.trees() {
        let n = tree.nodes.len();
        r.check("waiting-tree-size", n <= cap as usize + 1, || {
            format!("tree rooted at {} has {n} nodes, cap {}", tree.root, cap + 1)
        });
        let dup = forest.duplicate_rank(&tree);
        r.check("prune-no-duplicate-rank", dup.is_none(), || {
            format!("tree rooted at {} repeats rank {:?}", tree.root, dup)
        });
    }
    r
}

fn spans(dec: &Decomposition, vertices: &BTreeSet<usize>, tree: &[usize]) -> bool {
    if tree.len() + 1 != vertices.len() {
        return false;
    }
    let index: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut uf = UnionFind::new(vertices.len());
    for &s in tree {
        let Some(e) = dec.ledger().get(s) else { return false };
        match (index.get(&e.u), index.get(&e.v)) {
            (Some(&a), Some(&b)) if uf.union(a, b) => {}
            _ => return false,
        }
    }
    true
}

/// Ledger edges split by rank and kind, with the vertex partition induced
/// by every prefix forest `F_r = union of R_k and S_k for k <= r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestSnapshot {
    pub regular: Vec<Vec<usize>>,
    pub special: Vec<Vec<usize>>,
    pub partitions: Vec<Vec<Vec<usize>>>,
    weights: Vec<f64>,
}

impl ForestSnapshot {
    /// Levels `0..=max(floor(log2 m), max edge rank)` over vertices `0..m`.
    pub fn from_ledger(ledger: &EdgeLedger, m: usize) -> Self {
        let top = floor_log2(m).max(ledger.max_rank()) as usize;
        let mut regular = vec![Vec::new(); top + 1];
        let mut special = vec![Vec::new(); top + 1];
        for e in ledger.edges() {
            match e.kind {
                EdgeKind::Regular => regular[e.rank as usize].push(e.seq),
                EdgeKind::Special => special[e.rank as usize].push(e.seq),
            }
        }
        let n = ledger.edges().iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0).max(m);
        let mut uf = UnionFind::new(n);
        let mut partitions = Vec::with_capacity(top + 1);
        let mut weights = Vec::with_capacity(top + 1);
        let mut w = 0.0;
        for r in 0..=top {
            for &s in regular[r].iter().chain(&special[r]) {
                let e = &ledger.edges()[s];
                uf.union(e.u, e.v);
                w += e.weight;
            }
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for v in 0..n {
                groups.entry(uf.find(v)).or_default().push(v);
            }
            partitions.push(groups.into_values().collect());
            weights.push(w);
        }
        ForestSnapshot { regular, special, partitions, weights }
    }

    pub fn levels(&self) -> usize {
        self.weights.len()
    }

    /// `w(F_r)`.
    pub fn weight(&self, r: usize) -> f64 {
        self.weights[r.min(self.weights.len() - 1)]
    }

    /// Whether the partition at level `r` refines the one at `r + 1`.
    pub fn is_nested(&self) -> bool {
        self.partitions.windows(2).all(|w| {
            let mut owner = BTreeMap::new();
            for (i, g) in w[1].iter().enumerate() {
                for &v in g {
                    owner.insert(v, i);
                }
            }
            w[0].iter().all(|g| g.iter().all(|v| owner.get(v) == owner.get(&g[0])))
        })
    }
}

/// Checks `w(F) <= 2 (L+1)(L+H_L) OPT`; skipped beyond the exact-OPT cap.
pub fn check_forest_weight(ledger: &EdgeLedger, inst: &Instance) -> AuditReport {
    let mut r = AuditReport::default();
    let m = inst.len();
    let snap = ForestSnapshot::from_ledger(ledger, m);
    r.check("forest-rank-cap", ledger.max_rank() <= floor_log2(m), || {
        format!("edge rank {} exceeds floor(log2 {m})", ledger.max_rank())
    });
    r.check("forest-nested", snap.is_nested(), || "prefix forests are not nested".to_string());
    if m > MATCHING_CAP {
        r.notice(format!("forest-weight bound skipped: m = {m} exceeds the exact-OPT cap {MATCHING_CAP}"));
        return r;
    }
    let opt = opt_matching(&OfflineGraph::from_instance(inst)).map(|x| x.weight).unwrap_or(f64::NAN);
    let w = ledger.total_weight();
    let bound = forest_bound_factor(m) * opt;
    r.check("forest-weight-bound", within(w, bound), || format!("w(F) = {w} > {bound} (OPT {opt})"));
    if opt > 0.0 {
        r.ratios.forest_weight = Some(w / opt);
    }
    r
}

/// The cost chain of the online algorithm plus the final competitiveness
/// bound; skipped beyond the exact-OPT cap.
pub fn check_cost_bounds(result: &MatchingResult, inst: &Instance) -> AuditReport {
    let mut r = AuditReport::default();
    let m = inst.len();
    let c = &result.costs;
    if let (Some(w), Some(ints)) = (result.forest_weight, result.integrals) {
        let log = (m as f64).log2();
        let l = floor_log2(m) as f64;
        let tol = EPSILON * c.delta_c.abs().max(1.0) * (m as f64);
        r.check("odd-integral-equals-delta-c", (ints.odd - c.delta_c).abs() <= tol, || {
            format!("integral of odd components {} vs delta_c {}", ints.odd, c.delta_c)
        });
        let active_bound = 8.0 * log * w;
        r.check("active-integral-bound", within(ints.active, active_bound), || {
            format!("active integral {} > 8 log2(m) w(F) = {active_bound}", ints.active)
        });
        let dc_bound = (l + 1.0) * ints.active;
        r.check("delta-c-bound", within(c.delta_c, dc_bound), || {
            format!("delta_c {} > (L+1) * active integral = {dc_bound}", c.delta_c)
        });
        let chain = 8.0 * l * (l + 1.0) * w;
        r.check("delta-c-chain-bound", within(c.delta_c, chain), || {
            format!("delta_c {} > 8 L (L+1) w(F) = {chain}", c.delta_c)
        });
        if w > 0.0 {
            r.ratios.delta_c = Some(c.delta_c / w);
        }
        if let Some(ledger) = &result.ledger {
            r.absorb(check_forest_weight(ledger, inst));
        }
    }
    if m > MATCHING_CAP {
        r.notice(format!("competitive bound skipped: m = {m} exceeds the exact-OPT cap {MATCHING_CAP}"));
        return r;
    }
    let opt = opt_matching(&OfflineGraph::from_instance(inst)).map(|x| x.weight).unwrap_or(f64::NAN);
    r.check("total-at-least-opt", c.total >= opt - EPSILON * opt.max(1.0), || {
        format!("total {} below OPT {opt}", c.total)
    });
    if result.algorithm == "online" {
        let bound = competitive_bound_factor(m) * opt;
        r.check("competitive-bound", within(c.total, bound), || {
            format!("total {} > 80 log2(m)^5 OPT = {bound}", c.total)
        });
    }
    if opt > 0.0 {
        r.ratios.competitive = Some(c.total / opt);
    }
    r
}

/// Re-audits a saved result against its instance: matching validity, cost
/// bookkeeping, ledger consistency and the cost bounds.
pub fn audit_result(result: &MatchingResult, inst: &Instance) -> AuditReport {
    let mut r = AuditReport::default();
    let m = inst.len();
    let by_id = inst.by_id();
    r.check("result-size", result.m == m, || format!("result covers {} requests, instance has {m}", result.m));
    let mut seen = vec![0u32; m];
    let mut space = 0.0;
    let mut time = 0.0;
    let mut in_range = true;
    for p in &result.pairs {
        if p.a >= m || p.b >= m || p.a == p.b {
            in_range = false;
            continue;
        }
        seen[p.a] += 1;
        seen[p.b] += 1;
        let (ra, rb) = (by_id[p.a], by_id[p.b]);
        r.check("match-after-arrival", p.t >= ra.arrival.max(rb.arrival) - EPSILON, || {
            format!("pair ({}, {}) matched at {} before arrival", p.a, p.b, p.t)
        });
        space += inst.metric().dist(&ra.point, &rb.point);
        time += (p.t - ra.arrival) + (p.t - rb.arrival);
    }
    r.check("perfect-matching", in_range && seen.iter().all(|&s| s == 1), || {
        let bad: Vec<usize> = (0..m).filter(|&i| seen[i] != 1).collect();
        format!("requests matched other than once: {bad:?}")
    });
    let c = &result.costs;
    let close = |a: f64, b: f64| (a - b).abs() <= EPSILON * b.abs().max(1.0) * (m.max(1) as f64);
    r.check(
        "costs-consistent",
        close(c.space, space) && close(c.time, time) && close(c.total, c.space + c.time),
        || format!("reported space {} time {} total {}, recomputed {space} and {time}", c.space, c.time, c.total),
    );
    if let Some(ledger) = &result.ledger {
        r.check("ledger-acyclic", ledger.is_acyclic(), || "ledger has a cycle".to_string());
        let weights_ok = ledger.edges().iter().enumerate().all(|(i, e)| {
            e.seq == i
                && e.u < m
                && e.v < m
                && close(e.weight, inst.metric().augmented(&by_id[e.u].timed_point(), &by_id[e.v].timed_point()))
        });
        r.check("ledger-weights", weights_ok, || "ledger edge weight or endpoint mismatch".to_string());
        if let Some(w) = result.forest_weight {
            r.check("forest-weight-consistent", close(w, ledger.total_weight()), || {
                format!("reported w(F) {w}, ledger sums to {}", ledger.total_weight())
            });
        }
    }
    r.absorb(check_cost_bounds(result, inst));
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{EdgeLedger, LedgerEdge};
    use crate::metric::{GroundMetric, Point, TimedRequest};
    use std::sync::Arc;

    fn req(id: usize, x: f64, t: f64) -> TimedRequest {
        TimedRequest::new(id, Point::line(x), t)
    }

    #[test]
    fn fresh_singleton_passes() {
        let mut d = Decomposition::new(Arc::new(GroundMetric::Line));
        d.add_singleton(&req(0, 0.0, 0.0)).unwrap();
        let r = check_live_invariants(&d, &WaitingForest::default(), 1);
        assert!(r.passed, "{:?}", r.failures);
    }

    #[test]
    fn oversized_rank_fails() {
        let mut d = Decomposition::new(Arc::new(GroundMetric::Line));
        d.insert_component(&[req(0, 0.0, 0.0), req(1, 1.0, 0.0), req(2, 2.0, 0.0)], 2, None).unwrap();
        let r = check_live_invariants(&d, &WaitingForest::default(), 3);
        assert!(!r.passed);
        assert_eq!(r.checks["rank-size"].failures, 1);
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(3) - 11.0 / 6.0).abs() < 1e-12);
        assert_eq!(forest_bound_factor(2), 8.0);
        assert_eq!(competitive_bound_factor(2), 80.0);
    }

    #[test]
    fn forest_snapshot_levels() {
        let mk = |u, v, rank, kind, seq| LedgerEdge { u, v, weight: 1.0, rank, kind, seq };
        let ledger = EdgeLedger::from_edges(vec![
            mk(0, 1, 1, EdgeKind::Regular, 0),
            mk(2, 3, 1, EdgeKind::Special, 1),
            mk(1, 2, 2, EdgeKind::Regular, 2),
        ]);
        let s = ForestSnapshot::from_ledger(&ledger, 4);
        assert_eq!(s.levels(), 3);
        assert_eq!(s.partitions[0].len(), 4);
        assert_eq!(s.partitions[1].len(), 2);
        assert_eq!(s.partitions[2].len(), 1);
        assert_eq!(s.weight(1), 2.0);
        assert_eq!(s.weight(2), 3.0);
        assert!(s.is_nested());
    }

    #[test]
    fn report_absorb_keeps_worst_ratio() {
        let mut a = AuditReport::default();
        a.ratios.competitive = Some(2.0);
        let mut b = AuditReport::default();
        b.ratios.competitive = Some(3.0);
        b.check("x", false, || "boom".into());
        a.absorb(b);
        assert!(!a.passed);
        assert_eq!(a.ratios.competitive, Some(3.0));
        assert_eq!(a.first_failure().unwrap().check, "x");
    }
}

//! Live component decomposition over the requests seen so far.
//!
//! Each component carries a spanning tree whose edges live in a global
//! [`EdgeLedger`], a rank, an optional nearby rank, a representative and the
//! latest arrival time among its vertices. Components are joined by merges
//! along shortest paths of the compressed distance `D`, in which even
//! components may be crossed for free but odd ones may not.
//!
//! `D` is recomputed on demand with a dense Dijkstra over the live
//! components. Ties are broken deterministically: realized vertex pairs by
//! `(min id, max id)`, candidate components by smallest cid.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{approx_eq, approx_ge, approx_lt, GroundMetric, RequestId, TimedPoint, TimedRequest};

/// Component id, assigned in creation order and never reused.
pub type Cid = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecompositionError {
    #[error("component {0} is not live")]
    DeadComponent(Cid),
    #[error("component {0} is even; an odd component is required")]
    NotOdd(Cid),
    #[error("cannot merge component {0} into itself")]
    SelfMerge(Cid),
    #[error("request {0} is already part of the decomposition")]
    DuplicateRequest(RequestId),
    #[error("components need at least one vertex")]
    EmptyComponent,
    #[error("merge path from {from} to {to} crosses odd component {interior}")]
    OddInterior { from: Cid, to: Cid, interior: Cid },
    #[error("component {to} is unreachable from {from}")]
    Unreachable { from: Cid, to: Cid },
    #[error("nearby fixup from {cid} found no component with rank >= {nrank} or nearby rank >= {next}", next = nrank + 1)]
    NoFixupTarget { cid: Cid, nrank: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Regular,
    Special,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEdge {
    pub u: RequestId,
    pub v: RequestId,
    pub weight: f64,
    pub rank: u32,
    pub kind: EdgeKind,
    pub seq: usize,
}

/// Every edge ever added by a merge, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeLedger {
    edges: Vec<LedgerEdge>,
}

impl EdgeLedger {
    pub fn from_edges(edges: Vec<LedgerEdge>) -> Self {
        EdgeLedger { edges }
    }

    pub fn edges(&self) -> &[LedgerEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn get(&self, seq: usize) -> Option<&LedgerEdge> {
        self.edges.get(seq)
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn max_rank(&self) -> u32 {
        self.edges.iter().map(|e| e.rank).max().unwrap_or(0)
    }

    fn push(&mut self, u: RequestId, v: RequestId, weight: f64, rank: u32, kind: EdgeKind) -> usize {
        let seq = self.edges.len();
        self.edges.push(LedgerEdge { u: u.min(v), v: u.max(v), weight, rank, kind, seq });
        seq
    }

    /// First edge (by insertion) that closes a cycle, if any.
    pub fn first_cycle_edge(&self) -> Option<&LedgerEdge> {
        let n = self.edges.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0);
        let mut uf = UnionFind::new(n);
        self.edges.iter().find(|e| !uf.union(e.u, e.v))
    }

    pub fn is_acyclic(&self) -> bool {
        self.first_cycle_edge().is_none()
    }
}

/// Minimal union-find used for forest checks.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    cid: Cid,
    vertices: BTreeSet<RequestId>,
    tree: Vec<usize>,
    rank: u32,
    nrank: Option<u32>,
    repr: RequestId,
    t_max: f64,
}

impl Component {
    pub fn cid(&self) -> Cid {
        self.cid
    }
    pub fn vertices(&self) -> &BTreeSet<RequestId> {
        &self.vertices
    }
    /// Ledger sequence numbers of the spanning-tree edges.
    pub fn tree(&self) -> &[usize] {
        &self.tree
    }
    pub fn rank(&self) -> u32 {
        self.rank
    }
    pub fn nrank(&self) -> Option<u32> {
        self.nrank
    }
    pub fn repr(&self) -> RequestId {
        self.repr
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn len(&self) -> usize {
        self.vertices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
    pub fn is_odd(&self) -> bool {
        self.vertices.len() % 2 == 1
    }

    /// Whether `self` may serve as a merge target for the odd component `source`.
    pub fn is_compatible_with(&self, source: &Component) -> bool {
        self.is_odd() || self.rank >= source.rank || self.nrank.is_some_and(|n| n > source.rank)
    }
}

/// One hop of a compressed path: the realized edge `(u, v)` with `u` in
/// `from` and `v` in `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub from: Cid,
    pub to: Cid,
    pub u: RequestId,
    pub v: RequestId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedPath {
    pub value: f64,
    pub hops: Vec<Hop>,
}

impl CompressedPath {
    /// Components strictly between the endpoints.
    pub fn interior(&self) -> Vec<Cid> {
        self.hops.iter().skip(1).map(|h| h.from).collect()
    }
}

/// Single-source compressed distances from one component.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    source: Cid,
    nodes: Vec<Cid>,
    dist: Vec<f64>,
    pred: Vec<Option<(usize, RequestId, RequestId, f64)>>,
}

impl ShortestPaths {
    pub fn source(&self) -> Cid {
        self.source
    }

    fn index(&self, cid: Cid) -> Option<usize> {
        self.nodes.binary_search(&cid).ok()
    }

    pub fn distance(&self, cid: Cid) -> Option<f64> {
        self.index(cid).map(|i| self.dist[i])
    }

    /// `(cid, D(source, cid))` for every live component other than the source.
    pub fn others(&self) -> impl Iterator<Item = (Cid, f64)> + '_ {
        self.nodes.iter().zip(&self.dist).filter(move |(c, _)| **c != self.source).map(|(c, d)| (*c, *d))
    }

    pub fn path_to(&self, target: Cid) -> Option<CompressedPath> {
        let mut i = self.index(target)?;
        if !self.dist[i].is_finite() {
            return None;
        }
        let value = self.dist[i];
        let mut hops = Vec::new();
        while let Some((p, u, v, w)) = self.pred[i] {
            hops.push(Hop { from: self.nodes[p], to: self.nodes[i], u, v, weight: w });
            i = p;
        }
        hops.reverse();
        Some(CompressedPath { value, hops })
    }
}

/// Where an odd component would merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Component(Cid),
    /// No compatible component exists; the distance is `+inf`.
    Fake,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closest {
    pub target: Target,
    pub distance: f64,
}

/// What the combining step does with one odd component at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombineAction {
    /// The waiting threshold `t_max + 2l` has not been reached.
    NotReady,
    /// A late, nearby component `c3` gets pulled in by a special merge.
    Special { c3: Cid },
    /// Regular merge into a target whose nearby rank exceeds our rank.
    Nearby { c2: Cid },
    /// Regular merge into a target of at least our rank (bumped on equality).
    Rank { c2: Cid, bump: bool },
    /// The target is odd with strictly lower rank: a waiting edge.
    Wait { c2: Cid },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombineDecision {
    pub c1: Cid,
    pub closest: Closest,
    pub threshold: f64,
    pub action: CombineAction,
}

/// Everything needed to audit a merge after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub kind: EdgeKind,
    pub from: Cid,
    pub to: Cid,
    pub rank: u32,
    pub from_rank: u32,
    pub to_rank: u32,
    pub from_odd: bool,
    pub to_nrank: Option<u32>,
    /// `(cid, rank, odd)` of each absorbed interior component.
    pub interior: Vec<(Cid, u32, bool)>,
    pub edges: Vec<usize>,
    pub path_weight: f64,
    /// `D` from `from` to its closest compatible component before the merge.
    pub closest_compatible_distance: Option<f64>,
    pub nrank_raised: Vec<(Cid, u32)>,
}

/// The derived waiting relation among odd components.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaitingForest {
    parent: BTreeMap<Cid, Cid>,
    ranks: BTreeMap<Cid, u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTree {
    pub root: Cid,
    /// All nodes including the root, ascending by cid.
    pub nodes: Vec<Cid>,
}

impl WaitingForest {
    pub fn from_edges(edges: impl IntoIterator<Item = (Cid, Cid)>, ranks: BTreeMap<Cid, u32>) -> Self {
        WaitingForest { parent: edges.into_iter().collect(), ranks }
    }

    /// Waiting edges `(waiter, waitee)`, ascending by waiter.
    pub fn edges(&self) -> impl Iterator<Item = (Cid, Cid)> + '_ {
        self.parent.iter().map(|(a, b)| (*a, *b))
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn is_waiting(&self, cid: Cid) -> bool {
        self.parent.contains_key(&cid)
    }

    pub fn parent(&self, cid: Cid) -> Option<Cid> {
        self.parent.get(&cid).copied()
    }

    pub fn rank(&self, cid: Cid) -> Option<u32> {
        self.ranks.get(&cid).copied()
    }

    /// Walks towards the root; `None` if a cycle is met.
    pub fn root_of(&self, cid: Cid) -> Option<Cid> {
        let mut cur = cid;
        for _ in 0..=self.parent.len() {
            match self.parent.get(&cur) {
                Some(&p) => cur = p,
                None => return Some(cur),
            }
        }
        None
    }

    pub fn has_cycle(&self) -> bool {
        self.parent.keys().any(|&c| self.root_of(c).is_none())
    }

    /// Trees with at least one edge, ordered by root cid.
    pub fn trees(&self) -> Vec<WaitingTree> {
        let mut by_root: BTreeMap<Cid, BTreeSet<Cid>> = BTreeMap::new();
        for &c in self.parent.keys() {
            if let Some(root) = self.root_of(c) {
                let set = by_root.entry(root).or_default();
                set.insert(c);
                set.insert(root);
            }
        }
        by_root.into_iter().map(|(root, nodes)| WaitingTree { root, nodes: nodes.into_iter().collect() }).collect()
    }

    /// Path from `cid` up to its root, inclusive.
    pub fn ancestors(&self, cid: Cid) -> Vec<Cid> {
        let mut out = vec![cid];
        let mut cur = cid;
        while let Some(&p) = self.parent.get(&cur) {
            if out.len() > self.parent.len() + 1 {
                break;
            }
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn lca(&self, a: Cid, b: Cid) -> Option<Cid> {
        let up: BTreeSet<Cid> = self.ancestors(a).into_iter().collect();
        self.ancestors(b).into_iter().find(|c| up.contains(c))
    }

    /// Strict descendants of `cid`.
    pub fn descendants(&self, cid: Cid) -> Vec<Cid> {
        self.parent.keys().copied().filter(|&c| c != cid && self.ancestors(c).contains(&cid)).collect()
    }

    /// Smallest rank shared by two nodes of `tree`, with the two smallest
    /// cids holding it.
    pub fn duplicate_rank(&self, tree: &WaitingTree) -> Option<(u32, Cid, Cid)> {
        let mut by_rank: BTreeMap<u32, Vec<Cid>> = BTreeMap::new();
        for &c in &tree.nodes {
            by_rank.entry(self.ranks.get(&c).copied().unwrap_or(0)).or_default().push(c);
        }
        by_rank.into_iter().find(|(_, cs)| cs.len() >= 2).map(|(r, cs)| (r, cs[0], cs[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSnapshot {
    pub cid: Cid,
    pub vertices: Vec<RequestId>,
    pub tree: Vec<usize>,
    pub rank: u32,
    pub nrank: Option<u32>,
    pub repr: RequestId,
    pub t_max: f64,
}

/// JSON-friendly dump of the live components and the full edge ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSnapshot {
    pub components: Vec<ComponentSnapshot>,
    pub ledger: EdgeLedger,
}

/// Closest vertex pair between two components, `u` on the row side.
#[derive(Debug, Clone, Copy)]
struct Gap {
    d: f64,
    u: RequestId,
    v: RequestId,
}

impl Gap {
    const NONE: Gap = Gap { d: f64::INFINITY, u: usize::MAX, v: usize::MAX };

    fn key(&self) -> (RequestId, RequestId) {
        (self.u.min(self.v), self.u.max(self.v))
    }

    fn beats(&self, other: &Gap) -> bool {
        approx_lt(self.d, other.d) || (approx_eq(self.d, other.d) && self.key() < other.key())
    }

    fn flip(self) -> Gap {
        Gap { d: self.d, u: self.v, v: self.u }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    metric: Arc<GroundMetric>,
    points: Vec<Option<TimedPoint>>,
    owner: Vec<Option<Cid>>,
    components: BTreeMap<Cid, Component>,
    ledger: EdgeLedger,
    next_cid: Cid,
    seen: usize,
    // gaps[a][b] between live components a and b; rows of dead cids are stale
    gaps: Vec<Vec<Gap>>,
}

impl Decomposition {
    pub fn new(metric: Arc<GroundMetric>) -> Self {
        Decomposition {
            metric,
            points: Vec::new(),
            owner: Vec::new(),
            components: BTreeMap::new(),
            ledger: EdgeLedger::default(),
            next_cid: 0,
            seen: 0,
            gaps: Vec::new(),
        }
    }

    pub fn metric(&self) -> &GroundMetric {
        &self.metric
    }

    pub fn ledger(&self) -> &EdgeLedger {
        &self.ledger
    }

    /// Number of requests registered so far.
    pub fn requests_seen(&self) -> usize {
        self.seen
    }

    pub fn component(&self, cid: Cid) -> Option<&Component> {
        self.components.get(&cid)
    }

    fn live(&self, cid: Cid) -> Result<&Component, DecompositionError> {
        self.components.get(&cid).ok_or(DecompositionError::DeadComponent(cid))
    }

    fn live_mut(&mut self, cid: Cid) -> Result<&mut Component, DecompositionError> {
        self.components.get_mut(&cid).ok_or(DecompositionError::DeadComponent(cid))
    }

    /// Live components ascending by cid.
    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.components.values()
    }

    pub fn live_cids(&self) -> Vec<Cid> {
        self.components.keys().copied().collect()
    }

    pub fn odd_cids(&self) -> Vec<Cid> {
        self.components.values().filter(|c| c.is_odd()).map(|c| c.cid).collect()
    }

    pub fn component_of(&self, id: RequestId) -> Option<Cid> {
        self.owner.get(id).copied().flatten()
    }

    pub fn point(&self, id: RequestId) -> Option<&TimedPoint> {
        self.points.get(id).and_then(|p| p.as_ref())
    }

    /// Time-augmented distance between two registered requests.
    pub fn distance(&self, u: RequestId, v: RequestId) -> f64 {
        let pu = self.points[u].as_ref().expect("registered request");
        let pv = self.points[v].as_ref().expect("registered request");
        self.metric.augmented(pu, pv)
    }

    fn register(&mut self, r: &TimedRequest) -> Result<(), DecompositionError> {
        if self.point(r.id).is_some() {
            return Err(DecompositionError::DuplicateRequest(r.id));
        }
        if self.points.len() <= r.id {
            self.points.resize(r.id + 1, None);
            self.owner.resize(r.id + 1, None);
        }
        self.points[r.id] = Some(r.timed_point());
        self.seen += 1;
        Ok(())
    }

    /// A fresh rank-0 singleton for a newly arrived request.
    pub fn add_singleton(&mut self, r: &TimedRequest) -> Result<Cid, DecompositionError> {
        self.insert_component(std::slice::from_ref(r), 0, None)
    }

    /// Inserts a component over `members` with a path spanning tree in the
    /// given order. Tree edges are regular with the component's rank.
    ///
    /// Used for fixtures; the online algorithm only creates singletons.
    pub fn insert_component(
        &mut self,
        members: &[TimedRequest],
        rank: u32,
        nrank: Option<u32>,
    ) -> Result<Cid, DecompositionError> {
        if members.is_empty() {
            return Err(DecompositionError::EmptyComponent);
        }
        for r in members {
            self.register(r)?;
        }
        let cid = self.next_cid;
        self.next_cid += 1;
        let mut tree = Vec::new();
        for w in members.windows(2) {
            let weight = self.distance(w[0].id, w[1].id);
            tree.push(self.ledger.push(w[0].id, w[1].id, weight, rank, EdgeKind::Regular));
        }
        for r in members {
            self.owner[r.id] = Some(cid);
        }
        let t_max = members.iter().map(|r| r.arrival).fold(f64::NEG_INFINITY, f64::max);
        for row in &mut self.gaps {
            row.resize(cid + 1, Gap::NONE);
        }
        self.gaps.push(vec![Gap::NONE; cid + 1]);
        for other in self.components.keys().copied().collect::<Vec<_>>() {
            let mut best = Gap::NONE;
            for r in members {
                for &v in &self.components[&other].vertices {
                    let g = Gap { d: self.distance(r.id, v), u: r.id, v };
                    if g.beats(&best) {
                        best = g;
                    }
                }
            }
            self.gaps[cid][other] = best;
            self.gaps[other][cid] = best.flip();
        }
        self.components.insert(
            cid,
            Component {
                cid,
                vertices: members.iter().map(|r| r.id).collect(),
                tree,
                rank,
                nrank,
                repr: members[0].id,
                t_max,
            },
        );
        Ok(cid)
    }

    pub fn set_rank(&mut self, cid: Cid, rank: u32) -> Result<(), DecompositionError> {
        self.live_mut(cid)?.rank = rank;
        Ok(())
    }

    pub fn set_nrank(&mut self, cid: Cid, nrank: Option<u32>) -> Result<(), DecompositionError> {
        self.live_mut(cid)?.nrank = nrank;
        Ok(())
    }

    fn gap(&self, a: Cid, b: Cid) -> Gap {
        self.gaps[a][b]
    }

    /// Dense Dijkstra over the live components; only the source and even
    /// components are expanded.
    pub fn shortest_paths_from(&self, source: Cid) -> Result<ShortestPaths, DecompositionError> {
        self.live(source)?;
        let nodes: Vec<Cid> = self.components.keys().copied().collect();
        let comps: Vec<&Component> = self.components.values().collect();
        let k = nodes.len();
        let s = nodes.binary_search(&source).expect("live");
        let mut dist = vec![f64::INFINITY; k];
        let mut pred = vec![None; k];
        let mut done = vec![false; k];
        dist[s] = 0.0;
        loop {
            let mut pick: Option<usize> = None;
            for i in 0..k {
                if !done[i] && dist[i].is_finite() && pick.is_none_or(|p| approx_lt(dist[i], dist[p])) {
                    pick = Some(i);
                }
            }
            let Some(i) = pick else { break };
            done[i] = true;
            if i != s && comps[i].is_odd() {
                continue;
            }
            for j in 0..k {
                if done[j] {
                    continue;
                }
                let g = self.gap(nodes[i], nodes[j]);
                let cand = dist[i] + g.d;
                if approx_lt(cand, dist[j]) {
                    dist[j] = cand;
                    pred[j] = Some((i, g.u, g.v, g.d));
                }
            }
        }
        Ok(ShortestPaths { source, nodes, dist, pred })
    }

    /// `D(a, b)` with the realized path.
    pub fn compressed_distance(&self, a: Cid, b: Cid) -> Result<CompressedPath, DecompositionError> {
        self.live(b)?;
        let sp = self.shortest_paths_from(a)?;
        Ok(sp.path_to(b).unwrap_or(CompressedPath { value: f64::INFINITY, hops: Vec::new() }))
    }

    fn pick_min(&self, sp: &ShortestPaths, mut pred: impl FnMut(&Component) -> bool) -> Option<(Cid, f64)> {
        let mut best: Option<(Cid, f64)> = None;
        for (cid, d) in sp.others() {
            if !d.is_finite() || !pred(&self.components[&cid]) {
                continue;
            }
            if best.is_none_or(|(_, bd)| approx_lt(d, bd)) {
                best = Some((cid, d));
            }
        }
        best
    }

    fn closest_in(&self, c1: &Component, sp: &ShortestPaths) -> Closest {
        match self.pick_min(sp, |c| c.is_compatible_with(c1)) {
            Some((cid, d)) => Closest { target: Target::Component(cid), distance: d },
            None => Closest { target: Target::Fake, distance: f64::INFINITY },
        }
    }

    /// Closest compatible component of the odd component `c1`.
    pub fn closest_compatible(&self, c1: Cid) -> Result<Closest, DecompositionError> {
        let comp = self.live(c1)?;
        if !comp.is_odd() {
            return Err(DecompositionError::NotOdd(c1));
        }
        let sp = self.shortest_paths_from(c1)?;
        Ok(self.closest_in(comp, &sp))
    }

    /// Classifies what the combining step does with `c1` at time `t`.
    pub fn combine_decision(&self, c1: Cid, t: f64) -> Result<CombineDecision, DecompositionError> {
        let comp = self.live(c1)?;
        if !comp.is_odd() {
            return Err(DecompositionError::NotOdd(c1));
        }
        let sp = self.shortest_paths_from(c1)?;
        let closest = self.closest_in(comp, &sp);
        let l = closest.distance;
        let threshold = comp.t_max + 2.0 * l;
        let mut decision = CombineDecision { c1, closest, threshold, action: CombineAction::NotReady };
        let Target::Component(c2) = closest.target else {
            return Ok(decision);
        };
        if !approx_ge(t, threshold) {
            return Ok(decision);
        }
        let radius = l / (comp.rank as f64 + 2.0);
        let late = sp
            .others()
            .find(|&(cid, d)| approx_lt(d, radius) && approx_ge(self.components[&cid].t_max, comp.t_max + l));
        let target = &self.components[&c2];
        decision.action = if let Some((c3, _)) = late {
            CombineAction::Special { c3 }
        } else if target.nrank.is_some_and(|n| n > comp.rank) {
            CombineAction::Nearby { c2 }
        } else if target.rank >= comp.rank {
            CombineAction::Rank { c2, bump: target.rank == comp.rank }
        } else {
            CombineAction::Wait { c2 }
        };
        Ok(decision)
    }

    /// Waiting edges among odd components at time `t`.
    pub fn waiting_forest(&self, t: f64) -> Result<WaitingForest, DecompositionError> {
        let mut edges = Vec::new();
        for c1 in self.odd_cids() {
            if let CombineAction::Wait { c2 } = self.combine_decision(c1, t)?.action {
                edges.push((c1, c2));
            }
        }
        let ranks = self.components.values().map(|c| (c.cid, c.rank)).collect();
        Ok(WaitingForest::from_edges(edges, ranks))
    }

    fn merge(&mut self, from: Cid, to: Cid, rank: u32, kind: EdgeKind) -> Result<MergeRecord, DecompositionError> {
        if from == to {
            return Err(DecompositionError::SelfMerge(from));
        }
        let source = self.live(from)?.clone();
        let target = self.live(to)?.clone();
        let sp = self.shortest_paths_from(from)?;
        let path = sp.path_to(to).ok_or(DecompositionError::Unreachable { from, to })?;
        let interior = path.interior();
        let mut interior_info = Vec::with_capacity(interior.len());
        for &c in &interior {
            let comp = &self.components[&c];
            if comp.is_odd() {
                return Err(DecompositionError::OddInterior { from, to, interior: c });
            }
            interior_info.push((c, comp.rank, false));
        }
        let closest_compatible_distance =
            Some(self.closest_in(&source, &sp).distance).filter(|d| source.is_odd() && d.is_finite());

        let mut nrank_raised = Vec::new();
        if kind == EdgeKind::Regular {
            let radius = path.value / (rank as f64 + 1.0);
            let near: Vec<Cid> = sp
                .others()
                .filter(|&(cid, d)| approx_lt(d, radius) && !interior.contains(&cid))
                .map(|(cid, _)| cid)
                .collect();
            for cid in near {
                let comp = self.components.get_mut(&cid).expect("live");
                let raised = comp.nrank.map_or(rank, |n| n.max(rank));
                if comp.nrank != Some(raised) {
                    comp.nrank = Some(raised);
                    nrank_raised.push((cid, raised));
                }
            }
        }

        let mut edges = Vec::with_capacity(path.hops.len());
        for hop in &path.hops {
            edges.push(self.ledger.push(hop.u, hop.v, hop.weight, rank, kind));
        }
        let mut absorbed = vec![from];
        absorbed.extend(&interior);
        let mut moved_vertices = Vec::new();
        let mut moved_tree = Vec::new();
        for c in absorbed {
            let comp = self.components.remove(&c).expect("live");
            moved_vertices.extend(comp.vertices);
            moved_tree.extend(comp.tree);
        }
        for &v in &moved_vertices {
            self.owner[v] = Some(to);
        }
        let t_max = moved_vertices
            .iter()
            .map(|&v| self.points[v].as_ref().expect("registered").time)
            .fold(target.t_max, f64::max);
        for other in self.components.keys().copied().filter(|&c| c != to).collect::<Vec<_>>() {
            let mut best = self.gaps[to][other];
            for &x in std::iter::once(&from).chain(&interior) {
                if self.gaps[x][other].beats(&best) {
                    best = self.gaps[x][other];
                }
            }
            self.gaps[to][other] = best;
            self.gaps[other][to] = best.flip();
        }
        let survivor = self.components.get_mut(&to).expect("live");
        survivor.vertices.extend(moved_vertices);
        survivor.tree.extend(moved_tree);
        survivor.tree.extend(&edges);
        survivor.t_max = t_max;

        Ok(MergeRecord {
            kind,
            from,
            to,
            rank,
            from_rank: source.rank,
            to_rank: target.rank,
            from_odd: source.is_odd(),
            to_nrank: target.nrank,
            interior: interior_info,
            edges,
            path_weight: path.value,
            closest_compatible_distance,
            nrank_raised,
        })
    }

    /// Absorbs `from` and the even components on its shortest path into
    /// `to`; new edges are special with rank `rank`.
    pub fn special_merge(&mut self, from: Cid, to: Cid, rank: u32) -> Result<MergeRecord, DecompositionError> {
        self.merge(from, to, rank, EdgeKind::Special)
    }

    /// Like [`Decomposition::special_merge`] with regular edges; first raises
    /// the nearby rank of every component strictly within `D(from, to) / (rank + 1)`
    /// of `from` that is not absorbed by the merge.
    pub fn regular_merge(&mut self, from: Cid, to: Cid, rank: u32) -> Result<MergeRecord, DecompositionError> {
        self.merge(from, to, rank, EdgeKind::Regular)
    }

    /// Keeps merging `c1` into its closest sufficiently large neighbour while
    /// it has a nearby rank. Returns the final component and the merges.
    pub fn nearby_fixup(&mut self, c1: Cid) -> Result<(Cid, Vec<MergeRecord>), DecompositionError> {
        let mut cur = c1;
        let mut records = Vec::new();
        while let Some(n) = self.live(cur)?.nrank {
            let sp = self.shortest_paths_from(cur)?;
            let (c2, _) = self
                .pick_min(&sp, |c| c.rank >= n || c.nrank.is_some_and(|m| m > n))
                .ok_or(DecompositionError::NoFixupTarget { cid: cur, nrank: n })?;
            let target = &self.components[&c2];
            let rank = target.rank.max(target.nrank.unwrap_or(0));
            records.push(self.special_merge(cur, c2, rank)?);
            cur = c2;
        }
        Ok((cur, records))
    }

    pub fn snapshot(&self) -> DecompositionSnapshot {
        DecompositionSnapshot {
            components: self
                .components
                .values()
                .map(|c| ComponentSnapshot {
                    cid: c.cid,
                    vertices: c.vertices.iter().copied().collect(),
                    tree: c.tree.clone(),
                    rank: c.rank,
                    nrank: c.nrank,
                    repr: c.repr,
                    t_max: c.t_max,
                })
                .collect(),
            ledger: self.ledger.clone(),
        }
    }
}

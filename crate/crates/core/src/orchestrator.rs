//! Event-driven driver for the online algorithm.
//!
//! The clock jumps between event times: arrivals, combine thresholds
//! `t_max + 2l` and greedy thresholds. At each event time the pipeline is
//! receive, then combine and prune until neither merges, then greedy. The
//! number of odd and of active (odd, not waiting) components is constant
//! between events, so their time integrals are accumulated exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit::{self, AuditReport, MergeTrigger};
use crate::decomposition::{
    Cid, CombineAction, Decomposition, DecompositionError, EdgeLedger, MergeRecord, WaitingForest,
};
use crate::greedy::{GreedyError, GreedyInstance, Owner};
use crate::instance::Instance;
use crate::metric::{approx_ge, approx_lt, GroundMetric, MetricError, RequestId, TimedRequest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Greedy(#[from] GreedyError),
    #[error("request {id}: {source}")]
    Metric { id: RequestId, source: MetricError },
    #[error("request id {0} appears twice")]
    DuplicateId(RequestId),
    #[error("step called at time {got} but the clock is at {clock}")]
    ClockMismatch { clock: f64, got: f64 },
    #[error("no further event at time {clock} but {unmatched} request(s) are unmatched")]
    Stuck { clock: f64, unmatched: usize },
    #[error("audit check `{check}` failed at time {time} (event {event_index}): {detail}")]
    Audit { check: String, detail: String, time: f64, event_index: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub audit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankCause {
    Combine,
    Prune,
}

/// Append-only audit trail of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Event {
    Arrival { t: f64, id: RequestId, cid: Cid },
    RankIncrease { t: f64, cid: Cid, from: u32, to: u32, cause: RankCause },
    Merge { t: f64, trigger: MergeTrigger, record: MergeRecord },
    Attach { t: f64, owner: RequestId, a: RequestId, b: RequestId },
    Match { t: f64, owner: RequestId, a: RequestId, b: RequestId, ground: f64 },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Arrival { t, .. }
            | Event::RankIncrease { t, .. }
            | Event::Merge { t, .. }
            | Event::Attach { t, .. }
            | Event::Match { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct RequestTimes {
    arrival: f64,
    joined: Option<f64>,
    matched: Option<f64>,
}

/// Per-request arrival, join and match times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    times: BTreeMap<RequestId, RequestTimes>,
    ground: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    pub space: f64,
    pub time: f64,
    pub delta_c: f64,
    pub delta_g: f64,
    pub m_g: f64,
    pub total: f64,
}

impl CostLedger {
    fn arrive(&mut self, id: RequestId, t: f64) {
        self.times.insert(id, RequestTimes { arrival: t, joined: None, matched: None });
    }

    fn join(&mut self, id: RequestId, t: f64) {
        if let Some(r) = self.times.get_mut(&id) {
            r.joined = Some(t);
        }
    }

    fn matched(&mut self, a: RequestId, b: RequestId, t: f64, ground: f64) {
        for id in [a, b] {
            if let Some(r) = self.times.get_mut(&id) {
                r.matched = Some(t);
            }
        }
        self.ground += ground;
    }

    pub fn arrival(&self, id: RequestId) -> Option<f64> {
        self.times.get(&id).map(|r| r.arrival)
    }

    pub fn joined(&self, id: RequestId) -> Option<f64> {
        self.times.get(&id).and_then(|r| r.joined)
    }

    pub fn match_time(&self, id: RequestId) -> Option<f64> {
        self.times.get(&id).and_then(|r| r.matched)
    }

    /// Aggregates over matched requests. `m_g` is the ground length of the
    /// greedy matching, so `total = delta_c + delta_g + m_g = space + time`.
    pub fn costs(&self) -> Costs {
        let mut c = Costs { space: self.ground, m_g: self.ground, ..Costs::default() };
        for r in self.times.values() {
            if let (Some(j), Some(m)) = (r.joined, r.matched) {
                c.delta_c += j - r.arrival;
                c.delta_g += m - j;
                c.time += m - r.arrival;
            }
        }
        c.total = c.delta_c + c.delta_g + c.m_g;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a: RequestId,
    pub b: RequestId,
    pub t: f64,
}

/// Exact time integrals of the number of odd and of active components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Integrals {
    pub odd: f64,
    pub active: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub algorithm: String,
    pub m: usize,
    pub pairs: Vec<MatchedPair>,
    pub costs: Costs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forest_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrals: Option<Integrals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<EdgeLedger>,
    #[serde(default)]
    pub events: Vec<Event>,
    pub audit: Option<AuditReport>,
}

impl MatchingResult {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// What happens next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NextEvent {
    At(f64),
    Done,
    Stuck,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    metric: Arc<GroundMetric>,
    arrivals: Vec<TimedRequest>,
    next_arrival: usize,
    clock: f64,
    started: bool,
    dec: Decomposition,
    greedy: BTreeMap<RequestId, GreedyInstance>,
    attached: BTreeMap<RequestId, bool>,
    costs: CostLedger,
    pairs: Vec<MatchedPair>,
    events: Vec<Event>,
    integrals: Integrals,
    odd_now: usize,
    active_now: usize,
    audit: Option<AuditReport>,
}

impl Simulation {
    /// Any request multiset, including odd ones; ids must be distinct.
    pub fn new(metric: GroundMetric, mut requests: Vec<TimedRequest>) -> Result<Self, SimulationError> {
        let mut seen = std::collections::BTreeSet::new();
        for r in &requests {
            metric.check_point(&r.point).map_err(|source| SimulationError::Metric { id: r.id, source })?;
            if !seen.insert(r.id) {
                return Err(SimulationError::DuplicateId(r.id));
            }
        }
        requests.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
        let metric = Arc::new(metric);
        Ok(Simulation {
            dec: Decomposition::new(Arc::clone(&metric)),
            metric,
            arrivals: requests,
            next_arrival: 0,
            clock: f64::NEG_INFINITY,
            started: false,
            greedy: BTreeMap::new(),
            attached: BTreeMap::new(),
            costs: CostLedger::default(),
            pairs: Vec::new(),
            events: Vec::new(),
            integrals: Integrals::default(),
            odd_now: 0,
            active_now: 0,
            audit: None,
        })
    }

    pub fn from_instance(inst: &Instance) -> Self {
        Self::new(inst.metric().clone(), inst.requests().to_vec()).expect("instances are validated")
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn pairs(&self) -> &[MatchedPair] {
        &self.pairs
    }

    pub fn cost_ledger(&self) -> &CostLedger {
        &self.costs
    }

    pub fn integrals(&self) -> Integrals {
        self.integrals
    }

    pub fn greedy_instances(&self) -> &BTreeMap<RequestId, GreedyInstance> {
        &self.greedy
    }

    /// Arrived requests that have not joined a greedy instance.
    pub fn unattached_count(&self) -> usize {
        self.attached.values().filter(|a| !**a).count()
    }

    pub fn enable_audit(&mut self) {
        if self.audit.is_none() {
            self.audit = Some(AuditReport::default());
        }
    }

    pub fn audit_report(&self) -> Option<&AuditReport> {
        self.audit.as_ref()
    }

    fn check_clock(&self, t: f64) -> Result<(), SimulationError> {
        if t != self.clock {
            return Err(SimulationError::ClockMismatch { clock: self.clock, got: t });
        }
        Ok(())
    }

    /// Moves the clock forward, integrating the component counts of the
    /// interval just left.
    pub fn advance_clock(&mut self, t: f64) -> Result<(), SimulationError> {
        if self.started && t < self.clock {
            return Err(SimulationError::ClockMismatch { clock: self.clock, got: t });
        }
        if self.started {
            let dt = t - self.clock;
            self.integrals.odd += self.odd_now as f64 * dt;
            self.integrals.active += self.active_now as f64 * dt;
        }
        self.clock = t;
        self.started = true;
        Ok(())
    }

    pub fn receive_new_requests(&mut self, t: f64) -> Result<(), SimulationError> {
        self.check_clock(t)?;
        while let Some(r) = self.arrivals.get(self.next_arrival) {
            if !approx_ge(t, r.arrival) {
                break;
            }
            let r = r.clone();
            self.next_arrival += 1;
            let cid = self.dec.add_singleton(&r)?;
            self.costs.arrive(r.id, r.arrival);
            self.attached.insert(r.id, false);
            self.events.push(Event::Arrival { t, id: r.id, cid });
        }
        Ok(())
    }

    fn record_merge(&mut self, t: f64, trigger: MergeTrigger, record: MergeRecord) -> Result<(), SimulationError> {
        if let Some(report) = self.audit.as_mut() {
            let claims = audit::check_merge_record(trigger, &record);
            let first = claims.first_failure().cloned();
            report.absorb(claims);
            if let Some(f) = first {
                return Err(SimulationError::Audit {
                    check: f.check,
                    detail: f.context,
                    time: t,
                    event_index: self.events.len(),
                });
            }
        }
        self.events.push(Event::Merge { t, trigger, record });
        Ok(())
    }

    fn bump_rank(&mut self, t: f64, cid: Cid, to: u32, cause: RankCause) -> Result<(), SimulationError> {
        let from = self.dec.component(cid).ok_or(DecompositionError::DeadComponent(cid))?.rank();
        self.dec.set_rank(cid, to)?;
        self.events.push(Event::RankIncrease { t, cid, from, to, cause });
        Ok(())
    }

    /// One pass over the odd components alive at the start of the pass.
    pub fn combine_step(&mut self, t: f64) -> Result<bool, SimulationError> {
        self.check_clock(t)?;
        let mut merged = false;
        for c1 in self.dec.odd_cids() {
            match self.dec.component(c1) {
                Some(c) if c.is_odd() => {}
                _ => continue,
            }
            let decision = self.dec.combine_decision(c1, t)?;
            match decision.action {
                CombineAction::NotReady | CombineAction::Wait { .. } => {}
                CombineAction::Special { c3 } => {
                    let rank = self.dec.component(c1).map_or(0, |c| c.rank());
                    let rec = self.dec.special_merge(c3, c1, rank)?;
                    self.record_merge(t, MergeTrigger::CombineSpecial, rec)?;
                    merged = true;
                }
                CombineAction::Nearby { c2 } => {
                    let rank = self.dec.component(c2).and_then(|c| c.nrank()).unwrap_or(0);
                    let rec = self.dec.regular_merge(c1, c2, rank)?;
                    self.record_merge(t, MergeTrigger::CombineNearby, rec)?;
                    let (_, fixups) = self.dec.nearby_fixup(c2)?;
                    for rec in fixups {
                        self.record_merge(t, MergeTrigger::Fixup, rec)?;
                    }
                    merged = true;
                }
                CombineAction::Rank { c2, bump } => {
                    let mut rank = self.dec.component(c2).map_or(0, |c| c.rank());
                    if bump {
                        rank += 1;
                        self.bump_rank(t, c2, rank, RankCause::Combine)?;
                    }
                    let rec = self.dec.regular_merge(c1, c2, rank)?;
                    self.record_merge(t, MergeTrigger::CombineRank, rec)?;
                    merged = true;
                }
            }
        }
        Ok(merged)
    }

    /// Prunes waiting trees holding two components of equal rank, one tree
    /// at a time, re-deriving the forest after each.
    pub fn prune_step(&mut self, t: f64) -> Result<bool, SimulationError> {
        self.check_clock(t)?;
        let mut merged = false;
        loop {
            let forest = self.dec.waiting_forest(t)?;
            let found = forest.trees().into_iter().find_map(|tree| forest.duplicate_rank(&tree));
            let Some((r, a, b)) = found else { break };
            let c3 = forest.lca(a, b).expect("duplicates share a tree");
            self.bump_rank(t, c3, r + 1, RankCause::Prune)?;
            let mut h: Vec<(u32, Cid)> = forest
                .descendants(c3)
                .into_iter()
                .filter_map(|c| forest.rank(c).filter(|&rc| rc <= r).map(|rc| (rc, c)))
                .collect();
            h.sort_unstable();
            for (_, c) in h {
                if self.dec.component(c).is_some() {
                    let rec = self.dec.regular_merge(c, c3, r + 1)?;
                    self.record_merge(t, MergeTrigger::Prune, rec)?;
                }
            }
            merged = true;
        }
        Ok(merged)
    }

    pub fn run_greedy_step(&mut self, t: f64) -> Result<(), SimulationError> {
        self.check_clock(t)?;
        let mut batches: Vec<(RequestId, Vec<RequestId>)> = Vec::new();
        for comp in self.dec.components() {
            let mut free: Vec<(f64, RequestId)> = comp
                .vertices()
                .iter()
                .filter(|id| self.attached.get(id) == Some(&false))
                .map(|&id| (self.costs.arrival(id).unwrap_or(t), id))
                .collect();
            if free.len() >= 2 {
                free.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                batches.push((comp.repr(), free.into_iter().map(|(_, id)| id).collect()));
            }
        }
        for (repr, ids) in batches {
            for pair in ids.chunks_exact(2) {
                let (a, b) = (pair[0], pair[1]);
                let ra = self.request(a);
                let rb = self.request(b);
                self.greedy
                    .entry(repr)
                    .or_insert_with(|| GreedyInstance::new(Owner::Representative(repr)))
                    .add_pair(&ra, &rb, t)?;
                for id in [a, b] {
                    self.attached.insert(id, true);
                    self.costs.join(id, t);
                }
                self.events.push(Event::Attach { t, owner: repr, a, b });
            }
        }
        for (&repr, inst) in self.greedy.iter_mut() {
            if inst.pending_len() < 2 {
                continue;
            }
            for m in inst.step(&self.metric, t)? {
                self.costs.matched(m.a, m.b, m.t, m.ground);
                self.pairs.push(MatchedPair { a: m.a, b: m.b, t: m.t });
                self.events.push(Event::Match { t: m.t, owner: repr, a: m.a, b: m.b, ground: m.ground });
            }
        }
        Ok(())
    }

    fn request(&self, id: RequestId) -> TimedRequest {
        let p = self.dec.point(id).expect("arrived request");
        TimedRequest::new(id, p.point.clone(), p.time)
    }

    fn all_matched(&self) -> bool {
        self.next_arrival == self.arrivals.len() && self.pairs.len() * 2 == self.arrivals.len()
    }

    pub fn next_event_time(&self) -> Result<NextEvent, SimulationError> {
        if self.all_matched() {
            return Ok(NextEvent::Done);
        }
        let later = |x: f64| !self.started || approx_lt(self.clock, x);
        let mut best = f64::INFINITY;
        if let Some(r) = self.arrivals.get(self.next_arrival) {
            best = best.min(r.arrival);
        }
        for c1 in self.dec.odd_cids() {
            let thr = self.dec.combine_decision(c1, self.clock)?.threshold;
            if later(thr) {
                best = best.min(thr);
            }
        }
        for inst in self.greedy.values() {
            let thr = inst.next_threshold(&self.metric);
            if later(thr) {
                best = best.min(thr);
            }
        }
        Ok(if best.is_finite() { NextEvent::At(best) } else { NextEvent::Stuck })
    }

    /// Runs the full per-instant pipeline at time `t >= clock`.
    pub fn process_instant(&mut self, t: f64) -> Result<(), SimulationError> {
        self.advance_clock(t)?;
        self.receive_new_requests(t)?;
        loop {
            let combined = self.combine_step(t)?;
            let pruned = self.prune_step(t)?;
            if !combined && !pruned {
                break;
            }
        }
        self.run_greedy_step(t)?;
        let forest = self.dec.waiting_forest(t)?;
        self.odd_now = self.dec.odd_cids().len();
        self.active_now = self.odd_now - forest.len();
        if self.audit.is_some() {
            self.audit_instant(t, &forest)?;
        }
        Ok(())
    }

    fn audit_instant(&mut self, t: f64, forest: &WaitingForest) -> Result<(), SimulationError> {
        let mut report = audit::check_live_invariants(&self.dec, forest, self.dec.requests_seen());
        let unattached = self.unattached_count();
        report.check("odd-equals-unattached", self.odd_now == unattached, || {
            format!("{} odd components, {} unattached requests", self.odd_now, unattached)
        });
        let first = report.first_failure().cloned();
        self.audit.as_mut().expect("audit enabled").absorb(report);
        match first {
            Some(f) => Err(SimulationError::Audit {
                check: f.check,
                detail: f.context,
                time: t,
                event_index: self.events.len(),
            }),
            None => Ok(()),
        }
    }

    /// Processes every event time up to and including `limit`.
    pub fn advance_to(&mut self, limit: f64) -> Result<(), SimulationError> {
        while let NextEvent::At(t) = self.next_event_time()? {
            if t > limit {
                break;
            }
            self.process_instant(t)?;
        }
        Ok(())
    }

    /// Runs until every request is matched.
    pub fn run_to_completion(&mut self) -> Result<(), SimulationError> {
        loop {
            match self.next_event_time()? {
                NextEvent::Done => return Ok(()),
                NextEvent::Stuck => {
                    let unmatched = self.arrivals.len() - 2 * self.pairs.len();
                    return Err(SimulationError::Stuck { clock: self.clock, unmatched });
                }
                NextEvent::At(t) => self.process_instant(t)?,
            }
        }
    }

    pub fn into_result(self) -> MatchingResult {
        MatchingResult {
            algorithm: "online".to_string(),
            m: self.arrivals.len(),
            pairs: self.pairs,
            costs: self.costs.costs(),
            forest_weight: Some(self.dec.ledger().total_weight()),
            integrals: Some(self.integrals),
            ledger: Some(self.dec.ledger().clone()),
            events: self.events,
            audit: self.audit,
        }
    }
}

/// Runs the online algorithm on `inst`. With auditing on, every instant is
/// checked and the final cost bounds are verified when exact OPT is
/// affordable.
pub fn run_to_completion(inst: &Instance, config: RunConfig) -> Result<MatchingResult, SimulationError> {
    let mut sim = Simulation::from_instance(inst);
    if config.audit {
        sim.enable_audit();
    }
    sim.run_to_completion()?;
    let last_event = sim.events.len();
    let clock = sim.clock;
    let mut result = sim.into_result();
    let bounds = result.audit.is_some().then(|| audit::check_cost_bounds(&result, inst));
    if let (Some(bounds), Some(report)) = (bounds, result.audit.as_mut()) {
        let first = bounds.first_failure().cloned();
        report.absorb(bounds);
        if let Some(f) = first {
            return Err(SimulationError::Audit {
                check: f.check,
                detail: f.context,
                time: clock,
                event_index: last_event,
            });
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Point;

    fn req(id: usize, x: f64, t: f64) -> TimedRequest {
        TimedRequest::new(id, Point::line(x), t)
    }

    fn two_on_a_line() -> Simulation {
        Simulation::new(GroundMetric::Line, vec![req(0, 0.0, 0.0), req(1, 1.0, 0.0)]).unwrap()
    }

    #[test]
    fn first_combine_threshold_is_two() {
        let mut sim = two_on_a_line();
        sim.advance_clock(0.0).unwrap();
        sim.receive_new_requests(0.0).unwrap();
        assert_eq!(sim.decomposition().live_cids(), vec![0, 1]);
        assert_eq!(sim.next_event_time().unwrap(), NextEvent::At(2.0));
    }

    #[test]
    fn combine_waits_for_threshold() {
        let mut sim = two_on_a_line();
        sim.process_instant(0.0).unwrap();
        sim.advance_clock(1.9).unwrap();
        assert!(!sim.combine_step(1.9).unwrap());
        sim.advance_clock(2.0).unwrap();
        assert!(sim.combine_step(2.0).unwrap());
        let survivor = sim.decomposition().components().next().unwrap();
        assert_eq!(survivor.rank(), 1);
        assert_eq!(sim.decomposition().ledger().edges()[0].rank, 1);
    }

    #[test]
    fn arrival_beats_threshold() {
        let mut sim = Simulation::new(
            GroundMetric::Line,
            vec![req(0, 0.0, 0.0), req(1, 1.0, 0.0), req(2, 50.0, 1.5), req(3, 60.0, 1.5)],
        )
        .unwrap();
        sim.process_instant(0.0).unwrap();
        assert_eq!(sim.next_event_time().unwrap(), NextEvent::At(1.5));
    }

    #[test]
    fn clock_must_match() {
        let mut sim = two_on_a_line();
        sim.advance_clock(0.0).unwrap();
        assert!(matches!(sim.combine_step(1.0), Err(SimulationError::ClockMismatch { .. })));
        assert!(sim.advance_clock(-1.0).is_err());
    }

    #[test]
    fn two_request_trace() {
        let mut sim = two_on_a_line();
        sim.run_to_completion().unwrap();
        let r = sim.into_result();
        assert_eq!(r.pairs, vec![MatchedPair { a: 0, b: 1, t: 4.0 }]);
        assert_eq!(r.costs.space, 1.0);
        assert_eq!(r.costs.delta_c, 4.0);
        assert_eq!(r.costs.delta_g, 4.0);
        assert_eq!(r.costs.total, 9.0);
        assert_eq!(r.integrals.unwrap().odd, 4.0);
    }

    #[test]
    fn co_located_pair_is_free() {
        let mut sim = Simulation::new(GroundMetric::Line, vec![req(0, 3.0, 0.0), req(1, 3.0, 0.0)]).unwrap();
        sim.run_to_completion().unwrap();
        let r = sim.into_result();
        assert_eq!(r.pairs, vec![MatchedPair { a: 0, b: 1, t: 0.0 }]);
        assert_eq!(r.costs.total, 0.0);
    }

    #[test]
    fn higher_rank_waits_lower_rank_merges_up() {
        let mut sim = Simulation::new(GroundMetric::Line, vec![]).unwrap();
        sim.advance_clock(10.0).unwrap();
        let c1 = sim.dec.insert_component(&[req(0, 0.0, 0.0)], 2, None).unwrap();
        let c2 = sim.dec.add_singleton(&req(1, 1.0, 0.0)).unwrap();
        let d = sim.decomposition().combine_decision(c1, 10.0).unwrap();
        assert_eq!(d.action, CombineAction::Wait { c2 });
        // c1 only waits; c2 then sees c1 as a compatible target of higher rank
        assert!(sim.combine_step(10.0).unwrap());
        let survivor = sim.decomposition().component(c1).unwrap();
        assert_eq!(survivor.len(), 2);
        assert_eq!(survivor.rank(), 2);
    }

    #[test]
    fn no_duplicates_no_prune() {
        let mut sim = Simulation::new(GroundMetric::Line, vec![]).unwrap();
        sim.advance_clock(10.0).unwrap();
        sim.dec.insert_component(&[req(0, 0.0, 0.0)], 1, None).unwrap();
        sim.dec.add_singleton(&req(1, 1.0, 0.0)).unwrap();
        assert!(!sim.prune_step(10.0).unwrap());
    }

    #[test]
    fn prune_merges_equal_ranks_at_their_lca() {
        let mut sim = Simulation::new(GroundMetric::Line, vec![]).unwrap();
        sim.advance_clock(100.0).unwrap();
        let c3 = sim.dec.add_singleton(&req(0, 0.0, 0.0)).unwrap();
        let c1 = sim.dec.insert_component(&[req(1, 10.0, 0.0)], 4, None).unwrap();
        let c2 = sim.dec.insert_component(&[req(2, -10.0, 0.0)], 4, None).unwrap();
        let c4 = sim.dec.insert_component(&[req(3, 20.0, 0.0)], 5, None).unwrap();
        let f = sim.decomposition().waiting_forest(100.0).unwrap();
        assert_eq!(f.edges().collect::<Vec<_>>(), vec![(c1, c3), (c2, c3), (c4, c1)]);
        assert!(sim.prune_step(100.0).unwrap());
        let merged = sim.decomposition().component(c3).unwrap();
        assert_eq!(merged.rank(), 5);
        assert_eq!(merged.vertices().iter().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(sim.decomposition().component(c4).is_some());
        let ranks: Vec<u32> = sim.decomposition().ledger().edges().iter().map(|e| e.rank).collect();
        assert_eq!(ranks, vec![5, 5]);
    }

    #[test]
    fn greedy_attaches_earliest_pair() {
        let mut sim = Simulation::new(GroundMetric::Line, vec![]).unwrap();
        sim.advance_clock(5.0).unwrap();
        let members = [req(0, 0.0, 3.0), req(1, 1.0, 1.0), req(2, 2.0, 2.0)];
        sim.dec.insert_component(&members, 1, None).unwrap();
        for r in &members {
            sim.costs.arrive(r.id, r.arrival);
            sim.attached.insert(r.id, false);
        }
        sim.run_greedy_step(5.0).unwrap();
        assert_eq!(sim.unattached_count(), 1);
        assert_eq!(sim.attached.get(&0), Some(&false));
        assert!(sim.greedy_instances().contains_key(&0));
    }
}

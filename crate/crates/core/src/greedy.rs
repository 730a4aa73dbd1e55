//! Online greedy matcher.
//!
//! A request `u` is matched to its nearest unmatched partner `v` once the
//! clock reaches `joined(u) + 2 * d'(u, v)`, where `d'` is the time-augmented
//! distance computed with join times in place of arrival times.
//!
//! Instances owned by a component receive requests two at a time through
//! [`GreedyInstance::add_pair`]; the standalone matcher receives single
//! arrivals through [`GreedyInstance::add_arrival`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{approx_ge, approx_lt, GroundMetric, Point, RequestId, TimedPoint, TimedRequest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GreedyError {
    #[error("request {0} is already attached to a greedy instance")]
    AlreadyAttached(RequestId),
    #[error("requests join component-owned instances in pairs; got a batch of {0}")]
    OddBatch(usize),
    #[error("single arrivals are only accepted by the standalone instance")]
    NotStandalone,
    #[error("clock moved backwards: {now} < {clock}")]
    ClockRegression { now: f64, clock: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Owner {
    Global,
    Representative(RequestId),
}

/// A request as the greedy sees it: original position, join time.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingRequest {
    pub id: RequestId,
    pub point: Point,
    pub joined: f64,
}

impl PendingRequest {
    fn local(&self) -> TimedPoint {
        TimedPoint::new(self.point.clone(), self.joined)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyMatch {
    pub a: RequestId,
    pub b: RequestId,
    pub t: f64,
    /// Ground distance between the two endpoints.
    pub ground: f64,
    /// Time-augmented distance using join times.
    pub local: f64,
}

#[derive(Debug, Clone)]
pub struct GreedyInstance {
    owner: Owner,
    pending: BTreeMap<RequestId, PendingRequest>,
    attached: BTreeSet<RequestId>,
    joined: BTreeMap<RequestId, f64>,
    matched: Vec<GreedyMatch>,
    clock: f64,
}

impl GreedyInstance {
    pub fn new(owner: Owner) -> Self {
        GreedyInstance {
            owner,
            pending: BTreeMap::new(),
            attached: BTreeSet::new(),
            joined: BTreeMap::new(),
            matched: Vec::new(),
            clock: 0.0,
        }
    }

    pub fn standalone() -> Self {
        Self::new(Owner::Global)
    }

    pub fn owner(&self) -> Owner {
        self.owner
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingRequest> {
        self.pending.values()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn matched(&self) -> &[GreedyMatch] {
        &self.matched
    }

    pub fn joined_time(&self, id: RequestId) -> Option<f64> {
        self.joined.get(&id).copied()
    }

    pub fn attached_len(&self) -> usize {
        self.attached.len()
    }

    fn check_clock(&self, now: f64) -> Result<(), GreedyError> {
        if approx_lt(now, self.clock) {
            return Err(GreedyError::ClockRegression { now, clock: self.clock });
        }
        Ok(())
    }

    fn insert(&mut self, r: &TimedRequest, joined: f64) {
        self.attached.insert(r.id);
        self.joined.insert(r.id, joined);
        self.pending.insert(r.id, PendingRequest { id: r.id, point: r.point.clone(), joined });
    }

    /// Attaches two requests that join at `now`; their greedy-local arrival
    /// time becomes `now`.
    pub fn add_pair(&mut self, a: &TimedRequest, b: &TimedRequest, now: f64) -> Result<(), GreedyError> {
        self.add_batch(&[a, b], now)
    }

    /// Attaches an even-sized batch of requests, all joining at `now`.
    pub fn add_batch(&mut self, batch: &[&TimedRequest], now: f64) -> Result<(), GreedyError> {
        if batch.len() % 2 == 1 {
            return Err(GreedyError::OddBatch(batch.len()));
        }
        self.check_clock(now)?;
        let mut ids = BTreeSet::new();
        for r in batch {
            if self.attached.contains(&r.id) || !ids.insert(r.id) {
                return Err(GreedyError::AlreadyAttached(r.id));
            }
        }
        for r in batch {
            self.insert(r, now);
        }
        self.clock = self.clock.max(now);
        Ok(())
    }

    /// Standalone arrival: the request joins at its own arrival time.
    pub fn add_arrival(&mut self, r: &TimedRequest) -> Result<(), GreedyError> {
        if self.owner != Owner::Global {
            return Err(GreedyError::NotStandalone);
        }
        if self.attached.contains(&r.id) {
            return Err(GreedyError::AlreadyAttached(r.id));
        }
        self.check_clock(r.arrival)?;
        self.insert(r, r.arrival);
        self.clock = self.clock.max(r.arrival);
        Ok(())
    }

    /// Nearest pending partner of `u` (ties to the smallest id).
    fn nearest(&self, metric: &GroundMetric, u: &PendingRequest) -> Option<(RequestId, f64)> {
        let lu = u.local();
        let mut best: Option<(RequestId, f64)> = None;
        for v in self.pending.values() {
            if v.id == u.id {
                continue;
            }
            let d = metric.augmented(&lu, &v.local());
            match best {
                Some((_, bd)) if !approx_lt(d, bd) => {}
                _ => best = Some((v.id, d)),
            }
        }
        best
    }

    /// Earliest time at which some pending request reaches its matching
    /// threshold; `+inf` with fewer than two pending requests.
    pub fn next_threshold(&self, metric: &GroundMetric) -> f64 {
        if self.pending.len() < 2 {
            return f64::INFINITY;
        }
        self.pending
            .values()
            .filter_map(|u| self.nearest(metric, u).map(|(_, d)| u.joined + 2.0 * d))
            .fold(f64::INFINITY, f64::min)
    }

    /// Runs the greedy iteration at time `t` to a fixpoint and returns the
    /// pairs matched at `t`.
    pub fn step(&mut self, metric: &GroundMetric, t: f64) -> Result<Vec<GreedyMatch>, GreedyError> {
        self.check_clock(t)?;
        self.clock = self.clock.max(t);
        let mut out = Vec::new();
        loop {
            let mut progressed = false;
            let ids: Vec<RequestId> = self.pending.keys().copied().collect();
            for uid in ids {
                if self.pending.len() < 2 {
                    break;
                }
                let Some(u) = self.pending.get(&uid) else { continue };
                let Some((vid, d)) = self.nearest(metric, u) else { continue };
                if approx_ge(t, u.joined + 2.0 * d) {
                    let u = self.pending.remove(&uid).expect("pending");
                    let v = self.pending.remove(&vid).expect("pending");
                    let m = GreedyMatch {
                        a: uid.min(vid),
                        b: uid.max(vid),
                        t,
                        ground: metric.dist(&u.point, &v.point),
                        local: d,
                    };
                    self.matched.push(m.clone());
                    out.push(m);
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        Ok(out)
    }
}

/// Outcome of a standalone greedy run.
#[derive(Debug, Clone, PartialEq)]
pub struct StandaloneRun {
    pub matches: Vec<GreedyMatch>,
    pub final_time: f64,
}

/// Runs the standalone online greedy over a request stream, event by event.
pub fn run_standalone(metric: &GroundMetric, requests: &[TimedRequest]) -> Result<StandaloneRun, GreedyError> {
    let mut sorted: Vec<&TimedRequest> = requests.iter().collect();
    sorted.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
    let mut g = GreedyInstance::standalone();
    let mut next = 0;
    let mut clock = 0.0f64;
    let mut matches = Vec::new();
    loop {
        let arrival = sorted.get(next).map_or(f64::INFINITY, |r| r.arrival);
        let threshold = g.next_threshold(metric);
        let t = arrival.min(threshold);
        if !t.is_finite() {
            break;
        }
        clock = clock.max(t);
        while next < sorted.len() && approx_ge(clock, sorted[next].arrival) {
            g.add_arrival(sorted[next])?;
            next += 1;
        }
        matches.extend(g.step(metric, clock)?);
    }
    Ok(StandaloneRun { matches, final_time: clock })
}

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, Result};
use mpmd_core::audit::audit_result;
use mpmd_core::greedy::run_standalone;
use mpmd_core::oracles::{offline_component_matching, opt_matching, OfflineGraph};
use mpmd_core::orchestrator::{run_to_completion, Costs, MatchedPair, MatchingResult, RunConfig};
use mpmd_core::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Online,
    GreedyOnline,
    OfflineOpt,
    OfflineWarmup,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::Online, Algorithm::GreedyOnline, Algorithm::OfflineOpt, Algorithm::OfflineWarmup];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Online => "online",
            Algorithm::GreedyOnline => "greedy-online",
            Algorithm::OfflineOpt => "offline-opt",
            Algorithm::OfflineWarmup => "offline-warmup",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            format!("unknown algorithm {s:?}; expected online, greedy-online, offline-opt or offline-warmup")
        })
    }
}

/// Builds a result for an offline matching whose pairs are served at the
/// later arrival, so each pair costs exactly its time-augmented distance.
fn offline_result(algorithm: Algorithm, inst: &Instance, pairs: &[(usize, usize)]) -> MatchingResult {
    let by_id = inst.by_id();
    let mut costs = Costs::default();
    let mut out = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        let (ra, rb) = (by_id[a], by_id[b]);
        let t = ra.arrival.max(rb.arrival);
        costs.space += inst.metric().dist(&ra.point, &rb.point);
        costs.time += (t - ra.arrival) + (t - rb.arrival);
        out.push(MatchedPair { a, b, t });
    }
    costs.m_g = costs.space;
    costs.delta_g = costs.time;
    costs.total = costs.space + costs.time;
    MatchingResult {
        algorithm: algorithm.name().to_string(),
        m: inst.len(),
        pairs: out,
        costs,
        forest_weight: None,
        integrals: None,
        ledger: None,
        events: Vec::new(),
        audit: None,
    }
}

/// Runs `algorithm` on `inst`. With `audit`, the online algorithm checks its
/// invariants at every instant and the other algorithms get their output
/// re-audited; either way a failure is reported in `result.audit`.
pub fn run(algorithm: Algorithm, inst: &Instance, audit: bool) -> Result<MatchingResult> {
    let mut result = match algorithm {
        Algorithm::Online => {
            return match run_to_completion(inst, RunConfig { audit }) {
                Ok(r) => Ok(r),
                Err(mpmd_core::SimulationError::Audit { check, detail, time, event_index }) => {
                    let mut sim = mpmd_core::Simulation::from_instance(inst);
                    sim.run_to_completion().map_err(|e| anyhow!(e))?;
                    let mut r = sim.into_result();
                    let mut report = mpmd_core::audit::AuditReport::default();
                    report.check(&check, false, || format!("at time {time} (event {event_index}): {detail}"));
                    r.audit = Some(report);
                    Ok(r)
                }
                Err(e) => Err(anyhow!(e)),
            };
        }
        Algorithm::GreedyOnline => {
            let run = run_standalone(inst.metric(), inst.requests())?;
            let by_id = inst.by_id();
            let mut costs = Costs::default();
            let mut pairs = Vec::with_capacity(run.matches.len());
            for m in &run.matches {
                costs.space += m.ground;
                costs.time += (m.t - by_id[m.a].arrival) + (m.t - by_id[m.b].arrival);
                pairs.push(MatchedPair { a: m.a, b: m.b, t: m.t });
            }
            costs.m_g = costs.space;
            costs.delta_g = costs.time;
            costs.total = costs.space + costs.time;
            MatchingResult {
                algorithm: algorithm.name().to_string(),
                m: inst.len(),
                pairs,
                costs,
                forest_weight: None,
                integrals: None,
                ledger: None,
                events: Vec::new(),
                audit: None,
            }
        }
        Algorithm::OfflineOpt => {
            let m = opt_matching(&OfflineGraph::from_instance(inst))?;
            offline_result(algorithm, inst, &m.pairs)
        }
        Algorithm::OfflineWarmup => {
            let cm = offline_component_matching(&OfflineGraph::from_instance(inst))?;
            let mut r = offline_result(algorithm, inst, &cm.matching.pairs);
            r.forest_weight = Some(cm.forest.iter().map(|e| e.weight).sum());
            r
        }
    };
    if audit {
        result.audit = Some(audit_result(&result, inst));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpmd_core::{GroundMetric, Point, TimedRequest};

    fn two_on_a_line() -> Instance {
        Instance::new(
            GroundMetric::Line,
            vec![TimedRequest::new(0, Point::line(0.0), 0.0), TimedRequest::new(1, Point::line(1.0), 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn worked_example_totals() {
        let inst = two_on_a_line();
        assert_eq!(run(Algorithm::Online, &inst, true).unwrap().costs.total, 9.0);
        let g = run(Algorithm::GreedyOnline, &inst, true).unwrap();
        assert_eq!(g.costs.total, 5.0);
        assert_eq!(g.pairs[0].t, 2.0);
        assert_eq!(run(Algorithm::OfflineOpt, &inst, true).unwrap().costs.total, 1.0);
        assert_eq!(run(Algorithm::OfflineWarmup, &inst, true).unwrap().costs.total, 1.0);
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("magic".parse::<Algorithm>().is_err());
    }
}

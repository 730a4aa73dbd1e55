//! Request streams: validation, JSON persistence and seeded generators.
//!
//! An instance file is a single JSON document:
//!
//! ```json
//! {"metric": {"kind": "line"}, "requests": [{"id": 0, "t": 0.0, "x": [0.0]}]}
//! ```
//!
//! Geometric metrics (`euclidean`, `line`) carry coordinate arrays in `x`;
//! `uniform` and `explicit` metrics carry integer point indices. The
//! conventional extension is `.mpmd.json`.
//!
//! Generators draw from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`)
//! with one stream per concern: stream 0 for positions, stream 1 for arrival
//! times. Positions and times come from small integer grids so that distinct
//! candidate distances are well separated relative to the comparison
//! tolerance.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{GroundMetric, MetricError, Point, TimedRequest};

pub const FILE_EXTENSION: &str = ".mpmd.json";

const POSITION_STREAM: u64 = 0;
const TIME_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("m must be even, got {0}")]
    OddCount(usize),
    #[error("m must be at least 2")]
    Empty,
    #[error("invalid metric: {0}")]
    Metric(#[from] MetricError),
    #[error("requests[{index}].{field}: {message}")]
    Field { index: usize, field: &'static str, message: String },
    #[error("duplicate request id {0}")]
    DuplicateId(usize),
    #[error("request ids must be dense in 0..{m}; id {id} is out of range")]
    SparseIds { id: usize, m: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("generator: {0}")]
    Generator(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A validated request stream: even count, dense ids, sorted by (arrival, id).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    metric: GroundMetric,
    requests: Vec<TimedRequest>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    metric: GroundMetric,
    requests: Vec<TimedRequest>,
}

impl Instance {
    /// Validates and normalizes (sorts) a request list.
    pub fn new(metric: GroundMetric, mut requests: Vec<TimedRequest>) -> Result<Self, InstanceError> {
        metric.validate()?;
        let m = requests.len();
        if m == 0 {
            return Err(InstanceError::Empty);
        }
        if m % 2 == 1 {
            return Err(InstanceError::OddCount(m));
        }
        let mut seen = vec![false; m];
        for (index, r) in requests.iter().enumerate() {
            if !r.arrival.is_finite() || r.arrival < 0.0 {
                return Err(InstanceError::Field {
                    index,
                    field: "t",
                    message: format!("arrival time must be finite and non-negative, got {}", r.arrival),
                });
            }
            metric.check_point(&r.point).map_err(|e| InstanceError::Field {
                index,
                field: "x",
                message: e.to_string(),
            })?;
            if r.id >= m {
                return Err(InstanceError::SparseIds { id: r.id, m });
            }
            if std::mem::replace(&mut seen[r.id], true) {
                return Err(InstanceError::DuplicateId(r.id));
            }
        }
        requests.sort_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)));
        Ok(Instance { metric, requests })
    }

    pub fn metric(&self) -> &GroundMetric {
        &self.metric
    }

    /// Requests in (arrival, id) order.
    pub fn requests(&self) -> &[TimedRequest] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// Requests indexed by id.
    pub fn by_id(&self) -> Vec<&TimedRequest> {
        let mut out: Vec<&TimedRequest> = self.requests.iter().collect();
        out.sort_by_key(|r| r.id);
        out
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, InstanceError> {
        let doc: InstanceDocument = serde_json::from_slice(bytes).map_err(|e| InstanceError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Instance::new(doc.metric, doc.requests)
    }

    pub fn from_json_str(s: &str) -> Result<Self, InstanceError> {
        Self::from_json_slice(s.as_bytes())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|source| InstanceError::Io { path: path.display().to_string(), source })?;
        Self::from_json_slice(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string())
            .map_err(|source| InstanceError::Io { path: path.display().to_string(), source })
    }
}

/// Which family of request streams to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Uniform metric with `points` labels; positions drawn uniformly among them.
    UniformPoints { scale: f64, points: usize },
    /// Integer coordinates in `[0, side]^dim`.
    EuclideanRandom { dim: usize, side: u32 },
    /// Line positions `center + offset` with integer offset in `[-spread, spread]`.
    LineClusters { centers: Vec<f64>, spread: u32 },
    /// Two points at `0` and `distance` on the line.
    TwoPointAdversary { distance: f64 },
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::UniformPoints { .. } => "uniform-points",
            GeneratorKind::EuclideanRandom { .. } => "euclidean-random",
            GeneratorKind::LineClusters { .. } => "line-clusters",
            GeneratorKind::TwoPointAdversary { .. } => "two-point-adversary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub m: usize,
    pub seed: u64,
    /// Arrival times are integers drawn from `0..=horizon`.
    pub horizon: u32,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, m: usize, seed: u64) -> Self {
        GeneratorSpec { kind, m, seed, horizon: 10 }
    }
}

/// Draws an instance; identical specs give identical instances.
pub fn generate(spec: &GeneratorSpec) -> Result<Instance, InstanceError> {
    if spec.m % 2 == 1 {
        return Err(InstanceError::OddCount(spec.m));
    }
    if spec.m == 0 {
        return Err(InstanceError::Empty);
    }
    let mut pos_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pos_rng.set_stream(POSITION_STREAM);
    let mut time_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    time_rng.set_stream(TIME_STREAM);

    let (metric, points): (GroundMetric, Vec<Point>) = match &spec.kind {
        GeneratorKind::UniformPoints { scale, points } => {
            if *points == 0 {
                return Err(InstanceError::Generator("uniform-points needs at least one point".into()));
            }
            let pts = (0..spec.m).map(|_| Point::Index(pos_rng.gen_range(0..*points))).collect();
            (GroundMetric::Uniform { scale: *scale }, pts)
        }
        GeneratorKind::EuclideanRandom { dim, side } => {
            let pts = (0..spec.m)
                .map(|_| Point::Coords((0..*dim).map(|_| pos_rng.gen_range(0..=*side) as f64).collect()))
                .collect();
            (GroundMetric::Euclidean { dim: *dim }, pts)
        }
        GeneratorKind::LineClusters { centers, spread } => {
            if centers.is_empty() {
                return Err(InstanceError::Generator("line-clusters needs at least one center".into()));
            }
            let spread = *spread as i64;
            let pts = (0..spec.m)
                .map(|_| {
                    let c = centers[pos_rng.gen_range(0..centers.len())];
                    let off = pos_rng.gen_range(-spread..=spread) as f64;
                    Point::line(c + off)
                })
                .collect();
            (GroundMetric::Line, pts)
        }
        GeneratorKind::TwoPointAdversary { distance } => {
            let pts = (0..spec.m).map(|_| Point::line(if pos_rng.gen_bool(0.5) { *distance } else { 0.0 })).collect();
            (GroundMetric::Line, pts)
        }
    };
    let mut times: Vec<f64> = (0..spec.m).map(|_| time_rng.gen_range(0..=spec.horizon) as f64).collect();
    // ids follow arrival order; ties keep draw order
    let mut order: Vec<usize> = (0..spec.m).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
    let requests = order
        .iter()
        .enumerate()
        .map(|(id, &k)| TimedRequest::new(id, points[k].clone(), std::mem::take(&mut times[k])))
        .collect();
    Instance::new(metric, requests)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_cluster() {
        let spec = GeneratorSpec::new(GeneratorKind::LineClusters { centers: vec![0.0], spread: 0 }, 2, 99);
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.len(), 2);
        for r in inst.requests() {
            assert_eq!(r.point, Point::line(0.0));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GeneratorSpec::new(GeneratorKind::EuclideanRandom { dim: 2, side: 10 }, 8, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn uniform_points_distances() {
        let spec = GeneratorSpec::new(GeneratorKind::UniformPoints { scale: 1.0, points: 3 }, 4, 1);
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.len(), 4);
        let rs = inst.requests();
        for a in rs {
            for b in rs {
                let d = inst.metric().ground_distance(&a.point, &b.point).unwrap();
                if a.point == b.point {
                    assert_eq!(d, 0.0);
                } else {
                    assert_eq!(d, 1.0);
                }
            }
        }
    }

    #[test]
    fn odd_m_rejected() {
        let spec = GeneratorSpec::new(GeneratorKind::TwoPointAdversary { distance: 1.0 }, 7, 0);
        assert!(matches!(generate(&spec), Err(InstanceError::OddCount(7))));
    }

    #[test]
    fn ids_follow_arrival_order() {
        let spec = GeneratorSpec::new(GeneratorKind::EuclideanRandom { dim: 2, side: 5 }, 20, 3);
        let inst = generate(&spec).unwrap();
        for (i, r) in inst.requests().iter().enumerate() {
            assert_eq!(r.id, i);
        }
        assert!(inst.requests().windows(2).all(|w| w[0].arrival <= w[1].arrival));
    }

    #[test]
    fn validation_rules() {
        let m = GroundMetric::Line;
        let r = |id, x: f64, t| TimedRequest::new(id, Point::line(x), t);
        assert!(matches!(Instance::new(m.clone(), vec![r(0, 0.0, 0.0)]), Err(InstanceError::OddCount(1))));
        assert!(matches!(
            Instance::new(m.clone(), vec![r(0, 0.0, 0.0), r(1, 0.0, -1.0)]),
            Err(InstanceError::Field { index: 1, field: "t", .. })
        ));
        assert!(matches!(
            Instance::new(m.clone(), vec![r(0, 0.0, 0.0), r(0, 0.0, 1.0)]),
            Err(InstanceError::DuplicateId(0))
        ));
        assert!(matches!(
            Instance::new(m.clone(), vec![r(0, 0.0, 0.0), r(5, 0.0, 1.0)]),
            Err(InstanceError::SparseIds { id: 5, .. })
        ));
        // loading sorts by (arrival, id)
        let inst = Instance::new(m, vec![r(0, 0.0, 3.0), r(1, 1.0, 1.0)]).unwrap();
        assert_eq!(inst.requests()[0].id, 1);
    }

    #[test]
    fn parse_errors_carry_position() {
        let doc = "{\n \"metric\": {\"kind\": \"line\"},\n \"requests\": [\n {\"id\": 0, \"t\": 0.0, \"x\": [0.0]},\n {\"id\": 1, \"t\": oops}\n ]}";
        match Instance::from_json_str(doc) {
            Err(InstanceError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn odd_document_rejected() {
        let doc = r#"{"metric":{"kind":"line"},"requests":[{"id":0,"t":0,"x":[0]}]}"#;
        assert!(matches!(Instance::from_json_str(doc), Err(InstanceError::OddCount(1))));
    }

    #[test]
    fn triangle_violation_names_triple() {
        let doc = r#"{"metric":{"kind":"explicit","matrix":[[0,1,5],[1,0,1],[5,1,0]]},
            "requests":[{"id":0,"t":0,"x":0},{"id":1,"t":0,"x":2}]}"#;
        let err = Instance::from_json_str(doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(0, 1, 2)"), "{msg}");
    }

    #[test]
    fn save_load_round_trip() {
        let spec = GeneratorSpec::new(GeneratorKind::EuclideanRandom { dim: 3, side: 10 }, 4, 11);
        let inst = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("a{FILE_EXTENSION}"));
        inst.save(&path).unwrap();
        let back = Instance::load(&path).unwrap();
        assert_eq!(inst, back);
    }
}

//! Ground metrics and the time-augmented distance.
//!
//! Every distance in the crate is `g(p, q) + |t1 - t2|` over some ground
//! metric `g`. Threshold comparisons go through [`approx_ge`] and
//! [`approx_lt`] so that a single tolerance decides event ordering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Global comparison tolerance for distances and times.
pub const EPSILON: f64 = 1e-9;

/// `a >= b` up to [`EPSILON`].
#[inline]
pub fn approx_ge(a: f64, b: f64) -> bool {
    a >= b - EPSILON
}

/// Strict `a < b` up to [`EPSILON`]; the exact negation of [`approx_ge`].
#[inline]
pub fn approx_lt(a: f64, b: f64) -> bool {
    !approx_ge(a, b)
}

/// `a == b` up to [`EPSILON`].
#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPSILON
}

pub type RequestId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("euclidean dimension must be positive")]
    ZeroDimension,
    #[error("uniform scale must be a positive finite number, got {0}")]
    BadScale(f64),
    #[error("explicit matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("explicit matrix entry ({i}, {j}) = {value} is negative or not finite")]
    BadEntry { i: usize, j: usize, value: f64 },
    #[error("explicit matrix diagonal entry ({0}, {0}) is not zero")]
    NonZeroDiagonal(usize),
    #[error("explicit matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("explicit matrix has distinct points {i} and {j} at distance zero")]
    ZeroOffDiagonal { i: usize, j: usize },
    #[error(
        "triangle inequality violated by triple ({i}, {j}, {k}): d({i},{k}) = {direct} > d({i},{j}) + d({j},{k}) = {detour}"
    )]
    Triangle { i: usize, j: usize, k: usize, direct: f64, detour: f64 },
    #[error("point {point} does not fit the {metric} metric")]
    PointMismatch { point: String, metric: &'static str },
}

/// A point of a ground metric: coordinates for geometric metrics, an index
/// for the uniform and explicit metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Index(usize),
    Coords(Vec<f64>),
}

impl Point {
    pub fn line(x: f64) -> Self {
        Point::Coords(vec![x])
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Point::Index(i) => write!(f, "#{i}"),
            Point::Coords(c) => write!(f, "{c:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GroundMetric {
    /// Euclidean space of the given dimension; points are coordinate vectors.
    Euclidean { dim: usize },
    /// The real line; points are one-element coordinate vectors.
    Line,
    /// Every pair of distinct point indices sits at distance `scale`.
    Uniform { scale: f64 },
    /// A finite metric given by its full distance matrix; points are indices.
    Explicit { matrix: Vec<Vec<f64>> },
}

impl GroundMetric {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GroundMetric::Euclidean { .. } => "euclidean",
            GroundMetric::Line => "line",
            GroundMetric::Uniform { .. } => "uniform",
            GroundMetric::Explicit { .. } => "explicit",
        }
    }

    /// Checks the metric parameters. For explicit matrices this runs the full
    /// O(n^3) triangle scan.
    pub fn validate(&self) -> Result<(), MetricError> {
        match self {
            GroundMetric::Euclidean { dim } if *dim == 0 => Err(MetricError::ZeroDimension),
            GroundMetric::Euclidean { .. } | GroundMetric::Line => Ok(()),
            GroundMetric::Uniform { scale } => {
                if scale.is_finite() && *scale > 0.0 {
                    Ok(())
                } else {
                    Err(MetricError::BadScale(*scale))
                }
            }
            GroundMetric::Explicit { matrix } => validate_matrix(matrix),
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<(), MetricError> {
        let ok = match (self, p) {
            (GroundMetric::Euclidean { dim }, Point::Coords(c)) => c.len() == *dim && c.iter().all(|x| x.is_finite()),
            (GroundMetric::Line, Point::Coords(c)) => c.len() == 1 && c[0].is_finite(),
            (GroundMetric::Uniform { .. }, Point::Index(_)) => true,
            (GroundMetric::Explicit { matrix }, Point::Index(i)) => *i < matrix.len(),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(MetricError::PointMismatch { point: p.to_string(), metric: self.kind_name() })
        }
    }

    /// Ground distance `g(p, q)` with point validation.
    pub fn ground_distance(&self, p: &Point, q: &Point) -> Result<f64, MetricError> {
        self.check_point(p)?;
        self.check_point(q)?;
        Ok(self.dist(p, q))
    }

    /// Ground distance for points already known to be valid for this metric.
    ///
    /// Panics on a point/metric mismatch; callers validate at load time.
    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        match (self, p, q) {
            (GroundMetric::Euclidean { .. } | GroundMetric::Line, Point::Coords(a), Point::Coords(b)) => {
                if a.len() == 1 {
                    (a[0] - b[0]).abs()
                } else {
                    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
                }
            }
            (GroundMetric::Uniform { scale }, Point::Index(a), Point::Index(b)) => {
                if a == b {
                    0.0
                } else {
                    *scale
                }
            }
            (GroundMetric::Explicit { matrix }, Point::Index(a), Point::Index(b)) => matrix[*a][*b],
            _ => panic!("point {p} / {q} does not fit the {} metric", self.kind_name()),
        }
    }

    /// Time-augmented distance `g(x(u), x(v)) + |t(u) - t(v)|`.
    pub fn augmented_distance(&self, u: &TimedPoint, v: &TimedPoint) -> Result<f64, MetricError> {
        Ok(self.ground_distance(&u.point, &v.point)? + (u.time - v.time).abs())
    }

    /// Unchecked variant of [`GroundMetric::augmented_distance`].
    pub fn augmented(&self, u: &TimedPoint, v: &TimedPoint) -> f64 {
        self.dist(&u.point, &v.point) + (u.time - v.time).abs()
    }
}

fn validate_matrix(matrix: &[Vec<f64>]) -> Result<(), MetricError> {
    let n = matrix.len();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(MetricError::NotSquare { row, len: r.len(), expected: n });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let v = matrix[i][j];
            if !v.is_finite() || v < 0.0 {
                return Err(MetricError::BadEntry { i, j, value: v });
            }
        }
        if matrix[i][i] != 0.0 {
            return Err(MetricError::NonZeroDiagonal(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix[i][j] != matrix[j][i] {
                return Err(MetricError::Asymmetric { i, j });
            }
            if matrix[i][j] == 0.0 {
                return Err(MetricError::ZeroOffDiagonal { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let direct = matrix[i][k];
                let detour = matrix[i][j] + matrix[j][k];
                if direct > detour + EPSILON {
                    return Err(MetricError::Triangle { i, j, k, direct, detour });
                }
            }
        }
    }
    Ok(())
}

/// A point of the time-augmented space `S x R+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub point: Point,
    pub time: f64,
}

impl TimedPoint {
    pub fn new(point: Point, time: f64) -> Self {
        TimedPoint { point, time }
    }
}

/// One request of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedRequest {
    pub id: RequestId,
    #[serde(rename = "t")]
    pub arrival: f64,
    #[serde(rename = "x")]
    pub point: Point,
}

impl TimedRequest {
    pub fn new(id: RequestId, point: Point, arrival: f64) -> Self {
        TimedRequest { id, point, arrival }
    }

    pub fn timed_point(&self) -> TimedPoint {
        TimedPoint::new(self.point.clone(), self.arrival)
    }
}

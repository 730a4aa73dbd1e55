//! Library side of the `mpmd` command-line tool: algorithm dispatch,
//! instance generation flags and benchmark sweeps.

pub mod algorithms;
pub mod bench;

use anyhow::{bail, Context, Result};
use mpmd_core::GeneratorKind;

/// Environment variable that overrides `--seed` when set.
pub const SEED_ENV: &str = "MPMD_SEED";

/// Applies the `MPMD_SEED` override.
pub fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(flag),
    }
}

/// Generator parameters shared by `gen` and `bench`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub metric: String,
    pub dim: usize,
    pub side: u32,
    pub points: usize,
    pub scale: f64,
    pub centers: Vec<f64>,
    pub spread: u32,
    pub distance: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            metric: "euclidean".into(),
            dim: 2,
            side: 10,
            points: 4,
            scale: 1.0,
            centers: vec![0.0, 20.0],
            spread: 2,
            distance: 5.0,
        }
    }
}

impl GenParams {
    pub fn kind(&self) -> Result<GeneratorKind> {
        Ok(match self.metric.as_str() {
            "euclidean" => GeneratorKind::EuclideanRandom { dim: self.dim, side: self.side },
            "line" => GeneratorKind::LineClusters { centers: self.centers.clone(), spread: self.spread },
            "uniform" => GeneratorKind::UniformPoints { scale: self.scale, points: self.points },
            "two-point" => GeneratorKind::TwoPointAdversary { distance: self.distance },
            other => bail!("unknown metric {other:?}; expected euclidean, line, uniform or two-point"),
        })
    }
}

/// Largest `m` accepted by [`parse_m_range`].
pub const MAX_M: usize = 1 << 16;

/// Parses `A..B` or `A..=B` (both inclusive) or a single `A` into the even
/// values of that range.
pub fn parse_m_range(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim_start_matches('=').trim()),
        None => (s, s),
    };
    let lo: usize = lo.parse().with_context(|| format!("bad range start {lo:?}"))?;
    let hi: usize = hi.parse().with_context(|| format!("bad range end {hi:?}"))?;
    if lo > hi {
        bail!("empty range {lo}..{hi}");
    }
    if hi > MAX_M {
        bail!("m above {MAX_M} is not supported");
    }
    let ms: Vec<usize> = (lo..=hi).filter(|m| m % 2 == 0 && *m > 0).collect();
    if ms.is_empty() {
        bail!("range {lo}..{hi} contains no even m");
    }
    Ok(ms)
}

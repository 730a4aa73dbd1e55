#![allow(dead_code)]

use mpmd_core::{generate, GeneratorKind, GeneratorSpec, Instance};

/// Cycles through the generator families so sweeps mix metrics.
pub fn mixed_kind(i: u64) -> GeneratorKind {
    match i % 5 {
        0 => GeneratorKind::EuclideanRandom { dim: 2, side: 10 },
        1 => GeneratorKind::LineClusters { centers: vec![0.0, 20.0, 45.0], spread: 3 },
        2 => GeneratorKind::UniformPoints { scale: 2.0, points: 4 },
        3 => GeneratorKind::TwoPointAdversary { distance: 5.0 },
        _ => GeneratorKind::EuclideanRandom { dim: 1, side: 30 },
    }
}

pub fn mixed_instance(i: u64, m: usize) -> Instance {
    generate(&GeneratorSpec::new(mixed_kind(i), m, 1000 + i)).expect("valid spec")
}

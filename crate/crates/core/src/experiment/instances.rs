//! Seeded random measures for the Prohorov validation experiment.
//!
//! Each instance picks its space (finite 0/1, real line, or plane under the
//! max metric) and draws measures with up to `max_support` atoms. Real
//! coordinates lie in `[0, 2)`; every other instance snaps them to a
//! quarter-lattice so that distance ties and coincident atoms are exercised.

use rand::Rng as _;

use crate::error::Result;
use crate::measure::{MetricSpace, Point, PointMassMeasure};
use crate::seed;

fn random_space(rng: &mut seed::Rng) -> MetricSpace {
    match rng.random_range(0..3) {
        0 => MetricSpace::finite(rng.random_range(2..=6)),
        1 => MetricSpace::RealLine,
        _ => MetricSpace::RealPair,
    }
}

fn coordinate(rng: &mut seed::Rng, lattice: bool) -> f64 {
    if lattice {
        f64::from(rng.random_range(0..8u32)) / 4.0
    } else {
        rng.random_range(0.0..2.0)
    }
}

fn random_measure(space: MetricSpace, max_support: usize, lattice: bool, rng: &mut seed::Rng) -> Result<PointMassMeasure> {
    let k = rng.random_range(1..=max_support);
    // repeated draws are dropped, so small spaces give smaller supports
    let mut support: Vec<Point> = Vec::with_capacity(k);
    for _ in 0..k {
        let p = match space {
            MetricSpace::Finite { size } => Point::Symbol(rng.random_range(0..size)),
            MetricSpace::RealLine => Point::Real(coordinate(rng, lattice)),
            MetricSpace::RealPair => Point::Pair([coordinate(rng, lattice), coordinate(rng, lattice)]),
        };
        if !support.contains(&p) {
            support.push(p);
        }
    }
    let weights: Vec<f64> = (0..support.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    PointMassMeasure::from_weights(space, support, &weights)
}

/// `count` tuples of `arity` measures sharing one random space, each tuple
/// drawn from its own child seed of `seed`.
pub fn random_measure_tuples(seed: u64, count: usize, arity: usize, max_support: usize) -> Result<Vec<Vec<PointMassMeasure>>> {
    (0..count)
        .map(|i| {
            let mut rng = seed::rng(seed::derive(seed, "instance", i as u64));
            let space = random_space(&mut rng);
            let lattice = i % 2 == 1;
            (0..arity)
                .map(|_| random_measure(space, max_support.max(1), lattice, &mut rng))
                .collect()
        })
        .collect()
}

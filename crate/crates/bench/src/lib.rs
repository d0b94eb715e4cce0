//! Fixtures shared by the benchmarks.

use bilevel_core::data::{synth_instance, Family};
use bilevel_core::{assemble_penalized, BilevelInstance, PenalizedObjective};

/// A seeded synthetic instance and its penalized objective at `gamma`.
pub fn fixture(family: Family, rows: usize, cols: usize, gamma: f64) -> (BilevelInstance, PenalizedObjective) {
    let (instance, _) = synth_instance(family, rows, cols, 42).expect("synthetic instance");
    let objective = assemble_penalized(&instance, gamma).expect("penalized objective");
    (instance, objective)
}

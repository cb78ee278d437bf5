//! Fixtures shared by the benchmarks.

use fepls::{generate, BurrLaw, Dataset, ModelSpec};

/// Default simulation design at sample size `n` and grid size `d`.
pub fn design(n: usize, d: usize) -> ModelSpec {
    let mut spec = ModelSpec::new(BurrLaw::new(0.5, -1.0).unwrap(), 1.5)
        .unwrap()
        .with_grid_size(d)
        .unwrap();
    spec.n = n;
    spec
}

pub fn dataset(n: usize, d: usize) -> Dataset {
    generate(&design(n, d), 42).unwrap()
}

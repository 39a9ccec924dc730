//! Seeded fixtures shared by the benchmarks.

use frechet_anova::dist::derive_stream;
use frechet_anova::generators::{ScenarioKind, ScenarioSpec};
use frechet_anova::{GroupedSample, ObjectSample};

/// Two groups of `n` Gaussian quantile grids, shifted by `delta`.
pub fn distributions(n: usize, delta: f64) -> GroupedSample<ObjectSample> {
    ScenarioSpec::distribution_location(vec![n, n])
        .generate(delta, &mut derive_stream(1, 0))
        .unwrap()
}

/// Two groups of `n` preferential-attachment Laplacians.
pub fn networks(n: usize, nodes: usize) -> GroupedSample<ObjectSample> {
    let mut spec = ScenarioSpec::ba_network(vec![n, n]);
    if let ScenarioKind::BaNetwork { nodes: ref mut v, .. } = spec.kind {
        *v = nodes;
    }
    spec.generate(2.5, &mut derive_stream(2, 0)).unwrap()
}

/// `k` groups of `n` points in `[0, 1]^dim`.
pub fn vectors(k: usize, n: usize, dim: usize) -> GroupedSample<ObjectSample> {
    let mut spec = ScenarioSpec::beta_vector(vec![n; k]);
    if let ScenarioKind::BetaVector { dim: ref mut d, .. } = spec.kind {
        *d = dim;
    }
    spec.generate(1.0, &mut derive_stream(3, 0)).unwrap()
}

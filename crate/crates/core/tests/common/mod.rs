//! Strategies and property checks shared by the property suite and the
//! acceptance runner.
#![allow(dead_code)]

use frechet_anova::baselines::{energy_test, mmd_test};
use frechet_anova::dist::{derive_stream, RandomStream};
use frechet_anova::generators::{
    gen_ba_laplacian_sample, gen_beta_vector_sample, gen_gaussian_qd_sample, gen_truncated_mvt_sample,
};
use frechet_anova::ksample::{self, GroupedSample};
use frechet_anova::spaces::{
    empirical_quantile_grid, laplacian_from_adjacency, MatrixKind, MetricObject, QuantileDistribution,
    SquareMatrixObject,
};
use frechet_anova::{bootstrap_variance_interval, KSampleTest, MetricSample, ObjectSample};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const CASES: u32 = 256;

pub fn config() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

pub fn stream(seed: u64) -> RandomStream {
    derive_stream(seed, 0)
}

/// A random valid object of the given kind, built from a seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    Quantile,
    Laplacian,
    Correlation,
    Point,
}

pub fn random_object(kind: ObjectKind, size: usize, s: &mut RandomStream) -> MetricObject {
    match kind {
        ObjectKind::Quantile => {
            let mut v: Vec<f64> = (0..size).map(|_| 3.0 * s.normal()).collect();
            v.sort_by(f64::total_cmp);
            MetricObject::Quantile(QuantileDistribution::new(v).unwrap())
        }
        ObjectKind::Laplacian => {
            let mut w = vec![0.0; size * size];
            for i in 0..size {
                for j in (i + 1)..size {
                    let x = if s.uniform() < 0.4 { 0.0 } else { 2.0 * s.uniform() };
                    w[i * size + j] = x;
                    w[j * size + i] = x;
                }
            }
            MetricObject::Matrix(laplacian_from_adjacency(size, &w).unwrap())
        }
        ObjectKind::Correlation => MetricObject::Matrix(random_correlation(size, s)),
        ObjectKind::Point => MetricObject::Point(
            frechet_anova::spaces::EuclideanPoint::new((0..size).map(|_| 2.0 * s.normal()).collect()).unwrap(),
        ),
    }
}

/// `A Aᵀ` rescaled to unit diagonal.
pub fn random_correlation(dim: usize, s: &mut RandomStream) -> SquareMatrixObject {
    let a: Vec<f64> = (0..dim * (dim + 1)).map(|_| s.normal()).collect();
    let cols = dim + 1;
    let mut c = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let v: f64 = (0..cols).map(|k| a[i * cols + k] * a[j * cols + k]).sum();
            c[i * dim + j] = v;
            c[j * dim + i] = v;
        }
    }
    let d: Vec<f64> = (0..dim).map(|i| c[i * dim + i].sqrt()).collect();
    let mut r = vec![0.0; dim * dim];
    for i in 0..dim {
        r[i * dim + i] = 1.0;
        for j in (i + 1)..dim {
            let v = (c[i * dim + j] / (d[i] * d[j])).clamp(-1.0, 1.0);
            r[i * dim + j] = v;
            r[j * dim + i] = v;
        }
    }
    SquareMatrixObject::new(dim, r, MatrixKind::Correlation).unwrap()
}

pub fn object_kind() -> impl Strategy<Value = ObjectKind> {
    prop_oneof![
        Just(ObjectKind::Quantile),
        Just(ObjectKind::Laplacian),
        Just(ObjectKind::Correlation),
        Just(ObjectKind::Point),
    ]
}

pub fn metric_axioms_input() -> impl Strategy<Value = (ObjectKind, usize, u64)> {
    (object_kind(), 2usize..8, any::<u64>())
}

pub fn check_metric_axioms((kind, size, seed): (ObjectKind, usize, u64)) -> Result<(), TestCaseError> {
    let mut s = stream(seed);
    let x = random_object(kind, size, &mut s);
    let y = random_object(kind, size, &mut s);
    let z = random_object(kind, size, &mut s);
    let d = |a: &MetricObject, b: &MetricObject| a.distance(b).unwrap();
    prop_assert_eq!(d(&x, &x), 0.0);
    prop_assert!(d(&x, &y) >= 0.0);
    prop_assert_eq!(d(&x, &y), d(&y, &x));
    prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
    Ok(())
}

/// Grouped Euclidean or Wasserstein data with random group sizes. Groups of
/// two objects are always degenerate, so sizes start at 3.
pub fn grouped_input() -> impl Strategy<Value = (bool, Vec<usize>, u64)> {
    (any::<bool>(), prop::collection::vec(3usize..12, 2..5), any::<u64>())
}

pub fn grouped_data(wasserstein: bool, sizes: &[usize], seed: u64) -> GroupedSample<ObjectSample> {
    let mut s = stream(seed);
    let groups: Vec<ObjectSample> = sizes
        .iter()
        .enumerate()
        .map(|(g, &n)| {
            let shift = g as f64 * 0.3;
            if wasserstein {
                let objs = (0..n)
                    .map(|_| {
                        let raw: Vec<f64> = (0..15).map(|_| shift + (1.0 + g as f64) * s.normal()).collect();
                        empirical_quantile_grid(&raw, 12).unwrap()
                    })
                    .collect();
                ObjectSample::from_quantiles(objs).unwrap()
            } else {
                let pts = (0..n)
                    .map(|_| {
                        frechet_anova::spaces::EuclideanPoint::new(vec![
                            shift + s.normal(),
                            (1.0 + g as f64) * s.normal(),
                        ])
                        .unwrap()
                    })
                    .collect();
                ObjectSample::from_points(pts).unwrap()
            }
        })
        .collect();
    GroupedSample::from_samples(&groups).unwrap()
}

pub fn check_fn_nonnegative((w, sizes, seed): (bool, Vec<usize>, u64)) -> Result<(), TestCaseError> {
    let data = grouped_data(w, &sizes, seed);
    let s = ksample::group_summaries(&data).unwrap();
    let f = ksample::fn_statistic(&s);
    prop_assert!(f >= 0.0, "F_n = {}", f);
    let within: f64 = s.groups.iter().map(|g| g.lambda * g.variance).sum();
    prop_assert!(s.pooled_variance >= within - 1e-9);
    let total: f64 = s.groups.iter().map(|g| g.lambda).sum();
    prop_assert!((total - 1.0).abs() <= 1e-12);
    Ok(())
}

/// Statistics after relabelling group `g` as `(g + rotate) mod k`.
pub fn check_relabel_invariance((w, sizes, seed): (bool, Vec<usize>, u64), rotate: usize) -> Result<(), TestCaseError> {
    let data = grouped_data(w, &sizes, seed);
    let k = data.k();
    let labels: Vec<usize> = data.labels().iter().map(|&g| (g + rotate) % k).collect();
    let relabelled = GroupedSample::new(data.sample().clone(), labels).unwrap();
    let a = ksample::group_summaries(&data).unwrap();
    let b = ksample::group_summaries(&relabelled).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    prop_assert!(close(ksample::fn_statistic(&a), ksample::fn_statistic(&b)));
    prop_assert!(close(
        ksample::un_statistic(&a).unwrap(),
        ksample::un_statistic(&b).unwrap()
    ));
    prop_assert!(close(
        ksample::tn_statistic(&a).unwrap(),
        ksample::tn_statistic(&b).unwrap()
    ));
    Ok(())
}

pub fn quantile_grid_input() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (prop::collection::vec(-1e6f64..1e6, 2..60), 2usize..200)
}

pub fn check_quantile_monotone((raw, m): (Vec<f64>, usize)) -> Result<(), TestCaseError> {
    let g = empirical_quantile_grid(&raw, m).unwrap();
    prop_assert_eq!(g.grid_size(), m);
    prop_assert!(g.values().windows(2).all(|w| w[0] <= w[1]));
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    prop_assert!(g.values().iter().all(|&v| lo <= v && v <= hi));
    Ok(())
}

pub fn network_input() -> impl Strategy<Value = (usize, f64, usize, u64)> {
    (3usize..25, 2.0f64..=3.5, 1usize..4, any::<u64>())
}

pub fn check_network_laplacians((nodes, gamma, m, seed): (usize, f64, usize, u64)) -> Result<(), TestCaseError> {
    let nodes = nodes.max(m + 1);
    let s = gen_ba_laplacian_sample(3, nodes, gamma, m, &mut stream(seed)).unwrap();
    for obj in s.objects() {
        match obj {
            MetricObject::Matrix(l) => {
                prop_assert!(l.validate().is_ok());
                prop_assert_eq!(l.kind(), MatrixKind::Laplacian);
                // no isolated nodes
                prop_assert!((0..nodes).all(|i| l.get(i, i) >= 1.0));
            }
            _ => prop_assert!(false, "not a matrix"),
        }
    }
    Ok(())
}

/// Runs every stochastic operation twice with the same seed.
pub fn check_seed_determinism(seed: u64) -> Result<(), TestCaseError> {
    let mut a = stream(seed);
    let mut b = stream(seed);
    for _ in 0..50 {
        prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        prop_assert_eq!(a.normal().to_bits(), b.normal().to_bits());
        prop_assert_eq!(a.gamma(0.7).to_bits(), b.gamma(0.7).to_bits());
        prop_assert_eq!(a.beta(0.5, 2.0).to_bits(), b.beta(0.5, 2.0).to_bits());
        prop_assert_eq!(a.student_t(3.0).to_bits(), b.student_t(3.0).to_bits());
        prop_assert_eq!(a.index(17), b.index(17));
    }

    type Gen = fn(&mut RandomStream) -> ObjectSample;
    let gens: [Gen; 4] = [
        |s| gen_gaussian_qd_sample(6, 0.0, 0.7, 10, s).unwrap(),
        |s| gen_ba_laplacian_sample(4, 8, 2.5, 2, s).unwrap(),
        |s| gen_truncated_mvt_sample(6, 3, Some(2.0), 5.0, s).unwrap(),
        |s| gen_beta_vector_sample(6, 3, 0.8, s).unwrap(),
    ];
    for g in gens {
        prop_assert_eq!(g(&mut stream(seed)), g(&mut stream(seed)));
    }

    let data = grouped_data(seed % 2 == 0, &[6, 7], seed);
    let t = KSampleTest::new().replicates(99).seed(seed).ridge(1e-9);
    prop_assert_eq!(t.permutation(&data).unwrap(), t.permutation(&data).unwrap());
    prop_assert_eq!(t.bootstrap(&data).unwrap(), t.bootstrap(&data).unwrap());
    prop_assert_eq!(
        energy_test(&data, 99, seed).unwrap(),
        energy_test(&data, 99, seed).unwrap()
    );
    prop_assert_eq!(mmd_test(&data, 99, seed).unwrap(), mmd_test(&data, 99, seed).unwrap());
    let sample = data.sample();
    prop_assert_eq!(
        bootstrap_variance_interval(sample, 0.9, 100, None, seed).unwrap(),
        bootstrap_variance_interval(sample, 0.9, 100, None, seed).unwrap()
    );
    prop_assert!(sample.len() == 13);
    Ok(())
}

/// Kolmogorov distance between the empirical CDF of `xs` and `cdf`.
pub fn ks_distance(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Euclidean sample of `n` draws from `N(0, I_dim)`.
pub fn normal_points(n: usize, dim: usize, s: &mut RandomStream) -> ObjectSample {
    let pts = (0..n)
        .map(|_| frechet_anova::spaces::EuclideanPoint::new((0..dim).map(|_| s.normal()).collect()).unwrap())
        .collect();
    ObjectSample::from_points(pts).unwrap()
}

/// `k` groups of `n_j` draws each from one `N(0, I_dim)`.
pub fn null_normal_groups(k: usize, n_j: usize, dim: usize, s: &mut RandomStream) -> GroupedSample<ObjectSample> {
    let groups: Vec<ObjectSample> = (0..k).map(|_| normal_points(n_j, dim, s)).collect();
    GroupedSample::from_samples(&groups).unwrap()
}

//! Samplers for the simulation scenarios.

use serde::{Deserialize, Serialize};

use crate::dist::RandomStream;
use crate::error::{Error, Result};
use crate::ksample::GroupedSample;
use crate::spaces::{laplacian_from_adjacency, standard_normal_grid, ObjectSample};

/// Exact quantile grids of `N(μ_i, 1)` with `μ_i ~ N(mu_mean, mu_sd²)`.
pub fn gen_gaussian_qd_sample(
    n: usize,
    mu_mean: f64,
    mu_sd: f64,
    grid_size: usize,
    stream: &mut RandomStream,
) -> Result<ObjectSample> {
    check_n(n)?;
    if !(mu_sd >= 0.0 && mu_sd.is_finite()) || !mu_mean.is_finite() {
        return Err(Error::input(format!(
            "location hyperparameters must be finite with mu_sd >= 0, got ({mu_mean}, {mu_sd})"
        )));
    }
    let z = standard_normal_grid(grid_size)?;
    let mut data = Vec::with_capacity(n * grid_size);
    for _ in 0..n {
        let mu = mu_mean + mu_sd * stream.normal();
        data.extend(z.iter().map(|&q| mu + q));
    }
    ObjectSample::from_quantile_rows(grid_size, data)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::input("sample size must be at least 1"))
    } else {
        Ok(())
    }
}

/// Edge list of a preferential-attachment graph.
///
/// Starts from a clique on `edges_per_step + 1` nodes; every later node
/// attaches to `edges_per_step` distinct existing nodes chosen with
/// probability proportional to `degree + a`, where `a = edges_per_step·(γ - 3)`
/// makes the degree tail exponent `γ`.
pub fn ba_graph(
    nodes: usize,
    gamma: f64,
    edges_per_step: usize,
    stream: &mut RandomStream,
) -> Result<Vec<(usize, usize)>> {
    if !(2.0..=3.5).contains(&gamma) {
        return Err(Error::input(format!("gamma must lie in [2, 3.5], got {gamma}")));
    }
    let m = edges_per_step;
    if m == 0 || nodes < 3 || nodes < m + 1 {
        return Err(Error::input(format!(
            "cannot grow a {nodes}-node network adding {m} edges per step (need nodes >= max(3, edges_per_step + 1))"
        )));
    }
    let a = m as f64 * (gamma - 3.0);
    let mut edges = Vec::with_capacity(m * nodes);
    let mut degree = vec![0usize; nodes];
    for i in 0..=m {
        for j in (i + 1)..=m {
            edges.push((i, j));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
    let mut weights = Vec::with_capacity(nodes);
    let mut chosen = Vec::with_capacity(m);
    for v in (m + 1)..nodes {
        weights.clear();
        weights.extend(degree[..v].iter().map(|&d| (d as f64 + a).max(0.0)));
        chosen.clear();
        for _ in 0..m {
            let t = pick_weighted(&weights, stream);
            weights[t] = TAKEN;
            chosen.push(t);
        }
        for &t in &chosen {
            edges.push((t, v));
            degree[t] += 1;
            degree[v] += 1;
        }
    }
    Ok(edges)
}

/// Marks a node already chosen in the current step.
const TAKEN: f64 = -1.0;

/// Index drawn with probability proportional to `weights`, skipping `TAKEN`
/// entries; uniform over the free entries when all of them weigh zero.
fn pick_weighted(weights: &[f64], stream: &mut RandomStream) -> usize {
    let total: f64 = weights.iter().filter(|&&w| w > 0.0).sum();
    if total > 0.0 {
        let mut u = stream.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if u < w {
                    return i;
                }
                u -= w;
            }
        }
        // round-off: last positive entry
        return weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    }
    let free: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] == 0.0).collect();
    free[stream.index(free.len())]
}

/// Node degrees of an edge list.
pub fn degrees(nodes: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut d = vec![0; nodes];
    for &(i, j) in edges {
        d[i] += 1;
        d[j] += 1;
    }
    d
}

/// Graph Laplacians of independent preferential-attachment networks.
pub fn gen_ba_laplacian_sample(
    n: usize,
    nodes: usize,
    gamma: f64,
    edges_per_step: usize,
    stream: &mut RandomStream,
) -> Result<ObjectSample> {
    check_n(n)?;
    let mut mats = Vec::with_capacity(n);
    let mut adj = vec![0.0; nodes * nodes];
    for _ in 0..n {
        adj.iter_mut().for_each(|x| *x = 0.0);
        for (i, j) in ba_graph(nodes, gamma, edges_per_step, stream)? {
            adj[i * nodes + j] = 1.0;
            adj[j * nodes + i] = 1.0;
        }
        mats.push(laplacian_from_adjacency(nodes, &adj)?);
    }
    ObjectSample::from_matrices(mats)
}

/// Vectors from `N(0, I)` (`dof = None`) or the multivariate `t_dof(0, I)`,
/// truncated to the cube `[-bound, bound]^dim`. A draw with any coordinate
/// outside the cube is redrawn as a whole.
pub fn gen_truncated_mvt_sample(
    n: usize,
    dim: usize,
    dof: Option<f64>,
    bound: f64,
    stream: &mut RandomStream,
) -> Result<ObjectSample> {
    check_n(n)?;
    if dim == 0 || !(bound > 0.0) {
        return Err(Error::input(format!(
            "need dim >= 1 and bound > 0, got ({dim}, {bound})"
        )));
    }
    if let Some(m) = dof {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::input(format!("degrees of freedom must be positive, got {m}")));
        }
    }
    let mut data = Vec::with_capacity(n * dim);
    let mut x = vec![0.0; dim];
    for _ in 0..n {
        loop {
            x.iter_mut().for_each(|v| *v = stream.normal());
            if let Some(m) = dof {
                let scale = (m / stream.chi_square(m)).sqrt();
                x.iter_mut().for_each(|v| *v *= scale);
            }
            if x.iter().all(|v| v.abs() <= bound) {
                break;
            }
        }
        data.extend_from_slice(&x);
    }
    ObjectSample::from_point_rows(dim, data)
}

/// Vectors of independent `Beta(beta, beta)` coordinates.
pub fn gen_beta_vector_sample(n: usize, dim: usize, beta: f64, stream: &mut RandomStream) -> Result<ObjectSample> {
    check_n(n)?;
    if dim == 0 || !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::input(format!("need dim >= 1 and beta > 0, got ({dim}, {beta})")));
    }
    let data: Vec<f64> = (0..n * dim).map(|_| stream.beta(beta, beta)).collect();
    ObjectSample::from_point_rows(dim, data)
}

fn default_group_sizes() -> Vec<usize> {
    vec![100, 100]
}

fn default_grid_size() -> usize {
    100
}

/// A two-or-more group simulation design. Group 1 is drawn at the baseline,
/// every other group at the scenario parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    #[serde(default = "default_group_sizes")]
    pub group_sizes: Vec<usize>,
}

/// Scenario family. Hyperdistribution spreads are variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `N(μ, 1)` objects with `μ ~ N(0, v)` in group 1 and `N(δ, v)` otherwise.
    DistributionLocation {
        #[serde(default = "DistributionDefaults::location_variance")]
        mu_variance: f64,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
    },
    /// `N(μ, 1)` objects with `μ ~ N(0, v)` in group 1 and `N(0, v·r)` otherwise.
    DistributionScale {
        #[serde(default = "DistributionDefaults::scale_variance")]
        base_variance: f64,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
    },
    /// Laplacians of preferential-attachment networks, tail exponent γ.
    BaNetwork {
        #[serde(default = "NetworkDefaults::nodes")]
        nodes: usize,
        #[serde(default = "NetworkDefaults::edges_per_step")]
        edges_per_step: usize,
        #[serde(default = "NetworkDefaults::baseline_gamma")]
        baseline_gamma: f64,
    },
    /// Truncated `N(0, I)` in group 1 against truncated `t_m(0, I)`.
    TruncatedMvt {
        #[serde(default = "VectorDefaults::dim")]
        dim: usize,
        #[serde(default = "VectorDefaults::bound")]
        bound: f64,
    },
    /// `Beta(b0, b0)` coordinates in group 1 against `Beta(β, β)`.
    BetaVector {
        #[serde(default = "VectorDefaults::dim")]
        dim: usize,
        #[serde(default = "VectorDefaults::baseline_beta")]
        baseline_beta: f64,
    },
}

struct DistributionDefaults;
impl DistributionDefaults {
    fn location_variance() -> f64 {
        0.5
    }
    fn scale_variance() -> f64 {
        0.2
    }
}

struct NetworkDefaults;
impl NetworkDefaults {
    fn nodes() -> usize {
        10
    }
    fn edges_per_step() -> usize {
        2
    }
    fn baseline_gamma() -> f64 {
        2.5
    }
}

struct VectorDefaults;
impl VectorDefaults {
    fn dim() -> usize {
        5
    }
    fn bound() -> f64 {
        5.0
    }
    fn baseline_beta() -> f64 {
        1.0
    }
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, group_sizes: Vec<usize>) -> Self {
        Self { kind, group_sizes }
    }

    /// Location scenario with default settings.
    pub fn distribution_location(group_sizes: Vec<usize>) -> Self {
        Self::new(
            ScenarioKind::DistributionLocation {
                mu_variance: DistributionDefaults::location_variance(),
                grid_size: default_grid_size(),
            },
            group_sizes,
        )
    }

    pub fn distribution_scale(group_sizes: Vec<usize>) -> Self {
        Self::new(
            ScenarioKind::DistributionScale {
                base_variance: DistributionDefaults::scale_variance(),
                grid_size: default_grid_size(),
            },
            group_sizes,
        )
    }

    pub fn ba_network(group_sizes: Vec<usize>) -> Self {
        Self::new(
            ScenarioKind::BaNetwork {
                nodes: NetworkDefaults::nodes(),
                edges_per_step: NetworkDefaults::edges_per_step(),
                baseline_gamma: NetworkDefaults::baseline_gamma(),
            },
            group_sizes,
        )
    }

    pub fn truncated_mvt(group_sizes: Vec<usize>) -> Self {
        Self::new(
            ScenarioKind::TruncatedMvt {
                dim: VectorDefaults::dim(),
                bound: VectorDefaults::bound(),
            },
            group_sizes,
        )
    }

    pub fn beta_vector(group_sizes: Vec<usize>) -> Self {
        Self::new(
            ScenarioKind::BetaVector {
                dim: VectorDefaults::dim(),
                baseline_beta: VectorDefaults::baseline_beta(),
            },
            group_sizes,
        )
    }

    /// Short scenario name used in output tables.
    pub fn name(&self) -> &'static str {
        match self.kind {
            ScenarioKind::DistributionLocation { .. } => "distribution_location",
            ScenarioKind::DistributionScale { .. } => "distribution_scale",
            ScenarioKind::BaNetwork { .. } => "ba_network",
            ScenarioKind::TruncatedMvt { .. } => "truncated_mvt",
            ScenarioKind::BetaVector { .. } => "beta_vector",
        }
    }

    /// Parameter value under which all groups share one distribution, if any.
    pub fn null_param(&self) -> Option<f64> {
        match self.kind {
            ScenarioKind::DistributionLocation { .. } => Some(0.0),
            ScenarioKind::DistributionScale { .. } => Some(1.0),
            ScenarioKind::BaNetwork { baseline_gamma, .. } => Some(baseline_gamma),
            ScenarioKind::TruncatedMvt { .. } => None,
            ScenarioKind::BetaVector { baseline_beta, .. } => Some(baseline_beta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_sizes.len() < 2 {
            return Err(Error::input("a scenario needs at least 2 groups"));
        }
        if let Some(g) = self.group_sizes.iter().position(|&n| n < 2) {
            return Err(Error::GroupSize {
                group: g,
                size: self.group_sizes[g],
            });
        }
        Ok(())
    }

    /// Draws one dataset at scenario parameter `param`.
    pub fn generate(&self, param: f64, stream: &mut RandomStream) -> Result<GroupedSample<ObjectSample>> {
        self.validate()?;
        let groups = self
            .group_sizes
            .iter()
            .enumerate()
            .map(|(g, &n)| self.generate_group(g == 0, n, param, stream))
            .collect::<Result<Vec<_>>>()?;
        GroupedSample::from_samples(&groups)
    }

    fn generate_group(&self, baseline: bool, n: usize, param: f64, stream: &mut RandomStream) -> Result<ObjectSample> {
        match self.kind {
            ScenarioKind::DistributionLocation { mu_variance, grid_size } => {
                let mean = if baseline { 0.0 } else { param };
                gen_gaussian_qd_sample(n, mean, sqrt_variance(mu_variance)?, grid_size, stream)
            }
            ScenarioKind::DistributionScale {
                base_variance,
                grid_size,
            } => {
                if !baseline && !(param > 0.0) {
                    return Err(Error::input(format!("variance ratio must be positive, got {param}")));
                }
                let v = if baseline { base_variance } else { base_variance * param };
                gen_gaussian_qd_sample(n, 0.0, sqrt_variance(v)?, grid_size, stream)
            }
            ScenarioKind::BaNetwork {
                nodes,
                edges_per_step,
                baseline_gamma,
            } => {
                let gamma = if baseline { baseline_gamma } else { param };
                gen_ba_laplacian_sample(n, nodes, gamma, edges_per_step, stream)
            }
            ScenarioKind::TruncatedMvt { dim, bound } => {
                let dof = if baseline { None } else { Some(param) };
                gen_truncated_mvt_sample(n, dim, dof, bound, stream)
            }
            ScenarioKind::BetaVector { dim, baseline_beta } => {
                let beta = if baseline { baseline_beta } else { param };
                gen_beta_vector_sample(n, dim, beta, stream)
            }
        }
    }
}

fn sqrt_variance(v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v.sqrt())
    } else {
        Err(Error::input(format!(
            "variance must be finite and non-negative, got {v}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::derive_stream;
    use crate::frechet::frechet_summary;
    use crate::spaces::{MetricObject, MetricSample, QuantileDistribution};

    #[test]
    fn zero_spread_gives_the_fixed_grid() {
        let s = gen_gaussian_qd_sample(5, 1.5, 0.0, 20, &mut derive_stream(1, 0)).unwrap();
        let expected = QuantileDistribution::normal(20, 1.5, 1.0).unwrap();
        for obj in s.objects() {
            match obj {
                MetricObject::Quantile(q) => {
                    for (a, b) in q.values().iter().zip(expected.values()) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn gaussian_qd_frechet_quantities() {
        let sd = 0.5_f64;
        let s = gen_gaussian_qd_sample(5000, 0.0, sd, 50, &mut derive_stream(2, 0)).unwrap();
        let f = frechet_summary(&s).unwrap();
        assert!((f.variance - sd * sd).abs() / (sd * sd) < 0.1, "{}", f.variance);
        let target = 2.0 * sd.powi(4);
        assert!((f.sigma_sq - target).abs() / target < 0.15, "{}", f.sigma_sq);
    }

    #[test]
    fn three_node_trees() {
        let mut seen = [0usize; 2];
        let mut stream = derive_stream(3, 0);
        for _ in 0..2000 {
            let e = ba_graph(3, 2.5, 1, &mut stream).unwrap();
            assert_eq!(e.len(), 2);
            assert_eq!(e[0], (0, 1));
            match e[1] {
                (0, 2) => seen[0] += 1,
                (1, 2) => seen[1] += 1,
                other => panic!("unexpected edge {other:?}"),
            }
        }
        // both leaves of the seed edge have degree 1, so each tree is equally likely
        let frac = seen[0] as f64 / 2000.0;
        assert!((frac - 0.5).abs() < 0.05, "{frac}");
    }

    #[test]
    fn ba_graphs_are_simple_and_connected() {
        let mut stream = derive_stream(4, 0);
        for gamma in [2.0, 2.5, 3.0, 3.5] {
            let e = ba_graph(30, gamma, 2, &mut stream).unwrap();
            let mut sorted: Vec<_> = e.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), e.len());
            assert!(e.iter().all(|&(a, b)| a != b));
            assert!(degrees(30, &e).iter().all(|&d| d >= 2));
        }
        assert!(ba_graph(2, 2.5, 1, &mut stream).is_err());
        assert!(ba_graph(3, 2.5, 3, &mut stream).is_err());
        assert!(ba_graph(10, 1.5, 2, &mut stream).is_err());
    }

    #[test]
    fn ba_laplacians_are_valid() {
        let s = gen_ba_laplacian_sample(20, 10, 2.5, 2, &mut derive_stream(5, 0)).unwrap();
        for obj in s.objects() {
            match obj {
                MetricObject::Matrix(m) => m.validate().unwrap(),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn truncation_and_support() {
        let mut stream = derive_stream(6, 0);
        let s = gen_truncated_mvt_sample(500, 5, Some(1.0), 5.0, &mut stream).unwrap();
        assert!((0..s.len()).all(|i| s.row(i).iter().all(|v| v.abs() <= 5.0)));
        let b = gen_beta_vector_sample(500, 5, 0.5, &mut stream).unwrap();
        assert!((0..b.len()).all(|i| b.row(i).iter().all(|v| (0.0..=1.0).contains(v))));
    }

    #[test]
    fn scenario_json_defaults() {
        let s: ScenarioSpec = serde_json::from_str(r#"{"kind": "ba_network"}"#).unwrap();
        assert_eq!(s, ScenarioSpec::ba_network(vec![100, 100]));
        let s: ScenarioSpec =
            serde_json::from_str(r#"{"kind": "distribution_location", "mu_variance": 0.25, "group_sizes": [10, 20]}"#)
                .unwrap();
        assert_eq!(
            s.kind,
            ScenarioKind::DistributionLocation {
                mu_variance: 0.25,
                grid_size: 100
            }
        );
        let back: ScenarioSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn scenario_generation_is_seeded() {
        let spec = ScenarioSpec::beta_vector(vec![10, 15]);
        let a = spec.generate(0.7, &mut derive_stream(7, 1)).unwrap();
        let b = spec.generate(0.7, &mut derive_stream(7, 1)).unwrap();
        assert_eq!(a.sample(), b.sample());
        assert_eq!(a.group_sizes(), vec![10, 15]);
        assert_eq!(spec.null_param(), Some(1.0));
        assert_eq!(ScenarioSpec::truncated_mvt(vec![2, 2]).null_param(), None);
        assert!(ScenarioSpec::beta_vector(vec![10])
            .generate(1.0, &mut derive_stream(0, 0))
            .is_err());
    }
}

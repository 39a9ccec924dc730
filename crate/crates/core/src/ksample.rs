//! The k-sample Fréchet ANOVA test.
//!
//! For groups `G_1..G_k` with weights `λ_j = n_j / n`, group summaries
//! `(V̂_j, σ̂²_j)` and pooled variance `V̂_p`:
//!
//! * `F_n = V̂_p - Σ λ_j V̂_j` measures separation of the group Fréchet means,
//! * `U_n = Σ_{j<l} λ_j λ_l (V̂_j - V̂_l)² / (σ̂²_j σ̂²_l)` measures differences
//!   between group Fréchet variances,
//! * `T_n = n U_n / Σ(λ_j/σ̂²_j) + n F_n² / Σ(λ_j² σ̂²_j)` combines both and
//!   is asymptotically `χ²(k-1)` under equality of distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{chi_square_quantile, chi_square_sf, derive_stream, ALGORITHM_ID};
use crate::error::{Error, Result};
use crate::frechet::{sigma_is_degenerate, summarize_into};
use crate::spaces::{MetricSample, ObjectSample};

/// `|F_n|` below this fraction of `V̂_p` is round-off and snaps to 0.
const F_ROUNDOFF_RTOL: f64 = 1e-12;

/// A sample whose objects carry group labels `0..k`.
#[derive(Debug, Clone)]
pub struct GroupedSample<S> {
    sample: S,
    labels: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl<S: MetricSample> GroupedSample<S> {
    /// Every label in `0..k` must occur at least twice, where `k - 1` is the
    /// largest label.
    pub fn new(sample: S, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != sample.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} objects",
                labels.len(),
                sample.len()
            )));
        }
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        if k < 2 {
            return Err(Error::input("at least 2 groups are required"));
        }
        let mut groups = vec![Vec::new(); k];
        for (i, &g) in labels.iter().enumerate() {
            groups[g].push(i);
        }
        for (g, members) in groups.iter().enumerate() {
            if members.len() < 2 {
                return Err(Error::GroupSize {
                    group: g,
                    size: members.len(),
                });
            }
        }
        Ok(Self { sample, labels, groups })
    }

    /// Consecutive blocks of the given sizes form the groups.
    pub fn from_sizes(sample: S, sizes: &[usize]) -> Result<Self> {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| std::iter::repeat_n(g, n))
            .collect();
        Self::new(sample, labels)
    }

    pub fn sample(&self) -> &S {
        &self.sample
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

impl GroupedSample<ObjectSample> {
    /// One group per sample, concatenated in order.
    pub fn from_samples(groups: &[ObjectSample]) -> Result<Self> {
        let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
        if let Some(g) = sizes.iter().position(|&n| n < 2) {
            return Err(Error::GroupSize {
                group: g,
                size: sizes[g],
            });
        }
        Self::from_sizes(ObjectSample::concat(groups)?, &sizes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary<M> {
    pub n: usize,
    pub lambda: f64,
    pub mean: M,
    pub variance: f64,
    pub sigma_sq: f64,
}

/// Groupwise and pooled Fréchet summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummaries<M> {
    pub groups: Vec<GroupSummary<M>>,
    pub pooled_mean: M,
    pub pooled_variance: f64,
    pub n: usize,
    /// Added to every `σ̂²_j` where it is used as a weight.
    pub ridge: f64,
}

impl<M> GroupSummaries<M> {
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    fn weight_var(&self, j: usize) -> f64 {
        self.groups[j].sigma_sq + self.ridge
    }

    fn check_weights(&self) -> Result<()> {
        if self.ridge > 0.0 {
            return Ok(());
        }
        match self
            .groups
            .iter()
            .position(|g| sigma_is_degenerate(g.variance, g.sigma_sq))
        {
            Some(group) => Err(Error::DegenerateGroup { group }),
            None => Ok(()),
        }
    }
}

/// Groupwise and pooled summaries.
///
/// Degenerate groups (`σ̂²_j = 0`) are summarized normally; [`un_statistic`],
/// [`tn_statistic`] and the tests reject them.
pub fn group_summaries<S: MetricSample>(data: &GroupedSample<S>) -> Result<GroupSummaries<S::Mean>> {
    group_summaries_with_ridge(data, 0.0)
}

/// Like [`group_summaries`], recording a ridge: with `ridge > 0`,
/// `σ̂²_j + ridge` is used in `U_n` and `T_n` and degenerate groups are
/// accepted.
pub fn group_summaries_with_ridge<S: MetricSample>(
    data: &GroupedSample<S>,
    ridge: f64,
) -> Result<GroupSummaries<S::Mean>> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::input(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    let pooled: Vec<usize> = (0..data.n()).collect();
    let mut buf = Vec::with_capacity(data.n());
    summarize_groups(&data.sample, &data.groups, &pooled, ridge, &mut buf)
}

fn summarize_groups<S: MetricSample, G: AsRef<[usize]>>(
    sample: &S,
    groups: &[G],
    pooled: &[usize],
    ridge: f64,
    buf: &mut Vec<f64>,
) -> Result<GroupSummaries<S::Mean>> {
    let n = pooled.len();
    let groups: Vec<GroupSummary<S::Mean>> = groups
        .iter()
        .map(|members| {
            let members = members.as_ref();
            let s = summarize_into(sample, members, buf);
            GroupSummary {
                n: members.len(),
                lambda: members.len() as f64 / n as f64,
                mean: s.mean,
                variance: s.variance,
                sigma_sq: s.sigma_sq,
            }
        })
        .collect();
    let p = summarize_into(sample, pooled, buf);
    Ok(GroupSummaries {
        groups,
        pooled_mean: p.mean,
        pooled_variance: p.variance,
        n,
        ridge,
    })
}

/// `F_n = V̂_p - Σ λ_j V̂_j`, with round-off around zero snapped to 0.
pub fn fn_statistic<M>(s: &GroupSummaries<M>) -> f64 {
    let within: f64 = s.groups.iter().map(|g| g.lambda * g.variance).sum();
    let f = s.pooled_variance - within;
    if f.abs() <= F_ROUNDOFF_RTOL * s.pooled_variance.abs() {
        0.0
    } else {
        f
    }
}

/// `U_n = Σ_{j<l} λ_j λ_l (V̂_j - V̂_l)² / (σ̂²_j σ̂²_l)`.
pub fn un_statistic<M>(s: &GroupSummaries<M>) -> Result<f64> {
    s.check_weights()?;
    let mut u = 0.0;
    for j in 0..s.k() {
        for l in (j + 1)..s.k() {
            let (gj, gl) = (&s.groups[j], &s.groups[l]);
            let dv = gj.variance - gl.variance;
            u += gj.lambda * gl.lambda * dv * dv / (s.weight_var(j) * s.weight_var(l));
        }
    }
    Ok(u)
}

/// `T_n = n U_n / Σ(λ_j/σ̂²_j) + n max(F_n, 0)² / Σ(λ_j² σ̂²_j)`.
pub fn tn_statistic<M>(s: &GroupSummaries<M>) -> Result<f64> {
    let u = un_statistic(s)?;
    let f = fn_statistic(s).max(0.0);
    let n = s.n as f64;
    let inv_weight: f64 = (0..s.k()).map(|j| s.groups[j].lambda / s.weight_var(j)).sum();
    let f_scale: f64 = (0..s.k()).map(|j| s.groups[j].lambda.powi(2) * s.weight_var(j)).sum();
    Ok(n * u / inv_weight + n * f * f / f_scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Asymptotic,
    Permutation,
    Bootstrap,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::Asymptotic => "asymptotic",
            TestMethod::Permutation => "permutation",
            TestMethod::Bootstrap => "bootstrap",
        }
    }
}

impl std::str::FromStr for TestMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(TestMethod::Asymptotic),
            "permutation" => Ok(TestMethod::Permutation),
            "bootstrap" => Ok(TestMethod::Bootstrap),
            other => Err(Error::input(format!("unknown test method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupInfo {
    pub label: String,
    pub n: usize,
}

/// Everything a k-sample test produces.
///
/// `reject` compares `T_n` with the `χ²(k-1)` critical value for the
/// asymptotic method and `p_resampled` with `alpha` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSampleReport {
    pub groups: Vec<GroupInfo>,
    pub lambda: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub v_pooled: f64,
    pub f_n: f64,
    pub u_n: f64,
    pub t_n: f64,
    pub df: u32,
    pub p_asymptotic: f64,
    pub p_resampled: Option<f64>,
    pub method: TestMethod,
    pub replicates: usize,
    pub discarded_replicates: usize,
    pub seed: Option<u64>,
    pub alpha: f64,
    pub critical_value: f64,
    pub reject: bool,
    pub ridge: f64,
    pub approximate_mean: bool,
    pub algorithm_id: Option<String>,
}

impl KSampleReport {
    /// Replaces the default `1..k` group labels.
    pub fn with_labels<I: IntoIterator<Item = String>>(mut self, labels: I) -> Self {
        for (g, label) in self.groups.iter_mut().zip(labels) {
            g.label = label;
        }
        self
    }

    /// p-value of the method that produced the decision.
    pub fn p_value(&self) -> f64 {
        self.p_resampled.unwrap_or(self.p_asymptotic)
    }
}

/// Configuration for running the test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSampleTest {
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    pub ridge: f64,
}

impl Default for KSampleTest {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            replicates: 999,
            seed: 0,
            ridge: 0.0,
        }
    }
}

/// Values computed once from the observed data.
struct Observed {
    summaries: GroupSummaries<()>,
    f_n: f64,
    u_n: f64,
    t_n: f64,
    approximate: bool,
}

impl KSampleTest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn run<S: MetricSample>(&self, data: &GroupedSample<S>, method: TestMethod) -> Result<KSampleReport> {
        match method {
            TestMethod::Asymptotic => self.asymptotic(data),
            TestMethod::Permutation => self.resampled(data, Scheme::Permutation),
            TestMethod::Bootstrap => self.resampled(data, Scheme::Bootstrap),
        }
    }

    /// Rejects when `T_n` exceeds the `1 - alpha` quantile of `χ²(k-1)`.
    pub fn asymptotic<S: MetricSample>(&self, data: &GroupedSample<S>) -> Result<KSampleReport> {
        self.check_alpha()?;
        let obs = self.observe(data)?;
        let mut report = self.report(data, &obs, TestMethod::Asymptotic)?;
        report.reject = obs.t_n > report.critical_value;
        Ok(report)
    }

    /// Label-permutation calibration of `T_n`.
    pub fn permutation<S: MetricSample>(&self, data: &GroupedSample<S>) -> Result<KSampleReport> {
        self.resampled(data, Scheme::Permutation)
    }

    /// Pooled-bootstrap calibration of `T_n`.
    pub fn bootstrap<S: MetricSample>(&self, data: &GroupedSample<S>) -> Result<KSampleReport> {
        self.resampled(data, Scheme::Bootstrap)
    }

    fn check_alpha(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::input(format!("alpha must lie in (0, 1), got {}", self.alpha)))
        }
    }

    fn observe<S: MetricSample>(&self, data: &GroupedSample<S>) -> Result<Observed> {
        let s = group_summaries_with_ridge(data, self.ridge)?;
        let f_n = fn_statistic(&s);
        let u_n = un_statistic(&s)?;
        let t_n = tn_statistic(&s)?;
        Ok(Observed {
            summaries: strip_means(s),
            f_n,
            u_n,
            t_n,
            approximate: data.sample.mean_is_approximate(),
        })
    }

    fn report<S: MetricSample>(
        &self,
        data: &GroupedSample<S>,
        obs: &Observed,
        method: TestMethod,
    ) -> Result<KSampleReport> {
        let df = (data.k() - 1) as u32;
        let s = &obs.summaries;
        Ok(KSampleReport {
            groups: s
                .groups
                .iter()
                .enumerate()
                .map(|(j, g)| GroupInfo {
                    label: (j + 1).to_string(),
                    n: g.n,
                })
                .collect(),
            lambda: s.groups.iter().map(|g| g.lambda).collect(),
            v_hat: s.groups.iter().map(|g| g.variance).collect(),
            sigma_sq: s.groups.iter().map(|g| g.sigma_sq).collect(),
            v_pooled: s.pooled_variance,
            f_n: obs.f_n,
            u_n: obs.u_n,
            t_n: obs.t_n,
            df,
            p_asymptotic: chi_square_sf(obs.t_n, df)?,
            p_resampled: None,
            method,
            replicates: 0,
            discarded_replicates: 0,
            seed: None,
            alpha: self.alpha,
            critical_value: chi_square_quantile(1.0 - self.alpha, df)?,
            reject: false,
            ridge: self.ridge,
            approximate_mean: obs.approximate,
            algorithm_id: None,
        })
    }

    fn resampled<S: MetricSample>(&self, data: &GroupedSample<S>, scheme: Scheme) -> Result<KSampleReport> {
        self.check_alpha()?;
        if self.replicates < 99 {
            return Err(Error::input(format!(
                "resampling needs at least 99 replicates, got {}",
                self.replicates
            )));
        }
        let obs = self.observe(data)?;
        let stars = self.replicate_statistics(data, scheme);
        let discarded = stars.iter().filter(|t| t.is_none()).count();
        if 2 * discarded > self.replicates {
            return Err(Error::Resampling(format!(
                "{discarded} of {} replicates had a degenerate group",
                self.replicates
            )));
        }
        // ties count as exceedances
        let tol = 1e-10 * obs.t_n.max(1.0);
        let exceed = stars.iter().flatten().filter(|&&t| t >= obs.t_n - tol).count();
        let used = self.replicates - discarded;
        let p = (1 + exceed) as f64 / (used + 1) as f64;

        let method = match scheme {
            Scheme::Permutation => TestMethod::Permutation,
            Scheme::Bootstrap => TestMethod::Bootstrap,
        };
        let mut report = self.report(data, &obs, method)?;
        report.p_resampled = Some(p);
        report.replicates = self.replicates;
        report.discarded_replicates = discarded;
        report.seed = Some(self.seed);
        report.algorithm_id = Some(ALGORITHM_ID.to_string());
        report.reject = p <= self.alpha;
        Ok(report)
    }

    /// `T*` for replicates `0..B`, `None` where a group was degenerate.
    /// Replicate `b` uses stream `(seed, b)` only.
    fn replicate_statistics<S: MetricSample>(&self, data: &GroupedSample<S>, scheme: Scheme) -> Vec<Option<f64>> {
        let n = data.n();
        let sizes = data.group_sizes();
        let pooled: Vec<usize> = data.groups.concat();
        (0..self.replicates)
            .into_par_iter()
            .map_init(
                || (Vec::with_capacity(n), Vec::with_capacity(n)),
                |(idx, buf), b| {
                    let mut stream = derive_stream(self.seed, b as u64);
                    idx.clear();
                    match scheme {
                        Scheme::Permutation => {
                            idx.extend_from_slice(&pooled);
                            stream.shuffle(idx);
                        }
                        Scheme::Bootstrap => idx.extend((0..n).map(|_| stream.index(n))),
                    }
                    let groups = split(idx, &sizes);
                    summarize_groups(&data.sample, &groups, idx, self.ridge, buf)
                        .and_then(|s| tn_statistic(&s))
                        .ok()
                },
            )
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Scheme {
    Permutation,
    Bootstrap,
}

fn split<'a>(idx: &'a [usize], sizes: &[usize]) -> Vec<&'a [usize]> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut rest = idx;
    for &n in sizes {
        let (head, tail) = rest.split_at(n);
        out.push(head);
        rest = tail;
    }
    out
}

fn strip_means<M>(s: GroupSummaries<M>) -> GroupSummaries<()> {
    GroupSummaries {
        groups: s
            .groups
            .into_iter()
            .map(|g| GroupSummary {
                n: g.n,
                lambda: g.lambda,
                mean: (),
                variance: g.variance,
                sigma_sq: g.sigma_sq,
            })
            .collect(),
        pooled_mean: (),
        pooled_variance: s.pooled_variance,
        n: s.n,
        ridge: s.ridge,
    }
}

/// Asymptotic `χ²(k-1)` test at level `alpha`.
pub fn asymptotic_test<S: MetricSample>(data: &GroupedSample<S>, alpha: f64) -> Result<KSampleReport> {
    KSampleTest::new().alpha(alpha).asymptotic(data)
}

/// Permutation test with `replicates` label shuffles.
pub fn permutation_test<S: MetricSample>(
    data: &GroupedSample<S>,
    replicates: usize,
    seed: u64,
) -> Result<KSampleReport> {
    KSampleTest::new().replicates(replicates).seed(seed).permutation(data)
}

/// Bootstrap test resampling the pooled sample with the original group sizes.
pub fn bootstrap_test<S: MetricSample>(data: &GroupedSample<S>, replicates: usize, seed: u64) -> Result<KSampleReport> {
    KSampleTest::new().replicates(replicates).seed(seed).bootstrap(data)
}

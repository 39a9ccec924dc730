//! Two-sample baselines computed from pairwise distances: the energy
//! statistic and a Gaussian-kernel MMD, both calibrated by label permutation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{derive_stream, ALGORITHM_ID};
use crate::error::{Error, Result};
use crate::ksample::GroupedSample;
use crate::spaces::MetricSample;

/// Condensed (upper-triangular, row-major) distances between all pooled
/// objects, first group first.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDistances {
    n: usize,
    n1: usize,
    n2: usize,
    condensed: Vec<f64>,
}

impl PairwiseDistances {
    /// The two groups of `data` are laid out as `G_1` followed by `G_2`.
    pub fn from_grouped<S: MetricSample>(data: &GroupedSample<S>) -> Result<Self> {
        if data.k() != 2 {
            return Err(Error::input(format!(
                "two-sample baselines need exactly 2 groups, got {}",
                data.k()
            )));
        }
        let order: Vec<usize> = data.groups().concat();
        let n = order.len();
        let mut condensed = Vec::with_capacity(n * (n - 1) / 2);
        for (a, &i) in order.iter().enumerate() {
            for &j in &order[a + 1..] {
                condensed.push(data.sample().distance(i, j));
            }
        }
        Self::new(data.groups()[0].len(), data.groups()[1].len(), condensed)
    }

    pub fn new(n1: usize, n2: usize, condensed: Vec<f64>) -> Result<Self> {
        let n = n1 + n2;
        if n1 < 2 || n2 < 2 {
            let (group, size) = if n1 < 2 { (0, n1) } else { (1, n2) };
            return Err(Error::GroupSize { group, size });
        }
        if condensed.len() != n * (n - 1) / 2 {
            return Err(Error::Dimension(format!(
                "{n} objects need {} pairwise distances, got {}",
                n * (n - 1) / 2,
                condensed.len()
            )));
        }
        if let Some(d) = condensed.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::input(format!(
                "pairwise distance {d} is not finite and non-negative"
            )));
        }
        Ok(Self { n, n1, n2, condensed })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn group_sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.condensed[self.offset(i, j)],
            std::cmp::Ordering::Greater => self.condensed[self.offset(j, i)],
        }
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Median of the nonzero distances, `None` if all are zero.
    pub fn median_nonzero(&self) -> Option<f64> {
        let mut nz: Vec<f64> = self.condensed.iter().copied().filter(|&d| d > 0.0).collect();
        if nz.is_empty() {
            return None;
        }
        nz.sort_by(f64::total_cmp);
        let m = nz.len();
        Some(if m % 2 == 1 {
            nz[m / 2]
        } else {
            0.5 * (nz[m / 2 - 1] + nz[m / 2])
        })
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.condensed.iter().map(|&d| f(d)).collect()
    }
}

/// Off-diagonal sums `(Σ_{i<j∈G1}, Σ_{i<j∈G2}, Σ_{i∈G1,j∈G2})` of a condensed
/// symmetric table under the given group membership.
fn block_sums(n: usize, condensed: &[f64], in_first: &[bool]) -> (f64, f64, f64) {
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    let mut k = 0;
    for i in 0..n {
        let gi = in_first[i];
        for &gj in &in_first[i + 1..n] {
            let v = condensed[k];
            k += 1;
            match (gi, gj) {
                (true, true) => s11 += v,
                (false, false) => s22 += v,
                _ => s12 += v,
            }
        }
    }
    (s11, s22, s12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Energy,
    Mmd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub test: BaselineKind,
    pub statistic: f64,
    pub p_value: f64,
    /// Kernel width for MMD.
    pub bandwidth: Option<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub algorithm_id: String,
}

impl BaselineReport {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// A statistic of the pooled table given group membership.
trait TwoSample: Sync {
    fn values(&self) -> &[f64];
    fn statistic(&self, n1: usize, n2: usize, sums: (f64, f64, f64)) -> f64;
}

struct Energy<'a>(&'a [f64]);

impl TwoSample for Energy<'_> {
    fn values(&self) -> &[f64] {
        self.0
    }

    /// `2 mean d(X,Y) - mean d(X,X') - mean d(Y,Y')`, diagonal included.
    fn statistic(&self, n1: usize, n2: usize, (s11, s22, s12): (f64, f64, f64)) -> f64 {
        let (a, b) = (n1 as f64, n2 as f64);
        2.0 * s12 / (a * b) - 2.0 * s11 / (a * a) - 2.0 * s22 / (b * b)
    }
}

struct Mmd(Vec<f64>);

impl TwoSample for Mmd {
    fn values(&self) -> &[f64] {
        &self.0
    }

    /// Unbiased MMD², diagonal excluded.
    fn statistic(&self, n1: usize, n2: usize, (s11, s22, s12): (f64, f64, f64)) -> f64 {
        let (a, b) = (n1 as f64, n2 as f64);
        2.0 * s11 / (a * (a - 1.0)) + 2.0 * s22 / (b * (b - 1.0)) - 2.0 * s12 / (a * b)
    }
}

fn observed_membership(d: &PairwiseDistances) -> Vec<bool> {
    (0..d.n).map(|i| i < d.n1).collect()
}

fn permutation_p<T: TwoSample>(d: &PairwiseDistances, stat: &T, observed: f64, replicates: usize, seed: u64) -> f64 {
    let tol = 1e-10 * observed.abs().max(1.0);
    let exceed: usize = (0..replicates)
        .into_par_iter()
        .map_init(
            || observed_membership(d),
            |labels, b| {
                let mut stream = derive_stream(seed, b as u64);
                labels.iter_mut().enumerate().for_each(|(i, l)| *l = i < d.n1);
                stream.shuffle(labels);
                let t = stat.statistic(d.n1, d.n2, block_sums(d.n, stat.values(), labels));
                usize::from(t >= observed - tol)
            },
        )
        .sum();
    (1 + exceed) as f64 / (replicates + 1) as f64
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 99 {
        return Err(Error::input(format!(
            "permutation tests need at least 99 replicates, got {replicates}"
        )));
    }
    Ok(())
}

/// Energy statistic of the observed split.
pub fn energy_statistic(d: &PairwiseDistances) -> f64 {
    let e = Energy(&d.condensed);
    let t = e.statistic(d.n1, d.n2, block_sums(d.n, &d.condensed, &observed_membership(d)));
    snap(t, d.condensed.iter().fold(0.0, |m: f64, &x| m.max(x)))
}

/// Unbiased MMD² of the observed split with kernel `exp(-d²/(2h²))`.
pub fn mmd_statistic(d: &PairwiseDistances, bandwidth: f64) -> f64 {
    let k = Mmd(kernel_values(d, bandwidth));
    k.statistic(d.n1, d.n2, block_sums(d.n, &k.0, &observed_membership(d)))
}

fn kernel_values(d: &PairwiseDistances, h: f64) -> Vec<f64> {
    let c = 1.0 / (2.0 * h * h);
    d.map(|x| (-x * x * c).exp())
}

/// Cancellation error around zero, relative to the largest distance.
fn snap(t: f64, scale: f64) -> f64 {
    if t.abs() <= 1e-12 * scale {
        0.0
    } else {
        t
    }
}

/// Energy two-sample test with a label-permutation p-value.
pub fn energy_test<S: MetricSample>(data: &GroupedSample<S>, replicates: usize, seed: u64) -> Result<BaselineReport> {
    energy_test_distances(&PairwiseDistances::from_grouped(data)?, replicates, seed)
}

pub fn energy_test_distances(d: &PairwiseDistances, replicates: usize, seed: u64) -> Result<BaselineReport> {
    check_replicates(replicates)?;
    let statistic = energy_statistic(d);
    let p_value = permutation_p(d, &Energy(&d.condensed), statistic, replicates, seed);
    Ok(BaselineReport {
        test: BaselineKind::Energy,
        statistic,
        p_value,
        bandwidth: None,
        replicates,
        seed,
        algorithm_id: ALGORITHM_ID.to_string(),
    })
}

/// Gaussian-kernel MMD test; the kernel width is the median of the nonzero
/// pooled distances.
pub fn mmd_test<S: MetricSample>(data: &GroupedSample<S>, replicates: usize, seed: u64) -> Result<BaselineReport> {
    mmd_test_distances(&PairwiseDistances::from_grouped(data)?, replicates, seed, None)
}

/// MMD test on precomputed distances, with an optional fixed kernel width.
pub fn mmd_test_distances(
    d: &PairwiseDistances,
    replicates: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> Result<BaselineReport> {
    check_replicates(replicates)?;
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::input(format!("kernel width must be positive, got {h}"))),
        None => d
            .median_nonzero()
            .ok_or_else(|| Error::Degenerate("all pairwise distances are zero".into()))?,
    };
    let k = Mmd(kernel_values(d, h));
    let statistic = k.statistic(d.n1, d.n2, block_sums(d.n, &k.0, &observed_membership(d)));
    let p_value = permutation_p(d, &k, statistic, replicates, seed);
    Ok(BaselineReport {
        test: BaselineKind::Mmd,
        statistic,
        p_value,
        bandwidth: Some(h),
        replicates,
        seed,
        algorithm_id: ALGORITHM_ID.to_string(),
    })
}

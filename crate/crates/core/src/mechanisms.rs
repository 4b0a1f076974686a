//! Label-DP training mechanisms.
//!
//! Every mechanism here spends pure `epsilon` (delta is always 0):
//!
//! * [`randomized_response`] and its prior-restricted form [`rr_with_prior`],
//! * LP-MST with one or two stages ([`lp_mst`]) and the clustering-prior
//!   variant ([`lp_1st_domain_prior`]),
//! * ALIBI-style Laplace noise on one-hot labels with MAP denoising
//!   ([`alibi`]),
//! * PATE with sampled teacher votes and a sampled noisy aggregate ([`pate`]).
//!
//! Training a model on privatized labels is post-processing, so each
//! [`MechanismReport`] carries exactly the budget spent on the labels.

use std::fmt;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{check_distribution, sample_categorical, Dataset};
use crate::error::{Error, Result};
use crate::exec::{Execution, BLOCK};
use crate::models::{argmax, train_logistic, train_logistic_on, LogisticHyper, Model};
use crate::rng::{self, Rng};

/// How per-stage budgets combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    /// Sequential use of the same labels: budgets add.
    Basic,
    /// Stages touch disjoint rows: the largest budget counts.
    Parallel,
}

impl Composition {
    pub fn name(self) -> &'static str {
        match self {
            Composition::Basic => "basic-composition",
            Composition::Parallel => "parallel-composition",
        }
    }
}

/// An `(epsilon, delta)` guarantee and the rule that produced it.
/// `epsilon = +inf` marks a non-private run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub accounting: String,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, accounting: impl Into<String>) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::invalid("privacy parameters", format!("epsilon {epsilon} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::invalid("privacy parameters", format!("delta {delta} not in [0, 1]")));
        }
        Ok(Self {
            epsilon,
            delta,
            accounting: accounting.into(),
        })
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_finite()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon", format!("{epsilon} must be >= 0")));
    }
    Ok(())
}

/// Composes stage budgets. Delta is 0 for every mechanism in this crate.
pub fn account(stage_epsilons: &[f64], rule: Composition) -> Result<PrivacyParams> {
    for &e in stage_epsilons {
        check_epsilon(e)?;
    }
    let epsilon = match rule {
        Composition::Basic => stage_epsilons.iter().sum(),
        Composition::Parallel => stage_epsilons.iter().copied().fold(0.0, f64::max),
    };
    PrivacyParams::new(epsilon, 0.0, rule.name())
}

/// Basic composition of `count` uses of the same budget, computed as
/// `count * epsilon`.
pub fn account_repeated(epsilon: f64, count: usize) -> Result<PrivacyParams> {
    check_epsilon(epsilon)?;
    let total = if count == 0 { 0.0 } else { count as f64 * epsilon };
    PrivacyParams::new(total, 0.0, Composition::Basic.name())
}

/// Probability that k-ary randomized response keeps the true label:
/// `e^eps / (e^eps + k - 1)`.
pub fn rr_keep_probability(epsilon: f64, k: usize) -> f64 {
    1.0 / (1.0 + (k as f64 - 1.0) * (-epsilon).exp())
}

fn rr_draw(r: &mut Rng, y: usize, k: usize, keep: f64) -> usize {
    if k == 1 || r.random::<f64>() < keep {
        return y;
    }
    let other = r.random_range(0..k - 1);
    if other >= y {
        other + 1
    } else {
        other
    }
}

/// k-ary randomized response: keep each label with probability
/// `e^eps / (e^eps + k - 1)`, otherwise pick one of the other `k - 1` classes
/// uniformly.
pub fn randomized_response(labels: &[usize], k: usize, epsilon: f64, seed: u64) -> Result<Vec<usize>> {
    check_epsilon(epsilon)?;
    if k < 2 {
        return Err(Error::invalid("randomized response", "need at least 2 classes"));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid("randomized response", format!("label {y} outside 0..{k}")));
    }
    let keep = rr_keep_probability(epsilon, k);
    let mut out = labels.to_vec();
    Execution::default().for_each_chunk_mut(&mut out, BLOCK, |b, chunk| {
        let mut r = rng::stream(seed, "rr", b as u64);
        for y in chunk.iter_mut() {
            *y = rr_draw(&mut r, *y, k, keep);
        }
    });
    Ok(out)
}

/// Per-row label priors (one probability row per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable(Array2<f64>);

impl PriorTable {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.ncols() < 2 {
            return Err(Error::invalid("prior table", "need at least 2 classes"));
        }
        for (i, row) in rows.axis_iter(Axis(0)).enumerate() {
            check_distribution(&row.to_vec(), 1e-9).map_err(|r| Error::invalid("prior table", format!("row {i}: {r}")))?;
        }
        Ok(Self(rows))
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Self(Array2::from_elem((n, k), 1.0 / k as f64))
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }
}

/// Size of the candidate set used by [`rr_with_prior`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopK {
    Fixed(usize),
    /// Per row, the `K` maximizing `e^eps / (e^eps + K - 1) * (mass of the top K)`.
    /// `K` depends only on the prior, so the guarantee is unchanged.
    Adaptive,
}

impl fmt::Display for TopK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopK::Fixed(k) => write!(f, "{k}"),
            TopK::Adaptive => f.write_str("adaptive"),
        }
    }
}

/// Classes ordered by descending prior, ties by ascending index.
fn ranked_classes(prior: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..prior.len()).collect();
    order.sort_by(|&a, &b| prior[b].total_cmp(&prior[a]).then(a.cmp(&b)));
    order
}

fn adaptive_k(sorted_prior: impl Iterator<Item = f64>, epsilon: f64) -> usize {
    let mut best = (1, f64::NEG_INFINITY);
    let mut mass = 0.0;
    for (i, p) in sorted_prior.enumerate() {
        mass += p;
        let score = rr_keep_probability(epsilon, i + 1) * mass;
        if score > best.1 {
            best = (i + 1, score);
        }
    }
    best.0
}

/// Randomized response restricted to each row's `top_k` most likely classes
/// under `prior`. A true label outside the set is first mapped to the
/// highest-prior class.
pub fn rr_with_prior(labels: &[usize], prior: &PriorTable, top_k: TopK, epsilon: f64, seed: u64) -> Result<Vec<usize>> {
    check_epsilon(epsilon)?;
    let k = prior.num_classes();
    if prior.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: prior.len(),
        });
    }
    if let TopK::Fixed(t) = top_k {
        if t == 0 || t > k {
            return Err(Error::invalid("top_k", format!("{t} not in 1..={k}")));
        }
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid("rr_with_prior", format!("label {y} outside 0..{k}")));
    }
    let rows = prior.rows();
    let mut out = labels.to_vec();
    Execution::default().for_each_chunk_mut(&mut out, BLOCK, |b, chunk| {
        let mut r = rng::stream(seed, "rr-prior", b as u64);
        for (j, y) in chunk.iter_mut().enumerate() {
            let p = rows.row(b * BLOCK + j);
            let ranked = ranked_classes(p.as_slice().expect("standard layout"));
            let size = match top_k {
                TopK::Fixed(t) => t,
                TopK::Adaptive => adaptive_k(ranked.iter().map(|&c| p[c]), epsilon),
            };
            let set = &ranked[..size];
            let pos = set.iter().position(|c| c == y).unwrap_or(0);
            *y = set[rr_draw(&mut r, pos, size, rr_keep_probability(epsilon, size))];
        }
    });
    Ok(out)
}

/// Min-max normalizes every column to [0, 1]; constant columns become 0.
pub fn min_max_normalize(features: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = features.to_owned();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
    }
    out
}

/// Cluster assignment of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub num_clusters: usize,
}

const KMEANS_ITERATIONS: usize = 25;

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means (k-means++ seeding, Lloyd iterations) on min-max normalized
/// features. Clusters that end up empty are dropped, which merges their
/// region into the nearest surviving centroid.
pub fn kmeans(features: ArrayView2<'_, f64>, num_clusters: usize, seed: u64) -> Result<Clustering> {
    let n = features.nrows();
    if num_clusters == 0 {
        return Err(Error::invalid("num_clusters", "must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("features", "no rows"));
    }
    let x = min_max_normalize(features);
    let c = num_clusters.min(n);
    let mut r = rng::stream(seed, "kmeans-init", 0);

    let mut centers = Array2::zeros((c, x.ncols()));
    centers.row_mut(0).assign(&x.row(r.random_range(0..n)));
    let mut nearest: Vec<f64> = x.rows().into_iter().map(|row| sq_dist(row, centers.row(0))).collect();
    for j in 1..c {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = r.random::<f64>() * total;
            let mut acc = 0.0;
            nearest
                .iter()
                .position(|d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(n - 1)
        } else {
            r.random_range(0..n)
        };
        centers.row_mut(j).assign(&x.row(pick));
        for (i, row) in x.rows().into_iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(row, centers.row(j)));
        }
    }

    let mut assignment = vec![usize::MAX; n];
    let mut live: Vec<bool> = vec![true; c];
    for _ in 0..KMEANS_ITERATIONS {
        let mut next = vec![0usize; n];
        Execution::default().for_each_chunk_mut(&mut next, BLOCK, |b, chunk| {
            for (j, a) in chunk.iter_mut().enumerate() {
                let row = x.row(b * BLOCK + j);
                let mut best = (usize::MAX, f64::INFINITY);
                for (cj, center) in centers.rows().into_iter().enumerate() {
                    if live[cj] {
                        let d = sq_dist(row, center);
                        if d < best.1 {
                            best = (cj, d);
                        }
                    }
                }
                *a = best.0;
            }
        });
        let changed = next != assignment;
        assignment = next;
        let mut sums = Array2::<f64>::zeros(centers.dim());
        let mut counts = vec![0usize; c];
        for (row, &a) in x.rows().into_iter().zip(&assignment) {
            sums.row_mut(a).scaled_add(1.0, &row);
            counts[a] += 1;
        }
        for j in 0..c {
            if counts[j] == 0 {
                live[j] = false;
            } else {
                centers.row_mut(j).assign(&(&sums.row(j) / counts[j] as f64));
            }
        }
        if !changed {
            break;
        }
    }

    // renumber surviving clusters densely
    let mut remap = vec![usize::MAX; c];
    let mut next_id = 0;
    for a in assignment.iter_mut() {
        if remap[*a] == usize::MAX {
            remap[*a] = next_id;
            next_id += 1;
        }
        *a = remap[*a];
    }
    Ok(Clustering {
        assignment,
        num_clusters: next_id,
    })
}

impl Clustering {
    /// Per-row prior: the smoothed label histogram of the row's cluster, built
    /// from the rows whose reference label is known.
    pub fn prior(&self, reference: &[Option<usize>], num_classes: usize, smoothing: f64) -> Result<PriorTable> {
        if reference.len() != self.assignment.len() {
            return Err(Error::LengthMismatch {
                left: reference.len(),
                right: self.assignment.len(),
            });
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::invalid("smoothing", "must be >= 0"));
        }
        let mut hist = Array2::<f64>::zeros((self.num_clusters, num_classes));
        for (&a, y) in self.assignment.iter().zip(reference) {
            if let Some(y) = *y {
                if y >= num_classes {
                    return Err(Error::invalid("reference labels", format!("label {y} outside 0..{num_classes}")));
                }
                hist[[a, y]] += 1.0;
            }
        }
        for mut row in hist.rows_mut() {
            row.mapv_inplace(|v| v + smoothing);
            let total = row.sum();
            if total > 0.0 {
                row /= total;
            } else {
                row.fill(1.0 / num_classes as f64);
            }
        }
        PriorTable::new(hist.select(Axis(0), &self.assignment))
    }
}

/// Domain prior: k-means clusters over normalized features, each row's prior
/// the add-`smoothing` label histogram of its cluster.
pub fn cluster_prior(
    features: ArrayView2<'_, f64>,
    reference_labels: &[usize],
    num_classes: usize,
    num_clusters: usize,
    smoothing: f64,
    seed: u64,
) -> Result<PriorTable> {
    let clustering = kmeans(features, num_clusters, seed)?;
    let reference: Vec<Option<usize>> = reference_labels.iter().map(|&y| Some(y)).collect();
    clustering.prior(&reference, num_classes, smoothing)
}

/// Per-stage bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub stage_sizes: Vec<usize>,
    /// Fraction of rows per stage whose released label differs from the truth.
    pub flip_rates: Vec<f64>,
    pub stage_epsilons: Vec<f64>,
    pub queries: usize,
}

#[derive(Debug, Clone)]
pub struct MechanismReport {
    pub model: Model,
    pub spent: PrivacyParams,
    pub diagnostics: Diagnostics,
    /// `(row, released label)` for every row whose label was released, in row
    /// order.
    pub private_labels: Vec<(usize, usize)>,
}

fn flip_rate(truth: &[usize], released: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(released).filter(|(a, b)| a != b).count() as f64 / truth.len() as f64
}

fn check_positive_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} must be > 0")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpMstConfig {
    pub stages: usize,
    pub top_k: TopK,
    /// Share of rows privatized in the first stage of a two-stage run.
    pub first_stage_fraction: f64,
}

impl Default for LpMstConfig {
    fn default() -> Self {
        Self {
            stages: 1,
            top_k: TopK::Adaptive,
            first_stage_fraction: 0.5,
        }
    }
}

/// Splits shuffled rows into (first stage, second stage), each sorted.
fn stage_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("first_stage_fraction", format!("{fraction} not in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "stage-split", 0));
    let cut = (n as f64 * fraction).floor() as usize;
    let mut second = order.split_off(cut);
    let mut first = order;
    if first.is_empty() || second.is_empty() {
        return Err(Error::invalid("stage split", format!("a stage is empty (n = {n})")));
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

fn gather(labels: &[usize], rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&i| labels[i]).collect()
}

/// LP-MST with one or two stages.
///
/// One stage is randomized response on every row followed by training. With
/// two stages, the first-stage model's predictions become the prior for
/// [`rr_with_prior`] on the remaining rows, and the final model is trained on
/// all released labels. Stages use disjoint rows, so the total is `epsilon`
/// by parallel composition.
pub fn lp_mst(train: &Dataset, config: &LpMstConfig, epsilon: f64, hyper: &LogisticHyper, seed: u64) -> Result<MechanismReport> {
    check_positive_epsilon(epsilon)?;
    let (n, k) = (train.len(), train.num_classes());
    let truth = train.labels();
    match config.stages {
        1 => {
            let private = randomized_response(truth, k, epsilon, rng::derive_seed(seed, "lp-stage", 0))?;
            let model = train_logistic_on(train.features(), &private, k, hyper, seed)?;
            Ok(MechanismReport {
                model,
                spent: account(&[epsilon], Composition::Parallel)?,
                diagnostics: Diagnostics {
                    stage_sizes: vec![n],
                    flip_rates: vec![flip_rate(truth, &private)],
                    stage_epsilons: vec![epsilon],
                    queries: 0,
                },
                private_labels: private.into_iter().enumerate().collect(),
            })
        }
        2 => {
            let (first, second) = stage_split(n, config.first_stage_fraction, seed)?;
            let first_truth = gather(truth, &first);
            let first_private = randomized_response(&first_truth, k, epsilon, rng::derive_seed(seed, "lp-stage", 0))?;
            let stage1 = train_logistic(&train.subset(&first)?.with_labels(first_private.clone())?, hyper, seed)?;

            let second_x = train.features().select(Axis(0), &second);
            let prior = PriorTable::new(stage1.predict_proba_batch(second_x.view()))?;
            let second_truth = gather(truth, &second);
            let second_private = rr_with_prior(&second_truth, &prior, config.top_k, epsilon, rng::derive_seed(seed, "lp-stage", 1))?;

            let mut private = truth.to_vec();
            for (&i, &y) in first.iter().zip(&first_private) {
                private[i] = y;
            }
            for (&i, &y) in second.iter().zip(&second_private) {
                private[i] = y;
            }
            let model = train_logistic_on(train.features(), &private, k, hyper, seed)?;
            Ok(MechanismReport {
                model,
                spent: account(&[epsilon, epsilon], Composition::Parallel)?,
                diagnostics: Diagnostics {
                    stage_sizes: vec![first.len(), second.len()],
                    flip_rates: vec![flip_rate(&first_truth, &first_private), flip_rate(&second_truth, &second_private)],
                    stage_epsilons: vec![epsilon, epsilon],
                    queries: 0,
                },
                private_labels: private.into_iter().enumerate().collect(),
            })
        }
        s => Err(Error::invalid("lp-mst stages", format!("{s} not in {{1, 2}}"))),
    }
}

/// LP-1ST with a clustering prior.
///
/// The first `first_stage_fraction` of (shuffled) rows are released by plain
/// randomized response; their released labels fill the cluster histograms
/// that serve as the prior for [`rr_with_prior`] on the remaining rows. The
/// two row sets are disjoint, so the total is `epsilon`.
#[allow(clippy::too_many_arguments)]
pub fn lp_1st_domain_prior(
    train: &Dataset,
    clustering: &Clustering,
    top_k: TopK,
    first_stage_fraction: f64,
    smoothing: f64,
    epsilon: f64,
    hyper: &LogisticHyper,
    seed: u64,
) -> Result<MechanismReport> {
    check_positive_epsilon(epsilon)?;
    let (n, k) = (train.len(), train.num_classes());
    let truth = train.labels();
    let (first, second) = stage_split(n, first_stage_fraction, seed)?;
    let first_truth = gather(truth, &first);
    let first_private = randomized_response(&first_truth, k, epsilon, rng::derive_seed(seed, "lp-stage", 0))?;

    let mut reference = vec![None; n];
    for (&i, &y) in first.iter().zip(&first_private) {
        reference[i] = Some(y);
    }
    let prior = clustering.prior(&reference, k, smoothing)?;
    let second_prior = PriorTable::new(prior.rows().select(Axis(0), &second))?;
    let second_truth = gather(truth, &second);
    let second_private = rr_with_prior(&second_truth, &second_prior, top_k, epsilon, rng::derive_seed(seed, "lp-stage", 1))?;

    let mut private = truth.to_vec();
    for (&i, &y) in first.iter().zip(&first_private).chain(second.iter().zip(&second_private)) {
        private[i] = y;
    }
    let model = train_logistic_on(train.features(), &private, k, hyper, seed)?;
    Ok(MechanismReport {
        model,
        spent: account(&[epsilon, epsilon], Composition::Parallel)?,
        diagnostics: Diagnostics {
            stage_sizes: vec![first.len(), second.len()],
            flip_rates: vec![flip_rate(&first_truth, &first_private), flip_rate(&second_truth, &second_private)],
            stage_epsilons: vec![epsilon, epsilon],
            queries: 0,
        },
        private_labels: private.into_iter().enumerate().collect(),
    })
}

/// Laplace(0, scale) by inverse CDF.
pub fn sample_laplace(r: &mut Rng, scale: f64) -> f64 {
    loop {
        let u = r.random::<f64>() - 0.5;
        if u > -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// MAP label for a noisy one-hot vector under a uniform prior and i.i.d.
/// Laplace noise.
///
/// The log-posterior of class `c` is `(|v_c| - |v_c - 1|) / b` plus a term
/// shared by all classes. `t -> |t| - |t - 1|` is nondecreasing, so the
/// largest noisy coordinate always attains the maximum.
pub fn alibi_denoise(noisy: &[f64]) -> usize {
    argmax(noisy)
}

/// Noisy one-hot release (Laplace scale `2 / epsilon`) followed by
/// [`alibi_denoise`].
pub fn alibi_labels(labels: &[usize], k: usize, epsilon: f64, seed: u64) -> Result<Vec<usize>> {
    check_epsilon(epsilon)?;
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid("alibi", format!("label {y} outside 0..{k}")));
    }
    if epsilon.is_infinite() {
        return Ok(labels.to_vec());
    }
    let scale = 2.0 / epsilon;
    let mut out = labels.to_vec();
    Execution::default().for_each_chunk_mut(&mut out, BLOCK, |b, chunk| {
        let mut r = rng::stream(seed, "alibi", b as u64);
        let mut v = vec![0.0; k];
        for y in chunk.iter_mut() {
            for (c, vc) in v.iter_mut().enumerate() {
                *vc = if c == *y { 1.0 } else { 0.0 } + sample_laplace(&mut r, scale);
            }
            *y = alibi_denoise(&v);
        }
    });
    Ok(out)
}

pub fn alibi(train: &Dataset, epsilon: f64, hyper: &LogisticHyper, seed: u64) -> Result<MechanismReport> {
    check_positive_epsilon(epsilon)?;
    let k = train.num_classes();
    let private = alibi_labels(train.labels(), k, epsilon, rng::derive_seed(seed, "alibi-labels", 0))?;
    let model = train_logistic_on(train.features(), &private, k, hyper, seed)?;
    Ok(MechanismReport {
        model,
        spent: account(&[epsilon], Composition::Basic)?,
        diagnostics: Diagnostics {
            stage_sizes: vec![train.len()],
            flip_rates: vec![flip_rate(train.labels(), &private)],
            stage_epsilons: vec![epsilon],
            queries: 0,
        },
        private_labels: private.into_iter().enumerate().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PateConfig {
    pub teachers: usize,
    pub queries: usize,
    pub epsilon_per_query: f64,
}

impl Default for PateConfig {
    fn default() -> Self {
        Self {
            teachers: 10,
            queries: 1000,
            epsilon_per_query: 0.01,
        }
    }
}

/// One noisy aggregation: Laplace noise of scale `2 / epsilon` on each vote
/// count, negative counts clamped to 0, then a label sampled from the
/// renormalized histogram (uniform if everything clamps to 0).
pub fn pate_aggregate(votes: &[usize], epsilon: f64, r: &mut Rng) -> usize {
    let k = votes.len();
    let noisy: Vec<f64> = if epsilon.is_infinite() {
        votes.iter().map(|&v| v as f64).collect()
    } else {
        let scale = 2.0 / epsilon;
        votes.iter().map(|&v| (v as f64 + sample_laplace(r, scale)).max(0.0)).collect()
    };
    let total: f64 = noisy.iter().sum();
    let u = r.random::<f64>();
    if total > 0.0 {
        let p: Vec<f64> = noisy.iter().map(|v| v / total).collect();
        sample_categorical(&p, u)
    } else {
        ((u * k as f64) as usize).min(k - 1)
    }
}

/// PATE with disjoint label shards. Each teacher samples its vote from its
/// predictive distribution; the student's label for a query comes from
/// [`pate_aggregate`]. Queries are basic-composed: total `queries * eps_q`.
pub fn pate(train: &Dataset, config: &PateConfig, hyper: &LogisticHyper, seed: u64) -> Result<MechanismReport> {
    let (n, k) = (train.len(), train.num_classes());
    let PateConfig {
        teachers,
        queries,
        epsilon_per_query,
    } = *config;
    check_positive_epsilon(epsilon_per_query)?;
    if teachers < 2 {
        return Err(Error::invalid("pate", "need at least 2 teachers"));
    }
    if n < teachers {
        return Err(Error::invalid("pate", format!("{n} rows cannot fill {teachers} non-empty shards")));
    }
    if queries == 0 || queries > n {
        return Err(Error::invalid("pate", format!("queries must be in 1..={n}")));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "pate-shards", 0));
    let shards: Vec<Vec<usize>> = (0..teachers)
        .map(|t| {
            let mut s: Vec<usize> = order.iter().skip(t).step_by(teachers).copied().collect();
            s.sort_unstable();
            s
        })
        .collect();
    let teacher_models = Execution::default().try_map(teachers, |t| {
        train_logistic(&train.subset(&shards[t])?, hyper, rng::derive_seed(seed, "pate-teacher", t as u64))
    })?;

    let mut query_rows: Vec<usize> = (0..n).collect();
    query_rows.shuffle(&mut rng::stream(seed, "pate-queries", 0));
    query_rows.truncate(queries);
    query_rows.sort_unstable();
    let qx = train.features().select(Axis(0), &query_rows);
    let teacher_proba: Vec<Array2<f64>> = teacher_models.iter().map(|m| m.predict_proba_batch(qx.view())).collect();

    let mut student_labels = vec![0usize; queries];
    Execution::default().for_each_chunk_mut(&mut student_labels, BLOCK, |b, chunk| {
        let mut r = rng::stream(seed, "pate-votes", b as u64);
        for (j, out) in chunk.iter_mut().enumerate() {
            let q = b * BLOCK + j;
            let mut votes = vec![0usize; k];
            for p in &teacher_proba {
                let row = p.row(q);
                votes[sample_categorical(row.as_slice().expect("standard layout"), r.random::<f64>())] += 1;
            }
            *out = pate_aggregate(&votes, epsilon_per_query, &mut r);
        }
    });

    let model = train_logistic_on(qx.view(), &student_labels, k, hyper, seed)?;
    let truth = gather(train.labels(), &query_rows);
    let mut sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
    sizes.push(queries);
    Ok(MechanismReport {
        model,
        spent: account_repeated(epsilon_per_query, queries)?,
        diagnostics: Diagnostics {
            stage_sizes: sizes,
            flip_rates: vec![flip_rate(&truth, &student_labels)],
            stage_epsilons: vec![epsilon_per_query; 1],
            queries,
        },
        private_labels: query_rows.into_iter().zip(student_labels).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_mixture, MixtureModel};
    use ndarray::array;

    #[test]
    fn keep_probabilities() {
        assert!((rr_keep_probability(3f64.ln(), 2) - 0.75).abs() < 1e-15);
        assert!((rr_keep_probability(0.0, 10) - 0.1).abs() < 1e-15);
        assert_eq!(rr_keep_probability(f64::INFINITY, 7), 1.0);
    }

    #[test]
    fn rr_infinite_epsilon_is_identity_and_seeded() {
        let y: Vec<usize> = (0..10_000).map(|i| i % 5).collect();
        assert_eq!(randomized_response(&y, 5, f64::INFINITY, 1).unwrap(), y);
        let a = randomized_response(&y, 5, 0.5, 1).unwrap();
        assert_eq!(a, randomized_response(&y, 5, 0.5, 1).unwrap());
        assert_ne!(a, randomized_response(&y, 5, 0.5, 2).unwrap());
        assert!(randomized_response(&[0, 3], 3, 1.0, 0).is_err());
        assert!(randomized_response(&[0], 2, -1.0, 0).is_err());
    }

    #[test]
    fn rr_with_prior_top_one_returns_prior_argmax() {
        let prior = PriorTable::new(array![[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]]).unwrap();
        let out = rr_with_prior(&[0, 2], &prior, TopK::Fixed(1), 1.0, 3).unwrap();
        assert_eq!(out, vec![1, 0]);
        assert!(rr_with_prior(&[0, 2], &prior, TopK::Fixed(4), 1.0, 3).is_err());
        assert!(rr_with_prior(&[0], &prior, TopK::Fixed(1), 1.0, 3).is_err());
        assert!(PriorTable::new(array![[0.2, 0.2]]).is_err());
    }

    #[test]
    fn rr_with_prior_keep_rate() {
        let n = 1_000_000;
        let prior = PriorTable::new(Array2::from_shape_fn((n, 2), |(_, c)| if c == 0 { 0.9 } else { 0.1 })).unwrap();
        let out = rr_with_prior(&vec![0; n], &prior, TopK::Fixed(2), 3f64.ln(), 5).unwrap();
        let rate = out.iter().filter(|&&y| y == 0).count() as f64 / n as f64;
        assert!((rate - 0.75).abs() < 0.0013, "{rate}");
    }

    #[test]
    fn adaptive_k_prefers_confident_priors() {
        // mass 0.99 on one class at eps = 0.1: K = 1 wins
        assert_eq!(adaptive_k([0.99, 0.01].into_iter(), 0.1), 1);
        // flat prior at large eps: use everything
        assert_eq!(adaptive_k([0.25; 4].into_iter(), 10.0), 4);
    }

    #[test]
    fn accounting_rules() {
        assert_eq!(account(&[1.0, 1.0, 2.0], Composition::Basic).unwrap().epsilon, 4.0);
        assert_eq!(account(&[1.0, 3.0], Composition::Parallel).unwrap().epsilon, 3.0);
        let empty = account(&[], Composition::Basic).unwrap();
        assert_eq!((empty.epsilon, empty.delta), (0.0, 0.0));
        assert!(account(&[-1.0], Composition::Basic).is_err());
        assert_eq!(account_repeated(0.01, 1000).unwrap().epsilon, 1000.0 * 0.01);
    }

    #[test]
    fn cluster_prior_single_cluster_is_global_histogram() {
        let x = array![[0.0], [1.0], [5.0], [9.0]];
        let prior = cluster_prior(x.view(), &[0, 1, 1, 1], 2, 1, 0.0, 1).unwrap();
        for row in prior.rows().rows() {
            assert_eq!(row.to_vec(), vec![0.25, 0.75]);
        }
    }

    #[test]
    fn cluster_prior_histograms() {
        // 60 rows near 0 with 90% label 1, 40 rows near 10 with 10% label 1
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            feats.push(i as f64 * 1e-3);
            labels.push(usize::from(i < 54));
        }
        for i in 0..40 {
            feats.push(10.0 + i as f64 * 1e-3);
            labels.push(usize::from(i < 4));
        }
        let x = Array2::from_shape_vec((100, 1), feats).unwrap();
        let prior = cluster_prior(x.view(), &labels, 2, 2, 0.0, 3).unwrap();
        let near = prior.rows().row(0).to_vec();
        let far = prior.rows().row(99).to_vec();
        assert!((near[0] - 0.1).abs() < 1e-12 && (near[1] - 0.9).abs() < 1e-12, "{near:?}");
        assert!((far[0] - 0.9).abs() < 1e-12 && (far[1] - 0.1).abs() < 1e-12, "{far:?}");

        let pure = cluster_prior(x.view(), &[vec![1; 60], vec![0; 40]].concat(), 2, 2, 0.0, 3).unwrap();
        assert_eq!(pure.rows().row(5).to_vec(), vec![0.0, 1.0]);
        let smooth = cluster_prior(x.view(), &[vec![1; 60], vec![0; 40]].concat(), 2, 2, 1.0, 3).unwrap();
        assert_eq!(smooth.rows().row(5).to_vec(), vec![1.0 / 62.0, 61.0 / 62.0]);
    }

    #[test]
    fn kmeans_drops_empty_clusters() {
        // 3 distinct points, 10 requested clusters
        let x = array![[0.0], [0.0], [1.0], [2.0], [2.0]];
        let c = kmeans(x.view(), 10, 0).unwrap();
        assert_eq!(c.num_clusters, 3);
        assert_eq!(c.assignment[0], c.assignment[1]);
        assert_ne!(c.assignment[0], c.assignment[2]);
    }

    fn small_task() -> Dataset {
        gen_mixture(&MixtureModel::new(3, 6, 0.3).unwrap(), 300, 9).unwrap().0
    }

    #[test]
    fn lp_mst_accounting_and_infinite_budget() {
        let ds = small_task();
        let hyper = LogisticHyper::default();
        let one = lp_mst(&ds, &LpMstConfig::default(), f64::INFINITY, &hyper, 4).unwrap();
        let plain = train_logistic(&ds, &hyper, 4).unwrap();
        assert_eq!(
            crate::models::render_model(&one.model).unwrap(),
            crate::models::render_model(&plain).unwrap()
        );
        let two = lp_mst(
            &ds,
            &LpMstConfig {
                stages: 2,
                ..Default::default()
            },
            1.5,
            &hyper,
            4,
        )
        .unwrap();
        assert_eq!(two.spent.epsilon, 1.5);
        assert_eq!(two.diagnostics.stage_sizes, vec![150, 150]);
        assert_eq!(two.private_labels.len(), 300);
        assert!(lp_mst(
            &ds,
            &LpMstConfig {
                stages: 3,
                ..Default::default()
            },
            1.0,
            &hyper,
            4
        )
        .is_err());
        assert!(lp_mst(&ds, &LpMstConfig::default(), 0.0, &hyper, 4).is_err());
    }

    #[test]
    fn lp_one_stage_matches_rr_then_train() {
        let ds = small_task();
        let hyper = LogisticHyper::default();
        let report = lp_mst(&ds, &LpMstConfig::default(), 0.7, &hyper, 8).unwrap();
        let labels = randomized_response(ds.labels(), 3, 0.7, rng::derive_seed(8, "lp-stage", 0)).unwrap();
        let direct = train_logistic(&ds.with_labels(labels).unwrap(), &hyper, 8).unwrap();
        assert_eq!(
            crate::models::render_model(&report.model).unwrap(),
            crate::models::render_model(&direct).unwrap()
        );
    }

    #[test]
    fn alibi_and_pate_at_infinite_budget_release_true_labels() {
        let ds = small_task();
        assert_eq!(alibi_labels(ds.labels(), 3, f64::INFINITY, 1).unwrap(), ds.labels());
        let mut r = rng::stream(0, "t", 0);
        for _ in 0..100 {
            assert_eq!(pate_aggregate(&[0, 7, 0], f64::INFINITY, &mut r), 1);
        }
    }

    #[test]
    fn pate_accounting_and_errors() {
        let ds = small_task();
        let hyper = LogisticHyper::default();
        let cfg = PateConfig {
            teachers: 5,
            queries: 40,
            epsilon_per_query: 0.05,
        };
        let report = pate(&ds, &cfg, &hyper, 2).unwrap();
        assert_eq!(report.spent.epsilon, 40.0 * 0.05);
        assert_eq!(report.private_labels.len(), 40);
        assert_eq!(report.diagnostics.stage_sizes[..5].iter().sum::<usize>(), 300);
        let too_many = PateConfig { teachers: 301, ..cfg };
        assert!(pate(&ds, &too_many, &hyper, 2).is_err());
        let over = PateConfig { queries: 301, ..cfg };
        assert!(pate(&ds, &over, &hyper, 2).is_err());
    }

    #[test]
    fn mechanisms_are_reproducible() {
        let ds = small_task();
        let hyper = LogisticHyper::default();
        let a = alibi(&ds, 1.0, &hyper, 6).unwrap();
        let b = alibi(&ds, 1.0, &hyper, 6).unwrap();
        assert_eq!(a.private_labels, b.private_labels);
        let cfg = PateConfig {
            teachers: 3,
            queries: 30,
            epsilon_per_query: 0.5,
        };
        assert_eq!(
            pate(&ds, &cfg, &hyper, 6).unwrap().private_labels,
            pate(&ds, &cfg, &hyper, 6).unwrap().private_labels
        );
    }
}

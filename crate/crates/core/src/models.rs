//! Classifiers: multinomial logistic regression trained by full-batch
//! gradient descent, the Bayes classifier of a known conditional, the
//! constant predictor and the exact-match majority table.
//!
//! All models map a feature row to a probability vector over `k` classes.
//! Models are immutable once built and can be shared across threads.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{check_distribution, softmax_in_place, Conditional, Dataset};
use crate::error::{Error, Result};

/// Largest relative learning rate for which gradient descent is guaranteed
/// to decrease the training objective monotonically.
pub const STABLE_LEARNING_RATE: f64 = 1.0;

/// Probability clamp used by [`log_loss`].
pub const LOG_LOSS_CLAMP: f64 = 1e-15;

/// Gradient-descent settings for [`train_logistic`].
///
/// `learning_rate` is relative: the actual step is `learning_rate / L`, where
/// `L` is the smoothness constant of the objective on the training features.
/// This keeps one setting usable across feature scales from `sigma = 1` to
/// `sigma = 100`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    pub class_weights: Option<Vec<f64>>,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            iterations: 100,
            l2: 0.0,
            class_weights: None,
        }
    }
}

impl LogisticHyper {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("logistic hyperparameters", "learning_rate must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("logistic hyperparameters", "iterations must be at least 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid("logistic hyperparameters", "l2 must be >= 0"));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != num_classes || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(
                    "logistic hyperparameters",
                    format!("class_weights needs {num_classes} positive entries"),
                ));
            }
        }
        Ok(())
    }

    fn weight(&self, class: usize) -> f64 {
        self.class_weights.as_ref().map_or(1.0, |w| w[class])
    }
}

/// Softmax-linear model. `weights` has one row per feature plus a trailing
/// bias row, and one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    weights: Array2<f64>,
    hyper: LogisticHyper,
    seed: u64,
}

impl LogisticModel {
    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn hyper(&self) -> &LogisticHyper {
        &self.hyper
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Bayes classifier: reports the generative model's `P(. | x)` unchanged.
#[derive(Clone)]
pub struct BayesModel(Arc<dyn Conditional>);

impl std::fmt::Debug for BayesModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BayesModel(k = {})", self.0.num_classes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorityTable {
    num_classes: usize,
    dim: usize,
    table: HashMap<Vec<u64>, usize>,
}

fn row_key(x: ArrayView1<'_, f64>) -> Vec<u64> {
    // +0.0 and -0.0 are the same feature value
    x.iter().map(|v| if *v == 0.0 { 0u64 } else { v.to_bits() }).collect()
}

#[derive(Debug, Clone)]
pub enum Model {
    Logistic(LogisticModel),
    Bayes(BayesModel),
    Constant(Vec<f64>),
    MajorityTable(MajorityTable),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Logistic(_) => "logistic",
            Model::Bayes(_) => "bayes",
            Model::Constant(_) => "constant",
            Model::MajorityTable(_) => "majority-table",
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::Logistic(m) => m.weights.ncols(),
            Model::Bayes(b) => b.0.num_classes(),
            Model::Constant(p) => p.len(),
            Model::MajorityTable(t) => t.num_classes,
        }
    }

    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let k = self.num_classes();
        match self {
            Model::Logistic(m) => {
                let d = m.weights.nrows() - 1;
                let mut z: Vec<f64> = x.dot(&m.weights.slice(s![..d, ..])).to_vec();
                for (zc, b) in z.iter_mut().zip(m.weights.row(d)) {
                    *zc += b;
                }
                softmax_in_place(&mut z);
                z
            }
            Model::Bayes(b) => b.0.proba(x),
            Model::Constant(p) => p.clone(),
            Model::MajorityTable(t) => match t.table.get(&row_key(x)) {
                Some(&c) => {
                    let mut p = vec![0.0; k];
                    p[c] = 1.0;
                    p
                }
                None => vec![1.0 / k as f64; k],
            },
        }
    }

    /// Row-wise [`Model::predict_proba`].
    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Model::Logistic(m) => {
                let mut z = augment(x).dot(&m.weights);
                for mut row in z.rows_mut() {
                    softmax_in_place(row.as_slice_mut().expect("standard layout"));
                }
                z
            }
            _ => {
                let mut out = Array2::zeros((x.nrows(), self.num_classes()));
                for (i, row) in x.rows().into_iter().enumerate() {
                    out.row_mut(i).assign(&Array1::from(self.predict_proba(row)));
                }
                out
            }
        }
    }
}

/// Appends a constant-1 column.
fn augment(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut a = Array2::ones((n, d + 1));
    a.slice_mut(s![.., ..d]).assign(&x);
    a
}

/// Largest eigenvalue of `A^T A`, by power iteration on the smaller Gram.
fn gram_spectral_norm(a: ArrayView2<'_, f64>) -> f64 {
    let gram = if a.nrows() <= a.ncols() { a.dot(&a.t()) } else { a.t().dot(&a) };
    let mut v = Array1::from_elem(gram.nrows(), 1.0 / (gram.nrows() as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..100 {
        let w = gram.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = w.dot(&v);
        v = w / norm;
        if (next - lambda).abs() <= 1e-9 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

/// Smoothness constant of the mean cross-entropy objective on `features`.
///
/// The softmax Hessian is bounded by 1/2 in operator norm, so the objective
/// is `L`-smooth with `L = max_w * lambda_max(X~^T X~) / (2n) + l2`, where
/// `X~` carries the bias column.
pub fn smoothness(features: ArrayView2<'_, f64>, hyper: &LogisticHyper) -> f64 {
    smoothness_augmented(augment(features).view(), hyper)
}

fn smoothness_augmented(xa: ArrayView2<'_, f64>, hyper: &LogisticHyper) -> f64 {
    let max_w = hyper.class_weights.as_ref().map_or(1.0, |w| w.iter().copied().fold(0.0, f64::max));
    0.5 * max_w * gram_spectral_norm(xa) / xa.nrows() as f64 + hyper.l2
}

/// Objective and gradient on augmented features. Returns (loss, gradient).
/// Turns logits `z` into the gradient of the mean weighted cross-entropy
/// with respect to them, returning that mean.
fn softmax_residual(z: &mut Array2<f64>, labels: &[usize], hyper: &LogisticHyper) -> f64 {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    for (mut row, &y) in z.rows_mut().into_iter().zip(labels) {
        let row = row.as_slice_mut().expect("standard layout");
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let zy = row[y];
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let w = hyper.weight(y);
        loss += w * (max + sum.ln() - zy);
        let scale = w / sum;
        for v in row.iter_mut() {
            *v *= scale;
        }
        row[y] -= w;
    }
    *z /= n;
    loss / n
}

fn objective_augmented(
    xa: ArrayView2<'_, f64>,
    labels: &[usize],
    weights: ArrayView2<'_, f64>,
    hyper: &LogisticHyper,
) -> (f64, Array2<f64>) {
    let d = weights.nrows() - 1;
    let mut z = xa.dot(&weights);
    let mut loss = softmax_residual(&mut z, labels, hyper);
    let mut grad = xa.t().dot(&z);
    if hyper.l2 > 0.0 {
        let body = weights.slice(s![..d, ..]);
        loss += 0.5 * hyper.l2 * body.iter().map(|v| v * v).sum::<f64>();
        grad.slice_mut(s![..d, ..]).scaled_add(hyper.l2, &body);
    }
    (loss, grad)
}

/// Mean (class-weighted) cross-entropy plus `l2 / 2 * |W|^2` (bias excluded)
/// and its gradient with respect to `weights` (`(d + 1) x k`).
pub fn logistic_objective(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    weights: ArrayView2<'_, f64>,
    hyper: &LogisticHyper,
) -> (f64, Array2<f64>) {
    objective_augmented(augment(features).view(), labels, weights, hyper)
}

/// Trains and also returns the objective value before each update.
pub fn train_logistic_traced(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    hyper: &LogisticHyper,
    seed: u64,
) -> Result<(Model, Vec<f64>)> {
    hyper.validate(num_classes)?;
    if labels.is_empty() {
        return Err(Error::invalid("training set", "no rows"));
    }
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.nrows(),
            right: labels.len(),
        });
    }
    let xa = augment(features);
    let lipschitz = smoothness_augmented(xa.view(), hyper);
    let step = if lipschitz > 0.0 {
        hyper.learning_rate / lipschitz
    } else {
        hyper.learning_rate
    };
    let (weights, trace) = if labels.len() < xa.ncols() {
        descend_dual(features, labels, num_classes, hyper, step)?
    } else {
        descend_primal(xa.view(), labels, num_classes, hyper, step)?
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence {
            iteration: hyper.iterations,
        });
    }
    let model = Model::Logistic(LogisticModel {
        weights,
        hyper: hyper.clone(),
        seed,
    });
    Ok((model, trace))
}

fn descend_primal(
    xa: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    hyper: &LogisticHyper,
    step: f64,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut weights = Array2::zeros((xa.ncols(), num_classes));
    let mut trace = Vec::with_capacity(hyper.iterations);
    for iteration in 0..hyper.iterations {
        let (loss, grad) = objective_augmented(xa, labels, weights.view(), hyper);
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        trace.push(loss);
        weights.scaled_add(-step, &grad);
    }
    Ok((weights, trace))
}

/// The same iterates as [`descend_primal`], kept as `W = X^T A` plus a bias
/// row, so each step costs one `n x n x k` product instead of two
/// `n x d x k` ones.
fn descend_dual(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    hyper: &LogisticHyper,
    step: f64,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let n = labels.len();
    let gram = x.dot(&x.t());
    let mut coef = Array2::<f64>::zeros((n, num_classes));
    let mut bias = Array1::<f64>::zeros(num_classes);
    let mut trace = Vec::with_capacity(hyper.iterations);
    for iteration in 0..hyper.iterations {
        let body = gram.dot(&coef);
        let mut z = &body + &bias;
        let mut loss = softmax_residual(&mut z, labels, hyper);
        if hyper.l2 > 0.0 {
            loss += 0.5 * hyper.l2 * (&coef * &body).sum();
        }
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        trace.push(loss);
        bias.scaled_add(-step, &z.sum_axis(Axis(0)));
        if hyper.l2 > 0.0 {
            coef *= 1.0 - step * hyper.l2;
        }
        coef.scaled_add(-step, &z);
    }
    let mut weights = Array2::zeros((x.ncols() + 1, num_classes));
    weights.slice_mut(s![..x.ncols(), ..]).assign(&x.t().dot(&coef));
    weights.row_mut(x.ncols()).assign(&bias);
    Ok((weights, trace))
}

/// Multinomial logistic regression by full-batch gradient descent from
/// all-zero weights. Deterministic; `seed` is recorded as metadata only.
pub fn train_logistic(train: &Dataset, hyper: &LogisticHyper, seed: u64) -> Result<Model> {
    train_logistic_on(train.features(), train.labels(), train.num_classes(), hyper, seed)
}

pub fn train_logistic_on(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    hyper: &LogisticHyper,
    seed: u64,
) -> Result<Model> {
    train_logistic_traced(features, labels, num_classes, hyper, seed).map(|(m, _)| m)
}

pub fn bayes_model(cond: Arc<dyn Conditional>) -> Model {
    Model::Bayes(BayesModel(cond))
}

pub fn constant_model(p: Vec<f64>) -> Result<Model> {
    if p.len() < 2 {
        return Err(Error::invalid("constant predictor", "need at least 2 classes"));
    }
    check_distribution(&p, 1e-9).map_err(|r| Error::invalid("constant predictor", r))?;
    Ok(Model::Constant(p))
}

/// Predicts the majority training label of each distinct feature row; ties go
/// to the lowest class, unseen rows get the uniform distribution.
pub fn majority_table(train: &Dataset) -> Model {
    let k = train.num_classes();
    let mut votes: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (x, &y) in train.features().rows().into_iter().zip(train.labels()) {
        votes.entry(row_key(x)).or_insert_with(|| vec![0; k])[y] += 1;
    }
    let table = votes.into_iter().map(|(key, counts)| (key, argmax_counts(&counts))).collect();
    Model::MajorityTable(MajorityTable {
        num_classes: k,
        dim: train.dim(),
        table,
    })
}

fn argmax_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (c, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = c;
        }
    }
    best
}

/// Mean negative log-likelihood with probabilities clamped to
/// `[1e-15, 1 - 1e-15]`.
pub fn log_loss(model: &Model, dataset: &Dataset) -> f64 {
    let p = model.predict_proba_batch(dataset.features());
    let total: f64 = p
        .axis_iter(Axis(0))
        .zip(dataset.labels())
        .map(|(row, &y)| -row[y].clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP).ln())
        .sum();
    total / dataset.len() as f64
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Renders the plain-text weight dump read by [`parse_model`].
///
/// ```text
/// kind = logistic
/// num_classes = 2
/// shape = 3 2
/// weights = <row-major, space separated>
/// ```
///
/// Constant models store `probabilities`; majority tables store one
/// `entry = <feature values> : <class>` line per distinct row, sorted.
pub fn render_model(model: &Model) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "kind = {}", model.kind()).unwrap();
    writeln!(out, "num_classes = {}", model.num_classes()).unwrap();
    match model {
        Model::Logistic(m) => {
            writeln!(out, "learning_rate = {}", m.hyper.learning_rate).unwrap();
            writeln!(out, "iterations = {}", m.hyper.iterations).unwrap();
            writeln!(out, "l2 = {}", m.hyper.l2).unwrap();
            if let Some(w) = &m.hyper.class_weights {
                writeln!(out, "class_weights = {}", join(w.iter().copied())).unwrap();
            }
            writeln!(out, "seed = {}", m.seed).unwrap();
            writeln!(out, "shape = {} {}", m.weights.nrows(), m.weights.ncols()).unwrap();
            writeln!(out, "weights = {}", join(m.weights.iter().copied())).unwrap();
        }
        Model::Constant(p) => {
            writeln!(out, "probabilities = {}", join(p.iter().copied())).unwrap();
        }
        Model::MajorityTable(t) => {
            writeln!(out, "dim = {}", t.dim).unwrap();
            let mut entries: Vec<_> = t.table.iter().collect();
            entries.sort();
            for (key, class) in entries {
                let values = key.iter().map(|b| f64::from_bits(*b));
                writeln!(out, "entry = {} : {class}", join(values)).unwrap();
            }
        }
        Model::Bayes(_) => return Err(Error::invalid("model", "a Bayes model wraps a generator and cannot be serialized")),
    }
    Ok(out)
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

fn bad(reason: impl Into<String>) -> Error {
    Error::invalid("model file", reason)
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| bad(format!("`{t}` is not a number"))))
        .collect()
}

pub fn parse_model(text: &str) -> Result<Model> {
    let mut fields: HashMap<&str, &str> = HashMap::new();
    let mut entries = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("line `{line}` has no `=`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "entry" {
            entries.push(value);
        } else {
            fields.insert(key, value);
        }
    }
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| bad(format!("missing `{key}`")));
    let uint = |key: &str| -> Result<usize> { get(key)?.parse().map_err(|_| bad(format!("`{key}` is not an integer"))) };
    let k = uint("num_classes")?;
    match get("kind")? {
        "logistic" => {
            let shape: Vec<usize> = get("shape")?
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| bad("bad shape")))
                .collect::<Result<_>>()?;
            let [rows, cols] = shape[..] else {
                return Err(bad("shape needs two values"));
            };
            if cols != k {
                return Err(bad("shape does not match num_classes"));
            }
            let weights = Array2::from_shape_vec((rows, cols), parse_floats(get("weights")?)?)
                .map_err(|_| bad("weight count does not match shape"))?;
            let float = |key: &str| -> Result<f64> { get(key)?.parse().map_err(|_| bad(format!("`{key}` is not a number"))) };
            let hyper = LogisticHyper {
                learning_rate: float("learning_rate")?,
                iterations: uint("iterations")?,
                l2: float("l2")?,
                class_weights: fields.get("class_weights").map(|s| parse_floats(s)).transpose()?,
            };
            let seed = get("seed")?.parse().map_err(|_| bad("bad seed"))?;
            Ok(Model::Logistic(LogisticModel { weights, hyper, seed }))
        }
        "constant" => {
            let p = parse_floats(get("probabilities")?)?;
            if p.len() != k {
                return Err(bad("probability count does not match num_classes"));
            }
            constant_model(p)
        }
        "majority-table" => {
            let dim = uint("dim")?;
            let mut table = HashMap::new();
            for e in entries {
                let (values, class) = e.rsplit_once(':').ok_or_else(|| bad("entry needs `:`"))?;
                let values = parse_floats(values)?;
                if values.len() != dim {
                    return Err(bad("entry width does not match dim"));
                }
                let class: usize = class.trim().parse().map_err(|_| bad("bad entry class"))?;
                if class >= k {
                    return Err(bad("entry class out of range"));
                }
                table.insert(row_key(ArrayView1::from(&values)), class);
            }
            Ok(Model::MajorityTable(MajorityTable {
                num_classes: k,
                dim,
                table,
            }))
        }
        other => Err(bad(format!("unknown kind `{other}`"))),
    }
}

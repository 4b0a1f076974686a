//! Datasets, synthetic generators with known conditional label
//! distributions, CSV ingestion and seeded splitting.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::{Execution, BLOCK};
use crate::rng;

/// Feature matrix plus class-index labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("dataset", format!("need at least 2 classes, got {num_classes}")));
        }
        if labels.is_empty() {
            return Err(Error::invalid("dataset", "no rows"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
            return Err(Error::invalid(
                "dataset",
                format!("label {y} at row {i} is outside 0..{num_classes}"),
            ));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Same features, different labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        Self::new(self.features.clone(), labels, self.num_classes)
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.features.select(Axis(0), rows),
            rows.iter().map(|&i| self.labels[i]).collect(),
            self.num_classes,
        )
    }

    /// Empirical label distribution.
    pub fn marginal(&self) -> Vec<f64> {
        label_histogram(&self.labels, self.num_classes)
            .into_iter()
            .map(|c| c as f64 / self.len() as f64)
            .collect()
    }
}

pub(crate) fn label_histogram(labels: &[usize], k: usize) -> Vec<usize> {
    let mut h = vec![0; k];
    for &y in labels {
        h[y] += 1;
    }
    h
}

/// Checks that `p` is a probability vector up to `tol`.
pub(crate) fn check_distribution(p: &[f64], tol: f64) -> std::result::Result<(), String> {
    if p.is_empty() {
        return Err("empty probability vector".into());
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(format!("entry {v} is not a nonnegative finite number"));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(format!("entries sum to {s}"));
    }
    Ok(())
}

/// Exact conditional label distribution `P(y | x)` of a generative model.
pub trait Conditional: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Writes `P(. | x)` into `out` (length `num_classes`).
    fn proba_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]);

    fn proba(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes()];
        self.proba_into(x, &mut out);
        out
    }
}

/// A conditional given by an arbitrary function of the feature row.
pub struct FnConditional<F> {
    num_classes: usize,
    f: F,
}

impl<F> FnConditional<F>
where
    F: Fn(ArrayView1<'_, f64>) -> Vec<f64> + Send + Sync,
{
    pub fn new(num_classes: usize, f: F) -> Self {
        Self { num_classes, f }
    }
}

impl<F> Conditional for FnConditional<F>
where
    F: Fn(ArrayView1<'_, f64>) -> Vec<f64> + Send + Sync,
{
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn proba_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        out.copy_from_slice(&(self.f)(x));
    }
}

/// In-place softmax over `out`.
pub(crate) fn softmax_in_place(out: &mut [f64]) {
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    for v in out.iter_mut() {
        *v /= s;
    }
}

/// Uniform mixture of `N(e_c, sigma^2 I_d)` over classes `c = 0..m`.
///
/// Class `c` is centred on the `c`-th standard basis vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureModel {
    num_classes: usize,
    dim: usize,
    sigma: f64,
}

impl MixtureModel {
    pub fn new(num_classes: usize, dim: usize, sigma: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("mixture model", "need at least 2 classes"));
        }
        if num_classes > dim {
            return Err(Error::invalid(
                "mixture model",
                format!("{num_classes} classes need at least as many dimensions, got d = {dim}"),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("mixture model", format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { num_classes, dim, sigma })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Conditional for MixtureModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    // -|x - e_y|^2 / 2s^2 = (x_y - 1/2)/s^2 - |x|^2/2s^2; only x_y / s^2 varies with y.
    fn proba_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let inv = 1.0 / (self.sigma * self.sigma);
        for (c, o) in out.iter_mut().enumerate() {
            *o = x[c] * inv;
        }
        softmax_in_place(out);
    }
}

fn rows_from_blocks(blocks: Vec<(Vec<usize>, Vec<f64>)>, dim: usize) -> (Array2<f64>, Vec<usize>) {
    let mut labels = Vec::new();
    let mut flat = Vec::new();
    for (l, f) in blocks {
        labels.extend(l);
        flat.extend(f);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, dim), flat).expect("block sizes are consistent");
    (features, labels)
}

/// Draws `n` rows from the mixture. The model is returned as the exact
/// conditional evaluator.
pub fn gen_mixture(model: &MixtureModel, n: usize, seed: u64) -> Result<(Dataset, MixtureModel)> {
    if n == 0 {
        return Err(Error::invalid("sample size", "n must be at least 1"));
    }
    let (m, d, sigma) = (model.num_classes, model.dim, model.sigma);
    let blocks = Execution::default().map(n.div_ceil(BLOCK), |b| {
        let mut r = rng::stream(seed, "mixture", b as u64);
        let rows = BLOCK.min(n - b * BLOCK);
        let mut labels = Vec::with_capacity(rows);
        let mut flat = Vec::with_capacity(rows * d);
        for _ in 0..rows {
            let y = r.random_range(0..m);
            labels.push(y);
            for j in 0..d {
                let z: f64 = r.sample(StandardNormal);
                flat.push(if j == y { 1.0 } else { 0.0 } + sigma * z);
            }
        }
        (labels, flat)
    });
    let (features, labels) = rows_from_blocks(blocks, d);
    Ok((Dataset::new(features, labels, m)?, *model))
}

/// Samples one label per row from `P(. | X_i)`.
pub fn resample_labels(cond: &dyn Conditional, features: ArrayView2<'_, f64>, seed: u64) -> Vec<usize> {
    let k = cond.num_classes();
    let mut labels = vec![0usize; features.nrows()];
    Execution::default().for_each_chunk_mut(&mut labels, BLOCK, |b, chunk| {
        let mut r = rng::stream(seed, "resample", b as u64);
        let mut p = vec![0.0; k];
        for (j, y) in chunk.iter_mut().enumerate() {
            cond.proba_into(features.row(b * BLOCK + j), &mut p);
            *y = sample_categorical(&p, r.random::<f64>());
        }
    });
    labels
}

/// Inverse-CDF draw from `p` given a uniform `u` in [0, 1).
pub(crate) fn sample_categorical(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (c, &pc) in p.iter().enumerate() {
        if pc > 0.0 {
            acc += pc;
            last = c;
            if u < acc {
                return c;
            }
        }
    }
    last
}

/// Skewed binary source: a clean label `y0 ~ Bernoulli(p1)`, features
/// `N(y0 * s * e_0, I_d)`, and with probability `label_noise` the observed
/// label is replaced by a fresh `Bernoulli(p1)` draw. The replacement keeps the
/// observed marginal at exactly `p1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkewedBinarySpec {
    pub positive_rate: f64,
    pub dim: usize,
    pub separation: f64,
    pub label_noise: f64,
}

impl Default for SkewedBinarySpec {
    fn default() -> Self {
        Self {
            positive_rate: 0.03,
            dim: 20,
            separation: 0.5,
            label_noise: 0.1,
        }
    }
}

impl SkewedBinarySpec {
    pub fn validate(&self) -> Result<()> {
        let p = self.positive_rate;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("skewed binary spec", format!("positive rate {p} not in (0, 1)")));
        }
        if self.dim == 0 {
            return Err(Error::invalid("skewed binary spec", "dim must be at least 1"));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::invalid("skewed binary spec", "separation must be finite and >= 0"));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::invalid("skewed binary spec", "label noise must be in [0, 0.5)"));
        }
        Ok(())
    }
}

impl Conditional for SkewedBinarySpec {
    fn num_classes(&self) -> usize {
        2
    }

    fn proba_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let p = self.positive_rate;
        let s = self.separation;
        let logit = (p / (1.0 - p)).ln() + s * x[0] - 0.5 * s * s;
        let clean = 1.0 / (1.0 + (-logit).exp());
        let p1 = (1.0 - self.label_noise) * clean + self.label_noise * p;
        out[0] = 1.0 - p1;
        out[1] = p1;
    }
}

pub fn gen_skewed_binary(spec: &SkewedBinarySpec, n: usize, seed: u64) -> Result<(Dataset, SkewedBinarySpec)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size", "n must be at least 1"));
    }
    let d = spec.dim;
    let blocks = Execution::default().map(n.div_ceil(BLOCK), |b| {
        let mut r = rng::stream(seed, "skewed-binary", b as u64);
        let rows = BLOCK.min(n - b * BLOCK);
        let mut labels = Vec::with_capacity(rows);
        let mut flat = Vec::with_capacity(rows * d);
        for _ in 0..rows {
            let clean = r.random::<f64>() < spec.positive_rate;
            for j in 0..d {
                let z: f64 = r.sample(StandardNormal);
                let shift = if j == 0 && clean { spec.separation } else { 0.0 };
                flat.push(shift + z);
            }
            let replace = r.random::<f64>() < spec.label_noise;
            let fresh = r.random::<f64>() < spec.positive_rate;
            labels.push(usize::from(if replace { fresh } else { clean }));
        }
        (labels, flat)
    });
    let (features, labels) = rows_from_blocks(blocks, d);
    Ok((Dataset::new(features, labels, 2)?, *spec))
}

/// Reads a dataset: header row, one integer label column, every other column
/// a decimal real.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let (features, labels) = read_table(path, label_column)?;
    let labels = labels.ok_or_else(|| Error::MissingColumn {
        path: path.to_path_buf(),
        column: label_column.to_string(),
    })?;
    let k = labels.iter().max().map_or(0, |m| m + 1).max(2);
    Dataset::new(features, labels, k)
}

/// Like [`load_csv`], but the label column may be absent, in which case every
/// column is a feature and no labels are returned.
pub fn load_features_csv(path: impl AsRef<Path>, label_column: &str) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
    read_table(path.as_ref(), label_column)
}

fn read_table(path: &Path, label_column: &str) -> Result<(Array2<f64>, Option<Vec<usize>>)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let label_idx = headers.iter().position(|h| h == label_column);
    let d = headers.len() - usize::from(label_idx.is_some());

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |column: &str, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            reason,
        };
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if Some(j) == label_idx {
                let y: usize = cell
                    .parse()
                    .map_err(|_| parse_err(label_column, format!("label `{cell}` is not a class index")))?;
                labels.push(y);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(&headers[j], format!("`{cell}` is not a number")))?;
                flat.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    let features = Array2::from_shape_vec((rows, d), flat).expect("csv rows have uniform width");
    Ok((features, label_idx.map(|_| labels)))
}

/// Writes `dataset` in the format [`load_csv`] reads: feature columns
/// `x0..x{d-1}` followed by the label column.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("x{j}")).collect();
    header.push(label_column.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (row, y) in dataset.features.rows().into_iter().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Row indices of a seeded (train, validation, test) partition.
pub fn split_indices(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<[Vec<usize>; 3]> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::invalid(
            "split fractions",
            format!("all must be positive, got ({a}, {b}, {c})"),
        ));
    }
    if (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("split fractions", format!("must sum to 1, got {}", a + b + c)));
    }
    // guard against 0.8 * 100 landing at 79.999..
    let n_train = (n as f64 * a + 1e-9).floor() as usize;
    let n_val = (n as f64 * b + 1e-9).floor() as usize;
    let n_test = n.saturating_sub(n_train + n_val);
    for (part, size) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        if size == 0 {
            return Err(Error::EmptySplit { part, n });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split", 0));
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok([order, val, test])
}

pub fn split(dataset: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let [tr, va, te] = split_indices(dataset.len(), fractions, seed)?;
    Ok((dataset.subset(&tr)?, dataset.subset(&va)?, dataset.subset(&te)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn basis(d: usize, i: usize) -> Array1<f64> {
        let mut v = Array1::zeros(d);
        v[i] = 1.0;
        v
    }

    #[test]
    fn mixture_posterior_at_basis_vector() {
        let m = MixtureModel::new(2, 100, 1.0).unwrap();
        let p = m.proba(basis(100, 1).view());
        // 1 / (1 + e^-1)
        assert!((p[1] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixture_limits() {
        let tight = MixtureModel::new(2, 3, 1e-3).unwrap();
        assert!(tight.proba(basis(3, 1).view())[1] > 1.0 - 1e-12);
        let wide = MixtureModel::new(5, 5, 1e6).unwrap();
        for p in wide.proba(array![3.0, -2.0, 0.5, 7.0, 1.0].view()) {
            assert!((p - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn mixture_rejects_more_classes_than_dims() {
        assert!(matches!(MixtureModel::new(4, 3, 1.0), Err(Error::Invalid { .. })));
        assert!(MixtureModel::new(2, 3, 0.0).is_err());
    }

    #[test]
    fn generators_are_reproducible() {
        let m = MixtureModel::new(3, 4, 0.5).unwrap();
        let (a, _) = gen_mixture(&m, 5000, 11).unwrap();
        let (b, _) = gen_mixture(&m, 5000, 11).unwrap();
        let (c, _) = gen_mixture(&m, 5000, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let s = SkewedBinarySpec::default();
        assert_eq!(gen_skewed_binary(&s, 100, 3).unwrap().0, gen_skewed_binary(&s, 100, 3).unwrap().0);
    }

    #[test]
    fn resample_deterministic_conditional() {
        let cond = FnConditional::new(3, |x: ArrayView1<'_, f64>| {
            let mut p = vec![0.0; 3];
            p[x[0] as usize] = 1.0;
            p
        });
        let x = array![[2.0], [0.0], [1.0], [2.0]];
        assert_eq!(resample_labels(&cond, x.view(), 5), vec![2, 0, 1, 2]);
    }

    #[test]
    fn resample_uniform_binary_fraction() {
        let cond = FnConditional::new(2, |_: ArrayView1<'_, f64>| vec![0.5, 0.5]);
        let x = Array2::<f64>::zeros((1_000_000, 1));
        let y = resample_labels(&cond, x.view(), 99);
        let frac = y.iter().sum::<usize>() as f64 / y.len() as f64;
        assert!((frac - 0.5).abs() < 0.0015, "{frac}");
        assert_eq!(y, resample_labels(&cond, x.view(), 99));
    }

    #[test]
    fn skewed_positive_count_within_three_sigma() {
        let (ds, _) = gen_skewed_binary(&SkewedBinarySpec::default(), 100_000, 1).unwrap();
        let pos = ds.labels().iter().sum::<usize>() as f64;
        assert!((pos - 3000.0).abs() <= 161.8, "{pos}");
    }

    #[test]
    fn skewed_extremes() {
        let sharp = SkewedBinarySpec {
            positive_rate: 0.5,
            dim: 2,
            separation: 60.0,
            label_noise: 0.0,
        };
        let (ds, cond) = gen_skewed_binary(&sharp, 2000, 4).unwrap();
        let acc = ds
            .features()
            .rows()
            .into_iter()
            .zip(ds.labels())
            .filter(|(x, &y)| {
                let p = cond.proba(x.view());
                usize::from(p[1] > p[0]) == y
            })
            .count();
        assert_eq!(acc, 2000);

        let flat = SkewedBinarySpec {
            positive_rate: 0.5,
            dim: 2,
            separation: 0.0,
            label_noise: 0.0,
        };
        let p = flat.proba(array![3.0, 1.0].view());
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let (ds, _) = gen_mixture(&MixtureModel::new(3, 4, 2.0).unwrap(), 50, 8).unwrap();
        write_csv(&ds, &path, "label").unwrap();
        assert_eq!(load_csv(&path, "label").unwrap(), ds);

        assert!(matches!(load_csv(&path, "click"), Err(Error::MissingColumn { column, .. }) if column == "click"));

        std::fs::write(&path, "a,label\n1.5,0\n2.0,1\n-3,0\n").unwrap();
        let small = load_csv(&path, "label").unwrap();
        assert_eq!((small.len(), small.num_classes()), (3, 2));

        std::fs::write(&path, "a,label\n1.5,0\nzz,1\n").unwrap();
        match load_csv(&path, "label") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column.as_str()), (3, "a")),
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "a,label\n1.5,0.5\n").unwrap();
        assert!(matches!(load_csv(&path, "label"), Err(Error::Parse { .. })));
        std::fs::write(&path, "a,label\n").unwrap();
        assert!(matches!(load_csv(&path, "label"), Err(Error::EmptyFile { .. })));
    }

    #[test]
    fn split_sizes_and_errors() {
        let [a, b, c] = split_indices(100, (0.8, 0.04, 0.16), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (80, 4, 16));
        assert_eq!(split_indices(100, (0.8, 0.04, 0.16), 1).unwrap()[1], b);
        assert!(split_indices(100, (1.0, 0.0, 0.0), 1).is_err());
        assert!(matches!(split_indices(10, (0.9, 0.05, 0.05), 1), Err(Error::EmptySplit { .. })));
        assert!(split_indices(10, (0.5, 0.3, 0.3), 1).is_err());
    }
}

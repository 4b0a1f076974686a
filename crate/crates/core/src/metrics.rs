//! Attack utilities, expected-attack-utility estimators and the closed-form
//! advantage bounds.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::attacks::{spa, AdversaryKnowledge, InferredLabels};
use crate::data::{resample_labels, Conditional, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::Model;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum UtilityKind {
    /// `1{yhat = y}`.
    ZeroOne,
    /// `1{yhat = y} / (2 p_y)` for a label marginal `p`.
    Weighted(Vec<f64>),
    /// `4b^2 - (yhat - y)^2` on class indices read as reals.
    Regression { b: f64 },
}

/// An attack utility `u(yhat, y)` with values in `[0, B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    kind: UtilityKind,
}

impl UtilitySpec {
    pub fn zero_one() -> Self {
        Self {
            kind: UtilityKind::ZeroOne,
        }
    }

    pub fn weighted(marginal: Vec<f64>) -> Result<Self> {
        if marginal.len() < 2 {
            return Err(Error::invalid("weighted utility", "marginal needs at least 2 classes"));
        }
        if let Some((c, p)) = marginal.iter().enumerate().find(|(_, p)| !(**p > 0.0 && p.is_finite())) {
            return Err(Error::invalid(
                "weighted utility",
                format!("marginal entry {c} is {p}; all must be > 0"),
            ));
        }
        Ok(Self {
            kind: UtilityKind::Weighted(marginal),
        })
    }

    pub fn regression(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::invalid("regression utility", format!("b = {b} must be > 0")));
        }
        Ok(Self {
            kind: UtilityKind::Regression { b },
        })
    }

    pub fn kind(&self) -> &UtilityKind {
        &self.kind
    }

    /// The bound `B`: 1, `max_y 1/(2 p_y)` or `4b^2`.
    pub fn bound(&self) -> f64 {
        match &self.kind {
            UtilityKind::ZeroOne => 1.0,
            UtilityKind::Weighted(p) => p.iter().map(|p| 0.5 / p).fold(0.0, f64::max),
            UtilityKind::Regression { b } => 4.0 * b * b,
        }
    }

    /// Checks that every pair over `k` classes has utility in `[0, B]`.
    pub fn check_classes(&self, k: usize) -> Result<()> {
        match &self.kind {
            UtilityKind::ZeroOne => Ok(()),
            UtilityKind::Weighted(p) if p.len() != k => Err(Error::invalid(
                "weighted utility",
                format!("marginal has {} entries but there are {k} classes", p.len()),
            )),
            UtilityKind::Weighted(_) => Ok(()),
            UtilityKind::Regression { b } if (k as f64 - 1.0) > 2.0 * b => Err(Error::invalid(
                "regression utility",
                format!("class indices up to {} exceed the range 2b = {}", k - 1, 2.0 * b),
            )),
            UtilityKind::Regression { .. } => Ok(()),
        }
    }

    /// `u(yhat, y)` for pairs already validated by [`UtilitySpec::check_classes`].
    pub fn value(&self, yhat: usize, y: usize) -> f64 {
        match &self.kind {
            UtilityKind::ZeroOne => f64::from(u8::from(yhat == y)),
            UtilityKind::Weighted(p) => {
                if yhat == y {
                    0.5 / p[y]
                } else {
                    0.0
                }
            }
            UtilityKind::Regression { b } => {
                let diff = yhat as f64 - y as f64;
                4.0 * b * b - diff * diff
            }
        }
    }

    /// Checked `u(yhat, y)`.
    pub fn utility(&self, yhat: usize, y: usize) -> Result<f64> {
        if let UtilityKind::Weighted(p) = &self.kind {
            if yhat.max(y) >= p.len() {
                return Err(Error::invalid("weighted utility", format!("class {} has no marginal", yhat.max(y))));
            }
        }
        let v = self.value(yhat, y);
        if v < 0.0 {
            return Err(Error::invalid("regression utility", format!("|{yhat} - {y}| exceeds 2b")));
        }
        Ok(v)
    }

    /// Guess maximizing `sum_y p_y u(guess, y)`, with that expectation. Ties
    /// go to the lowest class.
    pub fn best_response(&self, p: &[f64]) -> (usize, f64) {
        match &self.kind {
            UtilityKind::ZeroOne => {
                let c = crate::models::argmax(p);
                (c, p[c])
            }
            UtilityKind::Weighted(m) => {
                let scores: Vec<f64> = p.iter().zip(m).map(|(p, m)| 0.5 * p / m).collect();
                let c = crate::models::argmax(&scores);
                (c, scores[c])
            }
            UtilityKind::Regression { .. } => {
                let scores: Vec<f64> = (0..p.len())
                    .map(|g| p.iter().enumerate().map(|(y, py)| py * self.value(g, y)).sum())
                    .collect();
                let c = crate::models::argmax(&scores);
                (c, scores[c])
            }
        }
    }
}

/// Mean and standard error of a Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Sample mean and `s / sqrt(T)` with the unbiased sample deviation,
    /// accumulated in index order.
    pub fn from_samples(samples: &[f64]) -> Self {
        let t = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / t;
        if samples.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (t - 1.0);
        Self {
            mean,
            stderr: (var / t).sqrt(),
        }
    }
}

/// Mean per-row utility of one realized guess vector.
pub fn eau_empirical(inferred: &InferredLabels, true_labels: &[usize], spec: &UtilitySpec) -> Result<f64> {
    if inferred.labels.len() != true_labels.len() {
        return Err(Error::LengthMismatch {
            left: inferred.labels.len(),
            right: true_labels.len(),
        });
    }
    if true_labels.is_empty() {
        return Err(Error::invalid("labels", "empty"));
    }
    let mut total = 0.0;
    for (&g, &y) in inferred.labels.iter().zip(true_labels) {
        total += spec.utility(g, y)?;
    }
    Ok(total / true_labels.len() as f64)
}

/// Expected attack utility with the features held fixed.
///
/// Trial `t` resamples labels from `cond`, runs `pipeline` to get the released
/// model, runs `attack` on `(X, model, cond)` and records the mean row
/// utility. Returns the mean over `trials` and its standard error. Trials use
/// streams derived from `(seed, t)` and are aggregated in trial order, so the
/// result does not depend on `exec`.
#[allow(clippy::too_many_arguments)]
pub fn eau_monte_carlo<P, A>(
    cond: &dyn Conditional,
    features: ArrayView2<'_, f64>,
    pipeline: P,
    attack: A,
    spec: &UtilitySpec,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<Estimate>
where
    P: Fn(&Dataset, u64) -> Result<Model> + Sync,
    A: Fn(&AdversaryKnowledge<'_>) -> Result<InferredLabels> + Sync,
{
    if trials < 2 {
        return Err(Error::invalid("trials", "need at least 2"));
    }
    let k = cond.num_classes();
    spec.check_classes(k)?;
    let samples = exec.try_map(trials, |t| -> Result<f64> {
        let labels = resample_labels(cond, features, rng::derive_seed(seed, "mc-labels", t as u64));
        let train = Dataset::new(features.to_owned(), labels, k)?;
        let model = pipeline(&train, rng::derive_seed(seed, "mc-pipeline", t as u64))?;
        let knowledge = AdversaryKnowledge::new(features).with_model(&model).with_conditional(cond);
        eau_empirical(&attack(&knowledge)?, train.labels(), spec)
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// `(1/n) sum_i max_g E[u(g, y_i) | X_i]`, by enumerating classes.
pub fn leau_exact(cond: &dyn Conditional, features: ArrayView2<'_, f64>, spec: &UtilitySpec) -> Result<f64> {
    spec.check_classes(cond.num_classes())?;
    if features.nrows() == 0 {
        return Err(Error::invalid("features", "no rows"));
    }
    let mut p = vec![0.0; cond.num_classes()];
    let mut total = 0.0;
    for row in features.rows() {
        cond.proba_into(row, &mut p);
        total += spec.best_response(&p).1;
    }
    Ok(total / features.nrows() as f64)
}

/// Largest mean test utility among the candidates' utility-respecting
/// predictors.
pub fn leau_estimate(candidates: &[&Model], test: &Dataset, spec: &UtilitySpec) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate models", "need at least one"));
    }
    let mut best = f64::NEG_INFINITY;
    for model in candidates {
        let guess = spa(&AdversaryKnowledge::new(test.features()).with_model(model), spec)?;
        best = best.max(eau_empirical(&guess, test.labels(), spec)?);
    }
    Ok(best)
}

/// `eau - leau`; negative values are meaningful and kept.
pub fn advantage(eau: f64, leau: f64) -> f64 {
    eau - leau
}

/// Which form of the privacy factor to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    /// `1 - 2(1 - delta) / (1 + e^eps)`.
    #[default]
    Main,
    /// `1 - e^-eps (1 - delta)`, looser.
    Draft,
}

/// Inputs shared by the advantage bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub epsilon: f64,
    pub delta: f64,
    pub utility_bound: Option<f64>,
    /// `(1/n) sum_i E[sup_y u(y, y_i)]`.
    pub exp_sup_utility: Option<f64>,
    pub domain_size: Option<f64>,
    pub variant: BoundVariant,
}

impl BoundQuery {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            utility_bound: None,
            exp_sup_utility: None,
            domain_size: None,
            variant: BoundVariant::Main,
        }
    }

    pub fn with_utility_bound(mut self, b: f64) -> Self {
        self.utility_bound = Some(b);
        self
    }

    pub fn with_exp_sup_utility(mut self, s: f64) -> Self {
        self.exp_sup_utility = Some(s);
        self
    }

    pub fn with_variant(mut self, variant: BoundVariant) -> Self {
        self.variant = variant;
        self
    }

    fn validate(&self) -> Result<()> {
        check_privacy(self.epsilon, self.delta)?;
        if let Some(b) = self.utility_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("utility bound", format!("B = {b} must be > 0")));
            }
        }
        if let Some(s) = self.exp_sup_utility {
            let hi = self.utility_bound.unwrap_or(f64::INFINITY);
            if !(s >= 0.0 && s <= hi) {
                return Err(Error::invalid("expected sup-utility", format!("{s} not in [0, B]")));
            }
        }
        Ok(())
    }
}

fn check_privacy(epsilon: f64, delta: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon", format!("{epsilon} must be >= 0")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid("delta", format!("{delta} not in [0, 1]")));
    }
    Ok(())
}

/// The privacy factor shared by every advantage bound.
///
/// Main form: `1 - 2(1 - delta)/(1 + e^eps) = t + delta (1 - t)` with
/// `t = tanh(eps / 2)`, which stays accurate for small `eps`.
pub fn bound_factor(epsilon: f64, delta: f64, variant: BoundVariant) -> f64 {
    match variant {
        BoundVariant::Main => {
            let t = (0.5 * epsilon).tanh();
            t + delta * (1.0 - t)
        }
        BoundVariant::Draft => -(-epsilon).exp_m1() + delta * (-epsilon).exp(),
    }
}

/// Distribution-dependent bound on `Adv`: factor times the expected
/// sup-utility term.
pub fn advantage_bound(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let s = q
        .exp_sup_utility
        .ok_or_else(|| Error::invalid("bound query", "advantage bound needs the expected sup-utility term"))?;
    Ok(bound_factor(q.epsilon, q.delta, q.variant) * s)
}

/// Distribution-free bound: factor times `B`.
pub fn universal_bound(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let b = q
        .utility_bound
        .ok_or_else(|| Error::invalid("bound query", "universal bound needs the utility bound B"))?;
    Ok(bound_factor(q.epsilon, q.delta, q.variant) * b)
}

/// Train-test utility gap bound for an `(eps, delta)`-DP learner with
/// utility in [0, 1].
pub fn dp_generalization_gap_bound(epsilon: f64, delta: f64) -> Result<f64> {
    check_privacy(epsilon, delta)?;
    Ok(bound_factor(epsilon, delta, BoundVariant::Main))
}

/// Bound on `Adv^w` when the adversary does not see the features. The
/// sup-utility term is the unconditional expectation.
pub fn weak_threat_bound(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let s = q
        .exp_sup_utility
        .ok_or_else(|| Error::invalid("bound query", "weak-threat bound needs the expected sup-utility term"))?;
    Ok(bound_factor(q.epsilon, q.delta, q.variant) * s)
}

/// `1 - e^-eps + delta |Z|` for reconstruction over a domain of size `|Z|`.
pub fn reconstruction_bound(epsilon: f64, delta: f64, domain_size: f64) -> Result<f64> {
    check_privacy(epsilon, delta)?;
    if !(domain_size > 0.0) {
        return Err(Error::invalid("domain size", format!("{domain_size} must be > 0")));
    }
    Ok(-(-epsilon).exp_m1() + delta * domain_size)
}

/// Result of inverting the universal bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Calibration {
    Epsilon(f64),
    /// `A >= B`: every epsilon meets the target.
    Unbounded,
    /// No `epsilon >= 0` meets the target at this delta.
    Infeasible {
        min_advantage: f64,
    },
}

/// Largest `eps` with `universal_bound(eps, delta, B) <= A`:
/// `eps = ln(2(1 - delta)/(1 - A/B) - 1)`, feasible iff `delta <= A/B`.
pub fn calibrate_epsilon(target: f64, delta: f64, b: f64) -> Result<Calibration> {
    check_privacy(0.0, delta)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid("utility bound", format!("B = {b} must be > 0")));
    }
    if !(target > 0.0) {
        return Err(Error::invalid("target advantage", format!("{target} must be > 0")));
    }
    if target >= b {
        return Ok(Calibration::Unbounded);
    }
    let a = target / b;
    if delta > a {
        return Ok(Calibration::Infeasible { min_advantage: delta * b });
    }
    let x = 2.0 * (a - delta) / (1.0 - a);
    Ok(Calibration::Epsilon(if x < 1.0 { x.ln_1p() } else { (1.0 + x).ln() }))
}

/// Hoeffding lower bound `1 - 2 exp(-(e^eps/(e^eps+1) - 1/2)^2 n)` on the
/// training accuracy of the majority-sign construction, clamped at 0.
pub fn hoeffding_lower_bound(epsilon: f64, n: usize) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} must be > 0")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let gap = 0.5 * (0.5 * epsilon).tanh();
    Ok((1.0 - 2.0 * (-gap * gap * n as f64).exp()).max(0.0))
}

/// One experimental cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub experiment: String,
    pub mechanism: String,
    pub attack: String,
    pub epsilon: f64,
    pub num_classes: usize,
    pub sigma: Option<f64>,
    pub n: usize,
    pub trials: usize,
    pub redraw: Option<usize>,
    pub eau: f64,
    pub eau_stderr: f64,
    pub leau: f64,
    pub advantage: f64,
    pub bound: f64,
    pub log_loss: Option<f64>,
    pub zero_one_eau: Option<f64>,
}

/// Descriptor fields of a [`MetricsReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub experiment: String,
    pub mechanism: String,
    pub attack: String,
    pub epsilon: f64,
    pub num_classes: usize,
    pub sigma: Option<f64>,
    pub n: usize,
    pub trials: usize,
    pub redraw: Option<usize>,
}

impl MetricsReport {
    pub fn new(cell: Cell, eau: Estimate, leau: f64, bound: f64) -> Self {
        Self {
            experiment: cell.experiment,
            mechanism: cell.mechanism,
            attack: cell.attack,
            epsilon: cell.epsilon,
            num_classes: cell.num_classes,
            sigma: cell.sigma,
            n: cell.n,
            trials: cell.trials,
            redraw: cell.redraw,
            eau: eau.mean,
            eau_stderr: eau.stderr,
            leau,
            advantage: advantage(eau.mean, leau),
            bound,
            log_loss: None,
            zero_one_eau: None,
        }
    }
}

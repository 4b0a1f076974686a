//! Experiment harnesses: the Gaussian-mixture simulation, the majority-table
//! construction checked against its Hoeffding bound, and the skewed
//! click-prediction study. Each harness returns plain rows in configuration
//! order; [`write_results`] serializes them with a sidecar manifest.

use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::attacks::{marginal_guess, spa, AdversaryKnowledge, InferredLabels};
use crate::data::{gen_mixture, gen_skewed_binary, load_csv, split, Dataset, FnConditional, MixtureModel, SkewedBinarySpec};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mechanisms::{
    alibi, kmeans, lp_1st_domain_prior, lp_mst, pate, randomized_response, Clustering, LpMstConfig, MechanismReport, PateConfig, TopK,
};
use crate::metrics::{
    advantage_bound, eau_empirical, eau_monte_carlo, hoeffding_lower_bound, leau_estimate, leau_exact, universal_bound, BoundQuery, Cell,
    Estimate, MetricsReport, UtilitySpec,
};
use crate::models::{constant_model, log_loss, majority_table, LogisticHyper, Model};
use crate::rng::derive_seed;

/// Training mechanisms the harnesses can run. `lp-1st` is plain randomized
/// response followed by logistic regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismKind {
    #[serde(rename = "lp-1st", alias = "rr")]
    Lp1st,
    #[serde(rename = "lp-1st-domain-prior")]
    Lp1stDomainPrior,
    #[serde(rename = "lp-2st")]
    Lp2st,
    #[serde(rename = "alibi")]
    Alibi,
    #[serde(rename = "pate")]
    Pate,
}

impl MechanismKind {
    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Lp1st => "lp-1st",
            MechanismKind::Lp1stDomainPrior => "lp-1st-domain-prior",
            MechanismKind::Lp2st => "lp-2st",
            MechanismKind::Alibi => "alibi",
            MechanismKind::Pate => "pate",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lp-1st" | "rr" => Ok(MechanismKind::Lp1st),
            "lp-1st-domain-prior" => Ok(MechanismKind::Lp1stDomainPrior),
            "lp-2st" => Ok(MechanismKind::Lp2st),
            "alibi" => Ok(MechanismKind::Alibi),
            "pate" => Ok(MechanismKind::Pate),
            other => Err(Error::invalid(
                "mechanism",
                format!("`{other}` is not one of lp-1st, lp-1st-domain-prior, lp-2st, alibi, pate"),
            )),
        }
    }
}

/// Knobs shared by every mechanism run.
#[derive(Debug, Clone, Copy)]
pub struct MechanismSettings<'a> {
    pub hyper: &'a LogisticHyper,
    pub top_k: TopK,
    pub first_stage_fraction: f64,
    pub prior_smoothing: f64,
    pub pate_teachers: usize,
    pub pate_queries: usize,
    pub clustering: Option<&'a Clustering>,
}

/// Runs `kind` at total budget `epsilon`. PATE spends `epsilon / queries` per
/// query.
pub fn release(kind: MechanismKind, train: &Dataset, epsilon: f64, settings: &MechanismSettings<'_>, seed: u64) -> Result<MechanismReport> {
    Ok(match kind {
        MechanismKind::Lp1st | MechanismKind::Lp2st => {
            let config = LpMstConfig {
                stages: if kind == MechanismKind::Lp1st { 1 } else { 2 },
                top_k: settings.top_k,
                first_stage_fraction: settings.first_stage_fraction,
            };
            lp_mst(train, &config, epsilon, settings.hyper, seed)?
        }
        MechanismKind::Lp1stDomainPrior => {
            let clustering = settings
                .clustering
                .ok_or_else(|| Error::invalid("lp-1st-domain-prior", "needs a clustering of the training features"))?;
            lp_1st_domain_prior(
                train,
                clustering,
                settings.top_k,
                settings.first_stage_fraction,
                settings.prior_smoothing,
                epsilon,
                settings.hyper,
                seed,
            )?
        }
        MechanismKind::Alibi => alibi(train, epsilon, settings.hyper, seed)?,
        MechanismKind::Pate => {
            let config = PateConfig {
                teachers: settings.pate_teachers,
                queries: settings.pate_queries,
                epsilon_per_query: epsilon / settings.pate_queries as f64,
            };
            pate(train, &config, settings.hyper, seed)?
        }
    })
}

fn check_epsilon_grid(field: &'static str, grid: &[f64], ascending: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(field, "needs at least one value"));
    }
    if let Some(e) = grid.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::invalid(field, format!("{e} is not positive")));
    }
    if ascending && grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(field, "must be sorted strictly ascending"));
    }
    Ok(())
}

/// Gaussian-mixture simulation: `m` classes centred on basis vectors of
/// `R^dim` with noise `sigma`, `n` fixed feature rows, labels redrawn in each
/// of `trials` Monte-Carlo trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub class_counts: Vec<usize>,
    pub dim: usize,
    pub sigmas: Vec<f64>,
    pub n: usize,
    pub trials: usize,
    pub epsilons: Vec<f64>,
    /// Independent feature matrices per `(m, sigma)`.
    pub feature_redraws: usize,
    pub mechanism: MechanismKind,
    pub top_k: TopK,
    pub first_stage_fraction: f64,
    pub pate_teachers: usize,
    pub pate_queries: usize,
    pub hyper: LogisticHyper,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            class_counts: vec![2, 100],
            dim: 100,
            sigmas: vec![1.0, 10.0, 100.0],
            n: 100,
            trials: 1000,
            epsilons: vec![0.1, 0.5, 1.0, 2.0, 4.0, 10.0],
            feature_redraws: 1,
            mechanism: MechanismKind::Lp1st,
            top_k: TopK::Adaptive,
            first_stage_fraction: 0.5,
            pate_teachers: 5,
            pate_queries: 50,
            hyper: LogisticHyper::default(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_counts.is_empty() {
            return Err(Error::invalid("class_counts", "needs at least one value"));
        }
        if let Some(m) = self.class_counts.iter().find(|&&m| m < 2 || m > self.dim) {
            return Err(Error::invalid("class_counts", format!("{m} not in 2..={}", self.dim)));
        }
        if self.sigmas.is_empty() {
            return Err(Error::invalid("sigmas", "needs at least one value"));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("sigmas", format!("{s} is not a positive number")));
        }
        if self.n < 2 {
            return Err(Error::invalid("n", "must be at least 2"));
        }
        if self.trials < 2 {
            return Err(Error::invalid("trials", "must be at least 2"));
        }
        if self.feature_redraws == 0 {
            return Err(Error::invalid("feature_redraws", "must be at least 1"));
        }
        check_epsilon_grid("epsilons", &self.epsilons, true)?;
        if self.mechanism == MechanismKind::Lp1stDomainPrior {
            return Err(Error::invalid(
                "mechanism",
                "lp-1st-domain-prior is only available in the click-prediction study",
            ));
        }
        if self.mechanism == MechanismKind::Pate && !(self.pate_teachers >= 2 && (1..=self.n).contains(&self.pate_queries)) {
            return Err(Error::invalid(
                "pate_queries",
                format!("need >= 2 teachers and 1..={} queries", self.n),
            ));
        }
        let max_m = self.class_counts.iter().copied().max().unwrap_or(2);
        self.hyper.validate(max_m)?;
        Ok(())
    }
}

/// One row per `(m, sigma, redraw, epsilon)` cell: SPA's zero-one EAU over the
/// mechanism, the exact L-EAU, the advantage and its bound.
///
/// The feature matrix and the Monte-Carlo seed depend on the cell group but
/// not on epsilon, so every epsilon sees the same label redraws.
pub fn run_simulation(config: &SimulationConfig) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    let zero_one = UtilitySpec::zero_one();
    let mut reports = Vec::new();
    let mut group = 0u64;
    for &m in &config.class_counts {
        for &sigma in &config.sigmas {
            for redraw in 0..config.feature_redraws {
                let mixture = MixtureModel::new(m, config.dim, sigma)?;
                let (sample, _) = gen_mixture(&mixture, config.n, derive_seed(config.seed, "sim-features", group))?;
                let features = sample.features();
                let leau = leau_exact(&mixture, features, &zero_one)?;
                let mc_seed = derive_seed(config.seed, "sim-mc", group);
                for &epsilon in &config.epsilons {
                    let settings = MechanismSettings {
                        hyper: &config.hyper,
                        top_k: config.top_k,
                        first_stage_fraction: config.first_stage_fraction,
                        prior_smoothing: 1.0,
                        pate_teachers: config.pate_teachers,
                        pate_queries: config.pate_queries,
                        clustering: None,
                    };
                    let eau = eau_monte_carlo(
                        &mixture,
                        features,
                        |train, s| Ok(release(config.mechanism, train, epsilon, &settings, s)?.model),
                        |k| spa(k, &zero_one),
                        &zero_one,
                        config.trials,
                        mc_seed,
                        config.execution,
                    )?;
                    let bound = advantage_bound(&BoundQuery::new(epsilon, 0.0).with_utility_bound(1.0).with_exp_sup_utility(1.0))?;
                    let cell = Cell {
                        experiment: "simulation".into(),
                        mechanism: config.mechanism.name().into(),
                        attack: "spa".into(),
                        epsilon,
                        num_classes: m,
                        sigma: Some(sigma),
                        n: config.n,
                        trials: config.trials,
                        redraw: Some(redraw),
                    };
                    reports.push(MetricsReport::new(cell, eau, leau, bound));
                }
                group += 1;
            }
        }
    }
    Ok(reports)
}

fn same_group(a: &MetricsReport, b: &MetricsReport) -> bool {
    a.experiment == b.experiment
        && a.mechanism == b.mechanism
        && a.attack == b.attack
        && a.num_classes == b.num_classes
        && a.sigma == b.sigma
        && a.redraw == b.redraw
}

fn describe(r: &MetricsReport) -> String {
    let mut s = format!("{} m={}", r.mechanism, r.num_classes);
    if let Some(sigma) = r.sigma {
        s += &format!(" sigma={sigma}");
    }
    if let Some(redraw) = r.redraw {
        s += &format!(" redraw={redraw}");
    }
    s + &format!(" eps={}", r.epsilon)
}

/// Violations of the simulation invariants: bound domination up to 3 standard
/// errors, L-EAU of at least 1/2 for two classes, EAU nondecreasing in
/// epsilon up to 3 combined standard errors, and L-EAU constant in epsilon.
pub fn check_simulation(reports: &[MetricsReport]) -> Vec<String> {
    let mut out = Vec::new();
    for r in reports {
        if r.advantage > r.bound + 3.0 * r.eau_stderr {
            out.push(format!(
                "{}: advantage {} exceeds bound {} + 3 * stderr {}",
                describe(r),
                r.advantage,
                r.bound,
                r.eau_stderr
            ));
        }
        if r.num_classes == 2 && r.leau < 0.5 {
            out.push(format!("{}: two-class L-EAU {} is below 1/2", describe(r), r.leau));
        }
    }
    for (i, a) in reports.iter().enumerate() {
        for b in reports[i + 1..].iter().filter(|b| same_group(a, b)) {
            let (lo, hi) = if a.epsilon <= b.epsilon { (a, b) } else { (b, a) };
            let tol = 3.0 * (lo.eau_stderr.powi(2) + hi.eau_stderr.powi(2)).sqrt();
            if lo.epsilon < hi.epsilon && lo.eau - hi.eau > tol {
                out.push(format!(
                    "{} -> eps={}: EAU drops from {} to {} (tolerance {tol})",
                    describe(lo),
                    hi.epsilon,
                    lo.eau,
                    hi.eau
                ));
            }
            if a.leau != b.leau {
                out.push(format!("{} vs eps={}: L-EAU changes with epsilon", describe(a), b.epsilon));
            }
        }
    }
    out
}

/// Majority-table construction: `n / 2` rows at `x = -1` labelled 0 and
/// `n / 2` rows at `x = +1` labelled 1, released through binary randomized
/// response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thm1Config {
    pub epsilon: f64,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for Thm1Config {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            ns: vec![100, 1000],
            trials: 200,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl Thm1Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", format!("{} must be > 0", self.epsilon)));
        }
        if self.ns.is_empty() {
            return Err(Error::invalid("ns", "needs at least one value"));
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 2 || n % 2 == 1) {
            return Err(Error::invalid("ns", format!("{n} is not an even number >= 2")));
        }
        if self.trials < 2 {
            return Err(Error::invalid("trials", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thm1Row {
    pub n: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub eau: f64,
    pub eau_stderr: f64,
    pub hoeffding: f64,
}

/// SPA zero-one EAU of the majority table fitted to randomized-response labels,
/// next to the Hoeffding lower bound at the same `(epsilon, n)`.
pub fn run_thm1_demo(config: &Thm1Config) -> Result<Vec<Thm1Row>> {
    config.validate()?;
    let zero_one = UtilitySpec::zero_one();
    let truth = FnConditional::new(2, |x: ArrayView1<'_, f64>| if x[0] > 0.0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
    let epsilon = config.epsilon;
    config
        .ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let features = Array2::from_shape_fn((n, 1), |(row, _)| if row < n / 2 { -1.0 } else { 1.0 });
            let eau = eau_monte_carlo(
                &truth,
                features.view(),
                |train, s| {
                    let private = randomized_response(train.labels(), 2, epsilon, s)?;
                    Ok(majority_table(&train.with_labels(private)?))
                },
                |k| spa(k, &zero_one),
                &zero_one,
                config.trials,
                derive_seed(config.seed, "thm1", i as u64),
                config.execution,
            )?;
            Ok(Thm1Row {
                n,
                epsilon,
                trials: config.trials,
                eau: eau.mean,
                eau_stderr: eau.stderr,
                hoeffding: hoeffding_lower_bound(epsilon, n)?,
            })
        })
        .collect()
}

/// Violations of: EAU at least the Hoeffding bound in every row, and EAU
/// nondecreasing in `n` up to 3 combined standard errors.
pub fn check_thm1(rows: &[Thm1Row]) -> Vec<String> {
    let mut out = Vec::new();
    for r in rows {
        if r.eau < r.hoeffding {
            out.push(format!("n={}: EAU {} is below the Hoeffding bound {}", r.n, r.eau, r.hoeffding));
        }
    }
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let (lo, hi) = if a.n <= b.n { (a, b) } else { (b, a) };
            let tol = 3.0 * (lo.eau_stderr.powi(2) + hi.eau_stderr.powi(2)).sqrt();
            if lo.n < hi.n && lo.eau - hi.eau > tol {
                out.push(format!(
                    "n={} -> n={}: EAU drops from {} to {} (tolerance {tol})",
                    lo.n, hi.n, lo.eau, hi.eau
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CtrSource {
    #[default]
    Synthetic,
    Csv,
}

/// Click-prediction study on a skewed binary source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtrConfig {
    pub source: CtrSource,
    /// Rows drawn from the synthetic source.
    pub n: usize,
    pub synthetic: SkewedBinarySpec,
    pub csv_path: Option<PathBuf>,
    pub label_column: String,
    pub mechanisms: Vec<MechanismKind>,
    pub epsilons: Vec<f64>,
    /// (train, validation, test).
    pub split: (f64, f64, f64),
    pub hyper: LogisticHyper,
    pub top_k: TopK,
    pub first_stage_fraction: f64,
    pub clusters: usize,
    pub prior_smoothing: f64,
    pub pate_teachers: usize,
    pub pate_queries: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for CtrConfig {
    fn default() -> Self {
        Self {
            source: CtrSource::Synthetic,
            n: 100_000,
            synthetic: SkewedBinarySpec::default(),
            csv_path: None,
            label_column: "label".into(),
            mechanisms: vec![
                MechanismKind::Lp1st,
                MechanismKind::Lp1stDomainPrior,
                MechanismKind::Lp2st,
                MechanismKind::Alibi,
                MechanismKind::Pate,
            ],
            epsilons: vec![f64::INFINITY, 8.0, 4.0, 2.0, 1.0, 0.1],
            split: (0.8, 0.04, 0.16),
            hyper: LogisticHyper::default(),
            top_k: TopK::Adaptive,
            first_stage_fraction: 0.5,
            clusters: 100,
            prior_smoothing: 1.0,
            pate_teachers: 10,
            pate_queries: 1000,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl CtrConfig {
    pub fn validate(&self) -> Result<()> {
        match self.source {
            CtrSource::Synthetic => {
                self.synthetic.validate()?;
                if self.n < 2 {
                    return Err(Error::invalid("n", "must be at least 2"));
                }
            }
            CtrSource::Csv => {
                if self.csv_path.is_none() {
                    return Err(Error::invalid("csv_path", "required when source = \"csv\""));
                }
            }
        }
        check_epsilon_grid("epsilons", &self.epsilons, false)?;
        if self.clusters == 0 {
            return Err(Error::invalid("clusters", "must be at least 1"));
        }
        if !(self.prior_smoothing >= 0.0 && self.prior_smoothing.is_finite()) {
            return Err(Error::invalid("prior_smoothing", "must be >= 0"));
        }
        if self.pate_teachers < 2 || self.pate_queries == 0 {
            return Err(Error::invalid("pate_teachers", "need >= 2 teachers and >= 1 query"));
        }
        Ok(())
    }

    fn load(&self) -> Result<(Dataset, Option<SkewedBinarySpec>)> {
        match self.source {
            CtrSource::Synthetic => {
                let (data, spec) = gen_skewed_binary(&self.synthetic, self.n, derive_seed(self.seed, "ctr-data", 0))?;
                Ok((data, Some(spec)))
            }
            CtrSource::Csv => {
                let path = self.csv_path.as_ref().expect("validated");
                Ok((load_csv(path, &self.label_column)?, None))
            }
        }
    }
}

struct CtrContext<'a> {
    train: &'a Dataset,
    test: &'a Dataset,
    weighted: &'a UtilitySpec,
    zero_one: &'a UtilitySpec,
}

impl CtrContext<'_> {
    fn row(
        &self,
        cell: Cell,
        model: Option<&Model>,
        weighted_guess: InferredLabels,
        zero_one_guess: InferredLabels,
        leau: f64,
        bound: f64,
    ) -> Result<MetricsReport> {
        let truth = self.train.labels();
        if weighted_guess.labels.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: weighted_guess.labels.len(),
                right: truth.len(),
            });
        }
        let per_row: Vec<f64> = weighted_guess
            .labels
            .iter()
            .zip(truth)
            .map(|(&g, &y)| self.weighted.value(g, y))
            .collect();
        let mut report = MetricsReport::new(cell, Estimate::from_samples(&per_row), leau, bound);
        report.log_loss = model.map(|m| log_loss(m, self.test));
        report.zero_one_eau = Some(eau_empirical(&zero_one_guess, truth, self.zero_one)?);
        Ok(report)
    }

    fn spa_row(&self, cell: Cell, model: &Model, leau: f64, bound: f64) -> Result<MetricsReport> {
        let knowledge = AdversaryKnowledge::new(self.train.features()).with_model(model);
        let w = spa(&knowledge, self.weighted)?;
        let z = spa(&knowledge, self.zero_one)?;
        self.row(cell, Some(model), w, z, leau, bound)
    }
}

/// Rows: the constant predictor at the training marginal (epsilon reported as
/// infinite), the model-free marginal guess (epsilon 0), then every
/// `(mechanism, epsilon)` pair in configuration order.
///
/// Utilities are the class-reweighted `1 / (2 p_y)` with `p` the training
/// marginal; EAU is measured on the training rows with a row-level standard
/// error. L-EAU is exact under the synthetic source and, for CSV data, the best
/// test utility among all trained models.
pub fn run_ctr(config: &CtrConfig) -> Result<Vec<MetricsReport>> {
    config.validate()?;
    let (data, spec) = config.load()?;
    let (train, _validation, test) = split(&data, config.split, derive_seed(config.seed, "ctr-split", 0))?;
    let marginal = train.marginal();
    let weighted = UtilitySpec::weighted(marginal.clone())?;
    let zero_one = UtilitySpec::zero_one();
    let b = weighted.bound();
    let k = train.num_classes();

    let clustering = if config.mechanisms.contains(&MechanismKind::Lp1stDomainPrior) {
        Some(kmeans(
            train.features(),
            config.clusters,
            derive_seed(config.seed, "ctr-kmeans", 0),
        )?)
    } else {
        None
    };
    let settings = MechanismSettings {
        hyper: &config.hyper,
        top_k: config.top_k,
        first_stage_fraction: config.first_stage_fraction,
        prior_smoothing: config.prior_smoothing,
        pate_teachers: config.pate_teachers,
        pate_queries: config.pate_queries.min(train.len()),
        clustering: clustering.as_ref(),
    };
    let cells: Vec<(MechanismKind, usize)> = config
        .mechanisms
        .iter()
        .flat_map(|&m| (0..config.epsilons.len()).map(move |e| (m, e)))
        .collect();
    let released = config.execution.try_map(cells.len(), |c| {
        let (kind, e) = cells[c];
        release(
            kind,
            &train,
            config.epsilons[e],
            &settings,
            derive_seed(config.seed, kind.name(), e as u64),
        )
    })?;

    let constant = constant_model(marginal.clone())?;
    let leau = match &spec {
        Some(spec) => leau_exact(spec, train.features(), &weighted)?,
        None => {
            let mut candidates: Vec<&Model> = vec![&constant];
            candidates.extend(released.iter().map(|r| &r.model));
            leau_estimate(&candidates, &test, &weighted)?
        }
    };
    let universal = |epsilon: f64| universal_bound(&BoundQuery::new(epsilon, 0.0).with_utility_bound(b));
    let ctx = CtrContext {
        train: &train,
        test: &test,
        weighted: &weighted,
        zero_one: &zero_one,
    };
    let cell = |mechanism: &str, attack: &str, epsilon: f64| Cell {
        experiment: "ctr".into(),
        mechanism: mechanism.into(),
        attack: attack.into(),
        epsilon,
        num_classes: k,
        sigma: None,
        n: train.len(),
        trials: 1,
        redraw: None,
    };

    let mut reports = Vec::with_capacity(cells.len() + 2);
    reports.push(ctx.spa_row(cell("constant", "spa", f64::INFINITY), &constant, leau, universal(f64::INFINITY)?)?);
    let knowledge = AdversaryKnowledge::new(train.features()).with_marginal(&marginal);
    reports.push(ctx.row(
        cell("none", "marginal-guess", 0.0),
        None,
        marginal_guess(&knowledge, &weighted)?,
        marginal_guess(&knowledge, &zero_one)?,
        leau,
        universal(0.0)?,
    )?);
    for (&(kind, e), r) in cells.iter().zip(&released) {
        let c = cell(kind.name(), "spa", config.epsilons[e]);
        reports.push(ctx.spa_row(c, &r.model, leau, universal(r.spent.epsilon)?)?);
    }
    Ok(reports)
}

/// Violations of bound domination (`advantage <= bound + 3 * stderr`).
pub fn check_ctr(reports: &[MetricsReport]) -> Vec<String> {
    reports
        .iter()
        .filter(|r| r.advantage > r.bound + 3.0 * r.eau_stderr)
        .map(|r| format!("{}: advantage {} exceeds bound {}", describe(r), r.advantage, r.bound))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    /// One JSON object per line.
    #[serde(alias = "records")]
    Jsonl,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" | "records" => Ok(OutputFormat::Jsonl),
            other => Err(Error::invalid("format", format!("`{other}` is not csv or jsonl"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

/// One serialized field.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(usize),
    Float(f64),
    Missing,
}

impl Value {
    /// Renders with `float` for real numbers; missing values are empty.
    pub fn render(&self, float: impl Fn(f64) -> String) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(x) => float(*x),
            Value::Missing => String::new(),
        }
    }

    /// JSON form; reals go through `float` and non-finite ones become strings.
    fn json(&self, float: impl Fn(f64) -> String) -> serde_json::Value {
        match self {
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Float(x) => {
                let shown: f64 = float(*x).parse().unwrap_or(*x);
                serde_json::Number::from_f64(shown).map_or_else(|| serde_json::Value::String(float_text(*x)), serde_json::Value::Number)
            }
            Value::Missing => serde_json::Value::Null,
        }
    }
}

/// Shortest round-trip decimal; infinities are `inf` and `-inf`.
pub fn float_text(x: f64) -> String {
    x.to_string()
}

/// A row type with a fixed column order.
pub trait Record {
    fn columns() -> &'static [&'static str];
    fn values(&self) -> Vec<Value>;
}

fn opt_float(x: Option<f64>) -> Value {
    x.map_or(Value::Missing, Value::Float)
}

impl Record for MetricsReport {
    fn columns() -> &'static [&'static str] {
        &[
            "experiment",
            "mechanism",
            "attack",
            "epsilon",
            "num_classes",
            "sigma",
            "n",
            "trials",
            "redraw",
            "eau",
            "eau_stderr",
            "leau",
            "advantage",
            "bound",
            "log_loss",
            "zero_one_eau",
        ]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Text(self.experiment.clone()),
            Value::Text(self.mechanism.clone()),
            Value::Text(self.attack.clone()),
            Value::Float(self.epsilon),
            Value::Int(self.num_classes),
            opt_float(self.sigma),
            Value::Int(self.n),
            Value::Int(self.trials),
            self.redraw.map_or(Value::Missing, Value::Int),
            Value::Float(self.eau),
            Value::Float(self.eau_stderr),
            Value::Float(self.leau),
            Value::Float(self.advantage),
            Value::Float(self.bound),
            opt_float(self.log_loss),
            opt_float(self.zero_one_eau),
        ]
    }
}

impl Record for Thm1Row {
    fn columns() -> &'static [&'static str] {
        &["n", "epsilon", "trials", "eau", "eau_stderr", "hoeffding"]
    }

    fn values(&self) -> Vec<Value> {
        vec![
            Value::Int(self.n),
            Value::Float(self.epsilon),
            Value::Int(self.trials),
            Value::Float(self.eau),
            Value::Float(self.eau_stderr),
            Value::Float(self.hoeffding),
        ]
    }
}

/// Renders rows as CSV (header first) or JSON lines, formatting reals with
/// `float`.
pub fn render_records<R: Record>(rows: &[R], format: OutputFormat, float: impl Fn(f64) -> String) -> String {
    let columns = R::columns();
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out += &columns.join(",");
            out.push('\n');
            for row in rows {
                let cells: Vec<String> = row.values().iter().map(|v| csv_escape(v.render(&float))).collect();
                out += &cells.join(",");
                out.push('\n');
            }
        }
        OutputFormat::Jsonl => {
            for row in rows {
                let mut obj = serde_json::Map::new();
                for (name, v) in columns.iter().zip(row.values()) {
                    obj.insert((*name).to_string(), v.json(&float));
                }
                out += &serde_json::Value::Object(obj).to_string();
                out.push('\n');
            }
        }
    }
    out
}

fn csv_escape(s: String) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

/// Sidecar describing a results file: the experiment, the format, the column
/// list and the fully resolved configuration including seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub experiment: String,
    pub config: toml::Table,
}

impl Manifest {
    pub fn new(experiment: &str, config: &impl Serialize) -> Result<Self> {
        let config = toml::Table::try_from(config).map_err(|e| Error::invalid("config", e.to_string()))?;
        Ok(Self {
            experiment: experiment.to_string(),
            config,
        })
    }

    pub fn render(&self, format: OutputFormat, columns: &[&str]) -> Result<String> {
        let mut t = toml::Table::new();
        t.insert("experiment".into(), self.experiment.clone().into());
        t.insert("format".into(), format.name().into());
        t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        t.insert(
            "columns".into(),
            toml::Value::Array(columns.iter().map(|c| toml::Value::from(*c)).collect()),
        );
        t.insert("config".into(), toml::Value::Table(self.config.clone()));
        toml::to_string(&t).map_err(|e| Error::invalid("manifest", e.to_string()))
    }
}

/// `<path>.manifest.toml`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.toml");
    path.with_file_name(name)
}

/// Writes `rows` at full precision and the sidecar manifest next to it.
pub fn write_results<R: Record>(rows: &[R], path: impl AsRef<Path>, format: OutputFormat, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_records(rows, format, float_text)).map_err(|e| Error::io(path, e))?;
    let sidecar = manifest_path(path);
    std::fs::write(&sidecar, manifest.render(format, R::columns())?).map_err(|e| Error::io(&sidecar, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_sim() -> SimulationConfig {
        SimulationConfig {
            class_counts: vec![2, 5],
            dim: 5,
            sigmas: vec![1.0],
            n: 20,
            trials: 10,
            epsilons: vec![0.5, 4.0],
            hyper: LogisticHyper {
                iterations: 20,
                ..Default::default()
            },
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn simulation_rows_follow_config_order() {
        let reports = run_simulation(&tiny_sim()).unwrap();
        let keys: Vec<(usize, f64)> = reports.iter().map(|r| (r.num_classes, r.epsilon)).collect();
        assert_eq!(keys, vec![(2, 0.5), (2, 4.0), (5, 0.5), (5, 4.0)]);
        assert_eq!(reports[0].leau, reports[1].leau);
        assert!(check_simulation(&reports).is_empty());
    }

    #[test]
    fn simulation_is_schedule_independent() {
        let mut cfg = tiny_sim();
        let par = run_simulation(&cfg).unwrap();
        cfg.execution = Execution::Sequential;
        assert_eq!(par, run_simulation(&cfg).unwrap());
    }

    #[test]
    fn simulation_validation_names_fields() {
        let mut cfg = tiny_sim();
        cfg.epsilons = vec![1.0, 0.5];
        assert!(cfg.validate().unwrap_err().to_string().contains("epsilons"));
        let mut cfg = tiny_sim();
        cfg.class_counts = vec![6];
        assert!(cfg.validate().unwrap_err().to_string().contains("class_counts"));
    }

    #[test]
    fn thm1_rows_and_infinite_epsilon() {
        let cfg = Thm1Config {
            epsilon: f64::INFINITY,
            ns: vec![4, 10],
            trials: 5,
            ..Default::default()
        };
        let rows = run_thm1_demo(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.eau == 1.0 && r.eau_stderr == 0.0));
        assert!((rows[0].hoeffding - (1.0 - 2.0 * (-1.0f64).exp())).abs() < 1e-15);
        let odd = Thm1Config {
            ns: vec![3],
            ..Default::default()
        };
        assert!(odd.validate().is_err());
    }

    #[test]
    fn check_flags_violations() {
        let base = MetricsReport::new(
            Cell {
                experiment: "simulation".into(),
                mechanism: "lp-1st".into(),
                attack: "spa".into(),
                epsilon: 1.0,
                num_classes: 2,
                sigma: Some(1.0),
                n: 10,
                trials: 10,
                redraw: Some(0),
            },
            Estimate { mean: 0.9, stderr: 0.01 },
            0.4,
            0.1,
        );
        let v = check_simulation(std::slice::from_ref(&base));
        assert_eq!(v.len(), 2);
        let mut later = base.clone();
        later.epsilon = 2.0;
        later.eau = 0.5;
        later.advantage = 0.1;
        later.leau = 0.45;
        let v = check_simulation(&[base, later]);
        assert!(v.iter().any(|s| s.contains("drops")));
        assert!(v.iter().any(|s| s.contains("changes with epsilon")));
    }

    #[test]
    fn small_ctr_run() {
        let cfg = CtrConfig {
            n: 4000,
            epsilons: vec![f64::INFINITY, 1.0],
            clusters: 10,
            pate_queries: 200,
            hyper: LogisticHyper {
                iterations: 30,
                ..Default::default()
            },
            seed: 5,
            ..Default::default()
        };
        let reports = run_ctr(&cfg).unwrap();
        assert_eq!(reports.len(), 2 + 5 * 2);
        let guess = &reports[1];
        assert_eq!(guess.attack, "marginal-guess");
        assert!((guess.eau - 0.5).abs() < 1e-12);
        assert_eq!(guess.bound, 0.0);
        assert!(check_ctr(&reports).is_empty());
        assert_eq!(reports[2].mechanism, "lp-1st");
        assert!(reports[2].epsilon.is_infinite());
    }

    #[test]
    fn csv_and_jsonl_rendering() {
        let row = Thm1Row {
            n: 4,
            epsilon: f64::INFINITY,
            trials: 2,
            eau: 1.0,
            eau_stderr: 0.0,
            hoeffding: 0.25,
        };
        let csv = render_records(std::slice::from_ref(&row), OutputFormat::Csv, float_text);
        assert_eq!(csv, "n,epsilon,trials,eau,eau_stderr,hoeffding\n4,inf,2,1,0,0.25\n");
        let json = render_records(&[row], OutputFormat::Jsonl, float_text);
        assert_eq!(
            json,
            "{\"eau\":1.0,\"eau_stderr\":0.0,\"epsilon\":\"inf\",\"hoeffding\":0.25,\"n\":4,\"trials\":2}\n"
        );
        let empty: Vec<MetricsReport> = Vec::new();
        assert_eq!(render_records(&empty, OutputFormat::Csv, float_text).lines().count(), 1);
        assert_eq!(render_records(&empty, OutputFormat::Jsonl, float_text), "");
    }

    #[test]
    fn write_results_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let cfg = Thm1Config::default();
        let manifest = Manifest::new("thm1", &cfg).unwrap();
        write_results::<Thm1Row>(&[], &path, OutputFormat::Csv, &manifest).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "n,epsilon,trials,eau,eau_stderr,hoeffding\n"
        );
        let text = std::fs::read_to_string(dir.path().join("out.csv.manifest.toml")).unwrap();
        assert!(text.contains("experiment = \"thm1\""));
        assert!(text.contains("seed = 0"));
        let bad = dir.path().join("missing").join("out.csv");
        assert!(matches!(
            write_results::<Thm1Row>(&[], &bad, OutputFormat::Csv, &manifest),
            Err(Error::Io { .. })
        ));
    }
}

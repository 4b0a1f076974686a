//! Command-line front end.
//!
//! Every randomized subcommand resolves its configuration from a preset, an
//! optional `--config` TOML file, `--set key=value` settings and finally the
//! named flags, echoes the resolved TOML to stderr, then runs. Numbers on
//! stdout carry 6 significant digits unless `--full-precision` is given;
//! files written with `--output` always carry full precision.
//!
//! Exit status: 0 on success, 1 on a runtime or validation error, 2 on a usage
//! error, 3 when `--check` finds an invariant violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::attacks::{spa, AdversaryKnowledge};
use crate::config::{self, parse_setting};
use crate::data::{load_csv, load_features_csv};
use crate::error::{Error, Result};
use crate::experiments::{
    check_ctr, check_simulation, check_thm1, manifest_path, release, render_records, run_ctr, run_simulation, run_thm1_demo, write_results,
    Manifest, MechanismKind, MechanismSettings, OutputFormat, Record,
};
use crate::mechanisms::{kmeans, TopK};
use crate::metrics::{
    advantage_bound, calibrate_epsilon, dp_generalization_gap_bound, eau_empirical, hoeffding_lower_bound, reconstruction_bound,
    universal_bound, weak_threat_bound, BoundQuery, BoundVariant, Calibration, UtilitySpec,
};
use crate::models::{load_model, save_model, LogisticHyper};
use crate::rng::derive_seed;

pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "labeldp",
    version,
    about = "Label-DP mechanisms, attacks, advantage bounds and experiments"
)]
struct Cli {
    /// Print numbers with full precision instead of 6 significant digits.
    #[arg(long, global = true)]
    full_precision: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate an advantage bound.
    Bound(BoundArgs),
    /// Largest epsilon whose universal bound meets a target advantage.
    Calibrate(CalibrateArgs),
    /// Privatize the labels of a CSV dataset.
    Privatize(PrivatizeArgs),
    /// Run the simple prediction attack with a saved model.
    Attack(AttackArgs),
    /// Gaussian-mixture simulation.
    Simulate(SimulateArgs),
    /// Majority-table construction against its Hoeffding bound.
    Thm1(Thm1Args),
    /// Skewed click-prediction study.
    Ctr(CtrArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BoundKind {
    Universal,
    Advantage,
    DpGeneralization,
    WeakThreat,
    Reconstruction,
    Hoeffding,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Main,
    Draft,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Utility bound B (universal bound).
    #[arg(long = "B", alias = "b")]
    utility_bound: Option<f64>,
    #[arg(long, value_enum, default_value_t = BoundKind::Universal)]
    kind: BoundKind,
    #[arg(long, value_enum, default_value_t = VariantArg::Main)]
    variant: VariantArg,
    /// Expected sup-utility term (advantage and weak-threat bounds).
    #[arg(long)]
    exp_sup: Option<f64>,
    /// Domain size (reconstruction bound).
    #[arg(long)]
    domain_size: Option<f64>,
    /// Sample size (Hoeffding bound).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long)]
    advantage: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long = "B", alias = "b")]
    utility_bound: f64,
}

/// Shared by the randomized subcommands.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML file overlaid on the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` setting overlaid on the config file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    settings: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Results file; a `<file>.manifest.toml` is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Exit with status 3 if an invariant of the run is violated.
    #[arg(long)]
    check: bool,
    /// `parallel` or `sequential`.
    #[arg(long)]
    execution: Option<String>,
}

#[derive(Args, Debug)]
struct PrivatizeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Private-label CSV (`row,private_label`).
    #[arg(long)]
    output: PathBuf,
    /// Also save the model trained on the private labels.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    mechanism: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    label_column: Option<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum UtilityArg {
    ZeroOne,
    Weighted,
}

#[derive(Args, Debug)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// `weighted` uses the label marginal of `--data`.
    #[arg(long, value_enum, default_value_t = UtilityArg::ZeroOne)]
    utility: UtilityArg,
    /// Inferred-label CSV; stdout if absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value = "fig1")]
    preset: String,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated epsilon grid.
    #[arg(long)]
    epsilons: Option<String>,
    #[arg(long)]
    mechanism: Option<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct Thm1Args {
    #[arg(long, default_value = "thm1")]
    preset: String,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated even sample sizes.
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct CtrArgs {
    #[arg(long, default_value = "ctr")]
    preset: String,
    #[arg(long)]
    n: Option<usize>,
    /// Read this CSV instead of the synthetic source.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Comma-separated mechanism list.
    #[arg(long)]
    mechanisms: Option<String>,
    /// Comma-separated epsilon grid (`inf` allowed).
    #[arg(long)]
    epsilons: Option<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
}

/// Settings for `privatize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivatizeConfig {
    pub mechanism: MechanismKind,
    pub epsilon: f64,
    pub label_column: String,
    pub top_k: TopK,
    pub first_stage_fraction: f64,
    pub clusters: usize,
    pub prior_smoothing: f64,
    pub pate_teachers: usize,
    pub pate_queries: usize,
    pub hyper: LogisticHyper,
    pub seed: u64,
}

impl Default for PrivatizeConfig {
    fn default() -> Self {
        Self {
            mechanism: MechanismKind::Lp1st,
            epsilon: 1.0,
            label_column: "label".into(),
            top_k: TopK::Adaptive,
            first_stage_fraction: 0.5,
            clusters: 100,
            prior_smoothing: 1.0,
            pate_teachers: 10,
            pate_queries: 1000,
            hyper: LogisticHyper::default(),
            seed: 0,
        }
    }
}

/// `x` with 6 significant digits, trailing zeros dropped; scientific notation
/// outside `[1e-5, 1e6)`.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let fixed = format!("{:.*}", (5 - exp) as usize, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

struct Printer {
    full: bool,
}

impl Printer {
    fn float(&self, x: f64) -> String {
        if self.full {
            x.to_string()
        } else {
            format_sig(x)
        }
    }

    fn json(&self, x: f64) -> serde_json::Value {
        if !x.is_finite() {
            return serde_json::Value::String(x.to_string());
        }
        let shown: f64 = self.float(x).parse().expect("formatted float parses");
        serde_json::Number::from_f64(shown).map_or(serde_json::Value::Null, serde_json::Value::Number)
    }
}

fn settings_from(cfg: &ConfigArgs) -> Result<Vec<(String, toml::Value)>> {
    let mut out = cfg.settings.iter().map(|s| parse_setting(s)).collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cfg.seed {
        let seed = i64::try_from(seed).map_err(|_| Error::invalid("seed", "must be at most 2^63 - 1"))?;
        out.push(("seed".into(), toml::Value::Integer(seed)));
    }
    Ok(out)
}

fn parse_list<T: std::str::FromStr>(field: &'static str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse().map_err(|_| Error::invalid(field, format!("`{p}` is not valid")))
        })
        .collect()
}

fn float_list(field: &'static str, s: &str) -> Result<toml::Value> {
    Ok(toml::Value::Array(
        parse_list::<f64>(field, s)?.into_iter().map(toml::Value::Float).collect(),
    ))
}

fn int(field: &'static str, v: usize) -> Result<toml::Value> {
    i64::try_from(v)
        .map(toml::Value::Integer)
        .map_err(|_| Error::invalid(field, "too large"))
}

fn echo_config(err: &mut dyn Write, config: &impl Serialize) -> Result<()> {
    let text = config::render(config)?;
    writeln!(err, "# resolved config\n{}", text.trim_end()).map_err(|e| Error::io("<stderr>", e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn push_execution(settings: &mut Vec<(String, toml::Value)>, out: &OutputArgs) {
    if let Some(e) = &out.execution {
        settings.push(("execution".into(), toml::Value::String(e.clone())));
    }
}

/// Prints rows, writes the results file and returns the exit status for the
/// check outcome.
fn finish<R: Record>(
    rows: &[R],
    args: &OutputArgs,
    manifest: &Manifest,
    violations: Vec<String>,
    p: &Printer,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let format = OutputFormat::parse(&args.format)?;
    emit(out, &render_records(rows, format, |x| p.float(x)))?;
    if let Some(path) = &args.output {
        write_results(rows, path, format, manifest)?;
    }
    if !args.check {
        return Ok(0);
    }
    let io = |e| Error::io("<stderr>", e);
    if violations.is_empty() {
        writeln!(err, "check passed").map_err(io)?;
        return Ok(0);
    }
    for v in &violations {
        writeln!(err, "check failed: {v}").map_err(io)?;
    }
    Ok(EXIT_CHECK)
}

fn cmd_bound(a: &BoundArgs, p: &Printer, out: &mut dyn Write) -> Result<i32> {
    let variant = match a.variant {
        VariantArg::Main => BoundVariant::Main,
        VariantArg::Draft => BoundVariant::Draft,
    };
    let mut q = BoundQuery::new(a.epsilon, a.delta).with_variant(variant);
    if let Some(b) = a.utility_bound {
        q = q.with_utility_bound(b);
    }
    if let Some(s) = a.exp_sup {
        q = q.with_exp_sup_utility(s);
    }
    let (name, value) = match a.kind {
        BoundKind::Universal => ("universal", universal_bound(&q)?),
        BoundKind::Advantage => ("advantage", advantage_bound(&q)?),
        BoundKind::DpGeneralization => ("dp-generalization", dp_generalization_gap_bound(a.epsilon, a.delta)?),
        BoundKind::WeakThreat => ("weak-threat", weak_threat_bound(&q)?),
        BoundKind::Reconstruction => {
            let size = a
                .domain_size
                .ok_or_else(|| Error::invalid("domain-size", "required for the reconstruction bound"))?;
            ("reconstruction", reconstruction_bound(a.epsilon, a.delta, size)?)
        }
        BoundKind::Hoeffding => {
            let n = a.n.ok_or_else(|| Error::invalid("n", "required for the Hoeffding bound"))?;
            ("hoeffding", hoeffding_lower_bound(a.epsilon, n)?)
        }
    };
    let mut rec = serde_json::Map::new();
    rec.insert("kind".into(), name.into());
    rec.insert(
        "variant".into(),
        if variant == BoundVariant::Main { "main" } else { "draft" }.into(),
    );
    rec.insert("epsilon".into(), p.json(a.epsilon));
    rec.insert("delta".into(), p.json(a.delta));
    if let Some(b) = a.utility_bound {
        rec.insert("B".into(), p.json(b));
    }
    if let Some(s) = a.exp_sup {
        rec.insert("exp_sup".into(), p.json(s));
    }
    if let Some(z) = a.domain_size {
        rec.insert("domain_size".into(), p.json(z));
    }
    if let Some(n) = a.n {
        rec.insert("n".into(), n.into());
    }
    rec.insert("bound".into(), p.json(value));
    emit(out, &format!("{}\n", serde_json::Value::Object(rec)))?;
    Ok(0)
}

fn cmd_calibrate(a: &CalibrateArgs, p: &Printer, out: &mut dyn Write) -> Result<i32> {
    let mut rec = serde_json::Map::new();
    rec.insert("advantage".into(), p.json(a.advantage));
    rec.insert("delta".into(), p.json(a.delta));
    rec.insert("B".into(), p.json(a.utility_bound));
    match calibrate_epsilon(a.advantage, a.delta, a.utility_bound)? {
        Calibration::Epsilon(e) => {
            rec.insert("status".into(), "ok".into());
            rec.insert("epsilon".into(), p.json(e));
        }
        Calibration::Unbounded => {
            rec.insert("status".into(), "unbounded".into());
            rec.insert("epsilon".into(), p.json(f64::INFINITY));
        }
        Calibration::Infeasible { min_advantage } => {
            rec.insert("status".into(), "infeasible".into());
            rec.insert("min_advantage".into(), p.json(min_advantage));
        }
    }
    emit(out, &format!("{}\n", serde_json::Value::Object(rec)))?;
    Ok(0)
}

fn cmd_privatize(a: &PrivatizeArgs, p: &Printer, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut settings = settings_from(&a.cfg)?;
    if let Some(m) = &a.mechanism {
        settings.push(("mechanism".into(), MechanismKind::parse(m)?.name().into()));
    }
    if let Some(e) = a.epsilon {
        settings.push(("epsilon".into(), toml::Value::Float(e)));
    }
    if let Some(c) = &a.label_column {
        settings.push(("label_column".into(), c.clone().into()));
    }
    let cfg: PrivatizeConfig = config::resolve(&PrivatizeConfig::default(), a.cfg.config.as_deref(), &settings)?;
    echo_config(err, &cfg)?;

    let data = load_csv(&a.data, &cfg.label_column)?;
    let clustering = if cfg.mechanism == MechanismKind::Lp1stDomainPrior {
        Some(kmeans(data.features(), cfg.clusters, derive_seed(cfg.seed, "privatize-kmeans", 0))?)
    } else {
        None
    };
    let settings = MechanismSettings {
        hyper: &cfg.hyper,
        top_k: cfg.top_k,
        first_stage_fraction: cfg.first_stage_fraction,
        prior_smoothing: cfg.prior_smoothing,
        pate_teachers: cfg.pate_teachers,
        pate_queries: cfg.pate_queries.min(data.len()),
        clustering: clustering.as_ref(),
    };
    let report = release(cfg.mechanism, &data, cfg.epsilon, &settings, cfg.seed)?;

    let mut text = String::from("row,private_label\n");
    for (row, y) in &report.private_labels {
        text += &format!("{row},{y}\n");
    }
    std::fs::write(&a.output, text).map_err(|e| Error::io(&a.output, e))?;
    let mut run = toml::Table::new();
    run.insert("mechanism".into(), cfg.mechanism.name().into());
    run.insert("epsilon".into(), toml::Value::Float(report.spent.epsilon));
    run.insert("delta".into(), toml::Value::Float(report.spent.delta));
    run.insert("accounting".into(), report.spent.accounting.clone().into());
    let seed = i64::try_from(cfg.seed).map_err(|_| Error::invalid("seed", "must be at most 2^63 - 1"))?;
    run.insert("seed".into(), toml::Value::Integer(seed));
    run.insert("released".into(), int("released", report.private_labels.len())?);
    run.insert("data".into(), a.data.display().to_string().into());
    let mut manifest = toml::Table::new();
    manifest.insert("run".into(), toml::Value::Table(run));
    manifest.insert("config".into(), toml::Value::Table(config::to_table(&cfg)?));
    let sidecar = manifest_path(&a.output);
    let rendered = toml::to_string(&manifest).map_err(|e| Error::invalid("manifest", e.to_string()))?;
    std::fs::write(&sidecar, rendered).map_err(|e| Error::io(&sidecar, e))?;
    if let Some(path) = &a.model_out {
        save_model(&report.model, path)?;
    }

    let mut rec = serde_json::Map::new();
    rec.insert("mechanism".into(), cfg.mechanism.name().into());
    rec.insert("epsilon".into(), p.json(report.spent.epsilon));
    rec.insert("delta".into(), p.json(report.spent.delta));
    rec.insert("accounting".into(), report.spent.accounting.clone().into());
    rec.insert("released".into(), report.private_labels.len().into());
    rec.insert("output".into(), a.output.display().to_string().into());
    emit(out, &format!("{}\n", serde_json::Value::Object(rec)))?;
    Ok(0)
}

fn cmd_attack(a: &AttackArgs, p: &Printer, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let model = load_model(&a.model)?;
    let (features, labels) = load_features_csv(&a.data, &a.label_column)?;
    let spec = match a.utility {
        UtilityArg::ZeroOne => UtilitySpec::zero_one(),
        UtilityArg::Weighted => {
            let labels = labels
                .as_ref()
                .ok_or_else(|| Error::invalid("utility", "weighted utility needs the label column to estimate the marginal"))?;
            let mut marginal = vec![0.0; model.num_classes()];
            for &y in labels {
                *marginal
                    .get_mut(y)
                    .ok_or_else(|| Error::invalid("labels", format!("label {y} outside the model's {} classes", model.num_classes())))? +=
                    1.0;
            }
            marginal.iter_mut().for_each(|m| *m /= labels.len() as f64);
            UtilitySpec::weighted(marginal)?
        }
    };
    if features.ncols() + 1 != model_rows(&model) && model_rows(&model) != 0 {
        return Err(Error::invalid(
            "data",
            format!(
                "{} feature columns but the model expects {}",
                features.ncols(),
                model_rows(&model) - 1
            ),
        ));
    }
    let inferred = spa(&AdversaryKnowledge::new(features.view()).with_model(&model), &spec)?;
    let mut text = String::from(if labels.is_some() {
        "row,inferred,true_label\n"
    } else {
        "row,inferred\n"
    });
    for (i, g) in inferred.labels.iter().enumerate() {
        match &labels {
            Some(l) => text += &format!("{i},{g},{}\n", l[i]),
            None => text += &format!("{i},{g}\n"),
        }
    }
    match &a.output {
        Some(path) => std::fs::write(path, &text).map_err(|e| Error::io(path, e))?,
        None => emit(out, &text)?,
    }
    if let Some(l) = &labels {
        let eau = eau_empirical(&inferred, l, &spec)?;
        writeln!(err, "eau = {}", p.float(eau)).map_err(|e| Error::io("<stderr>", e))?;
    }
    Ok(0)
}

/// `d + 1` for a logistic model, 0 when the model has no fixed width.
fn model_rows(model: &crate::models::Model) -> usize {
    match model {
        crate::models::Model::Logistic(m) => m.weights().nrows(),
        _ => 0,
    }
}

fn cmd_simulate(a: &SimulateArgs, p: &Printer, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut settings = settings_from(&a.cfg)?;
    if let Some(t) = a.trials {
        settings.push(("trials".into(), int("trials", t)?));
    }
    if let Some(e) = &a.epsilons {
        settings.push(("epsilons".into(), float_list("epsilons", e)?));
    }
    if let Some(m) = &a.mechanism {
        settings.push(("mechanism".into(), MechanismKind::parse(m)?.name().into()));
    }
    push_execution(&mut settings, &a.out);
    let cfg = config::resolve(&config::simulation_preset(&a.preset)?, a.cfg.config.as_deref(), &settings)?;
    echo_config(err, &cfg)?;
    let reports = run_simulation(&cfg)?;
    let violations = if a.out.check { check_simulation(&reports) } else { Vec::new() };
    finish(&reports, &a.out, &Manifest::new("simulation", &cfg)?, violations, p, out, err)
}

fn cmd_thm1(a: &Thm1Args, p: &Printer, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut settings = settings_from(&a.cfg)?;
    if let Some(e) = a.epsilon {
        settings.push(("epsilon".into(), toml::Value::Float(e)));
    }
    if let Some(ns) = &a.ns {
        let ns = parse_list::<usize>("ns", ns)?
            .into_iter()
            .map(|n| int("ns", n))
            .collect::<Result<Vec<_>>>()?;
        settings.push(("ns".into(), toml::Value::Array(ns)));
    }
    if let Some(t) = a.trials {
        settings.push(("trials".into(), int("trials", t)?));
    }
    push_execution(&mut settings, &a.out);
    let cfg = config::resolve(&config::thm1_preset(&a.preset)?, a.cfg.config.as_deref(), &settings)?;
    echo_config(err, &cfg)?;
    let rows = run_thm1_demo(&cfg)?;
    let violations = if a.out.check { check_thm1(&rows) } else { Vec::new() };
    finish(&rows, &a.out, &Manifest::new("thm1", &cfg)?, violations, p, out, err)
}

fn cmd_ctr(a: &CtrArgs, p: &Printer, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut settings = settings_from(&a.cfg)?;
    if let Some(n) = a.n {
        settings.push(("n".into(), int("n", n)?));
    }
    if let Some(path) = &a.csv {
        settings.push(("source".into(), "csv".into()));
        settings.push(("csv_path".into(), path.display().to_string().into()));
    }
    if let Some(c) = &a.label_column {
        settings.push(("label_column".into(), c.clone().into()));
    }
    if let Some(ms) = &a.mechanisms {
        let names = ms
            .split(',')
            .map(|m| MechanismKind::parse(m.trim()).map(|k| toml::Value::from(k.name())))
            .collect::<Result<Vec<_>>>()?;
        settings.push(("mechanisms".into(), toml::Value::Array(names)));
    }
    if let Some(e) = &a.epsilons {
        settings.push(("epsilons".into(), float_list("epsilons", e)?));
    }
    push_execution(&mut settings, &a.out);
    let cfg = config::resolve(&config::ctr_preset(&a.preset)?, a.cfg.config.as_deref(), &settings)?;
    echo_config(err, &cfg)?;
    let reports = run_ctr(&cfg)?;
    let violations = if a.out.check { check_ctr(&reports) } else { Vec::new() };
    finish(&reports, &a.out, &Manifest::new("ctr", &cfg)?, violations, p, out, err)
}

fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let p = Printer { full: cli.full_precision };
    match &cli.command {
        Command::Bound(a) => cmd_bound(a, &p, out),
        Command::Calibrate(a) => cmd_calibrate(a, &p, out),
        Command::Privatize(a) => cmd_privatize(a, &p, out, err),
        Command::Attack(a) => cmd_attack(a, &p, out, err),
        Command::Simulate(a) => cmd_simulate(a, &p, out, err),
        Command::Thm1(a) => cmd_thm1(a, &p, out, err),
        Command::Ctr(a) => cmd_ctr(a, &p, out, err),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn dispatch<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match run(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

//! Experiment configuration: presets, merging, scaling and validation.
//!
//! A user document is merged over the preset for its `kind`, so any field
//! left out takes the preset value. Each `[[estimators]]` entry is merged
//! over [`ESTIMATOR_DEFAULTS`]. The merged table is then deserialized into
//! [`ExperimentConfig`] and checked field by field.

use std::fmt;
use std::str::FromStr;

use bootsl::likelihood::{EstimatorConfig, EstimatorKind, MuMode};
use bootsl::samplers::Prior;
use bootsl::stats::IidStatistic;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

const TOY: &str = include_str!("presets/toy.toml");
const LV: &str = include_str!("presets/lv.toml");
const ISING: &str = include_str!("presets/ising.toml");

const ESTIMATOR_DEFAULTS: &str = "r = 100\nmu = \"estimated\"\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Toy,
    Lv,
    Ising,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Toy,
    Lv,
    Ising,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Subcommand that produced a manifest; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    pub replicates: usize,
    pub data: DataConfig,
    pub prior: PriorConfig,
    pub estimators: Vec<EstimatorEntry>,
    pub mcmc: McmcConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smc: Option<SmcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<ExchangeSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub model: ModelKind,
    pub theta: Vec<f64>,
    /// Points for the toy, observations for predator-prey, sites for Ising.
    pub n: usize,
    /// Seed for the observed data; derived from the master seed if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorEntry {
    pub kind: String,
    pub m: usize,
    pub r: usize,
    pub mu: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    /// Block length for series, tile area for grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: usize,
    pub proposal_sd: Vec<f64>,
    pub burn_in: usize,
    /// Start of every chain; the toy defaults to its conjugate posterior
    /// mean and the other models to the true parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcSection {
    pub particles: usize,
    pub targets: usize,
    pub neighbours: usize,
    pub subsample: usize,
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSection {
    pub iterations: usize,
    pub proposal_sd: f64,
    pub theta0: f64,
}

/// One violated constraint, located by its dotted path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

fn field(path: impl Into<String>, reason: impl Into<String>) -> FieldError {
    FieldError { path: path.into(), reason: reason.into() }
}

fn preset_text(kind: &str) -> Option<&'static str> {
    match kind {
        "toy" => Some(TOY),
        "lv" => Some(LV),
        "ising" => Some(ISING),
        _ => None,
    }
}

/// The built-in configuration for a preset name.
pub fn preset(name: &str) -> Result<ExperimentConfig, Vec<FieldError>> {
    parse_config("", Some(name))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parse a config document, filling defaults from the preset named by its
/// `kind` (or by `preset` when the document has none).
pub fn parse_config(text: &str, preset: Option<&str>) -> Result<ExperimentConfig, Vec<FieldError>> {
    let user: Table = text.parse().map_err(|e: toml::de::Error| vec![field("<document>", e.message())])?;
    let kind = match (user.get("kind"), preset) {
        (Some(Value::String(k)), _) => k.clone(),
        (Some(_), _) => return Err(vec![field("kind", "must be a string")]),
        (None, Some(p)) => p.to_string(),
        (None, None) => return Err(vec![field("kind", "missing; expected toy, lv, ising or custom")]),
    };
    let mut base: Table = match kind.as_str() {
        "custom" => {
            let model = user
                .get("data")
                .and_then(|d| d.get("model"))
                .and_then(Value::as_str)
                .ok_or_else(|| vec![field("data.model", "custom experiments must name a model")])?;
            let text = preset_text(model)
                .ok_or_else(|| vec![field("data.model", format!("unknown model {model:?}"))])?;
            let mut t: Table = text.parse().expect("preset parses");
            for key in ["estimators", "prior"] {
                t.remove(key);
            }
            t
        }
        k => preset_text(k)
            .ok_or_else(|| vec![field("kind", format!("unknown kind {k:?}; expected toy, lv, ising or custom"))])?
            .parse()
            .expect("preset parses"),
    };
    base.insert("kind".into(), Value::String(kind));
    merge(&mut base, user);
    if let Some(Value::Array(entries)) = base.get_mut("estimators") {
        for entry in entries.iter_mut() {
            if let Value::Table(t) = entry {
                let mut full: Table = ESTIMATOR_DEFAULTS.parse().expect("defaults parse");
                merge(&mut full, std::mem::take(t));
                *t = full;
            }
        }
    }
    let config: ExperimentConfig =
        Value::Table(base).try_into().map_err(|e: toml::de::Error| vec![field("<document>", e.message())])?;
    Ok(config)
}

impl ExperimentConfig {
    /// Apply `--seed` and `--scale`. Scaling multiplies iteration counts,
    /// particle counts, and the toy data size together with its subsample
    /// sizes. Grid and series sizes are left alone because their block
    /// constraints are not preserved by scaling.
    pub fn apply_overrides(&mut self, seed: Option<u64>, scale: Option<f64>) -> Result<(), Vec<FieldError>> {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        let Some(f) = scale else { return Ok(()) };
        if !(f > 0.0 && f.is_finite()) {
            return Err(vec![field("--scale", format!("must be a positive number, got {f}"))]);
        }
        let scaled = |v: usize, min: usize| ((v as f64 * f).round() as usize).max(min);
        self.mcmc.iterations = scaled(self.mcmc.iterations, 1);
        if let Some(x) = &mut self.exchange {
            x.iterations = scaled(x.iterations, 1);
        }
        if let Some(s) = &mut self.smc {
            s.particles = scaled(s.particles, 2);
        }
        if self.data.model == ModelKind::Toy {
            self.data.n = scaled(self.data.n, 2);
            for e in &mut self.estimators {
                if let Some(n) = &mut e.subsample {
                    *n = scaled(*n, 2);
                }
            }
            if let Some(s) = &mut self.smc {
                s.subsample = scaled(s.subsample, 2);
            }
        }
        Ok(())
    }

    pub fn param_dim(&self) -> usize {
        match self.data.model {
            ModelKind::Lv => 3,
            ModelKind::Toy | ModelKind::Ising => 1,
        }
    }

    pub fn prior(&self) -> Result<Prior, FieldError> {
        let dim = self.param_dim();
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| field(format!("prior.{name}"), "missing"));
        let prior = match self.prior.kind.as_str() {
            "exponential" => Prior::Exponential { rate: need(self.prior.rate, "rate")?, dim },
            "log-uniform" => Prior::LogUniform { lo: need(self.prior.lo, "lo")?, hi: need(self.prior.hi, "hi")?, dim },
            "uniform" => Prior::Uniform { lo: need(self.prior.lo, "lo")?, hi: need(self.prior.hi, "hi")?, dim },
            other => {
                return Err(field("prior.kind", format!("unknown prior {other:?}; expected exponential, log-uniform or uniform")))
            }
        };
        prior.validate().map_err(|e| field("prior", e.to_string()))?;
        Ok(prior)
    }

    pub fn statistic(&self) -> IidStatistic {
        self.data.statistic.as_deref().and_then(|s| s.parse().ok()).unwrap_or(IidStatistic::Sd)
    }

    /// Library estimator configuration for entry `i`; call after validation.
    pub fn estimator_config(&self, i: usize) -> EstimatorConfig {
        let e = &self.estimators[i];
        let kind = EstimatorKind::from_str(&e.kind).expect("validated");
        let mut c = EstimatorConfig::new(kind, e.m).with_r(e.r).with_mu_mode(e.mu.parse().expect("validated"));
        c.epsilon = e.epsilon;
        c.subsample = e.subsample;
        c.block = e.block;
        c
    }

    /// A short label such as `e1-bsl` for file names.
    pub fn estimator_label(&self, i: usize) -> String {
        format!("e{i}-{}", self.estimators[i].kind)
    }

    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errs = Vec::new();
        if self.seed.is_none() {
            errs.push(field("seed", "missing; set it in the config or pass --seed"));
        }
        if self.replicates == 0 {
            errs.push(field("replicates", "must be at least 1"));
        }
        if let Some(model) = match self.kind {
            Kind::Toy => Some(ModelKind::Toy),
            Kind::Lv => Some(ModelKind::Lv),
            Kind::Ising => Some(ModelKind::Ising),
            Kind::Custom => None,
        } {
            if model != self.data.model {
                errs.push(field("data.model", format!("{:?} experiments use the {model:?} model", self.kind)));
            }
        }
        self.validate_data(&mut errs);
        let prior = match self.prior() {
            Ok(p) => Some(p),
            Err(e) => {
                errs.push(e);
                None
            }
        };
        for i in 0..self.estimators.len() {
            self.validate_estimator(i, &mut errs);
        }
        self.validate_mcmc(prior.as_ref(), &mut errs);
        if let Some(s) = &self.smc {
            self.validate_smc(s, &mut errs);
        }
        if let Some(x) = &self.exchange {
            if self.data.model != ModelKind::Ising {
                errs.push(field("exchange", "the exchange algorithm needs the ising model"));
            }
            if x.iterations == 0 {
                errs.push(field("exchange.iterations", "must be at least 1"));
            }
            if !(x.proposal_sd >= 0.0 && x.proposal_sd.is_finite()) {
                errs.push(field("exchange.proposal_sd", "must be finite and nonnegative"));
            }
            if let Some(p) = &prior {
                if p.log_density(&[x.theta0]) == f64::NEG_INFINITY {
                    errs.push(field("exchange.theta0", format!("{} lies outside the prior support", x.theta0)));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn validate_data(&self, errs: &mut Vec<FieldError>) {
        let d = &self.data;
        if d.theta.len() != self.param_dim() {
            errs.push(field("data.theta", format!("expected {} values, got {}", self.param_dim(), d.theta.len())));
        }
        if d.theta.iter().any(|t| !t.is_finite()) {
            errs.push(field("data.theta", "values must be finite"));
        }
        match d.model {
            ModelKind::Toy => {
                if d.n < 2 {
                    errs.push(field("data.n", format!("need at least 2 points, got {}", d.n)));
                }
                if d.theta.iter().any(|&t| t <= 0.0) {
                    errs.push(field("data.theta", "the precision must be positive"));
                }
                if let Some(s) = &d.statistic {
                    if IidStatistic::from_str(s).is_err() {
                        errs.push(field("data.statistic", format!("unknown statistic {s:?}; expected mean, variance or sd")));
                    }
                }
            }
            ModelKind::Lv => {
                if d.n < 4 {
                    errs.push(field("data.n", format!("need at least 4 observations, got {}", d.n)));
                }
                if d.theta.iter().any(|&t| t < 0.0) {
                    errs.push(field("data.theta", "rates must be nonnegative"));
                }
                for (name, v) in [("x0", d.x0), ("y0", d.y0)] {
                    if v.is_none() {
                        errs.push(field(format!("data.{name}"), "missing"));
                    }
                }
                if !d.delta.is_some_and(|v| v > 0.0 && v.is_finite()) {
                    errs.push(field("data.delta", "must be a positive record interval"));
                }
            }
            ModelKind::Ising => {
                let side = d.n.isqrt();
                if side * side != d.n || side < 3 {
                    errs.push(field("data.n", format!("must be a square number of sites with side >= 3, got {}", d.n)));
                }
                if d.sweeps.is_none_or(|s| s == 0) {
                    errs.push(field("data.sweeps", "must be at least 1"));
                }
            }
        }
    }

    fn validate_estimator(&self, i: usize, errs: &mut Vec<FieldError>) {
        let e = &self.estimators[i];
        let at = |name: &str| format!("estimators[{i}].{name}");
        let Ok(kind) = EstimatorKind::from_str(&e.kind) else {
            errs.push(field(at("kind"), format!("unknown estimator {:?}; expected sl, bsl, blbsl, abc or babc", e.kind)));
            return;
        };
        match kind {
            EstimatorKind::Sl if e.m < 2 => {
                errs.push(field(at("m"), format!("sl needs m >= 2 simulations to estimate a covariance, got {}", e.m)))
            }
            _ if e.m < 1 => errs.push(field(at("m"), "must be at least 1")),
            _ => {}
        }
        if kind.uses_plan() && e.r < 2 {
            errs.push(field(at("r"), format!("{} needs r >= 2 resamples, got {}", kind.name(), e.r)));
        }
        match (kind.is_abc(), e.epsilon) {
            (true, None) => errs.push(field(at("epsilon"), format!("{} needs a kernel bandwidth", kind.name()))),
            (true, Some(eps)) if !(eps > 0.0 && eps.is_finite()) => {
                errs.push(field(at("epsilon"), format!("must be positive, got {eps}")))
            }
            (false, Some(_)) => errs.push(field(at("epsilon"), format!("only abc estimators take epsilon, not {}", kind.name()))),
            _ => {}
        }
        let mu = match MuMode::from_str(&e.mu) {
            Ok(m) => Some(m),
            Err(_) => {
                errs.push(field(at("mu"), format!("unknown mean mode {:?}", e.mu)));
                None
            }
        };
        match mu {
            Some(MuMode::Oracle) if self.data.model != ModelKind::Toy => {
                errs.push(field(at("mu"), "the exact mean is only known for the toy model"))
            }
            Some(MuMode::Oracle) if kind.is_abc() => errs.push(field(at("mu"), "abc estimators do not use a mean")),
            Some(MuMode::Regression) => errs.push(field(at("mu"), "the regression mean is only available inside smc")),
            _ => {}
        }
        let big_n = self.data.n;
        match (kind, e.subsample) {
            (EstimatorKind::BlbSl, None) => errs.push(field(at("subsample"), "blbsl needs a subsample size")),
            (EstimatorKind::BlbSl, Some(n)) if n == 0 || n > big_n => {
                errs.push(field(at("subsample"), format!("must lie in 1..=data.n ({big_n}), got {n}")))
            }
            (k, Some(_)) if k != EstimatorKind::BlbSl => {
                errs.push(field(at("subsample"), format!("only blbsl takes a subsample, not {}", k.name())))
            }
            _ => {}
        }
        if kind.uses_plan() {
            let source = e.subsample.filter(|_| kind == EstimatorKind::BlbSl).unwrap_or(big_n);
            let source_field = if kind == EstimatorKind::BlbSl { at("subsample") } else { "data.n".to_string() };
            self.validate_blocks(e.block, source, &source_field, &at("block"), errs);
        } else if e.block.is_some() {
            errs.push(field(at("block"), format!("{} does not resample", kind.name())));
        }
        if self.data.model == ModelKind::Toy && e.block.is_some() {
            if self.statistic() != IidStatistic::Mean {
                errs.push(field(at("block"), "block resampling of the toy supports only the mean statistic"));
            }
            if kind != EstimatorKind::Bsl && kind != EstimatorKind::Babc {
                errs.push(field(at("block"), "block resampling of the toy is supported for bsl and babc"));
            }
        }
    }

    /// Block constraints shared by estimators and smc: a block length must
    /// divide both the source length and the target length; a tile area must
    /// be square with a side dividing the grid side and fitting the source.
    fn validate_blocks(&self, block: Option<usize>, source: usize, source_field: &str, block_field: &str, errs: &mut Vec<FieldError>) {
        let big_n = self.data.n;
        match (self.data.model, block) {
            (ModelKind::Toy, None) => {}
            (ModelKind::Toy, Some(b)) | (ModelKind::Lv, Some(b)) => {
                if b == 0 || source % b != 0 {
                    errs.push(field(block_field, format!("block length {b} does not divide {source_field}={source}")));
                } else if big_n % b != 0 {
                    errs.push(field(block_field, format!("block length {b} does not divide data.n={big_n}")));
                }
            }
            (ModelKind::Lv | ModelKind::Ising, None) => {
                errs.push(field(block_field, "dependent data needs a block size"))
            }
            (ModelKind::Ising, Some(b)) => {
                let tile = b.isqrt();
                let (side, source_side) = (big_n.isqrt(), source.isqrt());
                if tile * tile != b || tile == 0 {
                    errs.push(field(block_field, format!("tile area {b} is not a square")));
                } else if source_side * source_side != source {
                    errs.push(field(source_field, format!("{source} sites is not a square grid")));
                } else if side % tile != 0 {
                    errs.push(field(block_field, format!("tile side {tile} does not divide the grid side {side} of data.n={big_n}")));
                } else if tile > source_side {
                    errs.push(field(block_field, format!("tile side {tile} exceeds the side {source_side} of {source_field}={source}")));
                }
            }
        }
    }

    fn validate_mcmc(&self, prior: Option<&Prior>, errs: &mut Vec<FieldError>) {
        let m = &self.mcmc;
        let dim = self.param_dim();
        if m.iterations == 0 {
            errs.push(field("mcmc.iterations", "must be at least 1"));
        }
        if m.burn_in >= m.iterations.max(1) {
            errs.push(field("mcmc.burn_in", format!("must be below mcmc.iterations={}", m.iterations)));
        }
        if m.proposal_sd.len() != dim {
            errs.push(field("mcmc.proposal_sd", format!("expected {dim} values, got {}", m.proposal_sd.len())));
        }
        if m.proposal_sd.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            errs.push(field("mcmc.proposal_sd", "values must be finite and nonnegative"));
        }
        if let Some(t0) = &m.theta0 {
            if t0.len() != dim {
                errs.push(field("mcmc.theta0", format!("expected {dim} values, got {}", t0.len())));
            } else if prior.is_some_and(|p| p.log_density(t0) == f64::NEG_INFINITY) {
                errs.push(field("mcmc.theta0", "lies outside the prior support"));
            }
        } else if self.data.model != ModelKind::Toy && self.data.theta.len() == dim {
            if prior.is_some_and(|p| p.log_density(&self.data.theta) == f64::NEG_INFINITY) {
                errs.push(field("data.theta", "chains start at the true parameter, which lies outside the prior support"));
            }
        }
    }

    fn validate_smc(&self, s: &SmcSection, errs: &mut Vec<FieldError>) {
        if s.particles < 2 {
            errs.push(field("smc.particles", format!("need at least 2 particles, got {}", s.particles)));
        }
        if s.targets == 0 {
            errs.push(field("smc.targets", "need at least one target"));
        }
        if s.neighbours == 0 {
            errs.push(field("smc.neighbours", "must be at least 1"));
        }
        if s.r < 2 {
            errs.push(field("smc.r", format!("need r >= 2 resamples, got {}", s.r)));
        }
        if s.subsample == 0 || s.subsample > self.data.n {
            errs.push(field("smc.subsample", format!("must lie in 1..=data.n ({}), got {}", self.data.n, s.subsample)));
            return;
        }
        if self.data.model == ModelKind::Toy && s.block.is_some() {
            errs.push(field("smc.block", "the toy model resamples points, not blocks"));
            return;
        }
        self.validate_blocks(s.block, s.subsample, "smc.subsample", "smc.block", errs);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

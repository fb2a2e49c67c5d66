//! Subcommand implementations. Every command writes `manifest.toml` first and
//! then its numeric outputs as CSV tables under the output directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bootsl::diagnostics::{iat, kde_table, mcse_mean, replicate_metrics, weighted_mean_sd, ReplicateReport};
use bootsl::likelihood::{Estimator, EstimatorKind, MuMode};
use bootsl::models::{GaussianToy, IsingModel, LotkaVolterra, Model};
use bootsl::resampling::{
    make_blb_point_counts, make_block_plan, make_block_set, make_iid_plan, make_spatial_block_set, ResamplePlan,
};
use bootsl::rng::{derive_seed, stream, SimRng};
use bootsl::samplers::{exchange_chain, make_schedule, mh_chain, smc_blbsl, Chain, Prior, SmcConfig};
use bootsl::simulators::{ising_gibbs, IsingInit, IsingState, LvPath};
use bootsl::stats::{IidStatistic, SummaryVector};
use bootsl::table::Table;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ModelKind};
use crate::CliError;

/// Observed data and the model that generated it.
pub enum Observed {
    Toy { model: GaussianToy, y: Vec<f64> },
    Lv { model: LotkaVolterra, path: LvPath, raw: SummaryVector },
    Ising { model: IsingModel, state: IsingState },
}

/// Everything a command needs: the validated config, observed data and
/// derived quantities.
pub struct Context {
    pub config: ExperimentConfig,
    pub master: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub observed: Observed,
    pub s_obs: SummaryVector,
    pub prior: Prior,
    /// Conjugate posterior `(mean, sd)` of the toy under an exponential prior.
    pub conjugate: Option<(f64, f64)>,
}

macro_rules! with_model {
    ($ctx:expr, |$m:ident| $body:expr) => {
        match &$ctx.observed {
            Observed::Toy { model: $m, .. } => $body,
            Observed::Lv { model: $m, .. } => $body,
            Observed::Ising { model: $m, .. } => $body,
        }
    };
}

impl Context {
    pub fn new(config: ExperimentConfig, out: PathBuf, jobs: usize) -> Result<Self, CliError> {
        config.validate().map_err(CliError::Config)?;
        let master = config.seed.expect("validated");
        let prior = config.prior().map_err(|e| CliError::Config(vec![e]))?;
        let d = &config.data;
        let data_seed = d.seed.unwrap_or_else(|| derive_seed(master, "data", 0));
        let rng = &mut stream(data_seed, "data", 0);
        let mut conjugate = None;
        let (observed, s_obs) = match d.model {
            ModelKind::Toy => {
                let model = GaussianToy { n: d.n, statistic: config.statistic() };
                let y = model.simulate(&d.theta, d.n, rng)?;
                if let Prior::Exponential { rate, .. } = prior {
                    let shape = 1.0 + d.n as f64 / 2.0;
                    let post_rate = rate + y.iter().map(|v| v * v).sum::<f64>() / 2.0;
                    conjugate = Some((shape / post_rate, shape.sqrt() / post_rate));
                }
                let s = model.summarize(&y)?;
                (Observed::Toy { model, y }, s)
            }
            ModelKind::Lv => {
                let base = LotkaVolterra::new(d.x0.expect("validated"), d.y0.expect("validated"), d.delta.expect("validated"), d.n);
                let path = base.simulate(&d.theta, d.n, rng)?;
                let raw = base.summarize(&path)?;
                let model = base.with_scaling(raw.clone());
                let s = model.summarize(&path)?;
                (Observed::Lv { model, path, raw }, s)
            }
            ModelKind::Ising => {
                let side = d.n.isqrt();
                let model = IsingModel { side, sweeps: d.sweeps.expect("validated") };
                let state = ising_gibbs(d.theta[0], side, model.sweeps, rng, IsingInit::Random)?;
                let s = model.summarize(&state)?;
                (Observed::Ising { model, state }, s)
            }
        };
        std::fs::create_dir_all(&out)?;
        Ok(Self { config, master, out, jobs: jobs.max(1), observed, s_obs, prior, conjugate })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, table: &Table) -> Result<(), CliError> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        table.write_csv(&path)?;
        Ok(())
    }

    pub fn write_manifest(&self, command: &str) -> Result<(), CliError> {
        let mut c = self.config.clone();
        c.command = Some(command.to_string());
        std::fs::write(self.path("manifest.toml"), c.to_toml())?;
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Runtime(bootsl::Error::InvalidConfig(e.to_string())))
    }

    fn theta0(&self) -> Vec<f64> {
        match (&self.config.mcmc.theta0, self.conjugate) {
            (Some(t), _) => t.clone(),
            (None, Some((mean, _))) => vec![mean],
            (None, None) => self.config.data.theta.clone(),
        }
    }

    fn param_names(&self) -> Vec<String> {
        (0..self.config.param_dim()).map(|j| format!("theta{j}")).collect()
    }

    /// Resampling plan for a plan-based estimator or smc.
    fn plan(&self, kind: EstimatorKind, subsample: Option<usize>, block: Option<usize>, r: usize, rng: &mut SimRng, seed: u64) -> bootsl::Result<ResamplePlan> {
        let big_n = self.config.data.n;
        let source = if kind == EstimatorKind::BlbSl { subsample.expect("validated") } else { big_n };
        match (&self.observed, block) {
            (Observed::Toy { .. }, None) if kind == EstimatorKind::BlbSl => {
                Ok(ResamplePlan::Counts(make_blb_point_counts(source, big_n, r, rng, seed)?))
            }
            (Observed::Toy { .. }, None) => Ok(ResamplePlan::Iid(make_iid_plan(big_n, r, rng, seed)?)),
            (Observed::Toy { .. } | Observed::Lv { .. }, Some(b)) => {
                Ok(ResamplePlan::Blocks(make_block_plan(make_block_set(source, b)?, big_n, r, rng, seed)?))
            }
            (Observed::Ising { model, .. }, Some(b)) => {
                let blocks = make_spatial_block_set(source.isqrt(), b.isqrt(), model.side)?;
                Ok(ResamplePlan::Blocks(make_block_plan(blocks, model.side, r, rng, seed)?))
            }
            (_, None) => Err(bootsl::Error::InvalidConfig("dependent data needs a block size".into())),
        }
    }

    fn estimator(&self, i: usize) -> Result<Estimator, CliError> {
        let c = self.config.estimator_config(i);
        let plan = if c.kind.uses_plan() {
            let seed = derive_seed(self.master, "plan", i as u64);
            Some(Arc::new(self.plan(c.kind, c.subsample, c.block, c.r, &mut stream(self.master, "plan", i as u64), seed)?))
        } else {
            None
        };
        Ok(Estimator::new(c, self.s_obs.clone(), plan)?)
    }

    /// Exact mean of the toy statistic at `theta`.
    fn oracle(&self, theta: &[f64]) -> Option<SummaryVector> {
        let Observed::Toy { model, .. } = &self.observed else { return None };
        let tau = theta[0];
        let v = match model.statistic {
            IidStatistic::Mean => 0.0,
            IidStatistic::Variance => 1.0 / tau,
            IidStatistic::Sd => GaussianToy::expected_sd(tau, model.n),
        };
        SummaryVector::scalar(v).ok()
    }

    fn loglik(&self, est: &Estimator, theta: &[f64], rng: &mut SimRng) -> bootsl::Result<f64> {
        let oracle = if est.config.mu_mode == MuMode::Oracle { self.oracle(theta) } else { None };
        with_model!(self, |m| est.loglik(m, theta, oracle.as_ref(), rng))
    }

    fn chain(&self, est: &Estimator, rng: &mut SimRng) -> bootsl::Result<Chain> {
        let m = &self.config.mcmc;
        let chain = mh_chain(
            &self.theta0(),
            &m.proposal_sd,
            m.iterations,
            |theta, r| self.loglik(est, theta, r),
            |theta| self.prior.log_density(theta),
            rng,
        )?;
        Ok(chain.discard(m.burn_in))
    }

    fn write_kdes(&self, prefix: &str, columns: &[Vec<f64>], weights: Option<&[f64]>) -> Result<(), CliError> {
        for (j, xs) in columns.iter().enumerate() {
            let name = format!("theta{j}");
            match kde_table(&name, xs, weights) {
                Ok(t) => self.write(&format!("{prefix}-{name}.csv"), &t)?,
                Err(e) => eprintln!("warning: no density for {prefix} {name}: {e}"),
            }
        }
        Ok(())
    }
}

fn iat_or_nan(xs: &[f64]) -> f64 {
    match iat(xs) {
        Ok(v) => v,
        Err(bootsl::Error::InfiniteIat) => f64::INFINITY,
        Err(_) => f64::NAN,
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("simulate")?;
    let data = match &ctx.observed {
        Observed::Toy { y, .. } => {
            let mut t = Table::new(&["y"]);
            y.iter().for_each(|v| t.push(vec![*v]));
            t
        }
        Observed::Lv { path, model, .. } => {
            let mut t = Table::new(&["time", "predators", "prey", "diverged"]);
            for i in 0..path.x.len() {
                t.push(vec![i as f64 * model.delta, path.x[i], path.y[i], f64::from(u8::from(path.diverged))]);
            }
            t
        }
        Observed::Ising { state, .. } => {
            let mut t = Table::new(&["row", "col", "spin"]);
            for r in 0..state.side() {
                for c in 0..state.side() {
                    t.push(vec![r as f64, c as f64, f64::from(state.get(r, c))]);
                }
            }
            t
        }
    };
    ctx.write("data.csv", &data)?;
    let mut summary = Table::new(&["index", "raw", "scaled"]);
    let raw = match &ctx.observed {
        Observed::Lv { raw, .. } => raw.clone(),
        _ => ctx.s_obs.clone(),
    };
    for i in 0..ctx.s_obs.dim() {
        summary.push(vec![i as f64, raw[i], ctx.s_obs[i]]);
    }
    ctx.write("summary.csv", &summary)
}

/// Repeated likelihood estimates at one parameter value, for variance studies.
pub fn estimate(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("estimate")?;
    let theta = ctx.theta0();
    let reps = ctx.config.replicates;
    let mut all = Table::new(&["estimator", "replicate", "loglik"]);
    let mut summary = Table::new(&["estimator", "mean", "variance", "failures"]);
    let pool = ctx.pool()?;
    for i in 0..ctx.config.estimators.len() {
        let est = ctx.estimator(i)?;
        let values: Vec<f64> = pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|k| {
                    let rng = &mut stream(ctx.master, "estimate", ((i as u64) << 32) | k as u64);
                    match ctx.loglik(&est, &theta, rng) {
                        Ok(v) => Ok(v),
                        Err(e) if e.is_estimate_failure() => Ok(f64::NEG_INFINITY),
                        Err(e) => Err(e),
                    }
                })
                .collect::<bootsl::Result<Vec<_>>>()
        })?;
        for (k, v) in values.iter().enumerate() {
            all.push(vec![i as f64, k as f64, *v]);
        }
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let (mean, sd) = weighted_mean_sd(&finite, None);
        let n = finite.len() as f64;
        let variance = if finite.len() > 1 { sd * sd * n / (n - 1.0) } else { f64::NAN };
        summary.push(vec![i as f64, mean, variance, (values.len() - finite.len()) as f64]);
    }
    ctx.write("estimates.csv", &all)?;
    ctx.write("estimate_summary.csv", &summary)
}

pub fn mcmc(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("mcmc")?;
    run_mcmc(ctx)
}

fn run_mcmc(ctx: &Context) -> Result<(), CliError> {
    let names = ctx.param_names();
    let estimators = (0..ctx.config.estimators.len()).map(|i| ctx.estimator(i)).collect::<Result<Vec<_>, _>>()?;
    let chains: Vec<Chain> = ctx.pool()?.install(|| {
        estimators
            .par_iter()
            .enumerate()
            .map(|(i, est)| ctx.chain(est, &mut stream(ctx.master, "mcmc", i as u64)))
            .collect::<bootsl::Result<Vec<_>>>()
    })?;
    let mut metrics = Table::new(&["estimator", "parameter", "mean", "sd", "iat", "mcse", "acceptance", "failures"]);
    for (i, chain) in chains.iter().enumerate() {
        let label = ctx.config.estimator_label(i);
        ctx.write(&format!("chain-{label}.csv"), &chain.to_table(&names))?;
        let columns: Vec<Vec<f64>> = (0..chain.dim).map(|j| chain.coordinate(j)).collect();
        for (j, xs) in columns.iter().enumerate() {
            let (mean, sd) = weighted_mean_sd(xs, None);
            let mcse = mcse_mean(xs).unwrap_or(f64::NAN);
            metrics.push(vec![
                i as f64,
                j as f64,
                mean,
                sd,
                iat_or_nan(xs),
                mcse,
                chain.acceptance_rate(),
                chain.failures as f64,
            ]);
        }
        ctx.write_kdes(&format!("kde-{label}"), &columns, None)?;
    }
    ctx.write("mcmc_metrics.csv", &metrics)
}

/// Independent replicate chains per estimator and their bias, sd and RMSE
/// against the conjugate posterior (toy) or the true parameter.
pub fn replicate(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("replicate")?;
    run_replicate(ctx)
}

fn run_replicate(ctx: &Context) -> Result<(), CliError> {
    let names = ctx.param_names();
    let reps = ctx.config.replicates;
    let pool = ctx.pool()?;
    let mut metrics = Table::new(&[
        &["estimator", "parameter", "quantity", "reference"][..],
        &ReplicateReport::COLUMNS[..],
    ]
    .concat());
    let mut iats = Table::new(&["estimator", "replicate", "parameter", "iat", "acceptance"]);
    for i in 0..ctx.config.estimators.len() {
        let est = ctx.estimator(i)?;
        let label = ctx.config.estimator_label(i);
        let chains: Vec<Chain> = pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|k| ctx.chain(&est, &mut stream(ctx.master, "replicate", ((i as u64) << 32) | k as u64)))
                .collect::<bootsl::Result<Vec<_>>>()
        })?;
        let mut means = vec![Vec::new(); names.len()];
        let mut sds = vec![Vec::new(); names.len()];
        for (k, chain) in chains.iter().enumerate() {
            ctx.write(&format!("replicates/chain-{label}-r{k}.csv"), &chain.to_table(&names))?;
            for j in 0..chain.dim {
                let xs = chain.coordinate(j);
                let (m, s) = weighted_mean_sd(&xs, None);
                means[j].push(m);
                sds[j].push(s);
                iats.push(vec![i as f64, k as f64, j as f64, iat_or_nan(&xs), chain.acceptance_rate()]);
            }
        }
        if reps < 2 {
            continue;
        }
        for j in 0..names.len() {
            let (mean_ref, sd_ref) = match ctx.conjugate {
                Some((m, s)) => (m, Some(s)),
                None => (ctx.config.data.theta[j], None),
            };
            let r = replicate_metrics(&means[j], mean_ref)?;
            metrics.push([vec![i as f64, j as f64, 0.0, mean_ref], r.row()].concat());
            if let Some(sd_ref) = sd_ref {
                let r = replicate_metrics(&sds[j], sd_ref)?;
                metrics.push([vec![i as f64, j as f64, 1.0, sd_ref], r.row()].concat());
            }
        }
    }
    ctx.write("replicate_metrics.csv", &metrics)?;
    ctx.write("replicate_iat.csv", &iats)
}

pub fn smc(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("smc")?;
    run_smc(ctx)
}

fn run_smc(ctx: &Context) -> Result<(), CliError> {
    let s = ctx.config.smc.as_ref().ok_or_else(|| missing_section("smc"))?;
    let seed = derive_seed(ctx.master, "smc-plan", 0);
    let plan = ctx.plan(EstimatorKind::BlbSl, Some(s.subsample), s.block, s.r, &mut stream(ctx.master, "smc-plan", 0), seed)?;
    let config = SmcConfig {
        particles: s.particles,
        schedule: make_schedule(s.targets)?,
        neighbours: s.neighbours,
        subsample: s.subsample,
        m: 1,
    };
    let rng = &mut stream(ctx.master, "smc", 0);
    let run = with_model!(ctx, |m| smc_blbsl(m, &ctx.s_obs, &ctx.prior, &config, &plan, rng))?;
    let names = ctx.param_names();
    let mut trace = Table::new(&[&["target", "nu", "ess"][..], &names.iter().map(String::as_str).collect::<Vec<_>>()[..]].concat());
    for cloud in &run.clouds {
        ctx.write(&format!("smc/cloud-t{}.csv", cloud.generation), &cloud.to_table(&names))?;
        let mut row = vec![cloud.generation as f64, cloud.nu, cloud.ess()];
        row.extend((0..names.len()).map(|j| weighted_mean_sd(&cloud.coordinate(j), Some(&cloud.weights)).0));
        trace.push(row);
    }
    ctx.write("smc_trace.csv", &trace)?;
    run.store.dump(&ctx.path("store.csv"))?;
    let last = run.last();
    let columns: Vec<Vec<f64>> = (0..names.len()).map(|j| last.coordinate(j)).collect();
    let mut metrics = Table::new(&["parameter", "mean", "sd", "ess", "fallbacks", "failures"]);
    for (j, xs) in columns.iter().enumerate() {
        let (mean, sd) = weighted_mean_sd(xs, Some(&last.weights));
        metrics.push(vec![j as f64, mean, sd, last.ess(), run.fallbacks as f64, run.failures as f64]);
    }
    ctx.write("smc_metrics.csv", &metrics)?;
    ctx.write_kdes("kde-smc", &columns, Some(&last.weights))
}

pub fn exchange(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("exchange")?;
    run_exchange(ctx)
}

fn run_exchange(ctx: &Context) -> Result<(), CliError> {
    let x = ctx.config.exchange.as_ref().ok_or_else(|| missing_section("exchange"))?;
    let Observed::Ising { model, state } = &ctx.observed else {
        return Err(CliError::Config(vec![crate::config::FieldError {
            path: "data.model".into(),
            reason: "the exchange algorithm needs the ising model".into(),
        }]));
    };
    let rng = &mut stream(ctx.master, "exchange", 0);
    let chain = exchange_chain(x.theta0, x.proposal_sd, x.iterations, state, model.sweeps, &ctx.prior, rng)?;
    ctx.write("exchange_chain.csv", &chain.to_table(&ctx.param_names()))?;
    let xs = chain.coordinate(0);
    let (mean, sd) = weighted_mean_sd(&xs, None);
    let mut metrics = Table::new(&["parameter", "mean", "sd", "iat", "mcse", "acceptance"]);
    metrics.push(vec![0.0, mean, sd, iat_or_nan(&xs), mcse_mean(&xs).unwrap_or(f64::NAN), chain.acceptance_rate()]);
    ctx.write("exchange_metrics.csv", &metrics)?;
    ctx.write_kdes("kde-exchange", &[xs], None)
}

/// The preset protocol for the configured experiment kind.
pub fn experiment(ctx: &Context) -> Result<(), CliError> {
    ctx.write_manifest("experiment")?;
    match ctx.config.data.model {
        ModelKind::Toy => run_replicate(ctx),
        ModelKind::Lv => run_mcmc(ctx),
        ModelKind::Ising => {
            run_exchange(ctx)?;
            run_smc(ctx)?;
            if !ctx.config.estimators.is_empty() {
                run_mcmc(ctx)?;
            }
            Ok(())
        }
    }
}

fn missing_section(name: &str) -> CliError {
    CliError::Config(vec![crate::config::FieldError { path: name.into(), reason: "section missing".into() }])
}

/// Directory listing used by the determinism checks: relative path and bytes
/// of every file under `dir`, sorted by path.
pub fn snapshot(dir: &Path) -> std::io::Result<Vec<(PathBuf, Vec<u8>)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) -> std::io::Result<()> {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.push((path.strip_prefix(root).expect("under root").to_path_buf(), std::fs::read(&path)?));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

//! Approximate log-likelihood estimators.
//!
//! Each estimate draws one key from the caller's generator and gives
//! simulation `m` its own stream under that key, so an estimate is a pure
//! function of `(theta, key, plan, config)`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::models::{Model, MuScaling};
use crate::resampling::ResamplePlan;
use crate::rng::{stream, SimRng};
use crate::stats::{gaussian_log_density, sample_covariance, sample_mean, SummaryVector, SyntheticGaussian};
use crate::sum::{exact_sum, ExactSum};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Sl,
    Bsl,
    BlbSl,
    Abc,
    Babc,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sl => "sl",
            Self::Bsl => "bsl",
            Self::BlbSl => "blbsl",
            Self::Abc => "abc",
            Self::Babc => "babc",
        }
    }

    pub fn is_abc(self) -> bool {
        matches!(self, Self::Abc | Self::Babc)
    }

    pub fn uses_plan(self) -> bool {
        matches!(self, Self::Bsl | Self::BlbSl | Self::Babc)
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sl" => Ok(Self::Sl),
            "bsl" => Ok(Self::Bsl),
            "blbsl" => Ok(Self::BlbSl),
            "abc" => Ok(Self::Abc),
            "babc" => Ok(Self::Babc),
            other => Err(Error::InvalidConfig(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Where the Gaussian mean comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MuMode {
    /// Average of the simulated statistics.
    Estimated,
    /// A caller-supplied exact value.
    Oracle,
    /// Local linear regression over previous raw estimates.
    Regression,
    /// Raw estimate from size-`n` simulations, rescaled if extensive.
    RescaledRaw,
}

impl std::str::FromStr for MuMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimated" => Ok(Self::Estimated),
            "oracle" => Ok(Self::Oracle),
            "regression" => Ok(Self::Regression),
            "rescaled-raw" => Ok(Self::RescaledRaw),
            other => Err(Error::InvalidConfig(format!("unknown mu mode `{other}`"))),
        }
    }
}

impl MuMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Estimated => "estimated",
            Self::Oracle => "oracle",
            Self::Regression => "regression",
            Self::RescaledRaw => "rescaled-raw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Simulations per parameter value.
    pub m: usize,
    /// Resamples per simulation.
    pub r: usize,
    pub epsilon: Option<f64>,
    /// BLB subsample size.
    pub subsample: Option<usize>,
    /// Block length or tile area.
    pub block: Option<usize>,
    pub mu_mode: MuMode,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, m: usize) -> Self {
        Self { kind, m, r: 100, epsilon: None, subsample: None, block: None, mu_mode: MuMode::Estimated }
    }

    pub fn with_r(mut self, r: usize) -> Self {
        self.r = r;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_subsample(mut self, n: usize) -> Self {
        self.subsample = Some(n);
        self
    }

    pub fn with_mu_mode(mut self, mode: MuMode) -> Self {
        self.mu_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self.kind {
            EstimatorKind::Sl if self.m < 2 => return bad(format!("sl needs m >= 2, got {}", self.m)),
            EstimatorKind::Bsl | EstimatorKind::BlbSl if self.m < 1 || self.r < 2 => {
                return bad(format!("{} needs m >= 1 and r >= 2", self.kind.name()))
            }
            EstimatorKind::Abc | EstimatorKind::Babc if self.m < 1 => return bad("abc needs m >= 1".into()),
            EstimatorKind::Babc if self.r < 1 => return bad("babc needs r >= 1".into()),
            _ => {}
        }
        match (self.kind.is_abc(), self.epsilon) {
            (true, Some(e)) if e > 0.0 && e.is_finite() => {}
            (true, _) => return bad("abc estimators need epsilon > 0".into()),
            (false, Some(_)) => return bad("epsilon is only meaningful for abc estimators".into()),
            (false, None) => {}
        }
        if self.kind == EstimatorKind::BlbSl && self.subsample.is_none() {
            return bad("blbsl needs a subsample size".into());
        }
        Ok(())
    }
}

/// The Gaussian mean to use in a synthetic likelihood.
#[derive(Debug, Clone, Copy)]
pub enum MuSource<'a> {
    Estimated,
    Given(&'a SummaryVector),
}

/// `log(mean(exp(values)))`, stable and order independent.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let terms: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    max + exact_sum(&terms).ln() - (values.len() as f64).ln()
}

fn simulation_streams(rng: &mut SimRng) -> impl Fn(usize) -> SimRng {
    let key: u64 = rng.random();
    move |m| stream(key, "simulation", m as u64)
}

fn simulate_statistics<M: Model>(
    model: &M,
    theta: &[f64],
    size: usize,
    count: usize,
    rng: &mut SimRng,
) -> Result<Vec<SummaryVector>> {
    let streams = simulation_streams(rng);
    (0..count).map(|m| model.summarize(&model.simulate(theta, size, &mut streams(m))?)).collect()
}

fn log_density(s_obs: &SummaryVector, mean: &SummaryVector, cov: DMatrix<f64>) -> Result<f64> {
    gaussian_log_density(s_obs, &SyntheticGaussian::new(mean, cov)?)
}

fn resolve_mu(mu: MuSource<'_>, stats: &[SummaryVector]) -> Result<SummaryVector> {
    match mu {
        MuSource::Estimated => sample_mean(stats),
        MuSource::Given(v) => Ok(v.clone()),
    }
}

/// Standard synthetic likelihood from `m` full-size simulations.
pub fn sl_loglik<M: Model>(
    model: &M,
    theta: &[f64],
    s_obs: &SummaryVector,
    m: usize,
    mu: MuSource<'_>,
    rng: &mut SimRng,
) -> Result<f64> {
    if m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: m });
    }
    let stats = simulate_statistics(model, theta, model.full_size(), m, rng)?;
    let cov = sample_covariance(&stats)?;
    log_density(s_obs, &resolve_mu(mu, &stats)?, cov)
}

/// Elementwise average of matrices.
fn average_matrices(mats: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let first = mats.first().ok_or(Error::EmptyInput)?;
    let (r, c) = first.shape();
    let mut out = DMatrix::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            let mut acc = ExactSum::new();
            for m in mats {
                acc.add(m[(i, j)]);
            }
            out[(i, j)] = acc.value() / mats.len() as f64;
        }
    }
    Ok(out)
}

/// Statistics of `m` size-`size` simulations and the average over them of
/// the sample covariance of their resample statistics.
pub struct BootstrapPass {
    pub stats: Vec<SummaryVector>,
    pub sigma: DMatrix<f64>,
}

pub fn bootstrap_pass<M: Model>(
    model: &M,
    theta: &[f64],
    size: usize,
    m: usize,
    plan: &ResamplePlan,
    rng: &mut SimRng,
) -> Result<BootstrapPass> {
    if m < 1 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if plan.rows() < 2 {
        return Err(Error::InsufficientResamples { needed: 2, got: plan.rows() });
    }
    let streams = simulation_streams(rng);
    let mut stats = Vec::with_capacity(m);
    let mut covs = Vec::with_capacity(m);
    for i in 0..m {
        let data = model.simulate(theta, size, &mut streams(i))?;
        stats.push(model.summarize(&data)?);
        covs.push(sample_covariance(&model.resample_statistics(&data, plan)?)?);
    }
    Ok(BootstrapPass { stats, sigma: average_matrices(&covs)? })
}

/// Bootstrap covariance estimate from `m` full-size simulations.
pub fn bsl_sigma<M: Model>(
    model: &M,
    theta: &[f64],
    m: usize,
    plan: &ResamplePlan,
    rng: &mut SimRng,
) -> Result<DMatrix<f64>> {
    Ok(bootstrap_pass(model, theta, model.full_size(), m, plan, rng)?.sigma)
}

/// Synthetic likelihood with the bootstrap covariance.
pub fn bsl_loglik<M: Model>(
    model: &M,
    theta: &[f64],
    s_obs: &SummaryVector,
    m: usize,
    plan: &ResamplePlan,
    mu: MuSource<'_>,
    rng: &mut SimRng,
) -> Result<f64> {
    let pass = bootstrap_pass(model, theta, model.full_size(), m, plan, rng)?;
    log_density(s_obs, &resolve_mu(mu, &pass.stats)?, pass.sigma)
}

/// Bag-of-little-bootstraps covariance from `m` size-`n` simulations whose
/// size-`N` resamples are described by `plan`. Also returns the raw size-`n`
/// statistics.
pub fn blbsl_sigma<M: Model>(
    model: &M,
    theta: &[f64],
    n: usize,
    m: usize,
    plan: &ResamplePlan,
    rng: &mut SimRng,
) -> Result<BootstrapPass> {
    if n == 0 || n > model.full_size() {
        return Err(Error::InvalidParameter(format!("subsample size {n} must lie in 1..={}", model.full_size())));
    }
    bootstrap_pass(model, theta, n, m, plan, rng)
}

/// Mean estimate from statistics of size-`n` simulations, rescaled to size
/// `big_n` for extensive statistics.
pub fn estimate_mu_raw(stats_n: &[SummaryVector], scaling: MuScaling, n: usize, big_n: usize) -> Result<SummaryVector> {
    let mean = sample_mean(stats_n)?;
    match scaling {
        MuScaling::Average => Ok(mean),
        MuScaling::Extensive => mean.scaled(big_n as f64 / n as f64),
    }
}

/// BLB synthetic likelihood. `MuSource::Estimated` uses the rescaled raw mean.
pub fn blbsl_loglik<M: Model>(
    model: &M,
    theta: &[f64],
    s_obs: &SummaryVector,
    n: usize,
    m: usize,
    plan: &ResamplePlan,
    mu: MuSource<'_>,
    rng: &mut SimRng,
) -> Result<f64> {
    let pass = blbsl_sigma(model, theta, n, m, plan, rng)?;
    let mean = match mu {
        MuSource::Estimated => estimate_mu_raw(&pass.stats, model.mu_scaling(), n, model.full_size())?,
        MuSource::Given(v) => v.clone(),
    };
    log_density(s_obs, &mean, pass.sigma)
}

/// Log of an isotropic Gaussian kernel with per-coordinate sd `epsilon`.
pub fn log_kernel(s: &SummaryVector, s_obs: &SummaryVector, epsilon: f64) -> f64 {
    let d = s.dim() as f64;
    let sq: Vec<f64> = s.as_slice().iter().zip(s_obs.as_slice()).map(|(a, b)| (a - b) * (a - b)).collect();
    -0.5 * d * (2.0 * std::f64::consts::PI * epsilon * epsilon).ln() - exact_sum(&sq) / (2.0 * epsilon * epsilon)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Kernel ABC likelihood from `m` simulations. Simulations whose statistics
/// are undefined contribute a zero kernel value.
pub fn abc_loglik<M: Model>(
    model: &M,
    theta: &[f64],
    s_obs: &SummaryVector,
    epsilon: f64,
    m: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let streams = simulation_streams(rng);
    let mut logs = Vec::with_capacity(m);
    for i in 0..m {
        let data = model.simulate(theta, model.full_size(), &mut streams(i))?;
        logs.push(match model.summarize(&data) {
            Ok(s) => log_kernel(&s, s_obs, epsilon),
            Err(e) if e.is_estimate_failure() => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        });
    }
    Ok(log_mean_exp(&logs))
}

/// Bootstrapped ABC: the kernel is averaged over the resamples of each
/// simulation, then over simulations.
pub fn babc_loglik<M: Model>(
    model: &M,
    theta: &[f64],
    s_obs: &SummaryVector,
    epsilon: f64,
    m: usize,
    plan: &ResamplePlan,
    rng: &mut SimRng,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    let streams = simulation_streams(rng);
    let mut per_sim = Vec::with_capacity(m);
    for i in 0..m {
        let data = model.simulate(theta, model.full_size(), &mut streams(i))?;
        per_sim.push(match model.resample_statistics(&data, plan) {
            Ok(stats) => log_mean_exp(&stats.iter().map(|s| log_kernel(s, s_obs, epsilon)).collect::<Vec<_>>()),
            Err(e) if e.is_estimate_failure() => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        });
    }
    Ok(log_mean_exp(&per_sim))
}

/// An estimator bound to its configuration, observed statistics and plan.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub config: EstimatorConfig,
    pub s_obs: SummaryVector,
    pub plan: Option<std::sync::Arc<ResamplePlan>>,
}

impl Estimator {
    pub fn new(config: EstimatorConfig, s_obs: SummaryVector, plan: Option<std::sync::Arc<ResamplePlan>>) -> Result<Self> {
        config.validate()?;
        if config.kind.uses_plan() && plan.is_none() {
            return Err(Error::InvalidConfig(format!("{} needs a resampling plan", config.kind.name())));
        }
        Ok(Self { config, s_obs, plan })
    }

    /// One log-likelihood estimate at `theta`. `oracle` supplies the exact
    /// mean when the configuration asks for it.
    pub fn loglik<M: Model>(
        &self,
        model: &M,
        theta: &[f64],
        oracle: Option<&SummaryVector>,
        rng: &mut SimRng,
    ) -> Result<f64> {
        let c = &self.config;
        let mu = match (c.mu_mode, oracle) {
            (MuMode::Oracle, Some(v)) => MuSource::Given(v),
            (MuMode::Oracle, None) => return Err(Error::InvalidConfig("oracle mean not supplied".into())),
            (MuMode::Estimated | MuMode::RescaledRaw, _) => MuSource::Estimated,
            (MuMode::Regression, _) => {
                return Err(Error::InvalidConfig("regression mean is only available inside smc".into()))
            }
        };
        let plan = || self.plan.as_deref().expect("validated in new");
        match c.kind {
            EstimatorKind::Sl => sl_loglik(model, theta, &self.s_obs, c.m, mu, rng),
            EstimatorKind::Bsl => bsl_loglik(model, theta, &self.s_obs, c.m, plan(), mu, rng),
            EstimatorKind::BlbSl => {
                let n = c.subsample.expect("validated");
                blbsl_loglik(model, theta, &self.s_obs, n, c.m, plan(), mu, rng)
            }
            EstimatorKind::Abc => abc_loglik(model, theta, &self.s_obs, c.epsilon.expect("validated"), c.m, rng),
            EstimatorKind::Babc => {
                babc_loglik(model, theta, &self.s_obs, c.epsilon.expect("validated"), c.m, plan(), rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianToy;
    use crate::resampling::{make_iid_plan, make_index_matrix};

    struct Constant;

    impl Model for Constant {
        type Data = Vec<f64>;

        fn param_dim(&self) -> usize {
            1
        }
        fn summary_dim(&self) -> usize {
            1
        }
        fn full_size(&self) -> usize {
            4
        }
        fn mu_scaling(&self) -> MuScaling {
            MuScaling::Average
        }
        fn simulate(&self, _: &[f64], size: usize, _: &mut SimRng) -> Result<Vec<f64>> {
            Ok(vec![1.0; size])
        }
        fn summarize(&self, data: &Vec<f64>) -> Result<SummaryVector> {
            SummaryVector::scalar(data.iter().sum())
        }
        fn resample_statistics(&self, data: &Vec<f64>, plan: &ResamplePlan) -> Result<Vec<SummaryVector>> {
            (0..plan.rows()).map(|_| self.summarize(data)).collect()
        }
    }

    fn sv(x: f64) -> SummaryVector {
        SummaryVector::scalar(x).unwrap()
    }

    #[test]
    fn constant_statistics_are_singular() {
        let err = sl_loglik(&Constant, &[0.0], &sv(4.0), 5, MuSource::Estimated, &mut stream(1, "e", 0)).unwrap_err();
        assert!(matches!(err, Error::NonInvertibleCovariance { .. }));
        let plan = ResamplePlan::Iid(make_iid_plan(4, 3, &mut stream(1, "p", 0), 1).unwrap());
        assert_eq!(bsl_sigma(&Constant, &[0.0], 3, &plan, &mut stream(1, "e", 0)).unwrap(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn sl_with_two_simulations_uses_half_squared_difference() {
        let toy = GaussianToy::new(50);
        let mut a = stream(3, "e", 0);
        let v = sl_loglik(&toy, &[0.25], &sv(2.0), 2, MuSource::Estimated, &mut a).unwrap();
        let streams = simulation_streams(&mut stream(3, "e", 0));
        let s: Vec<f64> =
            (0..2).map(|m| toy.summarize(&toy.simulate(&[0.25], 50, &mut streams(m)).unwrap()).unwrap()[0]).collect();
        let var = 0.5 * (s[0] - s[1]).powi(2);
        let mean = 0.5 * (s[0] + s[1]);
        let want = -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (2.0 - mean).powi(2) / var;
        assert!((v - want).abs() < 1e-9 * want.abs().max(1.0), "{v} vs {want}");
    }

    #[test]
    fn estimates_are_reproducible() {
        let toy = GaussianToy::new(200);
        let plan = ResamplePlan::Iid(make_iid_plan(200, 20, &mut stream(4, "p", 0), 4).unwrap());
        let est = Estimator::new(
            EstimatorConfig::new(EstimatorKind::Bsl, 1).with_r(20),
            sv(2.0),
            Some(std::sync::Arc::new(plan)),
        )
        .unwrap();
        let a = est.loglik(&toy, &[0.25], None, &mut stream(9, "e", 0)).unwrap();
        let b = est.loglik(&toy, &[0.25], None, &mut stream(9, "e", 0)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a.is_finite());
    }

    #[test]
    fn mu_raw_modes() {
        assert_eq!(estimate_mu_raw(&[sv(100.0)], MuScaling::Extensive, 25, 10_000).unwrap()[0], 40_000.0);
        assert_eq!(estimate_mu_raw(&[sv(3.0)], MuScaling::Average, 25, 10_000).unwrap()[0], 3.0);
    }

    #[test]
    fn kernel_examples() {
        let eps = 0.3;
        let at_max = abc_loglik(&Constant, &[0.0], &sv(4.0), eps, 7, &mut stream(1, "e", 0)).unwrap();
        assert!((at_max - (1.0 / ((2.0 * std::f64::consts::PI).sqrt() * eps)).ln()).abs() < 1e-14);
        let far = abc_loglik(&Constant, &[0.0], &sv(10.0), eps, 1, &mut stream(1, "e", 0)).unwrap();
        assert!((far - (at_max - 36.0 / (2.0 * eps * eps))).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for target in [4.0, 4.1, 4.5, 6.0, 40.0] {
            let v = log_kernel(&sv(4.0), &sv(target), eps);
            assert!(v <= prev);
            prev = v;
        }
        // Far in the tail the kernel underflows in linear space but stays
        // finite and ordered in log space.
        let tail = abc_loglik(&Constant, &[0.0], &sv(1e6), 1e-3, 3, &mut stream(1, "e", 0)).unwrap();
        assert!(tail.is_finite() && tail.exp() == 0.0);
    }

    #[test]
    fn babc_with_identity_resample_is_abc() {
        let toy = GaussianToy::new(30);
        let identity: Vec<u32> = (0..30).collect();
        let mut plan = make_index_matrix(30, 30, 1, &mut stream(0, "p", 0), 0).unwrap();
        // Overwrite the single row with the identity permutation.
        plan = IndexMatrixExt::with_row(plan, &identity);
        let plan = ResamplePlan::Iid(plan);
        let a = abc_loglik(&toy, &[0.25], &sv(2.0), 0.2, 5, &mut stream(6, "e", 0)).unwrap();
        let b = babc_loglik(&toy, &[0.25], &sv(2.0), 0.2, 5, &plan, &mut stream(6, "e", 0)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    struct IndexMatrixExt;

    impl IndexMatrixExt {
        fn with_row(plan: crate::resampling::IndexMatrix, row: &[u32]) -> crate::resampling::IndexMatrix {
            let mut bytes = plan.to_bytes();
            let body = bytes.len() - 4 * row.len();
            for (i, v) in row.iter().enumerate() {
                bytes[body + 4 * i..body + 4 * i + 4].copy_from_slice(&v.to_le_bytes());
            }
            crate::resampling::IndexMatrix::from_bytes(&bytes).unwrap()
        }
    }

    #[test]
    fn babc_lies_between_per_simulation_extremes() {
        let toy = GaussianToy::new(40);
        let plan = ResamplePlan::Iid(make_iid_plan(40, 10, &mut stream(2, "p", 0), 2).unwrap());
        let v = babc_loglik(&toy, &[0.25], &sv(2.0), 0.3, 6, &plan, &mut stream(5, "e", 0)).unwrap();
        let streams = simulation_streams(&mut stream(5, "e", 0));
        let per: Vec<f64> = (0..6)
            .map(|m| {
                let data = toy.simulate(&[0.25], 40, &mut streams(m)).unwrap();
                let stats = toy.resample_statistics(&data, &plan).unwrap();
                log_mean_exp(&stats.iter().map(|s| log_kernel(s, &sv(2.0), 0.3)).collect::<Vec<_>>())
            })
            .collect();
        let lo = per.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= v && v <= hi);
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(EstimatorKind::Sl, 1).validate().is_err());
        assert!(EstimatorConfig::new(EstimatorKind::Bsl, 1).validate().is_ok());
        assert!(EstimatorConfig::new(EstimatorKind::Abc, 5).validate().is_err());
        assert!(EstimatorConfig::new(EstimatorKind::Abc, 5).with_epsilon(0.1).validate().is_ok());
        assert!(EstimatorConfig::new(EstimatorKind::Sl, 5).with_epsilon(0.1).validate().is_err());
        assert!(EstimatorConfig::new(EstimatorKind::BlbSl, 1).validate().is_err());
    }

    #[test]
    fn log_mean_exp_edges() {
        assert_eq!(log_mean_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_mean_exp(&[-3.5]), -3.5);
        assert!((log_mean_exp(&[1000.0, 1000.0]) - 1000.0).abs() < 1e-12);
    }
}

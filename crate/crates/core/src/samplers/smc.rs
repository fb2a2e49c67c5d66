//! Marginal sequential Monte Carlo with BLB synthetic likelihood.
//!
//! At every target each resampled particle moves once under a Gaussian random
//! walk, simulates one size-`n` dataset, and stores its raw mean estimate.
//! Once every particle has stored its estimate, means are predicted by local
//! linear regression over the store and the particle is weighted by
//! `p(theta) N(s_obs | mu_pred, Sigma_blb)^nu / sum_q w_q K(theta | theta_q)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Prior;
use crate::likelihood::{blbsl_sigma, estimate_mu_raw, log_mean_exp};
use crate::models::Model;
use crate::regression::MuStore;
use crate::resampling::ResamplePlan;
use crate::rng::{stream, SimRng};
use crate::stats::{gaussian_log_density, SummaryVector, SyntheticGaussian};
use crate::sum::exact_sum;
use crate::table::Table;
use crate::{Error, Result};

/// Likelihood exponents `nu_0..nu_T`, nondecreasing within `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSchedule(Vec<f64>);

impl AnnealSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("schedule needs at least two entries".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("schedule must be nondecreasing within [0, 1]".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Number of targets after the initial one.
    pub fn targets(&self) -> usize {
        self.0.len() - 1
    }
}

/// `nu_t = (t / T)^2` for `t = 0..=T`.
pub fn make_schedule(t_max: usize) -> Result<AnnealSchedule> {
    if t_max == 0 {
        return Err(Error::InvalidParameter("need at least one target".into()));
    }
    AnnealSchedule::new((0..=t_max).map(|t| (t as f64 / t_max as f64).powi(2)).collect())
}

/// Offspring parent indices from one stratified uniform draw.
pub fn systematic_resample(weights: &[f64], rng: &mut SimRng) -> Result<Vec<usize>> {
    let sum = exact_sum(weights);
    if weights.is_empty() || (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::NormalizationError { sum });
    }
    let p = weights.len();
    let u0: f64 = rng.random::<f64>() / p as f64;
    let mut out = Vec::with_capacity(p);
    let mut cumulative = weights[0];
    let mut j = 0;
    for i in 0..p {
        let u = u0 + i as f64 / p as f64;
        while u >= cumulative && j + 1 < p {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    Ok(out)
}

/// Gaussian random-walk move kernel.
#[derive(Debug, Clone)]
pub struct MoveKernel {
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl MoveKernel {
    pub fn new(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        let chol = match covariance.clone().cholesky() {
            Some(c) => c,
            None => {
                let max_diag = covariance.diagonal().max().max(0.0);
                let jitter = DMatrix::identity(d, d) * (1e-10 * max_diag + 1e-300);
                (covariance + jitter)
                    .cholesky()
                    .ok_or(Error::NonInvertibleCovariance { condition: f64::INFINITY })?
            }
        };
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(Self { log_norm: -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det, chol: l })
    }

    /// `(2.38^2 / d)` times the weighted covariance of `particles`.
    pub fn scaled_from_cloud(particles: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let d = particles.first().ok_or(Error::EmptyInput)?.len();
        let total = exact_sum(weights);
        let mean: Vec<f64> = (0..d)
            .map(|j| exact_sum(&particles.iter().zip(weights).map(|(p, w)| w * p[j]).collect::<Vec<_>>()) / total)
            .collect();
        let cov = DMatrix::from_fn(d, d, |a, b| {
            let terms: Vec<f64> =
                particles.iter().zip(weights).map(|(p, w)| w * (p[a] - mean[a]) * (p[b] - mean[b])).collect();
            exact_sum(&terms) / total
        });
        Self::new(cov * (2.38f64.powi(2) / d as f64))
    }

    pub fn propose(&self, from: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let z = DVector::from_fn(from.len(), |_, _| Distribution::<f64>::sample(&StandardNormal, rng));
        let step = &self.chol * z;
        from.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    }

    pub fn log_density(&self, to: &[f64], from: &[f64]) -> f64 {
        let diff = DVector::from_fn(to.len(), |i, _| to[i] - from[i]);
        let solved = self.chol.solve_lower_triangular(&diff).expect("positive diagonal");
        self.log_norm - 0.5 * solved.norm_squared()
    }
}

/// Unnormalised log weight of a moved particle: prior plus tempered
/// log-likelihood minus the log of the kernel mixture over the previous
/// cloud. A `nu` of zero ignores the likelihood term entirely.
pub fn marginal_log_weight(
    log_prior: f64,
    nu: f64,
    loglik: f64,
    theta: &[f64],
    previous: &[Vec<f64>],
    previous_log_weights: &[f64],
    kernel: &MoveKernel,
) -> f64 {
    if log_prior == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let terms: Vec<f64> =
        previous.iter().zip(previous_log_weights).map(|(q, lw)| lw + kernel.log_density(theta, q)).collect();
    let denominator = log_mean_exp(&terms) + (terms.len() as f64).ln();
    let likelihood = if nu == 0.0 { 0.0 } else { nu * loglik };
    log_prior + likelihood - denominator
}

/// Normalise log weights; `None` when all are zero.
pub fn normalise_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    let raw: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total = exact_sum(&raw);
    Some(raw.into_iter().map(|w| w / total).collect())
}

/// Weighted particles at one target.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub generation: usize,
    pub nu: f64,
    pub particles: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub loglik: Vec<f64>,
}

impl ParticleCloud {
    pub fn ess(&self) -> f64 {
        crate::diagnostics::ess_weights(&self.weights)
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.particles.iter().map(|p| p[j]).collect()
    }

    pub fn to_table(&self, names: &[String]) -> Table {
        let mut columns = names.to_vec();
        columns.extend(["weight".to_string(), "loglik".to_string()]);
        let rows = self
            .particles
            .iter()
            .zip(&self.weights)
            .zip(&self.loglik)
            .map(|((p, w), l)| p.iter().copied().chain([*w, *l]).collect())
            .collect();
        Table { columns, rows }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcConfig {
    pub particles: usize,
    pub schedule: AnnealSchedule,
    pub neighbours: usize,
    pub subsample: usize,
    /// Simulations per particle and target.
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct SmcRun {
    /// Weighted clouds, one per target including the initial prior cloud.
    pub clouds: Vec<ParticleCloud>,
    pub store: MuStore,
    /// Predictions that fell back to the neighbour mean.
    pub fallbacks: usize,
    /// Particles whose simulation or likelihood estimate failed.
    pub failures: usize,
}

impl SmcRun {
    pub fn last(&self) -> &ParticleCloud {
        self.clouds.last().expect("at least the initial cloud")
    }
}

struct Moved {
    theta: Vec<f64>,
    log_prior: f64,
    sigma: Option<DMatrix<f64>>,
}

/// Marginal SMC targeting the BLB synthetic-likelihood posterior.
pub fn smc_blbsl<M: Model>(
    model: &M,
    s_obs: &SummaryVector,
    prior: &Prior,
    config: &SmcConfig,
    plan: &ResamplePlan,
    rng: &mut SimRng,
) -> Result<SmcRun> {
    let p_count = config.particles;
    if p_count < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 particles, got {p_count}")));
    }
    if config.neighbours == 0 || config.m == 0 {
        return Err(Error::InvalidParameter("neighbours and m must be positive".into()));
    }
    let (n, big_n) = (config.subsample, model.full_size());
    let nus = config.schedule.values();
    let mut store = MuStore::new(model.param_dim());
    let mut run_failures = 0;
    let mut fallbacks = 0;

    let key: u64 = rng.random();
    let mut particles = Vec::with_capacity(p_count);
    for p in 0..p_count {
        let mut r = stream(key, "init", p as u64);
        let theta = prior.sample(&mut r);
        match model.simulate(&theta, n, &mut r).and_then(|d| model.summarize(&d)) {
            Ok(s) => store.insert(&theta, estimate_mu_raw(&[s], model.mu_scaling(), n, big_n)?)?,
            Err(e) if e.is_estimate_failure() => run_failures += 1,
            Err(e) => return Err(e),
        }
        particles.push(theta);
    }
    let uniform = vec![1.0 / p_count as f64; p_count];
    let mut clouds = vec![ParticleCloud {
        generation: 0,
        nu: nus[0],
        particles: particles.clone(),
        weights: uniform.clone(),
        loglik: vec![f64::NAN; p_count],
    }];

    for t in 1..nus.len() {
        let current = clouds.last().expect("nonempty");
        let kernel = MoveKernel::scaled_from_cloud(&current.particles, &current.weights)?;
        let parents = systematic_resample(&current.weights, rng)?;
        let previous: Vec<Vec<f64>> = parents.iter().map(|&i| current.particles[i].clone()).collect();
        let previous_log_weights = vec![-(p_count as f64).ln(); p_count];
        let key: u64 = rng.random();

        let mut moved = Vec::with_capacity(p_count);
        for (p, parent) in previous.iter().enumerate() {
            let mut r = stream(key, "move", p as u64);
            let theta = kernel.propose(parent, &mut r);
            let log_prior = prior.log_density(&theta);
            let mut sigma = None;
            if log_prior > f64::NEG_INFINITY {
                match blbsl_sigma(model, &theta, n, config.m, plan, &mut r) {
                    Ok(pass) => {
                        store.insert(&theta, estimate_mu_raw(&pass.stats, model.mu_scaling(), n, big_n)?)?;
                        sigma = Some(pass.sigma);
                    }
                    Err(e) if e.is_estimate_failure() => run_failures += 1,
                    Err(e) => return Err(e),
                }
            }
            moved.push(Moved { theta, log_prior, sigma });
        }

        let nu = nus[t];
        let mut log_weights = Vec::with_capacity(p_count);
        let mut logliks = Vec::with_capacity(p_count);
        for m in &moved {
            let loglik = match &m.sigma {
                None => f64::NEG_INFINITY,
                Some(sigma) => {
                    let pred = store.predict(&m.theta, config.neighbours)?;
                    fallbacks += usize::from(pred.fallback_mean);
                    match SyntheticGaussian::new(&pred.mu, sigma.clone()).and_then(|g| gaussian_log_density(s_obs, &g)) {
                        Ok(v) => v,
                        Err(e) if e.is_estimate_failure() => {
                            run_failures += 1;
                            f64::NEG_INFINITY
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            let log_prior = if m.sigma.is_some() || nu == 0.0 { m.log_prior } else { f64::NEG_INFINITY };
            log_weights.push(marginal_log_weight(
                log_prior,
                nu,
                loglik,
                &m.theta,
                &previous,
                &previous_log_weights,
                &kernel,
            ));
            logliks.push(loglik);
        }
        let weights = normalise_log_weights(&log_weights).ok_or(Error::DegenerateWeights { target: t })?;
        clouds.push(ParticleCloud {
            generation: t,
            nu,
            particles: moved.into_iter().map(|m| m.theta).collect(),
            weights,
            loglik: logliks,
        });
    }
    Ok(SmcRun { clouds, store, fallbacks, failures: run_failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = make_schedule(10).unwrap();
        assert_eq!(s.values()[5], 0.25);
        assert_eq!(*s.values().last().unwrap(), 1.0);
        assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(make_schedule(0).is_err());
    }

    #[test]
    fn resample_examples() {
        let mut rng = stream(1, "r", 0);
        assert_eq!(systematic_resample(&[0.25; 4], &mut rng).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(systematic_resample(&[0.0, 1.0, 0.0], &mut rng).unwrap(), vec![1, 1, 1]);
        assert!(matches!(systematic_resample(&[0.5, 0.6], &mut rng), Err(Error::NormalizationError { .. })));
    }

    #[test]
    fn resample_is_unbiased() {
        let w = [0.05, 0.4, 0.15, 0.3, 0.1];
        let reps = 10_000;
        let mut rng = stream(2, "r", 0);
        let mut counts = vec![Vec::with_capacity(reps); 5];
        for _ in 0..reps {
            let mut c = [0.0; 5];
            for i in systematic_resample(&w, &mut rng).unwrap() {
                c[i] += 1.0;
            }
            for k in 0..5 {
                counts[k].push(c[k]);
            }
        }
        for k in 0..5 {
            let mean = counts[k].iter().sum::<f64>() / reps as f64;
            let var = counts[k].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt().max(1e-12);
            assert!((mean - 5.0 * w[k]).abs() <= 4.0 * se + 1e-12, "{k}: {mean}");
        }
    }

    #[test]
    fn single_particle_denominator_is_the_kernel() {
        let kernel = MoveKernel::new(DMatrix::from_row_slice(1, 1, &[0.04])).unwrap();
        let lw = marginal_log_weight(0.0, 0.0, 0.0, &[0.3], &[vec![0.1]], &[0.0], &kernel);
        assert!((lw + kernel.log_density(&[0.3], &[0.1])).abs() < 1e-14);
    }

    #[test]
    fn weights_ignore_scaling_of_previous_weights() {
        let kernel = MoveKernel::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3])).unwrap();
        let prev = vec![vec![0.0, 0.0], vec![1.0, -0.5], vec![0.3, 0.2]];
        let prev_lw = [(0.2f64).ln(), (0.5f64).ln(), (0.3f64).ln()];
        let moved = [[0.1, 0.1], [0.9, -0.2], [2.0, 1.0]];
        let weights = |shift: f64| {
            let lw: Vec<f64> = prev_lw.iter().map(|v| v + shift).collect();
            let raw: Vec<f64> = moved.iter().map(|m| marginal_log_weight(-0.1, 0.5, -2.0, m, &prev, &lw, &kernel)).collect();
            normalise_log_weights(&raw).unwrap()
        };
        for (a, b) in weights(0.0).iter().zip(weights(7.3)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_report_the_target() {
        assert_eq!(normalise_log_weights(&[f64::NEG_INFINITY; 3]), None);
    }
}

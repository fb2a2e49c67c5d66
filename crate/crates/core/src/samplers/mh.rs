use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::SimRng;
use crate::table::Table;
use crate::{Error, Result};

/// Samples of a Markov chain, row-major, with the log-likelihood estimate
/// held at each state.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    pub samples: Vec<f64>,
    pub loglik: Vec<f64>,
    pub accepted: usize,
    /// Likelihood estimates that failed, including one at the start.
    pub failures: usize,
}

impl Chain {
    pub fn new(dim: usize) -> Self {
        Self { dim, samples: Vec::new(), loglik: Vec::new(), accepted: 0, failures: 0 }
    }

    pub fn len(&self) -> usize {
        self.loglik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loglik.is_empty()
    }

    pub fn push(&mut self, theta: &[f64], loglik: f64) {
        self.samples.extend_from_slice(theta);
        self.loglik.push(loglik);
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.samples.iter().skip(j).step_by(self.dim).copied().collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / (self.len().max(2) - 1) as f64
    }

    /// Drop the first `burn` states.
    pub fn discard(&self, burn: usize) -> Chain {
        let burn = burn.min(self.len());
        Chain {
            dim: self.dim,
            samples: self.samples[burn * self.dim..].to_vec(),
            loglik: self.loglik[burn..].to_vec(),
            accepted: self.accepted,
            failures: self.failures,
        }
    }

    pub fn to_table(&self, names: &[String]) -> Table {
        let mut columns = names.to_vec();
        columns.push("loglik".into());
        let rows = (0..self.len())
            .map(|i| self.state(i).iter().copied().chain(std::iter::once(self.loglik[i])).collect())
            .collect();
        Table { columns, rows }
    }
}

/// Gaussian random-walk Metropolis-Hastings driven by a likelihood estimate.
///
/// The estimate at the current state is kept until a proposal is accepted.
/// Proposals outside the prior support are rejected without calling
/// `loglik`. Estimate failures at a proposal count as rejections. A failure
/// at `theta0` leaves the current estimate at `-inf`, so the first proposal
/// with a finite estimate is accepted. Any other error aborts the chain.
pub fn mh_chain(
    theta0: &[f64],
    proposal_sd: &[f64],
    n_iter: usize,
    mut loglik: impl FnMut(&[f64], &mut SimRng) -> Result<f64>,
    log_prior: impl Fn(&[f64]) -> f64,
    rng: &mut SimRng,
) -> Result<Chain> {
    if proposal_sd.len() != theta0.len() {
        return Err(Error::DimensionMismatch { expected: theta0.len(), got: proposal_sd.len() });
    }
    let mut lp = log_prior(theta0);
    if lp == f64::NEG_INFINITY {
        return Err(Error::InvalidInitialState);
    }
    let mut chain = Chain::new(theta0.len());
    let mut ll = match loglik(theta0, rng) {
        Ok(v) => v,
        Err(e) if e.is_estimate_failure() => {
            chain.failures += 1;
            f64::NEG_INFINITY
        }
        Err(e) => return Err(e),
    };
    let mut theta = theta0.to_vec();
    chain.push(&theta, ll);
    let mut proposal = vec![0.0; theta.len()];
    for _ in 1..n_iter {
        for ((p, t), s) in proposal.iter_mut().zip(&theta).zip(proposal_sd) {
            let z: f64 = StandardNormal.sample(rng);
            *p = t + s * z;
        }
        let lp_new = log_prior(&proposal);
        if lp_new > f64::NEG_INFINITY {
            match loglik(&proposal, rng) {
                Ok(ll_new) => {
                    let log_u = rng.random::<f64>().ln();
                    if log_u < (ll_new + lp_new) - (ll + lp) {
                        theta.copy_from_slice(&proposal);
                        (ll, lp) = (ll_new, lp_new);
                        chain.accepted += 1;
                    }
                }
                Err(e) if e.is_estimate_failure() => chain.failures += 1,
                Err(e) => return Err(e),
            }
        }
        chain.push(&theta, ll);
    }
    Ok(chain)
}

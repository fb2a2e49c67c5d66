use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Chain, Prior};
use crate::rng::SimRng;
use crate::simulators::{ising_gibbs, IsingInit, IsingState};
use crate::Result;

/// Exchange algorithm for the Ising coupling. Each proposal `theta'` draws an
/// auxiliary grid by `sweeps` Gibbs sweeps from a random start and is
/// accepted with probability
/// `min(1, exp((theta' - theta)(S(y) - S(x'))) p(theta') / p(theta))`.
///
/// The log-likelihood column holds `theta * S(y)`.
pub fn exchange_chain(
    theta0: f64,
    proposal_sd: f64,
    n_iter: usize,
    data: &IsingState,
    sweeps: usize,
    prior: &Prior,
    rng: &mut SimRng,
) -> Result<Chain> {
    let mut lp = prior.log_density(&[theta0]);
    if lp == f64::NEG_INFINITY {
        return Err(crate::Error::InvalidInitialState);
    }
    let s_obs = data.statistic() as f64;
    let mut theta = theta0;
    let mut chain = Chain::new(1);
    chain.push(&[theta], theta * s_obs);
    for _ in 1..n_iter {
        let z: f64 = StandardNormal.sample(rng);
        let proposal = theta + proposal_sd * z;
        let lp_new = prior.log_density(&[proposal]);
        if lp_new > f64::NEG_INFINITY {
            let aux = ising_gibbs(proposal, data.side(), sweeps, rng, IsingInit::Random)?;
            let log_alpha = (proposal - theta) * (s_obs - aux.statistic() as f64) + lp_new - lp;
            if rng.random::<f64>().ln() < log_alpha {
                theta = proposal;
                lp = lp_new;
                chain.accepted += 1;
            }
        }
        chain.push(&[theta], theta * s_obs);
    }
    Ok(chain)
}

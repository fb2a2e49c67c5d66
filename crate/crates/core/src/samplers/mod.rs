//! Metropolis-Hastings with estimated likelihoods, the exchange algorithm and
//! marginal SMC with BLB synthetic likelihood.

pub mod exchange;
pub mod mh;
pub mod prior;
pub mod smc;

pub use exchange::exchange_chain;
pub use mh::{mh_chain, Chain};
pub use prior::Prior;
pub use smc::{make_schedule, smc_blbsl, systematic_resample, AnnealSchedule, ParticleCloud, SmcConfig, SmcRun};

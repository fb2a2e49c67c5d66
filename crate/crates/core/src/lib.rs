pub mod diagnostics;
pub mod error;
pub mod likelihood;
pub mod models;
pub mod resampling;
pub mod regression;
pub mod rng;
pub mod samplers;
pub mod simulators;
pub mod stats;
pub mod sum;
pub mod table;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/summaries.md")]
    mod summaries {}
    #[doc = include_str!("../../../book/src/resampling.md")]
    mod resampling {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/mcmc.md")]
    mod mcmc {}
    #[doc = include_str!("../../../book/src/smc.md")]
    mod smc {}
    #[doc = include_str!("../../../book/src/ising.md")]
    mod ising {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

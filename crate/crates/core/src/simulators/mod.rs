//! Generative models: i.i.d. Gaussian, stochastic predator-prey and Ising.

pub mod gaussian;
pub mod ising;
pub mod lotka_volterra;

pub use gaussian::simulate_gaussian_iid;
pub use ising::{ising_gibbs, ising_unnorm_logdensity, IsingInit, IsingState};
pub use lotka_volterra::{gillespie_lv, LvCaps, LvParams, LvPath};

/// A simulated or observed dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Iid(Vec<f64>),
    Series(LvPath),
    Grid(IsingState),
}

//! Exact stochastic simulation of a predator-prey jump process.
//!
//! `x` counts predators and `y` prey. Reactions and rates:
//!
//! | reaction            | rate        | change in (x, y) |
//! |---------------------|-------------|------------------|
//! | prey birth          | θ₁ y        | (0, +1)          |
//! | predation           | θ₂ x y      | (+1, −1)         |
//! | predator death      | θ₃ x        | (−1, 0)          |

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::rng::SimRng;
use crate::{Error, Result};

/// Rate constants, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LvParams {
    pub theta: [f64; 3],
}

impl LvParams {
    pub fn new(theta: [f64; 3]) -> Result<Self> {
        if theta.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter(format!("rates must be finite and nonnegative: {theta:?}")));
        }
        Ok(Self { theta })
    }
}

/// Bounds that stop a runaway path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LvCaps {
    pub max_events: u64,
    pub max_population: u64,
}

impl Default for LvCaps {
    fn default() -> Self {
        Self { max_events: 10_000_000, max_population: 1_000_000 }
    }
}

/// Recorded populations at times `0, Δ, 2Δ, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct LvPath {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// A cap was hit; observations after that point repeat the capped state.
    pub diverged: bool,
    pub events: u64,
}

/// Simulate one path and record it `n_obs` times, every `delta` time units.
pub fn gillespie_lv(
    params: LvParams,
    x0: u64,
    y0: u64,
    delta: f64,
    n_obs: usize,
    rng: &mut SimRng,
    caps: LvCaps,
) -> LvPath {
    let [t1, t2, t3] = params.theta;
    let (mut x, mut y) = (x0, y0);
    let mut path = LvPath {
        x: Vec::with_capacity(n_obs),
        y: Vec::with_capacity(n_obs),
        diverged: false,
        events: 0,
    };
    let mut t = 0.0;
    while path.x.len() < n_obs {
        let (xf, yf) = (x as f64, y as f64);
        let birth = t1 * yf;
        let predation = t2 * xf * yf;
        let total = birth + predation + t3 * xf;
        let next = if total > 0.0 {
            let wait: f64 = Exp1.sample(rng);
            t + wait / total
        } else {
            f64::INFINITY
        };
        while path.x.len() < n_obs && (path.x.len() as f64) * delta < next {
            path.x.push(xf);
            path.y.push(yf);
        }
        if path.x.len() == n_obs {
            break;
        }
        t = next;
        let u = rng.random::<f64>() * total;
        if u < birth {
            y += 1;
        } else if u < birth + predation {
            x += 1;
            y -= 1;
        } else {
            x -= 1;
        }
        path.events += 1;
        if path.events >= caps.max_events || x > caps.max_population || y > caps.max_population {
            path.diverged = true;
            let (cx, cy) = (x.min(caps.max_population) as f64, y.min(caps.max_population) as f64);
            path.x.resize(n_obs, cx);
            path.y.resize(n_obs, cy);
        }
    }
    path
}

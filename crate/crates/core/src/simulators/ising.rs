//! Gibbs sampling of a ferromagnetic Ising model on a square torus.

use rand::Rng;

use crate::rng::SimRng;
use crate::stats::ising_statistic;
use crate::{Error, Result};

/// A square grid of ±1 spins, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsingState {
    side: usize,
    spins: Vec<i8>,
}

impl IsingState {
    pub fn new(side: usize, spins: Vec<i8>) -> Result<Self> {
        if side < 3 || spins.len() != side * side {
            return Err(Error::InvalidGrid { len: spins.len(), min_side: 3 });
        }
        if let Some(site) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin { site, value: spins[site] });
        }
        Ok(Self { side, spins })
    }

    pub fn uniform(side: usize, spin: i8) -> Result<Self> {
        Self::new(side, vec![spin; side * side])
    }

    pub fn random(side: usize, rng: &mut SimRng) -> Result<Self> {
        Self::new(side, (0..side * side).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect())
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.spins[row * self.side + col]
    }

    /// Neighbour-pair sum over the torus.
    pub fn statistic(&self) -> i64 {
        ising_statistic(self.side, &self.spins).expect("state invariants hold")
    }

    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / self.spins.len() as f64
    }
}

/// Starting configuration for [`ising_gibbs`].
#[derive(Debug, Clone)]
pub enum IsingInit {
    Random,
    Given(IsingState),
}

/// Probability of spin +1 given neighbour sum `h`: `1 / (1 + exp(-2 θ h))`.
pub fn conditional_plus(theta: f64, h: i32) -> f64 {
    1.0 / (1.0 + (-2.0 * theta * f64::from(h)).exp())
}

/// Run `sweeps` raster-order single-site Gibbs sweeps at `theta`.
pub fn ising_gibbs(theta: f64, side: usize, sweeps: usize, rng: &mut SimRng, init: IsingInit) -> Result<IsingState> {
    if sweeps == 0 {
        return Err(Error::InvalidParameter("sweeps must be at least 1".into()));
    }
    let mut state = match init {
        IsingInit::Random => IsingState::random(side, rng)?,
        IsingInit::Given(s) if s.side == side => s,
        IsingInit::Given(s) => return Err(Error::DimensionMismatch { expected: side, got: s.side }),
    };
    // Indexed by (h + 4) / 2 for h in {-4, -2, 0, 2, 4}.
    let p: [f64; 5] = std::array::from_fn(|k| conditional_plus(theta, 2 * k as i32 - 4));
    let n = side;
    let s = &mut state.spins;
    for _ in 0..sweeps {
        for r in 0..n {
            let up = if r == 0 { n - 1 } else { r - 1 } * n;
            let down = if r == n - 1 { 0 } else { r + 1 } * n;
            let row = r * n;
            for c in 0..n {
                let left = if c == 0 { n - 1 } else { c - 1 };
                let right = if c == n - 1 { 0 } else { c + 1 };
                let h = i32::from(s[up + c]) + i32::from(s[down + c]) + i32::from(s[row + left]) + i32::from(s[row + right]);
                let u: f64 = rng.random();
                s[row + c] = if u < p[((h + 4) / 2) as usize] { 1 } else { -1 };
            }
        }
    }
    Ok(state)
}

/// `theta * S(state)`.
pub fn ising_unnorm_logdensity(theta: f64, state: &IsingState) -> f64 {
    theta * state.statistic() as f64
}

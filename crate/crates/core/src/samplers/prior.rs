use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::SimRng;
use crate::{Error, Result};

/// Independent priors over each parameter coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// Exponential with the given rate on every coordinate.
    Exponential { rate: f64, dim: usize },
    /// `log theta_i` uniform on `[lo, hi]`, expressed as a density on `theta`.
    LogUniform { lo: f64, hi: f64, dim: usize },
    /// Uniform on `[lo, hi]` per coordinate.
    Uniform { lo: f64, hi: f64, dim: usize },
}

impl Prior {
    pub fn dim(&self) -> usize {
        match *self {
            Self::Exponential { dim, .. } | Self::LogUniform { dim, .. } | Self::Uniform { dim, .. } => dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Exponential { rate, .. } => rate > 0.0 && rate.is_finite(),
            Self::LogUniform { lo, hi, .. } | Self::Uniform { lo, hi, .. } => lo < hi && lo.is_finite() && hi.is_finite(),
        };
        if ok && self.dim() > 0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid prior {self:?}")))
        }
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() {
            return f64::NEG_INFINITY;
        }
        let per = |t: f64| match *self {
            Self::Exponential { rate, .. } if t >= 0.0 => rate.ln() - rate * t,
            Self::LogUniform { lo, hi, .. } if t > 0.0 && (lo..=hi).contains(&t.ln()) => -t.ln() - (hi - lo).ln(),
            Self::Uniform { lo, hi, .. } if (lo..=hi).contains(&t) => -(hi - lo).ln(),
            _ => f64::NEG_INFINITY,
        };
        theta.iter().map(|&t| per(t)).sum()
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vec<f64> {
        (0..self.dim())
            .map(|_| match *self {
                Self::Exponential { rate, .. } => Exp::new(rate).expect("validated").sample(rng),
                Self::LogUniform { lo, hi, .. } => rng.random_range(lo..hi).exp(),
                Self::Uniform { lo, hi, .. } => rng.random_range(lo..hi),
            })
            .collect()
    }

    /// Prior mean of each coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let m = match *self {
            Self::Exponential { rate, .. } => 1.0 / rate,
            Self::LogUniform { lo, hi, .. } => (hi.exp() - lo.exp()) / (hi - lo),
            Self::Uniform { lo, hi, .. } => 0.5 * (lo + hi),
        };
        vec![m; self.dim()]
    }
}

use rand_distr::{Distribution, StandardNormal};

use crate::rng::SimRng;
use crate::{Error, Result};

/// `n` draws from a zero-mean normal with precision `tau`.
pub fn simulate_gaussian_iid(tau: f64, n: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidPrecision(tau));
    }
    let sd = tau.sqrt().recip();
    Ok((0..n).map(|_| sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn variance_matches_precision() {
        let x = simulate_gaussian_iid(0.25, 100_000, &mut stream(1, "sim", 0)).unwrap();
        let v = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((v - 4.0).abs() < 0.2, "{v}");
    }

    #[test]
    fn deterministic_per_stream() {
        let a = simulate_gaussian_iid(2.0, 10, &mut stream(4, "sim", 2)).unwrap();
        let b = simulate_gaussian_iid(2.0, 10, &mut stream(4, "sim", 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn huge_precision_concentrates() {
        let x = simulate_gaussian_iid(1e8, 1000, &mut stream(2, "sim", 0)).unwrap();
        assert!(x.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn rejects_bad_precision() {
        for tau in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                simulate_gaussian_iid(tau, 3, &mut stream(0, "sim", 0)),
                Err(Error::InvalidPrecision(_))
            ));
        }
    }
}

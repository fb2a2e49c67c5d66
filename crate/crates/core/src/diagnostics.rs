//! Chain and particle-cloud diagnostics.

use crate::sum::{exact_sum, exact_sum_map};
use crate::table::Table;
use crate::{Error, Result};

/// Integrated autocorrelation time, `1 + 2 sum_k rho_k`, truncated by
/// Geyer's initial positive sequence: pairs `rho_{2m} + rho_{2m+1}` are summed
/// while positive.
pub fn iat(chain: &[f64]) -> Result<f64> {
    let n = chain.len();
    if n < 100 {
        return Err(Error::InsufficientSamples { needed: 100, got: n });
    }
    let mean = exact_sum(chain) / n as f64;
    let dev: Vec<f64> = chain.iter().map(|v| v - mean).collect();
    let gamma0 = exact_sum_map(&dev, |v| v * v);
    if gamma0 == 0.0 {
        return Err(Error::InfiniteIat);
    }
    let rho = |k: usize| -> f64 {
        let terms: Vec<f64> = (0..n - k).map(|t| dev[t] * dev[t + k]).collect();
        exact_sum(&terms) / gamma0
    };
    let mut total = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = if m == 0 { 1.0 + rho(1) } else { rho(2 * m) + rho(2 * m + 1) };
        if pair <= 0.0 {
            break;
        }
        total += pair;
        m += 1;
    }
    Ok(2.0 * total - 1.0)
}

/// `1 / sum w^2` for normalised weights.
pub fn ess_weights(weights: &[f64]) -> f64 {
    1.0 / exact_sum_map(weights, |w| w * w)
}

/// Replicate error summary. `sd` uses the population convention so that
/// `rmse^2 = bias^2 + sd^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateReport {
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub replicates: usize,
}

pub fn replicate_metrics(estimates: &[f64], truth: f64) -> Result<ReplicateReport> {
    if estimates.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: estimates.len() });
    }
    let n = estimates.len() as f64;
    let mean = exact_sum(estimates) / n;
    let var = exact_sum_map(estimates, |v| (v - mean) * (v - mean)) / n;
    let bias = mean - truth;
    Ok(ReplicateReport { bias, sd: var.sqrt(), rmse: (bias * bias + var).sqrt(), replicates: estimates.len() })
}

impl ReplicateReport {
    pub const COLUMNS: [&'static str; 4] = ["bias", "sd", "rmse", "replicates"];

    pub fn row(&self) -> Vec<f64> {
        vec![self.bias, self.sd, self.rmse, self.replicates as f64]
    }
}

/// Weighted mean and standard deviation (weights need not be normalised).
pub fn weighted_mean_sd(samples: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    let uniform;
    let w = match weights {
        Some(w) => w,
        None => {
            uniform = vec![1.0; samples.len()];
            &uniform
        }
    };
    let total = exact_sum(w);
    let wx: Vec<f64> = samples.iter().zip(w).map(|(x, w)| x * w).collect();
    let mean = exact_sum(&wx) / total;
    let wd: Vec<f64> = samples.iter().zip(w).map(|(x, w)| w * (x - mean) * (x - mean)).collect();
    (mean, (exact_sum(&wd) / total).sqrt())
}

fn weighted_quantile(sorted: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let target = q * total;
    let mut acc = 0.0;
    for &(x, w) in sorted {
        acc += w;
        if acc >= target {
            return x;
        }
    }
    sorted.last().map_or(0.0, |p| p.0)
}

/// Rule-of-thumb bandwidth `0.9 min(sd, IQR / 1.34) n^(-1/5)`, with `n` the
/// effective sample size of the weights.
pub fn silverman_bandwidth(samples: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    let (_, sd) = weighted_mean_sd(samples, weights);
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; samples.len()], <[f64]>::to_vec);
    let total = exact_sum(&w);
    let mut sorted: Vec<(f64, f64)> = samples.iter().copied().zip(w.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let iqr = weighted_quantile(&sorted, total, 0.75) - weighted_quantile(&sorted, total, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return Err(Error::DegenerateBandwidth),
    };
    let normalised: Vec<f64> = w.iter().map(|v| v / total).collect();
    let n_eff = ess_weights(&normalised);
    Ok(0.9 * spread * n_eff.powf(-0.2))
}

/// Gaussian kernel density estimate evaluated on `grid`.
pub fn kde(samples: &[f64], weights: Option<&[f64]>, grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples, weights)?;
    let w: Vec<f64> = weights.map_or_else(|| vec![1.0; samples.len()], <[f64]>::to_vec);
    let total = exact_sum(&w);
    let norm = 1.0 / (total * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            let terms: Vec<f64> =
                samples.iter().zip(&w).map(|(x, wi)| wi * (-0.5 * ((g - x) / h).powi(2)).exp()).collect();
            exact_sum(&terms) * norm
        })
        .collect())
}

/// `points` equally spaced values covering the samples plus `pad` bandwidths.
pub fn kde_grid(samples: &[f64], weights: Option<&[f64]>, points: usize, pad: f64) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples, weights)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - pad * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad * h;
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

/// KDE on an automatic grid as a two-column table.
pub fn kde_table(name: &str, samples: &[f64], weights: Option<&[f64]>) -> Result<Table> {
    let grid = kde_grid(samples, weights, 512, 4.0)?;
    let density = kde(samples, weights, &grid)?;
    let mut t = Table::new(&[name, "density"]);
    for (g, d) in grid.into_iter().zip(density) {
        t.push(vec![g, d]);
    }
    Ok(t)
}

/// Standard error of the mean of a correlated chain.
pub fn mcse_mean(chain: &[f64]) -> Result<f64> {
    let (_, sd) = weighted_mean_sd(chain, None);
    Ok(sd * (iat(chain)? / chain.len() as f64).sqrt())
}

/// Standard error of the standard deviation of a correlated chain, by the
/// delta method on the squared deviations.
pub fn mcse_sd(chain: &[f64]) -> Result<f64> {
    let (mean, sd) = weighted_mean_sd(chain, None);
    let sq: Vec<f64> = chain.iter().map(|v| (v - mean) * (v - mean)).collect();
    Ok(mcse_mean(&sq)? / (2.0 * sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, "diag", 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn iat_of_independent_draws() {
        let t = iat(&normals(100_000, 1)).unwrap();
        assert!((t - 1.0).abs() < 0.1, "{t}");
    }

    #[test]
    fn iat_of_ar1() {
        let e = normals(1_000_000, 2);
        let mut x = Vec::with_capacity(e.len());
        let mut prev = 0.0;
        for v in e {
            prev = 0.5 * prev + v;
            x.push(prev);
        }
        let t = iat(&x).unwrap();
        assert!((t - 3.0).abs() < 0.3, "{t}");
    }

    #[test]
    fn iat_errors() {
        assert_eq!(iat(&[1.0; 200]), Err(Error::InfiniteIat));
        assert!(matches!(iat(&[1.0; 10]), Err(Error::InsufficientSamples { .. })));
    }

    proptest! {
        #[test]
        fn iat_is_at_least_one_for_positively_correlated_chains(phi in 0.0f64..0.95, seed in any::<u64>()) {
            let e = normals(500, seed);
            let mut prev = 0.0;
            let x: Vec<f64> = e.iter().map(|v| { prev = phi * prev + v; prev }).collect();
            prop_assert!(iat(&x).unwrap() >= 1.0 - 0.25);
        }

        #[test]
        fn ess_bounds_and_permutation(raw in prop::collection::vec(0.0f64..1.0, 1..50), rot in 0usize..50) {
            prop_assume!(raw.iter().any(|&w| w > 0.0));
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let e = ess_weights(&w);
            prop_assert!(e >= 1.0 - 1e-12 && e <= w.len() as f64 + 1e-9);
            let mut r = w.clone();
            r.rotate_left(rot % w.len());
            prop_assert_eq!(ess_weights(&r), e);
        }
    }

    #[test]
    fn ess_examples() {
        assert!((ess_weights(&[0.25; 4]) - 4.0).abs() < 1e-12);
        assert_eq!(ess_weights(&[0.0, 1.0, 0.0]), 1.0);
        assert_eq!(ess_weights(&[0.5, 0.0, 0.5, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn replicate_examples() {
        let r = replicate_metrics(&[3.0, 3.0, 3.0], 3.0).unwrap();
        assert_eq!((r.bias, r.sd, r.rmse), (0.0, 0.0, 0.0));
        let r = replicate_metrics(&[4.0, 6.0], 5.0).unwrap();
        assert_eq!((r.bias, r.sd), (0.0, 1.0));
        assert_eq!(r.rmse, 1.0);
        let x = normals(500, 3);
        let r = replicate_metrics(&x, 0.1).unwrap();
        let m = x.iter().sum::<f64>() / 500.0;
        let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 500.0).sqrt();
        assert!((r.bias - (m - 0.1)).abs() < 1e-12 && (r.sd - sd).abs() < 1e-12);
        assert!((r.rmse.powi(2) - (r.bias.powi(2) + r.sd.powi(2))).abs() < 1e-12);
    }

    fn trapezoid(grid: &[f64], f: &[f64]) -> f64 {
        grid.windows(2).zip(f.windows(2)).map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1])).sum()
    }

    #[test]
    fn kde_examples() {
        let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
        let d = kde(&[-1.0, 1.0], None, &grid).unwrap();
        for i in 0..grid.len() {
            assert!((d[i] - d[grid.len() - 1 - i]).abs() < 1e-15);
        }
        assert!((trapezoid(&grid, &d) - 1.0).abs() < 0.01);
        let x = normals(20_000, 4);
        let g: Vec<f64> = (0..=200).map(|i| -1.0 + 0.01 * i as f64).collect();
        let peak = kde(&x, None, &g).unwrap().into_iter().fold(0.0, f64::max);
        let want = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((peak - want).abs() < 0.1 * want);
        assert_eq!(kde(&[2.0, 2.0], None, &g), Err(Error::DegenerateBandwidth));
    }

    #[test]
    fn kde_is_shift_equivariant_and_order_free() {
        let x = normals(50, 5);
        let w: Vec<f64> = (0..50).map(|i| 1.0 + (i % 3) as f64).collect();
        let grid: Vec<f64> = (0..40).map(|i| -3.0 + 0.15 * i as f64).collect();
        let base = kde(&x, Some(&w), &grid).unwrap();
        let (mut xr, mut wr) = (x.clone(), w.clone());
        xr.reverse();
        wr.reverse();
        assert_eq!(kde(&xr, Some(&wr), &grid).unwrap(), base);
        let xs: Vec<f64> = x.iter().map(|v| v + 0.75).collect();
        let gs: Vec<f64> = grid.iter().map(|v| v + 0.75).collect();
        for (a, b) in kde(&xs, Some(&w), &gs).unwrap().iter().zip(&base) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

//! Summary statistics, the Gaussian synthetic likelihood density and
//! block-statistic combination.
//!
//! Every reduction here goes through [`crate::sum`], so a statistic computed
//! from resampling counts is bitwise identical to the same statistic computed
//! on the materialised resample.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::sum::{exact_power_sums, exact_sum, exact_sum_map, ExactSum};
use crate::{Error, Result};

/// Relative tolerance for negative eigenvalues before a covariance counts as
/// not positive semi-definite.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Largest accepted covariance condition number.
pub const MAX_CONDITION: f64 = 1e12;

/// A vector of summary statistics. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryVector(Vec<f64>);

impl SummaryVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic { index });
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Multiply every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl std::ops::Index<usize> for SummaryVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Mean and covariance of a Gaussian approximation to the distribution of the
/// summary statistics.
///
/// The covariance is symmetrised on construction and, when its smallest
/// eigenvalue is negative only through rounding, shifted back to PSD.
#[derive(Debug, Clone)]
pub struct SyntheticGaussian {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl SyntheticGaussian {
    pub fn new(mean: &SummaryVector, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.dim();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: covariance.nrows() });
        }
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some(index) = covariance.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteStatistic { index });
        }
        let mut covariance = (&covariance + covariance.transpose()) * 0.5;
        let mut eigen = SymmetricEigen::new(covariance.clone());
        let (lo, hi) = extremes(eigen.eigenvalues.as_slice());
        if lo < 0.0 {
            if -lo > PSD_TOLERANCE * hi.max(0.0) {
                return Err(Error::NotPositiveSemiDefinite { min_eigenvalue: lo });
            }
            // Lift to roundoff level only; a rank-deficient matrix stays ill-conditioned.
            let shift = -lo + f64::EPSILON * d as f64 * hi;
            for i in 0..d {
                covariance[(i, i)] += shift;
            }
            eigen = SymmetricEigen::new(covariance.clone());
        }
        Ok(Self { mean: DVector::from_column_slice(mean.as_slice()), covariance, eigen })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Ratio of largest to smallest eigenvalue; infinite when singular.
    pub fn condition(&self) -> f64 {
        let (lo, hi) = extremes(self.eigen.eigenvalues.as_slice());
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

fn extremes(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Log density of `s_obs` under `g`.
pub fn gaussian_log_density(s_obs: &SummaryVector, g: &SyntheticGaussian) -> Result<f64> {
    let d = g.dim();
    if s_obs.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: s_obs.dim() });
    }
    let condition = g.condition();
    if !(condition < MAX_CONDITION) {
        return Err(Error::NonInvertibleCovariance { condition });
    }
    let delta = DVector::from_column_slice(s_obs.as_slice()) - &g.mean;
    let projected = g.eigen.eigenvectors.tr_mul(&delta);
    let values = g.eigen.eigenvalues.as_slice();
    let log_det = exact_sum_map(values, f64::ln);
    let quad_terms: Vec<f64> = projected.iter().zip(values).map(|(p, l)| p * p / l).collect();
    let quad = exact_sum(&quad_terms);
    Ok(-0.5 * (d as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * quad)
}

fn check_dims(stats: &[SummaryVector]) -> Result<usize> {
    let d = stats.first().ok_or(Error::EmptyInput)?.dim();
    match stats.iter().find(|s| s.dim() != d) {
        Some(s) => Err(Error::DimensionMismatch { expected: d, got: s.dim() }),
        None => Ok(d),
    }
}

fn column(stats: &[SummaryVector], j: usize) -> Vec<f64> {
    stats.iter().map(|s| s[j]).collect()
}

/// Elementwise average of `stats`.
pub fn sample_mean(stats: &[SummaryVector]) -> Result<SummaryVector> {
    let d = check_dims(stats)?;
    let m = stats.len() as f64;
    SummaryVector::new((0..d).map(|j| exact_sum(&column(stats, j)) / m).collect())
}

/// Unbiased sample covariance. The result is exactly symmetric.
pub fn sample_covariance(stats: &[SummaryVector]) -> Result<DMatrix<f64>> {
    if stats.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: stats.len() });
    }
    let d = check_dims(stats)?;
    let mean = sample_mean(stats)?;
    let deviations: Vec<Vec<f64>> =
        (0..d).map(|j| column(stats, j).into_iter().map(|v| v - mean[j]).collect()).collect();
    let denom = (stats.len() - 1) as f64;
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut acc = ExactSum::new();
            for (a, b) in deviations[i].iter().zip(&deviations[j]) {
                acc.add(a * b);
            }
            let v = acc.value() / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Statistics of an i.i.d. sample that can be evaluated from the first two
/// power sums, and hence from resampling counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IidStatistic {
    Mean,
    Variance,
    Sd,
}

impl std::str::FromStr for IidStatistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "variance" => Ok(Self::Variance),
            "sd" => Ok(Self::Sd),
            other => Err(Error::UnsupportedStatistic(other.to_string())),
        }
    }
}

impl IidStatistic {
    pub fn name(self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Variance => "variance",
            Self::Sd => "sd",
        }
    }

    fn min_len(self) -> usize {
        match self {
            Self::Mean => 1,
            _ => 2,
        }
    }

    /// Evaluate from `count` observations with power sums `s1`, `s2`.
    /// `constant` marks a sample whose values are all equal.
    pub(crate) fn from_power_sums(self, count: f64, s1: f64, s2: f64, constant: bool) -> f64 {
        let variance = || {
            if constant {
                0.0
            } else {
                ((s2 - s1 * s1 / count) / (count - 1.0)).max(0.0)
            }
        };
        match self {
            Self::Mean => s1 / count,
            Self::Variance => variance(),
            Self::Sd => variance().sqrt(),
        }
    }

    /// Evaluate on a materialised sample.
    pub fn evaluate(self, data: &[f64]) -> Result<f64> {
        if data.len() < self.min_len() {
            return Err(Error::InsufficientSamples { needed: self.min_len(), got: data.len() });
        }
        let (s1, s2) = exact_power_sums(data);
        let constant = data.iter().all(|&v| v == data[0]);
        let value = self.from_power_sums(data.len() as f64, s1, s2, constant);
        if !value.is_finite() {
            return Err(Error::NonFiniteStatistic { index: 0 });
        }
        Ok(value)
    }
}

/// Sample standard deviation (denominator N-1).
pub fn summarize_iid(data: &[f64]) -> Result<SummaryVector> {
    SummaryVector::scalar(IidStatistic::Sd.evaluate(data)?)
}

/// Centred moments of one series used by the predator-prey summaries.
struct SeriesMoments {
    mean: f64,
    deviations: Vec<f64>,
    ss: f64,
}

impl SeriesMoments {
    fn new(x: &[f64]) -> Result<Self> {
        let mean = exact_sum(x) / x.len() as f64;
        let deviations: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let ss = exact_sum_map(&deviations, |v| v * v);
        if ss == 0.0 || x.iter().all(|&v| v == x[0]) {
            return Err(Error::DegenerateSeries);
        }
        Ok(Self { mean, deviations, ss })
    }

    fn autocorrelation(&self, lag: usize) -> f64 {
        let d = &self.deviations;
        let mut acc = ExactSum::new();
        for t in 0..d.len() - lag {
            acc.add(d[t] * d[t + lag]);
        }
        acc.value() / self.ss
    }
}

/// The nine unscaled predator-prey summaries, in the order
/// `[mean, log variance, acf(1), acf(2)]` for `x`, the same for `y`, then the
/// lag-0 cross-correlation.
pub fn lv_raw_summaries(x: &[f64], y: &[f64]) -> Result<[f64; 9]> {
    for series in [x, y] {
        if series.len() < 3 {
            return Err(Error::InsufficientSamples { needed: 3, got: series.len() });
        }
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let mx = SeriesMoments::new(x)?;
    let my = SeriesMoments::new(y)?;
    let per_series = |m: &SeriesMoments| {
        let n = m.deviations.len() as f64;
        [m.mean, (m.ss / (n - 1.0)).ln(), m.autocorrelation(1), m.autocorrelation(2)]
    };
    let mut cross = ExactSum::new();
    for (a, b) in mx.deviations.iter().zip(&my.deviations) {
        cross.add(a * b);
    }
    let [a0, a1, a2, a3] = per_series(&mx);
    let [b0, b1, b2, b3] = per_series(&my);
    let rho = cross.value() / (mx.ss * my.ss).sqrt();
    let raw = [a0, a1, a2, a3, b0, b1, b2, b3, rho];
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteStatistic { index });
    }
    Ok(raw)
}

/// Predator-prey summaries divided elementwise by `t_obs`.
pub fn summarize_lv(x: &[f64], y: &[f64], t_obs: &SummaryVector) -> Result<SummaryVector> {
    if t_obs.dim() != 9 {
        return Err(Error::DimensionMismatch { expected: 9, got: t_obs.dim() });
    }
    if let Some(index) = t_obs.as_slice().iter().position(|&t| t == 0.0) {
        return Err(Error::InvalidScaling { index });
    }
    let raw = lv_raw_summaries(x, y)?;
    SummaryVector::new(raw.iter().zip(t_obs.as_slice()).map(|(r, t)| r / t).collect())
}

/// Sum of `y_i y_j` over nearest-neighbour pairs of a toroidal grid, each pair
/// counted once.
pub fn ising_statistic(side: usize, spins: &[i8]) -> Result<i64> {
    if side < 3 || spins.len() != side * side {
        return Err(Error::InvalidGrid { len: spins.len(), min_side: 3 });
    }
    if let Some(site) = spins.iter().position(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidSpin { site, value: spins[site] });
    }
    let mut total = 0i64;
    for r in 0..side {
        let row = &spins[r * side..(r + 1) * side];
        let below = &spins[((r + 1) % side) * side..][..side];
        for c in 0..side {
            let s = i64::from(row[c]);
            total += s * i64::from(row[(c + 1) % side]) + s * i64::from(below[c]);
        }
    }
    Ok(total)
}

/// Rule used to merge per-block statistics into the statistic of a resample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CombinationRule {
    /// Weighted average of block means, weights `n_b * B / N`.
    MeanAverage,
    /// `sum_b n_b * S_b`, multiplied by a caller-supplied rescale factor.
    ExtensiveSum { rescale: f64 },
}

impl CombinationRule {
    /// Parse a rule tag. The extensive rule starts with a unit rescale.
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "mean-average" => Ok(Self::MeanAverage),
            "extensive-sum" => Ok(Self::ExtensiveSum { rescale: 1.0 }),
            other => Err(Error::UnsupportedCombination(other.to_string())),
        }
    }
}

/// Statistics precomputed once per block of a simulated dataset.
#[derive(Debug, Clone)]
pub struct BlockStatistic {
    pub values: Vec<SummaryVector>,
    /// Elements per block: `B` for temporal blocks, tile area for spatial ones.
    pub block_len: usize,
    pub rule: CombinationRule,
}

impl BlockStatistic {
    /// Block means of every length-`block_len` window of `data`.
    pub fn temporal_means(data: &[f64], block_len: usize) -> Result<Self> {
        if block_len == 0 || block_len > data.len() {
            return Err(Error::InvalidBlockLength { block: block_len, size: data.len() });
        }
        let values = data
            .windows(block_len)
            .map(|w| SummaryVector::scalar(exact_sum(w) / block_len as f64))
            .collect::<Result<_>>()?;
        Ok(Self { values, block_len, rule: CombinationRule::MeanAverage })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Statistic of the resample that picks block `b` `counts[b]` times.
pub fn combine_block_statistics(blocks: &BlockStatistic, counts: &[u32]) -> Result<SummaryVector> {
    if counts.len() != blocks.len() {
        return Err(Error::DimensionMismatch { expected: blocks.len(), got: counts.len() });
    }
    let d = check_dims(&blocks.values)?;
    let picks: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if picks == 0 {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mut acc = ExactSum::new();
        for (v, &c) in blocks.values.iter().zip(counts) {
            acc.add_product(c, v[j]);
        }
        out.push(match blocks.rule {
            CombinationRule::MeanAverage => acc.value() / picks as f64,
            CombinationRule::ExtensiveSum { rescale } => acc.value() * rescale,
        });
    }
    SummaryVector::new(out)
}

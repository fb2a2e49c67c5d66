//! The three inference problems as [`Model`] implementations.
//!
//! A model knows how to simulate at a parameter value, reduce a dataset to
//! its summary statistics, and compute the statistics of every resample in a
//! plan.

use statrs::function::gamma::ln_gamma;

use crate::resampling::{BlbCountMatrix, BlockPlan, BlockSet, ResamplePlan, WeightedMoments};
use crate::rng::SimRng;
use crate::simulators::{
    gillespie_lv, ising_gibbs, simulate_gaussian_iid, IsingInit, IsingState, LvCaps, LvParams, LvPath,
};
use crate::stats::{
    combine_block_statistics, summarize_lv, BlockStatistic, CombinationRule, IidStatistic, SummaryVector,
};
use crate::{Error, Result};

/// How a statistic computed on `n` points relates to one on `N` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuScaling {
    /// Intensive statistics: average directly.
    Average,
    /// Statistics that grow linearly with size: multiply by `N / n`.
    Extensive,
}

pub trait Model: Sync {
    type Data: Send + Sync;

    fn param_dim(&self) -> usize;
    fn summary_dim(&self) -> usize;
    /// Size of the observed dataset.
    fn full_size(&self) -> usize;
    fn mu_scaling(&self) -> MuScaling;
    fn simulate(&self, theta: &[f64], size: usize, rng: &mut SimRng) -> Result<Self::Data>;
    fn summarize(&self, data: &Self::Data) -> Result<SummaryVector>;
    /// Statistics of every resample of `data` described by `plan`.
    fn resample_statistics(&self, data: &Self::Data, plan: &ResamplePlan) -> Result<Vec<SummaryVector>>;
}

fn wrong_plan(model: &str) -> Error {
    Error::CorruptPlan(format!("plan kind does not fit the {model} model"))
}

/// Zero-mean normal observations with unknown precision `theta[0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianToy {
    pub n: usize,
    pub statistic: IidStatistic,
}

impl GaussianToy {
    pub fn new(n: usize) -> Self {
        Self { n, statistic: IidStatistic::Sd }
    }

    /// Exact mean of the sample standard deviation of `n` draws.
    pub fn expected_sd(tau: f64, n: usize) -> f64 {
        let k = (n - 1) as f64;
        let c4 = (2.0 / k).sqrt() * (ln_gamma(n as f64 / 2.0) - ln_gamma(k / 2.0)).exp();
        c4 / tau.sqrt()
    }

    fn counts_statistics(&self, data: &[f64], counts: &BlbCountMatrix) -> Result<Vec<SummaryVector>> {
        if counts.cols() != data.len() {
            return Err(Error::CorruptPlan(format!(
                "plan has {} columns, subsample has {} points",
                counts.cols(),
                data.len()
            )));
        }
        let moments = WeightedMoments::new(data);
        (0..counts.rows()).map(|r| SummaryVector::scalar(moments.evaluate(self.statistic, counts.row(r))?)).collect()
    }
}

impl Model for GaussianToy {
    type Data = Vec<f64>;

    fn param_dim(&self) -> usize {
        1
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn full_size(&self) -> usize {
        self.n
    }

    fn mu_scaling(&self) -> MuScaling {
        MuScaling::Average
    }

    fn simulate(&self, theta: &[f64], size: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
        simulate_gaussian_iid(theta[0], size, rng)
    }

    fn summarize(&self, data: &Vec<f64>) -> Result<SummaryVector> {
        SummaryVector::scalar(self.statistic.evaluate(data)?)
    }

    fn resample_statistics(&self, data: &Vec<f64>, plan: &ResamplePlan) -> Result<Vec<SummaryVector>> {
        match plan {
            ResamplePlan::Counts(c) => self.counts_statistics(data, c),
            ResamplePlan::Iid(p) => self.counts_statistics(data, &p.to_counts()),
            ResamplePlan::Blocks(p) => {
                let BlockSet::Temporal { size, block } = *p.blocks() else {
                    return Err(wrong_plan("gaussian"));
                };
                if size != data.len() || self.statistic != IidStatistic::Mean {
                    return Err(wrong_plan("gaussian"));
                }
                let blocks = BlockStatistic::temporal_means(data, block)?;
                (0..p.rows()).map(|r| combine_block_statistics(&blocks, p.counts().row(r))).collect()
            }
        }
    }
}

/// Predator-prey process observed at regular intervals, summarised by nine
/// statistics scaled by those of the observed data.
#[derive(Debug, Clone, PartialEq)]
pub struct LotkaVolterra {
    pub x0: u64,
    pub y0: u64,
    pub delta: f64,
    pub n_obs: usize,
    pub caps: LvCaps,
    pub t_obs: SummaryVector,
}

impl LotkaVolterra {
    /// A model with unit scaling; use [`LotkaVolterra::with_scaling`] once the
    /// observed summaries are known.
    pub fn new(x0: u64, y0: u64, delta: f64, n_obs: usize) -> Self {
        Self {
            x0,
            y0,
            delta,
            n_obs,
            caps: LvCaps::default(),
            t_obs: SummaryVector::new(vec![1.0; 9]).expect("finite"),
        }
    }

    pub fn with_scaling(mut self, t_obs: SummaryVector) -> Self {
        self.t_obs = t_obs;
        self
    }
}

impl Model for LotkaVolterra {
    type Data = LvPath;

    fn param_dim(&self) -> usize {
        3
    }

    fn summary_dim(&self) -> usize {
        9
    }

    fn full_size(&self) -> usize {
        self.n_obs
    }

    fn mu_scaling(&self) -> MuScaling {
        MuScaling::Average
    }

    fn simulate(&self, theta: &[f64], size: usize, rng: &mut SimRng) -> Result<LvPath> {
        let params = LvParams::new([theta[0], theta[1], theta[2]])?;
        Ok(gillespie_lv(params, self.x0, self.y0, self.delta, size, rng, self.caps))
    }

    fn summarize(&self, data: &LvPath) -> Result<SummaryVector> {
        summarize_lv(&data.x, &data.y, &self.t_obs)
    }

    fn resample_statistics(&self, data: &LvPath, plan: &ResamplePlan) -> Result<Vec<SummaryVector>> {
        let ResamplePlan::Blocks(p) = plan else {
            return Err(wrong_plan("predator-prey"));
        };
        (0..p.rows())
            .map(|r| {
                let x = p.resample_temporal(&data.x, r)?;
                let y = p.resample_temporal(&data.y, r)?;
                summarize_lv(&x, &y, &self.t_obs)
            })
            .collect()
    }
}

/// Ising model on a square torus, summarised by the neighbour-pair sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsingModel {
    pub side: usize,
    pub sweeps: usize,
}

impl IsingModel {
    pub fn new(side: usize) -> Self {
        Self { side, sweeps: 10 }
    }

    /// Factor restoring the between-tile edges missing from a resample of
    /// area `n` assembled from tiles of side `tile`.
    pub fn rescale(n: usize, tile: usize) -> f64 {
        let n = n as f64;
        n / (n - n / tile as f64)
    }
}

/// Sum of `y_i y_j` over the non-wrapping edges inside every tile of a block
/// set, computed with two-dimensional prefix sums.
pub fn tile_statistics(state: &IsingState, blocks: &BlockSet) -> Result<Vec<i64>> {
    let BlockSet::Spatial { side, tile } = *blocks else {
        return Err(wrong_plan("ising"));
    };
    if state.side() != side {
        return Err(Error::CorruptPlan(format!("plan built for side {side}, got {}", state.side())));
    }
    // prefix[r][c] holds sums over rows < r and cols < c.
    let prefix = |edge: &dyn Fn(usize, usize) -> i64, rows: usize, cols: usize| {
        let mut p = vec![0i64; (rows + 1) * (cols + 1)];
        for r in 0..rows {
            for c in 0..cols {
                p[(r + 1) * (cols + 1) + c + 1] =
                    edge(r, c) + p[r * (cols + 1) + c + 1] + p[(r + 1) * (cols + 1) + c] - p[r * (cols + 1) + c];
            }
        }
        p
    };
    let s = |r: usize, c: usize| i64::from(state.get(r, c));
    let horizontal = prefix(&|r, c| s(r, c) * s(r, c + 1), side, side - 1);
    let vertical = prefix(&|r, c| s(r, c) * s(r + 1, c), side - 1, side);
    let rect = |p: &[i64], cols: usize, r0: usize, c0: usize, h: usize, w: usize| {
        let w1 = cols + 1;
        p[(r0 + h) * w1 + c0 + w] - p[r0 * w1 + c0 + w] - p[(r0 + h) * w1 + c0] + p[r0 * w1 + c0]
    };
    Ok((0..blocks.len())
        .map(|b| {
            let (r0, c0) = blocks.offset(b);
            rect(&horizontal, side - 1, r0, c0, tile, tile - 1) + rect(&vertical, side, r0, c0, tile - 1, tile)
        })
        .collect())
}

/// Statistics of every resample in a spatial block plan, rescaled for the
/// edges between tiles.
pub fn spatial_resample_statistics(state: &IsingState, plan: &BlockPlan) -> Result<Vec<SummaryVector>> {
    let tiles = tile_statistics(state, plan.blocks())?;
    let BlockSet::Spatial { tile, .. } = *plan.blocks() else { unreachable!() };
    let blocks = BlockStatistic {
        values: tiles.iter().map(|&v| SummaryVector::scalar(v as f64)).collect::<Result<_>>()?,
        block_len: tile * tile,
        rule: CombinationRule::ExtensiveSum { rescale: IsingModel::rescale(plan.target(), tile) },
    };
    (0..plan.rows()).map(|r| combine_block_statistics(&blocks, plan.counts().row(r))).collect()
}

impl Model for IsingModel {
    type Data = IsingState;

    fn param_dim(&self) -> usize {
        1
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn full_size(&self) -> usize {
        self.side * self.side
    }

    fn mu_scaling(&self) -> MuScaling {
        MuScaling::Extensive
    }

    fn simulate(&self, theta: &[f64], size: usize, rng: &mut SimRng) -> Result<IsingState> {
        let side = size.isqrt();
        if side * side != size {
            return Err(Error::InvalidGrid { len: size, min_side: 3 });
        }
        ising_gibbs(theta[0], side, self.sweeps, rng, IsingInit::Random)
    }

    fn summarize(&self, data: &IsingState) -> Result<SummaryVector> {
        SummaryVector::scalar(data.statistic() as f64)
    }

    fn resample_statistics(&self, data: &IsingState, plan: &ResamplePlan) -> Result<Vec<SummaryVector>> {
        let ResamplePlan::Blocks(p) = plan else {
            return Err(wrong_plan("ising"));
        };
        spatial_resample_statistics(data, p)
    }
}

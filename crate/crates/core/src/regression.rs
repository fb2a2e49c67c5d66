//! History of raw mean estimates with nearest-neighbour local linear
//! regression.
//!
//! Distances are Euclidean after dividing each parameter coordinate by the
//! running standard deviation of the stored parameters. The KD-tree is built
//! on raw coordinates; since the scaling is per coordinate, splitting planes
//! stay axis aligned and pruning remains valid under any positive weights.

use std::collections::BinaryHeap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::stats::SummaryVector;
use crate::sum::ExactSum;
use crate::table::Table;
use crate::{Error, Result};

/// Default neighbour count.
pub const DEFAULT_NEIGHBOURS: usize = 100;

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Running mean and variance per coordinate.
#[derive(Debug, Clone)]
struct Welford {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    fn weights(&self) -> Vec<f64> {
        self.m2
            .iter()
            .map(|&s| {
                let sd = if self.count > 1.0 { (s / (self.count - 1.0)).sqrt() } else { 0.0 };
                if sd > 0.0 && sd.is_finite() {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// A stored point.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredPoint {
    pub theta: Vec<f64>,
    pub mu: SummaryVector,
}

/// Growable set of `(theta, raw mu)` pairs indexed by a KD-tree.
#[derive(Debug, Clone)]
pub struct MuStore {
    dim: usize,
    points: Vec<StoredPoint>,
    nodes: Vec<Node>,
    stats: Welford,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist.total_cmp(&other.dist).then(self.index.cmp(&other.index))
    }
}

impl MuStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            nodes: Vec::new(),
            stats: Welford { count: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] },
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[StoredPoint] {
        &self.points
    }

    /// Current per-coordinate distance weights.
    pub fn metric_weights(&self) -> Vec<f64> {
        self.stats.weights()
    }

    pub fn insert(&mut self, theta: &[f64], mu: SummaryVector) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        if let Some(first) = self.points.first() {
            if first.mu.dim() != mu.dim() {
                return Err(Error::DimensionMismatch { expected: first.mu.dim(), got: mu.dim() });
            }
        }
        let index = self.points.len();
        self.points.push(StoredPoint { theta: theta.to_vec(), mu });
        self.stats.push(theta);
        if self.nodes.is_empty() {
            self.nodes.push(Node { point: index, axis: 0, left: None, right: None });
            return Ok(());
        }
        let mut at = 0;
        loop {
            let node = &self.nodes[at];
            let go_left = theta[node.axis] < self.points[node.point].theta[node.axis];
            let next = if go_left { node.left } else { node.right };
            match next {
                Some(n) => at = n,
                None => {
                    let axis = (node.axis + 1) % self.dim;
                    let new = self.nodes.len();
                    self.nodes.push(Node { point: index, axis, left: None, right: None });
                    if go_left {
                        self.nodes[at].left = Some(new);
                    } else {
                        self.nodes[at].right = Some(new);
                    }
                    return Ok(());
                }
            }
        }
    }

    fn distance(&self, weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(weights).map(|((x, y), w)| (w * (x - y)).powi(2)).sum()
    }

    /// Indices of the `l` nearest stored points, nearest first, ties broken
    /// by insertion order.
    pub fn knn_indices(&self, theta: &[f64], l: usize) -> Result<Vec<usize>> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        if l > self.len() {
            return Err(Error::InsufficientHistory { available: self.len(), requested: l });
        }
        if l == 0 {
            return Ok(Vec::new());
        }
        let weights = self.metric_weights();
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(l + 1);
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            let node = &self.nodes[at];
            let p = &self.points[node.point].theta;
            let c = Candidate { dist: self.distance(&weights, theta, p), index: node.point };
            if heap.len() < l {
                heap.push(c);
            } else if c < *heap.peek().expect("nonempty") {
                heap.pop();
                heap.push(c);
            }
            let diff = theta[node.axis] - p[node.axis];
            let plane = (weights[node.axis] * diff).powi(2);
            let (near, far) = if diff < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
            // Visit the near side last so it is popped first.
            if let Some(f) = far {
                if heap.len() < l || plane <= heap.peek().expect("nonempty").dist {
                    stack.push(f);
                }
            }
            if let Some(n) = near {
                stack.push(n);
            }
        }
        Ok(heap.into_sorted_vec().into_iter().map(|c| c.index).collect())
    }

    pub fn knn(&self, theta: &[f64], l: usize) -> Result<Vec<&StoredPoint>> {
        Ok(self.knn_indices(theta, l)?.into_iter().map(|i| &self.points[i]).collect())
    }

    /// Local linear prediction from the `min(l, len)` nearest points.
    pub fn predict(&self, theta: &[f64], l: usize) -> Result<Prediction> {
        let neighbours = self.knn(theta, l.min(self.len()))?;
        local_linear_predict(&neighbours, theta)
    }

    pub fn to_table(&self) -> Table {
        let mut columns: Vec<String> = (1..=self.dim).map(|i| format!("theta_{i}")).collect();
        let mu_dim = self.points.first().map_or(0, |p| p.mu.dim());
        columns.extend((1..=mu_dim).map(|i| format!("mu_{i}")));
        let rows =
            self.points.iter().map(|p| p.theta.iter().chain(p.mu.as_slice()).copied().collect()).collect();
        Table { columns, rows }
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        self.to_table().write_csv(path)
    }
}

/// A regression prediction and whether it fell back to the neighbour mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mu: SummaryVector,
    pub fallback_mean: bool,
}

/// Least squares fit of each coordinate of `mu` on `(1, theta - query)`,
/// returning the intercept. Falls back to the neighbour mean when the design
/// is rank deficient. Sums are exact, so the result does not depend on the
/// order of `neighbours`.
pub fn local_linear_predict(neighbours: &[&StoredPoint], query: &[f64]) -> Result<Prediction> {
    let first = neighbours.first().ok_or(Error::EmptyInput)?;
    let p = query.len();
    let d = first.mu.dim();
    let k = p + 1;
    let design: Vec<Vec<f64>> = neighbours
        .iter()
        .map(|n| std::iter::once(1.0).chain(n.theta.iter().zip(query).map(|(a, b)| a - b)).collect())
        .collect();
    let exact = |f: &dyn Fn(usize) -> f64| {
        let mut acc = ExactSum::new();
        for i in 0..neighbours.len() {
            acc.add(f(i));
        }
        acc.value()
    };
    let gram = DMatrix::from_fn(k, k, |a, b| exact(&|i| design[i][a] * design[i][b]));
    let mean = |j: usize| exact(&|i| neighbours[i].mu[j]) / neighbours.len() as f64;

    let full_rank = neighbours.len() >= k && {
        let scale = DVector::from_fn(k, |a, _| gram[(a, a)].sqrt());
        if scale.iter().any(|&s| s == 0.0) {
            false
        } else {
            let normalised = DMatrix::from_fn(k, k, |a, b| gram[(a, b)] / (scale[a] * scale[b]));
            let eig = SymmetricEigen::new(normalised).eigenvalues;
            eig.min() > 1e-10 * eig.max()
        }
    };
    if !full_rank {
        return Ok(Prediction { mu: SummaryVector::new((0..d).map(mean).collect())?, fallback_mean: true });
    }
    let chol = gram.clone().cholesky().ok_or(Error::NonInvertibleCovariance { condition: f64::INFINITY })?;
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let rhs = DVector::from_fn(k, |a, _| exact(&|i| design[i][a] * neighbours[i].mu[j]));
        out.push(chol.solve(&rhs)[0]);
    }
    Ok(Prediction { mu: SummaryVector::new(out)?, fallback_mean: false })
}

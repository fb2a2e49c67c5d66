//! Reusable resampling plans.
//!
//! A plan is drawn once from its own random stream and then shared, read
//! only, by every simulation and every parameter value. Indices are stored
//! 0-based.
//!
//! Plans serialise to a flat little-endian layout: the magic `BSLP`, a one
//! byte kind tag, a `u64` header field count, the header fields as `u64`, and
//! a row-major `u32` body.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::rng::SimRng;
use crate::stats::{IidStatistic, SummaryVector};
use crate::sum::ExactDot;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"BSLP";
const KIND_INDEX: u8 = 1;
const KIND_COUNTS: u8 = 2;
const KIND_BLOCKS: u8 = 3;

/// `R x N` bootstrap indices into a dataset of length `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMatrix {
    rows: usize,
    cols: usize,
    source_len: usize,
    seed: u64,
    entries: Vec<u32>,
}

impl IndexMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    /// Multiplicity of every source index in every row.
    pub fn to_counts(&self) -> BlbCountMatrix {
        let mut counts = vec![0u32; self.rows * self.source_len];
        for r in 0..self.rows {
            let out = &mut counts[r * self.source_len..(r + 1) * self.source_len];
            for &i in self.row(r) {
                out[i as usize] += 1;
            }
        }
        BlbCountMatrix {
            rows: self.rows,
            cols: self.source_len,
            total: self.cols,
            seed: self.seed,
            counts,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = [self.rows, self.cols, self.source_len].map(|v| v as u64);
        encode(KIND_INDEX, &header, self.seed, &self.entries)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, seed, entries) = decode(bytes, KIND_INDEX, 3)?;
        let [rows, cols, source_len] = [header[0], header[1], header[2]];
        if entries.len() != rows * cols {
            return Err(Error::CorruptPlan("body length does not match header".into()));
        }
        if entries.iter().any(|&i| i as usize >= source_len) {
            return Err(Error::CorruptPlan("index out of range".into()));
        }
        Ok(Self { rows, cols, source_len, seed, entries })
    }
}

fn check_resamples(r: usize, needed: usize) -> Result<()> {
    if r < needed {
        return Err(Error::InsufficientResamples { needed, got: r });
    }
    Ok(())
}

fn index_u32(len: usize) -> Result<u32> {
    u32::try_from(len).map_err(|_| Error::InvalidParameter(format!("size {len} exceeds u32")))
}

/// `r` rows of `n` uniform draws with replacement from `0..n`.
pub fn make_iid_plan(n: usize, r: usize, rng: &mut SimRng, seed: u64) -> Result<IndexMatrix> {
    check_resamples(r, 2)?;
    make_index_matrix(n, n, r, rng, seed)
}

/// Like [`make_iid_plan`] but without the `r >= 2` requirement and with the
/// row length decoupled from the source length.
pub fn make_index_matrix(
    source_len: usize,
    row_len: usize,
    r: usize,
    rng: &mut SimRng,
    seed: u64,
) -> Result<IndexMatrix> {
    if source_len == 0 {
        return Err(Error::EmptyInput);
    }
    let n = index_u32(source_len)?;
    let entries = (0..r * row_len).map(|_| rng.random_range(0..n)).collect();
    Ok(IndexMatrix { rows: r, cols: row_len, source_len, seed, entries })
}

/// Nonnegative counts over points or blocks; every row sums to `total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlbCountMatrix {
    rows: usize,
    cols: usize,
    total: usize,
    seed: u64,
    counts: Vec<u32>,
}

impl BlbCountMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row sum: resample size for point counts, picks for block counts.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.counts[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = [self.rows, self.cols, self.total].map(|v| v as u64);
        encode(KIND_COUNTS, &header, self.seed, &self.counts)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, seed, counts) = decode(bytes, KIND_COUNTS, 3)?;
        let [rows, cols, total] = [header[0], header[1], header[2]];
        if counts.len() != rows * cols {
            return Err(Error::CorruptPlan("body length does not match header".into()));
        }
        let plan = Self { rows, cols, total, seed, counts };
        if (0..rows).any(|r| plan.row(r).iter().map(|&c| c as usize).sum::<usize>() != total) {
            return Err(Error::CorruptPlan("count row does not sum to the declared total".into()));
        }
        Ok(plan)
    }
}

/// Multinomial counts of `big_n` uniform draws over `n` points, `r` rows.
pub fn make_blb_point_counts(
    n: usize,
    big_n: usize,
    r: usize,
    rng: &mut SimRng,
    seed: u64,
) -> Result<BlbCountMatrix> {
    if n == 0 || n > big_n {
        return Err(Error::InvalidParameter(format!("subsample size {n} must lie in 1..={big_n}")));
    }
    index_u32(big_n)?;
    let n32 = index_u32(n)?;
    let mut counts = vec![0u32; r * n];
    for row in counts.chunks_exact_mut(n) {
        for _ in 0..big_n {
            row[rng.random_range(0..n32) as usize] += 1;
        }
    }
    Ok(BlbCountMatrix { rows: r, cols: n, total: big_n, seed, counts })
}

/// Overlapping blocks of a series or tiles of a square grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSet {
    /// Windows `i..i + block` of a length-`size` series.
    Temporal { size: usize, block: usize },
    /// `tile x tile` windows of a `side x side` grid that never wrap.
    Spatial { side: usize, tile: usize },
}

impl BlockSet {
    pub fn len(&self) -> usize {
        match *self {
            Self::Temporal { size, block } => size - block + 1,
            Self::Spatial { side, tile } => (side - tile + 1).pow(2),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements per block.
    pub fn block_len(&self) -> usize {
        match *self {
            Self::Temporal { block, .. } => block,
            Self::Spatial { tile, .. } => tile * tile,
        }
    }

    /// 0-based half-open range of temporal block `b`.
    pub fn range(&self, b: usize) -> std::ops::Range<usize> {
        match *self {
            Self::Temporal { block, .. } => b..b + block,
            Self::Spatial { .. } => panic!("range() called on a spatial block set"),
        }
    }

    /// Top-left `(row, col)` of spatial tile `b`.
    pub fn offset(&self, b: usize) -> (usize, usize) {
        match *self {
            Self::Spatial { side, tile } => (b / (side - tile + 1), b % (side - tile + 1)),
            Self::Temporal { .. } => (0, b),
        }
    }

    fn encode(&self) -> [u64; 3] {
        match *self {
            Self::Temporal { size, block } => [0, size as u64, block as u64],
            Self::Spatial { side, tile } => [1, side as u64, tile as u64],
        }
    }

    fn decode(fields: &[usize]) -> Result<Self> {
        match fields {
            [0, size, block] if (1..=*size).contains(block) => {
                Ok(Self::Temporal { size: *size, block: *block })
            }
            [1, side, tile] if (1..=*side).contains(tile) => {
                Ok(Self::Spatial { side: *side, tile: *tile })
            }
            _ => Err(Error::CorruptPlan("invalid block set".into())),
        }
    }
}

/// All `n - b + 1` overlapping length-`b` blocks of a length-`n` series.
pub fn make_block_set(n: usize, b: usize) -> Result<BlockSet> {
    if b == 0 || b > n || n % b != 0 {
        return Err(Error::InvalidBlockLength { block: b, size: n });
    }
    Ok(BlockSet::Temporal { size: n, block: b })
}

/// All tiles of side `tile` inside a `side x side` grid, for assembling
/// resamples of side `target`.
pub fn make_spatial_block_set(side: usize, tile: usize, target: usize) -> Result<BlockSet> {
    if tile == 0 || tile > side || target % tile != 0 {
        return Err(Error::InvalidTile { tile, side, target });
    }
    Ok(BlockSet::Spatial { side, tile })
}

/// Ordered block picks for `rows` resamples plus their per-block counts.
///
/// Temporal resamples concatenate the picked blocks in order. Spatial
/// resamples lay picked tiles out row-major over a `target x target` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPlan {
    blocks: BlockSet,
    target: usize,
    picks_per_row: usize,
    picks: IndexMatrix,
    counts: BlbCountMatrix,
}

impl BlockPlan {
    pub fn blocks(&self) -> &BlockSet {
        &self.blocks
    }

    /// Size of each resample: a length for temporal plans, an area for
    /// spatial ones.
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn rows(&self) -> usize {
        self.picks.rows()
    }

    pub fn seed(&self) -> u64 {
        self.picks.seed()
    }

    pub fn picks(&self, r: usize) -> &[u32] {
        self.picks.row(r)
    }

    pub fn counts(&self) -> &BlbCountMatrix {
        &self.counts
    }

    /// Materialise temporal resample `r` of `data`.
    pub fn resample_temporal(&self, data: &[f64], r: usize) -> Result<Vec<f64>> {
        let BlockSet::Temporal { size, .. } = self.blocks else {
            return Err(Error::UnsupportedCombination("temporal resample of a spatial plan".into()));
        };
        if data.len() != size {
            return Err(Error::CorruptPlan(format!("plan built for length {size}, got {}", data.len())));
        }
        let mut out = Vec::with_capacity(self.target);
        for &b in self.picks(r) {
            out.extend_from_slice(&data[self.blocks.range(b as usize)]);
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let [a, b, c] = self.blocks.encode();
        let header = [self.picks.rows() as u64, self.picks_per_row as u64, self.target as u64, a, b, c];
        encode(KIND_BLOCKS, &header, self.seed(), &self.picks.entries)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, seed, entries) = decode(bytes, KIND_BLOCKS, 6)?;
        let blocks = BlockSet::decode(&h[3..6])?;
        let (rows, per_row, target) = (h[0], h[1], h[2]);
        if entries.len() != rows * per_row || per_row * blocks.block_len() != target {
            return Err(Error::CorruptPlan("body length does not match header".into()));
        }
        let picks = IndexMatrix { rows, cols: per_row, source_len: blocks.len(), seed, entries };
        if picks.entries.iter().any(|&b| b as usize >= blocks.len()) {
            return Err(Error::CorruptPlan("block index out of range".into()));
        }
        let counts = picks.to_counts();
        Ok(Self { blocks, target, picks_per_row: per_row, picks, counts })
    }
}

/// Draw `target / B` uniform block picks per row, `r` rows.
///
/// `target` is a length for temporal blocks and a grid side for tiles.
pub fn make_block_plan(
    blocks: BlockSet,
    target: usize,
    r: usize,
    rng: &mut SimRng,
    seed: u64,
) -> Result<BlockPlan> {
    let (per_row, size) = match blocks {
        BlockSet::Temporal { block, .. } => {
            if target % block != 0 || target == 0 {
                return Err(Error::InvalidBlockLength { block, size: target });
            }
            (target / block, target)
        }
        BlockSet::Spatial { side, tile } => {
            if target % tile != 0 || target == 0 {
                return Err(Error::InvalidTile { tile, side, target });
            }
            ((target / tile).pow(2), target * target)
        }
    };
    let picks = make_index_matrix(blocks.len(), per_row, r, rng, seed)?;
    let counts = picks.to_counts();
    Ok(BlockPlan { blocks, target: size, picks_per_row: per_row, picks, counts })
}

/// The values of `data` at the indices of one plan row.
pub fn resample_iid(data: &[f64], row: &[u32]) -> Result<Vec<f64>> {
    row.iter()
        .map(|&i| {
            data.get(i as usize).copied().ok_or_else(|| {
                Error::CorruptPlan(format!("index {i} out of range for length {}", data.len()))
            })
        })
        .collect()
}

/// Precomputed sums over a subsample for repeated count-weighted statistics.
#[derive(Debug, Clone)]
pub struct WeightedMoments {
    linear: ExactDot,
    squares: ExactDot,
    constant: bool,
}

impl WeightedMoments {
    pub fn new(subsample: &[f64]) -> Self {
        Self {
            linear: ExactDot::new(subsample),
            squares: ExactDot::from_map(subsample, |x| x * x),
            constant: subsample.iter().all(|&x| x == subsample[0]),
        }
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }

    /// Statistic of the virtual resample with multiplicities `counts`.
    pub fn evaluate(&self, kind: IidStatistic, counts: &[u32]) -> Result<f64> {
        if counts.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: counts.len() });
        }
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        let needed = if kind == IidStatistic::Mean { 1 } else { 2 };
        if total < needed {
            return Err(Error::InsufficientSamples { needed: needed as usize, got: total as usize });
        }
        let s1 = self.linear.dot(counts);
        let s2 = if kind == IidStatistic::Mean { 0.0 } else { self.squares.dot(counts) };
        let constant = self.constant || {
            let x = self.linear.terms();
            let mut selected = x.iter().zip(counts).filter(|(_, &c)| c > 0).map(|(v, _)| *v);
            let first = selected.next().unwrap_or(0.0);
            selected.all(|v| v == first)
        };
        let value = kind.from_power_sums(total as f64, s1, s2, constant);
        if !value.is_finite() {
            return Err(Error::NonFiniteStatistic { index: 0 });
        }
        Ok(value)
    }
}

/// Statistic of the size-`sum(counts)` resample of `subsample` with the given
/// multiplicities, without materialising it.
pub fn weighted_statistic(
    subsample: &[f64],
    counts: &[u32],
    kind: IidStatistic,
) -> Result<SummaryVector> {
    SummaryVector::scalar(WeightedMoments::new(subsample).evaluate(kind, counts)?)
}

fn encode(kind: u8, header: &[u64], seed: u64, body: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * (header.len() + 1) + 4 * body.len());
    out.extend_from_slice(MAGIC);
    out.push(kind);
    out.extend_from_slice(&(header.len() as u64 + 1).to_le_bytes());
    for v in header.iter().chain(std::iter::once(&seed)) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in body {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8], kind: u8, fields: usize) -> Result<(Vec<usize>, u64, Vec<u32>)> {
    let corrupt = |m: &str| Error::CorruptPlan(m.to_string());
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if bytes[4] != kind {
        return Err(corrupt("unexpected plan kind"));
    }
    let word = |at: usize| -> Result<u64> {
        let slice = bytes.get(at..at + 8).ok_or_else(|| corrupt("truncated header"))?;
        Ok(u64::from_le_bytes(slice.try_into().expect("8 bytes")))
    };
    if word(5)? != fields as u64 + 1 {
        return Err(corrupt("unexpected header length"));
    }
    let header = (0..fields)
        .map(|i| word(13 + 8 * i).and_then(|v| usize::try_from(v).map_err(|_| corrupt("size overflow"))))
        .collect::<Result<Vec<_>>>()?;
    let seed = word(13 + 8 * fields)?;
    let body = &bytes[21 + 8 * fields..];
    if body.len() % 4 != 0 {
        return Err(corrupt("truncated body"));
    }
    let entries = body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok((header, seed, entries))
}

/// A plan of any kind, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResamplePlan {
    Iid(IndexMatrix),
    Counts(BlbCountMatrix),
    Blocks(BlockPlan),
}

impl ResamplePlan {
    pub fn rows(&self) -> usize {
        match self {
            Self::Iid(p) => p.rows(),
            Self::Counts(p) => p.rows(),
            Self::Blocks(p) => p.rows(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Self::Iid(p) => p.to_bytes(),
            Self::Counts(p) => p.to_bytes(),
            Self::Blocks(p) => p.to_bytes(),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.get(4) {
            Some(&KIND_INDEX) => IndexMatrix::from_bytes(bytes).map(Self::Iid),
            Some(&KIND_COUNTS) => BlbCountMatrix::from_bytes(bytes).map(Self::Counts),
            Some(&KIND_BLOCKS) => BlockPlan::from_bytes(bytes).map(Self::Blocks),
            _ => Err(Error::CorruptPlan("unknown plan kind".into())),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
